//! Fast Walsh–Hadamard transform over integer vectors.

/// In-place unnormalized Walsh–Hadamard transform.
///
/// After the call `data[d] = Σ_x (-1)^{d·x} data_in[x]`. The length must be a
/// power of two. Integer inputs stay exact: no normalization is applied.
pub fn fwht_in_place(data: &mut [i64]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "WHT length must be a power of two");
    let mut h = 1;
    while h < n {
        for block in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

pub fn fwht(data: &[i64]) -> Vec<i64> {
    let mut out = data.to_vec();
    fwht_in_place(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::dot;
    use proptest::prelude::*;

    fn naive(data: &[i64]) -> Vec<i64> {
        (0..data.len())
            .map(|d| {
                data.iter()
                    .enumerate()
                    .map(|(x, &v)| if dot(d as u32, x as u32) == 0 { v } else { -v })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn delta_transforms_to_character() {
        let mut v = vec![0i64; 8];
        v[0b101] = 1;
        let t = fwht(&v);
        for (d, &a) in t.iter().enumerate() {
            let expect = if dot(d as u32, 0b101) == 0 { 1 } else { -1 };
            assert_eq!(a, expect);
        }
    }

    #[test]
    fn length_one_is_identity() {
        assert_eq!(fwht(&[7]), vec![7]);
    }

    proptest! {
        #[test]
        fn matches_naive(log_n in 0u32..7, seed in any::<u64>()) {
            let n = 1usize << log_n;
            let data: Vec<i64> = (0..n as u64)
                .map(|i| ((seed.wrapping_mul(i + 1) >> 17) % 7) as i64 - 3)
                .collect();
            prop_assert_eq!(fwht(&data), naive(&data));
        }

        #[test]
        fn involution_up_to_scale(log_n in 0u32..8, seed in any::<u64>()) {
            let n = 1usize << log_n;
            let data: Vec<i64> = (0..n as u64).map(|i| ((seed >> (i % 60)) & 3) as i64).collect();
            let twice = fwht(&fwht(&data));
            let scaled: Vec<i64> = data.iter().map(|v| v * n as i64).collect();
            prop_assert_eq!(twice, scaled);
        }
    }
}
