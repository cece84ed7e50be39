//! Dense statevector reference for the honest prover's challenge phase.
//!
//! Amplitudes live on `|c⟩|x⟩` for the whole `ell`-qubit register. The
//! Hadamard layer is applied by an explicit `2^ell × 2^ell` sum, so the cost
//! is quartic in `2^ell`; keep `ell ≤ 8`.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_8;

use ivpoq::hashing::HashFn;

pub const MAX_DENSE_ELL: u32 = 8;

/// `Pr[y, d, η]` for a uniform superposition over `{0}×s0 ∪ {1}×s1`,
/// hash pair `(h0, h1)`, challenge `xi` and basis choice `v2`.
pub fn joint_law(ell: u32, s0: &[u32], s1: &[u32], h0: &HashFn, h1: &HashFn, xi: u32, v2: u8) -> BTreeMap<(u64, u32, u8), f64> {
    assert!(ell <= MAX_DENSE_ELL);
    let n = 1usize << ell;
    let total = (s0.len() + s1.len()) as f64;
    let mut amp = vec![[0.0f64; 2]; n];
    let mut label = vec![[u64::MAX; 2]; n];
    for &x in s0 {
        amp[x as usize][0] = 1.0 / total.sqrt();
        label[x as usize][0] = h0.eval(x);
    }
    for &x in s1 {
        amp[x as usize][1] = 1.0 / total.sqrt();
        label[x as usize][1] = h1.eval(x);
    }
    let mut ys: Vec<u64> = label.iter().flatten().copied().filter(|&y| y != u64::MAX).collect();
    ys.sort_unstable();
    ys.dedup();

    let parity = |a: u32, b: u32| (a & b).count_ones() & 1;
    let (cos, sin) = (FRAC_PI_8.cos(), FRAC_PI_8.sin());
    let sin = if v2 == 0 { sin } else { -sin };
    let scale = 1.0 / (n as f64).sqrt();

    let mut law = BTreeMap::new();
    for y in ys {
        let mut relabelled = vec![[0.0f64; 2]; n];
        for x in 0..n {
            for b in 0..2 {
                if label[x][b] == y {
                    let c = b ^ parity(xi, x as u32) as usize;
                    relabelled[x][c] += amp[x][b];
                }
            }
        }
        for d in 0..n {
            let mut out = [0.0f64; 2];
            for (x, a) in relabelled.iter().enumerate() {
                let sign = if parity(d as u32, x as u32) == 0 { 1.0 } else { -1.0 };
                out[0] += sign * a[0];
                out[1] += sign * a[1];
            }
            out[0] *= scale;
            out[1] *= scale;
            let p0 = (cos * out[0] + sin * out[1]).powi(2);
            let p1 = (-sin * out[0] + cos * out[1]).powi(2);
            for (eta, p) in [(0u8, p0), (1u8, p1)] {
                if p > 0.0 {
                    law.insert((y, d as u32, eta), p);
                }
            }
        }
    }
    law
}

/// Half the L1 distance between two sparse laws.
pub fn total_variation(a: &BTreeMap<(u64, u32, u8), f64>, b: &BTreeMap<(u64, u32, u8), f64>) -> f64 {
    let mut keys: Vec<_> = a.keys().chain(b.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    keys.iter()
        .map(|k| (a.get(k).copied().unwrap_or(0.0) - b.get(k).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
        / 2.0
}
