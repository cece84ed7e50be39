//! Pairwise-independent hash families `{0,1}^ell -> [k]`.
//!
//! Two families share the [`HashFn`] type:
//!
//! * [`HashFamily::Gf2Affine`]: `x ↦ A·x ⊕ v` over GF(2). Exactly pairwise
//!   independent, but the codomain must have size `2^j`.
//! * [`HashFamily::AffineModPrime`]: `x ↦ ((a·x + b) mod p) mod k` for a
//!   Mersenne prime `p`. Works for every `k`; the reduction mod `k` leaves a
//!   bias of at most [`HashFn::pairwise_bias_bound`] against exact pairwise
//!   independence.
//!
//! Codomain elements are 0-indexed: `[k] = {0, …, k-1}`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{check_ell, dot};
use crate::error::{Error, Result};

/// Mersenne exponents usable as the affine family's modulus `2^e - 1`.
const MERSENNE_EXPONENTS: [u32; 2] = [61, 89];

/// Required ratio `p / k` for the affine family.
const PRIME_MARGIN_BITS: u32 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HashFamily {
    Gf2Affine,
    AffineModPrime,
}

impl std::str::FromStr for HashFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gf2_affine" => Ok(HashFamily::Gf2Affine),
            "affine_mod_prime" => Ok(HashFamily::AffineModPrime),
            _ => Err(Error::InvalidParameter(format!("unknown hash family {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Params {
    /// One row mask per output bit, most significant output bit first.
    Gf2Affine { rows: Vec<u32>, shift: u32 },
    AffineModPrime { a: u128, b: u128, p_exp: u32 },
}

/// A sampled member of one of the hash families. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "HashFnWire", try_from = "HashFnWire")]
pub struct HashFn {
    ell: u32,
    k: u64,
    params: Params,
}

impl HashFn {
    /// Builds `x ↦ A·x ⊕ v` with `rows.len() = j` rows of `ell` bits each.
    pub fn gf2_affine(ell: u32, rows: Vec<u32>, shift: u32) -> Result<Self> {
        check_ell(ell)?;
        let j = rows.len() as u32;
        if j > 32 {
            return Err(Error::InvalidParameter(format!("{j} output bits")));
        }
        let in_mask = crate::bits::mask(ell) as u32;
        if rows.iter().any(|&r| r & !in_mask != 0) || (j < 32 && shift >> j != 0) {
            return Err(Error::InvalidParameter("row or shift wider than declared".into()));
        }
        Ok(HashFn {
            ell,
            k: 1u64 << j,
            params: Params::Gf2Affine { rows, shift },
        })
    }

    /// The identity member of the GF(2) family (`A = I`, `v = 0`).
    pub fn identity(ell: u32) -> Result<Self> {
        let rows = (0..ell).rev().map(|i| 1u32 << i).collect();
        HashFn::gf2_affine(ell, rows, 0)
    }

    /// Builds `x ↦ ((a·x + b) mod p) mod k` with `p = 2^p_exp - 1`.
    pub fn affine_mod_prime(ell: u32, k: u64, a: u128, b: u128, p_exp: u32) -> Result<Self> {
        check_ell(ell)?;
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if !MERSENNE_EXPONENTS.contains(&p_exp) {
            return Err(Error::InvalidParameter(format!("2^{p_exp}-1 is not a supported prime")));
        }
        let p = (1u128 << p_exp) - 1;
        if p < (1u128 << ell) || p < (k as u128) << PRIME_MARGIN_BITS {
            return Err(Error::CodomainTooLarge { k, ell });
        }
        if a >= p || b >= p {
            return Err(Error::InvalidParameter("coefficients must lie in Z_p".into()));
        }
        Ok(HashFn {
            ell,
            k,
            params: Params::AffineModPrime { a, b, p_exp },
        })
    }

    pub fn family(&self) -> HashFamily {
        match self.params {
            Params::Gf2Affine { .. } => HashFamily::Gf2Affine,
            Params::AffineModPrime { .. } => HashFamily::AffineModPrime,
        }
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    /// Evaluates the hash on an `ell`-bit input.
    #[inline]
    pub fn eval(&self, x: u32) -> u64 {
        match &self.params {
            Params::Gf2Affine { rows, shift } => {
                let bits = rows.iter().fold(0u64, |acc, &row| (acc << 1) | dot(row, x) as u64);
                bits ^ *shift as u64
            }
            Params::AffineModPrime { a, b, p_exp } => {
                let p = (1u128 << p_exp) - 1;
                let v = a * x as u128 + b;
                let mut r = (v & p) + (v >> p_exp);
                if r >= p {
                    r -= p;
                }
                (r % self.k as u128) as u64
            }
        }
    }

    /// `{x ∈ set : h(x) = y}`, sorted.
    pub fn preimage_in_set(&self, y: u64, set: &[u32]) -> Vec<u32> {
        let mut out: Vec<u32> = set.iter().copied().filter(|&x| self.eval(x) == y).collect();
        out.sort_unstable();
        out
    }

    /// Upper bound on `|Pr[h(x)=y ∧ h(x')=y'] - 1/k²|` over the family.
    pub fn pairwise_bias_bound(&self) -> f64 {
        match self.params {
            Params::Gf2Affine { .. } => 0.0,
            Params::AffineModPrime { p_exp, .. } => {
                if self.k == 1 {
                    return 0.0;
                }
                let ratio = self.k as f64 / ((1u128 << p_exp) - 1) as f64;
                2.0 * ratio + ratio * ratio
            }
        }
    }
}

/// Draws a uniformly random member of `family` with domain `{0,1}^ell` and
/// codomain `[k]`.
pub fn sample_hash<R: Rng + ?Sized>(family: HashFamily, ell: u32, k: u64, rng: &mut R) -> Result<HashFn> {
    check_ell(ell)?;
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    match family {
        HashFamily::Gf2Affine => {
            if !k.is_power_of_two() || k > 1u64 << 32 {
                return Err(Error::InvalidK { k });
            }
            let j = k.trailing_zeros();
            let in_mask = crate::bits::mask(ell) as u32;
            let rows = (0..j).map(|_| rng.random::<u32>() & in_mask).collect();
            let shift = if j == 0 { 0 } else { rng.random::<u32>() & crate::bits::mask(j) as u32 };
            HashFn::gf2_affine(ell, rows, shift)
        }
        HashFamily::AffineModPrime => {
            let p_exp = prime_exponent_for(ell, k)?;
            let p = (1u128 << p_exp) - 1;
            let a = rng.random_range(0..p);
            let b = rng.random_range(0..p);
            HashFn::affine_mod_prime(ell, k, a, b, p_exp)
        }
    }
}

fn prime_exponent_for(ell: u32, k: u64) -> Result<u32> {
    MERSENNE_EXPONENTS
        .iter()
        .copied()
        .find(|&e| {
            let p = (1u128 << e) - 1;
            p >= 1u128 << ell && p >= (k as u128) << PRIME_MARGIN_BITS
        })
        .ok_or(Error::CodomainTooLarge { k, ell })
}

/// Every member of the GF(2)-affine family `{0,1}^ell -> [k]`, each exactly
/// once. The family has `2^(j·ell + j)` members for `k = 2^j`.
pub fn gf2_affine_family(ell: u32, k: u64) -> Result<impl Iterator<Item = HashFn>> {
    check_ell(ell)?;
    if !k.is_power_of_two() {
        return Err(Error::InvalidK { k });
    }
    let j = k.trailing_zeros();
    let total_bits = j * ell + j;
    if total_bits > 24 {
        return Err(Error::InvalidParameter(format!(
            "family of 2^{total_bits} members is too large to enumerate"
        )));
    }
    let row_mask = crate::bits::mask(ell) as u32;
    Ok((0u64..1 << total_bits).map(move |code| {
        let rows = (0..j)
            .map(|i| ((code >> (i * ell)) as u32) & row_mask)
            .collect();
        let shift = (code >> (j * ell)) as u32;
        HashFn::gf2_affine(ell, rows, shift).expect("enumerated member is valid")
    }))
}

#[derive(Serialize, Deserialize)]
struct HashFnWire {
    family: HashFamily,
    ell: u32,
    k: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shift: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    a: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    p_exponent: Option<u32>,
}

impl From<HashFn> for HashFnWire {
    fn from(h: HashFn) -> Self {
        let mut wire = HashFnWire {
            family: h.family(),
            ell: h.ell,
            k: h.k,
            rows: None,
            shift: None,
            a: None,
            b: None,
            p_exponent: None,
        };
        match h.params {
            Params::Gf2Affine { rows, shift } => {
                wire.rows = Some(rows.iter().map(|r| format!("{r:x}")).collect());
                wire.shift = Some(format!("{shift:x}"));
            }
            Params::AffineModPrime { a, b, p_exp } => {
                wire.a = Some(a.to_string());
                wire.b = Some(b.to_string());
                wire.p_exponent = Some(p_exp);
            }
        }
        wire
    }
}

impl TryFrom<HashFnWire> for HashFn {
    type Error = Error;

    fn try_from(w: HashFnWire) -> Result<Self> {
        let bad = |what: &str| Error::InvalidParameter(format!("hash JSON: {what}"));
        let h = match w.family {
            HashFamily::Gf2Affine => {
                let rows = w
                    .rows
                    .ok_or_else(|| bad("missing rows"))?
                    .iter()
                    .map(|r| u32::from_str_radix(r, 16).map_err(|_| bad("row")))
                    .collect::<Result<Vec<_>>>()?;
                let shift = u32::from_str_radix(&w.shift.ok_or_else(|| bad("missing shift"))?, 16)
                    .map_err(|_| bad("shift"))?;
                HashFn::gf2_affine(w.ell, rows, shift)?
            }
            HashFamily::AffineModPrime => {
                let parse = |s: Option<String>, name: &str| -> Result<u128> {
                    s.ok_or_else(|| bad(name))?.parse().map_err(|_| bad(name))
                };
                HashFn::affine_mod_prime(
                    w.ell,
                    w.k,
                    parse(w.a, "a")?,
                    parse(w.b, "b")?,
                    w.p_exponent.ok_or_else(|| bad("p_exponent"))?,
                )?
            }
        };
        if h.k != w.k {
            return Err(bad("k disagrees with the number of rows"));
        }
        Ok(h)
    }
}
