//! Goldreich–Levin list decoding of the inner-product predicate.
//!
//! Each run draws `t` random vectors `z_1..z_t` and guesses all `2^t`
//! possible values of `(⟨z_i, s⟩)_i` at once. Every nonempty subset `T` gives
//! a query point `ρ_T = ⊕_{i∈T} z_i` whose inner product with `s` is known
//! under the guess, and the points are pairwise independent. Bit `i` of the
//! candidate for guess `g` is the majority of `oracle(ρ_T ⊕ e_i) ⊕ ⟨g, T⟩`,
//! which for all guesses together is one Walsh–Hadamard transform over
//! subset space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{check_ell, dot, mask};
use crate::error::{Error, Result};
use crate::wht::fwht_in_place;

/// Largest number of random vectors per run.
const MAX_BATCH_BITS: u32 = 16;

/// A deterministic predictor for `ξ ↦ ⟨ξ, s⟩`.
pub struct PredictionOracle<'a> {
    ell: u32,
    f: Box<dyn FnMut(u32) -> Result<u8> + 'a>,
    queries: u64,
}

impl<'a> PredictionOracle<'a> {
    pub fn new(ell: u32, f: impl FnMut(u32) -> Result<u8> + 'a) -> Self {
        PredictionOracle {
            ell,
            f: Box::new(f),
            queries: 0,
        }
    }

    pub fn ell(&self) -> u32 {
        self.ell
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn query(&mut self, xi: u32) -> Result<u8> {
        self.queries += 1;
        Ok((self.f)(xi)? & 1)
    }
}

impl std::fmt::Debug for PredictionOracle<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PredictionOracle")
            .field("ell", &self.ell)
            .field("queries", &self.queries)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlParams {
    /// Advantage `ε′` the list must cover: every `s` with
    /// `Pr_ξ[oracle(ξ) = ⟨ξ, s⟩] ≥ 1/2 + ε′`.
    pub advantage: f64,
    /// Failure probability `δ`.
    pub delta: f64,
}

impl GlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.advantage > 0.0 && self.advantage <= 0.5) {
            return Err(Error::InvalidParameter(format!("advantage must lie in (0, 1/2], got {}", self.advantage)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }

    /// Random vectors per run: `2^t - 1 ≥ ell / (2ε′²)`.
    pub fn batch_bits(&self, ell: u32) -> u32 {
        let per_bit = (ell as f64 / (2.0 * self.advantage * self.advantage)).ceil();
        ((per_bit + 1.0).log2().ceil() as u32).clamp(1, MAX_BATCH_BITS)
    }

    /// Independent runs: `⌈log2(1/δ)⌉`.
    pub fn runs(&self) -> u32 {
        (1.0 / self.delta).log2().ceil().max(1.0) as u32
    }

    /// Fresh samples for the agreement filter over a list of `list_len`.
    pub fn filter_samples(&self, list_len: usize) -> u64 {
        let half = self.advantage / 2.0;
        ((2.0 * list_len.max(1) as f64 / self.delta).ln() / (2.0 * half * half)).ceil() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GlOutput {
    /// Sorted, deduplicated survivors of the agreement filter.
    pub candidates: Vec<u32>,
    /// Distinct candidates before filtering.
    pub unfiltered: usize,
    pub queries: u64,
}

fn decode_run<R: Rng + ?Sized>(oracle: &mut PredictionOracle, t: u32, rng: &mut R) -> Result<Vec<u32>> {
    let ell = oracle.ell();
    let size = 1usize << t;
    let z: Vec<u32> = (0..t).map(|_| (rng.random::<u64>() & mask(ell)) as u32).collect();
    let mut rho = vec![0u32; size];
    for subset in 1..size {
        let low = subset.trailing_zeros() as usize;
        rho[subset] = rho[subset & (subset - 1)] ^ z[low];
    }
    let mut guesses = vec![0u32; size];
    let mut votes = vec![0i64; size];
    for i in 0..ell {
        votes[0] = 0;
        for subset in 1..size {
            let o = oracle.query(rho[subset] ^ (1 << i))?;
            votes[subset] = if o == 0 { 1 } else { -1 };
        }
        fwht_in_place(&mut votes);
        for (g, &v) in votes.iter().enumerate() {
            if v < 0 {
                guesses[g] |= 1 << i;
            }
        }
    }
    Ok(guesses)
}

/// Returns a short list containing, with probability at least `1 - δ`, every
/// `s` the oracle predicts with advantage `ε′`.
///
/// The unit-vector candidate `(oracle(e_i))_i` is always added, which makes
/// recovery deterministic for a perfect oracle.
pub fn goldreich_levin<R: Rng + ?Sized>(oracle: &mut PredictionOracle, params: GlParams, rng: &mut R) -> Result<GlOutput> {
    params.validate()?;
    let ell = oracle.ell();
    check_ell(ell)?;
    let t = params.batch_bits(ell);
    let mut list = Vec::new();
    for _ in 0..params.runs() {
        list.extend(decode_run(oracle, t, rng)?);
    }
    let mut shortcut = 0u32;
    for i in 0..ell {
        shortcut |= u32::from(oracle.query(1 << i)?) << i;
    }
    list.push(shortcut);
    list.sort_unstable();
    list.dedup();

    let n = params.filter_samples(list.len());
    let mut samples = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let xi = (rng.random::<u64>() & mask(ell)) as u32;
        samples.push((xi, oracle.query(xi)?));
    }
    let need = (0.5 + params.advantage / 2.0) * n as f64;
    let unfiltered = list.len();
    list.retain(|&s| samples.iter().filter(|&&(xi, o)| dot(xi, s) == o).count() as f64 >= need);
    Ok(GlOutput {
        candidates: list,
        unfiltered,
        queries: oracle.queries(),
    })
}
