//! The honest quantum prover, simulated exactly.
//!
//! Until the Hadamard measurement the prover's state is always
//! `(Σ_{x∈S0} |0⟩|x⟩ + Σ_{x∈S1} |1⟩|x⟩) / √(|S0| + |S1|)`, because every
//! operation before it computes a classical function into a fresh register and
//! measures that register. Such a state is described completely by the pair
//! of supports. Each measurement below is therefore given first as an exact
//! law over integers, and the samplers draw from those laws.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_8;

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::bits::{check_ell, dot};
use crate::commitment::{CommitTranscript, CommitmentScheme, Decommitment, Message, Round};
use crate::error::{Error, Result};
use crate::hashing::HashFn;
use crate::verifier::Prover;
use crate::wht::fwht_in_place;

/// Largest `ell` for which the `2^ell`-entry Hadamard spectrum is built.
pub const MAX_SPECTRUM_ELL: u32 = 20;

/// Supports of the two committed-bit branches of a uniform superposition.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SupportState {
    pub ell: u32,
    pub s0: Vec<u32>,
    pub s1: Vec<u32>,
}

impl SupportState {
    /// Sorts and deduplicates both supports.
    pub fn new(ell: u32, mut s0: Vec<u32>, mut s1: Vec<u32>) -> Result<Self> {
        check_ell(ell)?;
        let limit = 1u64 << ell;
        if s0.iter().chain(&s1).any(|&x| u64::from(x) >= limit) {
            return Err(Error::InvalidParameter(format!("support element exceeds {ell} bits")));
        }
        s0.sort_unstable();
        s0.dedup();
        s1.sort_unstable();
        s1.dedup();
        Ok(SupportState { ell, s0, s1 })
    }

    /// The uniform superposition over all of `{0,1} × {0,1}^ell`.
    pub fn full(ell: u32) -> Result<Self> {
        check_ell(ell)?;
        let all: Vec<u32> = (0..1u32 << ell).collect();
        Ok(SupportState {
            ell,
            s0: all.clone(),
            s1: all,
        })
    }

    pub fn branch(&self, b: u8) -> &[u32] {
        if b == 0 {
            &self.s0
        } else {
            &self.s1
        }
    }

    pub fn len(&self) -> usize {
        self.s0.len() + self.s1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The `i`-th element of the concatenation `({0} × S0) ∪ ({1} × S1)`.
    fn element(&self, i: usize) -> (u8, u32) {
        if i < self.s0.len() {
            (0, self.s0[i])
        } else {
            (1, self.s1[i - self.s0.len()])
        }
    }

    fn sample_element<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(u8, u32)> {
        if self.is_empty() {
            return Err(Error::EmptyState);
        }
        Ok(self.element(rng.random_range(0..self.len())))
    }

    fn filter(&self, mut keep: impl FnMut(u8, u32) -> Result<bool>) -> Result<Self> {
        let mut s0 = Vec::new();
        for &x in &self.s0 {
            if keep(0, x)? {
                s0.push(x);
            }
        }
        let mut s1 = Vec::new();
        for &x in &self.s1 {
            if keep(1, x)? {
                s1.push(x);
            }
        }
        Ok(SupportState { ell: self.ell, s0, s1 })
    }
}

/// Unnormalized amplitudes of the qubit left after the Hadamard measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualQubit {
    pub a0: f64,
    pub a1: f64,
}

impl ResidualQubit {
    pub fn norm_sqr(&self) -> f64 {
        self.a0 * self.a0 + self.a1 * self.a1
    }
}

/// Exact law of the round-`j` sender message: message ↦ number of support
/// elements producing it. Probabilities are counts over `state.len()`.
pub fn commit_round_law<S: CommitmentScheme + ?Sized>(
    scheme: &S,
    j: usize,
    prefix: &[Round],
    state: &SupportState,
) -> Result<BTreeMap<Message, u64>> {
    let mut law = BTreeMap::new();
    for i in 0..state.len() {
        let (b, x) = state.element(i);
        *law.entry(scheme.sender_msg(j, b, x, prefix)?).or_insert(0) += 1;
    }
    Ok(law)
}

/// Measures the round-`j` message register and returns `α_j` with the
/// collapsed state.
pub fn measure_commit_round<S: CommitmentScheme + ?Sized, R: Rng + ?Sized>(
    scheme: &S,
    j: usize,
    prefix: &[Round],
    state: &SupportState,
    rng: &mut R,
) -> Result<(Message, SupportState)> {
    let (b, x) = state.sample_element(rng)?;
    let alpha = scheme.sender_msg(j, b, x, prefix)?;
    let post = state.filter(|b, x| scheme.sender_msg_matches(j, b, x, prefix, &alpha))?;
    Ok((alpha, post))
}

/// Runs the whole commit phase coherently against an honest receiver with
/// seed `r`. The final state is `(X_{0,t}, X_{1,t})`.
pub fn run_coherent_commit<S: CommitmentScheme + ?Sized, R: Rng + ?Sized>(
    scheme: &S,
    r: u64,
    rng: &mut R,
) -> Result<(CommitTranscript, SupportState)> {
    let mut state = SupportState::full(scheme.ell())?;
    let mut rounds: Vec<Round> = Vec::with_capacity(scheme.rounds());
    for j in 1..=scheme.rounds() {
        let (alpha, post) = measure_commit_round(scheme, j, &rounds, &state, rng)?;
        let beta = scheme.receiver_msg(j, r, &rounds, &alpha)?;
        rounds.push(Round { alpha, beta });
        state = post;
    }
    Ok((CommitTranscript { rounds }, state))
}

/// Every commit-phase outcome for receiver seed `r`, with the final state.
///
/// The probability of an outcome is `state.len() / 2^{ell+1}`: the round laws
/// telescope.
pub fn commit_law<S: CommitmentScheme + ?Sized>(scheme: &S, r: u64) -> Result<Vec<(CommitTranscript, SupportState)>> {
    let mut frontier = vec![(Vec::<Round>::new(), SupportState::full(scheme.ell())?)];
    for j in 1..=scheme.rounds() {
        let mut next = Vec::new();
        for (rounds, state) in frontier {
            for alpha in commit_round_law(scheme, j, &rounds, &state)?.into_keys() {
                let post = state.filter(|b, x| scheme.sender_msg_matches(j, b, x, &rounds, &alpha))?;
                let beta = scheme.receiver_msg(j, r, &rounds, &alpha)?;
                let mut extended = rounds.clone();
                extended.push(Round { alpha, beta });
                next.push((extended, post));
            }
        }
        frontier = next;
    }
    Ok(frontier
        .into_iter()
        .map(|(rounds, state)| (CommitTranscript { rounds }, state))
        .collect())
}

fn check_hashes(state: &SupportState, h0: &HashFn, h1: &HashFn) -> Result<()> {
    if h0.ell() != state.ell || h1.ell() != state.ell || h0.k() != h1.k() {
        return Err(Error::InvalidParameter(format!(
            "hash shapes ({}, {}) and ({}, {}) do not fit a {}-bit state",
            h0.ell(),
            h0.k(),
            h1.ell(),
            h1.k(),
            state.ell
        )));
    }
    Ok(())
}

/// Exact law of the hash-register measurement: `y ↦ |S0 ∩ h0⁻¹(y)| + |S1 ∩ h1⁻¹(y)|`.
pub fn hash_outcome_law(state: &SupportState, h0: &HashFn, h1: &HashFn) -> Result<BTreeMap<u64, u64>> {
    check_hashes(state, h0, h1)?;
    let mut law = BTreeMap::new();
    for &x in &state.s0 {
        *law.entry(h0.eval(x)).or_insert(0) += 1;
    }
    for &x in &state.s1 {
        *law.entry(h1.eval(x)).or_insert(0) += 1;
    }
    Ok(law)
}

/// Measures `h_b(x)` and collapses each branch to `S_b ∩ h_b⁻¹(y)`.
pub fn measure_hash<R: Rng + ?Sized>(
    state: &SupportState,
    h0: &HashFn,
    h1: &HashFn,
    rng: &mut R,
) -> Result<(u64, SupportState)> {
    check_hashes(state, h0, h1)?;
    let (b, x) = state.sample_element(rng)?;
    let y = if b == 0 { h0.eval(x) } else { h1.eval(x) };
    Ok((y, collapse_hash(state, h0, h1, y)))
}

/// `(S0 ∩ h0⁻¹(y), S1 ∩ h1⁻¹(y))`.
pub fn collapse_hash(state: &SupportState, h0: &HashFn, h1: &HashFn, y: u64) -> SupportState {
    SupportState {
        ell: state.ell,
        s0: h0.preimage_in_set(y, &state.s0),
        s1: h1.preimage_in_set(y, &state.s1),
    }
}

/// Computational-basis measurement of the whole state.
pub fn answer_v0<R: Rng + ?Sized>(state: &SupportState, rng: &mut R) -> Result<Decommitment> {
    let (b, x) = state.sample_element(rng)?;
    Ok(Decommitment { b, x })
}

/// `(â_0, â_1)` for every `d`, via two Walsh–Hadamard transforms.
pub fn d_spectrum(state: &SupportState, xi: u32) -> Result<(Vec<i64>, Vec<i64>)> {
    if state.ell > MAX_SPECTRUM_ELL {
        return Err(Error::DomainTooLarge {
            ell: state.ell,
            cap: MAX_SPECTRUM_ELL,
        });
    }
    if state.is_empty() {
        return Err(Error::EmptyState);
    }
    let n = 1usize << state.ell;
    let mut v = [vec![0i64; n], vec![0i64; n]];
    for &x in &state.s0 {
        v[dot(xi, x) as usize][x as usize] += 1;
    }
    for &x in &state.s1 {
        v[(1 ^ dot(xi, x)) as usize][x as usize] += 1;
    }
    let [mut v0, mut v1] = v;
    fwht_in_place(&mut v0);
    fwht_in_place(&mut v1);
    Ok((v0, v1))
}

/// Exact law of `d`: integer weights `â_0(d)² + â_1(d)²` summing to
/// `2^ell · (|S0| + |S1|)`.
pub fn d_law(state: &SupportState, xi: u32) -> Result<Vec<u64>> {
    let (a0, a1) = d_spectrum(state, xi)?;
    Ok(a0.iter().zip(&a1).map(|(&p, &q)| (p * p + q * q) as u64).collect())
}

/// Hadamard-basis measurement of the `x` register after the `ξ` relabelling.
pub fn sample_d<R: Rng + ?Sized>(state: &SupportState, xi: u32, rng: &mut R) -> Result<(u32, ResidualQubit)> {
    let (a0, a1) = d_spectrum(state, xi)?;
    let total = (state.len() as u64) << state.ell;
    let mut u = rng.random_range(0..total);
    for d in 0..a0.len() {
        let w = (a0[d] * a0[d] + a1[d] * a1[d]) as u64;
        if u < w {
            return Ok((
                d as u32,
                ResidualQubit {
                    a0: a0[d] as f64,
                    a1: a1[d] as f64,
                },
            ));
        }
        u -= w;
    }
    unreachable!("Hadamard weights sum to 2^ell times the support size")
}

/// `Pr[η = 0]` for the rotated-basis measurement selected by `v2`.
pub fn eta_law(qubit: &ResidualQubit, v2: u8) -> Result<f64> {
    let norm = qubit.norm_sqr();
    if norm == 0.0 {
        return Err(Error::ZeroQubit);
    }
    let (c, s) = (FRAC_PI_8.cos(), FRAC_PI_8.sin());
    let s = if v2 == 0 { s } else { -s };
    let overlap = c * qubit.a0 + s * qubit.a1;
    Ok(overlap * overlap / norm)
}

pub fn measure_rotated<R: Rng + ?Sized>(qubit: &ResidualQubit, v2: u8, rng: &mut R) -> Result<u8> {
    let p0 = eta_law(qubit, v2)?;
    Ok(u8::from(rng.random::<f64>() >= p0))
}

/// Exact joint law of `(y, d, η)` for the honest prover holding `state`,
/// challenged on the `v1 = 1` branch with `xi` and basis `v2`.
pub fn challenge_law(
    state: &SupportState,
    h0: &HashFn,
    h1: &HashFn,
    xi: u32,
    v2: u8,
) -> Result<BTreeMap<(u64, u32, u8), f64>> {
    let total = state.len() as f64;
    let mut law = BTreeMap::new();
    for (y, wy) in hash_outcome_law(state, h0, h1)? {
        let collapsed = collapse_hash(state, h0, h1, y);
        let (a0, a1) = d_spectrum(&collapsed, xi)?;
        let norm = ((collapsed.len() as u64) << state.ell) as f64;
        for d in 0..a0.len() {
            let qubit = ResidualQubit {
                a0: a0[d] as f64,
                a1: a1[d] as f64,
            };
            if qubit.norm_sqr() == 0.0 {
                continue;
            }
            let pd = wy as f64 / total * qubit.norm_sqr() / norm;
            let p0 = eta_law(&qubit, v2)?;
            for (eta, p) in [(0u8, p0), (1u8, 1.0 - p0)] {
                if p > 0.0 {
                    law.insert((y, d as u32, eta), pd * p);
                }
            }
        }
    }
    Ok(law)
}

/// `cos²(π/8)`.
pub fn cos2_pi8() -> f64 {
    FRAC_PI_8.cos().powi(2)
}

/// Acceptance probability of the honest prover given a unique claw:
/// `1/2 + cos²(π/8)/2`.
pub fn unique_claw_acceptance() -> f64 {
    0.5 + 0.5 * cos2_pi8()
}

/// The honest prover as a session participant.
#[derive(Debug, Default)]
pub struct HonestProver {
    state: Option<SupportState>,
    qubit: Option<ResidualQubit>,
}

impl HonestProver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn state(&self) -> Option<&SupportState> {
        self.state.as_ref()
    }

    fn current(&self) -> Result<&SupportState> {
        self.state.as_ref().ok_or(Error::EmptyState)
    }
}

impl Prover for HonestProver {
    fn send_commit(&mut self, scheme: &dyn CommitmentScheme, j: usize, prefix: &[Round], rng: &mut dyn RngCore) -> Result<Message> {
        if j == 1 {
            self.state = Some(SupportState::full(scheme.ell())?);
        }
        let (alpha, post) = measure_commit_round(scheme, j, prefix, self.current()?, rng)?;
        self.state = Some(post);
        Ok(alpha)
    }

    fn send_y(&mut self, _t: &CommitTranscript, h0: &HashFn, h1: &HashFn, rng: &mut dyn RngCore) -> Result<u64> {
        let (y, post) = measure_hash(self.current()?, h0, h1, rng)?;
        self.state = Some(post);
        Ok(y)
    }

    fn answer_preimage(&mut self, rng: &mut dyn RngCore) -> Result<Decommitment> {
        answer_v0(self.current()?, rng)
    }

    fn answer_d(&mut self, xi: u32, rng: &mut dyn RngCore) -> Result<u32> {
        let (d, qubit) = sample_d(self.current()?, xi, rng)?;
        self.qubit = Some(qubit);
        Ok(d)
    }

    fn answer_eta(&mut self, v2: u8, rng: &mut dyn RngCore) -> Result<u8> {
        let qubit = self.qubit.ok_or(Error::ZeroQubit)?;
        measure_rotated(&qubit, v2, rng)
    }
}
