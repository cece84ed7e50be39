//! The efficient first-phase verifier, the brute-force second-phase verifier,
//! and the prover interfaces they talk to.

mod decide;
mod estimate;
mod session;

use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::commitment::{CommitTranscript, CommitmentScheme, Decommitment, Message, Round, SchemeSpec};
use crate::error::{Error, Result};
use crate::hashing::HashFn;
use crate::stats::SessionRng;

pub use decide::{np_count_unique, v2_decide, CountClass, UniqueCount};
pub use estimate::{estimate_acceptance, run_trial, AcceptanceEstimate, Tally};
pub use session::{run_session, Payload, Reason, SessionRecord, Verdict};
pub(crate) use session::choose_hashes;

/// How V1 picks the grid index `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GridMode {
    /// `j` uniform on `{0, …, m-1}`.
    #[serde(rename = "uniform-j")]
    Uniform,
    /// Diagnostic: V1 looks at `|X_{0,t}|` and picks the `j` whose `k`
    /// brackets `2|X_{0,t}|`.
    #[serde(rename = "oracle-best-j")]
    OracleBestJ,
}

impl fmt::Display for GridMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GridMode::Uniform => "uniform-j",
            GridMode::OracleBestJ => "oracle-best-j",
        })
    }
}

impl FromStr for GridMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform-j" | "uniform" => Ok(GridMode::Uniform),
            "oracle-best-j" | "oracle" => Ok(GridMode::OracleBestJ),
            other => Err(Error::InvalidParameter(format!("unknown grid mode {other:?}"))),
        }
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

/// Smallest `m` with `(1+ε)^m ≥ 2^{ell+1}`.
pub fn compute_m(ell: u32, epsilon: f64) -> Result<u32> {
    check_epsilon(epsilon)?;
    Ok(((ell + 1) as f64 / (1.0 + epsilon).log2()).ceil() as u32)
}

/// `k = ⌈(1+ε)^j⌉`.
pub fn k_for_j(epsilon: f64, j: u32) -> u64 {
    (1.0 + epsilon).powi(j as i32).ceil() as u64
}

/// The `j` with `(1+ε)^j < 2n ≤ (1+ε)^{j+1}`, clamped to `{0, …, m-1}`.
/// `None` when `n = 0`.
pub fn bracketing_j(epsilon: f64, m: u32, n: u64) -> Option<u32> {
    if n == 0 {
        return None;
    }
    let target = 2.0 * n as f64;
    let mut j = 0;
    while j + 1 < m && (1.0 + epsilon).powi(j as i32 + 1) < target {
        j += 1;
    }
    Some(j)
}

/// Protocol configuration shared by V1, V2 and the amplification layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub scheme: SchemeSpec,
    pub epsilon: f64,
    pub m: u32,
    pub grid_mode: GridMode,
    pub lambda: f64,
    pub c: f64,
    pub s: f64,
}

impl ProtocolParams {
    pub const DEFAULT_EPSILON: f64 = 0.01;
    pub const DEFAULT_LAMBDA: f64 = 40.0;
    pub const DEFAULT_C: f64 = 0.93;
    pub const DEFAULT_S: f64 = 0.875;

    pub fn new(scheme: SchemeSpec, epsilon: f64, grid_mode: GridMode) -> Result<Self> {
        let m = compute_m(scheme.ell(), epsilon)?;
        Ok(ProtocolParams {
            scheme,
            epsilon,
            m,
            grid_mode,
            lambda: Self::DEFAULT_LAMBDA,
            c: Self::DEFAULT_C,
            s: Self::DEFAULT_S,
        })
    }

    pub fn with_targets(mut self, lambda: f64, c: f64, s: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&c) || !(0.0..=1.0).contains(&s) || lambda <= 0.0 {
            return Err(Error::InvalidParameter(format!("bad targets lambda={lambda}, c={c}, s={s}")));
        }
        self.lambda = lambda;
        self.c = c;
        self.s = s;
        Ok(self)
    }

    pub fn ell(&self) -> u32 {
        self.scheme.ell()
    }

    pub fn k_for(&self, j: u32) -> u64 {
        k_for_j(self.epsilon, j)
    }

    /// Checks the invariants a deserialized value might violate.
    pub fn validate(&self) -> Result<()> {
        if self.m != compute_m(self.ell(), self.epsilon)? {
            return Err(Error::InvalidParameter(format!("m={} does not match ell and epsilon", self.m)));
        }
        Ok(())
    }
}

/// A prover taking part in one session. Each method is called at most once
/// per session, in protocol order; `answer_eta` only follows `answer_d`.
pub trait Prover {
    /// Round-`j` commit message; `prefix` holds the completed rounds.
    fn send_commit(
        &mut self,
        scheme: &dyn CommitmentScheme,
        j: usize,
        prefix: &[Round],
        rng: &mut dyn RngCore,
    ) -> Result<Message>;

    fn send_y(&mut self, t: &CommitTranscript, h0: &HashFn, h1: &HashFn, rng: &mut dyn RngCore) -> Result<u64>;

    /// Reply to `v1 = 0`.
    fn answer_preimage(&mut self, rng: &mut dyn RngCore) -> Result<Decommitment>;

    /// Reply to `v1 = 1` with challenge `ξ`.
    fn answer_d(&mut self, xi: u32, rng: &mut dyn RngCore) -> Result<u32>;

    fn answer_eta(&mut self, v2: u8, rng: &mut dyn RngCore) -> Result<u8>;
}

impl<P: Prover + ?Sized> Prover for Box<P> {
    fn send_commit(
        &mut self,
        scheme: &dyn CommitmentScheme,
        j: usize,
        prefix: &[Round],
        rng: &mut dyn RngCore,
    ) -> Result<Message> {
        (**self).send_commit(scheme, j, prefix, rng)
    }

    fn send_y(&mut self, t: &CommitTranscript, h0: &HashFn, h1: &HashFn, rng: &mut dyn RngCore) -> Result<u64> {
        (**self).send_y(t, h0, h1, rng)
    }

    fn answer_preimage(&mut self, rng: &mut dyn RngCore) -> Result<Decommitment> {
        (**self).answer_preimage(rng)
    }

    fn answer_d(&mut self, xi: u32, rng: &mut dyn RngCore) -> Result<u32> {
        (**self).answer_d(xi, rng)
    }

    fn answer_eta(&mut self, v2: u8, rng: &mut dyn RngCore) -> Result<u8> {
        (**self).answer_eta(v2, rng)
    }
}

/// Everything V1 has sent or received once `y` is fixed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashPrefix {
    pub t: CommitTranscript,
    pub h0: HashFn,
    pub h1: HashFn,
    pub y: u64,
}

impl HashPrefix {
    /// Canonical bytes used to key replayable randomness.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = self.t.encode();
        out.extend(serde_json::to_vec(&self.h0).expect("hash functions serialize"));
        out.extend(serde_json::to_vec(&self.h1).expect("hash functions serialize"));
        out.extend(self.y.to_be_bytes());
        out
    }
}

/// A deterministic prover `P*_r`: every answer is a function of the fixed
/// randomness and the full query prefix, so identical prefixes replay to
/// identical answers.
pub trait ReplayableProver: Send + Sync {
    fn commit_msg(&self, j: usize, prefix: &[Round]) -> Result<Message>;

    fn y(&self, t: &CommitTranscript, h0: &HashFn, h1: &HashFn) -> Result<u64>;

    fn preimage(&self, prefix: &HashPrefix) -> Result<Decommitment>;

    fn d(&self, prefix: &HashPrefix, xi: u32) -> Result<u32>;

    fn eta(&self, prefix: &HashPrefix, xi: u32, d: u32, v2: u8) -> Result<u8>;
}

impl<P: ReplayableProver + ?Sized> ReplayableProver for &P {
    fn commit_msg(&self, j: usize, prefix: &[Round]) -> Result<Message> {
        (**self).commit_msg(j, prefix)
    }

    fn y(&self, t: &CommitTranscript, h0: &HashFn, h1: &HashFn) -> Result<u64> {
        (**self).y(t, h0, h1)
    }

    fn preimage(&self, prefix: &HashPrefix) -> Result<Decommitment> {
        (**self).preimage(prefix)
    }

    fn d(&self, prefix: &HashPrefix, xi: u32) -> Result<u32> {
        (**self).d(prefix, xi)
    }

    fn eta(&self, prefix: &HashPrefix, xi: u32, d: u32, v2: u8) -> Result<u8> {
        (**self).eta(prefix, xi, d, v2)
    }
}

/// Randomness for one query of a replayable prover, derived from its fixed
/// seed `r`, a query tag and the query's canonical bytes.
pub fn query_rng(r: u64, tag: &str, parts: &[&[u8]]) -> SessionRng {
    let mut h = Sha256::new();
    h.update(r.to_be_bytes());
    h.update((tag.len() as u32).to_be_bytes());
    h.update(tag.as_bytes());
    for part in parts {
        h.update((part.len() as u32).to_be_bytes());
        h.update(part);
    }
    SessionRng::from_seed(h.finalize().into())
}

/// Drives a [`ReplayableProver`] through a session, tracking the prefix.
#[derive(Debug)]
pub struct Replayed<P> {
    inner: P,
    prefix: Option<HashPrefix>,
    xi: Option<u32>,
    d: Option<u32>,
}

impl<P: ReplayableProver> Replayed<P> {
    pub fn new(inner: P) -> Self {
        Replayed {
            inner,
            prefix: None,
            xi: None,
            d: None,
        }
    }

    fn prefix(&self) -> Result<&HashPrefix> {
        self.prefix
            .as_ref()
            .ok_or_else(|| Error::ProverViolation("challenge before the hash value".into()))
    }
}

impl<P: ReplayableProver> Prover for Replayed<P> {
    fn send_commit(
        &mut self,
        _scheme: &dyn CommitmentScheme,
        j: usize,
        prefix: &[Round],
        _rng: &mut dyn RngCore,
    ) -> Result<Message> {
        self.inner.commit_msg(j, prefix)
    }

    fn send_y(&mut self, t: &CommitTranscript, h0: &HashFn, h1: &HashFn, _rng: &mut dyn RngCore) -> Result<u64> {
        let y = self.inner.y(t, h0, h1)?;
        self.prefix = Some(HashPrefix {
            t: t.clone(),
            h0: h0.clone(),
            h1: h1.clone(),
            y,
        });
        Ok(y)
    }

    fn answer_preimage(&mut self, _rng: &mut dyn RngCore) -> Result<Decommitment> {
        self.inner.preimage(self.prefix()?)
    }

    fn answer_d(&mut self, xi: u32, _rng: &mut dyn RngCore) -> Result<u32> {
        let d = self.inner.d(self.prefix()?, xi)?;
        self.xi = Some(xi);
        self.d = Some(d);
        Ok(d)
    }

    fn answer_eta(&mut self, v2: u8, _rng: &mut dyn RngCore) -> Result<u8> {
        let (Some(xi), Some(d)) = (self.xi, self.d) else {
            return Err(Error::ProverViolation("eta requested before d".into()));
        };
        self.inner.eta(self.prefix()?, xi, d, v2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m_examples() {
        assert_eq!(compute_m(10, 0.01).unwrap(), 767);
        assert_eq!(compute_m(7, 0.5).unwrap(), 14);
        assert!(compute_m(4, 0.0).is_err());
        assert!(compute_m(4, 1.0).is_err());
    }

    #[test]
    fn k_grid() {
        assert_eq!(k_for_j(0.5, 0), 1);
        assert_eq!(k_for_j(0.5, 1), 2);
        assert_eq!(k_for_j(0.5, 2), 3);
        assert_eq!(k_for_j(0.5, 3), 4);
        assert_eq!(k_for_j(0.01, 70), 3);
    }

    #[test]
    fn bracketing_satisfies_the_window() {
        for eps in [0.01, 0.1, 0.5, 0.9] {
            let m = compute_m(12, eps).unwrap();
            for n in 1..=4096u64 {
                let j = bracketing_j(eps, m, n).unwrap();
                let k = k_for_j(eps, j) as f64;
                let two_n = 2.0 * n as f64;
                assert!(k <= two_n && two_n <= (1.0 + eps) * k * (1.0 + 1e-12), "eps={eps} n={n} j={j}");
            }
        }
        assert_eq!(bracketing_j(0.5, 10, 0), None);
    }

    #[test]
    fn grid_mode_names() {
        assert_eq!("oracle-best-j".parse::<GridMode>().unwrap(), GridMode::OracleBestJ);
        assert_eq!(GridMode::Uniform.to_string(), "uniform-j");
        assert_eq!(serde_json::to_string(&GridMode::OracleBestJ).unwrap(), "\"oracle-best-j\"");
    }

    #[test]
    fn query_rng_depends_on_every_input() {
        use rand::Rng;
        let a: u64 = query_rng(1, "d", &[b"abc"]).random();
        assert_eq!(a, query_rng(1, "d", &[b"abc"]).random::<u64>());
        assert_ne!(a, query_rng(2, "d", &[b"abc"]).random::<u64>());
        assert_ne!(a, query_rng(1, "e", &[b"abc"]).random::<u64>());
        assert_ne!(a, query_rng(1, "d", &[b"ab", b"c"]).random::<u64>());
    }
}
