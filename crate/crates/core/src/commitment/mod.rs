//! Classical bit commitments written as explicit message functions.
//!
//! A scheme is a pair of deterministic families: the sender's round-`j`
//! message `f_j(b, x, α_1, β_1, …, α_{j-1}, β_{j-1})` and the receiver's
//! `g_j(r, α_1, β_1, …, α_j)`. Everything else here (honest runs, opening,
//! the consistent-seed sets `X_{b,t}` and `R_t`, hiding estimates) is derived
//! from those two functions by replay or brute force.

mod controls;
mod hm2;

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{check_ell, hex_bytes};
use crate::error::{Error, Result};

pub use controls::{Const, Ident, BOTTOM};
pub use hm2::Hm2;

pub type Message = Vec<u8>;

/// Largest receiver-randomness length for which `R_t` is enumerated.
pub const MAX_RECEIVER_ENUM_BITS: u32 = 24;

/// One round `(α_j, β_j)` of a commit phase.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Round {
    #[serde(with = "hex_bytes")]
    pub alpha: Message,
    #[serde(with = "hex_bytes")]
    pub beta: Message,
}

/// The transcript `t = (α_1, β_1, …, α_L, β_L)`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CommitTranscript {
    pub rounds: Vec<Round>,
}

impl CommitTranscript {
    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    /// Canonical length-prefixed byte encoding.
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for round in &self.rounds {
            for msg in [&round.alpha, &round.beta] {
                out.extend_from_slice(&(msg.len() as u32).to_be_bytes());
                out.extend_from_slice(msg);
            }
        }
        out
    }
}

/// Opening information `(b, x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Decommitment {
    pub b: u8,
    #[serde(with = "crate::bits::hex_u32")]
    pub x: u32,
}

/// A classical bit commitment in message-function form.
///
/// Implementations must be pure: every method is a deterministic function of
/// its arguments.
pub trait CommitmentScheme: Send + Sync + fmt::Debug {
    fn name(&self) -> &'static str;

    /// Number of rounds `L`.
    fn rounds(&self) -> usize;

    /// Sender seed length `ell`.
    fn ell(&self) -> u32;

    /// Receiver seed length.
    fn receiver_bits(&self) -> u32;

    /// `f_j`. `prefix` holds the `j - 1` completed rounds.
    fn sender_msg(&self, j: usize, b: u8, x: u32, prefix: &[Round]) -> Result<Message>;

    /// `g_j`. `prefix` holds the `j - 1` completed rounds and `alpha` is `α_j`.
    fn receiver_msg(&self, j: usize, r: u64, prefix: &[Round], alpha: &[u8]) -> Result<Message>;

    /// Whether `f_j(b, x, prefix) == alpha`. Schemes may override this with a
    /// cheaper test; the answer must agree with [`CommitmentScheme::sender_msg`].
    fn sender_msg_matches(&self, j: usize, b: u8, x: u32, prefix: &[Round], alpha: &[u8]) -> Result<bool> {
        Ok(self.sender_msg(j, b, x, prefix)? == alpha)
    }
}

pub(crate) fn check_round(j: usize, rounds: usize, prefix_len: usize) -> Result<()> {
    if j == 0 || j > rounds {
        return Err(Error::RoundOutOfRange { j, rounds });
    }
    if prefix_len != j - 1 {
        return Err(Error::MalformedTranscript(format!(
            "round {j} needs {} completed rounds, got {prefix_len}",
            j - 1
        )));
    }
    Ok(())
}

fn check_transcript<S: CommitmentScheme + ?Sized>(scheme: &S, t: &CommitTranscript) -> Result<()> {
    if t.len() != scheme.rounds() {
        return Err(Error::MalformedTranscript(format!(
            "{} rounds, scheme {} has {}",
            t.len(),
            scheme.name(),
            scheme.rounds()
        )));
    }
    Ok(())
}

/// Runs the classical commit phase with sender input `(b, x)` and receiver
/// seed `r`.
pub fn honest_transcript<S: CommitmentScheme + ?Sized>(scheme: &S, b: u8, x: u32, r: u64) -> Result<CommitTranscript> {
    let mut rounds = Vec::with_capacity(scheme.rounds());
    for j in 1..=scheme.rounds() {
        let alpha = scheme.sender_msg(j, b, x, &rounds)?;
        let beta = scheme.receiver_msg(j, r, &rounds, &alpha)?;
        rounds.push(Round { alpha, beta });
    }
    Ok(CommitTranscript { rounds })
}

/// Whether seed `x` with bit `b` reproduces every sender message of `t`.
pub fn is_consistent<S: CommitmentScheme + ?Sized>(scheme: &S, t: &CommitTranscript, b: u8, x: u32) -> Result<bool> {
    check_transcript(scheme, t)?;
    for (i, round) in t.rounds.iter().enumerate() {
        if !scheme.sender_msg_matches(i + 1, b, x, &t.rounds[..i], &round.alpha)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The receiver's opening check: ⊤ iff `decom` carries bit `b` and replaying
/// `f_j(b, decom.x, ·)` against the receiver messages of `t` reproduces every
/// `α_j`.
pub fn open_verify<S: CommitmentScheme + ?Sized>(
    scheme: &S,
    t: &CommitTranscript,
    b: u8,
    decom: &Decommitment,
) -> Result<bool> {
    check_transcript(scheme, t)?;
    if decom.b != b || b > 1 || u64::from(decom.x) > crate::bits::mask(scheme.ell()) {
        return Ok(false);
    }
    is_consistent(scheme, t, b, decom.x)
}

/// `X_{b,t}`: every sender seed consistent with bit `b` and transcript `t`,
/// sorted.
pub fn consistent_set<S: CommitmentScheme + ?Sized>(scheme: &S, t: &CommitTranscript, b: u8) -> Result<Vec<u32>> {
    check_ell(scheme.ell())?;
    check_transcript(scheme, t)?;
    let mut out = Vec::new();
    for x in 0..1u32 << scheme.ell() {
        if is_consistent(scheme, t, b, x)? {
            out.push(x);
        }
    }
    Ok(out)
}

/// `R_t`: every receiver seed consistent with `t`, sorted.
pub fn receiver_consistent_set<S: CommitmentScheme + ?Sized>(scheme: &S, t: &CommitTranscript) -> Result<Vec<u64>> {
    check_transcript(scheme, t)?;
    let bits = scheme.receiver_bits();
    if bits > MAX_RECEIVER_ENUM_BITS {
        return Err(Error::DomainTooLarge {
            ell: bits,
            cap: MAX_RECEIVER_ENUM_BITS,
        });
    }
    let mut out = Vec::new();
    'seeds: for r in 0..1u64 << bits {
        for (i, round) in t.rounds.iter().enumerate() {
            if scheme.receiver_msg(i + 1, r, &t.rounds[..i], &round.alpha)? != round.beta {
                continue 'seeds;
            }
        }
        out.push(r);
    }
    Ok(out)
}

/// Largest `1 + ell + receiver_bits` for which [`hiding_distance`] enumerates
/// every honest execution instead of sampling.
pub const EXACT_HIDING_BITS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HidingEstimate {
    /// Statistical distance between the transcript laws for `b = 0` and `b = 1`.
    pub distance: f64,
    /// Standard error; zero when `exact`.
    pub std_error: f64,
    pub exact: bool,
    pub samples: u64,
}

/// Statistical distance `Σ_t |Pr[t|b=0] − Pr[t|b=1]| / 2` of the honest
/// transcript laws.
///
/// Small instances are enumerated exactly. Otherwise `num_transcripts`
/// transcripts are drawn from the even mixture of the two laws and the
/// estimator `E_mix[ | |X_{0,t}| − |X_{1,t}| | / (|X_{0,t}| + |X_{1,t}|) ]`
/// is used; it is unbiased because `Pr[t|b] ∝ |R_t|·|X_{b,t}|`.
pub fn hiding_distance<S: CommitmentScheme + ?Sized, R: Rng + ?Sized>(
    scheme: &S,
    num_transcripts: u64,
    rng: &mut R,
) -> Result<HidingEstimate> {
    let ell = scheme.ell();
    let rbits = scheme.receiver_bits();
    check_ell(ell)?;
    if 1 + ell + rbits <= EXACT_HIDING_BITS {
        let mut counts: HashMap<CommitTranscript, [u64; 2]> = HashMap::new();
        for r in 0..1u64 << rbits {
            for x in 0..1u32 << ell {
                for b in 0..2u8 {
                    let t = honest_transcript(scheme, b, x, r)?;
                    counts.entry(t).or_default()[b as usize] += 1;
                }
            }
        }
        let diff: u64 = counts.values().map(|c| c[0].abs_diff(c[1])).sum();
        let per_bit = (1u64 << (ell + rbits)) as f64;
        return Ok(HidingEstimate {
            distance: diff as f64 / (2.0 * per_bit),
            std_error: 0.0,
            exact: true,
            samples: counts.len() as u64,
        });
    }
    if num_transcripts == 0 {
        return Err(Error::InvalidParameter("num_transcripts must be positive".into()));
    }
    let mut moments = crate::stats::Moments::default();
    for _ in 0..num_transcripts {
        let b = rng.random_range(0..2u8);
        let x = rng.random::<u32>() & crate::bits::mask(ell) as u32;
        let r = rng.random::<u64>() & crate::bits::mask(rbits);
        let t = honest_transcript(scheme, b, x, r)?;
        let n0 = consistent_set(scheme, &t, 0)?.len() as f64;
        let n1 = consistent_set(scheme, &t, 1)?.len() as f64;
        moments.push((n0 - n1).abs() / (n0 + n1));
    }
    Ok(HidingEstimate {
        distance: moments.mean(),
        std_error: moments.std_error(),
        exact: false,
        samples: num_transcripts,
    })
}

/// Closed set of registered schemes, used for configuration and records.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum SchemeSpec {
    Hm2(Hm2),
    Ident(Ident),
    Const(Const),
}

impl SchemeSpec {
    /// Builds a scheme by CLI name. `hiding_slack` and `key_bits` only affect
    /// `hm2`.
    pub fn from_name(name: &str, ell: u32, hiding_slack: u32, key_bits: u32) -> Result<Self> {
        match name {
            "hm2" => Ok(SchemeSpec::Hm2(Hm2::new(ell, hiding_slack, key_bits)?)),
            "ident" => Ok(SchemeSpec::Ident(Ident::new(ell)?)),
            "const" => Ok(SchemeSpec::Const(Const::new(ell)?)),
            other => Err(Error::InvalidParameter(format!("unknown scheme {other:?}"))),
        }
    }

    fn inner(&self) -> &dyn CommitmentScheme {
        match self {
            SchemeSpec::Hm2(s) => s,
            SchemeSpec::Ident(s) => s,
            SchemeSpec::Const(s) => s,
        }
    }
}

impl CommitmentScheme for SchemeSpec {
    fn name(&self) -> &'static str {
        self.inner().name()
    }

    fn rounds(&self) -> usize {
        self.inner().rounds()
    }

    fn ell(&self) -> u32 {
        self.inner().ell()
    }

    fn receiver_bits(&self) -> u32 {
        self.inner().receiver_bits()
    }

    fn sender_msg(&self, j: usize, b: u8, x: u32, prefix: &[Round]) -> Result<Message> {
        self.inner().sender_msg(j, b, x, prefix)
    }

    fn receiver_msg(&self, j: usize, r: u64, prefix: &[Round], alpha: &[u8]) -> Result<Message> {
        self.inner().receiver_msg(j, r, prefix, alpha)
    }

    fn sender_msg_matches(&self, j: usize, b: u8, x: u32, prefix: &[Round], alpha: &[u8]) -> Result<bool> {
        self.inner().sender_msg_matches(j, b, x, prefix, alpha)
    }
}
