//! Cheating provers and the machinery that turns a convincing prover into a
//! double opening of the commitment.

mod claw;
mod gl;
mod reduction;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bits::{dot, mask};
use crate::coherent::HonestProver;
use crate::commitment::{CommitTranscript, CommitmentScheme, Decommitment, Message, Round, SchemeSpec};
use crate::error::{Error, Result};
use crate::hashing::HashFn;
use crate::stats::SessionRng;
use crate::verifier::{HashPrefix, Prover, ReplayableProver, Replayed};

pub use claw::{unbounded_claw_prover, ClawProver};
pub use gl::{goldreich_levin, GlOutput, GlParams, PredictionOracle};
pub use reduction::{algorithm_a, claw_parity, estimate_conditional_acceptance, reduction_b, ConditionalEstimate, ReductionOutcome};

/// Fixed misbehaviours.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Script {
    /// Refuses every query.
    Abort,
    /// Commits classically and answers the rotated challenge with `η = v2`.
    EtaIsV2,
    /// Commits classically, then opens to the complement of its seed and
    /// flips the equation answer.
    AlwaysWrong,
}

/// A deterministic cheating prover `P*_r`.
#[derive(Debug)]
pub enum CheatingProver {
    /// Commits to `(b, x)` classically; answers `v1 = 0` with `(b, x)` and
    /// `v1 = 1` with `d = 0`, `η = ξ·x`.
    ClassicalHonest { scheme: SchemeSpec, b: u8, x: u32 },
    UnboundedClaw(ClawProver),
    Scripted { scheme: SchemeSpec, script: Script, b: u8, x: u32 },
}

pub fn classical_honest_prover(scheme: SchemeSpec, b: u8, x: u32) -> CheatingProver {
    CheatingProver::ClassicalHonest { scheme, b, x }
}

/// A scripted prover whose classical commitment seed is taken from `r`.
pub fn scripted_prover(scheme: SchemeSpec, script: Script, r: u64) -> CheatingProver {
    let x = ((r >> 1) & mask(scheme.ell())) as u32;
    CheatingProver::Scripted {
        scheme,
        script,
        b: (r & 1) as u8,
        x,
    }
}

impl CheatingProver {
    fn classical(&self) -> Option<(&SchemeSpec, u8, u32)> {
        match self {
            CheatingProver::ClassicalHonest { scheme, b, x } => Some((scheme, *b, *x)),
            CheatingProver::Scripted { scheme, b, x, .. } => Some((scheme, *b, *x)),
            CheatingProver::UnboundedClaw(_) => None,
        }
    }

    fn script(&self) -> Option<Script> {
        match self {
            CheatingProver::Scripted { script, .. } => Some(*script),
            _ => None,
        }
    }

    fn check_abort(&self) -> Result<()> {
        if self.script() == Some(Script::Abort) {
            Err(Error::ProverAbort)
        } else {
            Ok(())
        }
    }
}

impl ReplayableProver for CheatingProver {
    fn commit_msg(&self, j: usize, prefix: &[Round]) -> Result<Message> {
        self.check_abort()?;
        match self {
            CheatingProver::UnboundedClaw(p) => p.commit_msg(j, prefix),
            _ => {
                let (scheme, b, x) = self.classical().expect("classical strategy");
                scheme.sender_msg(j, b, x, prefix)
            }
        }
    }

    fn y(&self, t: &CommitTranscript, h0: &HashFn, h1: &HashFn) -> Result<u64> {
        self.check_abort()?;
        match self {
            CheatingProver::UnboundedClaw(p) => p.y(t, h0, h1),
            _ => {
                let (_, b, x) = self.classical().expect("classical strategy");
                Ok(if b == 0 { h0.eval(x) } else { h1.eval(x) })
            }
        }
    }

    fn preimage(&self, prefix: &HashPrefix) -> Result<Decommitment> {
        self.check_abort()?;
        match self {
            CheatingProver::UnboundedClaw(p) => p.preimage(prefix),
            _ => {
                let (scheme, b, x) = self.classical().expect("classical strategy");
                let x = if self.script() == Some(Script::AlwaysWrong) {
                    x ^ mask(scheme.ell()) as u32
                } else {
                    x
                };
                Ok(Decommitment { b, x })
            }
        }
    }

    fn d(&self, prefix: &HashPrefix, xi: u32) -> Result<u32> {
        self.check_abort()?;
        match self {
            CheatingProver::UnboundedClaw(p) => p.d(prefix, xi),
            _ => Ok(0),
        }
    }

    fn eta(&self, prefix: &HashPrefix, xi: u32, d: u32, v2: u8) -> Result<u8> {
        self.check_abort()?;
        match self {
            CheatingProver::UnboundedClaw(p) => p.eta(prefix, xi, d, v2),
            _ => {
                let (_, _, x) = self.classical().expect("classical strategy");
                Ok(match self.script() {
                    Some(Script::EtaIsV2) => v2,
                    Some(Script::AlwaysWrong) => 1 ^ dot(xi, x),
                    _ => dot(xi, x),
                })
            }
        }
    }
}

/// Prover strategies selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProverKind {
    Honest,
    ClassicalHonest,
    UnboundedClaw,
    Abort,
    EtaIsV2,
    AlwaysWrong,
}

impl ProverKind {
    pub const ALL: [ProverKind; 6] = [
        ProverKind::Honest,
        ProverKind::ClassicalHonest,
        ProverKind::UnboundedClaw,
        ProverKind::Abort,
        ProverKind::EtaIsV2,
        ProverKind::AlwaysWrong,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ProverKind::Honest => "honest",
            ProverKind::ClassicalHonest => "classical-honest",
            ProverKind::UnboundedClaw => "unbounded-claw",
            ProverKind::Abort => "abort",
            ProverKind::EtaIsV2 => "eta-is-v2",
            ProverKind::AlwaysWrong => "always-wrong",
        }
    }

    /// Builds the replayable strategy with fixed randomness `r`. `None` for
    /// the honest quantum prover, which is not replayable.
    pub fn replayable(&self, scheme: &SchemeSpec, r: u64) -> Result<Option<CheatingProver>> {
        let ell_mask = mask(scheme.ell());
        Ok(Some(match self {
            ProverKind::Honest => return Ok(None),
            ProverKind::ClassicalHonest => classical_honest_prover(scheme.clone(), (r & 1) as u8, ((r >> 1) & ell_mask) as u32),
            ProverKind::UnboundedClaw => CheatingProver::UnboundedClaw(unbounded_claw_prover(scheme.clone(), r)?),
            ProverKind::Abort => scripted_prover(scheme.clone(), Script::Abort, r),
            ProverKind::EtaIsV2 => scripted_prover(scheme.clone(), Script::EtaIsV2, r),
            ProverKind::AlwaysWrong => scripted_prover(scheme.clone(), Script::AlwaysWrong, r),
        }))
    }

    /// A fresh session participant whose randomness is drawn from `rng`.
    pub fn build(&self, scheme: &SchemeSpec, rng: &mut SessionRng) -> Result<Box<dyn Prover>> {
        if *self == ProverKind::Honest {
            return Ok(Box::new(HonestProver::new()));
        }
        let r = rng.random::<u64>();
        let p = self.replayable(scheme, r)?.expect("non-honest strategies are replayable");
        Ok(Box::new(Replayed::new(p)))
    }
}

impl fmt::Display for ProverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown prover {s:?}")))
    }
}
