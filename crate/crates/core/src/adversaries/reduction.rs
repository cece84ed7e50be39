//! From a convincing prover to a double opening.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::gl::{goldreich_levin, GlParams, PredictionOracle};
use crate::bits::{dot, mask};
use crate::commitment::{open_verify, CommitTranscript, CommitmentScheme, Decommitment, Round};
use crate::error::{Error, Result};
use crate::stats::{session_rng, wilson, Interval, Z99};
use crate::verifier::{
    choose_hashes, np_count_unique, v2_decide, CountClass, HashPrefix, Payload, ProtocolParams, ReplayableProver,
    SessionRecord, Tally,
};

/// Predicts `ξ·(x0 ⊕ x1)` from two rotated-basis answers that share one `d`.
///
/// The `d` query is asked twice; differing answers break the replay contract.
pub fn algorithm_a(prefix: &HashPrefix, xi: u32, prover: &dyn ReplayableProver) -> Result<u8> {
    let d = prover.d(prefix, xi)?;
    if prover.d(prefix, xi)? != d {
        return Err(Error::ProverNondeterminism);
    }
    let eta0 = prover.eta(prefix, xi, d, 0)?;
    let eta1 = prover.eta(prefix, xi, d, 1)?;
    Ok(eta0 ^ eta1 ^ 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionOutcome {
    pub success: bool,
    /// Why the run failed, when it did.
    pub failure: Option<String>,
    pub t: Option<CommitTranscript>,
    pub decom0: Option<Decommitment>,
    pub decom1: Option<Decommitment>,
    /// The unique claw behind the prefix, when there is one.
    pub claw: Option<(u32, u32)>,
    pub candidates: usize,
    pub gl_queries: u64,
}

impl ReductionOutcome {
    fn failed(why: impl Into<String>) -> Self {
        ReductionOutcome {
            success: false,
            failure: Some(why.into()),
            t: None,
            decom0: None,
            decom1: None,
            claw: None,
            candidates: 0,
            gl_queries: 0,
        }
    }
}

fn prover_step<T>(r: Result<T>) -> Result<std::result::Result<T, String>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e @ (Error::ProverAbort | Error::ProverViolation(_) | Error::ProverNondeterminism)) => Ok(Err(e.to_string())),
        Err(e) => Err(e),
    }
}

macro_rules! step {
    ($e:expr) => {
        match prover_step($e)? {
            Ok(v) => v,
            Err(why) => return Ok(ReductionOutcome::failed(why)),
        }
    };
}

/// Plays the honest receiver and V1 against `prover`, extracts `x0 ⊕ x1` with
/// Goldreich–Levin over algorithm A, and tries every candidate as a double
/// opening. Prover misbehaviour yields a failed outcome, not an error.
pub fn reduction_b(
    params: &ProtocolParams,
    prover: &dyn ReplayableProver,
    gl: GlParams,
    rng: &mut dyn RngCore,
) -> Result<ReductionOutcome> {
    let scheme = &params.scheme;
    let ell = scheme.ell();
    let r = rng.random::<u64>() & mask(scheme.receiver_bits());
    let mut rounds: Vec<Round> = Vec::new();
    for j in 1..=scheme.rounds() {
        let alpha = step!(prover.commit_msg(j, &rounds));
        let beta = step!(scheme
            .receiver_msg(j, r, &rounds, &alpha)
            .map_err(|e| Error::ProverViolation(e.to_string())));
        rounds.push(Round { alpha, beta });
    }
    let t = CommitTranscript { rounds };
    let (_, k, h0, h1) = choose_hashes(params, &t, rng)?;
    let y = step!(prover.y(&t, &h0, &h1));
    if y >= k {
        return Ok(ReductionOutcome::failed(format!("y = {y} outside [{k}]")));
    }
    let prefix = HashPrefix { t, h0, h1, y };

    let c0 = np_count_unique(scheme, &prefix.t, &prefix.h0, y, 0)?;
    let c1 = np_count_unique(scheme, &prefix.t, &prefix.h1, y, 1)?;
    let claw = match (c0.class, c1.class, c0.witness, c1.witness) {
        (CountClass::One, CountClass::One, Some(x0), Some(x1)) => Some((x0, x1)),
        _ => None,
    };

    let opening = step!(prover.preimage(&prefix));
    if opening.b > 1 || u64::from(opening.x) > mask(ell) {
        return Ok(ReductionOutcome::failed("opening out of range"));
    }

    let mut oracle = PredictionOracle::new(ell, |xi| algorithm_a(&prefix, xi, prover));
    let listed = step!(goldreich_levin(&mut oracle, gl, rng));
    drop(oracle);

    let mut outcome = ReductionOutcome {
        success: false,
        failure: Some("no candidate opens both ways".into()),
        t: None,
        decom0: None,
        decom1: None,
        claw,
        candidates: listed.candidates.len(),
        gl_queries: listed.queries,
    };
    for z in listed.candidates {
        let other = opening.x ^ z;
        let (x0, x1) = if opening.b == 0 { (opening.x, other) } else { (other, opening.x) };
        let d0 = Decommitment { b: 0, x: x0 };
        let d1 = Decommitment { b: 1, x: x1 };
        if open_verify(scheme, &prefix.t, 0, &d0)? && open_verify(scheme, &prefix.t, 1, &d1)? {
            outcome.success = true;
            outcome.failure = None;
            outcome.decom0 = Some(d0);
            outcome.decom1 = Some(d1);
            break;
        }
    }
    outcome.t = Some(prefix.t);
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionalEstimate {
    pub trials: u64,
    pub rate: f64,
    pub ci: Interval,
    pub tally: Tally,
}

/// Acceptance probability of V2 given a fixed prefix `(t, h0, h1, y)`.
///
/// Trial `i` draws the prover's randomness and V1's remaining challenges from
/// stream `i` of `seed`. `make` builds `P*_r` from that randomness.
pub fn estimate_conditional_acceptance<P, F>(
    params: &ProtocolParams,
    prefix: &HashPrefix,
    make: F,
    trials: u64,
    seed: u64,
) -> Result<ConditionalEstimate>
where
    P: ReplayableProver,
    F: Fn(u64) -> Result<P>,
{
    let ell = params.ell();
    let mut tally = Tally::default();
    for i in 0..trials {
        let mut rng = session_rng(seed, i);
        let prover = make(rng.random())?;
        let v1 = rng.random_range(0..2u8);
        let xi = (rng.random::<u64>() & mask(ell)) as u32;
        let payload = if v1 == 0 {
            prover.preimage(prefix).map(|o| Payload::V0 { b: o.b, x: o.x })
        } else {
            prover.d(prefix, xi).and_then(|d| {
                let v2 = rng.random_range(0..2u8);
                prover.eta(prefix, xi, d, v2).map(|eta| Payload::V1 { d, v2, eta })
            })
        };
        let v2coin = rng.random_range(0..8u8);
        let verdict = match payload {
            Ok(payload) => {
                let rec = SessionRecord {
                    t: prefix.t.clone(),
                    j: 0,
                    k: prefix.h0.k(),
                    h0: prefix.h0.clone(),
                    h1: prefix.h1.clone(),
                    y: prefix.y,
                    v1,
                    xi,
                    payload,
                    v2coin,
                    verdict: None,
                };
                v2_decide(params, &rec).map_err(|e| match e {
                    Error::MalformedRecord(m) => Error::ProverViolation(m),
                    other => other,
                })
            }
            Err(e) => Err(e),
        };
        match verdict {
            Err(ref e) if !matches!(e, Error::ProverAbort | Error::ProverViolation(_) | Error::ProverNondeterminism) => {
                return Err(e.clone())
            }
            _ => tally.record(&verdict),
        }
    }
    Ok(ConditionalEstimate {
        trials,
        rate: tally.rate(),
        ci: wilson(tally.accepted(), trials, Z99),
        tally,
    })
}

/// `ξ·(x0 ⊕ x1)`.
pub fn claw_parity(xi: u32, claw: (u32, u32)) -> u8 {
    dot(xi, claw.0 ^ claw.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversaries::{scripted_prover, unbounded_claw_prover, Script};
    use crate::commitment::{honest_transcript, SchemeSpec};
    use crate::hashing::HashFn;
    use crate::verifier::GridMode;

    fn const_params(ell: u32) -> ProtocolParams {
        ProtocolParams::new(SchemeSpec::from_name("const", ell, 0, 0).unwrap(), 0.5, GridMode::OracleBestJ).unwrap()
    }

    #[test]
    fn eta_is_v2_predicts_zero() {
        let p = const_params(4);
        let prover = scripted_prover(p.scheme.clone(), Script::EtaIsV2, 3);
        let t = honest_transcript(&p.scheme, 0, 0, 0).unwrap();
        let h = HashFn::identity(4).unwrap();
        let prefix = HashPrefix { t, h0: h.clone(), h1: h, y: 2 };
        for xi in 0..16 {
            assert_eq!(algorithm_a(&prefix, xi, &prover).unwrap(), 0);
        }
    }

    #[test]
    fn aborting_prover_fails_cleanly() {
        let p = const_params(4);
        let prover = scripted_prover(p.scheme.clone(), Script::Abort, 0);
        let mut rng = session_rng(0, 0);
        let out = reduction_b(&p, &prover, GlParams { advantage: 0.2, delta: 0.05 }, &mut rng).unwrap();
        assert!(!out.success);
        assert!(out.failure.is_some());
    }

    #[test]
    fn successful_openings_verify() {
        let p = const_params(4);
        let mut rng = session_rng(1, 0);
        for i in 0..5 {
            let prover = unbounded_claw_prover(p.scheme.clone(), i).unwrap();
            let out = reduction_b(&p, &prover, GlParams { advantage: 0.2, delta: 0.05 }, &mut rng).unwrap();
            if out.success {
                let t = out.t.as_ref().unwrap();
                assert!(open_verify(&p.scheme, t, 0, &out.decom0.unwrap()).unwrap());
                assert!(open_verify(&p.scheme, t, 1, &out.decom1.unwrap()).unwrap());
            }
        }
    }

    #[test]
    fn conditional_rate_on_non_unique_prefix_is_coin() {
        let p = const_params(3);
        let t = honest_transcript(&p.scheme, 0, 0, 0).unwrap();
        let h = HashFn::affine_mod_prime(3, 1, 1, 0, 61).unwrap();
        let prefix = HashPrefix { t, h0: h.clone(), h1: h, y: 0 };
        let est = estimate_conditional_acceptance(&p, &prefix, |r| unbounded_claw_prover(p.scheme.clone(), r), 4000, 0).unwrap();
        assert_eq!(est.tally.unique(), 0);
        assert!(est.ci.contains(0.875), "{est:?}");
    }
}
