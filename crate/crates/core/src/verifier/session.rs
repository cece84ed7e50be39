use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{bracketing_j, GridMode, ProtocolParams, Prover};
use crate::bits::{hex_u32, mask};
use crate::commitment::{consistent_set, CommitTranscript, CommitmentScheme, Round};
use crate::error::{Error, Result};
use crate::hashing::{sample_hash, HashFamily, HashFn};

/// The prover's reply to the chosen challenge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "branch", rename_all = "snake_case")]
pub enum Payload {
    V0 {
        b: u8,
        #[serde(with = "hex_u32")]
        x: u32,
    },
    V1 {
        #[serde(with = "hex_u32")]
        d: u32,
        v2: u8,
        eta: u8,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reason {
    UniqueClawPass,
    UniqueClawFail,
    NonUniqueCoin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub accept: bool,
    pub reason: Reason,
}

/// Everything the second-phase verifier needs, in wire order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub t: CommitTranscript,
    pub j: u32,
    pub k: u64,
    pub h0: HashFn,
    pub h1: HashFn,
    pub y: u64,
    pub v1: u8,
    #[serde(with = "hex_u32")]
    pub xi: u32,
    pub payload: Payload,
    /// Three uniform bits; the non-unique branch accepts on values 0..=6.
    pub v2coin: u8,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
}

fn violation(what: impl Into<String>) -> Error {
    Error::ProverViolation(what.into())
}

/// Grid index, codomain size and the two hash functions, drawn by V1 once
/// the commit phase is over.
pub(crate) fn choose_hashes(
    params: &ProtocolParams,
    t: &CommitTranscript,
    rng: &mut dyn RngCore,
) -> Result<(u32, u64, HashFn, HashFn)> {
    let scheme = &params.scheme;
    let mut j = rng.random_range(0..params.m);
    if params.grid_mode == GridMode::OracleBestJ {
        let n0 = consistent_set(scheme, t, 0)?.len() as u64;
        let n = if n0 > 0 { n0 } else { consistent_set(scheme, t, 1)?.len() as u64 };
        if let Some(best) = bracketing_j(params.epsilon, params.m, n) {
            j = best;
        }
    }
    let k = params.k_for(j);
    let h0 = sample_hash(HashFamily::AffineModPrime, scheme.ell(), k, rng)?;
    let h1 = sample_hash(HashFamily::AffineModPrime, scheme.ell(), k, rng)?;
    Ok((j, k, h0, h1))
}

/// Runs the first phase against `prover`. The verdict is left empty.
///
/// Randomness is consumed in a fixed order: receiver seed, commit phase,
/// grid index, hash functions, `y`, `v1`, `ξ`, challenge replies (`v2` only
/// on the `v1 = 1` branch), then the coin.
pub fn run_session(params: &ProtocolParams, prover: &mut dyn Prover, rng: &mut dyn RngCore) -> Result<SessionRecord> {
    let scheme = &params.scheme;
    let ell = scheme.ell();
    let r = rng.random::<u64>() & mask(scheme.receiver_bits());

    let mut rounds: Vec<Round> = Vec::with_capacity(scheme.rounds());
    for j in 1..=scheme.rounds() {
        let alpha = prover.send_commit(scheme, j, &rounds, rng)?;
        let beta = scheme
            .receiver_msg(j, r, &rounds, &alpha)
            .map_err(|e| violation(format!("round {j}: {e}")))?;
        rounds.push(Round { alpha, beta });
    }
    let t = CommitTranscript { rounds };

    let (j, k, h0, h1) = choose_hashes(params, &t, rng)?;

    let y = prover.send_y(&t, &h0, &h1, rng)?;
    if y >= k {
        return Err(violation(format!("y = {y} outside [{k}]")));
    }

    let v1 = rng.random_range(0..2u8);
    let xi = (rng.random::<u64>() & mask(ell)) as u32;
    let payload = if v1 == 0 {
        let decom = prover.answer_preimage(rng)?;
        if decom.b > 1 || u64::from(decom.x) > mask(ell) {
            return Err(violation(format!("opening ({}, {:#x}) out of range", decom.b, decom.x)));
        }
        Payload::V0 { b: decom.b, x: decom.x }
    } else {
        let d = prover.answer_d(xi, rng)?;
        if u64::from(d) > mask(ell) {
            return Err(violation(format!("d = {d:#x} exceeds {ell} bits")));
        }
        let v2 = rng.random_range(0..2u8);
        let eta = prover.answer_eta(v2, rng)?;
        if eta > 1 {
            return Err(violation(format!("eta = {eta} is not a bit")));
        }
        Payload::V1 { d, v2, eta }
    };
    let v2coin = rng.random_range(0..8u8);

    Ok(SessionRecord {
        t,
        j,
        k,
        h0,
        h1,
        y,
        v1,
        xi,
        payload,
        v2coin,
        verdict: None,
    })
}
