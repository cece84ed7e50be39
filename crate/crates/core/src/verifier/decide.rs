use serde::{Deserialize, Serialize};

use super::session::{Payload, Reason, SessionRecord, Verdict};
use super::ProtocolParams;
use crate::bits::{check_ell, dot, mask};
use crate::commitment::{is_consistent, CommitTranscript, CommitmentScheme};
use crate::error::{Error, Result};
use crate::hashing::HashFn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CountClass {
    Zero,
    One,
    Many,
}

/// Size class of `X_{b,t} ∩ h⁻¹(y)` and its least element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniqueCount {
    pub class: CountClass,
    pub witness: Option<u32>,
}

/// Classifies `X_{b,t} ∩ h⁻¹(y)` as empty, a singleton or larger.
///
/// The three oracle questions (is there a witness, find one, is there a
/// second) are answered by a single ascending scan that stops at the second
/// hit, so the witness is the least element.
pub fn np_count_unique<S: CommitmentScheme + ?Sized>(
    scheme: &S,
    t: &CommitTranscript,
    h: &HashFn,
    y: u64,
    b: u8,
) -> Result<UniqueCount> {
    let ell = scheme.ell();
    check_ell(ell)?;
    if h.ell() != ell {
        return Err(Error::InvalidParameter(format!("hash domain {} != ell {ell}", h.ell())));
    }
    let mut witness = None;
    for x in 0..1u32 << ell {
        if h.eval(x) != y || !is_consistent(scheme, t, b, x)? {
            continue;
        }
        if witness.is_some() {
            return Ok(UniqueCount {
                class: CountClass::Many,
                witness,
            });
        }
        witness = Some(x);
    }
    Ok(UniqueCount {
        class: if witness.is_some() { CountClass::One } else { CountClass::Zero },
        witness,
    })
}

fn malformed(what: impl Into<String>) -> Error {
    Error::MalformedRecord(what.into())
}

fn check_record(params: &ProtocolParams, rec: &SessionRecord) -> Result<()> {
    let ell = params.ell();
    if rec.t.len() != params.scheme.rounds() {
        return Err(malformed("transcript length does not match the scheme"));
    }
    if rec.h0.ell() != ell || rec.h1.ell() != ell || rec.h0.k() != rec.k || rec.h1.k() != rec.k {
        return Err(malformed("hash functions do not match ell and k"));
    }
    if rec.y >= rec.k || rec.v2coin > 7 || rec.v1 > 1 || u64::from(rec.xi) > mask(ell) {
        return Err(malformed("field out of range"));
    }
    match rec.payload {
        Payload::V0 { b, x } if rec.v1 == 0 && b <= 1 && u64::from(x) <= mask(ell) => Ok(()),
        Payload::V1 { d, v2, eta } if rec.v1 == 1 && v2 <= 1 && eta <= 1 && u64::from(d) <= mask(ell) => Ok(()),
        _ => Err(malformed("payload does not match v1")),
    }
}

/// The second-phase verdict. A pure function of the record.
pub fn v2_decide(params: &ProtocolParams, rec: &SessionRecord) -> Result<Verdict> {
    check_record(params, rec)?;
    let c0 = np_count_unique(&params.scheme, &rec.t, &rec.h0, rec.y, 0)?;
    let c1 = np_count_unique(&params.scheme, &rec.t, &rec.h1, rec.y, 1)?;
    let (Some(x0), Some(x1), CountClass::One, CountClass::One) = (c0.witness, c1.witness, c0.class, c1.class) else {
        return Ok(Verdict {
            accept: rec.v2coin < 7,
            reason: Reason::NonUniqueCoin,
        });
    };
    let accept = match rec.payload {
        Payload::V0 { b, x } => x == if b == 0 { x0 } else { x1 },
        Payload::V1 { d, v2, eta } => {
            let (p0, p1) = (dot(rec.xi, x0), dot(rec.xi, x1));
            if p0 != p1 {
                eta == p0
            } else {
                eta == v2 ^ dot(d, x0 ^ x1)
            }
        }
    };
    Ok(Verdict {
        accept,
        reason: if accept { Reason::UniqueClawPass } else { Reason::UniqueClawFail },
    })
}
