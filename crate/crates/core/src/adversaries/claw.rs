//! A classical prover that brute-forces the consistent-seed sets and then
//! samples every answer from the honest prover's exact law.

use std::sync::Mutex;

use rand::Rng;

use crate::bits::{check_ell, dot};
use crate::coherent::{collapse_hash, d_law, eta_law, ResidualQubit, SupportState};
use crate::commitment::{CommitTranscript, CommitmentScheme, Decommitment, Message, Round, SchemeSpec};
use crate::error::{Error, Result};
use crate::hashing::HashFn;
use crate::verifier::{query_rng, HashPrefix, ReplayableProver};

/// Largest `ell` the brute-force prover accepts.
pub const MAX_CLAW_ELL: u32 = 16;

/// Above this many `(d, x)` pairs the `d` law is taken from the
/// Walsh–Hadamard path instead of direct summation.
const DIRECT_SUM_LIMIT: u64 = 1 << 20;

#[derive(Debug)]
pub struct ClawProver {
    scheme: SchemeSpec,
    r: u64,
    committed: Mutex<Option<(CommitTranscript, SupportState)>>,
}

pub fn unbounded_claw_prover(scheme: SchemeSpec, r: u64) -> Result<ClawProver> {
    check_ell(scheme.ell())?;
    if scheme.ell() > MAX_CLAW_ELL {
        return Err(Error::DomainTooLarge {
            ell: scheme.ell(),
            cap: MAX_CLAW_ELL,
        });
    }
    Ok(ClawProver {
        scheme,
        r,
        committed: Mutex::new(None),
    })
}

/// `(â_0(d), â_1(d))` by direct summation over the support.
fn residual(state: &SupportState, xi: u32, d: u32) -> (i64, i64) {
    let mut a = [0i64; 2];
    for (b, set) in [(0u8, &state.s0), (1u8, &state.s1)] {
        for &x in set {
            let sign = if dot(d, x) == 0 { 1 } else { -1 };
            a[(b ^ dot(xi, x)) as usize] += sign;
        }
    }
    (a[0], a[1])
}

impl ClawProver {
    pub fn randomness(&self) -> u64 {
        self.r
    }

    /// All `(b, x)` whose sender messages reproduce `rounds`.
    fn consistent_with(&self, rounds: &[Round]) -> Result<SupportState> {
        let mut sets = [Vec::new(), Vec::new()];
        for (b, set) in sets.iter_mut().enumerate() {
            'seeds: for x in 0..1u32 << self.scheme.ell() {
                for (i, round) in rounds.iter().enumerate() {
                    if !self.scheme.sender_msg_matches(i + 1, b as u8, x, &rounds[..i], &round.alpha)? {
                        continue 'seeds;
                    }
                }
                set.push(x);
            }
        }
        let [s0, s1] = sets;
        Ok(SupportState {
            ell: self.scheme.ell(),
            s0,
            s1,
        })
    }

    fn committed(&self, t: &CommitTranscript) -> Result<SupportState> {
        let mut slot = self.committed.lock().expect("cache lock");
        if let Some((cached_t, state)) = slot.as_ref() {
            if cached_t == t {
                return Ok(state.clone());
            }
        }
        let state = self.consistent_with(&t.rounds)?;
        *slot = Some((t.clone(), state.clone()));
        Ok(state)
    }

    fn collapsed(&self, prefix: &HashPrefix) -> Result<SupportState> {
        let state = collapse_hash(&self.committed(&prefix.t)?, &prefix.h0, &prefix.h1, prefix.y);
        if state.is_empty() {
            return Err(Error::ProverViolation("hash value has no preimage".into()));
        }
        Ok(state)
    }

    /// Exact integer weights of `d`, summing to `2^ell · |S|`.
    pub fn d_weights(&self, state: &SupportState, xi: u32) -> Result<Vec<u64>> {
        if ((state.len() as u64) << state.ell) > DIRECT_SUM_LIMIT {
            return d_law(state, xi);
        }
        Ok((0..1u32 << state.ell)
            .map(|d| {
                let (a0, a1) = residual(state, xi, d);
                (a0 * a0 + a1 * a1) as u64
            })
            .collect())
    }

    fn pick<T: Copy>(items: &[(T, u64)], u: u64) -> T {
        let mut u = u;
        for &(item, w) in items {
            if u < w {
                return item;
            }
            u -= w;
        }
        unreachable!("weights cover the draw")
    }
}

impl ReplayableProver for ClawProver {
    fn commit_msg(&self, j: usize, prefix: &[Round]) -> Result<Message> {
        let state = self.consistent_with(prefix)?;
        if state.is_empty() {
            return Err(Error::ProverViolation("no seed is consistent with the prefix".into()));
        }
        let mut key = Vec::new();
        for round in prefix {
            key.extend(&round.alpha);
            key.push(0xff);
            key.extend(&round.beta);
            key.push(0xfe);
        }
        let mut rng = query_rng(self.r, "commit", &[&(j as u64).to_be_bytes(), &key]);
        let i = rng.random_range(0..state.len());
        let (b, x) = if i < state.s0.len() {
            (0, state.s0[i])
        } else {
            (1, state.s1[i - state.s0.len()])
        };
        self.scheme.sender_msg(j, b, x, prefix)
    }

    fn y(&self, t: &CommitTranscript, h0: &HashFn, h1: &HashFn) -> Result<u64> {
        let state = self.committed(t)?;
        if state.is_empty() {
            return Err(Error::ProverViolation("transcript has no consistent seed".into()));
        }
        let key = HashPrefix {
            t: t.clone(),
            h0: h0.clone(),
            h1: h1.clone(),
            y: 0,
        }
        .encode();
        let mut rng = query_rng(self.r, "y", &[&key]);
        let i = rng.random_range(0..state.len());
        Ok(if i < state.s0.len() {
            h0.eval(state.s0[i])
        } else {
            h1.eval(state.s1[i - state.s0.len()])
        })
    }

    fn preimage(&self, prefix: &HashPrefix) -> Result<Decommitment> {
        let state = self.collapsed(prefix)?;
        let mut rng = query_rng(self.r, "v0", &[&prefix.encode()]);
        let i = rng.random_range(0..state.len());
        Ok(if i < state.s0.len() {
            Decommitment { b: 0, x: state.s0[i] }
        } else {
            Decommitment {
                b: 1,
                x: state.s1[i - state.s0.len()],
            }
        })
    }

    fn d(&self, prefix: &HashPrefix, xi: u32) -> Result<u32> {
        let state = self.collapsed(prefix)?;
        let weights: Vec<(u32, u64)> = self
            .d_weights(&state, xi)?
            .into_iter()
            .enumerate()
            .map(|(d, w)| (d as u32, w))
            .collect();
        let total = (state.len() as u64) << state.ell;
        let mut rng = query_rng(self.r, "d", &[&prefix.encode(), &xi.to_be_bytes()]);
        Ok(Self::pick(&weights, rng.random_range(0..total)))
    }

    fn eta(&self, prefix: &HashPrefix, xi: u32, d: u32, v2: u8) -> Result<u8> {
        let state = self.collapsed(prefix)?;
        let (a0, a1) = residual(&state, xi, d);
        let qubit = ResidualQubit {
            a0: a0 as f64,
            a1: a1 as f64,
        };
        let p0 = eta_law(&qubit, v2).map_err(|_| Error::ProverViolation(format!("d = {d:#x} has probability zero")))?;
        let mut rng = query_rng(self.r, "eta", &[&prefix.encode(), &xi.to_be_bytes(), &d.to_be_bytes(), &[v2]]);
        Ok(u8::from(rng.random::<f64>() >= p0))
    }
}
