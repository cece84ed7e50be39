use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::session::{run_session, Reason, Verdict};
use super::{v2_decide, GridMode, ProtocolParams, Prover};
use crate::commitment::CommitmentScheme;
use crate::error::{Error, Result};
use crate::stats::{session_rng, wilson, Interval, SessionRng, Z99};

/// Integer counts of session outcomes. Merging is plain addition, so the
/// result does not depend on how trials were split across workers.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub trials: u64,
    pub unique_claw_pass: u64,
    pub unique_claw_fail: u64,
    pub coin_accept: u64,
    pub coin_reject: u64,
    /// Sessions the prover aborted or broke; counted as rejections.
    pub aborted: u64,
}

impl Tally {
    pub fn record(&mut self, outcome: &Result<Verdict>) {
        self.trials += 1;
        match outcome {
            Ok(Verdict {
                reason: Reason::UniqueClawPass,
                ..
            }) => self.unique_claw_pass += 1,
            Ok(Verdict {
                reason: Reason::UniqueClawFail,
                ..
            }) => self.unique_claw_fail += 1,
            Ok(Verdict { accept: true, .. }) => self.coin_accept += 1,
            Ok(Verdict { accept: false, .. }) => self.coin_reject += 1,
            Err(_) => self.aborted += 1,
        }
    }

    pub fn merge(self, o: Tally) -> Tally {
        Tally {
            trials: self.trials + o.trials,
            unique_claw_pass: self.unique_claw_pass + o.unique_claw_pass,
            unique_claw_fail: self.unique_claw_fail + o.unique_claw_fail,
            coin_accept: self.coin_accept + o.coin_accept,
            coin_reject: self.coin_reject + o.coin_reject,
            aborted: self.aborted + o.aborted,
        }
    }

    pub fn accepted(&self) -> u64 {
        self.unique_claw_pass + self.coin_accept
    }

    pub fn unique(&self) -> u64 {
        self.unique_claw_pass + self.unique_claw_fail
    }

    pub fn rate(&self) -> f64 {
        self.accepted() as f64 / self.trials.max(1) as f64
    }

    pub fn p_good(&self) -> f64 {
        self.unique() as f64 / self.trials.max(1) as f64
    }

    /// Acceptance rate restricted to unique-claw sessions.
    pub fn conditional_rate(&self) -> Option<f64> {
        (self.unique() > 0).then(|| self.unique_claw_pass as f64 / self.unique() as f64)
    }

    /// Mean and standard error of `Z = A − 7/8 − (q − 7/8)·U`, where `A`
    /// marks acceptance and `U` a unique claw. The mean vanishes in
    /// expectation when `q` is the true conditional rate.
    pub fn total_probability_residual(&self, q: f64) -> (f64, f64) {
        let n = self.trials.max(1) as f64;
        let pa = self.accepted() as f64 / n;
        let pu = self.unique() as f64 / n;
        let pau = self.unique_claw_pass as f64 / n;
        let g = q - 0.875;
        let mean = pa - 0.875 - g * pu;
        let second = pa + 0.875 * 0.875 + g * g * pu - 1.75 * pa - 2.0 * g * pau + 1.75 * g * pu;
        let var = (second - mean * mean).max(0.0);
        (mean, (var / n).sqrt())
    }
}

/// Monte Carlo acceptance estimate with its configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceEstimate {
    pub scheme: String,
    pub ell: u32,
    pub epsilon: f64,
    pub mode: GridMode,
    pub trials: u64,
    pub seed: u64,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub p_good: f64,
    pub conditional_rate: Option<f64>,
    pub tally: Tally,
}

impl AcceptanceEstimate {
    pub fn from_tally(params: &ProtocolParams, seed: u64, tally: Tally) -> Self {
        let ci = wilson(tally.accepted(), tally.trials, Z99);
        AcceptanceEstimate {
            scheme: params.scheme.name().to_string(),
            ell: params.ell(),
            epsilon: params.epsilon,
            mode: params.grid_mode,
            trials: tally.trials,
            seed,
            rate: tally.rate(),
            ci_lo: ci.lo,
            ci_hi: ci.hi,
            p_good: tally.p_good(),
            conditional_rate: tally.conditional_rate(),
            tally,
        }
    }

    pub fn ci(&self) -> Interval {
        Interval {
            lo: self.ci_lo,
            hi: self.ci_hi,
        }
    }

    pub const CSV_HEADER: &'static str = "scheme,ell,epsilon,mode,trials,rate,ci_lo,ci_hi,p_good,seed";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.scheme, self.ell, self.epsilon, self.mode, self.trials, self.rate, self.ci_lo, self.ci_hi, self.p_good, self.seed
        )
    }
}

/// Errors that mean "the prover misbehaved" rather than "the simulator broke".
pub(crate) fn is_prover_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::ProverAbort | Error::ProverViolation(_) | Error::ProverNondeterminism
    )
}

/// Runs one complete session (both phases) and returns its verdict.
pub fn run_trial(params: &ProtocolParams, prover: &mut dyn Prover, rng: &mut SessionRng) -> Result<Result<Verdict>> {
    match run_session(params, prover, rng) {
        Ok(rec) => v2_decide(params, &rec).map(Ok),
        Err(e) if is_prover_failure(&e) => Ok(Err(e)),
        Err(e) => Err(e),
    }
}

/// Estimates the acceptance probability over `trials` independent sessions.
///
/// Trial `i` uses stream `i` of `seed`; `factory` builds that trial's prover
/// from the same stream before the session starts.
pub fn estimate_acceptance<P, F>(params: &ProtocolParams, factory: F, trials: u64, seed: u64) -> Result<AcceptanceEstimate>
where
    P: Prover,
    F: Fn(&mut SessionRng) -> P + Sync,
{
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let tally = (0..trials)
        .into_par_iter()
        .try_fold(Tally::default, |mut tally, i| {
            let mut rng = session_rng(seed, i);
            let mut prover = factory(&mut rng);
            tally.record(&run_trial(params, &mut prover, &mut rng)?);
            Ok::<_, Error>(tally)
        })
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;
    Ok(AcceptanceEstimate::from_tally(params, seed, tally))
}
