//! Sequential repetition with a deferred second phase and a mean threshold.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adversaries::ProverKind;
use crate::error::{Error, Result};
use crate::stats::{session_rng, wilson, Interval, SessionRng, Z99};
use crate::verifier::{estimate_acceptance, run_session, v2_decide, ProtocolParams, Replayed, SessionRecord};

/// `⌈λ / (c − s)²⌉`.
pub fn required_n(c: f64, s: f64, lambda: f64) -> Result<u64> {
    if !(c > s) {
        return Err(Error::InvalidParameter(format!("need c > s, got c = {c}, s = {s}")));
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let gap = c - s;
    Ok(((lambda / (gap * gap)).ceil() as u64).max(1))
}

/// `exp(−2 n gap²)`.
pub fn hoeffding_tail(n: u64, gap: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(gap > 0.0 && gap <= 1.0) {
        return Err(Error::InvalidParameter(format!("gap must lie in (0, 1], got {gap}")));
    }
    Ok((-2.0 * n as f64 * gap * gap).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepetitionPlan {
    pub n: u64,
    pub c: f64,
    pub s: f64,
    pub lambda: f64,
}

impl RepetitionPlan {
    /// A plan with `n = required_n(c, s, λ)`.
    pub fn new(c: f64, s: f64, lambda: f64) -> Result<Self> {
        let n = required_n(c, s, lambda)?;
        Self::with_n(n, c, s, lambda)
    }

    pub fn with_n(n: u64, c: f64, s: f64, lambda: f64) -> Result<Self> {
        let plan = RepetitionPlan { n, c, s, lambda };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidParameter("N must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.s) || !(0.0..=1.0).contains(&self.c) || !(self.c > self.s) {
            return Err(Error::InvalidParameter(format!(
                "need 0 <= s < c <= 1, got c = {}, s = {}",
                self.c, self.s
            )));
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        (self.c + self.s) / 2.0
    }

    /// Whether `accepted` out of `n` clears the threshold.
    pub fn passes(&self, accepted: u64) -> bool {
        accepted as f64 >= self.threshold() * self.n as f64
    }
}

/// One repetition's two halves. The first phase owns the shared random
/// stream; the second phase is a pure function of what the first produced.
pub trait SessionSource {
    type Pending;

    fn first_phase(&mut self, rng: &mut dyn RngCore) -> Result<Self::Pending>;

    fn second_phase(&self, pending: &Self::Pending) -> Result<bool>;
}

/// A synthetic prover accepted with probability `p` in every session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BernoulliSource {
    pub p: f64,
}

impl SessionSource for BernoulliSource {
    type Pending = bool;

    fn first_phase(&mut self, rng: &mut dyn RngCore) -> Result<bool> {
        Ok(rng.random::<f64>() < self.p)
    }

    fn second_phase(&self, pending: &bool) -> Result<bool> {
        Ok(*pending)
    }
}

/// The real protocol against a fresh prover of the given kind each session.
#[derive(Debug, Clone)]
pub struct ProtocolSource {
    pub params: ProtocolParams,
    pub kind: ProverKind,
}

impl SessionSource for ProtocolSource {
    /// `None` when the prover broke off during the first phase.
    type Pending = Option<SessionRecord>;

    fn first_phase(&mut self, rng: &mut dyn RngCore) -> Result<Option<SessionRecord>> {
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        let mut local: SessionRng = rand::SeedableRng::from_seed(seed);
        let mut prover = self.kind.build(&self.params.scheme, &mut local)?;
        match run_session(&self.params, &mut prover, &mut local) {
            Ok(rec) => Ok(Some(rec)),
            Err(Error::ProverAbort | Error::ProverViolation(_) | Error::ProverNondeterminism) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn second_phase(&self, pending: &Option<SessionRecord>) -> Result<bool> {
        match pending {
            Some(rec) => Ok(v2_decide(&self.params, rec)?.accept),
            None => Ok(false),
        }
    }
}

/// Scheduling events reported to the observer of [`run_sequential`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    FirstPhaseStart(u64),
    FirstPhaseEnd(u64),
    SecondPhase(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SequentialOutcome {
    pub accept: bool,
    pub accepted: u64,
    pub n: u64,
    pub fraction: f64,
}

/// Runs all `N` first phases back to back, then every second phase, and
/// accepts iff the accepted fraction is at least `(c + s) / 2`.
pub fn run_sequential<S: SessionSource>(
    plan: &RepetitionPlan,
    source: &mut S,
    rng: &mut dyn RngCore,
    observer: &mut dyn FnMut(Event),
) -> Result<SequentialOutcome> {
    plan.validate()?;
    let mut pending = Vec::with_capacity(plan.n.min(1 << 20) as usize);
    for i in 0..plan.n {
        observer(Event::FirstPhaseStart(i));
        pending.push(source.first_phase(rng)?);
        observer(Event::FirstPhaseEnd(i));
    }
    let mut accepted = 0u64;
    for (i, p) in pending.iter().enumerate() {
        observer(Event::SecondPhase(i as u64));
        accepted += u64::from(source.second_phase(p)?);
    }
    Ok(SequentialOutcome {
        accept: plan.passes(accepted),
        accepted,
        n: plan.n,
        fraction: accepted as f64 / plan.n as f64,
    })
}

/// Pass frequency of the repeated protocol over independent macro-trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassRate {
    pub passes: u64,
    pub macro_trials: u64,
    pub rate: f64,
    pub ci: Interval,
}

/// Macro-trial `i` uses stream `i` of `seed`; `make` builds a fresh source.
pub fn pass_rate<S, F>(plan: &RepetitionPlan, make: F, macro_trials: u64, seed: u64) -> Result<PassRate>
where
    S: SessionSource,
    F: Fn() -> S + Sync,
{
    if macro_trials == 0 {
        return Err(Error::InvalidParameter("macro_trials must be at least 1".into()));
    }
    let passes = (0..macro_trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = session_rng(seed, i);
            let mut source = make();
            run_sequential(plan, &mut source, &mut rng, &mut |_| {}).map(|o| u64::from(o.accept))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(PassRate {
        passes,
        macro_trials,
        rate: passes as f64 / macro_trials as f64,
        ci: wilson(passes, macro_trials, Z99),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    #[serde(rename = "N")]
    pub n: u64,
    pub c: f64,
    pub s: f64,
    pub lambda: f64,
    pub threshold: f64,
    pub hoeffding_bound: f64,
    pub pass_rate_honest: PassRate,
    pub pass_rate_cheater: PassRate,
    pub seeds: [u64; 2],
}

/// Bernoulli(c) against Bernoulli(s) under the same plan.
pub fn bernoulli_separation(plan: &RepetitionPlan, macro_trials: u64, seed: u64) -> Result<SeparationReport> {
    let (c, s) = (plan.c, plan.s);
    let honest = pass_rate(plan, || BernoulliSource { p: c }, macro_trials, seed)?;
    let cheater = pass_rate(plan, || BernoulliSource { p: s }, macro_trials, seed.wrapping_add(1))?;
    Ok(SeparationReport {
        n: plan.n,
        c,
        s,
        lambda: plan.lambda,
        threshold: plan.threshold(),
        hoeffding_bound: hoeffding_tail(plan.n, (c - s) / 2.0)?,
        pass_rate_honest: honest,
        pass_rate_cheater: cheater,
        seeds: [seed, seed.wrapping_add(1)],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomnessRate {
    pub r: u64,
    pub rate: f64,
    pub ci: Interval,
}

/// Per-randomness acceptance of a cheating prover `P*_r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrongSoundnessProfile {
    pub prover: ProverKind,
    pub s: f64,
    pub slack: f64,
    pub trials_per_r: u64,
    pub seed: u64,
    pub per_r: Vec<RandomnessRate>,
    /// Fraction of `r` whose estimated rate is at least `s + slack`.
    pub fraction_above: f64,
}

/// Estimates `Pr[⊤]` for each of `r_count` fixed randomness values
/// `r = 0, 1, …`, using `trials_per_r` verifier streams each.
pub fn strong_soundness_profile(
    params: &ProtocolParams,
    kind: ProverKind,
    r_count: u64,
    trials_per_r: u64,
    slack: f64,
    seed: u64,
) -> Result<StrongSoundnessProfile> {
    if kind == ProverKind::Honest {
        return Err(Error::InvalidParameter("profile needs a prover with fixed randomness".into()));
    }
    let mut per_r = Vec::with_capacity(r_count as usize);
    for r in 0..r_count {
        kind.replayable(&params.scheme, r)?;
        let est = estimate_acceptance(
            params,
            |_| Replayed::new(kind.replayable(&params.scheme, r).ok().flatten().expect("checked above")),
            trials_per_r,
            seed.wrapping_add(r),
        )?;
        per_r.push(RandomnessRate {
            r,
            rate: est.rate,
            ci: est.ci(),
        });
    }
    let above = per_r.iter().filter(|p| p.rate >= params.s + slack).count();
    Ok(StrongSoundnessProfile {
        prover: kind,
        s: params.s,
        slack,
        trials_per_r,
        seed,
        fraction_above: above as f64 / r_count.max(1) as f64,
        per_r,
    })
}
