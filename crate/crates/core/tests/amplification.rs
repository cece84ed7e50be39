use std::cell::Cell;
use std::rc::Rc;

use ivpoq::adversaries::ProverKind;
use ivpoq::amplification::{
    bernoulli_separation, hoeffding_tail, pass_rate, required_n, run_sequential, strong_soundness_profile, BernoulliSource,
    Event, ProtocolSource, RepetitionPlan, SessionSource,
};
use ivpoq::commitment::SchemeSpec;
use ivpoq::stats::session_rng;
use ivpoq::verifier::{GridMode, ProtocolParams};
use rand::RngCore;

#[test]
fn repetition_count_formula() {
    for (c, s, lambda) in [(0.93, 0.875, 40.0), (0.9268, 0.875, 64.0), (0.75, 0.5, 10.0), (0.6, 0.55, 1.0)] {
        let gap: f64 = c - s;
        let expect = (lambda / (gap * gap)).ceil() as u64;
        assert_eq!(required_n(c, s, lambda).unwrap(), expect);
    }
    assert_eq!(required_n(0.93, 0.875, 40.0).unwrap(), 13224);
    assert!(required_n(0.875, 0.93, 40.0).is_err());
    assert!(required_n(0.93, 0.875, 0.0).is_err());
}

#[test]
fn bernoulli_separation_at_full_scale() {
    let plan = RepetitionPlan::new(0.93, 0.875, 40.0).unwrap();
    assert_eq!(plan.n, 13224);
    let report = bernoulli_separation(&plan, 200, 11).unwrap();
    assert!(report.pass_rate_honest.passes >= 198, "{report:?}");
    assert!(report.pass_rate_cheater.passes <= 2, "{report:?}");
    let bound = hoeffding_tail(plan.n, (plan.c - plan.s) / 2.0).unwrap();
    assert!((report.hoeffding_bound - bound).abs() < 1e-15);
    assert!(bound < 1e-4);
}

#[test]
fn pass_rate_is_monotone_in_the_session_rate() {
    let plan = RepetitionPlan::with_n(400, 0.93, 0.875, 40.0).unwrap();
    let mut last = 0;
    for p in [0.85, 0.88, 0.9, 0.9025, 0.905, 0.92, 0.95] {
        let rate = pass_rate(&plan, || BernoulliSource { p }, 100, 3).unwrap();
        assert!(rate.passes >= last, "p = {p}");
        last = rate.passes;
    }
    assert_eq!(last, 100);
}

#[test]
fn threshold_is_inclusive() {
    let plan = RepetitionPlan::with_n(8, 0.75, 0.25, 1.0).unwrap();
    assert!(plan.passes(4));
    assert!(!plan.passes(3));
    struct Fixed(u64, u64);
    impl SessionSource for Fixed {
        type Pending = bool;
        fn first_phase(&mut self, _: &mut dyn RngCore) -> ivpoq::Result<bool> {
            self.1 += 1;
            Ok(self.1 <= self.0)
        }
        fn second_phase(&self, p: &bool) -> ivpoq::Result<bool> {
            Ok(*p)
        }
    }
    let mut rng = session_rng(0, 0);
    let out = run_sequential(&plan, &mut Fixed(4, 0), &mut rng, &mut |_| {}).unwrap();
    assert!(out.accept);
    assert_eq!(out.accepted, 4);
    let out = run_sequential(&plan, &mut Fixed(3, 0), &mut rng, &mut |_| {}).unwrap();
    assert!(!out.accept);
}

/// Counts every word drawn from the wrapped generator.
struct Counting<R> {
    inner: R,
    draws: Rc<Cell<u64>>,
}

impl<R: RngCore> RngCore for Counting<R> {
    fn next_u32(&mut self) -> u32 {
        self.draws.set(self.draws.get() + 1);
        self.inner.next_u32()
    }
    fn next_u64(&mut self) -> u64 {
        self.draws.set(self.draws.get() + 1);
        self.inner.next_u64()
    }
    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.draws.set(self.draws.get() + dst.len().div_ceil(4) as u64);
        self.inner.fill_bytes(dst)
    }
}

#[test]
fn second_phases_run_after_every_first_phase_without_randomness() {
    let scheme = SchemeSpec::from_name("hm2", 6, 3, 4).unwrap();
    let params = ProtocolParams::new(scheme, 0.5, GridMode::OracleBestJ).unwrap();
    let plan = RepetitionPlan::with_n(40, 0.9, 0.875, 1.0).unwrap();
    let draws = Rc::new(Cell::new(0));
    let mut rng = Counting {
        inner: session_rng(12, 0),
        draws: draws.clone(),
    };
    let mut source = ProtocolSource {
        params,
        kind: ProverKind::Honest,
    };
    let mut log = Vec::new();
    let out = run_sequential(&plan, &mut source, &mut rng, &mut |e| log.push((e, draws.get()))).unwrap();
    assert_eq!(log.len(), 3 * 40);
    for i in 0..40u64 {
        assert_eq!(log[2 * i as usize].0, Event::FirstPhaseStart(i));
        assert_eq!(log[2 * i as usize + 1].0, Event::FirstPhaseEnd(i));
        assert_eq!(log[80 + i as usize].0, Event::SecondPhase(i));
    }
    let after_first = log[79].1;
    assert!(after_first > 0);
    assert!(log[80..].iter().all(|&(_, d)| d == after_first));
    assert_eq!(draws.get(), after_first);
    assert_eq!(out.n, 40);
}

#[test]
fn protocol_source_is_reproducible() {
    let scheme = SchemeSpec::from_name("const", 4, 0, 0).unwrap();
    let params = ProtocolParams::new(scheme, 0.5, GridMode::OracleBestJ).unwrap();
    let plan = RepetitionPlan::with_n(50, 0.9, 0.8, 1.0).unwrap();
    let run = || {
        let mut source = ProtocolSource {
            params: params.clone(),
            kind: ProverKind::UnboundedClaw,
        };
        run_sequential(&plan, &mut source, &mut session_rng(13, 0), &mut |_| {}).unwrap()
    };
    assert_eq!(run(), run());
}

#[test]
fn classical_randomness_stays_below_soundness_target() {
    let scheme = SchemeSpec::from_name("hm2", 8, 4, 6).unwrap();
    let params = ProtocolParams::new(scheme, 0.5, GridMode::OracleBestJ).unwrap();
    let profile = strong_soundness_profile(&params, ProverKind::ClassicalHonest, 6, 2000, 0.05, 14).unwrap();
    assert_eq!(profile.per_r.len(), 6);
    assert_eq!(profile.fraction_above, 0.0, "{profile:?}");
    assert!(strong_soundness_profile(&params, ProverKind::Honest, 1, 10, 0.05, 0).is_err());
}
