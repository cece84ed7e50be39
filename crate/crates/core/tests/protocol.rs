use ivpoq::adversaries::{classical_honest_prover, ProverKind};
use ivpoq::coherent::{unique_claw_acceptance, HonestProver};
use ivpoq::commitment::{consistent_set, honest_transcript, SchemeSpec};
use ivpoq::hashing::{sample_hash, HashFamily, HashFn};
use ivpoq::stats::session_rng;
use ivpoq::verifier::{
    compute_m, estimate_acceptance, np_count_unique, run_session, v2_decide, CountClass, GridMode, Payload, ProtocolParams,
    Reason, Replayed, SessionRecord,
};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn params(name: &str, ell: u32, eps: f64, mode: GridMode) -> ProtocolParams {
    ProtocolParams::new(SchemeSpec::from_name(name, ell, ell / 2, 6).unwrap(), eps, mode).unwrap()
}

fn chi2_uniform(counts: &[u64]) -> (f64, f64) {
    let n: u64 = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    let stat = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    (stat, ChiSquared::new((counts.len() - 1) as f64).unwrap().inverse_cdf(0.999))
}

#[test]
fn grid_sizes() {
    assert_eq!(compute_m(10, 0.01).unwrap(), 767);
    assert_eq!(compute_m(1, 0.999).unwrap(), 3);
    assert!(compute_m(1, 1.0).is_err());
    assert_eq!(compute_m(7, 0.5).unwrap(), 14);
}

#[test]
fn challenges_are_uniform() {
    let p = params("const", 3, 0.5, GridMode::Uniform);
    let mut v1 = [0u64; 2];
    let mut v2 = [0u64; 2];
    let mut xi = [0u64; 8];
    let mut coin = [0u64; 8];
    for i in 0..100_000 {
        let rec = run_session(&p, &mut HonestProver::new(), &mut session_rng(5, i)).unwrap();
        v1[rec.v1 as usize] += 1;
        xi[rec.xi as usize] += 1;
        coin[rec.v2coin as usize] += 1;
        if let Payload::V1 { v2: b, .. } = rec.payload {
            v2[b as usize] += 1;
        }
    }
    for counts in [&v1[..], &v2[..], &xi[..], &coin[..]] {
        let (stat, crit) = chi2_uniform(counts);
        assert!(stat < crit, "{counts:?}: {stat} >= {crit}");
    }
}

#[test]
fn count_classes() {
    let s = SchemeSpec::from_name("ident", 5, 0, 0).unwrap();
    let t = honest_transcript(&s, 1, 0b10110, 0).unwrap();
    let h = HashFn::identity(5).unwrap();
    let one = np_count_unique(&s, &t, &h, 0b10110, 1).unwrap();
    assert_eq!((one.class, one.witness), (CountClass::One, Some(0b10110)));
    assert_eq!(np_count_unique(&s, &t, &h, 0b10110, 0).unwrap().class, CountClass::Zero);

    let c = SchemeSpec::from_name("const", 5, 0, 0).unwrap();
    let t = honest_transcript(&c, 0, 0, 0).unwrap();
    let k1 = HashFn::affine_mod_prime(5, 1, 3, 1, 61).unwrap();
    for b in 0..2 {
        let many = np_count_unique(&c, &t, &k1, 0, b).unwrap();
        assert_eq!((many.class, many.witness), (CountClass::Many, Some(0)));
    }
}

#[test]
fn count_classes_match_reverse_scan() {
    let s = SchemeSpec::from_name("hm2", 8, 4, 6).unwrap();
    let mut rng = session_rng(6, 0);
    for _ in 0..40 {
        let b = rng.random_range(0..2u8);
        let x = rng.random_range(0..256u32);
        let t = honest_transcript(&s, b, x, rng.random::<u64>() & ((1 << 15) - 1)).unwrap();
        let h = sample_hash(HashFamily::AffineModPrime, 8, rng.random_range(1..64), &mut rng).unwrap();
        let y = rng.random_range(0..h.k());
        for side in 0..2 {
            let got = np_count_unique(&s, &t, &h, y, side).unwrap();
            let hits: Vec<u32> = consistent_set(&s, &t, side).unwrap().into_iter().rev().filter(|&x| h.eval(x) == y).collect();
            let class = match hits.len() {
                0 => CountClass::Zero,
                1 => CountClass::One,
                _ => CountClass::Many,
            };
            assert_eq!(got.class, class);
            assert_eq!(got.witness, hits.last().copied());
        }
    }
}

#[test]
fn records_replay_to_their_verdicts() {
    let p = params("hm2", 8, 0.5, GridMode::OracleBestJ);
    for i in 0..30 {
        let mut rec = run_session(&p, &mut HonestProver::new(), &mut session_rng(8, i)).unwrap();
        rec.verdict = Some(v2_decide(&p, &rec).unwrap());
        let json = serde_json::to_string(&rec).unwrap();
        let back: SessionRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(v2_decide(&p, &back).unwrap(), rec.verdict.unwrap());
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
    }
}

#[test]
fn honest_preimage_branch_always_passes() {
    let p = params("hm2", 8, 0.5, GridMode::OracleBestJ);
    let mut seen = 0;
    for i in 0..400 {
        let rec = run_session(&p, &mut HonestProver::new(), &mut session_rng(9, i)).unwrap();
        let v = v2_decide(&p, &rec).unwrap();
        if rec.v1 == 0 && v.reason != Reason::NonUniqueCoin {
            assert!(v.accept);
            seen += 1;
        }
    }
    assert!(seen > 0);
}

#[test]
fn const_honest_is_all_coin() {
    let p = params("const", 4, 0.5, GridMode::Uniform);
    let est = estimate_acceptance(&p, |_| HonestProver::new(), 4000, 1).unwrap();
    assert!(est.tally.unique() <= est.tally.trials / 10);
    assert!(est.ci().contains(0.875) || est.tally.unique() > 0);
}

#[test]
fn honest_law_of_total_acceptance() {
    let p = params("hm2", 10, 0.5, GridMode::OracleBestJ);
    let est = estimate_acceptance(&p, |_| HonestProver::new(), 6000, 4).unwrap();
    let (res, se) = est.tally.total_probability_residual(unique_claw_acceptance());
    assert!(res.abs() <= 3.0 * se, "{res} vs {se}");
    assert!(est.p_good > 0.05, "{}", est.p_good);
}

#[test]
fn classical_baseline_ignores_hiding() {
    let ident = params("ident", 6, 0.5, GridMode::OracleBestJ);
    let hm2 = params("hm2", 6, 0.5, GridMode::OracleBestJ);
    let build = |s: &ProtocolParams| {
        let scheme = s.scheme.clone();
        move |rng: &mut ivpoq::stats::SessionRng| {
            let r: u64 = rng.random();
            Replayed::new(classical_honest_prover(scheme.clone(), (r & 1) as u8, ((r >> 1) & 63) as u32))
        }
    };
    let a = estimate_acceptance(&ident, build(&ident), 6000, 3).unwrap();
    let b = estimate_acceptance(&hm2, build(&hm2), 6000, 3).unwrap();
    assert_eq!(a.tally.unique(), 0);
    assert!(a.ci().contains(0.875));
    let (res, se) = b.tally.total_probability_residual(0.75);
    assert!(b.p_good > 0.05);
    assert!(res.abs() <= 3.0 * se, "{res} vs {se}");
}

#[test]
fn aborting_prover_is_rejected() {
    let p = params("const", 3, 0.5, GridMode::Uniform);
    let est = estimate_acceptance(&p, |rng| ProverKind::Abort.build(&p.scheme, rng).unwrap(), 100, 0).unwrap();
    assert_eq!(est.rate, 0.0);
    assert_eq!(est.tally.aborted, 100);
}

#[test]
fn estimates_do_not_depend_on_worker_count() {
    let p = params("hm2", 8, 0.5, GridMode::OracleBestJ);
    let run = |w| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .unwrap()
            .install(|| estimate_acceptance(&p, |_| HonestProver::new(), 500, 4).unwrap())
    };
    assert_eq!(run(1), run(3));
}
