//! End-to-end acceptance run: one PASS/FAIL line per criterion.

mod common;

use std::process::Command;
use std::time::{Duration, Instant};

use common::dense::{joint_law, total_variation, MAX_DENSE_ELL};
use ivpoq::adversaries::{goldreich_levin, reduction_b, unbounded_claw_prover, GlParams, PredictionOracle, ProverKind};
use ivpoq::amplification::{bernoulli_separation, RepetitionPlan};
use ivpoq::coherent::{challenge_law, run_coherent_commit, unique_claw_acceptance, HonestProver, SupportState};
use ivpoq::commitment::{CommitmentScheme, SchemeSpec};
use ivpoq::hashing::{sample_hash, HashFamily};
use ivpoq::lemmas::{check_hash_lemmas, check_kinji, check_sis1, check_transcript_prob, LemmaVerdict};
use ivpoq::stats::{session_rng, wilson, Z99};
use ivpoq::verifier::{estimate_acceptance, AcceptanceEstimate, GridMode, ProtocolParams, Tally};
use rand::seq::SliceRandom;
use rand::Rng;

const Q_HONEST: f64 = 0.926_776_695_3;
const COIN: f64 = 0.875;
const Q_TOLERANCE: f64 = 1e-9;
const HALF_WIDTH_UNIQUE: f64 = 0.01;
const HALF_WIDTH_COIN: f64 = 0.005;
const SIGMAS: f64 = 3.0;
const Q_CLASSICAL: f64 = 0.75;
const TV_LIMIT: f64 = 1e-6;
const SIS1_FLOOR: f64 = 0.1;
const GL_NOISY_HITS: u32 = 95;
const REDUCTION_SUCCESSES: u64 = 20;
const HONEST_PASSES: u64 = 198;
const CHEATER_PASSES: u64 = 2;

struct Line {
    id: u32,
    name: &'static str,
    pass: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

fn timed(id: u32, name: &'static str, budget_s: u64, f: impl FnOnce() -> (bool, String)) -> Line {
    let start = Instant::now();
    let (pass, detail) = f();
    let elapsed = start.elapsed();
    let budget = Duration::from_secs(budget_s);
    Line {
        id,
        name,
        pass: pass && elapsed <= budget,
        detail,
        elapsed,
        budget,
    }
}

fn hm2_12() -> ProtocolParams {
    ProtocolParams::new(SchemeSpec::from_name("hm2", 12, 6, 8).unwrap(), 0.01, GridMode::OracleBestJ).unwrap()
}

fn branch_intervals(t: &Tally) -> ((f64, f64, f64), (f64, f64, f64)) {
    let u = wilson(t.unique_claw_pass, t.unique(), Z99);
    let coin_n = t.coin_accept + t.coin_reject;
    let c = wilson(t.coin_accept, coin_n, Z99);
    (
        (t.unique_claw_pass as f64 / t.unique() as f64, u.lo, u.hi),
        (t.coin_accept as f64 / coin_n as f64, c.lo, c.hi),
    )
}

fn identity_line(name: &str, est: &AcceptanceEstimate, q: f64) -> (bool, String) {
    let (res, se) = est.tally.total_probability_residual(q);
    (
        res.abs() <= SIGMAS * se,
        format!("{name}: q={q:.7} p_good={:.4} residual={res:+.5} se={se:.5}", est.p_good),
    )
}

fn random_state(ell: u32, rng: &mut impl Rng) -> SupportState {
    let density = rng.random_range(0.02..0.5);
    loop {
        let s0: Vec<u32> = (0..1u32 << ell).filter(|_| rng.random::<f64>() < density).collect();
        let s1: Vec<u32> = (0..1u32 << ell).filter(|_| rng.random::<f64>() < density).collect();
        if !s0.is_empty() || !s1.is_empty() {
            return SupportState::new(ell, s0, s1).unwrap();
        }
    }
}

fn parity(a: u32, b: u32) -> u8 {
    ((a & b).count_ones() & 1) as u8
}

fn main() {
    let mut lines = Vec::new();
    let q = unique_claw_acceptance();

    let honest_params = hm2_12();
    let start = Instant::now();
    let honest = estimate_acceptance(&honest_params, |_| HonestProver::new(), 100_000, 1).unwrap();
    let honest_time = start.elapsed();
    let ((u_rate, u_lo, u_hi), (c_rate, c_lo, c_hi)) = branch_intervals(&honest.tally);

    lines.push(timed(1, "conditional completeness", 120, || {
        let pass = (q - Q_HONEST).abs() < Q_TOLERANCE
            && u_lo <= q
            && q <= u_hi
            && (u_hi - u_lo) / 2.0 <= HALF_WIDTH_UNIQUE;
        (
            pass,
            format!(
                "unique={} rate={u_rate:.5} ci=[{u_lo:.5}, {u_hi:.5}] hw={:.5}<={HALF_WIDTH_UNIQUE} target={q:.10} ({:.1}s sampling)",
                honest.tally.unique(),
                (u_hi - u_lo) / 2.0,
                honest_time.as_secs_f64()
            ),
        )
    }));
    lines.last_mut().unwrap().elapsed += honest_time;

    lines.push(timed(2, "non-unique branch", 120, || {
        let pass = c_lo <= COIN && COIN <= c_hi && (c_hi - c_lo) / 2.0 <= HALF_WIDTH_COIN;
        (
            pass,
            format!(
                "coin sessions={} rate={c_rate:.5} ci=[{c_lo:.5}, {c_hi:.5}] hw={:.5}<={HALF_WIDTH_COIN}",
                honest.tally.coin_accept + honest.tally.coin_reject,
                (c_hi - c_lo) / 2.0
            ),
        )
    }));
    lines.last_mut().unwrap().elapsed += honest_time;

    lines.push(timed(3, "law of total acceptance", 300, || {
        let p = hm2_12();
        let classical = estimate_acceptance(&p, |rng| ProverKind::ClassicalHonest.build(&p.scheme, rng).unwrap(), 100_000, 2).unwrap();
        let claw = estimate_acceptance(&p, |rng| ProverKind::UnboundedClaw.build(&p.scheme, rng).unwrap(), 40_000, 3).unwrap();
        let parts = [
            identity_line("honest", &honest, q),
            identity_line("classical-honest", &classical, Q_CLASSICAL),
            identity_line("unbounded-claw", &claw, q),
        ];
        let (literal, literal_se) = classical.tally.total_probability_residual(q);
        let pass = parts.iter().all(|p| p.0);
        let mut detail: Vec<String> = parts.into_iter().map(|p| p.1).collect();
        detail.push(format!("classical-honest at q={q:.4}: residual={literal:+.5} se={literal_se:.5}"));
        (pass, detail.join("; "))
    }));

    lines.push(timed(4, "hashing bounds (exhaustive)", 30, || {
        let reports: Vec<_> = [2u64, 4, 8].into_iter().map(|k| check_hash_lemmas(3, k).unwrap()).collect();
        let pass = reports.iter().all(|r| r.verdict == LemmaVerdict::Holds);
        let cases: f64 = reports.iter().map(|r| r.data["cases"]).sum();
        (pass, format!("ell=3 k in {{2,4,8}}: {cases} cases, violations={}", reports.iter().filter(|r| !r.ok()).count()))
    }));

    lines.push(timed(5, "grid bracket", 5, || {
        let mut rng = session_rng(500, 0);
        let reports: Vec<_> = [0.01, 0.5].into_iter().map(|e| check_kinji(e, 20, 1000, &mut rng).unwrap()).collect();
        let pass = reports.iter().all(|r| r.verdict == LemmaVerdict::Holds && r.data["pairs_tested"] == 1000.0);
        (pass, "1000 pairs at eps=0.01 and eps=0.5".into())
    }));

    lines.push(timed(6, "claw probability", 60, || {
        let mut rng = session_rng(600, 0);
        let mut worst: f64 = 1.0;
        let mut pass = true;
        for shift in 0..=6 {
            let r = check_sis1(1 << shift, 0.01, 10_000, &mut rng).unwrap();
            let p = r.data["probability"];
            worst = worst.min(p);
            pass &= p >= SIS1_FLOOR;
        }
        (pass, format!("n=1..64: min probability={worst:.4} floor={SIS1_FLOOR}"))
    }));

    lines.push(timed(7, "coherent oracle equivalence", 120, || {
        let mut rng = session_rng(700, 0);
        let mut worst: f64 = 0.0;
        for i in 0..100 {
            let ell = rng.random_range(1..=MAX_DENSE_ELL);
            let state = if i % 4 == 0 && ell >= 3 {
                let scheme = SchemeSpec::from_name(["hm2", "const", "ident"][i % 3], ell, ell / 2, 4).unwrap();
                let r = rng.random::<u64>() & ((1u64 << scheme.receiver_bits()) - 1);
                run_coherent_commit(&scheme, r, &mut rng).unwrap().1
            } else {
                random_state(ell, &mut rng)
            };
            let k = rng.random_range(1..=(2u64 << ell));
            let h0 = sample_hash(HashFamily::AffineModPrime, ell, k, &mut rng).unwrap();
            let h1 = sample_hash(HashFamily::AffineModPrime, ell, k, &mut rng).unwrap();
            let xi = rng.random_range(0..1u32 << ell);
            let v2 = rng.random_range(0..2u8);
            let sparse = challenge_law(&state, &h0, &h1, xi, v2).unwrap();
            let dense = joint_law(ell, &state.s0, &state.s1, &h0, &h1, xi, v2);
            worst = worst.max(total_variation(&sparse, &dense));
        }
        (worst <= TV_LIMIT, format!("100 fixtures ell<={MAX_DENSE_ELL}: max tv={worst:.2e} limit={TV_LIMIT:.0e}"))
    }));

    lines.push(timed(8, "transcript probability", 60, || {
        let mut rng = session_rng(800, 0);
        let schemes = [("hm2", 6, 3, 4), ("hm2", 5, 2, 3), ("ident", 6, 0, 0), ("const", 6, 0, 0)];
        let mut detail = Vec::new();
        let mut pass = true;
        for (name, ell, a, kb) in schemes {
            let r = check_transcript_prob(&SchemeSpec::from_name(name, ell, a, kb).unwrap(), 0, &mut rng).unwrap();
            pass &= r.verdict == LemmaVerdict::Holds;
            detail.push(format!("{name}({ell}): {} transcripts", r.data["transcripts"]));
        }
        (pass, detail.join(", "))
    }));

    lines.push(timed(9, "list decoding", 120, || {
        let mut rng = session_rng(900, 0);
        let mut exact = 0;
        for _ in 0..100 {
            let s = rng.random_range(0..1u32 << 16);
            let mut oracle = PredictionOracle::new(16, |xi| Ok(parity(xi, s)));
            let out = goldreich_levin(&mut oracle, GlParams { advantage: 0.5, delta: 0.05 }, &mut rng).unwrap();
            exact += u32::from(out.candidates == [s]);
        }
        let size = 1usize << 12;
        let mut hits = 0;
        for _ in 0..100 {
            let s = rng.random_range(0..size as u32);
            let agree = (0.75 * size as f64).ceil() as usize;
            let mut flip: Vec<bool> = (0..size).map(|i| i >= agree).collect();
            flip.shuffle(&mut rng);
            let mut oracle = PredictionOracle::new(12, |xi| Ok(parity(xi, s) ^ u8::from(flip[xi as usize])));
            let out = goldreich_levin(&mut oracle, GlParams { advantage: 0.25, delta: 0.05 }, &mut rng).unwrap();
            hits += u32::from(out.candidates.contains(&s));
        }
        (exact == 100 && hits >= GL_NOISY_HITS, format!("perfect ell=16: {exact}/100 exact; advantage 0.25 ell=12: {hits}/100 listed"))
    }));

    lines.push(timed(10, "reduction end to end", 180, || {
        let p = ProtocolParams::new(SchemeSpec::from_name("const", 4, 0, 0).unwrap(), 0.5, GridMode::OracleBestJ).unwrap();
        let gl = GlParams { advantage: 0.25, delta: 0.05 };
        let (mut wins, mut unique, mut unique_wins) = (0u64, 0u64, 0u64);
        for i in 0..200 {
            let mut rng = session_rng(1000, i);
            let prover = unbounded_claw_prover(p.scheme.clone(), rng.random()).unwrap();
            let out = reduction_b(&p, &prover, gl, &mut rng).unwrap();
            let opened = out.success && out.decom0.is_some() && out.decom1.is_some();
            wins += u64::from(opened);
            if out.claw.is_some() {
                unique += 1;
                unique_wins += u64::from(opened);
            }
        }
        (
            wins >= REDUCTION_SUCCESSES,
            format!("{wins}/200 double openings (need {REDUCTION_SUCCESSES}); unique-claw runs {unique_wins}/{unique}"),
        )
    }));

    lines.push(timed(11, "amplification separation", 120, || {
        let plan = RepetitionPlan::new(0.93, 0.875, 40.0).unwrap();
        let r = bernoulli_separation(&plan, 200, 1100).unwrap();
        let pass = plan.n == 13224 && r.pass_rate_honest.passes >= HONEST_PASSES && r.pass_rate_cheater.passes <= CHEATER_PASSES;
        (
            pass,
            format!(
                "N={} honest {}/200 cheater {}/200 hoeffding={:.2e}",
                plan.n, r.pass_rate_honest.passes, r.pass_rate_cheater.passes, r.hoeffding_bound
            ),
        )
    }));

    lines.push(timed(12, "determinism", 60, || {
        let bin = env!("CARGO_BIN_EXE_ivpoq");
        let cases: [&[&str]; 6] = [
            &["run", "--seed", "12"],
            &["completeness", "--ell", "8", "--trials", "500"],
            &["soundness", "--ell", "6", "--prover", "always-wrong", "--trials", "500", "--r-count", "2"],
            &["reduce", "--scheme", "const", "--ell", "4", "--epsilon", "0.5", "--trials", "20"],
            &["amplify", "--trials", "5", "--n", "500"],
            &["gl", "--ell", "10", "--trials", "5", "--format", "csv"],
        ];
        let mut same = 0;
        for args in cases {
            let a = Command::new(bin).args(args).output().unwrap();
            let b = Command::new(bin).args(args).output().unwrap();
            same += usize::from(a.status.success() && a.stdout == b.stdout);
        }
        (same == cases.len(), format!("{same}/{} invocations byte-identical", cases.len()))
    }));

    let mut failed = 0;
    for l in &lines {
        failed += usize::from(!l.pass);
        println!(
            "[{}] {:>2} {}: {} [{:.1}s / {}s]",
            if l.pass { "PASS" } else { "FAIL" },
            l.id,
            l.name,
            l.detail,
            l.elapsed.as_secs_f64(),
            l.budget.as_secs()
        );
    }
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
