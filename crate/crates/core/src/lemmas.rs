//! Runnable checks of the standalone hashing, grid and counting facts the
//! protocol analysis relies on.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::coherent::run_coherent_commit;
use crate::commitment::{
    consistent_set, hiding_distance, honest_transcript, receiver_consistent_set, CommitTranscript, CommitmentScheme,
    SchemeSpec,
};
use crate::error::{Error, Result};
use crate::hashing::{gf2_affine_family, sample_hash, HashFamily, HashFn};
use crate::stats::{wilson, Interval, Moments, Z99};
use crate::verifier::{compute_m, k_for_j};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum LemmaVerdict {
    Holds,
    Violated { counterexample: Value },
    Estimated { estimate: f64, ci: Interval, holds: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: String,
    pub parameters: BTreeMap<String, Value>,
    pub verdict: LemmaVerdict,
    pub data: BTreeMap<String, f64>,
}

impl LemmaReport {
    fn new(lemma: &str, parameters: Value) -> Self {
        let parameters = match parameters {
            Value::Object(map) => map.into_iter().collect(),
            _ => BTreeMap::new(),
        };
        LemmaReport {
            lemma: lemma.to_string(),
            parameters,
            verdict: LemmaVerdict::Holds,
            data: BTreeMap::new(),
        }
    }

    pub fn ok(&self) -> bool {
        match &self.verdict {
            LemmaVerdict::Holds => true,
            LemmaVerdict::Violated { .. } => false,
            LemmaVerdict::Estimated { holds, .. } => *holds,
        }
    }

    pub fn status(&self) -> &'static str {
        match &self.verdict {
            LemmaVerdict::Holds => "holds",
            LemmaVerdict::Violated { .. } => "violated",
            LemmaVerdict::Estimated { holds: true, .. } => "holds (estimated)",
            LemmaVerdict::Estimated { holds: false, .. } => "violated (estimated)",
        }
    }
}

/// Largest family size (in index bits) the exhaustive hash check accepts.
const HASH_FAMILY_BITS_CAP: u32 = 12;

/// The hash-lemma case `(S, y)`: how many family members give `S ∩ h⁻¹(y)`
/// at least one element, and exactly one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HashCase {
    pub ell: u32,
    pub k: u64,
    /// `S` as a bitmask over `{0,1}^ell`.
    pub set: u32,
    pub y: u64,
    pub family_size: u64,
    pub at_least_one: u64,
    pub exactly_one: u64,
}

impl HashCase {
    /// `Pr[≥1] ≥ |S|/k − |S|²/(2k²)`, cross-multiplied.
    pub fn cover_holds(&self) -> bool {
        let (s, k, h) = self.ints();
        (self.at_least_one as i128) * 2 * k * k >= h * (2 * s * k - s * s)
    }

    /// `Pr[=1] ≥ |S|/k − |S|²/k²`, cross-multiplied.
    pub fn unique_holds(&self) -> bool {
        let (s, k, h) = self.ints();
        (self.exactly_one as i128) * k * k >= h * (s * k - s * s)
    }

    fn ints(&self) -> (i128, i128, i128) {
        (self.set.count_ones() as i128, self.k as i128, self.family_size as i128)
    }
}

fn check_hash_shape(ell: u32, k: u64) -> Result<u32> {
    if ell == 0 || ell > 3 {
        return Err(Error::DomainTooLarge { ell, cap: 3 });
    }
    if !k.is_power_of_two() || k < 2 {
        return Err(Error::InvalidK { k });
    }
    let j = k.trailing_zeros();
    if j * ell + j > HASH_FAMILY_BITS_CAP {
        return Err(Error::InvalidParameter(format!("family for ell = {ell}, k = {k} is too large")));
    }
    Ok(j)
}

fn preimage_masks(h: &HashFn, ell: u32) -> Vec<u32> {
    let mut masks = vec![0u32; h.k() as usize];
    for x in 0..1u32 << ell {
        masks[h.eval(x) as usize] |= 1 << x;
    }
    masks
}

/// Recomputes one case from scratch; used to replay counterexamples.
pub fn hash_case(ell: u32, k: u64, set: u32, y: u64) -> Result<HashCase> {
    check_hash_shape(ell, k)?;
    let (mut family_size, mut ge1, mut eq1) = (0, 0, 0);
    for h in gf2_affine_family(ell, k)? {
        family_size += 1;
        let hits = (preimage_masks(&h, ell)[y as usize] & set).count_ones();
        ge1 += u64::from(hits >= 1);
        eq1 += u64::from(hits == 1);
    }
    Ok(HashCase {
        ell,
        k,
        set,
        y,
        family_size,
        at_least_one: ge1,
        exactly_one: eq1,
    })
}

/// Both hashing bounds for every `S ⊆ {0,1}^ell` and `y ∈ [k]` over the whole
/// GF(2)-affine family, in integer arithmetic.
pub fn check_hash_lemmas(ell: u32, k: u64) -> Result<LemmaReport> {
    check_hash_shape(ell, k)?;
    let subsets = 1usize << (1u32 << ell);
    let ky = k as usize;
    let mut ge1 = vec![0u64; subsets * ky];
    let mut eq1 = vec![0u64; subsets * ky];
    let mut family_size = 0u64;
    for h in gf2_affine_family(ell, k)? {
        family_size += 1;
        for (y, &m) in preimage_masks(&h, ell).iter().enumerate() {
            for set in 0..subsets {
                let hits = (m & set as u32).count_ones();
                ge1[set * ky + y] += u64::from(hits >= 1);
                eq1[set * ky + y] += u64::from(hits == 1);
            }
        }
    }
    let mut report = LemmaReport::new("hash-bounds", json!({ "ell": ell, "k": k, "family": "gf2-affine" }));
    let mut min_cover = f64::INFINITY;
    let mut min_unique = f64::INFINITY;
    for set in 0..subsets {
        for y in 0..ky {
            let case = HashCase {
                ell,
                k,
                set: set as u32,
                y: y as u64,
                family_size,
                at_least_one: ge1[set * ky + y],
                exactly_one: eq1[set * ky + y],
            };
            if !(case.cover_holds() && case.unique_holds()) && matches!(report.verdict, LemmaVerdict::Holds) {
                report.verdict = LemmaVerdict::Violated {
                    counterexample: serde_json::to_value(case).expect("plain struct"),
                };
            }
            let s = set.count_ones() as f64;
            let kf = k as f64;
            let h = family_size as f64;
            min_cover = min_cover.min(case.at_least_one as f64 / h - (s / kf - s * s / (2.0 * kf * kf)));
            min_unique = min_unique.min(case.exactly_one as f64 / h - (s / kf - s * s / (kf * kf)));
        }
    }
    report.data.insert("cases".into(), (subsets * ky) as f64);
    report.data.insert("family_size".into(), family_size as f64);
    report.data.insert("min_slack_cover".into(), min_cover);
    report.data.insert("min_slack_unique".into(), min_unique);
    Ok(report)
}

/// `ε = num / 2^shift`, exactly.
#[derive(Debug, Clone, Copy)]
struct Dyadic {
    num: u128,
    den: u128,
}

impl Dyadic {
    fn from_f64(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon must lie in (0, 1), got {eps}")));
        }
        let bits = eps.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let mut num = (bits & ((1 << 52) - 1)) | (1 << 52);
        let mut shift = 1075 - exp;
        let tz = num.trailing_zeros().min(shift as u32);
        num >>= tz;
        shift -= tz as i64;
        if shift > 80 {
            return Err(Error::InvalidParameter(format!("epsilon {eps} is too small")));
        }
        Ok(Dyadic {
            num: num as u128,
            den: 1u128 << shift,
        })
    }

    fn one_plus(&self) -> u128 {
        self.den + self.num
    }

    fn one_minus(&self) -> u128 {
        self.den - self.num
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridChoice {
    pub j: u32,
    pub k: u64,
}

fn in_balance(size0: u64, size1: u64, e: Dyadic) -> bool {
    let (n0, n1) = (size0 as u128, size1 as u128);
    n1 * e.one_minus() < n0 * e.den && n0 * e.den < n1 * e.one_plus()
}

/// `k ≤ 2|X0| ≤ (1+ε)k`.
fn bracket0(k: u64, size0: u64, e: Dyadic) -> bool {
    let (k, two_n) = (k as u128, 2 * size0 as u128);
    k <= two_n && two_n * e.den <= e.one_plus() * k
}

/// `k/(1+ε) ≤ 2|X1| ≤ k(1+ε)/(1−ε)`.
fn bracket1(k: u64, size1: u64, e: Dyadic) -> bool {
    let (k, two_n) = (k as u128, 2 * size1 as u128);
    k * e.den <= two_n * e.one_plus() && two_n * e.one_minus() <= e.one_plus() * k
}

/// The smallest grid index whose `k` brackets both set sizes, or `None` when
/// the sizes are not within a `(1 ± ε)` ratio. Inequalities are decided
/// exactly on the binary value of `ε`.
pub fn find_j_kinji(size0: u64, size1: u64, epsilon: f64, ell: u32) -> Result<Option<GridChoice>> {
    let e = Dyadic::from_f64(epsilon)?;
    if !in_balance(size0, size1, e) {
        return Ok(None);
    }
    let m = compute_m(ell, epsilon)?;
    Ok((0..m)
        .map(|j| GridChoice { j, k: k_for_j(epsilon, j) })
        .find(|g| bracket0(g.k, size0, e) && bracket1(g.k, size1, e)))
}

/// Re-checks both bracketing inequalities for a returned choice.
pub fn kinji_holds(choice: GridChoice, size0: u64, size1: u64, epsilon: f64) -> Result<bool> {
    let e = Dyadic::from_f64(epsilon)?;
    Ok(bracket0(choice.k, size0, e) && bracket1(choice.k, size1, e))
}

/// Random size pairs within the balance ratio must all find a bracketing `k`.
pub fn check_kinji<R: Rng + ?Sized>(epsilon: f64, ell: u32, pairs: u64, rng: &mut R) -> Result<LemmaReport> {
    let e = Dyadic::from_f64(epsilon)?;
    let mut report = LemmaReport::new("grid-bracket", json!({ "epsilon": epsilon, "ell": ell, "pairs": pairs }));
    let cap = 1u64 << ell;
    let mut tested = 0u64;
    let mut draws = 0u64;
    while tested < pairs {
        draws += 1;
        if draws > pairs.saturating_mul(1000) {
            return Err(Error::InvalidParameter(format!("cannot draw balanced pairs at epsilon = {epsilon}")));
        }
        let size1 = rng.random_range(1..=cap);
        let lo = ((size1 as f64) * (1.0 - epsilon)).floor() as u64;
        let hi = (((size1 as f64) * (1.0 + epsilon)).ceil() as u64).min(cap);
        let size0 = rng.random_range(lo.max(1)..=hi.max(1));
        if !in_balance(size0, size1, e) {
            continue;
        }
        tested += 1;
        let found = find_j_kinji(size0, size1, epsilon, ell)?;
        let good = match found {
            Some(g) => kinji_holds(g, size0, size1, epsilon)?,
            None => false,
        };
        if !good {
            report.verdict = LemmaVerdict::Violated {
                counterexample: json!({ "size0": size0, "size1": size1, "epsilon": epsilon, "ell": ell }),
            };
            break;
        }
    }
    report.data.insert("pairs_tested".into(), tested as f64);
    Ok(report)
}

/// Exhaustive claw probability over GF(2)-affine pairs, as `(num, den)`.
fn sis1_exact(n: u64, ell: u32, k: u64) -> Result<(u128, u128)> {
    let family: Vec<Vec<u32>> = gf2_affine_family(ell, k)?.map(|h| preimage_masks(&h, ell)).collect();
    let x0 = (1u32 << n) - 1;
    let x1 = x0 << n;
    let mut num = 0u128;
    for m0 in &family {
        for m1 in &family {
            num += m0
                .iter()
                .zip(m1)
                .filter(|(a, b)| (*a & x0).count_ones() == 1 && (*b & x1).count_ones() == 1)
                .count() as u128;
        }
    }
    let pairs = (family.len() * family.len()) as u128;
    Ok((num, pairs * n as u128))
}

/// Largest `2 × family bits` for which the claw probability is enumerated.
const SIS1_EXACT_BITS: u32 = 20;

/// The probability that a hash outcome `y` of a uniform element of
/// `X0 ⊔ X1`, `|X0| = |X1| = n`, has exactly one preimage on each side.
///
/// Small power-of-two instances are enumerated over the GF(2)-affine family.
/// Otherwise `trials` pairs `(h0, h1)` are drawn from the protocol's family
/// and the probability over `y` is computed exactly for each.
pub fn check_sis1<R: Rng + ?Sized>(n: u64, epsilon: f64, trials: u64, rng: &mut R) -> Result<LemmaReport> {
    let mut report = LemmaReport::new("claw-probability", json!({ "n": n, "epsilon": epsilon, "trials": trials }));
    if n == 0 {
        report.verdict = LemmaVerdict::Violated {
            counterexample: json!({ "n": 0, "reason": "precondition: |X0| >= 1" }),
        };
        return Ok(report);
    }
    if n > 1 << 15 {
        return Err(Error::InvalidParameter(format!("n = {n} is too large")));
    }
    let ell = (64 - (2 * n - 1).leading_zeros()).max(1);
    let choice = find_j_kinji(n, n, epsilon, ell)?
        .ok_or_else(|| Error::InvalidParameter(format!("no grid index brackets n = {n}")))?;
    let k = choice.k;
    report.parameters.insert("ell".into(), json!(ell));
    report.parameters.insert("k".into(), json!(k));
    report.parameters.insert("j".into(), json!(choice.j));

    let j = k.trailing_zeros();
    if k.is_power_of_two() && n <= 16 && 2 * (j * ell + j) <= SIS1_EXACT_BITS {
        let (num, den) = sis1_exact(n, ell, k)?;
        let p = num as f64 / den as f64;
        report.data.insert("probability".into(), p);
        report.data.insert("exact".into(), 1.0);
        report.verdict = if 10 * num >= den {
            LemmaVerdict::Holds
        } else {
            LemmaVerdict::Violated {
                counterexample: json!({ "n": n, "k": k, "num": num.to_string(), "den": den.to_string() }),
            }
        };
        return Ok(report);
    }

    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let side0: Vec<u32> = (0..n as u32).collect();
    let side1: Vec<u32> = (n as u32..2 * n as u32).collect();
    let mut moments = Moments::default();
    let mut c0 = vec![0u32; k as usize];
    let mut c1 = vec![0u32; k as usize];
    for _ in 0..trials {
        let h0 = sample_hash(HashFamily::AffineModPrime, ell, k, rng)?;
        let h1 = sample_hash(HashFamily::AffineModPrime, ell, k, rng)?;
        c0.iter_mut().for_each(|c| *c = 0);
        c1.iter_mut().for_each(|c| *c = 0);
        for &x in &side0 {
            c0[h0.eval(x) as usize] += 1;
        }
        for &x in &side1 {
            c1[h1.eval(x) as usize] += 1;
        }
        let unique = c0.iter().zip(&c1).filter(|&(&a, &b)| a == 1 && b == 1).count();
        moments.push(unique as f64 / n as f64);
    }
    let mean = moments.mean();
    let half = Z99 * moments.std_error();
    let ci = Interval {
        lo: (mean - half).max(0.0),
        hi: (mean + half).min(1.0),
    };
    report.data.insert("probability".into(), mean);
    report.data.insert("exact".into(), 0.0);
    report.verdict = LemmaVerdict::Estimated {
        estimate: mean,
        ci,
        holds: ci.lo >= 0.1 || mean >= 0.1,
    };
    Ok(report)
}

/// Mass of balanced transcripts `(1−ε)|X1| < |X0| < (1+ε)|X1|` over honest
/// coherent commit runs. For `hm2` the unbalanced mass is also compared with
/// the measured hiding distance, which it lower-bounds after scaling by
/// `ε / (2(1+ε))`.
pub fn check_equal_s<R: Rng + ?Sized>(
    scheme: &SchemeSpec,
    trials: u64,
    epsilon: f64,
    rng: &mut R,
) -> Result<LemmaReport> {
    let e = Dyadic::from_f64(epsilon)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let mut report = LemmaReport::new(
        "size-balance",
        json!({ "scheme": scheme, "trials": trials, "epsilon": epsilon }),
    );
    let rbits = scheme.receiver_bits();
    let (mut balanced, mut above, mut below) = (0u64, 0u64, 0u64);
    for _ in 0..trials {
        let r = rng.random::<u64>() & crate::bits::mask(rbits);
        let (_, state) = run_coherent_commit(scheme, r, rng)?;
        let (n0, n1) = (state.s0.len() as u128, state.s1.len() as u128);
        if in_balance(n0 as u64, n1 as u64, e) {
            balanced += 1;
        } else if n0 * e.den >= n1 * e.one_plus() {
            above += 1;
        } else {
            below += 1;
        }
    }
    let mass = balanced as f64 / trials as f64;
    let ci = wilson(balanced, trials, Z99);
    report.data.insert("mass_balanced".into(), mass);
    report.data.insert("mass_above".into(), above as f64 / trials as f64);
    report.data.insert("mass_below".into(), below as f64 / trials as f64);
    let mut holds = true;
    if matches!(scheme, SchemeSpec::Hm2(_)) {
        let hiding = hiding_distance(scheme, trials, rng)?;
        let unbalanced = 1.0 - mass;
        let scale = epsilon / (2.0 * (1.0 + epsilon));
        let bound = scale * unbalanced;
        let bound_se = scale * (unbalanced * mass / trials as f64).sqrt();
        let slack = 3.0 * (hiding.std_error.powi(2) + bound_se.powi(2)).sqrt();
        holds = bound <= hiding.distance + slack;
        report.data.insert("hiding_distance".into(), hiding.distance);
        report.data.insert("hiding_std_error".into(), hiding.std_error);
        report.data.insert("advantage_bound".into(), bound);
    }
    report.verdict = LemmaVerdict::Estimated { estimate: mass, ci, holds };
    Ok(report)
}

/// Largest `ell` for the transcript-probability enumeration.
pub const TRANSCRIPT_PROB_ELL: u32 = 6;

/// Largest `1 + ell + receiver_bits` for the transcript-probability check.
const TRANSCRIPT_PROB_BITS: u32 = 20;

/// `Pr[t]` by enumerating every `(b, x, r)`, checked exactly against
/// `|R_t| · (|X_{0,t}| + |X_{1,t}|) / 2^{ell+1+receiver_bits}` and
/// statistically against `samples` coherent commit runs with a
/// union-bounded Bernstein tolerance per transcript.
pub fn check_transcript_prob<R: Rng + ?Sized>(scheme: &SchemeSpec, samples: u64, rng: &mut R) -> Result<LemmaReport> {
    let ell = scheme.ell();
    let rbits = scheme.receiver_bits();
    if ell > TRANSCRIPT_PROB_ELL {
        return Err(Error::DomainTooLarge {
            ell,
            cap: TRANSCRIPT_PROB_ELL,
        });
    }
    if 1 + ell + rbits > TRANSCRIPT_PROB_BITS {
        return Err(Error::DomainTooLarge {
            ell: 1 + ell + rbits,
            cap: TRANSCRIPT_PROB_BITS,
        });
    }
    let mut report = LemmaReport::new("transcript-probability", json!({ "scheme": scheme, "samples": samples }));
    let mut counts: HashMap<CommitTranscript, u64> = HashMap::new();
    for r in 0..1u64 << rbits {
        for b in 0..2u8 {
            for x in 0..1u32 << ell {
                *counts.entry(honest_transcript(scheme, b, x, r)?).or_default() += 1;
            }
        }
    }
    let mut transcripts: Vec<(&CommitTranscript, &u64)> = counts.iter().collect();
    transcripts.sort_by(|a, b| a.0.encode().cmp(&b.0.encode()));
    for (t, &count) in &transcripts {
        let rt = receiver_consistent_set(scheme, t)?.len() as u64;
        let x0 = consistent_set(scheme, t, 0)?.len() as u64;
        let x1 = consistent_set(scheme, t, 1)?.len() as u64;
        if count != rt * (x0 + x1) {
            report.verdict = LemmaVerdict::Violated {
                counterexample: json!({ "t": t, "count": count, "r_t": rt, "x0": x0, "x1": x1 }),
            };
            break;
        }
    }
    let total = 1u64 << (1 + ell + rbits);
    report.data.insert("transcripts".into(), counts.len() as f64);
    report.data.insert("executions".into(), total as f64);

    if samples > 0 && matches!(report.verdict, LemmaVerdict::Holds) {
        let mut seen: HashMap<CommitTranscript, u64> = HashMap::new();
        for _ in 0..samples {
            let r = rng.random::<u64>() & crate::bits::mask(rbits);
            let (t, _) = run_coherent_commit(scheme, r, rng)?;
            *seen.entry(t).or_default() += 1;
        }
        let log_term = (2.0 * counts.len() as f64 / 0.01).ln();
        let n = samples as f64;
        let mut worst = 0.0f64;
        for (t, &count) in &transcripts {
            let p = count as f64 / total as f64;
            let hits = seen.get(*t).copied().unwrap_or(0);
            let gap = (hits as f64 - n * p).abs();
            let allowed = (2.0 * n * p * (1.0 - p) * log_term).sqrt() + log_term / 3.0;
            worst = worst.max(gap / n);
            if gap > allowed {
                report.verdict = LemmaVerdict::Violated {
                    counterexample: json!({ "t": t, "exact": p, "hits": hits, "samples": samples }),
                };
                break;
            }
        }
        if let Some(t) = seen.keys().find(|t| !counts.contains_key(*t)) {
            report.verdict = LemmaVerdict::Violated {
                counterexample: json!({ "t": t, "reason": "sampled transcript outside the enumeration" }),
            };
        }
        report.data.insert("max_frequency_gap".into(), worst);
    }
    Ok(report)
}

/// The default battery used by the `lemmas` subcommand.
pub fn default_battery<R: Rng + ?Sized>(rng: &mut R) -> Result<Vec<LemmaReport>> {
    let mut out = Vec::new();
    for k in [2, 4, 8] {
        out.push(check_hash_lemmas(3, k)?);
    }
    for eps in [0.01, 0.5] {
        out.push(check_kinji(eps, 20, 1000, rng)?);
    }
    for shift in 0..=6 {
        out.push(check_sis1(1 << shift, 0.01, 10_000, rng)?);
    }
    for scheme in [
        SchemeSpec::from_name("hm2", 5, 2, 3)?,
        SchemeSpec::from_name("ident", 5, 0, 0)?,
        SchemeSpec::from_name("const", 5, 0, 0)?,
    ] {
        out.push(check_transcript_prob(&scheme, 20_000, rng)?);
    }
    for name in ["const", "ident"] {
        out.push(check_equal_s(&SchemeSpec::from_name(name, 8, 0, 0)?, 200, 0.5, rng)?);
    }
    Ok(out)
}
