//! Command-line experiment runner.
//!
//! Every subcommand resolves flags, an optional `key = value` file and
//! built-in defaults into one [`RunConfig`], runs, and prints a report that
//! embeds the resolved configuration. Output depends only on the config.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::adversaries::{goldreich_levin, reduction_b, GlParams, PredictionOracle, ProverKind};
use crate::amplification::{
    bernoulli_separation, hoeffding_tail, pass_rate, strong_soundness_profile, ProtocolSource, RepetitionPlan,
};
use crate::bits::{dot, mask};
use crate::coherent::{unique_claw_acceptance, HonestProver};
use crate::commitment::SchemeSpec;
use crate::error::{Error, Result};
use crate::lemmas::default_battery;
use crate::stats::{session_rng, wilson, Z99};
use crate::verifier::{estimate_acceptance, run_session, v2_decide, AcceptanceEstimate, GridMode, ProtocolParams};

#[derive(Debug, Parser)]
#[command(name = "ivpoq", version, about = "Exact-distribution simulator for an inefficient-verifier proof of quantumness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Run,
    Completeness,
    Soundness,
    Lemmas,
    Reduce,
    Amplify,
    Gl,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One end-to-end session, both phases.
    Run(Flags),
    /// Acceptance of the honest prover.
    Completeness(Flags),
    /// Acceptance of a cheating prover, with its per-randomness profile.
    Soundness(Flags),
    /// The lemma battery; exits 2 on any violation.
    Lemmas(Flags),
    /// Double-opening extraction from a cheating prover.
    Reduce(Flags),
    /// Sequential repetition pass rates.
    Amplify(Flags),
    /// List decoding against a planted noisy oracle.
    Gl(Flags),
}

impl Command {
    fn split(&self) -> (CommandKind, &Flags) {
        match self {
            Command::Run(f) => (CommandKind::Run, f),
            Command::Completeness(f) => (CommandKind::Completeness, f),
            Command::Soundness(f) => (CommandKind::Soundness, f),
            Command::Lemmas(f) => (CommandKind::Lemmas, f),
            Command::Reduce(f) => (CommandKind::Reduce, f),
            Command::Amplify(f) => (CommandKind::Amplify, f),
            Command::Gl(f) => (CommandKind::Gl, f),
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
pub struct Flags {
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// hm2, ident or const.
    #[arg(long)]
    pub scheme: Option<String>,
    #[arg(long)]
    pub ell: Option<u32>,
    /// hm2 compression slack.
    #[arg(long)]
    pub a: Option<u32>,
    /// hm2 key length.
    #[arg(long)]
    pub key_bits: Option<u32>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// uniform or oracle.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub trials: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long = "c")]
    pub c: Option<f64>,
    #[arg(long = "s")]
    pub s: Option<f64>,
    /// Repetition count override.
    #[arg(long = "n")]
    pub n: Option<u64>,
    #[arg(long)]
    pub prover: Option<String>,
    /// Fixed randomness values in the soundness profile.
    #[arg(long)]
    pub r_count: Option<u64>,
    /// Profile margin above `s`.
    #[arg(long)]
    pub slack: Option<f64>,
    #[arg(long)]
    pub advantage: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// bernoulli or protocol.
    #[arg(long)]
    pub source: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// json or csv.
    #[arg(long)]
    pub format: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub scheme: String,
    pub ell: u32,
    pub a: u32,
    pub key_bits: u32,
    pub epsilon: f64,
    pub grid: GridMode,
    pub trials: u64,
    pub seed: u64,
    pub lambda: f64,
    pub c: f64,
    pub s: f64,
    #[serde(rename = "N")]
    pub n: Option<u64>,
    pub prover: ProverKind,
    pub r_count: u64,
    pub slack: f64,
    pub advantage: f64,
    pub delta: f64,
    pub source: String,
    pub format: Format,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub workers: Option<usize>,
}

const FILE_KEYS: [&str; 21] = [
    "scheme", "ell", "a", "key_bits", "epsilon", "grid", "trials", "seed", "lambda", "c", "s", "n", "prover", "r_count",
    "slack", "advantage", "delta", "source", "out", "format", "workers",
];

fn usage(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn read_config(path: &PathBuf) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("{}:{}: expected key = value", path.display(), no + 1)))?;
        let key = key.trim().replace('-', "_");
        if !FILE_KEYS.contains(&key.as_str()) {
            return Err(usage(format!("{}:{}: unknown key {key:?}", path.display(), no + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

struct Layers<'a> {
    file: &'a BTreeMap<String, String>,
}

impl Layers<'_> {
    fn get<T: std::str::FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.opt(flag, key)?.unwrap_or(default))
    }

    fn opt<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            Some(v) => v.parse().map(Some).map_err(|e| usage(format!("config {key} = {v:?}: {e}"))),
            None => Ok(None),
        }
    }
}

impl RunConfig {
    pub fn resolve(command: CommandKind, flags: &Flags) -> Result<Self> {
        let file = match &flags.config {
            Some(p) => read_config(p)?,
            None => BTreeMap::new(),
        };
        let l = Layers { file: &file };
        let ell = l.get(flags.ell, "ell", 12)?;
        let trials_default = match command {
            CommandKind::Run => 1,
            CommandKind::Completeness | CommandKind::Soundness => 10_000,
            CommandKind::Lemmas => 0,
            CommandKind::Reduce | CommandKind::Amplify => 200,
            CommandKind::Gl => 100,
        };
        let prover_default = match command {
            CommandKind::Soundness | CommandKind::Amplify => ProverKind::ClassicalHonest,
            CommandKind::Reduce => ProverKind::UnboundedClaw,
            _ => ProverKind::Honest,
        };
        let grid: String = l.get(flags.grid.clone(), "grid", "uniform".into())?;
        let format: String = l.get(flags.format.clone(), "format", "json".into())?;
        let prover: String = l.get(flags.prover.clone(), "prover", prover_default.name().into())?;
        let cfg = RunConfig {
            command,
            scheme: l.get(flags.scheme.clone(), "scheme", "hm2".into())?,
            ell,
            a: l.get(flags.a, "a", (ell / 2).max(1))?,
            key_bits: l.get(flags.key_bits, "key_bits", 8)?,
            epsilon: l.get(flags.epsilon, "epsilon", 0.01)?,
            grid: grid.parse()?,
            trials: l.get(flags.trials, "trials", trials_default)?,
            seed: l.get(flags.seed, "seed", 0)?,
            lambda: l.get(flags.lambda, "lambda", 40.0)?,
            c: l.get(flags.c, "c", 0.93)?,
            s: l.get(flags.s, "s", 0.875)?,
            n: l.opt(flags.n, "n")?,
            prover: prover.parse()?,
            r_count: l.get(flags.r_count, "r_count", 8)?,
            slack: l.get(flags.slack, "slack", 0.05)?,
            advantage: l.get(flags.advantage, "advantage", 0.25)?,
            delta: l.get(flags.delta, "delta", 0.05)?,
            source: l.get(flags.source.clone(), "source", "bernoulli".into())?,
            format: match format.as_str() {
                "json" => Format::Json,
                "csv" => Format::Csv,
                other => return Err(usage(format!("unknown format {other:?}"))),
            },
            out: l.opt(flags.out.clone(), "out")?,
            workers: l.opt(flags.workers, "workers")?,
        };
        if cfg.workers == Some(0) {
            return Err(usage("workers must be at least 1"));
        }
        if !["bernoulli", "protocol"].contains(&cfg.source.as_str()) {
            return Err(usage(format!("unknown source {:?}", cfg.source)));
        }
        Ok(cfg)
    }

    pub fn scheme_spec(&self) -> Result<SchemeSpec> {
        let a = if self.scheme == "hm2" { self.a.min(self.ell.saturating_sub(1)).max(1) } else { 0 };
        if self.scheme == "hm2" && a != self.a {
            return Err(usage(format!("hm2 needs 1 <= a < ell, got a = {}, ell = {}", self.a, self.ell)));
        }
        SchemeSpec::from_name(&self.scheme, self.ell, a, self.key_bits)
    }

    pub fn params(&self) -> Result<ProtocolParams> {
        ProtocolParams::new(self.scheme_spec()?, self.epsilon, self.grid)?.with_targets(self.lambda, self.c, self.s)
    }
}

/// A finished report and whether it records a violation.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub text: String,
    pub violated: bool,
}

struct Report {
    result: Value,
    csv: Option<String>,
    violated: bool,
}

impl Report {
    fn json(result: Value) -> Self {
        Report {
            result,
            csv: None,
            violated: false,
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialise")
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let join = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(map) => map.iter().for_each(|(k, v)| flatten(&join(k), v, out)),
        Value::Array(items) => items.iter().enumerate().for_each(|(i, v)| flatten(&join(&i.to_string()), v, out)),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn render(cfg: &RunConfig, report: Report) -> String {
    match cfg.format {
        Format::Json => {
            let doc = json!({ "config": to_value(cfg), "result": report.result });
            let mut text = serde_json::to_string_pretty(&doc).expect("json");
            text.push('\n');
            text
        }
        Format::Csv => {
            if let Some(csv) = report.csv {
                return csv;
            }
            let mut rows = Vec::new();
            flatten("config", &to_value(cfg), &mut rows);
            flatten("result", &report.result, &mut rows);
            let mut text = String::from("key,value\n");
            for (k, v) in rows {
                text.push_str(&format!("{},{}\n", csv_field(&k), csv_field(&v)));
            }
            text
        }
    }
}

fn estimate_csv(est: &AcceptanceEstimate) -> String {
    format!("{}\n{}\n", AcceptanceEstimate::CSV_HEADER, est.csv_row())
}

fn cmd_run(cfg: &RunConfig) -> Result<Report> {
    let params = cfg.params()?;
    let mut rng = session_rng(cfg.seed, 0);
    let mut prover = cfg.prover.build(&params.scheme, &mut rng)?;
    Ok(Report::json(match run_session(&params, &mut prover, &mut rng) {
        Ok(mut rec) => {
            let verdict = v2_decide(&params, &rec)?;
            rec.verdict = Some(verdict);
            json!({ "record": rec, "accept": verdict.accept })
        }
        Err(e @ (Error::ProverAbort | Error::ProverViolation(_) | Error::ProverNondeterminism)) => {
            json!({ "record": null, "accept": false, "failure": e.to_string() })
        }
        Err(e) => return Err(e),
    }))
}

fn identity_check(est: &AcceptanceEstimate, q: f64) -> Value {
    let (residual, se) = est.tally.total_probability_residual(q);
    json!({
        "q": q,
        "predicted": 0.875 + est.p_good * (q - 0.875),
        "residual": residual,
        "std_error": se,
        "within_3_sigma": residual.abs() <= 3.0 * se,
    })
}

fn cmd_completeness(cfg: &RunConfig) -> Result<Report> {
    let params = cfg.params()?;
    let est = estimate_acceptance(&params, |_| HonestProver::new(), cfg.trials, cfg.seed)?;
    let mut report = Report::json(json!({
        "prover": ProverKind::Honest,
        "estimate": est,
        "identity": identity_check(&est, unique_claw_acceptance()),
    }));
    report.csv = Some(estimate_csv(&est));
    Ok(report)
}

fn cmd_soundness(cfg: &RunConfig) -> Result<Report> {
    let params = cfg.params()?;
    let kind = cfg.prover;
    kind.replayable(&params.scheme, 0)?;
    let est = estimate_acceptance(
        &params,
        |rng| kind.build(&params.scheme, rng).expect("validated prover"),
        cfg.trials,
        cfg.seed,
    )?;
    let profile = if kind == ProverKind::Honest || cfg.r_count == 0 {
        Value::Null
    } else {
        let per_r = (cfg.trials / cfg.r_count).max(1);
        to_value(&strong_soundness_profile(&params, kind, cfg.r_count, per_r, cfg.slack, cfg.seed)?)
    };
    let mut report = Report::json(json!({ "prover": kind, "estimate": est, "profile": profile }));
    report.csv = Some(estimate_csv(&est));
    Ok(report)
}

fn cmd_lemmas(cfg: &RunConfig) -> Result<Report> {
    let reports = default_battery(&mut session_rng(cfg.seed, 0))?;
    let table: Vec<Value> = reports
        .iter()
        .map(|r| json!({ "lemma": r.lemma, "parameters": r.parameters, "status": r.status() }))
        .collect();
    let all_hold = reports.iter().all(|r| r.ok());
    Ok(Report {
        result: json!({ "all_hold": all_hold, "table": table, "reports": reports }),
        csv: None,
        violated: !all_hold,
    })
}

fn cmd_reduce(cfg: &RunConfig) -> Result<Report> {
    let params = cfg.params()?;
    let gl = GlParams {
        advantage: cfg.advantage,
        delta: cfg.delta,
    };
    gl.validate()?;
    if cfg.prover == ProverKind::Honest {
        return Err(usage("the reduction needs a replayable prover"));
    }
    cfg.prover.replayable(&params.scheme, 0)?;
    let outcomes = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = session_rng(cfg.seed, i);
            let prover = cfg.prover.replayable(&params.scheme, rng.random())?.expect("replayable");
            reduction_b(&params, &prover, gl, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    let successes = outcomes.iter().filter(|o| o.success).count() as u64;
    let unique = outcomes.iter().filter(|o| o.claw.is_some()).count() as u64;
    let queries: u64 = outcomes.iter().map(|o| o.gl_queries).sum();
    let trials = cfg.trials.max(1);
    Ok(Report::json(json!({
        "scheme": cfg.scheme,
        "ell": cfg.ell,
        "prover": cfg.prover,
        "trials": cfg.trials,
        "successes": successes,
        "success_rate": successes as f64 / trials as f64,
        "ci": wilson(successes, cfg.trials, Z99),
        "unique_claw_runs": unique,
        "mean_gl_queries": queries as f64 / trials as f64,
        "seed": cfg.seed,
    })))
}

fn cmd_amplify(cfg: &RunConfig) -> Result<Report> {
    let plan = match cfg.n {
        Some(n) => RepetitionPlan::with_n(n, cfg.c, cfg.s, cfg.lambda)?,
        None => RepetitionPlan::new(cfg.c, cfg.s, cfg.lambda)?,
    };
    if cfg.source == "bernoulli" {
        return Ok(Report::json(to_value(&bernoulli_separation(&plan, cfg.trials, cfg.seed)?)));
    }
    let params = cfg.params()?;
    if cfg.prover == ProverKind::Honest {
        return Err(usage("amplify --source protocol compares the honest prover with a cheating --prover"));
    }
    cfg.prover.replayable(&params.scheme, 0)?;
    let honest = |kind| {
        let params = params.clone();
        move || ProtocolSource {
            params: params.clone(),
            kind,
        }
    };
    let good = pass_rate(&plan, honest(ProverKind::Honest), cfg.trials, cfg.seed)?;
    let bad = pass_rate(&plan, honest(cfg.prover), cfg.trials, cfg.seed.wrapping_add(1))?;
    Ok(Report::json(json!({
        "N": plan.n,
        "c": plan.c,
        "s": plan.s,
        "lambda": plan.lambda,
        "threshold": plan.threshold(),
        "hoeffding_bound": hoeffding_tail(plan.n, (plan.c - plan.s) / 2.0)?,
        "pass_rate_honest": good,
        "pass_rate_cheater": bad,
        "cheater": cfg.prover,
        "seeds": [cfg.seed, cfg.seed.wrapping_add(1)],
    })))
}

/// Largest `ell` for the planted-oracle experiment.
const GL_MAX_ELL: u32 = 20;

/// A table whose entries agree with `⟨ξ, s⟩` on exactly
/// `⌈(1/2 + advantage) · 2^ell⌉` points.
fn planted_table(ell: u32, s: u32, advantage: f64, rng: &mut impl Rng) -> Vec<u8> {
    let size = 1usize << ell;
    let correct = ((0.5 + advantage) * size as f64).ceil() as usize;
    let mut agree: Vec<bool> = (0..size).map(|i| i < correct.min(size)).collect();
    agree.shuffle(rng);
    (0..size as u32).map(|xi| dot(xi, s) ^ u8::from(!agree[xi as usize])).collect()
}

fn cmd_gl(cfg: &RunConfig) -> Result<Report> {
    if cfg.ell == 0 || cfg.ell > GL_MAX_ELL {
        return Err(Error::DomainTooLarge {
            ell: cfg.ell,
            cap: GL_MAX_ELL,
        });
    }
    let gl = GlParams {
        advantage: cfg.advantage,
        delta: cfg.delta,
    };
    gl.validate()?;
    let ell = cfg.ell;
    let runs = (0..cfg.trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = session_rng(cfg.seed, i);
            let s = (rng.random::<u64>() & mask(ell)) as u32;
            let table = planted_table(ell, s, cfg.advantage, &mut rng);
            let mut oracle = PredictionOracle::new(ell, |xi| Ok(table[xi as usize]));
            let out = goldreich_levin(&mut oracle, gl, &mut rng)?;
            Ok((out.candidates.contains(&s), out.candidates == [s], out.candidates.len(), out.queries))
        })
        .collect::<Result<Vec<_>>>()?;
    let recovered = runs.iter().filter(|r| r.0).count() as u64;
    let exact = runs.iter().filter(|r| r.1).count() as u64;
    let trials = cfg.trials.max(1) as f64;
    Ok(Report::json(json!({
        "ell": ell,
        "advantage": cfg.advantage,
        "delta": cfg.delta,
        "trials": cfg.trials,
        "recovered": recovered,
        "recovery_rate": recovered as f64 / trials,
        "ci": wilson(recovered, cfg.trials, Z99),
        "exact_recoveries": exact,
        "mean_list_size": runs.iter().map(|r| r.2).sum::<usize>() as f64 / trials,
        "mean_queries": runs.iter().map(|r| r.3).sum::<u64>() as f64 / trials,
        "seed": cfg.seed,
    })))
}

/// Runs a resolved configuration and renders its report.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let work = || match cfg.command {
        CommandKind::Run => cmd_run(cfg),
        CommandKind::Completeness => cmd_completeness(cfg),
        CommandKind::Soundness => cmd_soundness(cfg),
        CommandKind::Lemmas => cmd_lemmas(cfg),
        CommandKind::Reduce => cmd_reduce(cfg),
        CommandKind::Amplify => cmd_amplify(cfg),
        CommandKind::Gl => cmd_gl(cfg),
    };
    let report = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Io(e.to_string()))?
            .install(work)?,
        None => work()?,
    };
    let violated = report.violated;
    Ok(Outcome {
        text: render(cfg, report),
        violated,
    })
}

/// Parses `args`, runs, writes the report, and returns the exit code:
/// 0 on success, 1 on usage or runtime errors, 2 on a recorded violation.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let (kind, flags) = cli.command.split();
    let result = RunConfig::resolve(kind, flags).and_then(|cfg| {
        let outcome = execute(&cfg)?;
        match &cfg.out {
            Some(path) => fs::write(path, &outcome.text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?,
            None => print!("{}", outcome.text),
        }
        Ok(outcome)
    });
    match result {
        Ok(o) if o.violated => 2,
        Ok(_) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
