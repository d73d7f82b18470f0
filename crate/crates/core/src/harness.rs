//! Experiment runner behind the `crp` binary.
//!
//! Each command reads a JSON config, builds or loads its input, and returns a
//! [`Report`]: a set of named output files plus an optional verification
//! failure. Writing the files and mapping errors to exit codes is left to the
//! caller.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::adversary::{
    closed_form_phi, critical_sequence, phi_curve, random_sequence, stopper, AdversaryError, CrPursuit,
    CriticalSequenceSpec, Greedy, OnlineAlgorithm, StopperReport, Threshold,
};
use crate::offline::{prefix_solve, solve, verify_kkt};
use crate::online::{
    ratio_elasticity, ratio_general, ratio_one_way, run_with_prefix, AdaptivePursuitState, RatioError,
};
use crate::revenue::{FamilyKind, InputSequence, ParamRanges, SequenceFile, SequenceFormatError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Sequence(#[from] SequenceFormatError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Ratio(#[from] RatioError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        EXIT_INPUT
    }
}

impl From<crate::revenue::RevenueError> for HarnessError {
    fn from(e: crate::revenue::RevenueError) -> Self {
        HarnessError::Sequence(e.into())
    }
}

fn config_err(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

/// Output of one command.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    /// `(file name, contents)` in write order.
    pub files: Vec<(String, String)>,
    /// Set when a verification step failed; the outputs are still written.
    pub verification_failure: Option<String>,
}

impl Report {
    pub fn file(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    pub fn exit_code(&self) -> i32 {
        if self.verification_failure.is_some() {
            EXIT_VERIFICATION
        } else {
            EXIT_OK
        }
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), HarnessError> {
        let io = |path: &Path, e: std::io::Error| HarnessError::Io { path: path.to_owned(), message: e.to_string() };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        for (name, contents) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, contents).map_err(|e| io(&path, e))?;
        }
        Ok(())
    }
}

/// `%.12g`: 12 significant digits, `.` decimal, trailing zeros trimmed.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let digits = (11 - exp) as usize;
        trim_zeros(&format!("{x:.digits$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Round to 12 significant digits so JSON numbers match the CSV text.
fn round12(x: f64) -> Value {
    if x.is_finite() {
        json!(fmt_g(x).parse::<f64>().expect("round trip"))
    } else {
        Value::Null
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json");
    s.push('\n');
    s
}

fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.into()
}

/// Parameters for a seeded random sequence.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomSource {
    pub family: String,
    pub len: usize,
    /// Draw each sequence length uniformly from `1..=len`.
    #[serde(default)]
    pub variable_len: bool,
    pub delta: f64,
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub price: (f64, f64),
    #[serde(default)]
    pub alpha: Option<(f64, f64)>,
    #[serde(default)]
    pub beta: Option<(f64, f64)>,
}

impl RandomSource {
    fn family(&self) -> Result<FamilyKind, HarnessError> {
        self.family.parse().map_err(|e: crate::revenue::RevenueError| config_err(e.to_string()))
    }

    fn ranges(&self) -> ParamRanges {
        ParamRanges {
            price: self.price,
            alpha: self.alpha.unwrap_or((0.0, 0.0)),
            beta: self.beta.unwrap_or((1.0, 1.0)),
        }
    }

    pub fn generate(&self, seed: u64) -> Result<InputSequence, HarnessError> {
        let len = if self.variable_len {
            use rand::{Rng, SeedableRng};
            rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15).gen_range(1..=self.len.max(1))
        } else {
            self.len
        };
        Ok(random_sequence(seed, len, self.family()?, &self.ranges(), self.delta, self.m, self.big_m)?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SequenceSource {
    /// Path to a sequence file, relative to the config file.
    File(PathBuf),
    Inline(SequenceFile),
    Critical {
        m: f64,
        #[serde(rename = "M")]
        big_m: f64,
        n: usize,
        delta: f64,
    },
    Random(RandomSource),
}

impl SequenceSource {
    pub fn load(&self, base_dir: &Path, seed: u64) -> Result<InputSequence, HarnessError> {
        match self {
            SequenceSource::File(p) => Ok(InputSequence::from_path(base_dir.join(p))?),
            SequenceSource::Inline(f) => Ok(f.clone().into_sequence()?),
            SequenceSource::Critical { m, big_m, n, delta } => {
                Ok(critical_sequence(&CriticalSequenceSpec { m: *m, big_m: *big_m, n: *n, delta: *delta })?)
            }
            SequenceSource::Random(r) => r.generate(seed),
        }
    }

    fn is_linear_critical(&self) -> bool {
        matches!(self, SequenceSource::Critical { .. })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OfflineConfig {
    pub sequence: SequenceSource,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum RuleSpec {
    Pi(f64),
    Name(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    Explicit(f64),
    OneWay,
    Elasticity,
    General(f64),
    Adaptive,
}

impl Rule {
    pub fn parse(spec: &RuleSpec) -> Result<Self, HarnessError> {
        match spec {
            RuleSpec::Pi(pi) => Ok(Rule::Explicit(*pi)),
            RuleSpec::Name(name) => match name.as_str() {
                "one-way" => Ok(Rule::OneWay),
                "elasticity" => Ok(Rule::Elasticity),
                "adaptive" => Ok(Rule::Adaptive),
                other => {
                    let c = other
                        .strip_prefix("general:")
                        .and_then(|c| c.parse::<f64>().ok())
                        .ok_or_else(|| config_err(format!("unknown ratio rule \"{other}\"")))?;
                    Ok(Rule::General(c))
                }
            },
        }
    }

    fn label(&self) -> String {
        match self {
            Rule::Explicit(pi) => fmt_g(*pi),
            Rule::OneWay => "one-way".into(),
            Rule::Elasticity => "elasticity".into(),
            Rule::General(c) => format!("general:{}", fmt_g(*c)),
            Rule::Adaptive => "adaptive".into(),
        }
    }

    /// `(π to pursue, proven ratio)` for inputs with price ratio `theta`.
    fn parameters(&self, theta: f64) -> Result<(f64, Option<f64>), HarnessError> {
        Ok(match *self {
            Rule::Explicit(pi) => (pi, None),
            Rule::OneWay | Rule::Adaptive => {
                let pi = ratio_one_way(theta)?;
                (pi, Some(pi))
            }
            Rule::Elasticity => {
                let pi = ratio_elasticity(theta)?;
                (pi, Some(pi))
            }
            Rule::General(c) => {
                let pi = ratio_general(theta, c)?;
                (pi, Some(pi))
            }
        })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub sequence: SequenceSource,
    pub rule: RuleSpec,
    #[serde(default = "one")]
    pub ensemble: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiConfig {
    pub sequence: SequenceSource,
    pub pi_grid: Vec<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversaryConfig {
    pub sequence: SequenceSource,
    pub baselines: Vec<String>,
    /// Ratio of the reference CR-Pursuit; defaults to `ln θ + 1`.
    #[serde(default)]
    pub pi_ref: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Where a config came from and the CLI seed override.
#[derive(Debug, Clone)]
pub struct Context {
    pub base_dir: PathBuf,
    pub seed: Option<u64>,
}

impl Context {
    pub fn new(base_dir: impl Into<PathBuf>, seed: Option<u64>) -> Self {
        Self { base_dir: base_dir.into(), seed }
    }

    fn seed(&self, config_seed: Option<u64>) -> u64 {
        self.seed.or(config_seed).unwrap_or(0)
    }
}

pub fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, HarnessError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Io { path: path.to_owned(), message: e.to_string() })?;
    serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))
}

pub fn cmd_offline(config: &OfflineConfig, ctx: &Context) -> Result<Report, HarnessError> {
    let seq = config.sequence.load(&ctx.base_dir, ctx.seed(config.seed))?;
    let sol = solve(&seq);
    let kkt = verify_kkt(&seq, &sol);
    let out = json!({
        "lambda_star": round12(sol.lambda_star),
        "allocations": sol.allocations.iter().map(|&v| round12(v)).collect::<Vec<_>>(),
        "revenue": round12(sol.revenue),
        "kkt": { "passed": kkt.passed, "violations": kkt.violations },
    });
    let verification_failure =
        (!kkt.passed).then(|| format!("KKT check failed with {} violation(s)", kkt.violations.len()));
    Ok(Report { files: vec![("offline.json".into(), pretty(&out))], verification_failure })
}

/// Outcome of one ensemble member.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberSummary {
    pub member: usize,
    pub len: usize,
    pub delta: f64,
    pub total_sold: f64,
    pub feasible: bool,
    pub eta_opt: f64,
    pub online_revenue: f64,
    pub empirical_cr: f64,
    pub final_pi: f64,
}

struct MemberRun {
    summary: MemberSummary,
    trace: String,
}

fn empirical_cr(eta: f64, revenue: f64) -> f64 {
    if revenue > 0.0 {
        eta / revenue
    } else if eta > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

const TRACE_HEADER: [&str; 8] =
    ["t", "p_t", "increment", "v_bar", "inventory_used", "online_revenue", "eta_opt", "breach_flag"];

fn run_member(member: usize, seq: &InputSequence, rule: Rule, pi: f64) -> Result<MemberRun, HarnessError> {
    let delta = seq.delta();
    if rule == Rule::Adaptive {
        if !seq.is_all_linear() {
            return Err(config_err("rule \"adaptive\" needs an all-linear sequence"));
        }
        let mut state = AdaptivePursuitState::new(delta, seq.min_price(), seq.max_price())?;
        let mut rows = Vec::with_capacity(seq.len());
        let mut best = 0.0f64;
        for (i, p) in seq.base_prices().enumerate() {
            let before = state.online_revenue();
            let step = state.step(p);
            best = best.max(p);
            let breach = state.inventory_used() > delta * (1.0 + crate::online::FEASIBILITY_TOL);
            rows.push(vec![
                (i + 1).to_string(),
                fmt_g(p),
                fmt_g(state.online_revenue() - before),
                fmt_g(step.v),
                fmt_g(state.inventory_used()),
                fmt_g(state.online_revenue()),
                fmt_g(delta * best),
                flag(breach),
                fmt_g(step.pi),
            ]);
        }
        let header: Vec<&str> = TRACE_HEADER.iter().copied().chain(["pi_t"]).collect();
        let eta = delta * best;
        let summary = MemberSummary {
            member,
            len: seq.len(),
            delta,
            total_sold: state.inventory_used(),
            feasible: state.inventory_used() <= delta * (1.0 + crate::online::FEASIBILITY_TOL),
            eta_opt: eta,
            online_revenue: state.online_revenue(),
            empirical_cr: empirical_cr(eta, state.online_revenue()),
            final_pi: state.current_pi(),
        };
        return Ok(MemberRun { summary, trace: csv(&header, rows) });
    }
    let prefix = prefix_solve(seq);
    let state = run_with_prefix(seq, &prefix, pi)?;
    let rows = state.trace().iter().map(|r| {
        vec![
            r.t.to_string(),
            fmt_g(r.base_price),
            fmt_g(r.increment),
            fmt_g(r.v_bar),
            fmt_g(r.inventory_used),
            fmt_g(r.online_revenue),
            fmt_g(r.eta_opt),
            flag(r.breach),
        ]
    });
    let trace = csv(&TRACE_HEADER, rows);
    let summary = MemberSummary {
        member,
        len: seq.len(),
        delta,
        total_sold: state.inventory_used(),
        feasible: state.feasible(),
        eta_opt: state.prev_eta(),
        online_revenue: state.online_revenue(),
        empirical_cr: state.empirical_ratio(),
        final_pi: pi,
    };
    Ok(MemberRun { summary, trace })
}

/// Seed of ensemble member `i`.
pub fn member_seed(base: u64, i: usize) -> u64 {
    base.wrapping_add(i as u64)
}

pub fn cmd_run(config: &RunConfig, ctx: &Context) -> Result<Report, HarnessError> {
    let started = Instant::now();
    let rule = Rule::parse(&config.rule)?;
    if config.ensemble == 0 {
        return Err(config_err("ensemble must be >= 1"));
    }
    if config.ensemble > 1 && !matches!(config.sequence, SequenceSource::Random(_)) {
        return Err(config_err("ensemble > 1 needs a random sequence source"));
    }
    let base = ctx.seed(config.seed);
    let members: Vec<MemberRun> = (0..config.ensemble)
        .into_par_iter()
        .map(|i| {
            let seq = config.sequence.load(&ctx.base_dir, member_seed(base, i))?;
            let (pi, _) = rule.parameters(seq.theta())?;
            run_member(i, &seq, rule, pi)
        })
        .collect::<Result<_, _>>()?;
    let first = config.sequence.load(&ctx.base_dir, member_seed(base, 0))?;
    let (pi, guarantee) = rule.parameters(first.theta())?;

    let summaries: Vec<&MemberSummary> = members.iter().map(|m| &m.summary).collect();
    let ensemble_rows = summaries.iter().map(|s| {
        vec![
            s.member.to_string(),
            s.len.to_string(),
            fmt_g(s.total_sold),
            flag(s.feasible),
            fmt_g(s.eta_opt),
            fmt_g(s.online_revenue),
            fmt_g(s.empirical_cr),
            fmt_g(s.final_pi),
        ]
    });
    let ensemble_csv = csv(
        &["member", "len", "total_sold", "feasible", "eta_opt", "online_revenue", "empirical_cr", "final_pi"],
        ensemble_rows,
    );
    let feasible = summaries.iter().all(|s| s.feasible);
    let max_sold = summaries.iter().map(|s| s.total_sold / s.delta).fold(0.0, f64::max);
    let cr_max = summaries.iter().map(|s| s.empirical_cr).fold(f64::NEG_INFINITY, f64::max);
    let cr_min = summaries.iter().map(|s| s.empirical_cr).fold(f64::INFINITY, f64::min);
    let mut summary = json!({
        "rule": rule.label(),
        "pi": round12(pi),
        "guarantee": guarantee.map(round12),
        "members": config.ensemble,
        "feasible": feasible,
        "max_total_sold_over_delta": round12(max_sold),
        "empirical_cr_min": round12(cr_min),
        "empirical_cr_max": round12(cr_max),
        "runtime_seconds": round12(started.elapsed().as_secs_f64()),
    });
    if let [only] = summaries.as_slice() {
        let obj = summary.as_object_mut().expect("object");
        obj.insert("empirical_cr".into(), round12(only.empirical_cr));
        obj.insert("total_sold".into(), round12(only.total_sold));
        obj.insert("delta".into(), round12(only.delta));
        obj.insert("eta_opt".into(), round12(only.eta_opt));
        obj.insert("online_revenue".into(), round12(only.online_revenue));
        obj.insert("final_pi".into(), round12(only.final_pi));
    }
    let mut files = vec![("summary.json".into(), pretty(&summary)), ("ensemble.csv".into(), ensemble_csv)];
    if let [only] = members.as_slice() {
        files.push(("trace.csv".into(), only.trace.clone()));
    }
    Ok(Report { files, verification_failure: None })
}

pub fn cmd_phi(config: &PhiConfig, ctx: &Context) -> Result<Report, HarnessError> {
    if config.pi_grid.is_empty() {
        return Err(AdversaryError::EmptyGrid.into());
    }
    let seq = config.sequence.load(&ctx.base_dir, ctx.seed(config.seed))?;
    let closed = config.sequence.is_linear_critical();
    let curve = phi_curve(&config.pi_grid, |_| Ok(seq.clone()))?;
    let rows = curve.iter().map(|&(pi, phi)| {
        let cf = if closed { fmt_g(closed_form_phi(pi, seq.delta(), seq.theta())) } else { String::new() };
        vec![fmt_g(pi), fmt_g(phi), cf]
    });
    Ok(Report { files: vec![("phi.csv".into(), csv(&["pi", "phi", "closed_form"], rows))], verification_failure: None })
}

/// Builds a baseline from `greedy`, `threshold:p̂` or `cr-pursuit:π`.
pub fn parse_baseline(name: &str) -> Result<Box<dyn OnlineAlgorithm + Send>, HarnessError> {
    let number = |s: &str| {
        s.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| config_err(format!("bad number in baseline \"{name}\"")))
    };
    if name == "greedy" {
        return Ok(Box::new(Greedy::default()));
    }
    if let Some(p) = name.strip_prefix("threshold:") {
        return Ok(Box::new(Threshold::new(number(p)?)));
    }
    if let Some(pi) = name.strip_prefix("cr-pursuit:") {
        let pi = number(pi)?;
        if pi < 1.0 {
            return Err(RatioError::Pi(pi).into());
        }
        return Ok(Box::new(CrPursuit::new(pi)));
    }
    Err(config_err(format!("unknown baseline \"{name}\"")))
}

pub fn cmd_adversary(config: &AdversaryConfig, ctx: &Context) -> Result<Report, HarnessError> {
    if config.baselines.is_empty() {
        return Err(config_err("no baselines given"));
    }
    let mut algs = config.baselines.iter().map(|b| parse_baseline(b)).collect::<Result<Vec<_>, _>>()?;
    let seq = config.sequence.load(&ctx.base_dir, ctx.seed(config.seed))?;
    let pi_ref = match config.pi_ref {
        Some(pi) => pi,
        None => ratio_one_way(seq.theta())?,
    };
    let reports: Vec<StopperReport> =
        algs.par_iter_mut().map(|alg| stopper(alg.as_mut(), &seq, pi_ref)).collect::<Result<_, _>>()?;
    let rows =
        config.baselines.iter().zip(&reports).map(|(name, r)| {
            vec![name.clone(), r.tau.to_string(), fmt_g(r.alg_revenue), fmt_g(r.eta_opt), fmt_g(r.ratio)]
        });
    let table = csv(&["algorithm", "tau", "alg_revenue", "eta_opt", "ratio"], rows);
    let entries: Vec<Value> = config
        .baselines
        .iter()
        .zip(&reports)
        .map(|(name, r)| {
            json!({
                "algorithm": name,
                "tau": r.tau,
                "alg_revenue": round12(r.alg_revenue),
                "eta_opt": round12(r.eta_opt),
                "ratio": round12(r.ratio),
                "ratio_is_infinite": r.ratio.is_infinite(),
                "stopped": r.stopped,
                "budget_violated": r.budget_violated,
            })
        })
        .collect();
    let summary = json!({
        "pi_ref": round12(pi_ref),
        "guarantee": round12(ratio_one_way(seq.theta())?),
        "reports": entries,
    });
    let bad: Vec<&str> =
        config.baselines.iter().zip(&reports).filter(|(_, r)| r.budget_violated).map(|(n, _)| n.as_str()).collect();
    let verification_failure = (!bad.is_empty()).then(|| format!("inventory budget violated by {}", bad.join(", ")));
    Ok(Report {
        files: vec![("adversary.csv".into(), table), ("adversary.json".into(), pretty(&summary))],
        verification_failure,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Offline,
    Run,
    Phi,
    Adversary,
}

/// Load `config_path`, run `command` and write its outputs to `out_dir`.
pub fn execute(
    command: Command,
    config_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<Report, HarnessError> {
    let base = config_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let ctx = Context::new(base, seed);
    let report = match command {
        Command::Offline => cmd_offline(&read_config(config_path)?, &ctx)?,
        Command::Run => cmd_run(&read_config(config_path)?, &ctx)?,
        Command::Phi => cmd_phi(&read_config(config_path)?, &ctx)?,
        Command::Adversary => cmd_adversary(&read_config(config_path)?, &ctx)?,
    };
    report.write_to(out_dir)?;
    Ok(report)
}

/// One-line description of a report for the terminal.
pub fn describe(report: &Report) -> String {
    let mut s = String::new();
    for (name, _) in &report.files {
        let _ = writeln!(s, "wrote {name}");
    }
    if let Some(f) = &report.verification_failure {
        let _ = writeln!(s, "verification failed: {f}");
    }
    s
}
