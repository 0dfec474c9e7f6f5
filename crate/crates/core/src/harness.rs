//! Replicated experiments: run policies against an environment, track
//! regret against the true parameter, aggregate and persist.
//!
//! Streams for replication `r` are `(master_seed, "", r, contexts|noise)`
//! for the environment side and `(master_seed, policy_name, r, policy)` for
//! the policy, so every policy in a replication sees the same contexts and
//! noise, and no result depends on the worker count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::diagnostics::{self, CompatError};
use crate::environment::{
    draw_reward, optimal_arm, ContextSource, EnvError, Environment, EnvironmentSpec, EnvironmentKind,
};
use crate::lasso::l1_norm;
use crate::policies::{
    EstcConfig, FsLassoConfig, FsWLassoConfig, ForcedSchedule, GreedyLassoConfig, LambdaSchedule, PolicyError,
    PolicyKind, SolverSettings,
};
use crate::streams;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Environment(#[from] EnvError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Compatibility(#[from] CompatError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("override `{0}`: {1}")]
    Override(String, String),
    #[error("nothing to write: no traces")]
    EmptyTraces,
    #[error("{policy} replication {rep} round {t}: {detail}")]
    InvariantViolated { policy: String, rep: usize, t: usize, detail: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: PolicyKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub n_mc: usize,
    pub probes: usize,
    pub h_grid: Vec<f64>,
    pub concentration_n: usize,
    pub concentration_reps: usize,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            n_mc: 20_000,
            probes: 20,
            h_grid: vec![0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
            concentration_n: 2000,
            concentration_reps: 50,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSpec,
    pub policies: Vec<PolicySpec>,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub replications: usize,
    pub master_seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub record_debug: bool,
    /// Worker threads; `None` uses every core.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
}

impl ExperimentConfig {
    /// Validated copy with theory-mode policy parameters made explicit.
    pub fn resolve(&self) -> Result<Self, HarnessError> {
        if self.horizon == 0 || self.replications == 0 {
            return Err(HarnessError::InvalidConfig("T and replications must be at least 1".into()));
        }
        if self.policies.is_empty() {
            return Err(HarnessError::InvalidConfig("no policies".into()));
        }
        for (i, p) in self.policies.iter().enumerate() {
            if p.name.is_empty() {
                return Err(HarnessError::InvalidConfig("empty policy name".into()));
            }
            if self.policies[..i].iter().any(|q| q.name == p.name) {
                return Err(HarnessError::InvalidConfig(format!("duplicate policy name `{}`", p.name)));
            }
        }
        if self.threads == Some(0) {
            return Err(HarnessError::InvalidConfig("threads must be at least 1".into()));
        }
        self.environment.validate()?;
        let mut out = self.clone();
        for p in &mut out.policies {
            p.kind = p.kind.resolve(self.environment.d)?;
        }
        Ok(out)
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|source| HarnessError::Parse { path: origin.to_path_buf(), source })
    }
}

/// Reads a JSON config and applies `key=value` overrides.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, HarnessError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let config = ExperimentConfig::from_json(&text, path)?;
    with_overrides(&config, overrides)
}

/// Applies dotted-path overrides such as `environment.d=30`,
/// `policies.0.params.m0=20` or `policies.fs-wlasso.params.w=2`.
/// Values are parsed as JSON, falling back to a plain string.
pub fn with_overrides(config: &ExperimentConfig, overrides: &[String]) -> Result<ExperimentConfig, HarnessError> {
    if overrides.is_empty() {
        return Ok(config.clone());
    }
    let mut value = serde_json::to_value(config).expect("config serializes");
    for ov in overrides {
        apply_override(&mut value, ov)?;
    }
    serde_json::from_value(value).map_err(|e| HarnessError::Override(overrides.join(" "), e.to_string()))
}

pub fn apply_override(root: &mut Value, assignment: &str) -> Result<(), HarnessError> {
    let fail = |msg: String| HarnessError::Override(assignment.to_string(), msg);
    let (key, raw) = assignment.split_once('=').ok_or_else(|| fail("expected key=value".into()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(fail("empty key".into()));
    }
    let mut node = root;
    for seg in key.split('.') {
        node = match node {
            Value::Object(map) => map.get_mut(seg).ok_or_else(|| fail(format!("unknown key `{seg}`")))?,
            Value::Array(items) => {
                let idx = match seg.parse::<usize>() {
                    Ok(i) if i < items.len() => i,
                    _ => items
                        .iter()
                        .position(|it| it.get("name").and_then(Value::as_str) == Some(seg))
                        .ok_or_else(|| fail(format!("no element `{seg}`")))?,
                };
                &mut items[idx]
            }
            _ => return Err(fail(format!("`{seg}` indexes into a scalar"))),
        };
    }
    *node = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretTrace {
    pub policy: String,
    pub replication: usize,
    pub inst_regret: Vec<f64>,
    pub cum_regret: Vec<f64>,
    pub arms: Vec<usize>,
    /// `||beta* - beta_used||_1` per round when recording debug output;
    /// `None` in rounds decided at random.
    pub estimation_error: Option<Vec<Option<f64>>>,
    pub solver_failures: usize,
    /// Largest realized `||x||_inf` over the run.
    pub x_max: f64,
}

impl RegretTrace {
    pub fn final_regret(&self) -> f64 {
        *self.cum_regret.last().expect("T >= 1")
    }
}

pub fn build_environment(config: &ExperimentConfig, rep: usize) -> Result<Environment, HarnessError> {
    let spec = &config.environment;
    let mut rng = match spec.seed {
        Some(seed) => streams::stream(seed, "", 0, streams::ENVIRONMENT),
        None => streams::stream(config.master_seed, "", rep as u64, streams::ENVIRONMENT),
    };
    Ok(Environment::build(spec, &mut rng)?)
}

/// One policy for `T` rounds in replication `rep`; `config` must be resolved.
pub fn run_replication(
    config: &ExperimentConfig,
    policy_spec: &PolicySpec,
    rep: usize,
) -> Result<RegretTrace, HarnessError> {
    let env = build_environment(config, rep)?;
    let param = env.param();
    let seed = config.master_seed;
    let mut contexts_rng = streams::stream(seed, "", rep as u64, streams::CONTEXTS);
    let mut noise_rng = streams::stream(seed, "", rep as u64, streams::NOISE);
    let policy_rng = streams::stream(seed, &policy_spec.name, rep as u64, streams::POLICY);
    let mut policy = policy_spec.kind.build(env.spec().d, param, policy_rng)?;

    let horizon = config.horizon;
    let b = l1_norm(param.beta_star());
    let mut inst = Vec::with_capacity(horizon);
    let mut cum = Vec::with_capacity(horizon);
    let mut arms = Vec::with_capacity(horizon);
    let mut errors = config.record_debug.then(|| Vec::with_capacity(horizon));
    let mut x_max: f64 = 0.0;
    let mut total = 0.0;
    for t in 1..=horizon {
        let contexts = env.sample_contexts(&mut contexts_rng, t);
        let arm = policy.select(&contexts);
        let (best, _) = optimal_arm(&contexts, param);
        let x = contexts.arm(arm);
        let regret =
            (param.expected_reward(contexts.arm(best)) - param.expected_reward(x)).max(0.0);
        x_max = x_max.max(contexts.x_max());

        if let Some(errs) = errors.as_mut() {
            let slack = 1e-9 * (1.0 + contexts.x_max() * b);
            let violated = |detail: String| HarnessError::InvariantViolated {
                policy: policy_spec.name.clone(),
                rep,
                t,
                detail,
            };
            if regret > 2.0 * contexts.x_max() * b + slack {
                return Err(violated(format!("regret {regret} exceeds 2 x_max b")));
            }
            let err = policy.estimate_used().map(|est| {
                est.iter().zip(param.beta_star()).map(|(a, s)| (a - s).abs()).sum::<f64>()
            });
            if let Some(e) = err {
                if regret > 2.0 * contexts.x_max() * e + slack {
                    return Err(violated(format!("greedy regret {regret} exceeds 2 x_max ||beta* - beta||_1")));
                }
            }
            errs.push(err);
        }

        let reward = draw_reward(&mut noise_rng, x, param, env.noise_sigma());
        policy.observe(arm, x, reward);
        total += regret;
        inst.push(regret);
        cum.push(total);
        arms.push(arm);
    }
    Ok(RegretTrace {
        policy: policy_spec.name.clone(),
        replication: rep,
        inst_regret: inst,
        cum_regret: cum,
        arms,
        estimation_error: errors,
        solver_failures: policy.solver_failures(),
        x_max,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicySummary {
    pub policy: String,
    pub mean_cum: Vec<f64>,
    /// Sample standard deviation (0 with a single replication).
    pub std_cum: Vec<f64>,
}

impl PolicySummary {
    pub fn final_mean(&self) -> f64 {
        *self.mean_cum.last().expect("T >= 1")
    }
}

/// Per-policy mean and sample std of cumulative regret, in first-seen policy order.
pub fn summarize(traces: &[RegretTrace]) -> Vec<PolicySummary> {
    let mut names: Vec<&str> = Vec::new();
    for tr in traces {
        if !names.contains(&tr.policy.as_str()) {
            names.push(&tr.policy);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let group: Vec<&RegretTrace> = traces.iter().filter(|t| t.policy == name).collect();
            let horizon = group[0].cum_regret.len();
            let n = group.len() as f64;
            let mut mean_cum = vec![0.0; horizon];
            let mut std_cum = vec![0.0; horizon];
            for t in 0..horizon {
                let mean = group.iter().map(|g| g.cum_regret[t]).sum::<f64>() / n;
                mean_cum[t] = mean;
                if group.len() > 1 {
                    let ss = group.iter().map(|g| (g.cum_regret[t] - mean).powi(2)).sum::<f64>();
                    std_cum[t] = (ss / (n - 1.0)).sqrt();
                }
            }
            PolicySummary { policy: name.to_string(), mean_cum, std_cum }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    /// The resolved config actually run.
    pub config: ExperimentConfig,
    /// Ordered by policy (config order), then replication.
    pub traces: Vec<RegretTrace>,
    pub summary: Vec<PolicySummary>,
}

impl ExperimentResult {
    pub fn summary_for(&self, policy: &str) -> Option<&PolicySummary> {
        self.summary.iter().find(|s| s.policy == policy)
    }

    pub fn traces_for<'a>(&'a self, policy: &'a str) -> impl Iterator<Item = &'a RegretTrace> + 'a {
        self.traces.iter().filter(move |t| t.policy == policy)
    }
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool, HarnessError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::InvalidConfig(format!("thread pool: {e}")))
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentResult, HarnessError> {
    let config = config.resolve()?;
    let jobs: Vec<(usize, usize)> = (0..config.policies.len())
        .flat_map(|p| (0..config.replications).map(move |r| (p, r)))
        .collect();
    let pool = thread_pool(config.threads)?;
    let traces = pool.install(|| {
        jobs.par_iter()
            .map(|&(p, r)| run_replication(&config, &config.policies[p], r))
            .collect::<Result<Vec<_>, _>>()
    })?;
    let summary = summarize(&traces);
    Ok(ExperimentResult { config, traces, summary })
}

/// 17 significant digits: round-trips every `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn traces_csv(traces: &[RegretTrace]) -> String {
    let mut out = String::from("policy,rep,t,inst_regret,cum_regret,arm\n");
    for tr in traces {
        for t in 0..tr.inst_regret.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                tr.policy,
                tr.replication,
                t + 1,
                fmt_f64(tr.inst_regret[t]),
                fmt_f64(tr.cum_regret[t]),
                tr.arms[t]
            );
        }
    }
    out
}

pub fn summary_csv(summary: &[PolicySummary]) -> String {
    let mut out = String::from("policy,t,mean_cum,std_cum\n");
    for s in summary {
        for t in 0..s.mean_cum.len() {
            let _ = writeln!(out, "{},{},{},{}", s.policy, t + 1, fmt_f64(s.mean_cum[t]), fmt_f64(s.std_cum[t]));
        }
    }
    out
}

fn debug_csv(traces: &[RegretTrace]) -> Option<String> {
    if traces.iter().all(|t| t.estimation_error.is_none()) {
        return None;
    }
    let mut out = String::from("policy,rep,t,l1_error\n");
    for tr in traces {
        if let Some(errs) = &tr.estimation_error {
            for (t, e) in errs.iter().enumerate() {
                let cell = e.map(fmt_f64).unwrap_or_default();
                let _ = writeln!(out, "{},{},{},{}", tr.policy, tr.replication, t + 1, cell);
            }
        }
    }
    Some(out)
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

/// Mean cumulative regret per policy with a shaded one-std band.
pub fn plot_svg(summary: &[PolicySummary]) -> String {
    let (w, h) = (800.0, 500.0);
    let (left, right, top, bottom) = (70.0, 170.0, 30.0, 50.0);
    let horizon = summary.iter().map(|s| s.mean_cum.len()).max().unwrap_or(1).max(1);
    let y_max = summary
        .iter()
        .flat_map(|s| s.mean_cum.iter().zip(&s.std_cum).map(|(m, d)| m + d))
        .fold(0.0f64, f64::max)
        .max(1e-12);
    let px = |t: usize| left + (w - left - right) * (t as f64 - 1.0) / (horizon.max(2) as f64 - 1.0);
    let py = |v: f64| top + (h - top - bottom) * (1.0 - v / y_max);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (left, w - right, top, h - bottom);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for i in 0..=4 {
        let v = y_max * i as f64 / 4.0;
        let y = py(v);
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" font-size="11" text-anchor="end">{:.3}</text>"#, x0 - 6.0, y + 4.0, v);
        let t = 1 + (horizon - 1) * i / 4;
        let _ = writeln!(svg, r#"<text x="{:.1}" y="{}" font-size="11" text-anchor="middle">{t}</text>"#, px(t), y1 + 16.0);
    }
    let _ = writeln!(svg, r#"<text x="{:.1}" y="{}" font-size="12" text-anchor="middle">round t</text>"#, (x0 + x1) / 2.0, h - 12.0);
    let _ = writeln!(svg, r#"<text x="16" y="{:.1}" font-size="12" transform="rotate(-90 16 {:.1})" text-anchor="middle">cumulative regret</text>"#, (y0 + y1) / 2.0, (y0 + y1) / 2.0);

    for (i, s) in summary.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let n = s.mean_cum.len();
        let mut band = String::new();
        for t in 0..n {
            let _ = write!(band, "{:.2},{:.2} ", px(t + 1), py(s.mean_cum[t] + s.std_cum[t]));
        }
        for t in (0..n).rev() {
            let _ = write!(band, "{:.2},{:.2} ", px(t + 1), py((s.mean_cum[t] - s.std_cum[t]).max(0.0)));
        }
        let _ = writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.15" stroke="none"/>"#, band.trim_end());
        let mut line = String::new();
        for t in 0..n {
            let _ = write!(line, "{:.2},{:.2} ", px(t + 1), py(s.mean_cum[t]));
        }
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.trim_end());
        let ly = top + 18.0 * i as f64 + 10.0;
        let _ = writeln!(svg, r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="3"/>"#, x1 + 12.0, x1 + 32.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="12">{}</text>"#, x1 + 38.0, ly + 4.0, escape_xml(&s.policy));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `traces.csv`, `summary.csv`, `plot.svg`, `config.json` (and
/// `debug.csv` when recorded). Files are staged and renamed into place, so
/// a failure leaves no partial output.
pub fn emit_results(result: &ExperimentResult, output_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if result.traces.is_empty() {
        return Err(HarnessError::EmptyTraces);
    }
    let mut files = vec![
        ("traces.csv", traces_csv(&result.traces)),
        ("summary.csv", summary_csv(&result.summary)),
        ("plot.svg", plot_svg(&result.summary)),
        ("config.json", serde_json::to_string_pretty(&result.config).expect("config serializes") + "\n"),
    ];
    if let Some(debug) = debug_csv(&result.traces) {
        files.push(("debug.csv", debug));
    }
    write_all_or_nothing(output_dir, &files)
}

pub(crate) fn write_all_or_nothing(dir: &Path, files: &[(&str, String)]) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut staged = Vec::new();
    let cleanup = |staged: &[PathBuf]| {
        for p in staged {
            let _ = fs::remove_file(p);
        }
    };
    for (name, content) in files {
        let tmp = dir.join(format!(".{name}.partial"));
        if let Err(e) = fs::write(&tmp, content) {
            cleanup(&staged);
            let _ = fs::remove_file(&tmp);
            return Err(HarnessError::Io { path: tmp, source: e });
        }
        staged.push(tmp);
    }
    let mut written = Vec::new();
    for ((name, _), tmp) in files.iter().zip(&staged) {
        let dest = dir.join(name);
        if let Err(e) = fs::rename(tmp, &dest) {
            cleanup(&staged);
            for w in &written {
                let _ = fs::remove_file(w);
            }
            return Err(HarnessError::Io { path: dest, source: e });
        }
        written.push(dest);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSummary {
    pub alpha: f64,
    pub delta_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub phi_star_sq: f64,
    pub phi_avg_sq: f64,
    /// `phi_star_sq / phi_avg_sq`; null when the averaged-arm constant is 0.
    pub rho: Option<f64>,
    #[serde(rename = "phi_G_sq")]
    pub phi_g_sq: f64,
    pub margin: MarginSummary,
    pub concentration: f64,
    pub n_mc: usize,
    pub mc_tolerance: f64,
    pub support: Vec<usize>,
}

/// Diagnostics for the replication-0 instance of the configured environment.
pub fn diagnose(config: &ExperimentConfig) -> Result<DiagnosticReport, HarnessError> {
    config.environment.validate()?;
    let dc = &config.diagnostics;
    if dc.n_mc == 0 || dc.probes == 0 || dc.concentration_n == 0 || dc.concentration_reps == 0 || dc.h_grid.is_empty() {
        return Err(HarnessError::InvalidConfig("diagnostics sizes must be positive".into()));
    }
    let env = build_environment(config, 0)?;
    let param = env.param();
    let support = param.support().to_vec();
    let mut seeds = streams::stream(config.master_seed, "", 0, streams::DIAGNOSTICS);
    let mut next_seed = || seeds.random::<u64>();
    let pool = thread_pool(config.threads)?;
    pool.install(|| {
        let star = diagnostics::estimate_optimal_arm_gram(&env, param, dc.n_mc, next_seed());
        let phi_star_sq = diagnostics::phi_sq(&star, &support)?;
        let avg = diagnostics::estimate_average_arm_gram(&env, dc.n_mc, next_seed());
        let phi_avg_sq = diagnostics::phi_sq(&avg, &support)?;
        let probes = diagnostics::default_probes(&mut streams::stream(next_seed(), "", 0, streams::DIAGNOSTICS), param, dc.probes);
        let diversity = diagnostics::estimate_greedy_diversity(&env, param, &probes, dc.n_mc, next_seed())?;
        let margin = diagnostics::estimate_margin(&env, param, dc.n_mc, &dc.h_grid, next_seed());
        let conc = diagnostics::check_gram_concentration(
            &env,
            param,
            dc.concentration_n,
            dc.concentration_reps,
            phi_avg_sq,
            next_seed(),
        )?;
        Ok(DiagnosticReport {
            phi_star_sq,
            phi_avg_sq,
            rho: (phi_avg_sq > 0.0).then(|| phi_star_sq / phi_avg_sq),
            phi_g_sq: diversity.phi_g_sq,
            margin: MarginSummary { alpha: margin.alpha, delta_star: margin.delta_star },
            concentration: conc.fraction,
            n_mc: dc.n_mc,
            mc_tolerance: diagnostics::mc_tolerance(dc.n_mc),
            support,
        })
    })
}

pub fn write_report(report: &DiagnosticReport, path: &Path) -> Result<(), HarnessError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| HarnessError::InvalidConfig(format!("bad report path {}", path.display())))?;
    let body = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
    write_all_or_nothing(dir, &[(name, body)]).map(|_| ())
}

pub const PRESETS: [&str; 4] = ["experiment1", "experiment2", "experiment1-desk", "experiment2-desk"];

fn sqrt_log(scale: f64) -> LambdaSchedule {
    LambdaSchedule::SqrtLog { scale }
}

fn default_policies(kind: EnvironmentKind) -> Vec<PolicySpec> {
    let solver = SolverSettings::default();
    // tuned on the desk-scale instances for lowest mean regret at T
    let (m0, w, estc_scale) = match kind {
        EnvironmentKind::FixedSuboptimal => (75, 3.0, 0.002),
        _ => (10, 1.0, 0.05),
    };
    let mut out = vec![
        PolicySpec {
            name: "fs-wlasso".into(),
            kind: PolicyKind::FsWlasso(FsWLassoConfig {
                m0,
                w,
                lambda: sqrt_log(0.05),
                theory_mode: false,
                guesses: None,
                solver,
            }),
        },
        PolicySpec {
            name: "fs-lasso".into(),
            kind: PolicyKind::FsLasso(FsLassoConfig {
                q: ForcedSchedule::Log { base: 20.0, scale: 2.0 },
                h: 0.3,
                lambda1: 0.3,
                lambda2_scale: 0.3,
                theory_mode: false,
                guesses: None,
                solver,
            }),
        },
    ];
    for n0 in [50, 100, 200] {
        out.push(PolicySpec {
            name: format!("estc-{n0}"),
            kind: PolicyKind::Estc(EstcConfig { n0, lambda: sqrt_log(estc_scale), solver }),
        });
    }
    out.push(PolicySpec {
        name: "greedy-lasso".into(),
        kind: PolicyKind::GreedyLasso(GreedyLassoConfig { lambda: sqrt_log(0.05), solver }),
    });
    out.push(PolicySpec { name: "oracle".into(), kind: PolicyKind::Oracle });
    out
}

/// Packaged configs: full-size experiments and their desk-scale versions.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let (spec, horizon, replications) = match name {
        "experiment1" => (EnvironmentSpec::correlated_gaussian(100, 10, 5, 0.7, 0.5), 2000, 100),
        "experiment2" => (EnvironmentSpec::fixed_suboptimal(100, 10, 5, 0.5), 2000, 100),
        "experiment1-desk" => (EnvironmentSpec::correlated_gaussian(30, 10, 5, 0.7, 0.5), 1500, 50),
        "experiment2-desk" => (EnvironmentSpec::fixed_suboptimal(30, 10, 5, 0.5), 1500, 50),
        _ => return None,
    };
    let policies = default_policies(spec.kind);
    Some(ExperimentConfig {
        environment: spec,
        policies,
        horizon,
        replications,
        master_seed: 20_240_601,
        output_dir: PathBuf::from(format!("results/{name}")),
        record_debug: false,
        threads: None,
        diagnostics: DiagnosticsConfig::default(),
    })
}
