use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use sparse_bandit::harness::{self, ExperimentConfig};
use sparse_bandit::lasso::{self, Sample, SolverOptions, WeightedLassoProblem};

#[derive(Parser, Debug)]
#[command(name = "sparse-bandit", version, about = "Sparse linear contextual bandit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Worker threads for replications and Monte-Carlo loops.
    #[arg(long, global = true, env = "SPARSE_BANDIT_THREADS")]
    threads: Option<usize>,

    #[arg(short, long, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a replicated experiment and write traces, summary, plot and config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Dotted-path override, e.g. `environment.d=30`. Repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output directory (defaults to the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Estimate compatibility, margin and diversity constants; writes a JSON report.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Report path; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve a weighted Lasso from CSV rows `weight,x_1,...,x_d,r`.
    LassoSolve {
        csv: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Print or write a packaged config.
    GenConfig {
        /// One of experiment1, experiment2, experiment1-desk, experiment2-desk.
        preset: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides, out, seed } => {
            let cfg = prepare(&config, &overrides, seed, cli.threads)?;
            cmd_run(cfg, out, cli.verbose)
        }
        Command::Diagnose { config, overrides, out, seed } => {
            let cfg = prepare(&config, &overrides, seed, cli.threads)?;
            cmd_diagnose(&cfg, out.as_deref(), cli.verbose)
        }
        Command::LassoSolve { csv, lambda, tol } => cmd_lasso_solve(&csv, lambda, tol),
        Command::GenConfig { preset, out } => cmd_gen_config(&preset, out.as_deref()),
    }
}

fn prepare(path: &Path, overrides: &[String], seed: Option<u64>, threads: Option<usize>) -> Result<ExperimentConfig> {
    let mut cfg = harness::load_config(path, overrides)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    Ok(cfg)
}

fn cmd_run(mut cfg: ExperimentConfig, out: Option<PathBuf>, verbose: bool) -> Result<()> {
    if let Some(dir) = out {
        cfg.output_dir = dir;
    }
    if verbose {
        eprintln!(
            "running {} policies x {} replications, T = {}, d = {}",
            cfg.policies.len(),
            cfg.replications,
            cfg.horizon,
            cfg.environment.d
        );
    }
    let start = Instant::now();
    let result = harness::run_experiment(&cfg)?;
    let written = harness::emit_results(&result, &cfg.output_dir)?;
    for s in &result.summary {
        let t = s.mean_cum.len() - 1;
        let failures: usize = result.traces_for(&s.policy).map(|tr| tr.solver_failures).sum();
        println!("{:<16} R(T) = {:>10.4} +- {:<10.4}{}", s.policy, s.mean_cum[t], s.std_cum[t],
            if failures > 0 { format!(" ({failures} unconverged solves)") } else { String::new() });
    }
    if verbose {
        eprintln!("finished in {:.1?}", start.elapsed());
        for p in written {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn cmd_diagnose(cfg: &ExperimentConfig, out: Option<&Path>, verbose: bool) -> Result<()> {
    let start = Instant::now();
    let report = harness::diagnose(cfg)?;
    match out {
        Some(path) => {
            harness::write_report(&report, path)?;
            if verbose {
                eprintln!("wrote {}", path.display());
            }
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    if verbose {
        eprintln!("finished in {:.1?}", start.elapsed());
    }
    Ok(())
}

fn parse_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = line.split(',').map(|c| c.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            // a header line is allowed before any data
            Err(_) if rows.is_empty() && i == 0 => continue,
            Err(e) => bail!("{}:{}: {e}", path.display(), i + 1),
        }
    }
    Ok(rows)
}

fn cmd_lasso_solve(path: &Path, lambda: f64, tol: f64) -> Result<()> {
    if !(lambda > 0.0) {
        bail!("lambda must be positive, got {lambda}");
    }
    let rows = parse_rows(path)?;
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    let width = rows[0].len();
    if width < 3 {
        bail!("{}: rows need weight, at least one feature, and a reward", path.display());
    }
    let samples = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if r.len() != width {
                bail!("{}: row {} has {} columns, expected {width}", path.display(), i + 1, r.len());
            }
            Ok(Sample::new(r[0], r[1..width - 1].to_vec(), r[width - 1]))
        })
        .collect::<Result<Vec<_>>>()?;
    let problem = WeightedLassoProblem::new(width - 2, lambda, samples)?;
    let opts = SolverOptions { tol, ..SolverOptions::default() };
    let sol = match lasso::solve(&problem, None, opts) {
        Ok(sol) => sol,
        Err(e) => {
            if let Some(partial) = e.partial_solution() {
                eprintln!("warning: {e}; kkt_violation = {:e}", partial.kkt_violation);
            }
            return Err(e.into());
        }
    };
    let beta: Vec<String> = sol.beta_hat.iter().map(|b| format!("{b:.10}")).collect();
    println!("beta_hat: [{}]", beta.join(", "));
    println!("objective: {:.10}", sol.objective);
    println!("kkt_violation: {:e}", sol.kkt_violation);
    Ok(())
}

fn cmd_gen_config(name: &str, out: Option<&Path>) -> Result<()> {
    let Some(cfg) = harness::preset(name) else {
        bail!("unknown preset `{name}` (expected one of {})", harness::PRESETS.join(", "));
    };
    let text = serde_json::to_string_pretty(&cfg)? + "\n";
    match out {
        Some(path) => {
            let tmp = path.with_extension("partial");
            fs::write(&tmp, &text).with_context(|| format!("writing {}", tmp.display()))?;
            fs::rename(&tmp, path).with_context(|| format!("writing {}", path.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}
