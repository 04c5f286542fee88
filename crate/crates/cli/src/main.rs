//! Batch CLI around the deterministic-equivalent core: seeded experiment
//! sweeps, regularization optimization, feedback-bit allocation search, and
//! the Monte-Carlo residual report for the asymptotic approximations.
//!
//! All structured output is JSON on stdout; experiment sweeps additionally
//! write CSV result files plus a run manifest into `--out`.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde_json::json;

use rzfde::bitalloc::{search_allocation, SearchSpace};
use rzfde::harness::{emit_report, optimize_alpha, run_experiment, Experiment, ExperimentSpec};
use rzfde::montecarlo::validate_appendix_terms;
use rzfde::regopt::{
    closed_form_alpha, default_alpha_bracket, golden_section_alpha, prop1_alpha, AlphaResult,
};
use rzfde::scenario::{build_scenario, Scenario, ScenarioConfig};

#[derive(Parser)]
#[command(
    name = "rzfde",
    version,
    about = "Deterministic-equivalent sum-rate tools for cooperative multi-cell RZF downlink"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a named experiment sweep; writes CSV results and a JSON manifest.
    Simulate {
        /// Scenario config JSON overriding the built-in layout (agreement
        /// experiment only).
        #[arg(long)]
        config: Option<PathBuf>,
        /// One of: agreement, convergence, candidates.
        #[arg(long)]
        experiment: String,
        /// Master seed for every random stream in the run.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Monte-Carlo trials per sweep point.
        #[arg(long, default_value_t = 500)]
        trials: usize,
        /// Output directory for CSV and manifest files.
        #[arg(long)]
        out: PathBuf,
    },
    /// Optimize the RZF regularization parameter for a scenario.
    AlphaOpt {
        /// Scenario config JSON.
        #[arg(long)]
        config: PathBuf,
        /// One of: golden, prop1, closed-form. Default: the best method the
        /// scenario's structure allows.
        #[arg(long)]
        method: Option<String>,
    },
    /// Exhaustive feedback-bit allocation search for a scenario.
    BitAlloc {
        /// Scenario config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Per-user feedback bit budget.
        #[arg(long)]
        budget: u32,
        /// Candidate set: full or restricted.
        #[arg(long, default_value = "restricted")]
        space: String,
    },
    /// Monte-Carlo residual report for the asymptotic SINR approximations.
    Validate {
        /// Scenario config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Channel draws for the residual statistics.
        #[arg(long, default_value_t = 500)]
        trials: usize,
        /// Master seed for the channel draws.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Regularization parameter the residuals are evaluated at; default
        /// is the optimized value for the scenario.
        #[arg(long)]
        alpha: Option<f64>,
    },
}

fn load_scenario(path: &PathBuf) -> anyhow::Result<Scenario<f64>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let config = ScenarioConfig::from_json(&text)?;
    Ok(build_scenario::<f64>(&config)?)
}

fn alpha_json(r: &AlphaResult<f64>) -> serde_json::Value {
    json!({
        "alpha_opt": r.alpha_opt,
        "method": r.method.to_string(),
        "objective_sum_rate_nats": r.objective,
        "objective_sum_rate_bits": r.objective / std::f64::consts::LN_2,
        "bracket": [r.bracket.0, r.bracket.1],
        "iterations": r.iterations,
        "warnings": r.warnings,
    })
}

fn run_simulate(
    config: Option<PathBuf>,
    experiment: String,
    seed: u64,
    trials: usize,
    out: PathBuf,
) -> anyhow::Result<()> {
    let mut spec = ExperimentSpec::new(experiment.parse::<Experiment>()?, out);
    spec.master_seed = seed;
    spec.trials = trials;
    if let Some(path) = config {
        if spec.experiment == Experiment::Agreement {
            let text = fs::read_to_string(&path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let cfg = ScenarioConfig::from_json(&text)?;
            // Keep only CSIT cases that fit the configured cell count.
            let m = cfg.m;
            spec.tau2_cases.retain(|c| c.len() == 1 || c.len() == m);
            spec.scenario = Some(cfg);
        } else {
            eprintln!(
                "note: --config is ignored by the {} experiment",
                spec.experiment
            );
        }
    }
    let outcome = run_experiment(&spec)?;
    let report = emit_report(std::slice::from_ref(&outcome))?;
    print!("{report}");
    eprintln!(
        "wrote {} ({} rows) and {}",
        outcome.csv_path.display(),
        outcome.rows.len(),
        outcome.manifest_path.display()
    );
    Ok(())
}

fn run_alpha_opt(config: PathBuf, method: Option<String>) -> anyhow::Result<()> {
    let s = load_scenario(&config)?;
    let result = match method.as_deref() {
        None => optimize_alpha(&s)?,
        Some("golden") => golden_section_alpha(&s, default_alpha_bracket(&s), 1e-6)?,
        Some("prop1") => prop1_alpha(&s)?,
        Some("closed-form") => closed_form_alpha(&s)?,
        Some(other) => bail!("unknown method '{other}' (expected golden, prop1, or closed-form)"),
    };
    println!("{}", serde_json::to_string_pretty(&alpha_json(&result))?);
    Ok(())
}

fn run_bit_alloc(config: PathBuf, budget: u32, space: String) -> anyhow::Result<()> {
    let s = load_scenario(&config)?;
    let space = match space.as_str() {
        "full" => SearchSpace::Full,
        "restricted" => SearchSpace::Restricted,
        other => bail!("unknown space '{other}' (expected full or restricted)"),
    };
    let res = search_allocation(&s, budget, space)?;
    let m = s.m();
    let nest = |v: &[u32]| -> Vec<Vec<u32>> {
        v.chunks(m).map(|row| row.to_vec()).collect()
    };
    let ranking: Vec<Vec<usize>> = res
        .allocation
        .ranking
        .chunks(m)
        .map(|row| row.to_vec())
        .collect();
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "budget": res.allocation.budget,
            "space": if res.allocation.restricted { "restricted" } else { "full" },
            "bits": nest(&res.allocation.bits),
            "ranking": ranking,
            "alpha_opt": res.alpha_opt,
            "sum_rate_nats": res.sum_rate_nats,
            "sum_rate_bits": res.sum_rate_bits(),
            "evaluations": res.evaluations,
        }))?
    );
    Ok(())
}

fn run_validate(
    config: PathBuf,
    trials: usize,
    seed: u64,
    alpha: Option<f64>,
) -> anyhow::Result<()> {
    let s = load_scenario(&config)?;
    let alpha = match alpha {
        Some(a) => a,
        None => optimize_alpha(&s)?.alpha_opt,
    };
    let report = validate_appendix_terms(&s, alpha, trials, seed)?;
    let residual = |name: &str, r: &rzfde::montecarlo::LemmaResidual<f64>| {
        let z = if r.std_error > 0.0 {
            r.mean / r.std_error
        } else {
            0.0
        };
        (name.to_string(), json!({
            "mean": r.mean,
            "std_error": r.std_error,
            "z_score": z,
        }))
    };
    let entries: Vec<(String, serde_json::Value)> = vec![
        residual("noise", &report.noise),
        residual("signal", &report.signal),
        residual("interference", &report.interference),
        residual("bilinear_xx", &report.bilinear_xx),
        residual("bilinear_xv", &report.bilinear_xv),
    ];
    let mut residuals = serde_json::Map::new();
    for (name, value) in entries {
        residuals.insert(name, value);
    }
    println!(
        "{}",
        serde_json::to_string_pretty(&json!({
            "alpha": alpha,
            "trials": report.trials,
            "seed": seed,
            "residuals": residuals,
        }))?
    );
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            config,
            experiment,
            seed,
            trials,
            out,
        } => run_simulate(config, experiment, seed, trials, out),
        Command::AlphaOpt { config, method } => run_alpha_opt(config, method),
        Command::BitAlloc {
            config,
            budget,
            space,
        } => run_bit_alloc(config, budget, space),
        Command::Validate {
            config,
            trials,
            seed,
            alpha,
        } => run_validate(config, trials, seed, alpha),
    }
}
