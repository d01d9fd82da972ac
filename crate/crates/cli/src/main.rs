use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use lmdp_lab::chain::analyze;
use lmdp_lab::experiment::config::{ExperimentConfig, GeneratorKind, InstanceSpec};
use lmdp_lab::experiment::verify::VerifyOptions;
use lmdp_lab::experiment::{generate_instance, run_from_config, verify};
use lmdp_lab::lmdp::{solve, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use lmdp_lab::{PassiveDynamics, StateCost};

/// Linearly solvable MDPs, follow-the-leader experiments and bound checks.
#[derive(Parser)]
#[command(name = "lmdp-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance for one state cost and print the solution as JSON.
    Solve {
        /// Instance JSON: `{"kernel": [[..]]}` or a generator spec.
        #[arg(long)]
        instance: PathBuf,
        /// State cost, comma separated, one value in [0, 1] per state.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        cost: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
        max_iters: usize,
    },
    /// Print mixing diagnostics of an instance as JSON.
    Analyze {
        #[arg(long)]
        instance: PathBuf,
    },
    /// Run an experiment config; exits 0 only if every ledger check passes.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Run this single seed instead of the configured ones.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check assumptions, solver agreement and the value and policy bounds.
    Verify {
        #[arg(long, conflicts_with = "config", required_unless_present = "config")]
        instance: Option<PathBuf>,
        /// Take the instance and oracle tolerance from an experiment config.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        cost: Option<Vec<f64>>,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Generate an instance and print it as JSON.
    Gen {
        #[arg(long, value_parser = parse_kind)]
        kind: GeneratorKind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        min_prob: f64,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_kind(s: &str) -> std::result::Result<GeneratorKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown generator kind {s:?}; expected random-ergodic, ring-with-jumps or gridworld"))
}

fn load_instance(path: &Path) -> Result<PassiveDynamics> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: InstanceSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing instance {}", path.display()))?;
    Ok(spec.build()?)
}

fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    emit(&(serde_json::to_string_pretty(value)? + "\n"))
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve {
            instance,
            cost,
            tol,
            max_iters,
        } => {
            let p = load_instance(&instance)?;
            let c = StateCost::new(cost)?;
            print_json(&solve(&p, &c, tol, max_iters)?)?;
            Ok(true)
        }
        Command::Analyze { instance } => {
            print_json(&analyze(&load_instance(&instance)?)?)?;
            Ok(true)
        }
        Command::Run { config, seed } => {
            let mut cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            let report = run_from_config(&cfg)?;
            print_json(&report.aggregate)?;
            for s in report.summaries.iter().filter(|s| !s.all_pass) {
                let failed: Vec<&str> = s
                    .summary
                    .ledger
                    .iter()
                    .filter(|(_, e)| !e.pass)
                    .map(|(k, _)| k.as_str())
                    .collect();
                eprintln!("seed {}: ledger failures: {}", s.seed, failed.join(", "));
            }
            Ok(report.all_pass())
        }
        Command::Verify {
            instance,
            config,
            cost,
            samples,
            seed,
            json,
        } => {
            let mut opts = VerifyOptions {
                samples,
                seed,
                ..VerifyOptions::default()
            };
            let p = match (instance, config) {
                (Some(path), _) => load_instance(&path)?,
                (None, Some(path)) => {
                    let cfg = ExperimentConfig::load(&path)?;
                    opts.oracle_tol = cfg.tolerances.oracle_tol;
                    opts.solver = cfg.tolerances.solver();
                    cfg.instance.build()?
                }
                (None, None) => bail!("verify needs --instance or --config"),
            };
            let c = cost.map(StateCost::new).transpose()?;
            let report = verify(&p, c.as_ref(), &opts)?;
            if json {
                print_json(&report)?;
            } else {
                emit(&report.render())?;
            }
            Ok(report.pass)
        }
        Command::Gen {
            kind,
            n,
            seed,
            min_prob,
            epsilon,
            out,
        } => {
            let p = generate_instance(kind, n, seed, min_prob, epsilon)?;
            let text = serde_json::to_string_pretty(&p)?;
            match out {
                Some(path) => std::fs::write(&path, text + "\n").with_context(|| format!("writing {}", path.display()))?,
                None => emit(&(text + "\n"))?,
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
