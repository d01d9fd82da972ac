use std::path::PathBuf;

use rayon::prelude::*;

use crate::adversary::Adversary;
use crate::error::{LmdpError, Result};
use crate::experiment::config::ExperimentConfig;
use crate::experiment::io::{save_json, save_trace_csv, Aggregate, SummaryFile};
use crate::online::{run_experiment, uniform_distribution, RunOptions};

/// Caps the number of seeds run concurrently.
pub const THREADS_ENV: &str = "LMDP_LAB_THREADS";

/// Files written and statistics of a sweep.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub output: PathBuf,
    pub summaries: Vec<SummaryFile>,
    pub aggregate: Aggregate,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.aggregate.all_pass
    }
}

pub fn trace_file_name(seed: u64) -> String {
    format!("trace_seed{seed}.csv")
}

pub fn summary_file_name(seed: u64) -> String {
    format!("summary_seed{seed}.json")
}

pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const INSTANCE_FILE: &str = "instance.json";

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(LmdpError::InvalidInput(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs every seed of `config`, writing one trace CSV and summary JSON per
/// seed, then the instance and the cross-seed aggregate.
///
/// Ledger failures are reported through [`RunReport::all_pass`], not as errors.
pub fn run_from_config(config: &ExperimentConfig) -> Result<RunReport> {
    config.validate()?;
    let p = config.instance.build()?;
    let mu0 = config.mu0.clone().unwrap_or_else(|| uniform_distribution(p.n()));
    std::fs::create_dir_all(&config.output)?;
    let opts = RunOptions {
        solver: config.tolerances.solver(),
        corrupt_at: config.corrupt_at,
    };

    let one = |seed: u64| -> Result<SummaryFile> {
        let adversary = Adversary::new(config.adversary.clone(), seed);
        let trace = run_experiment(&p, &mu0, &adversary, config.horizon, config.mode, seed, &opts)?;
        save_trace_csv(&trace, &config.output.join(trace_file_name(seed)))?;
        let summary = SummaryFile::of(&trace);
        save_json(&summary, &config.output.join(summary_file_name(seed)))?;
        Ok(summary)
    };

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = thread_cap()? {
        builder = builder.num_threads(k);
    }
    let pool = builder
        .build()
        .map_err(|e| LmdpError::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let summaries = pool.install(|| config.seeds.par_iter().map(|&s| one(s)).collect::<Result<Vec<_>>>())?;

    save_json(&p, &config.output.join(INSTANCE_FILE))?;
    let aggregate = Aggregate::of(&summaries);
    save_json(&aggregate, &config.output.join(AGGREGATE_FILE))?;
    Ok(RunReport {
        output: config.output.clone(),
        summaries,
        aggregate,
    })
}
