use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adversary::AdversarySpec;
use crate::error::Result;
use crate::online::{ExperimentTrace, Mode, TraceSummary};

/// Column order of trace files.
pub const TRACE_COLUMNS: [&str; 12] = [
    "t",
    "lambda_t",
    "idealized_loss",
    "expected_true_loss",
    "sampled_loss",
    "policy_change_l1",
    "lemma4_bound",
    "state_gap_l1",
    "pmudiff_bound",
    "cum_idealized_regret",
    "cum_true_regret_proxy",
    "v_span",
];

/// 17 significant digits, enough to round-trip any double.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_trace_csv<W: std::io::Write>(trace: &ExperimentTrace, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for r in &trace.records {
        let f = format_float;
        w.write_record([
            r.t.to_string(),
            f(r.lambda),
            f(r.idealized_loss),
            f(r.expected_true_loss),
            r.sampled_loss.map(f).unwrap_or_default(),
            f(r.policy_change),
            f(r.lemma4_bound),
            f(r.state_gap),
            f(r.pmudiff_bound),
            f(r.cum_idealized_regret),
            f(r.cum_true_regret_proxy),
            f(r.v_span),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_trace_csv(trace: &ExperimentTrace, path: &Path) -> Result<()> {
    write_trace_csv(trace, std::fs::File::create(path)?)
}

/// Per-run summary file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryFile {
    pub seed: u64,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub mode: Mode,
    pub adversary: AdversarySpec,
    pub all_pass: bool,
    #[serde(flatten)]
    pub summary: TraceSummary,
}

impl SummaryFile {
    pub fn of(trace: &ExperimentTrace) -> Self {
        Self {
            seed: trace.seed,
            horizon: trace.horizon,
            mode: trace.mode,
            adversary: trace.adversary.clone(),
            all_pass: trace.summary.all_pass(),
            summary: trace.summary.clone(),
        }
    }
}

/// Cross-seed statistics of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub mean_idealized_regret: f64,
    pub max_idealized_regret: f64,
    pub mean_true_regret_proxy: f64,
    pub max_true_regret_proxy: f64,
    pub fullbound_value: f64,
    pub all_pass: bool,
    pub failing_seeds: Vec<u64>,
}

impl Aggregate {
    pub fn of(summaries: &[SummaryFile]) -> Self {
        let runs = summaries.len();
        let mean = |f: &dyn Fn(&SummaryFile) -> f64| summaries.iter().map(f).sum::<f64>() / runs.max(1) as f64;
        let max = |f: &dyn Fn(&SummaryFile) -> f64| summaries.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        let failing_seeds: Vec<u64> = summaries.iter().filter(|s| !s.all_pass).map(|s| s.seed).collect();
        Self {
            runs,
            seeds: summaries.iter().map(|s| s.seed).collect(),
            mean_idealized_regret: mean(&|s| s.summary.idealized_regret),
            max_idealized_regret: max(&|s| s.summary.idealized_regret),
            mean_true_regret_proxy: mean(&|s| s.summary.true_regret_proxy),
            max_true_regret_proxy: max(&|s| s.summary.true_regret_proxy),
            fullbound_value: summaries.first().map_or(0.0, |s| s.summary.fullbound_value),
            all_pass: failing_seeds.is_empty(),
            failing_seeds,
        }
    }
}

pub fn save_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}
