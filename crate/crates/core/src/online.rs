//! Follow-the-leader against an oblivious sequence of state costs.
//!
//! Round `t` plays `Q_t = Q*(c̄_t)`, the optimal policy for the running
//! average of the costs revealed so far, then observes `c_t`. Alongside the
//! losses every round records the quantities the regret analysis bounds, and
//! [`lemma_diagnostics`] turns them into a pass/fail ledger.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};

use crate::adversary::{stream_rng, Adversary, AdversarySpec, TRAJECTORY_STREAM};
use crate::chain::{analyze, ergodicity_coefficient, mixing_time_from_alpha, stationary_of_primitive, ChainDiagnostics};
use crate::dynamics::{control_costs, span, PassiveDynamics, Policy, StateCost};
use crate::error::{LmdpError, Result};
use crate::lmdp::{solve_from, LmdpSolution, SolverSettings};

/// Absolute slack granted to per-round ledger checks for solver rounding.
pub const LEDGER_TOL: f64 = 1e-9;
/// Per-round slack for the be-the-leader check, which compares two sums of `T` terms.
pub const BTL_TOL_PER_ROUND: f64 = 1e-8;

/// How the state distribution is tracked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Propagates `p_{t+1} = p_t Q_t` exactly.
    Exact,
    /// Also samples a trajectory `X_{t+1} ~ Q_t(.|X_t)`.
    MonteCarlo,
}

/// Knobs of a single run that do not change the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunOptions {
    pub solver: SolverSettings,
    /// Negative control: play `P` instead of the leader in this round.
    pub corrupt_at: Option<usize>,
}

/// The leader's policy `Q_t` and the solution it came from.
pub fn ftl_policy(p: &PassiveDynamics, cbar: &StateCost) -> Result<(Policy, LmdpSolution)> {
    ftl_policy_with(p, cbar, &SolverSettings::default(), None)
}

/// [`ftl_policy`] with explicit solver settings and an optional warm start.
pub fn ftl_policy_with(
    p: &PassiveDynamics,
    cbar: &StateCost,
    solver: &SolverSettings,
    warm: Option<&[f64]>,
) -> Result<(Policy, LmdpSolution)> {
    let sol = solve_from(p, cbar, solver.tol, solver.max_iters, warm)?;
    Ok((sol.policy.clone(), sol))
}

/// Everything observed in one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: usize,
    pub cost: StateCost,
    /// Running average of `c_1..c_{t-1}`.
    pub cbar: StateCost,
    /// Average cost of the leader, `f(π_t; c̄_t)`.
    pub lambda: f64,
    /// `max_x ||Q_t(.|x) - Q_{t+1}(.|x)||_1`.
    pub policy_change: f64,
    /// `τ_ub / t`.
    pub lemma4_bound: f64,
    /// `f(π_t; c_t)`.
    pub idealized_loss: f64,
    /// `f(π_{t+1}; c_t)`.
    pub lookahead_loss: f64,
    /// `Σ_x p_t(x) ℓ_t(x, Q_t)`.
    pub expected_true_loss: f64,
    pub sampled_loss: Option<f64>,
    /// `||μ_t - p_t||_1`.
    pub state_gap: f64,
    pub pmudiff_bound: f64,
    pub v_span: f64,
    pub max_control_cost: f64,
    /// Mixing time of the policy actually played.
    pub policy_tau: f64,
    /// Loss of the fixed comparator in this round.
    pub comparator_loss: f64,
    /// `Σ_{s≤t} f(π_s; c_s) - t λ_{t+1}`.
    pub cum_idealized_regret: f64,
    /// `Σ_{s≤t} (expected_true_loss_s - comparator_loss_s)`.
    pub cum_true_regret_proxy: f64,
}

/// Outcome of one ledger inequality. Slack is `bound - value` per checked item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub pass: bool,
    pub max_slack: f64,
    pub min_slack: f64,
    pub violations: usize,
}

impl LedgerEntry {
    fn from_slacks(slacks: impl IntoIterator<Item = f64>, tol: f64) -> Self {
        let mut entry = LedgerEntry {
            pass: true,
            max_slack: f64::NEG_INFINITY,
            min_slack: f64::INFINITY,
            violations: 0,
        };
        for s in slacks {
            entry.max_slack = entry.max_slack.max(s);
            entry.min_slack = entry.min_slack.min(s);
            // NaN slack counts as a violation
            if !(s >= -tol) {
                entry.violations += 1;
                entry.pass = false;
            }
        }
        entry
    }
}

pub type Ledger = BTreeMap<String, LedgerEntry>;

/// Aggregate quantities of a finished run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub idealized_regret: f64,
    pub true_regret_proxy: f64,
    pub comparator_value: f64,
    pub fullbound_value: f64,
    pub tau_ub: f64,
    pub h_hit: f64,
    pub h_prim: usize,
    pub alpha: f64,
    #[serde(rename = "B")]
    pub log_barrier: f64,
    pub max_policy_tau: f64,
    pub total_expected_loss: f64,
    pub total_sampled_loss: Option<f64>,
    pub ledger: Ledger,
}

impl TraceSummary {
    pub fn all_pass(&self) -> bool {
        self.ledger.values().all(|e| e.pass)
    }
}

/// A complete run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTrace {
    pub instance: PassiveDynamics,
    pub diagnostics: ChainDiagnostics,
    pub adversary: AdversarySpec,
    pub horizon: usize,
    pub mode: Mode,
    pub seed: u64,
    pub mu0: Vec<f64>,
    pub records: Vec<RoundRecord>,
    /// Leader after the last round, for `c̄_{T+1}`.
    pub final_leader: LmdpSolution,
    pub final_cbar: StateCost,
    pub summary: TraceSummary,
}

/// `2(τ+1)³(1+log T)² + 2(τ²+τ+2)(3+log T) + (2τ+2)(B+2)`.
pub fn theoretical_bound(tau_ub: f64, b: f64, horizon: usize) -> f64 {
    let l = (horizon.max(1) as f64).ln();
    let tau = tau_ub;
    2.0 * (tau + 1.0).powi(3) * (1.0 + l).powi(2)
        + 2.0 * (tau * tau + tau + 2.0) * (3.0 + l)
        + (2.0 * tau + 2.0) * (b + 2.0)
}

/// `2e^{-(t-1)/τ} + 2(τ+1)³(1+log t)/t`.
pub fn pmudiff_bound(tau_ub: f64, t: usize) -> f64 {
    let tf = t as f64;
    2.0 * (-(tf - 1.0) / tau_ub).exp() + 2.0 * (tau_ub + 1.0).powi(3) * (1.0 + tf.ln()) / tf
}

pub fn uniform_distribution(n: usize) -> Vec<f64> {
    vec![1.0 / n as f64; n]
}

fn check_distribution(mu0: &[f64], n: usize) -> Result<()> {
    if mu0.len() != n {
        return Err(LmdpError::InvalidInput(format!(
            "initial distribution has {} entries, dynamics has {n} states",
            mu0.len()
        )));
    }
    let total: f64 = mu0.iter().sum();
    if mu0.iter().any(|&m| !(m >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(LmdpError::InvalidInput(
            "initial distribution must be nonnegative and sum to 1".into(),
        ));
    }
    Ok(())
}

/// Policy played in one round plus the derived per-state quantities.
struct Played {
    sol: LmdpSolution,
    policy: Policy,
    mu: Vec<f64>,
    kl: Vec<f64>,
}

impl Played {
    fn new(p: &PassiveDynamics, sol: LmdpSolution, corrupt: bool) -> Result<Self> {
        let policy = if corrupt { Policy::passive(p) } else { sol.policy.clone() };
        let mu = stationary_of_primitive(policy.kernel())?;
        let kl = control_costs(&policy, p)?;
        Ok(Self { sol, policy, mu, kl })
    }

    /// `Σ_x w(x) (c(x) + KL_x)`.
    fn loss_under(&self, w: &[f64], c: &StateCost) -> f64 {
        w.iter()
            .zip(c.values())
            .zip(&self.kl)
            .map(|((wi, ci), ki)| wi * (ci + ki))
            .sum()
    }
}

fn propagate(dist: &[f64], q: &Policy) -> Vec<f64> {
    let k = q.kernel();
    let n = dist.len();
    (0..n)
        .map(|y| (0..n).map(|x| dist[x] * k[(x, y)]).sum())
        .collect()
}

fn assumption_error(e: LmdpError) -> LmdpError {
    match e {
        LmdpError::NotPrimitive => LmdpError::AssumptionViolation("passive dynamics are not primitive".into()),
        LmdpError::NonErgodic(msg) => LmdpError::AssumptionViolation(msg),
        other => other,
    }
}

/// Runs follow-the-leader for `horizon` rounds.
///
/// `seed` drives trajectory sampling only; the adversary carries its own.
pub fn run_experiment(
    p: &PassiveDynamics,
    mu0: &[f64],
    adversary: &Adversary,
    horizon: usize,
    mode: Mode,
    seed: u64,
    opts: &RunOptions,
) -> Result<ExperimentTrace> {
    if horizon == 0 {
        return Err(LmdpError::InvalidInput("horizon must be at least 1".into()));
    }
    let n = p.n();
    check_distribution(mu0, n)?;
    let diagnostics = analyze(p).map_err(assumption_error)?;
    let tau_ub = diagnostics.tau_ub;
    let costs = adversary.cost_sequence(p, horizon, &opts.solver)?;

    let mut rng = stream_rng(seed, TRAJECTORY_STREAM);
    let mut state = match mode {
        Mode::MonteCarlo => Some(sample(mu0.iter().copied(), &mut rng)?),
        Mode::Exact => None,
    };

    let mut cbar = StateCost::zeros(n);
    let (_, sol) = ftl_policy_with(p, &cbar, &opts.solver, None)?;
    let mut cur = Played::new(p, sol, opts.corrupt_at == Some(1))?;
    let mut dist = mu0.to_vec();
    let mut records = Vec::with_capacity(horizon);

    for (idx, cost) in costs.iter().enumerate() {
        let t = idx + 1;
        let idealized_loss = cur.loss_under(&cur.mu, cost);
        let expected_true_loss = cur.loss_under(&dist, cost);
        let sampled_loss = match state.as_mut() {
            Some(x) => {
                let loss = cost.values()[*x] + cur.kl[*x];
                *x = sample(cur.policy.kernel().row(*x).iter().copied(), &mut rng)?;
                Some(loss)
            }
            None => None,
        };
        let state_gap = cur.mu.iter().zip(&dist).map(|(a, b)| (a - b).abs()).sum();
        let policy_tau = mixing_time_from_alpha(ergodicity_coefficient(cur.policy.kernel())).unwrap_or(f64::INFINITY);

        let next_cbar = cbar.running_average(cost, t);
        let (_, next_sol) = ftl_policy_with(p, &next_cbar, &opts.solver, Some(&cur.sol.z))?;
        let next = Played::new(p, next_sol, opts.corrupt_at == Some(t + 1))?;

        records.push(RoundRecord {
            t,
            cost: cost.clone(),
            cbar: cbar.clone(),
            lambda: cur.sol.lambda,
            policy_change: cur.policy.max_row_l1(&next.policy),
            lemma4_bound: tau_ub / t as f64,
            idealized_loss,
            lookahead_loss: next.loss_under(&next.mu, cost),
            expected_true_loss,
            sampled_loss,
            state_gap,
            pmudiff_bound: pmudiff_bound(tau_ub, t),
            v_span: span(&cur.sol.v),
            max_control_cost: cur.kl.iter().copied().fold(0.0, f64::max),
            policy_tau,
            comparator_loss: 0.0,
            cum_idealized_regret: 0.0,
            cum_true_regret_proxy: 0.0,
        });

        dist = propagate(&dist, &cur.policy);
        cbar = next_cbar;
        cur = next;
    }

    let final_leader = cur.sol;
    let comparator = comparator_losses(p, &final_leader.policy, mu0, &costs)?;
    let mut ideal_sum = 0.0;
    let mut proxy_sum = 0.0;
    for i in 0..horizon {
        let next_lambda = if i + 1 < horizon { records[i + 1].lambda } else { final_leader.lambda };
        let r = &mut records[i];
        ideal_sum += r.idealized_loss;
        r.cum_idealized_regret = ideal_sum - (i + 1) as f64 * next_lambda;
        r.comparator_loss = comparator[i];
        proxy_sum += r.expected_true_loss - comparator[i];
        r.cum_true_regret_proxy = proxy_sum;
    }

    let placeholder = TraceSummary {
        idealized_regret: 0.0,
        true_regret_proxy: 0.0,
        comparator_value: 0.0,
        fullbound_value: 0.0,
        tau_ub,
        h_hit: diagnostics.h_hit,
        h_prim: diagnostics.h_prim,
        alpha: diagnostics.alpha,
        log_barrier: diagnostics.log_barrier,
        max_policy_tau: 0.0,
        total_expected_loss: 0.0,
        total_sampled_loss: None,
        ledger: Ledger::new(),
    };
    let mut trace = ExperimentTrace {
        instance: p.clone(),
        diagnostics,
        adversary: adversary.spec.clone(),
        horizon,
        mode,
        seed,
        mu0: mu0.to_vec(),
        records,
        final_leader,
        final_cbar: cbar,
        summary: placeholder,
    };
    trace.summary = summarize(&trace, p)?;
    Ok(trace)
}

fn summarize(trace: &ExperimentTrace, p: &PassiveDynamics) -> Result<TraceSummary> {
    let d = &trace.diagnostics;
    let (true_regret_proxy, comparator_value) = true_regret_proxy(trace, p, &trace.mu0)?;
    Ok(TraceSummary {
        idealized_regret: idealized_regret(trace, p)?,
        true_regret_proxy,
        comparator_value,
        fullbound_value: theoretical_bound(d.tau_ub, d.log_barrier, trace.horizon),
        tau_ub: d.tau_ub,
        h_hit: d.h_hit,
        h_prim: d.h_prim,
        alpha: d.alpha,
        log_barrier: d.log_barrier,
        max_policy_tau: trace.records.iter().map(|r| r.policy_tau).fold(0.0, f64::max),
        total_expected_loss: trace.records.iter().map(|r| r.expected_true_loss).sum(),
        total_sampled_loss: match trace.mode {
            Mode::MonteCarlo => Some(trace.records.iter().filter_map(|r| r.sampled_loss).sum()),
            Mode::Exact => None,
        },
        ledger: lemma_diagnostics(trace, p)?,
    })
}

fn sample(weights: impl Iterator<Item = f64>, rng: &mut impl rand::Rng) -> Result<usize> {
    let dist = WeightedIndex::new(weights)
        .map_err(|e| LmdpError::InvalidInput(format!("cannot sample from distribution: {e}")))?;
    Ok(dist.sample(rng))
}

/// `Σ_x p'_t(x) ℓ_t(x, Q)` for `p'_1 = mu0`, `p'_{t+1} = p'_t Q`.
fn comparator_losses(p: &PassiveDynamics, q: &Policy, mu0: &[f64], costs: &[StateCost]) -> Result<Vec<f64>> {
    let kl = control_costs(q, p)?;
    let mut dist = mu0.to_vec();
    let mut out = Vec::with_capacity(costs.len());
    for c in costs {
        out.push(dist.iter().zip(c.values()).zip(&kl).map(|((d, ci), k)| d * (ci + k)).sum());
        dist = propagate(&dist, q);
    }
    Ok(out)
}

fn final_leader_of(trace: &ExperimentTrace, p: &PassiveDynamics) -> Result<LmdpSolution> {
    let n = p.n();
    let mut cbar = StateCost::zeros(n);
    for r in &trace.records {
        cbar = cbar.running_average(&r.cost, r.t);
    }
    let solver = SolverSettings::default();
    solve_from(p, &cbar, solver.tol, solver.max_iters, Some(&trace.final_leader.z))
}

/// `Σ_t f(π_t; c_t) - T min_π f(π; c̄_{T+1})`.
pub fn idealized_regret(trace: &ExperimentTrace, p: &PassiveDynamics) -> Result<f64> {
    let leader = final_leader_of(trace, p)?;
    let total: f64 = trace.records.iter().map(|r| r.idealized_loss).sum();
    Ok(total - trace.records.len() as f64 * leader.lambda)
}

/// `(R_proxy, L_T(Q†))` with the final leader `Q† = Q*(c̄_{T+1})` as comparator.
pub fn true_regret_proxy(trace: &ExperimentTrace, p: &PassiveDynamics, mu0: &[f64]) -> Result<(f64, f64)> {
    check_distribution(mu0, p.n())?;
    let leader = final_leader_of(trace, p)?;
    let costs: Vec<StateCost> = trace.records.iter().map(|r| r.cost.clone()).collect();
    let comparator: f64 = comparator_losses(p, &leader.policy, mu0, &costs)?.iter().sum();
    let learner: f64 = trace.records.iter().map(|r| r.expected_true_loss).sum();
    Ok((learner - comparator, comparator))
}

/// Checks every inequality of the regret analysis on a finished trace.
///
/// `τ` and the hitting-time constant are replaced by the upper bounds
/// computed from `p`, which keeps every inequality valid.
pub fn lemma_diagnostics(trace: &ExperimentTrace, p: &PassiveDynamics) -> Result<Ledger> {
    let d = analyze(p).map_err(assumption_error)?;
    let tau = d.tau_ub;
    let h = d.h_hit;
    let horizon = trace.records.len();
    let l = (horizon.max(1) as f64).ln();
    let recs = &trace.records;
    let mut ledger = Ledger::new();
    let mut put = |name: &str, entry: LedgerEntry| {
        ledger.insert(name.to_string(), entry);
    };

    put(
        "lemma4_policy_change",
        LedgerEntry::from_slacks(recs.iter().map(|r| tau / r.t as f64 - r.policy_change), LEDGER_TOL),
    );

    let leader = final_leader_of(trace, p)?;
    let lookahead: f64 = recs.iter().map(|r| r.lookahead_loss).sum();
    put(
        "lemma5_be_the_leader",
        LedgerEntry::from_slacks(
            [horizon as f64 * leader.lambda - lookahead],
            BTL_TOL_PER_ROUND * horizon as f64,
        ),
    );

    let one_step: f64 = recs.iter().map(|r| r.idealized_loss - r.lookahead_loss).sum();
    put(
        "lemma6_one_step_lookahead",
        LedgerEntry::from_slacks([2.0 * (tau * tau + 1.0) * (1.0 + l) - one_step], LEDGER_TOL),
    );

    put(
        "lemma1_value_span",
        LedgerEntry::from_slacks(recs.iter().map(|r| h - r.v_span), LEDGER_TOL),
    );
    put(
        "lemma1_control_cost",
        LedgerEntry::from_slacks(recs.iter().map(|r| h + 1.0 - r.max_control_cost), LEDGER_TOL),
    );
    put(
        "lemma2_policy_mixing",
        LedgerEntry::from_slacks(recs.iter().map(|r| tau - r.policy_tau), LEDGER_TOL),
    );

    put(
        "pmudiff_state_gap",
        LedgerEntry::from_slacks(recs.iter().map(|r| pmudiff_bound(tau, r.t) - r.state_gap), LEDGER_TOL),
    );

    let excess: f64 = recs.iter().map(|r| r.expected_true_loss - r.idealized_loss).sum();
    let lemma9 = (tau + 1.0).powi(3) * (1.0 + l).powi(2) + 2.0 * (tau + 1.0) * (3.0 + l);
    put("lemma9_true_loss", LedgerEntry::from_slacks([lemma9 - excess], LEDGER_TOL));

    let ideal = idealized_regret(trace, p)?;
    let lemma7 = 2.0 * (tau * tau + 1.0) * (1.0 + l);
    put(
        "lemma7_idealized_regret",
        LedgerEntry::from_slacks([lemma7 - ideal, ideal], LEDGER_TOL * horizon as f64),
    );

    let (proxy, _) = true_regret_proxy(trace, p, &trace.mu0)?;
    let comparator_slack = (2.0 * tau + 2.0) * (d.log_barrier + 1.0);
    put(
        "theorem1_regret",
        LedgerEntry::from_slacks(
            [theoretical_bound(tau, d.log_barrier, horizon) - (proxy + comparator_slack)],
            LEDGER_TOL,
        ),
    );
    Ok(ledger)
}
