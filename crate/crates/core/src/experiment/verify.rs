use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::stream_rng;
use crate::chain::{analyze, assumption_status, ergodicity_coefficient, AssumptionStatus, ChainDiagnostics};
use crate::convex::{kkt_residual, measure_from_policy, midpoint_convexity_gap, minimize_f};
use crate::dynamics::{control_costs, span, PassiveDynamics, StateCost};
use crate::error::Result;
use crate::lmdp::{solve, SolverSettings};

/// Slack allowed on inequalities that hold exactly in theory.
pub const CHECK_TOL: f64 = 1e-9;
/// Bound on the KKT residual of the eigen solution.
pub const KKT_TOL: f64 = 1e-8;
const VERIFY_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    /// Random costs for the per-cost checks, and random pairs for the sensitivity check.
    pub samples: usize,
    pub seed: u64,
    pub oracle_tol: f64,
    pub solver: SolverSettings,
    pub fw_max_iters: usize,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            samples: 20,
            seed: 0,
            oracle_tol: 1e-3,
            solver: SolverSettings::default(),
            fw_max_iters: 200_000,
        }
    }
}

/// One checked inequality `value ≤ bound`, worst case over its samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub bound: f64,
}

impl Check {
    fn le(name: &str, value: f64, bound: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            pass: value <= bound + tol,
            value,
            bound,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub assumptions: AssumptionStatus,
    pub diagnostics: Option<ChainDiagnostics>,
    pub lambda_eigen: Option<f64>,
    pub lambda_convex: Option<f64>,
    pub checks: Vec<Check>,
    /// Smallest midpoint convexity gap of `f` seen; informational only.
    pub convexity_probe: Option<f64>,
    pub pass: bool,
}

impl VerifyReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let a = &self.assumptions;
        let _ = writeln!(s, "primitive (irreducible, aperiodic): {}", a.primitive);
        let _ = writeln!(s, "ergodicity coefficient < 1: {} (alpha = {})", a.ergodic, a.alpha);
        if let Some(d) = &self.diagnostics {
            let _ = writeln!(s, "alpha = {}", d.alpha);
            let _ = writeln!(s, "tau = {}", d.tau);
            let _ = writeln!(s, "tau_ub = {}", d.tau_ub);
            let _ = writeln!(s, "h_prim = {}", d.h_prim);
            let _ = writeln!(s, "h_hit = {}", d.h_hit);
            let _ = writeln!(s, "B = {}", d.log_barrier);
        }
        if let (Some(e), Some(c)) = (self.lambda_eigen, self.lambda_convex) {
            let _ = writeln!(s, "lambda eigen = {e}, convex = {c}");
        }
        for c in &self.checks {
            let _ = writeln!(
                s,
                "[{}] {}: {} <= {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.bound
            );
        }
        if let Some(g) = self.convexity_probe {
            let _ = writeln!(s, "midpoint convexity gap (min) = {g}");
        }
        let _ = writeln!(s, "overall: {}", if self.pass { "PASS" } else { "FAIL" });
        s
    }
}

fn random_cost(n: usize, rng: &mut impl Rng) -> StateCost {
    StateCost::new((0..n).map(|_| rng.gen::<f64>()).collect()).expect("uniform draws lie in [0, 1)")
}

/// Checks the standing assumptions, the agreement of the two solvers on
/// `cost` (random when absent), and the value, policy and sensitivity
/// bounds on sampled costs.
pub fn verify(p: &PassiveDynamics, cost: Option<&StateCost>, opts: &VerifyOptions) -> Result<VerifyReport> {
    let assumptions = assumption_status(p);
    let mut checks = vec![Check {
        name: "assumptions".into(),
        pass: assumptions.holds(),
        value: assumptions.alpha,
        bound: 1.0,
    }];
    if !assumptions.holds() {
        return Ok(VerifyReport {
            assumptions,
            diagnostics: None,
            lambda_eigen: None,
            lambda_convex: None,
            checks,
            convexity_probe: None,
            pass: false,
        });
    }
    let d = analyze(p)?;
    let n = p.n();
    let mut rng = stream_rng(opts.seed, VERIFY_STREAM);
    let c = match cost {
        Some(c) => c.clone(),
        None => random_cost(n, &mut rng),
    };
    let s = &opts.solver;

    let sol = solve(p, &c, s.tol, s.max_iters)?;
    let fw = minimize_f(p, &c, opts.oracle_tol, opts.fw_max_iters)?;
    checks.push(Check::le("lambda_agreement", (sol.lambda - fw.value).abs(), opts.oracle_tol, 0.0));
    let m = measure_from_policy(p, &sol.policy)?;
    checks.push(Check::le("kkt_residual", kkt_residual(&m, &c, &sol.v, sol.lambda, p), KKT_TOL, 0.0));

    let mut span_worst: f64 = 0.0;
    let mut kl_worst: f64 = 0.0;
    let mut alpha_worst: f64 = 0.0;
    let mut solutions = Vec::with_capacity(opts.samples + 1);
    for k in 0..opts.samples {
        let ck = if k == 0 { c.clone() } else { random_cost(n, &mut rng) };
        let sk = solve(p, &ck, s.tol, s.max_iters)?;
        span_worst = span_worst.max(span(&sk.v));
        kl_worst = kl_worst.max(control_costs(&sk.policy, p)?.into_iter().fold(0.0, f64::max));
        alpha_worst = alpha_worst.max(ergodicity_coefficient(sk.policy.kernel()));
        solutions.push((ck, sk));
    }
    checks.push(Check::le("lemma1_value_span", span_worst, d.h_hit, CHECK_TOL));
    checks.push(Check::le("lemma1_control_cost", kl_worst, d.h_hit + 1.0, CHECK_TOL));
    checks.push(Check::le("lemma2_policy_alpha", alpha_worst, d.alpha_ub, CHECK_TOL));

    // tightest pair for span(v_f - v_g) ≤ 2 τ_ub ||f - g||_∞; the first pair is (c, c)
    let mut sens_bound_gap: f64 = f64::INFINITY;
    let mut worst_pair = (0.0, 0.0);
    for k in 0..opts.samples {
        let (f, sf) = &solutions[k];
        let other = if k == 0 { k } else { (k * 7 + 3) % solutions.len() };
        let (g, sg) = &solutions[other];
        let diff: Vec<f64> = sf.v.iter().zip(&sg.v).map(|(a, b)| a - b).collect();
        let lhs = span(&diff);
        let sup = f.values().iter().zip(g.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let rhs = 2.0 * d.tau_ub * sup;
        if rhs - lhs < sens_bound_gap {
            sens_bound_gap = rhs - lhs;
            worst_pair = (lhs, rhs);
        }
    }
    if opts.samples > 0 {
        checks.push(Check::le("lemma3_value_sensitivity", worst_pair.0, worst_pair.1, CHECK_TOL));
    }

    let mut probe: Option<f64> = None;
    for pair in solutions.windows(2) {
        let a = measure_from_policy(p, &pair[0].1.policy)?;
        let b = measure_from_policy(p, &pair[1].1.policy)?;
        let gap = midpoint_convexity_gap(&a, &b, &c, p)?;
        probe = Some(probe.map_or(gap, |g| g.min(gap)));
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        assumptions,
        diagnostics: Some(d),
        lambda_eigen: Some(sol.lambda),
        lambda_convex: Some(fw.value),
        checks,
        convexity_probe: probe,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_instance_passes() {
        let p = PassiveDynamics::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let c = StateCost::new(vec![0.0, 1.0]).unwrap();
        let report = verify(&p, Some(&c), &VerifyOptions::default()).unwrap();
        assert!(report.pass, "{}", report.render());
        assert!((report.lambda_eigen.unwrap() - 0.379_885_493_041_722_5).abs() < 1e-10);
        let sens = report.checks.iter().find(|c| c.name == "lemma3_value_sensitivity").unwrap();
        assert!(sens.value.abs() < 1e-12);
    }

    #[test]
    fn identity_kernel_reports_failure() {
        let p = PassiveDynamics::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let report = verify(&p, None, &VerifyOptions::default()).unwrap();
        assert!(!report.pass);
        assert!(!report.assumptions.ergodic);
        assert!(report.render().contains("FAIL"));
    }
}
