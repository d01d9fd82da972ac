//! The convex formulation: optimal control as minimization of `f(π; c)`
//! over stationary transition measures `π` on state pairs.
//!
//! `f(π; c) = Σ π(x,x') (c(x) + log(π(x,x') / (P(x'|x) μ(x))))` with
//! `μ(x) = Σ_y π(x,y)`. The feasible set is the flow polytope of
//! nonnegative, normalized measures with matching row and column marginals
//! and no mass off the support of `P`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chain::stationary_distribution;
use crate::cycle::min_mean_cycle;
use crate::dynamics::{PassiveDynamics, Policy, StateCost, ZERO_MASS};
use crate::error::{LmdpError, Result};

/// Tolerance for the normalization and flow constraints of a measure.
pub const MEASURE_TOL: f64 = 1e-10;

/// A distribution over state pairs with equal row and column marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryTransitionMeasure {
    pi: DMatrix<f64>,
    mu: Vec<f64>,
}

impl StationaryTransitionMeasure {
    /// Checks nonnegativity, normalization and flow conservation.
    pub fn new(pi: DMatrix<f64>) -> Result<Self> {
        let n = pi.nrows();
        if pi.ncols() != n {
            return Err(LmdpError::InvalidInput("measure must be square".into()));
        }
        if let Some(v) = pi.iter().find(|v| !(**v >= 0.0)) {
            return Err(LmdpError::InvalidInput(format!("measure has negative entry {v}")));
        }
        let total = pi.sum();
        if (total - 1.0).abs() > MEASURE_TOL {
            return Err(LmdpError::InvalidInput(format!("measure sums to {total}")));
        }
        let flow = flow_violation(&pi);
        if flow > MEASURE_TOL {
            return Err(LmdpError::InvalidInput(format!(
                "row and column marginals differ by {flow:e}"
            )));
        }
        Ok(Self::from_matrix(pi))
    }

    fn from_matrix(pi: DMatrix<f64>) -> Self {
        let mu = (0..pi.nrows()).map(|x| pi.row(x).sum()).collect();
        Self { pi, mu }
    }

    pub fn n(&self) -> usize {
        self.pi.nrows()
    }

    pub fn pi(&self) -> &DMatrix<f64> {
        &self.pi
    }

    /// Row marginal `μ(x) = Σ_y π(x,y)`.
    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    /// `θ self + (1-θ) other`.
    pub fn mix(&self, other: &Self, theta: f64) -> Self {
        Self::from_matrix(&self.pi * theta + &other.pi * (1.0 - theta))
    }
}

fn flow_violation(pi: &DMatrix<f64>) -> f64 {
    (0..pi.nrows())
        .map(|x| (pi.row(x).sum() - pi.column(x).sum()).abs())
        .fold(0.0, f64::max)
}

/// `π_Q(x,x') = μ_Q(x) Q(x'|x)`.
pub fn measure_from_policy(p: &PassiveDynamics, q: &Policy) -> Result<StationaryTransitionMeasure> {
    check_policy_support(p, q)?;
    let mu = stationary_distribution(q.kernel())?;
    Ok(measure_with_stationary(q, &mu))
}

/// Builds `π_Q` from an already computed stationary distribution of `q`.
pub(crate) fn measure_with_stationary(q: &Policy, mu: &[f64]) -> StationaryTransitionMeasure {
    let n = q.n();
    let pi = DMatrix::from_fn(n, n, |x, y| mu[x] * q.kernel()[(x, y)]);
    StationaryTransitionMeasure {
        pi,
        mu: mu.to_vec(),
    }
}

fn check_policy_support(p: &PassiveDynamics, q: &Policy) -> Result<()> {
    if q.n() != p.n() {
        return Err(LmdpError::InvalidInput("policy and dynamics sizes differ".into()));
    }
    for x in 0..p.n() {
        for y in 0..p.n() {
            if q.support()[(x, y)] && !p.support()[(x, y)] {
                return Err(LmdpError::SupportViolation {
                    row: x,
                    col: y,
                    mass: q.kernel()[(x, y)],
                });
            }
        }
    }
    Ok(())
}

/// `(μ, Q)` with `Q(x'|x) = π(x,x')/μ(x)`.
pub fn policy_from_measure(m: &StationaryTransitionMeasure) -> Result<(Vec<f64>, Policy)> {
    if let Some(state) = m.mu.iter().position(|&mu| mu <= ZERO_MASS) {
        return Err(LmdpError::ZeroMarginal { state });
    }
    let n = m.n();
    let q = DMatrix::from_fn(n, n, |x, y| m.pi[(x, y)] / m.mu[x]);
    Ok((m.mu.clone(), Policy::from_normalized(q)))
}

/// `f(π; c)`; affine in `c`, convex in `π`.
pub fn objective_f(m: &StationaryTransitionMeasure, c: &StateCost, p: &PassiveDynamics) -> Result<f64> {
    let n = m.n();
    if c.len() != n || p.n() != n {
        return Err(LmdpError::InvalidInput("measure, cost and dynamics sizes differ".into()));
    }
    let k = p.kernel();
    let mut total = 0.0;
    for x in 0..n {
        let cx = c.values()[x];
        for y in 0..n {
            let mass = m.pi[(x, y)];
            if mass <= ZERO_MASS {
                continue;
            }
            if k[(x, y)] <= 0.0 {
                return Err(LmdpError::SupportViolation { row: x, col: y, mass });
            }
            total += mass * (cx + (mass / (k[(x, y)] * m.mu[x])).ln());
        }
    }
    Ok(total)
}

/// Largest violation among normalization, flow, nonnegativity and support constraints.
pub fn feasibility_residual(pi: &DMatrix<f64>, p: &PassiveDynamics) -> f64 {
    let normalization = (pi.sum() - 1.0).abs();
    let flow = flow_violation(pi);
    let negativity = pi.iter().map(|v| (-v).max(0.0)).fold(0.0, f64::max);
    let off_support = pi
        .iter()
        .zip(p.support().iter())
        .filter(|(_, s)| !**s)
        .map(|(v, _)| v.abs())
        .fold(0.0, f64::max);
    normalization.max(flow).max(negativity).max(off_support)
}

/// Outcome of the Frank–Wolfe minimization of `f(·; c)`.
#[derive(Debug, Clone)]
pub struct FrankWolfeResult {
    pub measure: StationaryTransitionMeasure,
    pub value: f64,
    /// Duality gap at the returned iterate; upper-bounds `value - min f`.
    pub gap: f64,
    pub iterations: usize,
    /// Best objective seen after each iteration.
    pub best_history: Vec<f64>,
}

/// Gradient of `f(·; c)` on the support: `c(x) + log(π(x,y)/μ(x)) - log P(y|x)`.
fn gradient(m: &StationaryTransitionMeasure, c: &StateCost, p: &PassiveDynamics) -> DMatrix<f64> {
    let n = m.n();
    let k = p.kernel();
    DMatrix::from_fn(n, n, |x, y| {
        if p.support()[(x, y)] {
            c.values()[x] + (m.pi[(x, y)] / m.mu[x]).ln() - k[(x, y)].ln()
        } else {
            0.0
        }
    })
}

/// Frank–Wolfe on the flow polytope, started from the passive measure, with
/// the minimum-mean-cycle linear oracle and step `2/(k+2)` for `k = 1, 2, …`.
pub fn minimize_f(
    p: &PassiveDynamics,
    c: &StateCost,
    tol: f64,
    max_iters: usize,
) -> Result<FrankWolfeResult> {
    if c.len() != p.n() {
        return Err(LmdpError::InvalidInput("cost and dynamics sizes differ".into()));
    }
    let n = p.n();
    let mut current = measure_from_policy(p, &Policy::passive(p))?;
    let mut value = objective_f(&current, c, p)?;
    let mut best = value;
    let mut best_history = Vec::new();
    let mut gap = f64::INFINITY;
    for k in 1..=max_iters {
        let grad = gradient(&current, c, p);
        let vertex = min_mean_cycle(&grad, p.support())?;
        let inner: f64 = current.pi.iter().zip(grad.iter()).map(|(a, b)| a * b).sum();
        gap = inner - vertex.mean;
        if gap <= tol {
            return Ok(FrankWolfeResult {
                measure: current,
                value,
                gap,
                iterations: k - 1,
                best_history,
            });
        }
        let step = 2.0 / (k as f64 + 2.0);
        let target = vertex.measure(n);
        current = StationaryTransitionMeasure::from_matrix(&current.pi * (1.0 - step) + target * step);
        value = objective_f(&current, c, p)?;
        best = best.min(value);
        best_history.push(best);
    }
    Err(LmdpError::NonConvergence {
        iterations: max_iters,
        residual: gap,
        tol,
    })
}

/// Negative conditional entropy `R(π) = Σ π(x,y) log(π(x,y)/μ(x))`.
pub fn neg_conditional_entropy(m: &StationaryTransitionMeasure) -> f64 {
    let n = m.n();
    let mut total = 0.0;
    for x in 0..n {
        for y in 0..n {
            let mass = m.pi[(x, y)];
            if mass > ZERO_MASS {
                total += mass * (mass / m.mu[x]).ln();
            }
        }
    }
    total
}

/// Bregman divergence of `R` in closed form: `Σ_x μ'(x) KL(Q'(·|x) || Q(·|x))`.
pub fn bregman_negcondent(
    pi_prime: &StationaryTransitionMeasure,
    pi: &StationaryTransitionMeasure,
) -> Result<f64> {
    let n = pi.n();
    if pi_prime.n() != n {
        return Err(LmdpError::InvalidInput("measure sizes differ".into()));
    }
    let mut total = 0.0;
    for x in 0..n {
        for y in 0..n {
            let mass = pi_prime.pi[(x, y)];
            if mass <= ZERO_MASS {
                continue;
            }
            let reference = pi.pi[(x, y)];
            if reference <= ZERO_MASS {
                return Err(LmdpError::SupportViolation { row: x, col: y, mass });
            }
            let q_prime = mass / pi_prime.mu[x];
            let q = reference / pi.mu[x];
            total += mass * (q_prime / q).ln();
        }
    }
    Ok(total.max(0.0))
}

/// `½ Σ_x μ'(x) ||Q'(·|x) - Q(·|x)||_1²`, the Pinsker lower bound on the Bregman divergence.
pub fn pinsker_lower_bound(pi_prime: &StationaryTransitionMeasure, pi: &StationaryTransitionMeasure) -> f64 {
    let n = pi.n();
    (0..n)
        .filter(|&x| pi_prime.mu[x] > ZERO_MASS)
        .map(|x| {
            let l1: f64 = (0..n)
                .map(|y| {
                    let qp = pi_prime.pi[(x, y)] / pi_prime.mu[x];
                    let q = if pi.mu[x] > ZERO_MASS { pi.pi[(x, y)] / pi.mu[x] } else { 0.0 };
                    (qp - q).abs()
                })
                .sum();
            0.5 * pi_prime.mu[x] * l1 * l1
        })
        .sum()
}

/// Stationarity residual of the Lagrangian at `(π, v, λ)`.
///
/// `v` and `λ` are the value function and average cost of the eigen
/// formulation; the Lagrange multipliers are their negatives, so the
/// optimality condition reads `π(x,x')/μ(x) = P(x'|x) exp(λ - c(x) + v(x) - v(x'))`.
pub fn kkt_residual(
    m: &StationaryTransitionMeasure,
    c: &StateCost,
    v: &[f64],
    lambda: f64,
    p: &PassiveDynamics,
) -> f64 {
    let n = m.n();
    let k = p.kernel();
    let mut worst: f64 = 0.0;
    for x in 0..n {
        for y in 0..n {
            if !p.support()[(x, y)] {
                continue;
            }
            let conditional = if m.mu[x] > ZERO_MASS { m.pi[(x, y)] / m.mu[x] } else { 0.0 };
            let predicted = k[(x, y)] * (lambda - c.values()[x] + v[x] - v[y]).exp();
            worst = worst.max((conditional - predicted).abs());
        }
    }
    worst
}

/// Midpoint convexity gap `(f(a) + f(b))/2 - f((a+b)/2)`; nonnegative for convex `f`.
///
/// Reported by `verify` as a curvature diagnostic only.
pub fn midpoint_convexity_gap(
    a: &StationaryTransitionMeasure,
    b: &StationaryTransitionMeasure,
    c: &StateCost,
    p: &PassiveDynamics,
) -> Result<f64> {
    let mid = a.mix(b, 0.5);
    Ok(0.5 * (objective_f(a, c, p)? + objective_f(b, c, p)?) - objective_f(&mid, c, p)?)
}

/// Serializable view of a measure for reports.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeasureReport {
    pub pi: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
}

impl From<&StationaryTransitionMeasure> for MeasureReport {
    fn from(m: &StationaryTransitionMeasure) -> Self {
        Self {
            pi: crate::dynamics::matrix_to_rows(&m.pi),
            mu: m.mu.clone(),
        }
    }
}
