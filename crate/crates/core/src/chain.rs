//! Markov-chain diagnostics: stationary distributions, the Markov–Dobrushin
//! ergodicity coefficient, mixing times, primitivity and hitting times, and
//! the worst-case mixing bound over all optimal policies.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::PassiveDynamics;
use crate::error::{LmdpError, Result};

/// Above this size the stationary distribution is found by power iteration.
pub const DIRECT_SOLVE_MAX_N: usize = 64;

/// Summary of the mixing properties of a kernel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub alpha: f64,
    pub tau: f64,
    pub h_prim: usize,
    pub h_hit: f64,
    pub stationary: Vec<f64>,
    /// Smallest nonzero transition probability.
    pub p_star: f64,
    #[serde(rename = "B")]
    pub log_barrier: f64,
    pub alpha_ub: f64,
    pub tau_ub: f64,
}

/// Computes every diagnostic; fails when either standing assumption is violated.
pub fn analyze(p: &PassiveDynamics) -> Result<ChainDiagnostics> {
    let h_prim = primitivity_index(p)?;
    let alpha = ergodicity_coefficient(p.kernel());
    let tau = mixing_time_from_alpha(alpha)?;
    let h_hit = max_expected_hitting_time(p)?;
    let (alpha_ub, tau_ub) = tau_upper_bound_from(alpha, h_hit)?;
    let stationary = stationary_of_primitive(p.kernel())?;
    Ok(ChainDiagnostics {
        alpha,
        tau,
        h_prim,
        h_hit,
        stationary,
        p_star: p.p_star(),
        log_barrier: p.log_barrier(),
        alpha_ub,
        tau_ub,
    })
}

/// Irreducibility/aperiodicity and ergodicity status, reported without failing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionStatus {
    pub primitive: bool,
    pub h_prim: Option<usize>,
    pub alpha: f64,
    pub ergodic: bool,
}

impl AssumptionStatus {
    pub fn holds(&self) -> bool {
        self.primitive && self.ergodic
    }
}

pub fn assumption_status(p: &PassiveDynamics) -> AssumptionStatus {
    let h_prim = primitivity_index(p).ok();
    let alpha = ergodicity_coefficient(p.kernel());
    AssumptionStatus {
        primitive: h_prim.is_some(),
        h_prim,
        alpha,
        ergodic: alpha < 1.0,
    }
}

/// The unique `μ` with `μᵀK = μᵀ`, checked for primitivity of the support first.
pub fn stationary_distribution(k: &DMatrix<f64>) -> Result<Vec<f64>> {
    if primitivity_of_support(&k.map(|v| v > 0.0)).is_none() {
        return Err(LmdpError::NonErgodic(
            "kernel support is reducible or periodic".into(),
        ));
    }
    stationary_of_primitive(k)
}

/// Stationary distribution of a kernel already known to be primitive.
pub(crate) fn stationary_of_primitive(k: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = k.nrows();
    let mu = if n <= DIRECT_SOLVE_MAX_N {
        // (Kᵀ - I) μ = 0 with the last equation replaced by Σ μ = 1
        let mut a = k.transpose() - DMatrix::identity(n, n);
        for j in 0..n {
            a[(n - 1, j)] = 1.0;
        }
        let mut b = DVector::zeros(n);
        b[n - 1] = 1.0;
        a.lu()
            .solve(&b)
            .ok_or_else(|| LmdpError::NonErgodic("stationary system is singular".into()))?
    } else {
        stationary_by_power(k)?
    };
    if mu.iter().any(|&m| !m.is_finite() || m < -1e-12) {
        return Err(LmdpError::NonErgodic(
            "stationary solution is not a positive distribution".into(),
        ));
    }
    let mu = mu.map(|m| m.max(0.0));
    let total = mu.sum();
    Ok(mu.iter().map(|m| m / total).collect())
}

fn stationary_by_power(k: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = k.nrows();
    let mut mu = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..1_000_000 {
        let next = k.tr_mul(&mu);
        let diff = (&next - &mu).lp_norm(1);
        mu = next;
        if diff <= 1e-14 {
            return Ok(mu);
        }
    }
    Err(LmdpError::NonErgodic(
        "power iteration for the stationary distribution did not settle".into(),
    ))
}

/// `1 - min_{x,y} Σ_s min(K(s|x), K(s|y))`.
pub fn ergodicity_coefficient(k: &DMatrix<f64>) -> f64 {
    let n = k.nrows();
    let mut min_overlap: f64 = 1.0;
    for x in 0..n {
        for y in (x + 1)..n {
            let overlap: f64 = (0..n).map(|s| k[(x, s)].min(k[(y, s)])).sum();
            min_overlap = min_overlap.min(overlap);
        }
    }
    (1.0 - min_overlap).clamp(0.0, 1.0)
}

/// `1 / log(1/α(K))`.
pub fn mixing_time(k: &DMatrix<f64>) -> Result<f64> {
    mixing_time_from_alpha(ergodicity_coefficient(k))
}

pub fn mixing_time_from_alpha(alpha: f64) -> Result<f64> {
    if alpha >= 1.0 {
        return Err(LmdpError::NonErgodic(format!(
            "ergodicity coefficient {alpha} is not below 1"
        )));
    }
    if alpha <= 0.0 {
        return Ok(0.0);
    }
    Ok(1.0 / (1.0 / alpha).ln())
}

fn bool_mul(a: &DMatrix<bool>, b: &DMatrix<bool>) -> DMatrix<bool> {
    let n = a.nrows();
    DMatrix::from_fn(n, n, |i, j| (0..n).any(|s| a[(i, s)] && b[(s, j)]))
}

/// Smallest `H` such that the support of `B^m` is all-true for every `m` in `[H, (n-1)^2 + 1]`.
fn primitivity_of_support(b: &DMatrix<bool>) -> Option<usize> {
    let n = b.nrows();
    let wielandt = (n - 1) * (n - 1) + 1;
    let mut power = b.clone();
    let mut first_positive = None;
    for m in 1..=wielandt {
        if m > 1 {
            power = bool_mul(&power, b);
        }
        let positive = power.iter().all(|&v| v);
        match (positive, first_positive) {
            (true, None) => first_positive = Some(m),
            (false, Some(_)) => first_positive = None,
            _ => {}
        }
    }
    first_positive
}

/// Smallest `H` with `P^m` entrywise positive for all `m ≥ H`.
pub fn primitivity_index(p: &PassiveDynamics) -> Result<usize> {
    primitivity_of_support(p.support()).ok_or(LmdpError::NotPrimitive)
}

/// Worst expected first-passage time `max_{x≠y} E[steps to reach y from x]`.
pub fn max_expected_hitting_time(p: &PassiveDynamics) -> Result<f64> {
    let n = p.n();
    if n == 1 {
        return Ok(0.0);
    }
    let k = p.kernel();
    let mut worst: f64 = 0.0;
    for target in 0..n {
        let others: Vec<usize> = (0..n).filter(|&x| x != target).collect();
        let m = others.len();
        // (I - P restricted to non-target states) h = 1
        let a = DMatrix::from_fn(m, m, |i, j| {
            let delta = if i == j { 1.0 } else { 0.0 };
            delta - k[(others[i], others[j])]
        });
        let h = a
            .lu()
            .solve(&DVector::from_element(m, 1.0))
            .ok_or_else(|| {
                LmdpError::NonErgodic(format!("state {target} is unreachable from some state"))
            })?;
        if h.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(LmdpError::NonErgodic(format!(
                "hitting-time system for state {target} has no valid solution"
            )));
        }
        worst = worst.max(h.max());
    }
    Ok(worst)
}

/// `(α_ub, τ_ub)` with `α_ub = α + (1-α)(1 - e^{-H-2})`.
///
/// `τ_ub` is computed from the gap `1 - α_ub = (1-α) e^{-H-2}` so that it
/// stays finite when `α_ub` rounds to 1.
pub fn tau_upper_bound_from(alpha: f64, h: f64) -> Result<(f64, f64)> {
    let gap = (1.0 - alpha) * (-h - 2.0).exp();
    if !(gap > 0.0) {
        return Err(LmdpError::NonErgodic(format!(
            "mixing bound degenerates (alpha = {alpha}, H = {h})"
        )));
    }
    let alpha_ub = 1.0 - gap;
    let tau_ub = -1.0 / (-gap).ln_1p();
    Ok((alpha_ub, tau_ub))
}

/// Mixing-time bound valid for every optimal policy of a cost in `[0,1]^n`,
/// using the expected hitting time for `H`.
pub fn tau_upper_bound(p: &PassiveDynamics) -> Result<f64> {
    let alpha = ergodicity_coefficient(p.kernel());
    let h = max_expected_hitting_time(p)?;
    tau_upper_bound_from(alpha, h).map(|(_, tau)| tau)
}
