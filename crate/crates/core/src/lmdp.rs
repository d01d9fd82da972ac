//! Optimal control of a single linearly solvable MDP.
//!
//! The exponentiated value `z = exp(-v)` is the Perron vector of `G P` with
//! `G = diag(exp(-c))`; its eigenvalue is `exp(-λ)` where `λ` is the optimal
//! average cost. The solver runs power iteration with Euclidean
//! renormalization and stops once the Bellman residual drops below the
//! tolerance.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::dynamics::{kl_divergence, PassiveDynamics, Policy, StateCost};
use crate::error::{LmdpError, Result};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

/// Stopping rule for the power iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

/// Optimal average cost, value function and policy for one state cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmdpSolution {
    pub lambda: f64,
    /// Perron vector, unit Euclidean norm.
    pub z: Vec<f64>,
    /// `-log z`, shifted so that `v[0] = 0`.
    pub v: Vec<f64>,
    pub policy: Policy,
    pub iterations: usize,
    pub residual: f64,
}

fn check_shapes(p: &PassiveDynamics, c: &StateCost) -> Result<()> {
    if c.len() != p.n() {
        return Err(LmdpError::InvalidInput(format!(
            "state cost has {} entries, dynamics has {} states",
            c.len(),
            p.n()
        )));
    }
    Ok(())
}

/// Solves for the Perron pair of `diag(exp(-c)) P` starting from the all-ones vector.
pub fn solve(p: &PassiveDynamics, c: &StateCost, tol: f64, max_iters: usize) -> Result<LmdpSolution> {
    solve_from(p, c, tol, max_iters, None)
}

/// Like [`solve`] but warm-started from `init` when it is strictly positive.
pub fn solve_from(
    p: &PassiveDynamics,
    c: &StateCost,
    tol: f64,
    max_iters: usize,
    init: Option<&[f64]>,
) -> Result<LmdpSolution> {
    check_shapes(p, c)?;
    if !(tol > 0.0) {
        return Err(LmdpError::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let n = p.n();
    let gain = c.as_vector().map(|ci| (-ci).exp());

    let mut z = match init {
        Some(z0) if z0.len() == n && z0.iter().all(|&v| v > 0.0 && v.is_finite()) => {
            DVector::from_column_slice(z0)
        }
        _ => DVector::from_element(n, 1.0),
    };
    z /= z.norm();

    let mut residual = f64::INFINITY;
    for iteration in 0..=max_iters {
        let pz = p.kernel() * &z;
        let next = pz.component_mul(&gain);
        let rho = z.dot(&next);
        if !(rho > 0.0) {
            return Err(LmdpError::NonErgodic(
                "power iteration collapsed to a zero eigenvalue".into(),
            ));
        }
        // z(x) - exp(λ - c(x)) (Pz)(x) = z(x) - next(x) / rho
        let scale = z.amax();
        residual = z
            .iter()
            .zip(next.iter())
            .map(|(zi, ni)| (zi - ni / rho).abs())
            .fold(0.0, f64::max)
            / scale;
        if residual <= tol {
            return finish(p, z, -rho.ln(), iteration, residual);
        }
        if iteration == max_iters {
            break;
        }
        let norm = next.norm();
        z = next / norm;
    }
    Err(LmdpError::NonConvergence {
        iterations: max_iters,
        residual,
        tol,
    })
}

fn finish(
    p: &PassiveDynamics,
    z: DVector<f64>,
    lambda: f64,
    iterations: usize,
    residual: f64,
) -> Result<LmdpSolution> {
    let z: Vec<f64> = z.iter().copied().collect();
    let v0 = -z[0].ln();
    let v = z.iter().map(|zi| -zi.ln() - v0).collect();
    let policy = optimal_policy(p, &z)?;
    Ok(LmdpSolution {
        lambda,
        z,
        v,
        policy,
        iterations,
        residual,
    })
}

/// `Q(x'|x) = P(x'|x) z(x') / Σ_y P(y|x) z(y)`. Entries off the support of `P` are exactly zero.
pub fn optimal_policy(p: &PassiveDynamics, z: &[f64]) -> Result<Policy> {
    if z.len() != p.n() {
        return Err(LmdpError::InvalidInput(format!(
            "z has {} entries, dynamics has {} states",
            z.len(),
            p.n()
        )));
    }
    if let Some((x, v)) = z.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(LmdpError::InvalidInput(format!(
            "z must be strictly positive, z[{x}] = {v}"
        )));
    }
    let mut q = p.kernel().clone();
    for x in 0..p.n() {
        let mut row = q.row_mut(x);
        for (y, entry) in row.iter_mut().enumerate() {
            *entry *= z[y];
        }
        let total: f64 = row.iter().sum();
        row /= total;
    }
    Ok(Policy::from_normalized(q))
}

/// `c(x) + KL(Q(.|x) || P(.|x))`.
pub fn step_loss(c: &StateCost, p: &PassiveDynamics, q: &Policy, x: usize) -> Result<f64> {
    let kl = kl_divergence(&q.row(x), &p.row(x)).map_err(|e| match e {
        LmdpError::SupportViolation { col, mass, .. } => LmdpError::SupportViolation { row: x, col, mass },
        other => other,
    })?;
    Ok(c.values()[x] + kl)
}

/// `max_x |z(x) - exp(λ - c(x)) Σ P(x'|x) z(x')| / ||z||_∞`.
pub fn bellman_residual(p: &PassiveDynamics, c: &StateCost, sol: &LmdpSolution) -> f64 {
    residual_of(p, c, &sol.z, sol.lambda)
}

pub fn residual_of(p: &PassiveDynamics, c: &StateCost, z: &[f64], lambda: f64) -> f64 {
    let zv = DVector::from_column_slice(z);
    let pz = p.kernel() * &zv;
    let scale = zv.amax();
    (0..p.n())
        .map(|x| (z[x] - (lambda - c.values()[x]).exp() * pz[x]).abs())
        .fold(0.0, f64::max)
        / scale
}
