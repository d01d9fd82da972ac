//! Kernels, state costs and policies over a finite state space.
//!
//! Matrices are indexed `[(from, to)]`; row `x` is the next-state
//! distribution out of state `x`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{LmdpError, Result};

/// Row sums must match 1 to this precision.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Probabilities at or below this are treated as exact zeros in `0 log 0` terms.
pub const ZERO_MASS: f64 = 1e-300;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct KernelRepr {
    kernel: Vec<Vec<f64>>,
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(LmdpError::InvalidInput("kernel has no rows".into()));
    }
    if let Some((x, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(LmdpError::InvalidInput(format!(
            "kernel row {x} has {} entries, expected {n}",
            r.len()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

fn check_stochastic(kernel: &DMatrix<f64>, what: &str) -> Result<()> {
    if kernel.nrows() != kernel.ncols() {
        return Err(LmdpError::InvalidInput(format!("{what} is not square")));
    }
    for x in 0..kernel.nrows() {
        let row = kernel.row(x);
        if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(LmdpError::InvalidInput(format!(
                "{what} row {x} has entry {v} outside [0, 1]"
            )));
        }
        let sum: f64 = row.iter().sum();
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(LmdpError::InvalidInput(format!(
                "{what} row {x} sums to {sum}, not 1"
            )));
        }
    }
    Ok(())
}

/// The uncontrolled dynamics `P` of the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct PassiveDynamics {
    kernel: DMatrix<f64>,
    support: DMatrix<bool>,
    p_star: f64,
}

impl PassiveDynamics {
    /// Validates a row-stochastic kernel and records its support.
    pub fn new(kernel: DMatrix<f64>) -> Result<Self> {
        check_stochastic(&kernel, "passive dynamics")?;
        let support = kernel.map(|p| p > 0.0);
        let p_star = kernel
            .iter()
            .copied()
            .filter(|&p| p > 0.0)
            .fold(f64::INFINITY, f64::min);
        Ok(Self {
            kernel,
            support,
            p_star,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn n(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn support(&self) -> &DMatrix<bool> {
        &self.support
    }

    /// Smallest nonzero transition probability.
    pub fn p_star(&self) -> f64 {
        self.p_star
    }

    /// `B = -log p*`.
    pub fn log_barrier(&self) -> f64 {
        -self.p_star.ln()
    }

    pub fn row(&self, x: usize) -> Vec<f64> {
        self.kernel.row(x).iter().copied().collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.kernel)
    }
}

impl TryFrom<KernelRepr> for PassiveDynamics {
    type Error = LmdpError;
    fn try_from(r: KernelRepr) -> Result<Self> {
        Self::from_rows(&r.kernel)
    }
}

impl From<PassiveDynamics> for KernelRepr {
    fn from(p: PassiveDynamics) -> Self {
        KernelRepr {
            kernel: p.to_rows(),
        }
    }
}

/// A state-cost function with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct StateCost(Vec<f64>);

impl StateCost {
    /// Out-of-range values are rejected, never clamped.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((x, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(LmdpError::InvalidInput(format!(
                "state cost {v} at state {x} is outside [0, 1]"
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn as_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }

    /// `((t - 1) * self + cost) / t`, the running-average update of the leader.
    pub fn running_average(&self, cost: &StateCost, t: usize) -> StateCost {
        let t = t as f64;
        let values = self
            .0
            .iter()
            .zip(&cost.0)
            // rounding can step just outside [0, 1]
            .map(|(a, c)| (((t - 1.0) * a + c) / t).clamp(0.0, 1.0))
            .collect();
        StateCost(values)
    }
}

impl TryFrom<Vec<f64>> for StateCost {
    type Error = LmdpError;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<StateCost> for Vec<f64> {
    fn from(c: StateCost) -> Self {
        c.0
    }
}

/// A controlled transition kernel `Q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelRepr", into = "KernelRepr")]
pub struct Policy {
    kernel: DMatrix<f64>,
    support: DMatrix<bool>,
}

impl Policy {
    pub fn new(kernel: DMatrix<f64>) -> Result<Self> {
        check_stochastic(&kernel, "policy")?;
        let support = kernel.map(|q| q > 0.0);
        Ok(Self { kernel, support })
    }

    /// Builds a policy whose rows are already normalized up to rounding.
    pub(crate) fn from_normalized(kernel: DMatrix<f64>) -> Self {
        let support = kernel.map(|q| q > 0.0);
        Self { kernel, support }
    }

    /// The passive dynamics played as a policy.
    pub fn passive(p: &PassiveDynamics) -> Self {
        Self {
            kernel: p.kernel.clone(),
            support: p.support.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn kernel(&self) -> &DMatrix<f64> {
        &self.kernel
    }

    pub fn support(&self) -> &DMatrix<bool> {
        &self.support
    }

    pub fn row(&self, x: usize) -> Vec<f64> {
        self.kernel.row(x).iter().copied().collect()
    }

    /// `supp Q(.|x) ⊆ supp P(.|x)` for every state.
    pub fn is_feasible_for(&self, p: &PassiveDynamics) -> bool {
        self.n() == p.n()
            && self
                .support
                .iter()
                .zip(p.support.iter())
                .all(|(&q, &pp)| !q || pp)
    }

    /// `max_x ||Q(.|x) - other(.|x)||_1`.
    pub fn max_row_l1(&self, other: &Policy) -> f64 {
        (0..self.n())
            .map(|x| {
                self.kernel
                    .row(x)
                    .iter()
                    .zip(other.kernel.row(x).iter())
                    .map(|(a, b)| (a - b).abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

impl TryFrom<KernelRepr> for Policy {
    type Error = LmdpError;
    fn try_from(r: KernelRepr) -> Result<Self> {
        Self::new(matrix_from_rows(&r.kernel)?)
    }
}

impl From<Policy> for KernelRepr {
    fn from(p: Policy) -> Self {
        KernelRepr {
            kernel: matrix_to_rows(&p.kernel),
        }
    }
}

/// Relative entropy `Σ q log(q/p)` with `0 log 0 = 0`.
pub fn kl_divergence(q: &[f64], p: &[f64]) -> Result<f64> {
    if q.len() != p.len() {
        return Err(LmdpError::InvalidInput(format!(
            "distribution lengths differ ({} vs {})",
            q.len(),
            p.len()
        )));
    }
    let mut kl = 0.0;
    for (i, (&qi, &pi)) in q.iter().zip(p).enumerate() {
        if qi <= ZERO_MASS {
            continue;
        }
        if pi <= 0.0 {
            return Err(LmdpError::SupportViolation {
                row: 0,
                col: i,
                mass: qi,
            });
        }
        kl += qi * (qi / pi).ln();
    }
    Ok(kl.max(0.0))
}

/// Row-wise `KL(Q(.|x) || P(.|x))` for every state `x`.
pub fn control_costs(q: &Policy, p: &PassiveDynamics) -> Result<Vec<f64>> {
    (0..q.n())
        .map(|x| {
            kl_divergence(&q.row(x), &p.row(x)).map_err(|e| match e {
                LmdpError::SupportViolation { col, mass, .. } => {
                    LmdpError::SupportViolation { row: x, col, mass }
                }
                other => other,
            })
        })
        .collect()
}

/// `max v - min v`.
pub fn span(v: &[f64]) -> f64 {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| {
            (lo.min(x), hi.max(x))
        });
    if v.is_empty() {
        0.0
    } else {
        hi - lo
    }
}
