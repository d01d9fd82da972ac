//! Minimum mean-weight cycle (Karp's algorithm).
//!
//! Linear minimization over the polytope of stationary transition measures
//! reduces to this problem: the vertices of the polytope are uniform
//! measures on simple cycles of the support graph.

use nalgebra::DMatrix;

use crate::error::{LmdpError, Result};

/// A simple cycle listed in traversal order, rotated to start at its smallest vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanCycle {
    pub cycle: Vec<usize>,
    pub mean: f64,
}

impl MeanCycle {
    /// Edges `(u, v)` of the cycle in traversal order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let len = self.cycle.len();
        (0..len).map(move |i| (self.cycle[i], self.cycle[(i + 1) % len]))
    }

    /// Uniform mass `1/len` on every cycle edge.
    pub fn measure(&self, n: usize) -> DMatrix<f64> {
        let mass = 1.0 / self.cycle.len() as f64;
        let mut pi = DMatrix::zeros(n, n);
        for (u, v) in self.edges() {
            pi[(u, v)] = mass;
        }
        pi
    }
}

fn canonical(mut cycle: Vec<usize>) -> Vec<usize> {
    let start = cycle
        .iter()
        .enumerate()
        .min_by_key(|(_, v)| **v)
        .map(|(i, _)| i)
        .unwrap_or(0);
    cycle.rotate_left(start);
    cycle
}

fn cycle_mean(weights: &DMatrix<f64>, cycle: &[usize]) -> f64 {
    let len = cycle.len();
    (0..len)
        .map(|i| weights[(cycle[i], cycle[(i + 1) % len])])
        .sum::<f64>()
        / len as f64
}

/// Cycle of minimum mean weight over edges where `support` is true.
///
/// Ties go to the smallest terminal vertex in Karp's table, then to the
/// first cycle met walking back along its optimal walk.
pub fn min_mean_cycle(weights: &DMatrix<f64>, support: &DMatrix<bool>) -> Result<MeanCycle> {
    let n = weights.nrows();
    if weights.ncols() != n || support.nrows() != n || support.ncols() != n {
        return Err(LmdpError::InvalidInput("weights and support must be n×n".into()));
    }
    // dist[k][v]: lightest walk with exactly k edges ending at v, from any start
    let mut dist = vec![vec![f64::INFINITY; n]; n + 1];
    let mut pred = vec![vec![usize::MAX; n]; n + 1];
    dist[0].iter_mut().for_each(|d| *d = 0.0);
    for k in 1..=n {
        for v in 0..n {
            for u in 0..n {
                if !support[(u, v)] || !dist[k - 1][u].is_finite() {
                    continue;
                }
                let cand = dist[k - 1][u] + weights[(u, v)];
                if cand < dist[k][v] {
                    dist[k][v] = cand;
                    pred[k][v] = u;
                }
            }
        }
    }

    let mut best: Option<(f64, usize)> = None;
    for (v, &last) in dist[n].iter().enumerate() {
        if !last.is_finite() {
            continue;
        }
        let worst = (0..n)
            .filter(|&k| dist[k][v].is_finite())
            .map(|k| (last - dist[k][v]) / (n - k) as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        if best.is_none_or(|(b, _)| worst < b) {
            best = Some((worst, v));
        }
    }
    let (_, end) = best.ok_or(LmdpError::NoCycle)?;

    // the optimal n-edge walk into `end`, first vertex to last
    let mut walk = vec![end; n + 1];
    for k in (1..=n).rev() {
        walk[k - 1] = pred[k][walk[k]];
    }

    // every cycle on this walk has the optimal mean; pick the first one closed
    // and fall back to scanning all of them if rounding broke a tie
    let mut candidates = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    for &v in walk.iter().rev() {
        if let Some(pos) = stack.iter().position(|&u| u == v) {
            let mut cyc: Vec<usize> = stack.drain(pos..).collect();
            cyc.reverse();
            candidates.push(canonical(cyc));
        }
        stack.push(v);
    }
    candidates
        .into_iter()
        .map(|c| {
            let mean = cycle_mean(weights, &c);
            MeanCycle { cycle: c, mean }
        })
        .fold(None, |acc: Option<MeanCycle>, c| match acc {
            Some(a) if a.mean <= c.mean => Some(a),
            _ => Some(c),
        })
        .ok_or(LmdpError::NoCycle)
}
