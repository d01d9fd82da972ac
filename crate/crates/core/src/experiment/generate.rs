use nalgebra::DMatrix;
use rand::Rng;

use crate::adversary::stream_rng;
use crate::chain::analyze;
use crate::dynamics::PassiveDynamics;
use crate::error::{LmdpError, Result};
use crate::experiment::config::GeneratorKind;

/// Attempts made by randomized generators before giving up.
pub const MAX_ATTEMPTS: u64 = 16;

/// Builds an instance satisfying both standing assumptions.
///
/// `random-ergodic` draws rows `min_prob + (1 - n min_prob) w / Σw` with
/// uniform weights `w`. `ring-with-jumps` mixes the cyclic shift with uniform
/// leakage `epsilon` (default `n min_prob`). `gridworld` is the lazy
/// four-neighbor walk on a `√n × √n` torus, optionally mixed with uniform
/// leakage `epsilon` (default 0).
pub fn generate_instance(
    kind: GeneratorKind,
    n: usize,
    seed: u64,
    min_prob: f64,
    epsilon: Option<f64>,
) -> Result<PassiveDynamics> {
    if n < 2 {
        return Err(LmdpError::InvalidInput(format!("n must be at least 2, got {n}")));
    }
    if !(min_prob > 0.0 && min_prob <= 1.0 / n as f64) {
        return Err(LmdpError::InvalidInput(format!(
            "min_prob must lie in (0, 1/n], got {min_prob}"
        )));
    }
    if let Some(eps) = epsilon {
        if !(0.0..=1.0).contains(&eps) {
            return Err(LmdpError::InvalidInput(format!("epsilon must lie in [0, 1], got {eps}")));
        }
    }
    let attempts = if kind == GeneratorKind::RandomErgodic { MAX_ATTEMPTS } else { 1 };
    let mut last = String::new();
    for k in 0..attempts {
        let kernel = match kind {
            GeneratorKind::RandomErgodic => random_ergodic(n, seed.wrapping_add(k), min_prob),
            GeneratorKind::RingWithJumps => leak(ring(n), epsilon.unwrap_or(n as f64 * min_prob)),
            GeneratorKind::Gridworld => leak(torus(n)?, epsilon.unwrap_or(0.0)),
        };
        let p = PassiveDynamics::new(kernel)?;
        match analyze(&p) {
            Ok(_) => return Ok(p),
            Err(e) => last = e.to_string(),
        }
    }
    Err(LmdpError::GenerationFailed(format!(
        "{kind:?} with n = {n} failed the assumption checks: {last}"
    )))
}

fn random_ergodic(n: usize, seed: u64, min_prob: f64) -> DMatrix<f64> {
    let mut rng = stream_rng(seed, 0);
    let free = 1.0 - n as f64 * min_prob;
    let mut k = DMatrix::zeros(n, n);
    for x in 0..n {
        let w: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = w.iter().sum();
        for y in 0..n {
            k[(x, y)] = min_prob + free * w[y] / total;
        }
    }
    k
}

fn ring(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |x, y| if y == (x + 1) % n { 1.0 } else { 0.0 })
}

fn torus(n: usize) -> Result<DMatrix<f64>> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(LmdpError::InvalidInput(format!("gridworld needs a square n, got {n}")));
    }
    let mut k = DMatrix::zeros(n, n);
    for r in 0..side {
        for c in 0..side {
            let x = r * side + c;
            let moves = [
                (r, c),
                ((r + 1) % side, c),
                ((r + side - 1) % side, c),
                (r, (c + 1) % side),
                (r, (c + side - 1) % side),
            ];
            // on a 2x2 torus opposite moves land on the same cell
            for (rr, cc) in moves {
                k[(x, rr * side + cc)] += 0.2;
            }
        }
    }
    Ok(k)
}

fn leak(k: DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let n = k.nrows();
    k.map(|v| (1.0 - eps) * v + eps / n as f64)
}
