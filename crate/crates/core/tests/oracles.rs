//! Solvers checked against independent brute-force or dense computations.

mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;

use lmdp_lab::chain::{primitivity_index, stationary_distribution};
use lmdp_lab::cycle::min_mean_cycle;
use lmdp_lab::lmdp::{solve, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use lmdp_lab::{PassiveDynamics, StateCost};

use common::{random_cost, random_instance, rng};

/// `(ρ, z)` for `diag(exp(-c)) P` from the dense spectrum and a null vector of `A - ρI`.
fn dense_perron(p: &PassiveDynamics, c: &StateCost) -> (f64, Vec<f64>) {
    let n = p.n();
    let a = DMatrix::from_fn(n, n, |x, y| (-c.values()[x]).exp() * p.kernel()[(x, y)]);
    let rho = a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    let svd = (&a - DMatrix::identity(n, n) * rho).svd(false, true);
    let k = svd.singular_values.imin();
    let mut z: Vec<f64> = svd.v_t.unwrap().row(k).iter().copied().collect();
    if z[0] < 0.0 {
        z.iter_mut().for_each(|v| *v = -*v);
    }
    (rho, z)
}

#[test]
fn power_iteration_matches_dense_eigensolver() {
    let mut r = rng(21);
    for i in 0..40 {
        let n = 2 + i % 7;
        let p = random_instance(n, 2100 + i as u64, 0.03);
        let c = random_cost(n, &mut r);
        let sol = solve(&p, &c, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        let (rho, z) = dense_perron(&p, &c);
        assert!((sol.lambda + rho.ln()).abs() < 1e-9, "n = {n}");
        for x in 0..n {
            let v = -(z[x] / z[0]).ln();
            assert!((sol.v[x] - v).abs() < 1e-9, "n = {n}, x = {x}");
        }
    }
}

fn simple_cycles(support: &DMatrix<bool>) -> Vec<Vec<usize>> {
    let n = support.nrows();
    let mut out = Vec::new();
    fn extend(start: usize, path: &mut Vec<usize>, s: &DMatrix<bool>, out: &mut Vec<Vec<usize>>) {
        let last = *path.last().unwrap();
        for next in start..s.nrows() {
            if !s[(last, next)] {
                continue;
            }
            if next == start {
                out.push(path.clone());
            } else if !path.contains(&next) {
                path.push(next);
                extend(start, path, s, out);
                path.pop();
            }
        }
    }
    for start in 0..n {
        extend(start, &mut vec![start], support, &mut out);
    }
    out
}

proptest! {
    #[test]
    fn karp_matches_cycle_enumeration(
        n in 1usize..=5,
        weights in prop::collection::vec(-1.0f64..1.0, 25),
        mask in prop::collection::vec(prop::bool::weighted(0.6), 25),
    ) {
        let w = DMatrix::from_fn(n, n, |i, j| weights[i * 5 + j]);
        let s = DMatrix::from_fn(n, n, |i, j| mask[i * 5 + j]);
        let cycles = simple_cycles(&s);
        let result = min_mean_cycle(&w, &s);
        if cycles.is_empty() {
            prop_assert!(result.is_err());
        } else {
            let best = cycles
                .iter()
                .map(|c| (0..c.len()).map(|i| w[(c[i], c[(i + 1) % c.len()])]).sum::<f64>() / c.len() as f64)
                .fold(f64::INFINITY, f64::min);
            let found = result.unwrap();
            prop_assert!((found.mean - best).abs() < 1e-12);
            prop_assert!(found.edges().all(|(u, v)| s[(u, v)]));
            let recomputed = found.edges().map(|(u, v)| w[(u, v)]).sum::<f64>() / found.cycle.len() as f64;
            prop_assert!((recomputed - found.mean).abs() < 1e-12);
        }
    }

    #[test]
    fn primitivity_index_matches_boolean_powers(
        n in 2usize..=5,
        mask in prop::collection::vec(prop::bool::weighted(0.35), 25),
    ) {
        // every row needs some mass; add the successor edge when a row is empty
        let s = DMatrix::from_fn(n, n, |i, j| mask[i * 5 + j] || (!(0..n).any(|k| mask[i * 5 + k]) && j == (i + 1) % n));
        let k = DMatrix::from_fn(n, n, |i, j| {
            let deg = (0..n).filter(|&m| s[(i, m)]).count() as f64;
            if s[(i, j)] { 1.0 / deg } else { 0.0 }
        });
        let p = PassiveDynamics::new(k).unwrap();
        let bound = (n - 1) * (n - 1) + 1;
        let mut powers = vec![s.clone()];
        for _ in 1..(bound + n) {
            let last = powers.last().unwrap();
            powers.push(DMatrix::from_fn(n, n, |i, j| (0..n).any(|m| last[(i, m)] && s[(m, j)])));
        }
        let positive: Vec<bool> = powers.iter().map(|m| m.iter().all(|&b| b)).collect();
        // smallest H such that every later power is positive, if one exists
        let expected = (0..positive.len())
            .find(|&h| positive[h..].iter().all(|&b| b))
            .map(|h| h + 1);
        match primitivity_index(&p) {
            Ok(h) => prop_assert_eq!(Some(h), expected),
            Err(_) => prop_assert!(expected.is_none()),
        }
    }

    #[test]
    fn stationary_distribution_is_a_fixed_point(seed in 0u64..10_000, n in 2usize..=8) {
        let p = random_instance(n, seed, 0.01);
        let mu = stationary_distribution(p.kernel()).unwrap();
        prop_assert!((mu.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for y in 0..n {
            let next: f64 = (0..n).map(|x| mu[x] * p.kernel()[(x, y)]).sum();
            prop_assert!((next - mu[y]).abs() < 1e-12);
            prop_assert!(mu[y] > 0.0);
        }
    }
}
