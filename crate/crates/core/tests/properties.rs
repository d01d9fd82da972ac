//! Invariants of the single-cost solvers and the convex view.

mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;

use lmdp_lab::chain::ergodicity_coefficient;
use lmdp_lab::convex::{
    bregman_negcondent, measure_from_policy, minimize_f, neg_conditional_entropy, objective_f,
    StationaryTransitionMeasure,
};
use lmdp_lab::lmdp::{solve, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use lmdp_lab::{Policy, StateCost};

use common::random_instance;

fn cost(values: &[f64], n: usize) -> StateCost {
    StateCost::new(values[..n].to_vec()).unwrap()
}

fn policy_from(weights: &[f64], n: usize) -> Policy {
    let mut k = DMatrix::from_fn(n, n, |x, y| weights[x * 8 + y] + 1e-9);
    for x in 0..n {
        let s: f64 = k.row(x).sum();
        k.row_mut(x).iter_mut().for_each(|v| *v /= s);
    }
    Policy::new(k).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn constant_shift_moves_only_lambda(
        seed in 0u64..1000, n in 2usize..=8,
        values in prop::collection::vec(0.0f64..0.5, 8), kappa in 0.0f64..0.5,
    ) {
        let p = random_instance(n, seed, 0.02);
        let c = cost(&values, n);
        let shifted = StateCost::new(c.values().iter().map(|v| v + kappa).collect()).unwrap();
        let a = solve(&p, &c, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        let b = solve(&p, &shifted, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        prop_assert!((b.lambda - a.lambda - kappa).abs() < 1e-9);
        for x in 0..n {
            prop_assert!((a.v[x] - b.v[x]).abs() < 1e-8);
        }
        prop_assert!(a.policy.max_row_l1(&b.policy) < 1e-8);
    }

    #[test]
    fn lambda_is_the_average_cost_of_the_optimal_policy(
        seed in 0u64..1000, n in 2usize..=8, values in prop::collection::vec(0.0f64..=1.0, 8),
    ) {
        let p = random_instance(n, seed, 0.02);
        let c = cost(&values, n);
        let sol = solve(&p, &c, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        let m = measure_from_policy(&p, &sol.policy).unwrap();
        prop_assert!((objective_f(&m, &c, &p).unwrap() - sol.lambda).abs() < 1e-9);
        prop_assert!(sol.lambda >= -1e-12 && sol.lambda <= c.max() + 1e-12);
        prop_assert_eq!(sol.v[0], 0.0);
    }

    #[test]
    fn optimal_policy_beats_random_policies(
        seed in 0u64..1000, n in 2usize..=6,
        values in prop::collection::vec(0.0f64..=1.0, 8), weights in prop::collection::vec(0.0f64..1.0, 64),
    ) {
        let p = random_instance(n, seed, 0.02);
        let c = cost(&values, n);
        let sol = solve(&p, &c, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        let m = measure_from_policy(&p, &policy_from(&weights, n)).unwrap();
        prop_assert!(objective_f(&m, &c, &p).unwrap() >= sol.lambda - 1e-10);
    }

    #[test]
    fn kernel_contracts_by_its_ergodicity_coefficient(
        seed in 0u64..1000, n in 2usize..=8,
        a in prop::collection::vec(0.0f64..1.0, 8), b in prop::collection::vec(0.0f64..1.0, 8),
    ) {
        let p = random_instance(n, seed, 0.01);
        let norm = |v: &[f64]| { let s: f64 = v[..n].iter().sum::<f64>() + 1e-12; v[..n].iter().map(|x| (x + 1e-12 / n as f64) / s).collect::<Vec<f64>>() };
        let (mu, nu) = (norm(&a), norm(&b));
        let step = |d: &[f64]| (0..n).map(|y| (0..n).map(|x| d[x] * p.kernel()[(x, y)]).sum::<f64>()).collect::<Vec<f64>>();
        let l1 = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| (x - y).abs()).sum::<f64>();
        let alpha = ergodicity_coefficient(p.kernel());
        prop_assert!(l1(&step(&mu), &step(&nu)) <= alpha * l1(&mu, &nu) + 1e-12);
    }

    #[test]
    fn bregman_matches_its_definition(
        seed in 0u64..1000, n in 2usize..=6,
        w1 in prop::collection::vec(0.0f64..1.0, 64), w2 in prop::collection::vec(0.0f64..1.0, 64),
    ) {
        let p = random_instance(n, seed, 0.02);
        let a = measure_from_policy(&p, &policy_from(&w1, n)).unwrap();
        let b = measure_from_policy(&p, &policy_from(&w2, n)).unwrap();
        // R(a) - R(b) - <grad R(b), a - b> with grad R(b)(x,y) = log(b(x,y)/mu_b(x))
        let mut inner = 0.0;
        for x in 0..n {
            for y in 0..n {
                inner += (b.pi()[(x, y)] / b.mu()[x]).ln() * (a.pi()[(x, y)] - b.pi()[(x, y)]);
            }
        }
        let direct = neg_conditional_entropy(&a) - neg_conditional_entropy(&b) - inner;
        let closed = bregman_negcondent(&a, &b).unwrap();
        prop_assert!((direct - closed).abs() < 1e-9, "{} vs {}", direct, closed);
    }

    #[test]
    fn objective_is_convex_along_segments(
        seed in 0u64..1000, n in 2usize..=6, theta in 0.0f64..=1.0,
        values in prop::collection::vec(0.0f64..=1.0, 8),
        w1 in prop::collection::vec(0.0f64..1.0, 64), w2 in prop::collection::vec(0.0f64..1.0, 64),
    ) {
        let p = random_instance(n, seed, 0.02);
        let c = cost(&values, n);
        let a = measure_from_policy(&p, &policy_from(&w1, n)).unwrap();
        let b = measure_from_policy(&p, &policy_from(&w2, n)).unwrap();
        let mixed: StationaryTransitionMeasure = a.mix(&b, theta);
        let lhs = objective_f(&mixed, &c, &p).unwrap();
        let rhs = theta * objective_f(&a, &c, &p).unwrap() + (1.0 - theta) * objective_f(&b, &c, &p).unwrap();
        prop_assert!(lhs <= rhs + 1e-10);
    }

    #[test]
    fn objective_is_affine_in_cost(
        seed in 0u64..1000, n in 2usize..=6, theta in 0.0f64..=1.0,
        f in prop::collection::vec(0.0f64..=1.0, 8), g in prop::collection::vec(0.0f64..=1.0, 8),
        w in prop::collection::vec(0.0f64..1.0, 64),
    ) {
        let p = random_instance(n, seed, 0.02);
        let (cf, cg) = (cost(&f, n), cost(&g, n));
        let ch = StateCost::new((0..n).map(|x| theta * f[x] + (1.0 - theta) * g[x]).collect()).unwrap();
        let m = measure_from_policy(&p, &policy_from(&w, n)).unwrap();
        let mixed = theta * objective_f(&m, &cf, &p).unwrap() + (1.0 - theta) * objective_f(&m, &cg, &p).unwrap();
        prop_assert!((objective_f(&m, &ch, &p).unwrap() - mixed).abs() < 1e-12);
    }
}

#[test]
fn frank_wolfe_gap_bounds_suboptimality() {
    let mut r = common::rng(31);
    for i in 0..10 {
        let n = 2 + i % 5;
        let p = random_instance(n, 3100 + i as u64, 0.05);
        let c = common::random_cost(n, &mut r);
        let fw = minimize_f(&p, &c, 1e-4, 1_000_000).unwrap();
        let sol = solve(&p, &c, DEFAULT_TOL, DEFAULT_MAX_ITERS).unwrap();
        assert!(fw.gap <= 1e-4);
        assert!(fw.value - sol.lambda <= fw.gap + 1e-9);
        assert!(fw.value >= sol.lambda - 1e-9);
        assert!(fw.best_history.windows(2).all(|w| w[1] <= w[0]));
    }
}
