//! Follow-the-leader runs: determinism, obliviousness, mode agreement and ledgers.

mod common;

use proptest::prelude::*;

use lmdp_lab::adversary::{Adversary, AdversarySpec};
use lmdp_lab::experiment::config::GeneratorKind;
use lmdp_lab::experiment::generate_instance;
use lmdp_lab::lmdp::SolverSettings;
use lmdp_lab::online::{ftl_policy, run_experiment, uniform_distribution, Mode, RunOptions};
use lmdp_lab::StateCost;

use common::{generated_specs, random_instance, replay_spec};

#[test]
fn monte_carlo_tracks_expected_loss() {
    let p = random_instance(4, 41, 0.05);
    let horizon = 2_000;
    for seed in 0..20u64 {
        let adv = Adversary::new(AdversarySpec::IidUniform, seed);
        let mu0 = uniform_distribution(4);
        let exact = run_experiment(&p, &mu0, &adv, horizon, Mode::Exact, seed, &RunOptions::default()).unwrap();
        let mc = run_experiment(&p, &mu0, &adv, horizon, Mode::MonteCarlo, seed, &RunOptions::default()).unwrap();
        // per-round losses lie in [0, h_hit + 2]; dependence inflates the variance by at most 1 + 2τ
        let range = exact.summary.h_hit + 2.0;
        let tau = mc.summary.max_policy_tau;
        let sigma = range / 2.0 * (horizon as f64 * (1.0 + 2.0 * tau)).sqrt();
        let diff = mc.summary.total_sampled_loss.unwrap() - exact.summary.total_expected_loss;
        assert!(diff.abs() <= 4.0 * sigma, "seed {seed}: diff {diff}, sigma {sigma}");
        assert_eq!(exact.summary.total_expected_loss, mc.summary.total_expected_loss);
    }
}

#[test]
fn cost_sequences_ignore_the_trajectory() {
    let p = random_instance(5, 42, 0.05);
    for spec in generated_specs() {
        let adv = Adversary::new(spec.clone(), 9);
        let a = run_experiment(&p, &uniform_distribution(5), &adv, 300, Mode::Exact, 1, &RunOptions::default()).unwrap();
        let b = run_experiment(&p, &uniform_distribution(5), &adv, 300, Mode::MonteCarlo, 2, &RunOptions::default()).unwrap();
        let direct = adv.cost_sequence(&p, 300, &SolverSettings::default()).unwrap();
        for ((ra, rb), c) in a.records.iter().zip(&b.records).zip(&direct) {
            assert_eq!(&ra.cost, c, "{}", spec.name());
            assert_eq!(&rb.cost, c, "{}", spec.name());
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let p = random_instance(4, 43, 0.05);
    for spec in generated_specs() {
        let adv = Adversary::new(spec, 5);
        let run = || run_experiment(&p, &uniform_distribution(4), &adv, 500, Mode::MonteCarlo, 5, &RunOptions::default()).unwrap();
        assert_eq!(run(), run());
    }
}

#[test]
fn ledgers_pass_on_every_generator_and_adversary() {
    let dir = tempfile::tempdir().unwrap();
    let instances = [
        generate_instance(GeneratorKind::RandomErgodic, 6, 44, 0.02, None).unwrap(),
        generate_instance(GeneratorKind::RingWithJumps, 5, 0, 0.02, None).unwrap(),
        generate_instance(GeneratorKind::Gridworld, 9, 0, 0.05, None).unwrap(),
        generate_instance(GeneratorKind::Gridworld, 16, 0, 0.05, Some(0.2)).unwrap(),
    ];
    for p in &instances {
        let mut specs = generated_specs();
        specs.push(replay_spec(&dir.path().join(format!("r{}.json", p.n())), p.n(), 1_000, 3));
        for spec in specs {
            for mode in [Mode::Exact, Mode::MonteCarlo] {
                let adv = Adversary::new(spec.clone(), 8);
                let tr = run_experiment(p, &uniform_distribution(p.n()), &adv, 1_000, mode, 8, &RunOptions::default()).unwrap();
                assert_eq!(tr.records.len(), 1_000);
                assert!(tr.summary.all_pass(), "n={} {} {:?}: {:?}", p.n(), spec.name(), mode, tr.summary.ledger);
                let last = tr.records.last().unwrap();
                assert!((last.cum_idealized_regret - tr.summary.idealized_regret).abs() < 1e-9);
                assert!((last.cum_true_regret_proxy - tr.summary.true_regret_proxy).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn five_state_iid_run_passes_every_check() {
    let p = random_instance(5, 45, 0.05);
    let adv = Adversary::new(AdversarySpec::IidUniform, 45);
    let tr = run_experiment(&p, &uniform_distribution(5), &adv, 10_000, Mode::Exact, 45, &RunOptions::default()).unwrap();
    assert!(tr.records.iter().all(|r| r.policy_change <= r.lemma4_bound));
    assert!(tr.summary.all_pass(), "{:?}", tr.summary.ledger);
    assert_eq!(tr.summary.ledger.len(), 10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn leader_depends_only_on_the_average(
        costs in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 4), 2..12),
        rotate in 0usize..12,
    ) {
        let dir = tempfile::tempdir().unwrap();
        let p = random_instance(4, 46, 0.05);
        let mut permuted = costs.clone();
        let k = rotate % costs.len();
        permuted.rotate_left(k);
        permuted.reverse();
        let run = |rows: &Vec<Vec<f64>>, name: &str| {
            let path = dir.path().join(name);
            std::fs::write(&path, serde_json::to_string(rows).unwrap()).unwrap();
            let adv = Adversary::new(AdversarySpec::ReplayFile { path }, 0);
            run_experiment(&p, &uniform_distribution(4), &adv, rows.len(), Mode::Exact, 0, &RunOptions::default()).unwrap()
        };
        let a = run(&costs, "a.json");
        let b = run(&permuted, "b.json");
        prop_assert!(a.final_leader.policy.max_row_l1(&b.final_leader.policy) < 1e-9);
        let mean: Vec<f64> = (0..4).map(|x| costs.iter().map(|c| c[x]).sum::<f64>() / costs.len() as f64).collect();
        let (q, _) = ftl_policy(&p, &StateCost::new(mean).unwrap()).unwrap();
        prop_assert!(a.final_leader.policy.max_row_l1(&q) < 1e-9);
    }
}
