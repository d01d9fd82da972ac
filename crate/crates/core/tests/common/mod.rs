#![allow(dead_code)]

use std::path::Path;

use lmdp_lab::adversary::{stream_rng, AdversarySpec};
use lmdp_lab::experiment::config::GeneratorKind;
use lmdp_lab::experiment::generate_instance;
use lmdp_lab::{PassiveDynamics, StateCost};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, 17)
}

pub fn random_instance(n: usize, seed: u64, min_prob: f64) -> PassiveDynamics {
    generate_instance(GeneratorKind::RandomErgodic, n, seed, min_prob, None).unwrap()
}

pub fn random_cost(n: usize, rng: &mut impl Rng) -> StateCost {
    StateCost::new((0..n).map(|_| rng.gen::<f64>()).collect()).unwrap()
}

/// Writes `horizon` uniform cost vectors to `path` and returns the replay spec.
pub fn replay_spec(path: &Path, n: usize, horizon: usize, seed: u64) -> AdversarySpec {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..horizon)
        .map(|_| (0..n).map(|_| r.gen::<f64>()).collect())
        .collect();
    std::fs::write(path, serde_json::to_string(&rows).unwrap()).unwrap();
    AdversarySpec::ReplayFile { path: path.to_path_buf() }
}

pub fn generated_specs() -> Vec<AdversarySpec> {
    vec![
        AdversarySpec::IidUniform,
        AdversarySpec::PiecewiseSwitch { period: 100, growth: 1.5 },
        AdversarySpec::Sinusoid { period: 250.0, amplitude: 0.5 },
        AdversarySpec::SimulatedFtlAdversarial,
    ]
}
