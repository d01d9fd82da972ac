//! Oblivious cost sequences.
//!
//! Every adversary emits its whole sequence up front from `(spec, seed, T)`
//! and the passive dynamics, so nothing it produces can depend on the
//! learner's realized states.

use std::f64::consts::PI;
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chain::stationary_of_primitive;
use crate::dynamics::{PassiveDynamics, StateCost};
use crate::error::{LmdpError, Result};
use crate::lmdp::{solve_from, SolverSettings};

/// ChaCha stream used for cost generation.
pub const ADVERSARY_STREAM: u64 = 1;
/// ChaCha stream used for sampling trajectories.
pub const TRAJECTORY_STREAM: u64 = 2;

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn default_period() -> usize {
    50
}

fn default_growth() -> f64 {
    1.0
}

fn default_wave_period() -> f64 {
    50.0
}

fn default_amplitude() -> f64 {
    0.5
}

/// Kind and parameters of a cost generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversarySpec {
    /// Independent uniform costs in every round and state.
    IidUniform,
    /// Alternates between two random cost vectors. Segment `k` lasts
    /// `period * growth^k` rounds.
    PiecewiseSwitch {
        #[serde(default = "default_period")]
        period: usize,
        #[serde(default = "default_growth")]
        growth: f64,
    },
    /// `c_t(x) = 1/2 + amplitude * sin(2π t / period + φ_x)` with random phases.
    Sinusoid {
        #[serde(default = "default_wave_period")]
        period: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    /// Simulates follow-the-leader offline and charges cost 1 on the states
    /// the current leader visits more often than average.
    SimulatedFtlAdversarial,
    /// Replays a JSON array of cost vectors, one per round.
    ReplayFile { path: PathBuf },
}

impl AdversarySpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::IidUniform => "iid-uniform",
            Self::PiecewiseSwitch { .. } => "piecewise-switch",
            Self::Sinusoid { .. } => "sinusoid",
            Self::SimulatedFtlAdversarial => "simulated-ftl-adversarial",
            Self::ReplayFile { .. } => "replay-file",
        }
    }
}

/// A seeded adversary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adversary {
    pub spec: AdversarySpec,
    pub seed: u64,
}

impl Adversary {
    pub fn new(spec: AdversarySpec, seed: u64) -> Self {
        Self { spec, seed }
    }

    /// The full cost sequence `c_1, …, c_T`.
    pub fn cost_sequence(
        &self,
        p: &PassiveDynamics,
        horizon: usize,
        solver: &SolverSettings,
    ) -> Result<Vec<StateCost>> {
        let n = p.n();
        let mut rng = stream_rng(self.seed, ADVERSARY_STREAM);
        match &self.spec {
            AdversarySpec::IidUniform => Ok((0..horizon)
                .map(|_| StateCost::new((0..n).map(|_| rng.gen::<f64>()).collect()))
                .collect::<Result<_>>()?),
            AdversarySpec::PiecewiseSwitch { period, growth } => {
                if *period == 0 || !(*growth >= 1.0) {
                    return Err(LmdpError::InvalidInput(
                        "piecewise-switch needs period >= 1 and growth >= 1".into(),
                    ));
                }
                let pair = [
                    StateCost::new((0..n).map(|_| rng.gen::<f64>()).collect())?,
                    StateCost::new((0..n).map(|_| rng.gen::<f64>()).collect())?,
                ];
                let mut out = Vec::with_capacity(horizon);
                let mut length = *period as f64;
                let mut which = 0;
                while out.len() < horizon {
                    let rounds = (length.round() as usize).max(1);
                    for _ in 0..rounds.min(horizon - out.len()) {
                        out.push(pair[which].clone());
                    }
                    which = 1 - which;
                    length *= growth;
                }
                Ok(out)
            }
            AdversarySpec::Sinusoid { period, amplitude } => {
                if !(*period > 0.0) || !(0.0..=0.5).contains(amplitude) {
                    return Err(LmdpError::InvalidInput(
                        "sinusoid needs period > 0 and amplitude in [0, 0.5]".into(),
                    ));
                }
                let phases: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() * 2.0 * PI).collect();
                (1..=horizon)
                    .map(|t| {
                        let values = phases
                            .iter()
                            .map(|ph| {
                                (0.5 + amplitude * (2.0 * PI * t as f64 / period + ph).sin())
                                    .clamp(0.0, 1.0)
                            })
                            .collect();
                        StateCost::new(values)
                    })
                    .collect()
            }
            AdversarySpec::SimulatedFtlAdversarial => simulate_against_ftl(p, horizon, solver),
            AdversarySpec::ReplayFile { path } => {
                let text = std::fs::read_to_string(path)?;
                let rows: Vec<Vec<f64>> = serde_json::from_str(&text)?;
                if rows.len() < horizon {
                    return Err(LmdpError::InvalidInput(format!(
                        "replay file {} holds {} rounds, horizon is {horizon}",
                        path.display(),
                        rows.len()
                    )));
                }
                rows.into_iter()
                    .take(horizon)
                    .enumerate()
                    .map(|(t, row)| {
                        if row.len() != n {
                            return Err(LmdpError::InvalidInput(format!(
                                "replay round {} has {} states, expected {n}",
                                t + 1,
                                row.len()
                            )));
                        }
                        StateCost::new(row)
                    })
                    .collect()
            }
        }
    }
}

fn simulate_against_ftl(
    p: &PassiveDynamics,
    horizon: usize,
    solver: &SolverSettings,
) -> Result<Vec<StateCost>> {
    let n = p.n();
    let mut cbar = StateCost::zeros(n);
    let mut warm: Option<Vec<f64>> = None;
    let mut out = Vec::with_capacity(horizon);
    for t in 1..=horizon {
        let sol = solve_from(p, &cbar, solver.tol, solver.max_iters, warm.as_deref())?;
        let mu = stationary_of_primitive(sol.policy.kernel())?;
        let mean = 1.0 / n as f64;
        let mut values: Vec<f64> = mu.iter().map(|&m| if m > mean + 1e-12 { 1.0 } else { 0.0 }).collect();
        if values.iter().all(|&v| v == 0.0) {
            values[t % n] = 1.0;
        }
        let cost = StateCost::new(values)?;
        cbar = cbar.running_average(&cost, t);
        out.push(cost);
        warm = Some(sol.z);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance() -> PassiveDynamics {
        PassiveDynamics::from_rows(&[
            vec![0.5, 0.3, 0.2],
            vec![0.1, 0.6, 0.3],
            vec![0.3, 0.3, 0.4],
        ])
        .unwrap()
    }

    fn all_specs() -> Vec<AdversarySpec> {
        vec![
            AdversarySpec::IidUniform,
            AdversarySpec::PiecewiseSwitch { period: 7, growth: 1.5 },
            AdversarySpec::Sinusoid { period: 13.0, amplitude: 0.5 },
            AdversarySpec::SimulatedFtlAdversarial,
        ]
    }

    #[test]
    fn sequences_are_deterministic_and_in_range() {
        let p = instance();
        for spec in all_specs() {
            let a = Adversary::new(spec.clone(), 9);
            let s1 = a.cost_sequence(&p, 200, &SolverSettings::default()).unwrap();
            let s2 = a.cost_sequence(&p, 200, &SolverSettings::default()).unwrap();
            assert_eq!(s1, s2, "{}", spec.name());
            assert_eq!(s1.len(), 200);
            assert!(s1.iter().all(|c| c.values().iter().all(|v| (0.0..=1.0).contains(v))));
        }
    }

    #[test]
    fn seeds_change_random_kinds() {
        let p = instance();
        let s = SolverSettings::default();
        let a = Adversary::new(AdversarySpec::IidUniform, 1).cost_sequence(&p, 5, &s).unwrap();
        let b = Adversary::new(AdversarySpec::IidUniform, 2).cost_sequence(&p, 5, &s).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn switch_segments_grow() {
        let p = instance();
        let seq = Adversary::new(AdversarySpec::PiecewiseSwitch { period: 2, growth: 2.0 }, 3)
            .cost_sequence(&p, 14, &SolverSettings::default())
            .unwrap();
        // segments of length 2, 4, 8
        assert_eq!(seq[0], seq[1]);
        assert_ne!(seq[1], seq[2]);
        assert_eq!(seq[2], seq[5]);
        assert_ne!(seq[5], seq[6]);
        assert_eq!(seq[6], seq[13]);
    }

    #[test]
    fn replay_file_round_trip() {
        let p = instance();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("costs.json");
        std::fs::write(&path, "[[0.1,0.2,0.3],[1,0,0.5]]").unwrap();
        let a = Adversary::new(AdversarySpec::ReplayFile { path: path.clone() }, 0);
        let seq = a.cost_sequence(&p, 2, &SolverSettings::default()).unwrap();
        assert_eq!(seq[1].values(), &[1.0, 0.0, 0.5]);
        assert!(a.cost_sequence(&p, 3, &SolverSettings::default()).is_err());
        std::fs::write(&path, "[[0.1,0.2,1.3]]").unwrap();
        assert!(a.cost_sequence(&p, 1, &SolverSettings::default()).is_err());
    }

    #[test]
    fn spec_json_shape() {
        let spec: AdversarySpec = serde_json::from_str(r#"{"kind":"piecewise-switch","period":10}"#).unwrap();
        assert_eq!(spec, AdversarySpec::PiecewiseSwitch { period: 10, growth: 1.0 });
        let spec: AdversarySpec = serde_json::from_str(r#"{"kind":"iid-uniform"}"#).unwrap();
        assert_eq!(spec, AdversarySpec::IidUniform);
        assert!(serde_json::from_str::<AdversarySpec>(r#"{"kind":"adaptive"}"#).is_err());
    }
}
