use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::adversary::AdversarySpec;
use crate::dynamics::PassiveDynamics;
use crate::error::{LmdpError, Result};
use crate::experiment::generate::generate_instance;
use crate::lmdp::{SolverSettings, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::online::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GeneratorKind {
    RandomErgodic,
    RingWithJumps,
    Gridworld,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub n: usize,
    pub seed: u64,
    pub min_prob: f64,
    /// Uniform leakage mass for ring and grid kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineInstance {
    pub kernel: Vec<Vec<f64>>,
}

/// Either a literal kernel or a generator recipe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSpec {
    Inline(InlineInstance),
    Generator(GeneratorSpec),
}

impl InstanceSpec {
    pub fn build(&self) -> Result<PassiveDynamics> {
        match self {
            Self::Inline(inline) => PassiveDynamics::from_rows(&inline.kernel),
            Self::Generator(g) => generate_instance(g.kind, g.n, g.seed, g.min_prob, g.epsilon),
        }
    }
}

fn default_solver_tol() -> f64 {
    DEFAULT_TOL
}

fn default_oracle_tol() -> f64 {
    1e-3
}

fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
    /// Allowed gap between the eigen and convex values of `λ`.
    #[serde(default = "default_oracle_tol")]
    pub oracle_tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver_tol: default_solver_tol(),
            oracle_tol: default_oracle_tol(),
            max_iters: default_max_iters(),
        }
    }
}

impl Tolerances {
    pub fn solver(&self) -> SolverSettings {
        SolverSettings {
            tol: self.solver_tol,
            max_iters: self.max_iters,
        }
    }
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// A full experiment description. Each seed drives both the adversary and
/// the sampled trajectory of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub adversary: AdversarySpec,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub mode: Mode,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Initial state distribution; uniform when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu0: Option<Vec<f64>>,
    /// Negative control: play the passive dynamics in this round.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corrupt_at: Option<usize>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LmdpError::InvalidInput(msg));
        if self.horizon == 0 {
            return bad("T must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        let t = &self.tolerances;
        if !(t.solver_tol > 0.0) || !(t.oracle_tol > 0.0) || t.max_iters == 0 {
            return bad("tolerances must be positive".into());
        }
        match &self.instance {
            InstanceSpec::Generator(g) => {
                if g.n < 2 {
                    return bad(format!("n must be at least 2, got {}", g.n));
                }
                if !(g.min_prob > 0.0 && g.min_prob <= 1.0 / g.n as f64) {
                    return bad(format!("min_prob must lie in (0, 1/n], got {}", g.min_prob));
                }
            }
            InstanceSpec::Inline(inline) => {
                if inline.kernel.len() < 2 {
                    return bad("inline kernel needs at least 2 states".into());
                }
            }
        }
        if let Some(c) = self.corrupt_at {
            if c == 0 || c > self.horizon {
                return bad(format!("corrupt_at must lie in 1..=T, got {c}"));
            }
        }
        Ok(())
    }
}
