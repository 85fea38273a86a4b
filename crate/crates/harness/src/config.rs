//! Experiment configuration: a single TOML file that fully determines a run
//! and round-trips losslessly.

use anyhow::{bail, Context, Result};
use cmax::core::Environment;
use cmax::envs::{ArmLattice, ArmParams, IcyGrid, IcyGridParams, PickPlaceGrid, PlanarPushWorld, PushParams};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub environment: EnvSpec,
    #[serde(default)]
    pub params: Params,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSection {
    pub name: String,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub base_seed: u64,
    pub trials: usize,
    pub max_steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Exact loop: per-pair penalties, tabular values.
    CmaxSmall,
    /// Hypersphere cover and kernel-regression values.
    CmaxLarge,
    /// Real-time search that patches model dynamics online.
    RtaaPatching,
    /// Model-free tabular Q-learning.
    QLearning,
    /// Planner over a KNN-learned residual dynamics model.
    KnnResidual,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::CmaxSmall => "cmax-small",
            Algorithm::CmaxLarge => "cmax-large",
            Algorithm::RtaaPatching => "rtaa-patching",
            Algorithm::QLearning => "qlearning",
            Algorithm::KnnResidual => "knn-residual",
        }
    }
}

/// Environment generator selection; one instance is built per trial seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EnvSpec {
    Icy {
        width: i64,
        height: i64,
        ice_fraction: f64,
        /// Reject instances without a model-correct path from every cell.
        #[serde(default = "default_true")]
        verified_safe: bool,
    },
    Pushing {
        #[serde(default)]
        with_obstacles: bool,
        #[serde(default = "default_obstacles")]
        obstacle_count: usize,
    },
    PickPlace {
        heavy: bool,
    },
    Arm {
        broken_joint: Option<usize>,
        #[serde(default = "default_goal_radius")]
        goal_radius: f64,
        #[serde(default = "default_goal_distance")]
        min_goal_distance: f64,
    },
}

fn default_true() -> bool {
    true
}

fn default_obstacles() -> usize {
    2
}

fn default_goal_radius() -> f64 {
    0.5
}

fn default_goal_distance() -> f64 {
    1.5
}

/// Algorithm hyperparameters. Fields irrelevant to the selected algorithm
/// are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Params {
    /// Expansions per planning call.
    pub expansion_budget: usize,
    /// Planning updates per executed action (large-space loop).
    pub planning_updates: usize,
    /// States sampled per planning update.
    pub batch_size: usize,
    /// Hypersphere radius; also the KNN baseline's neighbor radius.
    pub sphere_radius: f64,
    /// Discrepancy threshold.
    pub discrepancy_threshold: f64,
    /// RBF length scale of the kernel value estimator.
    pub gamma: f64,
    /// Factor applied to the environment metric inside the kernel weights,
    /// fixing the units the length scale is expressed in (e.g. degrees per
    /// joint bin on the arm lattice).
    pub kernel_metric_scale: f64,
    /// Gradient step size of the fit; unused by the kernel estimator, which
    /// solves its fit exactly, but kept so configs stay complete.
    pub fit_learning_rate: f64,
    pub buffer_capacity: usize,
    /// Kernel estimator dataset cap (oldest-first eviction beyond it).
    pub kernel_capacity: usize,
    /// Q-learning step size.
    pub learning_rate: f64,
    /// Q-learning exploration probability.
    pub explore_prob: f64,
    /// Initialize Q from the model-rolled heuristic instead of the bare cost.
    pub q_init_from_model: bool,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            expansion_budget: 5,
            planning_updates: 5,
            batch_size: 64,
            sphere_radius: 0.02,
            discrepancy_threshold: 0.01,
            gamma: 10.0,
            kernel_metric_scale: 1.0,
            fit_learning_rate: 0.001,
            buffer_capacity: 100_000,
            kernel_capacity: 50_000,
            learning_rate: 0.5,
            explore_prob: 0.1,
            q_init_from_model: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = toml::from_str(text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialization cannot fail")
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.trials == 0 {
            bail!("experiment.trials: must be at least 1");
        }
        if self.experiment.max_steps == 0 {
            bail!("experiment.max_steps: must be at least 1");
        }
        if self.params.expansion_budget == 0 {
            bail!("params.expansion_budget: must be at least 1");
        }
        if self.params.batch_size == 0 || self.params.batch_size > self.params.buffer_capacity {
            bail!("params.batch_size: must be in 1..=params.buffer_capacity");
        }
        if self.params.sphere_radius <= 0.0 {
            bail!("params.sphere_radius: must be positive");
        }
        if self.params.discrepancy_threshold < 0.0 {
            bail!("params.discrepancy_threshold: must be non-negative");
        }
        if self.params.gamma <= 0.0 {
            bail!("params.gamma: must be positive");
        }
        if let EnvSpec::Icy { ice_fraction, .. } = &self.environment {
            if !(0.0..=0.95).contains(ice_fraction) {
                bail!("environment.ice_fraction: must be within 0..=0.95");
            }
        }
        Ok(())
    }
}

/// Build the per-seed environment instance.
pub fn build_env(spec: &EnvSpec, seed: u64) -> Arc<dyn Environment> {
    match spec {
        EnvSpec::Icy {
            width,
            height,
            ice_fraction,
            verified_safe,
        } => Arc::new(IcyGrid::generate(
            &IcyGridParams {
                width: *width,
                height: *height,
                ice_fraction: *ice_fraction,
                verified_safe: *verified_safe,
            },
            seed,
        )),
        EnvSpec::Pushing {
            with_obstacles,
            obstacle_count,
        } => Arc::new(PlanarPushWorld::generate(
            &PushParams {
                with_obstacles: *with_obstacles,
                obstacle_count: *obstacle_count,
            },
            seed,
        )),
        EnvSpec::PickPlace { heavy } => Arc::new(PickPlaceGrid::scenario(*heavy)),
        EnvSpec::Arm {
            broken_joint,
            goal_radius,
            min_goal_distance,
        } => Arc::new(ArmLattice::generate(
            &ArmParams {
                broken_joint: *broken_joint,
                goal_radius: *goal_radius,
                min_goal_distance: *min_goal_distance,
            },
            seed,
        )),
    }
}

/// Serializable instance dump so runs are replayable from the output alone.
#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceDump {
    Icy(IcyGridSnapshot),
    Pushing(PlanarPushWorld),
    PickPlace(PickPlaceGrid),
    Arm(ArmLattice),
}

/// Icy instances store the ice as a sorted list for stable output.
#[derive(Serialize)]
pub struct IcyGridSnapshot {
    pub width: i64,
    pub height: i64,
    pub ice: Vec<(i64, i64)>,
    pub start: (i64, i64),
    pub goal: (i64, i64),
}

pub fn dump_instance(spec: &EnvSpec, seed: u64) -> InstanceDump {
    match spec {
        EnvSpec::Icy {
            width,
            height,
            ice_fraction,
            verified_safe,
        } => {
            let grid = IcyGrid::generate(
                &IcyGridParams {
                    width: *width,
                    height: *height,
                    ice_fraction: *ice_fraction,
                    verified_safe: *verified_safe,
                },
                seed,
            );
            let mut ice: Vec<(i64, i64)> = grid.ice.iter().copied().collect();
            ice.sort_unstable();
            InstanceDump::Icy(IcyGridSnapshot {
                width: grid.width,
                height: grid.height,
                ice,
                start: grid.start,
                goal: grid.goal,
            })
        }
        EnvSpec::Pushing {
            with_obstacles,
            obstacle_count,
        } => InstanceDump::Pushing(PlanarPushWorld::generate(
            &PushParams {
                with_obstacles: *with_obstacles,
                obstacle_count: *obstacle_count,
            },
            seed,
        )),
        EnvSpec::PickPlace { heavy } => InstanceDump::PickPlace(PickPlaceGrid::scenario(*heavy)),
        EnvSpec::Arm {
            broken_joint,
            goal_radius,
            min_goal_distance,
        } => InstanceDump::Arm(ArmLattice::generate(
            &ArmParams {
                broken_joint: *broken_joint,
                goal_radius: *goal_radius,
                min_goal_distance: *min_goal_distance,
            },
            seed,
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ExperimentConfig {
        ExperimentConfig {
            experiment: ExperimentSection {
                name: "icy-40".into(),
                algorithm: Algorithm::CmaxSmall,
                base_seed: 7,
                trials: 50,
                max_steps: 50_000,
            },
            environment: EnvSpec::Icy {
                width: 100,
                height: 100,
                ice_fraction: 0.4,
                verified_safe: true,
            },
            params: Params {
                expansion_budget: 20,
                ..Params::default()
            },
        }
    }

    #[test]
    fn toml_round_trip_is_lossless() {
        let cfg = sample();
        let text = cfg.to_toml();
        let parsed = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(parsed, cfg);
        // and a second bounce yields identical text
        assert_eq!(parsed.to_toml(), text);
    }

    #[test]
    fn validation_reports_field_paths() {
        let mut cfg = sample();
        cfg.params.batch_size = 0;
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("params.batch_size"), "got: {err}");
    }

    #[test]
    fn parses_a_handwritten_file() {
        let text = r#"
[experiment]
name = "pushing"
algorithm = "cmax-large"
trials = 20
max_steps = 1000

[environment]
kind = "pushing"
with_obstacles = true

[params]
expansion_budget = 5
gamma = 0.02
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.experiment.algorithm, Algorithm::CmaxLarge);
        assert!(matches!(cfg.environment, EnvSpec::Pushing { with_obstacles: true, obstacle_count: 2 }));
        assert_eq!(cfg.params.gamma, 0.02);
        // unspecified fields fall back to defaults
        assert_eq!(cfg.params.batch_size, 64);
    }
}
