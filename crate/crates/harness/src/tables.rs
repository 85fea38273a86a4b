//! Reproduction tables: icy gridworld (three methods at three ice levels)
//! and planar pushing (penalization, residual learning, accurate model).

use crate::config::{Algorithm, EnvSpec, ExperimentConfig, ExperimentSection, Params};
use crate::runner::run_batch;
use crate::stats::{summarize, SummaryRow};
use anyhow::Result;

pub fn icy_config(algorithm: Algorithm, ice_fraction: f64, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        experiment: ExperimentSection {
            name: format!("icy-{}", (ice_fraction * 100.0) as i64),
            algorithm,
            base_seed: 0,
            trials,
            max_steps: 200_000,
        },
        environment: EnvSpec::Icy {
            width: 100,
            height: 100,
            ice_fraction,
            verified_safe: true,
        },
        params: Params {
            // single-expansion regime: with an exact heuristic and an
            // accurate model this walks optimal paths, and its degradation
            // under heavy ice matches the reported behavior
            expansion_budget: 1,
            learning_rate: 0.5,
            explore_prob: 0.1,
            q_init_from_model: false,
            ..Params::default()
        },
    }
}

/// The icy table: all algorithms share instances seed-for-seed.
pub fn icy_table(trials: usize, jobs: usize) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    for &fraction in &[0.0, 0.4, 0.8] {
        for algorithm in [Algorithm::CmaxSmall, Algorithm::RtaaPatching, Algorithm::QLearning] {
            let cfg = icy_config(algorithm, fraction, trials);
            let records = run_batch(&cfg, jobs)?;
            rows.push(summarize(algorithm.name(), &cfg.experiment.name, &records));
        }
    }
    Ok(rows)
}

pub fn pushing_config(algorithm: Algorithm, with_obstacles: bool, trials: usize) -> ExperimentConfig {
    ExperimentConfig {
        experiment: ExperimentSection {
            name: if with_obstacles {
                "pushing-obstacles".into()
            } else {
                "pushing-free".into()
            },
            algorithm,
            base_seed: 0,
            trials,
            max_steps: 1000,
        },
        environment: EnvSpec::Pushing {
            with_obstacles,
            obstacle_count: 2,
        },
        params: Params {
            expansion_budget: 5,
            planning_updates: 5,
            batch_size: 64,
            sphere_radius: 0.02,
            discrepancy_threshold: 0.01,
            // length scale on the order of the per-action offset: the
            // residual being fit is local (obstacle contact)
            gamma: 0.01,
            ..Params::default()
        },
    }
}

/// The pushing table: accurate-model run plus the two methods that must cope
/// with unmodeled obstacles.
pub fn pushing_table(trials: usize, jobs: usize) -> Result<Vec<SummaryRow>> {
    let mut rows = Vec::new();
    let accurate = pushing_config(Algorithm::CmaxLarge, false, trials);
    let records = run_batch(&accurate, jobs)?;
    rows.push(summarize("cmax-large", "accurate-model", &records));
    for algorithm in [Algorithm::CmaxLarge, Algorithm::KnnResidual] {
        let cfg = pushing_config(algorithm, true, trials);
        let records = run_batch(&cfg, jobs)?;
        rows.push(summarize(algorithm.name(), "inaccurate-model", &records));
    }
    Ok(rows)
}
