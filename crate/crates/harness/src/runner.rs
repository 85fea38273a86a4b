//! Seeded trial batches: one environment instance and one trial per seed,
//! independent across seeds, parallelizable without changing results.

use crate::config::{build_env, Algorithm, EnvSpec, ExperimentConfig, Params};
use anyhow::{Context, Result};
use cmax::agent::{run_large, run_small, LargeConfig, SmallConfig, TrialRecord};
use cmax::baselines::{run_knn_residual, run_qlearning, run_rtaa_patching, QLearningConfig};
use cmax::core::{goal_predicate_of, heuristic_of, metric_of, Environment};
use cmax::value::KernelValueEstimator;
use rayon::prelude::*;
use std::sync::Arc;

/// Stream separator so the instance generator and the algorithm's own
/// randomness never share a seed.
const ALGORITHM_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn small_config(cfg: &ExperimentConfig) -> SmallConfig {
    SmallConfig {
        expansion_budget: cfg.params.expansion_budget,
        max_steps: cfg.experiment.max_steps,
    }
}

pub fn large_config(cfg: &ExperimentConfig) -> LargeConfig {
    LargeConfig {
        expansion_budget: cfg.params.expansion_budget,
        planning_updates: cfg.params.planning_updates,
        batch_size: cfg.params.batch_size,
        sphere_radius: cfg.params.sphere_radius,
        discrepancy_threshold: cfg.params.discrepancy_threshold,
        buffer_capacity: cfg.params.buffer_capacity,
        max_steps: cfg.experiment.max_steps,
    }
}

/// Kernel estimator wired to an environment's heuristic, metric, and goals.
/// The metric entering the RBF weights is the environment metric times the
/// configured unit scale; the replacement radius stays in environment units.
pub fn kernel_estimator(env: &Arc<dyn Environment>, params: &Params) -> KernelValueEstimator {
    let base_metric = metric_of(env.clone());
    let scale = params.kernel_metric_scale;
    let scaled: cmax::core::MetricFn =
        std::sync::Arc::new(move |a: &cmax::core::State, b: &cmax::core::State| {
            scale * base_metric(a, b)
        });
    KernelValueEstimator::new(
        params.gamma,
        heuristic_of(env.clone()),
        scaled,
        goal_predicate_of(env.clone()),
        params.sphere_radius / 10.0,
    )
    .with_capacity(params.kernel_capacity)
    .with_metric_scale(scale)
}

/// Run the trial for one seed index. Deterministic in (config, index).
pub fn run_trial(cfg: &ExperimentConfig, index: usize) -> TrialRecord {
    let seed = cfg.experiment.base_seed + index as u64;
    let env = build_env(&cfg.environment, seed);
    let algo_seed = seed ^ ALGORITHM_STREAM;
    match cfg.experiment.algorithm {
        Algorithm::CmaxSmall => run_small(&env, &small_config(cfg)),
        Algorithm::CmaxLarge => {
            let mut estimator = kernel_estimator(&env, &cfg.params);
            run_large(&env, &large_config(cfg), &mut estimator, algo_seed)
        }
        Algorithm::RtaaPatching => run_rtaa_patching(&env, &small_config(cfg)),
        Algorithm::QLearning => run_qlearning(
            &env,
            &QLearningConfig {
                learning_rate: cfg.params.learning_rate,
                explore_prob: cfg.params.explore_prob,
                max_steps: cfg.experiment.max_steps,
                init_from_model: cfg.params.q_init_from_model,
            },
            algo_seed,
        ),
        Algorithm::KnnResidual => {
            let mut estimator = kernel_estimator(&env, &cfg.params);
            run_knn_residual(&env, &large_config(cfg), &mut estimator, algo_seed)
        }
    }
}

/// One trial per seed. `jobs = 0` uses all cores; results are ordered by
/// seed and identical for every job count.
pub fn run_batch(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")?;
    Ok(pool.install(|| {
        (0..cfg.experiment.trials)
            .into_par_iter()
            .map(|index| run_trial(cfg, index))
            .collect()
    }))
}

/// Stable JSON for a whole batch (no wall-clock fields).
pub fn records_json(records: &[TrialRecord]) -> String {
    let mut out = String::from("[\n");
    for (i, record) in records.iter().enumerate() {
        out.push_str("  ");
        out.push_str(&record.deterministic_json());
        if i + 1 < records.len() {
            out.push(',');
        }
        out.push('\n');
    }
    out.push(']');
    out
}

/// Per-step planning times, one row per (seed, step).
pub fn timings_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from("seed_index,step,plan_time_us\n");
    for (i, record) in records.iter().enumerate() {
        for (step, us) in record.plan_time_us.iter().enumerate() {
            out.push_str(&format!("{i},{step},{us}\n"));
        }
    }
    out
}

/// JSON dump of every generated instance in the batch.
pub fn instances_json(spec: &EnvSpec, base_seed: u64, trials: usize) -> Result<String> {
    let dumps: Vec<crate::config::InstanceDump> = (0..trials)
        .map(|i| crate::config::dump_instance(spec, base_seed + i as u64))
        .collect();
    serde_json::to_string_pretty(&dumps).context("serializing instances")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{EnvSpec, ExperimentSection};

    fn icy_config(trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            experiment: ExperimentSection {
                name: "test".into(),
                algorithm: Algorithm::CmaxSmall,
                base_seed: 3,
                trials,
                max_steps: 4096,
            },
            environment: EnvSpec::Icy {
                width: 8,
                height: 8,
                ice_fraction: 0.2,
                verified_safe: true,
            },
            params: Params {
                expansion_budget: 4,
                ..Params::default()
            },
        }
    }

    #[test]
    fn batches_are_byte_identical_across_runs() {
        let cfg = icy_config(2);
        let a = run_batch(&cfg, 1).unwrap();
        let b = run_batch(&cfg, 1).unwrap();
        assert_eq!(records_json(&a), records_json(&b));
    }

    #[test]
    fn batches_are_identical_across_job_counts() {
        let cfg = icy_config(4);
        let serial = run_batch(&cfg, 1).unwrap();
        let parallel = run_batch(&cfg, 8).unwrap();
        assert_eq!(records_json(&serial), records_json(&parallel));
    }

    #[test]
    fn one_record_per_seed_within_cutoff() {
        let cfg = icy_config(5);
        let records = run_batch(&cfg, 0).unwrap();
        assert_eq!(records.len(), 5);
        for r in &records {
            assert!(r.steps <= cfg.experiment.max_steps);
        }
    }
}
