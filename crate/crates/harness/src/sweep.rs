//! Parameter sweeps over the kernel length scale and the hypersphere radius.
//! Each grid value gets ten seeded trials at the shared-instance cutoff for
//! that sweep (100 steps for the length scale, 400 for the radius).

use crate::config::ExperimentConfig;
use crate::runner::run_batch;
use crate::stats::summarize;
use anyhow::Result;
use serde::Serialize;
use std::fmt;
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParameter {
    /// RBF length scale of the kernel value estimator.
    Gamma,
    /// Hypersphere radius.
    Delta,
}

impl SweepParameter {
    pub fn default_grid(&self) -> Vec<f64> {
        match self {
            SweepParameter::Gamma => vec![0.1, 1.0, 3.0, 10.0, 30.0, 100.0],
            SweepParameter::Delta => vec![0.005, 0.01, 0.02, 0.05, 0.1, 0.2],
        }
    }

    pub fn trials(&self) -> usize {
        10
    }

    pub fn cutoff(&self) -> usize {
        match self {
            SweepParameter::Gamma => 100,
            SweepParameter::Delta => 400,
        }
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepParameter::Gamma => write!(f, "gamma"),
            SweepParameter::Delta => write!(f, "delta"),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub parameter: String,
    pub value: f64,
    pub n: usize,
    pub success_rate: f64,
    pub mean_steps: Option<f64>,
    pub stderr_steps: Option<f64>,
}

/// Run the sweep: the base config supplies the environment and the untouched
/// hyperparameters; trial count and cutoff are pinned per parameter.
pub fn sweep(
    base: &ExperimentConfig,
    parameter: SweepParameter,
    values: &[f64],
    jobs: usize,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &value in values {
        let mut cfg = base.clone();
        cfg.experiment.trials = parameter.trials();
        cfg.experiment.max_steps = parameter.cutoff();
        match parameter {
            SweepParameter::Gamma => cfg.params.gamma = value,
            SweepParameter::Delta => cfg.params.sphere_radius = value,
        }
        let records = run_batch(&cfg, jobs)?;
        let summary = summarize(cfg.experiment.algorithm.name(), &cfg.experiment.name, &records);
        rows.push(SweepRow {
            parameter: parameter.to_string(),
            value,
            n: summary.n,
            success_rate: summary.success_rate,
            mean_steps: summary.mean_steps,
            stderr_steps: summary.stderr_steps,
        });
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["parameter", "value", "n", "success_rate", "mean_steps", "stderr_steps"])?;
    for row in rows {
        writer.write_record([
            row.parameter.clone(),
            format!("{}", row.value),
            row.n.to_string(),
            format!("{:.4}", row.success_rate),
            row.mean_steps.map(|m| format!("{m:.4}")).unwrap_or_default(),
            row.stderr_steps.map(|s| format!("{s:.4}")).unwrap_or_default(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// SVG with mean steps and success rate against the swept value.
pub fn sweep_chart(parameter: SweepParameter, rows: &[SweepRow]) -> String {
    let steps: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.mean_steps.map(|m| (r.value, m)))
        .collect();
    let success: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.value, r.success_rate * 100.0))
        .collect();
    crate::plot::line_chart(
        &format!("sweep over {parameter}"),
        &parameter.to_string(),
        "mean steps / success %",
        &[
            crate::plot::Series {
                name: "mean steps",
                points: steps,
            },
            crate::plot::Series {
                name: "success %",
                points: success,
            },
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Algorithm, EnvSpec, ExperimentSection, Params};
    use crate::runner::run_batch;

    fn arm_base(trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            experiment: ExperimentSection {
                name: "arm".into(),
                algorithm: Algorithm::CmaxLarge,
                base_seed: 0,
                trials,
                max_steps: 100,
            },
            environment: EnvSpec::Arm {
                broken_joint: Some(1),
                goal_radius: 0.5,
                min_goal_distance: 1.5,
            },
            params: Params {
                expansion_budget: 3,
                planning_updates: 1,
                batch_size: 4,
                sphere_radius: 1.0,
                discrepancy_threshold: 1.0,
                gamma: 10.0,
                ..Params::default()
            },
        }
    }

    #[test]
    fn gamma_sweep_emits_one_row_per_value_with_ten_trials() {
        let rows = sweep(&arm_base(3), SweepParameter::Gamma, &[3.0, 10.0], 0).unwrap();
        assert_eq!(rows.len(), 2);
        for row in &rows {
            assert_eq!(row.n, 10, "sweep pins the trial count");
        }
    }

    #[test]
    fn single_value_sweep_reduces_to_a_batch_summary() {
        let base = arm_base(10);
        let rows = sweep(&base, SweepParameter::Gamma, &[10.0], 0).unwrap();
        let mut cfg = base.clone();
        cfg.experiment.trials = 10;
        cfg.experiment.max_steps = 100;
        let records = run_batch(&cfg, 0).unwrap();
        let summary = summarize("cmax-large", "arm", &records);
        assert_eq!(rows[0].success_rate, summary.success_rate);
        assert_eq!(rows[0].mean_steps, summary.mean_steps);
    }

    #[test]
    fn delta_sweep_uses_the_400_step_cutoff() {
        assert_eq!(SweepParameter::Delta.cutoff(), 400);
        assert_eq!(SweepParameter::Gamma.cutoff(), 100);
    }
}
