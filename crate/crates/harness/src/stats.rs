//! Trial statistics. Step statistics are computed over successful trials
//! only; the success rate covers all trials.

use anyhow::Result;
use cmax::agent::TrialRecord;
use serde::Serialize;
use std::io::Write;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub condition: String,
    pub n: usize,
    pub success_rate: f64,
    /// Mean steps among successful trials; absent when none succeeded.
    pub mean_steps: Option<f64>,
    /// Sample standard deviation over the square root of the success count;
    /// zero for a single success.
    pub stderr_steps: Option<f64>,
}

pub fn summarize(algorithm: &str, condition: &str, records: &[TrialRecord]) -> SummaryRow {
    assert!(!records.is_empty(), "summarize needs at least one trial");
    let successes: Vec<f64> = records
        .iter()
        .filter(|r| r.reached_goal)
        .map(|r| r.steps as f64)
        .collect();
    let (mean, stderr) = match successes.len() {
        0 => (None, None),
        1 => (Some(successes[0]), Some(0.0)),
        n => {
            let mean = successes.iter().sum::<f64>() / n as f64;
            let var = successes.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>()
                / (n as f64 - 1.0);
            (Some(mean), Some(var.sqrt() / (n as f64).sqrt()))
        }
    };
    SummaryRow {
        algorithm: algorithm.to_string(),
        condition: condition.to_string(),
        n: records.len(),
        success_rate: successes.len() as f64 / records.len() as f64,
        mean_steps: mean,
        stderr_steps: stderr,
    }
}

pub const SUMMARY_HEADER: [&str; 6] = [
    "algorithm",
    "condition",
    "n",
    "success_rate",
    "mean_steps",
    "stderr_steps",
];

pub fn write_summary_csv<W: Write>(rows: &[SummaryRow], sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(SUMMARY_HEADER)?;
    for row in rows {
        writer.write_record([
            row.algorithm.clone(),
            row.condition.clone(),
            row.n.to_string(),
            format!("{:.4}", row.success_rate),
            row.mean_steps.map(|m| format!("{m:.4}")).unwrap_or_default(),
            row.stderr_steps.map(|s| format!("{s:.4}")).unwrap_or_default(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(steps: usize, reached: bool) -> TrialRecord {
        let mut r = TrialRecord::new_empty();
        r.steps = steps;
        r.reached_goal = reached;
        r
    }

    #[test]
    fn mean_and_stderr_over_successes() {
        let rows = [record(1, true), record(2, true), record(3, true)];
        let summary = summarize("x", "c", &rows);
        assert_eq!(summary.mean_steps, Some(2.0));
        assert!((summary.stderr_steps.unwrap() - 0.5774).abs() < 1e-4);
        assert_eq!(summary.success_rate, 1.0);
    }

    #[test]
    fn single_trial_has_zero_stderr() {
        let summary = summarize("x", "c", &[record(9, true)]);
        assert_eq!(summary.mean_steps, Some(9.0));
        assert_eq!(summary.stderr_steps, Some(0.0));
    }

    #[test]
    fn failures_are_excluded_from_step_stats() {
        let rows = [record(10, true), record(99_999, false), record(20, true)];
        let summary = summarize("x", "c", &rows);
        assert_eq!(summary.mean_steps, Some(15.0));
        assert!((summary.success_rate - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_successes_leave_steps_empty() {
        let summary = summarize("x", "c", &[record(5, false)]);
        assert_eq!(summary.success_rate, 0.0);
        assert_eq!(summary.mean_steps, None);
        assert_eq!(summary.stderr_steps, None);
    }

    #[test]
    fn csv_has_the_fixed_header_and_column_order() {
        let rows = vec![
            summarize("cmax-small", "ice-0.4", &[record(3, true)]),
            summarize("qlearning", "ice-0.4", &[record(7, false)]),
        ];
        let mut out = Vec::new();
        write_summary_csv(&rows, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "algorithm,condition,n,success_rate,mean_steps,stderr_steps"
        );
        assert_eq!(lines.next().unwrap(), "cmax-small,ice-0.4,1,1.0000,3.0000,0.0000");
        assert_eq!(lines.next().unwrap(), "qlearning,ice-0.4,1,0.0000,,");
    }
}
