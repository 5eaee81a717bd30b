//! Aggregate statistics over a batch of runs: final-pose scatter around the
//! batch mean, in the style of repeated-grab repeatability reporting.

use serde::{Deserialize, Serialize};

use crate::geom::Vec3;

use super::runner::{RunOutcome, RunSummary, TrajectoryLog};
use super::HarnessError;

/// One run plus its deviation from the batch mean (grabbed runs only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub run: RunSummary,
    /// Distance from this run's final position to the mean final position
    /// of all grabbed runs; absent when the run did not grab.
    pub deviation_m: Option<f64>,
}

/// Batch report over one scenario's runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub rows: Vec<ReportRow>,
    pub grabbed_runs: usize,
    /// Mean of the grabbed runs' final positions.
    pub mean_final_position_m: Option<Vec3>,
    /// Scatter of the deviations: `sqrt(Σ dᵢ² / (n − 1))` over the grabbed
    /// runs; 0 for a single run, absent when nothing grabbed.
    pub deviation_std_m: Option<f64>,
}

pub fn compute_report(logs: &[TrajectoryLog]) -> RunReport {
    report_from_summaries(logs.iter().map(TrajectoryLog::summary).collect())
}

/// Same aggregation, from per-run summary documents (the offline path).
pub fn report_from_summaries(summaries: Vec<RunSummary>) -> RunReport {
    let finals: Vec<Vec3> = summaries
        .iter()
        .filter(|s| s.outcome == RunOutcome::Grabbed)
        .map(|s| s.final_position_m)
        .collect();
    let grabbed_runs = finals.len();
    // Averaging offsets from the first final keeps the mean exactly equal to
    // the common value when every run lands on the same point, so identical
    // runs report deviation 0 and std 0 rather than rounding dust.
    let mean = finals.first().map(|&base| {
        base + finals.iter().fold(Vec3::zero(), |a, &b| a + (b - base)) / grabbed_runs as f64
    });

    let rows: Vec<ReportRow> = summaries
        .into_iter()
        .map(|run| {
            let deviation_m = match (run.outcome == RunOutcome::Grabbed, mean) {
                (true, Some(m)) => Some(run.final_position_m.distance_to(m)),
                _ => None,
            };
            ReportRow { run, deviation_m }
        })
        .collect();

    let deviation_std_m = match grabbed_runs {
        0 => None,
        1 => Some(0.0),
        n => {
            let sum_sq: f64 = rows
                .iter()
                .filter_map(|r| r.deviation_m)
                .map(|d| d * d)
                .sum();
            Some((sum_sq / (n as f64 - 1.0)).sqrt())
        }
    };

    RunReport {
        rows,
        grabbed_runs,
        mean_final_position_m: mean,
        deviation_std_m,
    }
}

impl RunReport {
    pub fn from_json_str(s: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(s).map_err(|e| HarnessError::Schema(e.to_string()))
    }

    pub fn to_json_string(&self) -> Result<String, HarnessError> {
        let mut s =
            serde_json::to_string_pretty(self).map_err(|e| HarnessError::Schema(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Fixed-format text rendering for terminals and logs.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str("run  outcome          cycles  stops  final position (m)                    deviation (m)\n");
        for row in &self.rows {
            let outcome = match &row.run.outcome {
                RunOutcome::Grabbed => "grabbed".to_string(),
                RunOutcome::IterationLimit => "iteration_limit".to_string(),
                RunOutcome::Failed { .. } => "failed".to_string(),
            };
            let p = row.run.final_position_m;
            let deviation = row
                .deviation_m
                .map(|d| format!("{d:.6}"))
                .unwrap_or_else(|| "-".to_string());
            out.push_str(&format!(
                "{:>3}  {:<15}  {:>6}  {:>5}  [{:>10.6}, {:>10.6}, {:>10.6}]  {}\n",
                row.run.start_index,
                outcome,
                row.run.cycles,
                row.run.stopping_points,
                p.x,
                p.y,
                p.z,
                deviation
            ));
        }
        match (self.mean_final_position_m, self.deviation_std_m) {
            (Some(m), Some(std)) => out.push_str(&format!(
                "grabbed {}/{} runs; mean final position [{:.6}, {:.6}, {:.6}] m; deviation std {:.6} m\n",
                self.grabbed_runs,
                self.rows.len(),
                m.x,
                m.y,
                m.z,
                std
            )),
            _ => out.push_str(&format!("grabbed 0/{} runs\n", self.rows.len())),
        }
        out
    }
}
