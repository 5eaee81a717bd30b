//! One closed-loop grabbing run: dwell, sample, extract, localize, fuse,
//! step the procedure, teleport to the commanded pose, repeat.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::fieldsim::{sample_sensor, splitmix64, FieldScene, SensorPose};
use crate::geom::{Line3, RigidTransform, Vec3};
use crate::grasp::{
    step_procedure, GraspError, LocalizationOutcome, PoseCommand, ProcedurePhase, ProcedureState,
};
use crate::localize::{localize_conductor, ConductorEstimate};
use crate::sigproc::{extract_field_vector, DEFAULT_AMPLITUDE_FLOOR};

use super::config::ScenarioConfig;
use super::HarnessError;

/// Commanded positions closer than this count as the same stopping point.
const STOP_DEDUP_EPS: f64 = 1e-9;

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    Grabbed,
    IterationLimit,
    Failed { reason: String },
}

/// Everything observed in one procedure cycle (one dwell).
#[derive(Debug, Clone, PartialEq)]
pub struct CycleRecord {
    /// Analysis cycles consumed so far, 1-based.
    pub cycle: u32,
    /// Simulation time at the start of the dwell, seconds.
    pub t_s: f64,
    /// Pose held while measuring, base frame.
    pub ee_pose: RigidTransform,
    /// First window's extracted field vectors, sensor frames.
    pub field_m1_t: Option<Vec3>,
    pub field_m2_t: Option<Vec3>,
    /// Fused conductor estimate for the dwell, base frame.
    pub estimate: Option<ConductorEstimate>,
    /// Whether the cycle fed the degenerate branch instead of an estimate.
    pub degenerate: bool,
    /// Phase entered by this cycle's transition.
    pub phase: &'static str,
    pub command: Option<PoseCommand>,
}

/// Full record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLog {
    pub start_index: usize,
    pub records: Vec<CycleRecord>,
    pub outcome: RunOutcome,
    /// End-effector pose after the last executed command, base frame.
    pub final_pose: RigidTransform,
    /// Ground truth from the scene (first conductor's closest point to the
    /// base), base frame, when the scene has a conductor.
    pub true_grab_point: Option<Vec3>,
}

/// Compact per-run result, also the JSON document `report` consumes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub start_index: usize,
    pub outcome: RunOutcome,
    pub cycles: u32,
    pub stopping_points: u32,
    pub final_position_m: Vec3,
    pub final_rotation: [[f64; 3]; 3],
    /// Distance from the final position to the true grab point, when the
    /// scene provided one.
    pub grab_error_m: Option<f64>,
}

impl RunSummary {
    pub fn from_json_str(s: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(s).map_err(|e| HarnessError::Schema(e.to_string()))
    }

    pub fn to_json_string(&self) -> Result<String, HarnessError> {
        let mut s =
            serde_json::to_string_pretty(self).map_err(|e| HarnessError::Schema(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }
}

impl TrajectoryLog {
    /// Distinct positions commanded by rotate/midpoint/intermittent
    /// transitions: the waypoints the tool dwelt at before the final linear
    /// approach. The grab point itself is not a stopping point.
    pub fn stopping_points(&self) -> u32 {
        let mut kept: Vec<Vec3> = Vec::new();
        for r in &self.records {
            if !matches!(
                r.phase,
                "rotate_tool" | "move_midpoint" | "move_intermittent"
            ) {
                continue;
            }
            let Some(cmd) = &r.command else { continue };
            if kept
                .iter()
                .all(|p| p.distance_to(cmd.position) > STOP_DEDUP_EPS)
            {
                kept.push(cmd.position);
            }
        }
        kept.len() as u32
    }

    /// Cycles that entered the tool-rotation recovery branch.
    pub fn rotate_tool_cycles(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.phase == "rotate_tool")
            .count()
    }

    pub fn summary(&self) -> RunSummary {
        RunSummary {
            start_index: self.start_index,
            outcome: self.outcome.clone(),
            cycles: self.records.last().map(|r| r.cycle).unwrap_or(0),
            stopping_points: self.stopping_points(),
            final_position_m: self.final_pose.translation,
            final_rotation: self.final_pose.rotation.to_array(),
            grab_error_m: self
                .true_grab_point
                .map(|p| self.final_pose.translation.distance_to(p)),
        }
    }

    /// One CSV row per cycle. Optional fields are left empty on cycles that
    /// produced no estimate or no command.
    pub fn to_csv<W: Write>(&self, w: W) -> Result<(), HarnessError> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = ["cycle", "t_s", "phase", "degenerate"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(pose_columns("ee"));
        header.extend(["b1x_t", "b1y_t", "b1z_t", "b2x_t", "b2y_t", "b2z_t"].map(String::from));
        header.extend(
            [
                "est_px_m",
                "est_py_m",
                "est_pz_m",
                "est_dx",
                "est_dy",
                "est_dz",
                "est_angle_rad",
                "est_consistency",
            ]
            .map(String::from),
        );
        header.extend(pose_columns("cmd"));
        out.write_record(&header)?;

        for r in &self.records {
            let mut row: Vec<String> = vec![
                r.cycle.to_string(),
                fmt(r.t_s),
                r.phase.to_string(),
                (r.degenerate as u8).to_string(),
            ];
            push_pose(&mut row, &r.ee_pose);
            push_opt_vec3(&mut row, r.field_m1_t);
            push_opt_vec3(&mut row, r.field_m2_t);
            match &r.estimate {
                Some(est) => {
                    push_vec3(&mut row, est.line.point());
                    push_vec3(&mut row, est.line.direction().as_vec3());
                    row.push(fmt(est.angle_between_fields));
                    row.push(fmt(est.magnitude_consistency));
                }
                None => row.extend(std::iter::repeat_n(String::new(), 8)),
            }
            match &r.command {
                Some(cmd) => push_pose(
                    &mut row,
                    &RigidTransform::new(cmd.orientation, cmd.position),
                ),
                None => row.extend(std::iter::repeat_n(String::new(), 12)),
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn pose_columns(prefix: &str) -> Vec<String> {
    let mut cols = vec![
        format!("{prefix}_x_m"),
        format!("{prefix}_y_m"),
        format!("{prefix}_z_m"),
    ];
    for row in 0..3 {
        for col in 0..3 {
            cols.push(format!("{prefix}_r{row}{col}"));
        }
    }
    cols
}

fn fmt(v: f64) -> String {
    // `Display` for f64 prints the shortest representation that parses back
    // to the same value, so logs are lossless and byte-stable.
    format!("{v}")
}

fn push_vec3(row: &mut Vec<String>, v: Vec3) {
    row.push(fmt(v.x));
    row.push(fmt(v.y));
    row.push(fmt(v.z));
}

fn push_opt_vec3(row: &mut Vec<String>, v: Option<Vec3>) {
    match v {
        Some(v) => push_vec3(row, v),
        None => row.extend(std::iter::repeat_n(String::new(), 3)),
    }
}

fn push_pose(row: &mut Vec<String>, pose: &RigidTransform) {
    push_vec3(row, pose.translation);
    for r in pose.rotation.to_array() {
        for v in r {
            row.push(fmt(v));
        }
    }
}

/// Averages several estimates of the same conductor taken within one dwell.
///
/// Directions are sign-aligned to the first estimate before averaging (an
/// AC field vector's sign is arbitrary, and near-axis canonical directions
/// can flicker sign between windows); points are averaged component-wise in
/// the canonical (closest-to-origin) form. Diagnostics are averaged.
pub fn estimate_fusion(estimates: &[ConductorEstimate]) -> Result<ConductorEstimate, HarnessError> {
    let first = estimates.first().ok_or(HarnessError::NoEstimates)?;
    if estimates.len() == 1 {
        return Ok(*first);
    }
    let reference = first.line.direction().as_vec3();
    let mut dir_sum = Vec3::zero();
    let mut point_sum = Vec3::zero();
    let mut angle_sum = 0.0;
    let mut consistency_sum = 0.0;
    for est in estimates {
        let d = est.line.direction().as_vec3();
        dir_sum = dir_sum + if d.dot(reference) < 0.0 { -d } else { d };
        point_sum = point_sum + est.line.point();
        angle_sum += est.angle_between_fields;
        consistency_sum += est.magnitude_consistency;
    }
    let n = estimates.len() as f64;
    let direction = (dir_sum / n).normalized()?;
    Ok(ConductorEstimate {
        line: Line3::new(point_sum / n, direction),
        angle_between_fields: angle_sum / n,
        magnitude_consistency: consistency_sum / n,
    })
}

/// The scene as seeded for one run: every start pose draws an independent
/// noise stream derived from the master seed, so batches decorrelate while
/// staying reproducible. Offline tools sampling "the same scene as run N"
/// must build it through here.
pub fn scene_for_run(cfg: &ScenarioConfig, start_index: usize) -> Result<FieldScene, HarnessError> {
    cfg.scene_with_seed(splitmix64(cfg.seed ^ start_index as u64))
}

/// Runs the full procedure from one start pose until the conductor is
/// grabbed or the cycle budget runs out; both end states are recorded in
/// the log rather than returned as errors. Hard errors are reserved for
/// broken configs and scenes.
///
/// Each cycle: dwell at the current pose collecting one window per sensor
/// per window slot, extract a signed field vector per window, localize in
/// the m1 frame, fuse the dwell's estimates, transform into the base frame
/// through the current end-effector pose and the m1 mount, then take one
/// procedure step and execute its pose command instantaneously.
pub fn run_closed_loop(
    cfg: &ScenarioConfig,
    start_index: usize,
) -> Result<TrajectoryLog, HarnessError> {
    cfg.validate()?;
    let scene = scene_for_run(cfg, start_index)?;
    let rig = cfg.rig()?;
    let mount1 = cfg.mount_m1_transform()?;
    let mount2 = cfg.mount_m2_transform()?;
    let base = cfg.base_transform()?;
    let params = cfg.procedure_params();

    let true_grab_point = scene.conductors.first().map(|c| {
        c.line
            .transformed(&base.inverse())
            .closest_point_to(Vec3::zero())
    });

    let mut ee = cfg.start_transform(start_index)?;
    let mut state = ProcedureState::idle().begin().command_grab();
    let mut t = 0.0;
    let windows = cfg.windows_per_dwell();
    let window_duration = cfg.window_duration();
    let mut records = Vec::new();

    let outcome = loop {
        let tool_world = base.compose(&ee);
        let m1_world = SensorPose::new(tool_world.compose(&mount1));
        let m2_world = SensorPose::new(tool_world.compose(&mount2));

        let mut dwell_estimates = Vec::new();
        let mut first_fields: Option<(Vec3, Vec3)> = None;
        for w in 0..windows {
            let t0 = t + w as f64 * window_duration;
            let w1 = sample_sensor(&scene, &m1_world, cfg.sample_rate_hz, cfg.window_len, t0)?;
            let w2 = sample_sensor(&scene, &m2_world, cfg.sample_rate_hz, cfg.window_len, t0)?;
            let f1 = extract_field_vector(&w1, cfg.target_frequency_hz, DEFAULT_AMPLITUDE_FLOOR);
            let f2 = extract_field_vector(&w2, cfg.target_frequency_hz, DEFAULT_AMPLITUDE_FLOOR);
            // A window that yields no usable estimate (dead signal,
            // parallel fields) contributes nothing; if the whole dwell is
            // unusable the cycle takes the degenerate branch, whose
            // re-orientation is also the right recovery here.
            let (Ok(f1), Ok(f2)) = (f1, f2) else { continue };
            if first_fields.is_none() {
                first_fields = Some((f1.vector, f2.vector));
            }
            if let Ok(est) = localize_conductor(&f1, &f2, &rig, params.alpha_min) {
                dwell_estimates.push(est);
            }
        }

        let estimate_base = if dwell_estimates.is_empty() {
            None
        } else {
            let fused = estimate_fusion(&dwell_estimates)?;
            let m1_in_base = ee.compose(&mount1);
            Some(ConductorEstimate {
                line: fused.line.transformed(&m1_in_base),
                ..fused
            })
        };
        let outcome_est = match &estimate_base {
            Some(est) => LocalizationOutcome::Line(est.line),
            None => LocalizationOutcome::DegenerateParallel,
        };

        match step_procedure(&state, &outcome_est, &ee, &params) {
            Ok((next, command)) => {
                records.push(CycleRecord {
                    cycle: next.cycles,
                    t_s: t,
                    ee_pose: ee,
                    field_m1_t: first_fields.map(|(a, _)| a),
                    field_m2_t: first_fields.map(|(_, b)| b),
                    estimate: estimate_base,
                    degenerate: outcome_est == LocalizationOutcome::DegenerateParallel,
                    phase: next.phase.name(),
                    command,
                });
                if let Some(cmd) = &command {
                    ee = RigidTransform::new(cmd.orientation, cmd.position);
                }
                t += params.dwell_k;
                let grabbed = matches!(next.phase, ProcedurePhase::Grabbed(_));
                state = next;
                if grabbed {
                    break RunOutcome::Grabbed;
                }
            }
            Err(GraspError::IterationLimit) => break RunOutcome::IterationLimit,
            Err(e) => {
                break RunOutcome::Failed {
                    reason: e.to_string(),
                }
            }
        }
    };

    Ok(TrajectoryLog {
        start_index,
        records,
        outcome,
        final_pose: ee,
        true_grab_point,
    })
}
