//! Grasp pose planning on the estimated conductor and the approach-procedure
//! state machine.
//!
//! The grab point is the point on the conductor line closest to the robot
//! base. The grabbing orientation aligns the tool's y-axis with the
//! conductor and its z-axis with the approach direction (from the base side
//! toward the conductor). An intermittent point is kept a fixed offset
//! before the grab point along the approach axis; the procedure homes in on
//! it in halving steps, re-localizing after every move, and finishes with a
//! straight final approach.
//!
//! Procedure states and transitions:
//!
//! * `Idle` → (`begin`) → `AwaitCommand` → (`command_grab`) → `Localize`
//! * `Localize`, `RotateTool`, `MoveMidpoint`, `MoveIntermittent`: each
//!   [`step_procedure`] call consumes one localization outcome taken while
//!   dwelling at the current pose and picks the next command. A degenerate
//!   outcome commands a 90° rotation about the tool z-axis (`RotateTool`) to
//!   break the sensor-baseline/conductor alignment; otherwise the distance
//!   from the end effector to the intermittent point selects `MoveMidpoint`
//!   (too far: move halfway), `MoveIntermittent` (in the approach window) or
//!   `LinearApproach` (close enough for the final move).
//! * `LinearApproach` → `Grabbed` on arrival at the grab point, with the
//!   orientation frozen as commanded at approach start.
//! * `Grabbed` → `Idle`.

use std::f64::consts::FRAC_PI_2;

use thiserror::Error;

use crate::geom::{Line3, RigidTransform, RotationMatrix, UnitVec3, Vec3};
use crate::localize::DEFAULT_ALPHA_MIN;

/// Cross products with norm below this have no usable direction.
const DEGENERATE_CROSS_EPS: f64 = 1e-9;

/// Commanded and actual positions closer than this count as arrived.
const ARRIVAL_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GraspError {
    /// The conductor passes through (or numerically through) the robot
    /// base, so no grabbing frame exists.
    #[error("conductor line passes through the base; grabbing frame is undefined")]
    DegenerateGeometry,
    /// The procedure consumed its cycle budget without grabbing.
    #[error("maximum procedure iterations exceeded without a grab")]
    IterationLimit,
    /// A procedure parameter violates its documented range.
    #[error("invalid procedure parameter: {0}")]
    InvalidParams(&'static str),
}

/// Tunables of the approach procedure. Distances in meters, dwell in
/// seconds, `alpha_min` in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcedureParams {
    /// Minimum angle between measured field vectors before the geometry
    /// counts as degenerate.
    pub alpha_min: f64,
    /// Offset of the intermittent point before the grab point, along the
    /// approach axis.
    pub approach_offset_d: f64,
    /// Distance to the intermittent point below which the final linear
    /// approach starts.
    pub d_min: f64,
    /// Distance to the intermittent point above which only a halfway move
    /// is commanded per cycle.
    pub d_max: f64,
    /// Dwell time at each stopping point while collecting a measurement.
    pub dwell_k: f64,
    /// Cycle budget for one grab attempt.
    pub max_iterations: u32,
}

impl Default for ProcedureParams {
    fn default() -> Self {
        Self {
            alpha_min: DEFAULT_ALPHA_MIN,
            approach_offset_d: 0.20,
            d_min: 0.05,
            d_max: 0.40,
            dwell_k: 1.0,
            max_iterations: 50,
        }
    }
}

impl ProcedureParams {
    pub fn validate(&self) -> Result<(), GraspError> {
        if !(self.alpha_min.is_finite() && self.alpha_min > 0.0 && self.alpha_min < FRAC_PI_2) {
            return Err(GraspError::InvalidParams("alpha_min must lie in (0, π/2)"));
        }
        if !(self.approach_offset_d.is_finite() && self.approach_offset_d > 0.0) {
            return Err(GraspError::InvalidParams(
                "approach_offset_d must be positive",
            ));
        }
        if !(self.d_min.is_finite() && self.d_min > 0.0 && self.d_min < self.d_max) {
            return Err(GraspError::InvalidParams("need 0 < d_min < d_max"));
        }
        if !self.d_max.is_finite() {
            return Err(GraspError::InvalidParams("d_max must be finite"));
        }
        if !(self.dwell_k.is_finite() && self.dwell_k > 0.0) {
            return Err(GraspError::InvalidParams("dwell_k must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(GraspError::InvalidParams("max_iterations must be positive"));
        }
        Ok(())
    }
}

/// A fully planned grasp on an estimated conductor line, in the robot-base
/// frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspPlan {
    pub line: Line3,
    pub grab_point: Vec3,
    pub orientation: RotationMatrix,
    pub intermittent_point: Vec3,
}

/// The point on the conductor closest to the base: the unique
/// distance-minimizing grab target.
pub fn select_grab_point(line: &Line3, base: Vec3) -> Vec3 {
    line.closest_point_to(base)
}

/// Grabbing orientation at `grab_point` (expressed relative to the base
/// origin): columns are the tool axes
///
/// * y = conductor direction,
/// * x = normalized `direction × grab_point` (horizontal-ish, perpendicular
///   to the approach plane),
/// * z = `x × y`, the approach axis, sign-normalized to point from the base
///   side toward the conductor (`z·grab_point ≥ 0`; when violated, x and z
///   flip together, preserving handedness).
pub fn grab_orientation(
    grab_point: Vec3,
    direction: UnitVec3,
) -> Result<RotationMatrix, GraspError> {
    let cross = direction.as_vec3().cross(grab_point);
    if !(cross.norm() >= DEGENERATE_CROSS_EPS) {
        return Err(GraspError::DegenerateGeometry);
    }
    let mut v_x = cross
        .normalized()
        .map_err(|_| GraspError::DegenerateGeometry)?;
    let mut v_z = v_x
        .as_vec3()
        .cross(direction.as_vec3())
        .normalized()
        .map_err(|_| GraspError::DegenerateGeometry)?;
    if v_z.as_vec3().dot(grab_point) < 0.0 {
        v_z = v_z.flipped();
        v_x = v_x.flipped();
    }
    RotationMatrix::from_columns(v_x, direction, v_z).map_err(|_| GraspError::DegenerateGeometry)
}

/// The staging point a fixed offset `d` behind the grab point, opposite the
/// approach axis `v_z`.
pub fn intermittent_point(grab_point: Vec3, v_z: UnitVec3, d: f64) -> Vec3 {
    grab_point - v_z * d
}

/// Plans the full grasp for a conductor estimate in the robot-base frame.
pub fn plan_grasp(line: &Line3, params: &ProcedureParams) -> Result<GraspPlan, GraspError> {
    let grab_point = select_grab_point(line, Vec3::zero());
    let orientation = grab_orientation(grab_point, line.direction())?;
    let v_z = orientation
        .column(2)
        .normalized()
        .expect("rotation columns are unit vectors");
    let intermittent = intermittent_point(grab_point, v_z, params.approach_offset_d);
    Ok(GraspPlan {
        line: *line,
        grab_point,
        orientation,
        intermittent_point: intermittent,
    })
}

/// One localization result fed to the state machine, already expressed in
/// the robot-base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalizationOutcome {
    Line(Line3),
    /// The field vectors were parallel (or no estimate was available this
    /// cycle); the only recovery is re-orienting the sensor baseline.
    DegenerateParallel,
}

/// Target pose for the end effector, in the robot-base frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseCommand {
    pub position: Vec3,
    pub orientation: RotationMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProcedurePhase {
    Idle,
    AwaitCommand,
    Localize,
    RotateTool,
    MoveMidpoint(GraspPlan),
    MoveIntermittent(GraspPlan),
    LinearApproach(GraspPlan),
    Grabbed(GraspPlan),
}

impl ProcedurePhase {
    pub fn name(&self) -> &'static str {
        match self {
            ProcedurePhase::Idle => "idle",
            ProcedurePhase::AwaitCommand => "await_command",
            ProcedurePhase::Localize => "localize",
            ProcedurePhase::RotateTool => "rotate_tool",
            ProcedurePhase::MoveMidpoint(_) => "move_midpoint",
            ProcedurePhase::MoveIntermittent(_) => "move_intermittent",
            ProcedurePhase::LinearApproach(_) => "linear_approach",
            ProcedurePhase::Grabbed(_) => "grabbed",
        }
    }

    pub fn plan(&self) -> Option<&GraspPlan> {
        match self {
            ProcedurePhase::MoveMidpoint(p)
            | ProcedurePhase::MoveIntermittent(p)
            | ProcedurePhase::LinearApproach(p)
            | ProcedurePhase::Grabbed(p) => Some(p),
            _ => None,
        }
    }
}

/// Procedure phase plus the consumed-cycle count used for the iteration
/// budget.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcedureState {
    pub phase: ProcedurePhase,
    pub cycles: u32,
}

impl ProcedureState {
    pub fn idle() -> Self {
        Self {
            phase: ProcedurePhase::Idle,
            cycles: 0,
        }
    }

    /// Arms the system: `Idle` → `AwaitCommand`.
    pub fn begin(self) -> Self {
        match self.phase {
            ProcedurePhase::Idle => Self {
                phase: ProcedurePhase::AwaitCommand,
                ..self
            },
            _ => self,
        }
    }

    /// Operator command: `AwaitCommand` → `Localize`.
    pub fn command_grab(self) -> Self {
        match self.phase {
            ProcedurePhase::AwaitCommand => Self {
                phase: ProcedurePhase::Localize,
                ..self
            },
            _ => self,
        }
    }
}

/// Advances the procedure by one cycle.
///
/// Called once per dwell with the localization outcome measured at the
/// current pose (`est` must be in the robot-base frame; the robot base is
/// the origin). Returns the successor state and, for motion states, the
/// pose command to execute before the next cycle.
///
/// Fails with [`GraspError::IterationLimit`] when the cycle budget is
/// exhausted before grabbing, and propagates
/// [`GraspError::DegenerateGeometry`] when a valid estimate has no grabbing
/// frame.
pub fn step_procedure(
    state: &ProcedureState,
    est: &LocalizationOutcome,
    ee_pose: &RigidTransform,
    params: &ProcedureParams,
) -> Result<(ProcedureState, Option<PoseCommand>), GraspError> {
    let analyzing = matches!(
        state.phase,
        ProcedurePhase::Localize
            | ProcedurePhase::RotateTool
            | ProcedurePhase::MoveMidpoint(_)
            | ProcedurePhase::MoveIntermittent(_)
            | ProcedurePhase::LinearApproach(_)
    );
    if analyzing && state.cycles >= params.max_iterations {
        return Err(GraspError::IterationLimit);
    }

    match &state.phase {
        ProcedurePhase::Idle | ProcedurePhase::AwaitCommand => Ok((state.clone(), None)),
        ProcedurePhase::Grabbed(_) => Ok((
            ProcedureState {
                phase: ProcedurePhase::Idle,
                cycles: state.cycles,
            },
            None,
        )),
        ProcedurePhase::LinearApproach(plan) => {
            let plan = *plan;
            let next_cycles = state.cycles + 1;
            if ee_pose.translation.distance_to(plan.grab_point) <= ARRIVAL_EPS {
                Ok((
                    ProcedureState {
                        phase: ProcedurePhase::Grabbed(plan),
                        cycles: next_cycles,
                    },
                    None,
                ))
            } else {
                // Not yet arrived (non-instantaneous motion models): keep
                // the command, orientation stays frozen.
                let command = PoseCommand {
                    position: plan.grab_point,
                    orientation: ee_pose.rotation,
                };
                Ok((
                    ProcedureState {
                        phase: ProcedurePhase::LinearApproach(plan),
                        cycles: next_cycles,
                    },
                    Some(command),
                ))
            }
        }
        ProcedurePhase::Localize
        | ProcedurePhase::RotateTool
        | ProcedurePhase::MoveMidpoint(_)
        | ProcedurePhase::MoveIntermittent(_) => {
            let next_cycles = state.cycles + 1;
            match est {
                LocalizationOutcome::DegenerateParallel => {
                    // Re-orient the sensor baseline: 90° about the current
                    // tool z-axis, position held.
                    let z = UnitVec3::try_from([0.0, 0.0, 1.0]).expect("unit");
                    let orientation =
                        ee_pose.rotation * RotationMatrix::from_axis_angle(z, FRAC_PI_2);
                    Ok((
                        ProcedureState {
                            phase: ProcedurePhase::RotateTool,
                            cycles: next_cycles,
                        },
                        Some(PoseCommand {
                            position: ee_pose.translation,
                            orientation,
                        }),
                    ))
                }
                LocalizationOutcome::Line(line) => {
                    let plan = plan_grasp(line, params)?;
                    let distance = ee_pose.translation.distance_to(plan.intermittent_point);
                    if distance > params.d_max {
                        let midpoint = (ee_pose.translation + plan.intermittent_point) * 0.5;
                        let command = PoseCommand {
                            position: midpoint,
                            orientation: plan.orientation,
                        };
                        Ok((
                            ProcedureState {
                                phase: ProcedurePhase::MoveMidpoint(plan),
                                cycles: next_cycles,
                            },
                            Some(command),
                        ))
                    } else if distance >= params.d_min {
                        let command = PoseCommand {
                            position: plan.intermittent_point,
                            orientation: plan.orientation,
                        };
                        Ok((
                            ProcedureState {
                                phase: ProcedurePhase::MoveIntermittent(plan),
                                cycles: next_cycles,
                            },
                            Some(command),
                        ))
                    } else {
                        // Final approach: straight to the grab point with
                        // the orientation frozen as it is now.
                        let command = PoseCommand {
                            position: plan.grab_point,
                            orientation: ee_pose.rotation,
                        };
                        Ok((
                            ProcedureState {
                                phase: ProcedurePhase::LinearApproach(plan),
                                cycles: next_cycles,
                            },
                            Some(command),
                        ))
                    }
                }
            }
        }
    }
}
