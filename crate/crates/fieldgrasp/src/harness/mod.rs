//! Closed-loop scenario harness: a simulated end effector carrying the
//! sensor rig through a field scene, driving extraction → localization →
//! procedure stepping each cycle, plus offline log replay and aggregate
//! reporting.
//!
//! Frames: the scene (conductors, earth field) lives in the world frame;
//! the robot base pose places the base in the world; start and commanded
//! end-effector poses are expressed in the base frame; sensor mounts are
//! fixed in the end-effector (tool) frame. Estimates come out of
//! localization in the m1 sensor frame and are transformed into the base
//! frame before planning, so the planner sees the base at the origin.

pub mod config;
pub mod replay;
pub mod report;
pub mod runner;

use std::io;

use thiserror::Error;

pub use config::{
    ConductorSpec, ParamsSpec, PoseSpec, RigSpec, RotationSpec, ScenarioConfig, SceneSpec,
};
pub use replay::{replay_log, WindowEstimate, WindowFailure};
pub use report::{compute_report, report_from_summaries, ReportRow, RunReport};
pub use runner::{
    estimate_fusion, run_closed_loop, scene_for_run, CycleRecord, RunOutcome, RunSummary,
    TrajectoryLog,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    /// The document failed to parse or violated the schema.
    #[error("schema: {0}")]
    Schema(String),
    /// The config parsed but describes an unusable scenario.
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error("start pose index {index} out of range: config has {count} start poses")]
    StartIndexOutOfRange { index: usize, count: usize },
    /// Sensor streams to replay disagree in sample count.
    #[error("sensor stream length mismatch: {left} vs {right} samples")]
    LengthMismatch { left: usize, right: usize },
    #[error("no estimates to fuse")]
    NoEstimates,
    #[error("field simulation: {0}")]
    Field(#[from] crate::fieldsim::FieldError),
    #[error("signal processing: {0}")]
    Signal(#[from] crate::sigproc::SignalError),
    #[error("geometry: {0}")]
    Geom(#[from] crate::geom::GeomError),
    #[error("procedure: {0}")]
    Grasp(#[from] crate::grasp::GraspError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}
