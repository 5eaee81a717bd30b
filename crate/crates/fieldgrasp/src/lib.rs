//! Localization of a straight AC-carrying conductor from two 3-axis
//! magnetometers, grasp planning for a robot end effector, and a closed-loop
//! simulation harness for the full approach procedure.
//!
//! The measurement principle: a conductor carrying alternating current at a
//! known frequency produces a magnetic field whose amplitude falls off with
//! the inverse distance to the conductor and whose direction is perpendicular
//! to both the conductor axis and the radial vector. Extracting the field
//! vector at that frequency from two rigidly mounted magnetometers is enough
//! to triangulate the conductor as a 3D line, plan a grasp pose on it, and
//! drive an iterative approach until the end effector can close on the
//! conductor.
//!
//! Module map:
//!
//! * [`geom`] - minimal 3D primitives: vectors, rotations, rigid transforms,
//!   lines in canonical form, closest-point constructions.
//! * [`fieldsim`] - forward field model and magnetometer sampling with
//!   optional Gaussian noise.
//! * [`sigproc`] - single-frequency phasor extraction from sample windows and
//!   axis-sign resolution into a field vector.
//! * [`localize`] - two-magnetometer triangulation of the conductor line,
//!   plus consistency and current-magnitude diagnostics.
//! * [`grasp`] - grasp pose planning and the approach-procedure state
//!   machine.
//! * [`harness`] - scenario configuration, closed-loop runner, trajectory
//!   logs, replay from recorded CSV, and run reports.
//!
//! All physical quantities are SI: meters, seconds, hertz, teslas, amperes,
//! radians.

// Validation guards are written `!(x <= tol)` rather than `x > tol` so that a
// NaN lands on the rejecting branch instead of slipping through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod fieldsim;
pub mod geom;
pub mod grasp;
pub mod harness;
pub mod localize;
pub mod sigproc;
