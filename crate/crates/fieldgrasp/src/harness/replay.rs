//! Offline re-analysis: run the extraction and localization pipeline over
//! recorded sensor streams, one estimate per window pair, with no robot
//! motion involved.

use std::io::Read;

use thiserror::Error;

use crate::localize::{localize_conductor, ConductorEstimate, LocalizeError};
use crate::sigproc::{extract_field_vector, SampleWindow, SignalError, DEFAULT_AMPLITUDE_FLOOR};

use super::config::ScenarioConfig;
use super::HarnessError;

/// Stream pairs must agree on start time and sample rate to this absolute
/// tolerance (seconds / hertz).
const SYNC_TOL: f64 = 1e-9;

/// Why one window pair produced no estimate. These are data properties, not
/// errors of the replay itself.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum WindowFailure {
    /// No axis reached the amplitude floor on one of the sensors.
    #[error("signal below the amplitude floor")]
    BelowFloor,
    /// The two field vectors were too close to parallel.
    #[error("field vectors nearly parallel (angle {angle_rad} rad)")]
    Degenerate { angle_rad: f64 },
}

/// One window pair's replayed result.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowEstimate {
    pub index: usize,
    /// Start time of the window within the stream, seconds.
    pub t0_s: f64,
    /// Estimate in the m1 sensor frame, or the reason there is none.
    pub result: Result<ConductorEstimate, WindowFailure>,
}

/// Replays two recorded sensor streams (`t,bx,by,bz` CSV, uniform rate)
/// against the rig and extraction settings of `cfg`.
///
/// The streams are chopped into consecutive `cfg.window_len`-sample
/// windows; trailing samples that do not fill a whole window are dropped.
/// Streams must be synchronized (same start time and rate) and equally
/// long.
pub fn replay_log<R1: Read, R2: Read>(
    m1: R1,
    m2: R2,
    cfg: &ScenarioConfig,
) -> Result<Vec<WindowEstimate>, HarnessError> {
    let s1 = read_stream(m1)?;
    let s2 = read_stream(m2)?;
    if s1.len() != s2.len() {
        return Err(HarnessError::LengthMismatch {
            left: s1.len(),
            right: s2.len(),
        });
    }
    if (s1.t0() - s2.t0()).abs() > SYNC_TOL {
        return Err(HarnessError::Schema(format!(
            "streams start at different times: {} vs {} s",
            s1.t0(),
            s2.t0()
        )));
    }
    if (s1.rate() - s2.rate()).abs() > SYNC_TOL * s1.rate().max(1.0) {
        return Err(HarnessError::Schema(format!(
            "streams sampled at different rates: {} vs {} Hz",
            s1.rate(),
            s2.rate()
        )));
    }

    let rig = cfg.rig()?;
    let params = cfg.procedure_params();
    let len = cfg.window_len;
    let mut estimates = Vec::new();
    for index in 0..s1.len() / len {
        let w1 = s1.slice(index * len, len).map_err(signal_to_harness)?;
        let w2 = s2.slice(index * len, len).map_err(signal_to_harness)?;
        let t0_s = w1.t0();
        let result = analyze_pair(&w1, &w2, cfg, &rig, params.alpha_min)?;
        estimates.push(WindowEstimate {
            index,
            t0_s,
            result,
        });
    }
    Ok(estimates)
}

fn analyze_pair(
    w1: &SampleWindow,
    w2: &SampleWindow,
    cfg: &ScenarioConfig,
    rig: &crate::localize::SensorRig,
    alpha_min: f64,
) -> Result<Result<ConductorEstimate, WindowFailure>, HarnessError> {
    let extract = |w: &SampleWindow| {
        extract_field_vector(w, cfg.target_frequency_hz, DEFAULT_AMPLITUDE_FLOOR)
    };
    let f1 = match extract(w1) {
        Ok(f) => f,
        Err(SignalError::AllAxesBelowFloor { .. }) => return Ok(Err(WindowFailure::BelowFloor)),
        Err(e) => return Err(signal_to_harness(e)),
    };
    let f2 = match extract(w2) {
        Ok(f) => f,
        Err(SignalError::AllAxesBelowFloor { .. }) => return Ok(Err(WindowFailure::BelowFloor)),
        Err(e) => return Err(signal_to_harness(e)),
    };
    match localize_conductor(&f1, &f2, rig, alpha_min) {
        Ok(est) => Ok(Ok(est)),
        Err(LocalizeError::DegenerateParallel { angle }) => {
            Ok(Err(WindowFailure::Degenerate { angle_rad: angle }))
        }
        Err(LocalizeError::ZeroField) => Ok(Err(WindowFailure::BelowFloor)),
        Err(e @ LocalizeError::CoincidentSensors) => {
            Err(HarnessError::InvalidConfig(e.to_string()))
        }
    }
}

fn read_stream<R: Read>(r: R) -> Result<SampleWindow, HarnessError> {
    SampleWindow::from_csv(r).map_err(signal_to_harness)
}

fn signal_to_harness(e: SignalError) -> HarnessError {
    match e {
        SignalError::Io(io) => HarnessError::Io(io),
        other => HarnessError::Schema(other.to_string()),
    }
}
