//! Single-frequency phasor extraction from magnetometer sample windows.
//!
//! A window of synchronized 3-axis samples is reduced to one amplitude and
//! phase per axis by correlating against the target frequency (a single DFT
//! bin). The three per-axis phasors are then collapsed into a signed field
//! vector: the axis with the largest amplitude defines the reference sign,
//! and every other axis is flipped when its phase is closer to antiphase
//! than to in-phase. The result represents the AC field vector up to one
//! global sign, which is inherent to measuring an alternating field.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geom::Vec3;

/// Default amplitude floor in teslas. Axes below it carry no usable phase;
/// windows where every axis is below it are rejected.
pub const DEFAULT_AMPLITUDE_FLOOR: f64 = 1e-7;

/// Relative tolerance when validating uniform sample spacing in CSV input.
const SPACING_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("window must hold at least two samples per axis, all axes equal length")]
    InvalidWindow,
    #[error("sample rate must be positive and finite, got {rate}")]
    InvalidRate { rate: f64 },
    #[error(
        "target frequency {frequency} Hz is not below the Nyquist limit of {rate} Hz sampling"
    )]
    NyquistViolation { frequency: f64, rate: f64 },
    #[error("all axis amplitudes are below the floor of {floor} T")]
    AllAxesBelowFloor { floor: f64 },
    #[error("malformed sample CSV: {0}")]
    Schema(String),
    #[error("CSV I/O: {0}")]
    Io(#[from] io::Error),
}

/// A window of synchronized 3-axis samples in the sensor frame, in teslas.
///
/// Sample `k` was taken at `t0 + k / rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    rate: f64,
    t0: f64,
    bx: Vec<f64>,
    by: Vec<f64>,
    bz: Vec<f64>,
}

impl SampleWindow {
    pub fn new(
        rate: f64,
        t0: f64,
        bx: Vec<f64>,
        by: Vec<f64>,
        bz: Vec<f64>,
    ) -> Result<Self, SignalError> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(SignalError::InvalidRate { rate });
        }
        if bx.len() < 2 || bx.len() != by.len() || bx.len() != bz.len() {
            return Err(SignalError::InvalidWindow);
        }
        // Every sample timestamp must be representable, including the last.
        let t_end = t0 + (bx.len() - 1) as f64 / rate;
        if !(t0.is_finite() && t_end.is_finite()) {
            return Err(SignalError::InvalidWindow);
        }
        // A flux-density reading of NaN or ±inf is instrument garbage; keep
        // it out so every window downstream holds only finite teslas.
        if ![&bx, &by, &bz]
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
        {
            return Err(SignalError::InvalidWindow);
        }
        Ok(Self {
            rate,
            t0,
            bx,
            by,
            bz,
        })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn len(&self) -> usize {
        self.bx.len()
    }

    pub fn is_empty(&self) -> bool {
        false // the constructor enforces n >= 2
    }

    pub fn bx(&self) -> &[f64] {
        &self.bx
    }

    pub fn by(&self) -> &[f64] {
        &self.by
    }

    pub fn bz(&self) -> &[f64] {
        &self.bz
    }

    pub fn sample_time(&self, k: usize) -> f64 {
        self.t0 + k as f64 / self.rate
    }

    /// A sub-window of `len` samples starting at sample `start`.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self, SignalError> {
        if len < 2 || start + len > self.len() {
            return Err(SignalError::InvalidWindow);
        }
        Self::new(
            self.rate,
            self.sample_time(start),
            self.bx[start..start + len].to_vec(),
            self.by[start..start + len].to_vec(),
            self.bz[start..start + len].to_vec(),
        )
    }

    /// Writes the window as CSV with header `t,bx,by,bz`, one row per sample.
    pub fn to_csv<W: io::Write>(&self, w: W) -> Result<(), SignalError> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["t", "bx", "by", "bz"])
            .map_err(csv_to_io)?;
        for k in 0..self.len() {
            wtr.serialize((self.sample_time(k), self.bx[k], self.by[k], self.bz[k]))
                .map_err(csv_to_io)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Parses CSV with header `t,bx,by,bz`. The sample rate is recovered
    /// from the `t` column, which must be strictly increasing and uniformly
    /// spaced (relative tolerance 1e-9); at least two rows are required and
    /// all sample values must be finite.
    pub fn from_csv<R: io::Read>(r: R) -> Result<Self, SignalError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let headers = rdr
            .headers()
            .map_err(|e| SignalError::Schema(e.to_string()))?
            .clone();
        let expected = ["t", "bx", "by", "bz"];
        if headers.len() != 4 || headers.iter().zip(expected).any(|(h, e)| h.trim() != e) {
            return Err(SignalError::Schema(format!(
                "expected header t,bx,by,bz, got {:?}",
                headers.iter().collect::<Vec<_>>()
            )));
        }
        let mut ts = Vec::new();
        let (mut bx, mut by, mut bz) = (Vec::new(), Vec::new(), Vec::new());
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| SignalError::Schema(e.to_string()))?;
            if record.len() != 4 {
                return Err(SignalError::Schema(format!(
                    "row {}: expected 4 fields, got {}",
                    i + 1,
                    record.len()
                )));
            }
            let parse = |j: usize| -> Result<f64, SignalError> {
                record[j]
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| SignalError::Schema(format!("row {}: {}", i + 1, e)))
            };
            ts.push(parse(0)?);
            bx.push(parse(1)?);
            by.push(parse(2)?);
            bz.push(parse(3)?);
        }
        if ts.len() < 2 {
            return Err(SignalError::Schema(
                "need at least two sample rows".to_string(),
            ));
        }
        let dt = ts[1] - ts[0];
        if !(dt.is_finite() && dt > 0.0) {
            return Err(SignalError::Schema(
                "time column must be strictly increasing".to_string(),
            ));
        }
        let t0 = ts[0];
        for (k, &t) in ts.iter().enumerate() {
            let expected = t0 + k as f64 * dt;
            let tol = SPACING_TOL * expected.abs().max(1.0);
            if !((t - expected).abs() <= tol) {
                return Err(SignalError::Schema(format!(
                    "non-uniform sample spacing at row {k}"
                )));
            }
        }
        Self::new(1.0 / dt, t0, bx, by, bz)
    }
}

fn csv_to_io(e: csv::Error) -> SignalError {
    SignalError::Io(io::Error::other(e))
}

/// Per-axis amplitude and phase at one frequency.
///
/// Amplitudes are non-negative peak values in teslas; phases are principal
/// values in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasorTriplet {
    pub amplitudes: [f64; 3],
    pub phases: [f64; 3],
    pub frequency: f64,
}

/// Signed field vector reconstructed from one window, in the sensor frame.
///
/// The magnitude is the peak (not rms) amplitude of the AC field; the
/// overall sign is arbitrary, as for any alternating quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldVectorEstimate {
    pub vector: Vec3,
    pub frequency: f64,
}

/// Wraps an angle to its principal value in `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % TAU;
    if r <= -PI {
        r += TAU;
    } else if r > PI {
        r -= TAU;
    }
    r
}

/// Correlates each axis against the target frequency: one DFT bin evaluated
/// directly.
///
/// `amplitude = (2/n)·|Σ s[k]·e^(−i·2πf·k/rate)|`, `phase = arg(Σ ...)`.
/// For windows holding an integer number of periods the amplitude is exact
/// for a pure tone and a constant offset contributes nothing.
pub fn single_bin_dft(window: &SampleWindow, frequency: f64) -> Result<PhasorTriplet, SignalError> {
    if !(frequency.is_finite() && frequency > 0.0) || frequency >= window.rate() / 2.0 {
        return Err(SignalError::NyquistViolation {
            frequency,
            rate: window.rate(),
        });
    }
    let n = window.len();
    let omega = TAU * frequency / window.rate();
    let mut amplitudes = [0.0; 3];
    let mut phases = [0.0; 3];
    for (axis, samples) in [window.bx(), window.by(), window.bz()]
        .into_iter()
        .enumerate()
    {
        let mut re = 0.0;
        let mut im = 0.0;
        for (k, &s) in samples.iter().enumerate() {
            let (sin, cos) = (omega * k as f64).sin_cos();
            re += s * cos;
            im -= s * sin;
        }
        amplitudes[axis] = 2.0 / n as f64 * re.hypot(im);
        phases[axis] = wrap_angle(im.atan2(re));
    }
    Ok(PhasorTriplet {
        amplitudes,
        phases,
        frequency,
    })
}

/// Collapses a phasor triplet into a signed vector.
///
/// The axis with the largest amplitude (ties broken by axis order x, y, z)
/// is the sign reference. Every other axis at or above `amplitude_floor` is
/// negated when its phase differs from the reference by more than π/2 in
/// principal value; axes below the floor keep their (tiny) amplitude with
/// positive sign, since their phase is dominated by noise.
pub fn resolve_signs(phasors: &PhasorTriplet, amplitude_floor: f64) -> Result<Vec3, SignalError> {
    let mut reference = None;
    for (i, &a) in phasors.amplitudes.iter().enumerate() {
        let best = reference.map(|(_, b)| b).unwrap_or(f64::NEG_INFINITY);
        if a > best {
            reference = Some((i, a));
        }
    }
    let (ref_axis, ref_amplitude) = reference.unwrap_or((0, f64::NAN));
    if !(ref_amplitude >= amplitude_floor) {
        return Err(SignalError::AllAxesBelowFloor {
            floor: amplitude_floor,
        });
    }
    let mut components = [0.0; 3];
    for (i, component) in components.iter_mut().enumerate() {
        let a = phasors.amplitudes[i];
        let sign = if i != ref_axis && a >= amplitude_floor {
            let delta = wrap_angle(phasors.phases[i] - phasors.phases[ref_axis]);
            if delta.abs() > FRAC_PI_2 {
                -1.0
            } else {
                1.0
            }
        } else {
            1.0
        };
        *component = sign * a;
    }
    Ok(Vec3::new(components[0], components[1], components[2]))
}

/// Full per-window extraction: single-bin DFT, then sign resolution.
pub fn extract_field_vector(
    window: &SampleWindow,
    frequency: f64,
    amplitude_floor: f64,
) -> Result<FieldVectorEstimate, SignalError> {
    let phasors = single_bin_dft(window, frequency)?;
    let vector = resolve_signs(&phasors, amplitude_floor)?;
    Ok(FieldVectorEstimate { vector, frequency })
}
