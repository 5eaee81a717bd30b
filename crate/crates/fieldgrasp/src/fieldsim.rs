//! Forward magnetic-field model and magnetometer sampling.
//!
//! A conductor is an infinite straight line carrying sinusoidal current. The
//! instantaneous field at a point has magnitude `μ0·i(t) / (2π·r)` with `r`
//! the perpendicular distance to the conductor, and direction along the
//! cross product of the radial vector and the conductor direction, so it is
//! perpendicular to both. Scenes superpose any number of conductors on top
//! of a static background field (e.g. Earth's) and can add per-axis Gaussian
//! sensor noise from a seed-deterministic stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::geom::{Line3, RigidTransform, Vec3};
use crate::sigproc::SampleWindow;

/// Vacuum permeability in H/m.
pub const MU_0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Field evaluation closer to a conductor than this (in meters) is rejected:
/// the idealized line model diverges there and no sensor could sit inside
/// the conductor anyway.
pub const MIN_CONDUCTOR_DISTANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum FieldError {
    #[error("field requested within {MIN_CONDUCTOR_DISTANCE} m of the conductor axis")]
    PointOnConductor,
    #[error("sample rate {rate} Hz is not above twice the highest conductor frequency {max_frequency} Hz")]
    NyquistViolation { rate: f64, max_frequency: f64 },
    #[error("invalid scene parameter: {0}")]
    InvalidScene(&'static str),
    #[error("sample window needs at least two samples")]
    WindowTooShort,
}

/// An infinite straight conductor carrying `i(t) = √2·I_rms·sin(2πft + φ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conductor {
    pub line: Line3,
    pub current_rms: f64,
    pub frequency: f64,
    pub phase: f64,
}

impl Conductor {
    pub fn new(
        line: Line3,
        current_rms: f64,
        frequency: f64,
        phase: f64,
    ) -> Result<Self, FieldError> {
        if !(current_rms.is_finite() && current_rms > 0.0) {
            return Err(FieldError::InvalidScene(
                "current_rms must be positive and finite",
            ));
        }
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(FieldError::InvalidScene(
                "frequency must be positive and finite",
            ));
        }
        if !phase.is_finite() {
            return Err(FieldError::InvalidScene("phase must be finite"));
        }
        Ok(Self {
            line,
            current_rms,
            frequency,
            phase,
        })
    }

    /// Instantaneous signed current at time `t`.
    pub fn instantaneous_current(&self, t: f64) -> f64 {
        std::f64::consts::SQRT_2
            * self.current_rms
            * (std::f64::consts::TAU * self.frequency * t + self.phase).sin()
    }
}

/// Instantaneous field of a single conductor at point `p` and time `t`, in
/// the same frame the conductor line is expressed in.
pub fn conductor_field_at(c: &Conductor, p: Vec3, t: f64) -> Result<Vec3, FieldError> {
    let foot = c.line.closest_point_to(p);
    let radial = p - foot;
    let r = radial.norm();
    if !(r >= MIN_CONDUCTOR_DISTANCE) {
        return Err(FieldError::PointOnConductor);
    }
    // |radial × direction| = r, so the prefactor 1/r² yields magnitude
    // μ0·i/(2π·r) with a unit direction perpendicular to both.
    let scale = MU_0 * c.instantaneous_current(t) / (std::f64::consts::TAU * r * r);
    Ok(radial.cross(c.line.direction().as_vec3()) * scale)
}

/// A measurement scene: conductors, a static background field, sensor noise.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldScene {
    pub conductors: Vec<Conductor>,
    /// Static background flux density in teslas (world frame).
    pub earth_field: Vec3,
    /// Per-axis standard deviation of additive Gaussian sensor noise, in
    /// teslas. Zero disables noise.
    pub noise_sigma: f64,
    /// Master seed for the noise stream.
    pub rng_seed: u64,
}

impl FieldScene {
    pub fn max_frequency(&self) -> f64 {
        self.conductors
            .iter()
            .map(|c| c.frequency)
            .fold(0.0, f64::max)
    }
}

/// Superposition of all conductor fields plus the static background.
pub fn scene_field_at(scene: &FieldScene, p: Vec3, t: f64) -> Result<Vec3, FieldError> {
    let mut b = scene.earth_field;
    for c in &scene.conductors {
        b = b + conductor_field_at(c, p, t)?;
    }
    Ok(b)
}

/// Pose of a magnetometer: sensor frame to world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorPose {
    pub pose: RigidTransform,
}

impl SensorPose {
    pub fn new(pose: RigidTransform) -> Self {
        Self { pose }
    }

    pub fn position(&self) -> Vec3 {
        self.pose.translation
    }
}

/// Samples `n` field values at `rate` starting at `t0` as seen by the
/// sensor: the world field rotated into the sensor frame, plus optional
/// per-axis Gaussian noise.
///
/// The noise stream is derived deterministically from the scene seed, the
/// window start time and the sensor position, so repeated identical calls
/// are bit-identical while different sensors, cycles and scenes draw
/// independent noise.
pub fn sample_sensor(
    scene: &FieldScene,
    sensor: &SensorPose,
    rate: f64,
    n: usize,
    t0: f64,
) -> Result<SampleWindow, FieldError> {
    if !(rate.is_finite() && rate > 0.0) || !(rate > 2.0 * scene.max_frequency()) {
        return Err(FieldError::NyquistViolation {
            rate,
            max_frequency: scene.max_frequency(),
        });
    }
    if n < 2 {
        return Err(FieldError::WindowTooShort);
    }
    let rot_to_sensor = sensor.pose.rotation.transpose();
    let position = sensor.position();
    let mut bx = Vec::with_capacity(n);
    let mut by = Vec::with_capacity(n);
    let mut bz = Vec::with_capacity(n);
    for k in 0..n {
        let t = t0 + k as f64 / rate;
        let b = rot_to_sensor.apply(scene_field_at(scene, position, t)?);
        bx.push(b.x);
        by.push(b.y);
        bz.push(b.z);
    }
    if scene.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(window_stream_seed(scene.rng_seed, t0, position));
        let normal = Normal::new(0.0, scene.noise_sigma)
            .map_err(|_| FieldError::InvalidScene("noise_sigma must be finite and non-negative"))?;
        for axis in [&mut bx, &mut by, &mut bz] {
            for s in axis.iter_mut() {
                *s += normal.sample(&mut rng);
            }
        }
    } else if scene.noise_sigma != 0.0 {
        return Err(FieldError::InvalidScene(
            "noise_sigma must be finite and non-negative",
        ));
    }
    SampleWindow::new(rate, t0, bx, by, bz).map_err(|_| FieldError::WindowTooShort)
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn window_stream_seed(seed: u64, t0: f64, position: Vec3) -> u64 {
    let mut s = splitmix64(seed);
    for bits in [
        t0.to_bits(),
        position.x.to_bits(),
        position.y.to_bits(),
        position.z.to_bits(),
    ] {
        s = splitmix64(s ^ bits);
    }
    s
}
