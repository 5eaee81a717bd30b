//! Scenario configuration: the JSON document that fully describes a
//! simulated experiment, plus the shipped reference scenarios.
//!
//! All physical quantities are SI and carry their unit in the field name
//! (`_m` meters, `_t` teslas, `_a` amperes, `_hz` hertz, `_s` seconds,
//! `_rad` radians). Rotations accept either a row-major 3×3 matrix or
//! `{"rpy_rad": [roll, pitch, yaw]}`.

use serde::{Deserialize, Serialize};

use crate::fieldsim::{Conductor, FieldScene};
use crate::geom::{Line3, RigidTransform, RotationMatrix, Vec3};
use crate::grasp::ProcedureParams;
use crate::localize::SensorRig;

use super::HarnessError;

/// Relative slack when checking that the window spans a whole number of
/// target-frequency cycles.
const BIN_ALIGNMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RotationSpec {
    Matrix([[f64; 3]; 3]),
    Rpy { rpy_rad: [f64; 3] },
}

impl RotationSpec {
    pub fn identity() -> Self {
        RotationSpec::Rpy { rpy_rad: [0.0; 3] }
    }

    pub fn to_rotation(&self) -> Result<RotationMatrix, HarnessError> {
        match self {
            RotationSpec::Matrix(m) => RotationMatrix::from_matrix(*m)
                .map_err(|e| HarnessError::InvalidConfig(format!("rotation matrix: {e}"))),
            RotationSpec::Rpy { rpy_rad } => {
                if !rpy_rad.iter().all(|a| a.is_finite()) {
                    return Err(HarnessError::InvalidConfig(
                        "rpy angles must be finite".into(),
                    ));
                }
                Ok(RotationMatrix::from_rpy(rpy_rad[0], rpy_rad[1], rpy_rad[2]))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseSpec {
    pub rotation: RotationSpec,
    pub translation_m: [f64; 3],
}

impl PoseSpec {
    pub fn new(rotation: RotationSpec, translation_m: [f64; 3]) -> Self {
        Self {
            rotation,
            translation_m,
        }
    }

    pub fn to_transform(&self) -> Result<RigidTransform, HarnessError> {
        let t = Vec3::from(self.translation_m);
        if !t.is_finite() {
            return Err(HarnessError::InvalidConfig(
                "pose translation must be finite".into(),
            ));
        }
        Ok(RigidTransform::new(self.rotation.to_rotation()?, t))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConductorSpec {
    /// Any point on the conductor, world frame.
    pub point_m: [f64; 3],
    /// Direction along the conductor; need not be unit length.
    pub direction: [f64; 3],
    pub current_rms_a: f64,
    pub frequency_hz: f64,
    #[serde(default)]
    pub phase_rad: f64,
}

impl ConductorSpec {
    pub fn to_conductor(&self) -> Result<Conductor, HarnessError> {
        let direction = Vec3::from(self.direction).normalized().map_err(|_| {
            HarnessError::InvalidConfig(
                "conductor direction must be a nonzero finite vector".into(),
            )
        })?;
        let line = Line3::new(Vec3::from(self.point_m), direction);
        if !line.point().is_finite() {
            return Err(HarnessError::InvalidConfig(
                "conductor point must be finite".into(),
            ));
        }
        Conductor::new(line, self.current_rms_a, self.frequency_hz, self.phase_rad)
            .map_err(|e| HarnessError::InvalidConfig(format!("conductor: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    pub conductors: Vec<ConductorSpec>,
    /// Static background flux density, world frame.
    #[serde(default)]
    pub earth_field_t: [f64; 3],
    /// Per-axis Gaussian sensor-noise standard deviation.
    #[serde(default)]
    pub noise_sigma_t: f64,
}

impl SceneSpec {
    /// Materializes the scene with an explicit noise seed (per-run seeds
    /// come from the runner).
    pub fn to_scene(&self, rng_seed: u64) -> Result<FieldScene, HarnessError> {
        let conductors = self
            .conductors
            .iter()
            .map(|c| c.to_conductor())
            .collect::<Result<Vec<_>, _>>()?;
        let earth_field = Vec3::from(self.earth_field_t);
        if !earth_field.is_finite() {
            return Err(HarnessError::InvalidConfig(
                "earth field must be finite".into(),
            ));
        }
        if !(self.noise_sigma_t.is_finite() && self.noise_sigma_t >= 0.0) {
            return Err(HarnessError::InvalidConfig(
                "noise_sigma_t must be finite and non-negative".into(),
            ));
        }
        Ok(FieldScene {
            conductors,
            earth_field,
            noise_sigma: self.noise_sigma_t,
            rng_seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RigSpec {
    /// First magnetometer's pose in the tool frame.
    pub mount_m1: PoseSpec,
    /// Second magnetometer's pose in the tool frame.
    pub mount_m2: PoseSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub alpha_min_rad: f64,
    pub approach_offset_d_m: f64,
    pub d_min_m: f64,
    pub d_max_m: f64,
    pub dwell_k_s: f64,
    pub max_iterations: u32,
}

impl ParamsSpec {
    pub fn to_params(&self) -> ProcedureParams {
        ProcedureParams {
            alpha_min: self.alpha_min_rad,
            approach_offset_d: self.approach_offset_d_m,
            d_min: self.d_min_m,
            d_max: self.d_max_m,
            dwell_k: self.dwell_k_s,
            max_iterations: self.max_iterations,
        }
    }
}

impl Default for ParamsSpec {
    fn default() -> Self {
        let p = ProcedureParams::default();
        Self {
            alpha_min_rad: p.alpha_min,
            approach_offset_d_m: p.approach_offset_d,
            d_min_m: p.d_min,
            d_max_m: p.d_max,
            dwell_k_s: p.dwell_k,
            max_iterations: p.max_iterations,
        }
    }
}

/// One experiment, fully described: scene, sensor rig, robot, procedure
/// parameters and sampling settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Master seed; every random draw in a run derives from it.
    pub seed: u64,
    pub sample_rate_hz: f64,
    /// Samples per analysis window.
    pub window_len: usize,
    /// Frequency whose phasor is extracted (the conductor's mains
    /// frequency).
    pub target_frequency_hz: f64,
    pub scene: SceneSpec,
    pub rig: RigSpec,
    /// Robot base in the world frame.
    pub base_pose: PoseSpec,
    /// End-effector start poses, base frame; one closed-loop run each.
    pub start_poses: Vec<PoseSpec>,
    pub params: ParamsSpec,
}

impl ScenarioConfig {
    pub fn from_json_str(s: &str) -> Result<Self, HarnessError> {
        let cfg: ScenarioConfig =
            serde_json::from_str(s).map_err(|e| HarnessError::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> Result<String, HarnessError> {
        let mut s =
            serde_json::to_string_pretty(self).map_err(|e| HarnessError::Schema(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Hard validation. Returns soft findings (scenarios that run but
    /// probably mean a config mistake) as warning strings.
    pub fn validate(&self) -> Result<Vec<String>, HarnessError> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(HarnessError::InvalidConfig(
                "sample_rate_hz must be finite and positive".into(),
            ));
        }
        if self.window_len < 2 {
            return Err(HarnessError::InvalidConfig(
                "window_len must be at least 2".into(),
            ));
        }
        if !(self.target_frequency_hz.is_finite() && self.target_frequency_hz > 0.0) {
            return Err(HarnessError::InvalidConfig(
                "target_frequency_hz must be finite and positive".into(),
            ));
        }
        if self.target_frequency_hz >= self.sample_rate_hz / 2.0 {
            return Err(HarnessError::InvalidConfig(format!(
                "target frequency {} Hz is not below the Nyquist limit of rate {} Hz",
                self.target_frequency_hz, self.sample_rate_hz
            )));
        }
        let scene = self.scene.to_scene(self.seed)?;
        if !(self.sample_rate_hz > 2.0 * scene.max_frequency()) {
            return Err(HarnessError::InvalidConfig(format!(
                "sample rate {} Hz cannot represent a {} Hz conductor",
                self.sample_rate_hz,
                scene.max_frequency()
            )));
        }
        self.rig()?;
        self.base_transform()?;
        if self.start_poses.is_empty() {
            return Err(HarnessError::InvalidConfig(
                "at least one start pose is required".into(),
            ));
        }
        for (i, pose) in self.start_poses.iter().enumerate() {
            pose.to_transform()
                .map_err(|e| HarnessError::InvalidConfig(format!("start pose {i}: {e}")))?;
        }
        self.params
            .to_params()
            .validate()
            .map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;

        let mut warnings = Vec::new();
        let cycles = self.window_len as f64 / self.sample_rate_hz * self.target_frequency_hz;
        if (cycles - cycles.round()).abs() > BIN_ALIGNMENT_TOL * cycles.max(1.0) {
            warnings.push(format!(
                "window spans {cycles} cycles of the target frequency (not an integer): \
                 single-bin extraction will leak across bins"
            ));
        }
        if self.params.dwell_k_s < self.window_duration() - 1e-12 {
            warnings.push(format!(
                "dwell_k_s {} is shorter than one sample window ({} s); one window is \
                 collected per dwell anyway",
                self.params.dwell_k_s,
                self.window_duration()
            ));
        }
        if self.scene.conductors.is_empty() {
            warnings.push("scene has no conductors; only background field will be measured".into());
        } else if !self.scene.conductors.iter().any(|c| {
            (c.frequency_hz - self.target_frequency_hz).abs()
                <= f64::EPSILON * self.target_frequency_hz.abs()
        }) {
            warnings.push(format!(
                "no conductor oscillates at the target frequency {} Hz",
                self.target_frequency_hz
            ));
        }
        Ok(warnings)
    }

    /// Seconds covered by one analysis window.
    pub fn window_duration(&self) -> f64 {
        self.window_len as f64 / self.sample_rate_hz
    }

    /// Whole windows collected per dwell; at least one.
    pub fn windows_per_dwell(&self) -> usize {
        let w = (self.params.dwell_k_s / self.window_duration() + 1e-9).floor();
        (w as usize).max(1)
    }

    pub fn scene_with_seed(&self, rng_seed: u64) -> Result<FieldScene, HarnessError> {
        self.scene.to_scene(rng_seed)
    }

    pub fn rig(&self) -> Result<SensorRig, HarnessError> {
        let m1 = self.mount_m1_transform()?;
        let m2 = self.mount_m2_transform()?;
        SensorRig::from_mounts(&m1, &m2)
            .map_err(|e| HarnessError::InvalidConfig(format!("sensor rig: {e}")))
    }

    pub fn mount_m1_transform(&self) -> Result<RigidTransform, HarnessError> {
        self.rig.mount_m1.to_transform()
    }

    pub fn mount_m2_transform(&self) -> Result<RigidTransform, HarnessError> {
        self.rig.mount_m2.to_transform()
    }

    pub fn base_transform(&self) -> Result<RigidTransform, HarnessError> {
        self.base_pose.to_transform()
    }

    pub fn start_transform(&self, index: usize) -> Result<RigidTransform, HarnessError> {
        let pose = self
            .start_poses
            .get(index)
            .ok_or(HarnessError::StartIndexOutOfRange {
                index,
                count: self.start_poses.len(),
            })?;
        pose.to_transform()
    }

    pub fn procedure_params(&self) -> ProcedureParams {
        self.params.to_params()
    }

    /// The reference scenario: one 36 A rms, 50 Hz conductor running
    /// horizontally 0.45 m above the base plane, a two-magnetometer rig
    /// with a 0.2 m baseline mounted 0.15 m below the tool center, an
    /// earth-like background field, no noise, and twelve start poses
    /// spread along the conductor so the approach takes 3–5 stopping
    /// points depending on start distance.
    pub fn default_lab() -> Self {
        let start = |x: f64, y: f64, z: f64| PoseSpec::new(RotationSpec::identity(), [x, y, z]);
        Self {
            seed: 7,
            sample_rate_hz: 200.0,
            window_len: 200,
            target_frequency_hz: 50.0,
            scene: SceneSpec {
                conductors: vec![ConductorSpec {
                    point_m: [0.75, 0.0, 0.45],
                    direction: [0.0, 1.0, 0.0],
                    current_rms_a: 36.0,
                    frequency_hz: 50.0,
                    phase_rad: 0.0,
                }],
                earth_field_t: [2.0e-5, 0.0, 4.3e-5],
                noise_sigma_t: 0.0,
            },
            rig: RigSpec {
                mount_m1: PoseSpec::new(RotationSpec::identity(), [-0.10, 0.0, -0.15]),
                mount_m2: PoseSpec::new(RotationSpec::identity(), [0.10, 0.0, -0.15]),
            },
            base_pose: PoseSpec::new(RotationSpec::identity(), [0.0, 0.0, 0.0]),
            start_poses: vec![
                start(0.75, 1.20, 0.30),
                start(0.60, -1.10, 0.20),
                start(0.90, 1.00, 0.15),
                start(0.70, -0.95, 0.40),
                start(0.75, 2.10, 0.25),
                start(0.85, -2.40, 0.35),
                start(0.55, 2.60, 0.10),
                start(0.95, -1.90, 0.30),
                start(0.75, 4.00, 0.20),
                start(0.65, -4.50, 0.30),
                start(0.80, 3.60, 0.40),
                start(0.70, 4.80, 0.10),
            ],
            params: ParamsSpec::default(),
        }
    }

    /// Single start pose whose sensor baseline lies along the conductor, so
    /// both magnetometers measure parallel fields until the tool rotates.
    pub fn degenerate_start() -> Self {
        let mut cfg = Self::default_lab();
        cfg.start_poses = vec![PoseSpec::new(
            RotationSpec::Rpy {
                rpy_rad: [0.0, 0.0, std::f64::consts::FRAC_PI_2],
            },
            [0.75, 0.90, 0.25],
        )];
        cfg
    }

    /// Twelve noisy repetitions of one start pose, for final-pose scatter
    /// statistics.
    pub fn repeatability(noise_sigma_t: f64) -> Self {
        let mut cfg = Self::default_lab();
        let pose = cfg.start_poses[3].clone();
        cfg.start_poses = vec![pose; 12];
        cfg.scene.noise_sigma_t = noise_sigma_t;
        cfg
    }

    /// Measurement-model study: adds a parallel return conductor 2 m from
    /// the primary carrying the opposite-phase current. The inverse-distance
    /// consistency ratio then deviates from 1.
    pub fn return_conductor() -> Self {
        let mut cfg = Self::default_lab();
        cfg.scene.conductors.push(ConductorSpec {
            point_m: [2.75, 0.0, 0.45],
            direction: [0.0, 1.0, 0.0],
            current_rms_a: 36.0,
            frequency_hz: 50.0,
            phase_rad: std::f64::consts::PI,
        });
        cfg
    }
}
