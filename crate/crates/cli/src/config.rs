//! Run configuration: JSON document with `params`, `rotor`, `blade`,
//! `scenario` and `analysis` sections.
//!
//! Angles (and angular rates) are radians unless `degrees` is true, in
//! which case they are converted on ingestion and the resolved document
//! carries radians with `degrees: false`. Re-reading a resolved document
//! reproduces the same run.

use serde::{Deserialize, Serialize};
use tiltquad_core::rotor::{BladeAero, DamperModel, RotorConfig};
use tiltquad_core::sim::RotorSchedule;
use tiltquad_core::stability::LinearizeOptions;
use tiltquad_core::{ConfigPreset, Error, Mat3, ModelOptions, QuadParams, RotorSpeeds, State, Vec3};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub degrees: bool,
    pub params: ParamsSection,
    pub rotor: RotorSection,
    #[serde(default)]
    pub blade: BladeSection,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
}

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub mass: f64,
    /// `[I_xx, I_yy, I_zz]`
    pub inertia: [f64; 3],
    pub arm_length: f64,
    /// Positive when the center of mass sits below the hub plane.
    #[serde(default)]
    pub com_offset: f64,
    #[serde(default = "default_prop_inertia")]
    pub prop_inertia: f64,
    #[serde(default = "default_gravity")]
    pub gravity: f64,
    #[serde(default)]
    pub azimuth_offset: f64,
    #[serde(default = "yes")]
    pub dampers: bool,
    #[serde(default = "yes")]
    pub gyro: bool,
    #[serde(default = "yes")]
    pub translational_dihedral: bool,
}

fn default_prop_inertia() -> f64 {
    QuadParams::default().prop_inertia
}

fn default_gravity() -> f64 {
    QuadParams::default().gravity
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotorSection {
    pub k_f: f64,
    pub k_t: f64,
    #[serde(default)]
    pub alpha: [f64; 4],
    #[serde(default)]
    pub beta: [f64; 4],
    #[serde(default = "default_spin")]
    pub spin_sign: [f64; 4],
    /// One of the six layouts; overrides `alpha` and `beta`.
    #[serde(default)]
    pub preset: Option<usize>,
    #[serde(default = "default_magnitude")]
    pub magnitude_alpha: f64,
    #[serde(default = "default_magnitude")]
    pub magnitude_beta: f64,
}

fn default_spin() -> [f64; 4] {
    RotorConfig::default().spin_sign
}

fn default_magnitude() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BladeSection {
    pub rho: f64,
    pub sigma: f64,
    pub chord: f64,
    pub blade_radius: f64,
    pub zeta_roll: f64,
    pub zeta_pitch: f64,
    pub zeta_yaw: f64,
    pub damper_model: DamperModel,
}

impl Default for BladeSection {
    fn default() -> Self {
        let b = BladeAero::default();
        BladeSection {
            rho: b.rho,
            sigma: b.sigma,
            chord: b.chord,
            blade_radius: b.blade_radius,
            zeta_roll: b.zeta_roll,
            zeta_pitch: b.zeta_pitch,
            zeta_yaw: b.zeta_yaw,
            damper_model: DamperModel::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "knots", rename_all = "snake_case")]
pub enum SpeedSpec {
    /// Hold the hover trim speeds.
    Trim,
    Constant([f64; 4]),
    PiecewiseConstant(Vec<(f64, [f64; 4])>),
    Tabulated(Vec<(f64, [f64; 4])>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialSection {
    pub position: [f64; 3],
    pub velocity: [f64; 3],
    /// Body-to-inertial rotation, row-major.
    pub attitude: [[f64; 3]; 3],
    pub body_rates: [f64; 3],
}

impl Default for InitialSection {
    fn default() -> Self {
        InitialSection {
            position: [0.0; 3],
            velocity: [0.0; 3],
            attitude: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            body_rates: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub duration: f64,
    pub dt: f64,
    pub rotor_speeds: SpeedSpec,
    pub initial: InitialSection,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection { duration: 5.0, dt: 0.01, rotor_speeds: SpeedSpec::Trim, initial: InitialSection::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    /// Finite-difference step for linearization.
    pub eps: f64,
    pub d_values: Vec<f64>,
    /// Twist magnitudes for `sweep-alpha`.
    pub alpha_values: Vec<f64>,
    /// Keep propeller gyroscopic coupling in linearizations.
    pub gyro: bool,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            eps: 1e-6,
            d_values: vec![-0.05, 0.0, 0.05, 0.10],
            alpha_values: vec![0.02, 0.05, 0.1, 0.2],
            gyro: false,
        }
    }
}

/// Command-line overrides applied on top of the document.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub preset: Option<usize>,
    pub dampers: Option<bool>,
    pub gyro: Option<bool>,
}

#[derive(Debug)]
pub enum ConfigError {
    Parse { line: usize, column: usize, message: String },
    Invalid(String),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Parse { line, column, message } => {
                write!(f, "parse error at line {line}, column {column}: {message}")
            }
            ConfigError::Invalid(m) => f.write_str(m),
        }
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Resolved document: radians, overrides folded in, every field present.
    pub resolved: ConfigFile,
    pub params: QuadParams,
    pub preset: Option<ConfigPreset>,
}

impl ConfigFile {
    /// The reference vehicle used when no file is given.
    pub fn reference() -> Self {
        let p = QuadParams::default();
        ConfigFile {
            schema_version: SCHEMA_VERSION,
            degrees: false,
            params: ParamsSection {
                mass: p.mass,
                inertia: p.inertia,
                arm_length: p.arm_length,
                com_offset: p.com_offset,
                prop_inertia: p.prop_inertia,
                gravity: p.gravity,
                azimuth_offset: p.azimuth_offset,
                dampers: p.model.dampers,
                gyro: p.model.gyro,
                translational_dihedral: p.model.translational_dihedral,
            },
            rotor: RotorSection {
                k_f: p.rotor.k_f,
                k_t: p.rotor.k_t,
                alpha: p.rotor.alpha,
                beta: p.rotor.beta,
                spin_sign: p.rotor.spin_sign,
                preset: None,
                magnitude_alpha: default_magnitude(),
                magnitude_beta: default_magnitude(),
            },
            blade: BladeSection::default(),
            scenario: ScenarioSection::default(),
            analysis: AnalysisSection::default(),
        }
    }
}

pub fn parse_config(text: &str) -> Result<ConfigFile, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: strip_position(&e.to_string()),
    })
}

fn strip_position(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(k) => message[..k].to_string(),
        None => message.to_string(),
    }
}

fn invalid(e: Error) -> ConfigError {
    match e {
        Error::InvalidParameter(m) => ConfigError::Invalid(m),
        other => ConfigError::Invalid(other.to_string()),
    }
}

fn finite(name: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("{name} must be finite")))
    }
}

impl ConfigFile {
    pub fn resolve(mut self, overrides: Overrides) -> Result<RunConfig, ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Invalid(format!(
                "schema_version must be {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if self.degrees {
            let rad = |x: &mut f64| *x = x.to_radians();
            self.rotor.alpha.iter_mut().for_each(rad);
            self.rotor.beta.iter_mut().for_each(rad);
            rad(&mut self.rotor.magnitude_alpha);
            rad(&mut self.rotor.magnitude_beta);
            rad(&mut self.params.azimuth_offset);
            self.scenario.initial.body_rates.iter_mut().for_each(rad);
            self.analysis.alpha_values.iter_mut().for_each(rad);
            self.degrees = false;
        }
        if let Some(id) = overrides.preset {
            self.rotor.preset = Some(id);
        }
        if let Some(on) = overrides.dampers {
            self.params.dampers = on;
        }
        if let Some(on) = overrides.gyro {
            self.params.gyro = on;
            self.analysis.gyro = on;
        }

        let preset = match self.rotor.preset {
            Some(id) => Some(ConfigPreset::from_id(id).map_err(invalid)?),
            None => None,
        };
        if let Some(preset) = preset {
            let (beta_sign, alpha_sign) = preset.signs();
            let a = alpha_sign * self.rotor.magnitude_alpha.abs();
            self.rotor.alpha = [a, -a, a, -a];
            self.rotor.beta = [beta_sign * self.rotor.magnitude_beta.abs(); 4];
        }

        let s = &self.params;
        let r = &self.rotor;
        let b = &self.blade;
        for (name, values) in [("rotor.alpha", &r.alpha), ("rotor.beta", &r.beta)] {
            values.iter().try_for_each(|v| finite(name, *v))?;
        }
        finite("rotor.magnitude_alpha", r.magnitude_alpha)?;
        finite("rotor.magnitude_beta", r.magnitude_beta)?;
        let params = QuadParams {
            mass: s.mass,
            inertia: s.inertia,
            prop_inertia: s.prop_inertia,
            arm_length: s.arm_length,
            com_offset: s.com_offset,
            gravity: s.gravity,
            azimuth_offset: s.azimuth_offset,
            rotor: RotorConfig { alpha: r.alpha, beta: r.beta, spin_sign: r.spin_sign, k_f: r.k_f, k_t: r.k_t },
            blade: BladeAero {
                rho: b.rho,
                sigma: b.sigma,
                chord: b.chord,
                blade_radius: b.blade_radius,
                zeta_roll: b.zeta_roll,
                zeta_pitch: b.zeta_pitch,
                zeta_yaw: b.zeta_yaw,
            },
            model: ModelOptions {
                dampers: s.dampers,
                gyro: s.gyro,
                translational_dihedral: s.translational_dihedral,
                damper_model: b.damper_model,
            },
        };
        params.validate().map_err(invalid)?;

        let sc = &self.scenario;
        if !(sc.dt > 0.0 && sc.dt <= tiltquad_core::sim::MAX_STEP) {
            return Err(ConfigError::Invalid(format!(
                "scenario.dt must lie in (0, {}], got {}",
                tiltquad_core::sim::MAX_STEP,
                sc.dt
            )));
        }
        if !(sc.duration >= sc.dt && sc.duration.is_finite()) {
            return Err(ConfigError::Invalid("scenario.duration must be >= scenario.dt".into()));
        }
        if !(self.analysis.eps > 0.0 && self.analysis.eps < 1e-2) {
            return Err(ConfigError::Invalid("analysis.eps must lie in (0, 1e-2)".into()));
        }
        Ok(RunConfig { resolved: self, params, preset })
    }
}

impl RunConfig {
    pub fn initial_state(&self, rotor_speeds: RotorSpeeds) -> State {
        let i = &self.resolved.scenario.initial;
        State {
            position: Vec3::from(i.position),
            velocity: Vec3::from(i.velocity),
            attitude: Mat3::from_fn(|r, c| i.attitude[r][c]),
            body_rates: Vec3::from(i.body_rates),
            rotor_speeds,
        }
    }

    /// Rotor schedule, with `trim` replaced by the given speeds.
    pub fn schedule(&self, trim: Option<RotorSpeeds>) -> Option<RotorSchedule> {
        let knots = |k: &Vec<(f64, [f64; 4])>| k.iter().map(|(t, s)| (*t, RotorSpeeds(*s))).collect();
        Some(match &self.resolved.scenario.rotor_speeds {
            SpeedSpec::Trim => RotorSchedule::Constant(trim?),
            SpeedSpec::Constant(s) => RotorSchedule::Constant(RotorSpeeds(*s)),
            SpeedSpec::PiecewiseConstant(k) => RotorSchedule::PiecewiseConstant(knots(k)),
            SpeedSpec::Tabulated(k) => RotorSchedule::Tabulated(knots(k)),
        })
    }

    pub fn linearize_options(&self) -> LinearizeOptions {
        LinearizeOptions { eps: self.resolved.analysis.eps, gyro: self.resolved.analysis.gyro }
    }

    pub fn needs_trim(&self) -> bool {
        matches!(self.resolved.scenario.rotor_speeds, SpeedSpec::Trim)
    }
}
