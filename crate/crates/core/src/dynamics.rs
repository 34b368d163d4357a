//! Vehicle parameters, state, and the nonlinear equations of motion.
//!
//! Rotational motion follows Euler's equation with the propeller angular
//! momenta added to the gyroscopic term; translational motion is Newton's
//! law in the z-up inertial frame. Body drag is not modeled.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::{motor_origin_at, motor_rotation_at, skew, Mat3, MotorIndex, Vec3};
use crate::rotor::{
    thrust_force, total_delta_thrust, BladeAero, DamperModel, RotorConfig, RotorSpeeds,
};

/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.81;

/// Which optional physical effects are active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelOptions {
    /// Thrust changes from axial hub velocity.
    pub dampers: bool,
    /// Propeller angular momentum in the gyroscopic term.
    pub gyro: bool,
    /// Let vehicle translation (not just rotation) drive the dampers.
    pub translational_dihedral: bool,
    pub damper_model: DamperModel,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            dampers: true,
            gyro: true,
            translational_dihedral: true,
            damper_model: DamperModel::Linear,
        }
    }
}

/// Physical constants of the vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadParams {
    /// kg
    pub mass: f64,
    /// Principal moments `[I_xx, I_yy, I_zz]`, kg·m².
    pub inertia: [f64; 3],
    /// Spin-axis moment of inertia of one propeller, kg·m².
    pub prop_inertia: f64,
    /// Distance from body z-axis to each hub, m.
    pub arm_length: f64,
    /// Height of the hub plane above the center of mass along body z, m.
    /// Positive means the center of mass hangs below the rotors.
    pub com_offset: f64,
    /// Magnitude of gravitational acceleration, m/s².
    pub gravity: f64,
    /// Extra rotation of all arms about body z; π/4 gives the "x" layout.
    pub azimuth_offset: f64,
    pub rotor: RotorConfig,
    pub blade: BladeAero,
    pub model: ModelOptions,
}

impl Default for QuadParams {
    /// Reference vehicle: 1 kg, 0.2 m arms, hub plane 5 cm above the center
    /// of mass, flat rotors.
    fn default() -> Self {
        QuadParams {
            mass: 1.0,
            inertia: [0.01, 0.01, 0.02],
            prop_inertia: 1e-6,
            arm_length: 0.2,
            com_offset: 0.05,
            gravity: STANDARD_GRAVITY,
            azimuth_offset: 0.0,
            rotor: RotorConfig::default(),
            blade: BladeAero::default(),
            model: ModelOptions::default(),
        }
    }
}

impl QuadParams {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be > 0")))
            }
        };
        positive("mass", self.mass)?;
        positive("arm_length", self.arm_length)?;
        positive("gravity", self.gravity)?;
        for (name, v) in ["I_xx", "I_yy", "I_zz"].iter().zip(self.inertia) {
            positive(name, v)?;
        }
        let smallest = self.inertia.iter().cloned().fold(f64::INFINITY, f64::min);
        if !(self.prop_inertia >= 0.0 && self.prop_inertia < 0.1 * smallest) {
            return Err(Error::InvalidParameter(
                "prop_inertia must be >= 0 and below a tenth of the smallest body inertia".into(),
            ));
        }
        if !self.com_offset.is_finite() || !self.azimuth_offset.is_finite() {
            return Err(Error::InvalidParameter("com_offset and azimuth_offset must be finite".into()));
        }
        self.rotor.validate()?;
        self.blade.validate()
    }

    /// Hub position and motor-frame orientation of motor `i`, body frame.
    pub fn motor_geometry(&self, i: MotorIndex) -> (Vec3, Mat3) {
        let slot = i.slot();
        (
            motor_origin_at(i, self.arm_length, self.com_offset, self.azimuth_offset),
            motor_rotation_at(i, self.rotor.alpha[slot], self.rotor.beta[slot], self.azimuth_offset),
        )
    }

    pub fn inertia_matrix(&self) -> Mat3 {
        Mat3::from_diagonal(&Vec3::from(self.inertia))
    }

    pub fn gravity_vector(&self) -> Vec3 {
        Vec3::new(0.0, 0.0, -self.gravity)
    }
}

/// Full vehicle state.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    /// Inertial position, m.
    pub position: Vec3,
    /// Inertial velocity, m/s.
    pub velocity: Vec3,
    /// Body-to-inertial rotation.
    pub attitude: Mat3,
    /// `[p, q, r]`, rad/s.
    pub body_rates: Vec3,
    pub rotor_speeds: RotorSpeeds,
}

impl Default for State {
    fn default() -> Self {
        State {
            position: Vec3::zeros(),
            velocity: Vec3::zeros(),
            attitude: Mat3::identity(),
            body_rates: Vec3::zeros(),
            rotor_speeds: RotorSpeeds::default(),
        }
    }
}

impl State {
    /// Level, motionless state at the origin with the given rotor speeds.
    pub fn at_rest(rotor_speeds: RotorSpeeds) -> Self {
        State { rotor_speeds, ..State::default() }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|x| x.is_finite())
            && self.velocity.iter().all(|x| x.is_finite())
            && self.attitude.iter().all(|x| x.is_finite())
            && self.body_rates.iter().all(|x| x.is_finite())
            && self.rotor_speeds.is_finite()
    }
}

/// Time derivative of [`State`].
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: Mat3,
    pub body_rates: Vec3,
    /// Always zero: rotor speeds jump to their command.
    pub rotor_speeds: [f64; 4],
}

/// Loads produced by a single rotor.
#[derive(Debug, Clone, PartialEq)]
pub struct MotorLoad {
    /// Nominal thrust, motor frame.
    pub thrust: Vec3,
    /// Damper thrust change, motor frame.
    pub delta_thrust: Vec3,
    /// Thrust including the damper change, body frame.
    pub force: Vec3,
    /// Moment about the center of mass, body frame.
    pub moment: Vec3,
}

/// Per-rotor forces and moments.
///
/// The reaction torque follows the nominal thrust only; damper thrust
/// changes act through their moment arm alone.
pub fn motor_loads(state: &State, params: &QuadParams) -> Result<[MotorLoad; 4]> {
    let load = |i: MotorIndex| -> Result<MotorLoad> {
        let (origin, rot) = params.motor_geometry(i);
        let thrust = thrust_force(params.rotor.k_f, state.rotor_speeds.get(i));
        let delta_thrust = total_delta_thrust(state, i, params)?;
        let force = rot * (thrust + delta_thrust);
        let reaction = thrust * (params.rotor.spin_sign[i.slot()] * params.rotor.k_t);
        Ok(MotorLoad { thrust, delta_thrust, force, moment: origin.cross(&force) + rot * reaction })
    };
    let [a, b, c, d] = MotorIndex::ALL;
    Ok([load(a)?, load(b)?, load(c)?, load(d)?])
}

/// Net moment of all rotor forces and reaction torques, body frame.
pub fn control_torque(state: &State, params: &QuadParams) -> Result<Vec3> {
    Ok(motor_loads(state, params)?.iter().map(|l| l.moment).sum())
}

/// Net rotor force, body frame.
pub fn body_force(state: &State, params: &QuadParams) -> Result<Vec3> {
    Ok(motor_loads(state, params)?.iter().map(|l| l.force).sum())
}

/// Sum of propeller angular momenta (spin plus body rate), body frame.
pub fn propeller_momentum(omega: &Vec3, params: &QuadParams, state: &State) -> Vec3 {
    MotorIndex::ALL
        .iter()
        .map(|&i| {
            let (_, rot) = params.motor_geometry(i);
            let spin = params.rotor.spin_sign[i.slot()] * state.rotor_speeds.get(i);
            (rot * Vec3::new(0.0, 0.0, spin) + omega) * params.prop_inertia
        })
        .sum()
}

/// Gyroscopic moment `-ω × Σ I_p·ω_p` to add to the rotational right-hand side.
pub fn gyroscopic_torque(omega: &Vec3, params: &QuadParams, state: &State) -> Vec3 {
    -omega.cross(&propeller_momentum(omega, params, state))
}

pub fn angular_acceleration(state: &State, params: &QuadParams) -> Result<Vec3> {
    let w = state.body_rates;
    let inertia = Vec3::from(params.inertia);
    let mut rhs = control_torque(state, params)? - w.cross(&inertia.component_mul(&w));
    if params.model.gyro {
        rhs += gyroscopic_torque(&w, params, state);
    }
    Ok(rhs.component_div(&inertia))
}

/// Inertial acceleration.
pub fn translational_acceleration(state: &State, params: &QuadParams) -> Result<Vec3> {
    Ok(state.attitude * body_force(state, params)? / params.mass + params.gravity_vector())
}

/// Right-hand side of the equations of motion with rotor speeds `rotor_cmd`.
pub fn state_derivative(state: &State, rotor_cmd: &RotorSpeeds, params: &QuadParams) -> Result<StateDerivative> {
    let commanded = State { rotor_speeds: *rotor_cmd, ..state.clone() };
    Ok(StateDerivative {
        position: commanded.velocity,
        velocity: translational_acceleration(&commanded, params)?,
        attitude: commanded.attitude * skew(&commanded.body_rates),
        body_rates: angular_acceleration(&commanded, params)?,
        rotor_speeds: [0.0; 4],
    })
}
