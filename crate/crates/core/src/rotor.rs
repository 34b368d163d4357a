//! Rotor thrust, reaction torque, and the thrust change caused by airflow
//! along a rotor's spin axis.
//!
//! When a motor hub moves along its own z-axis the blade elements see an
//! extra axial inflow, which shifts their angle of attack and therefore the
//! thrust. Moving against the thrust direction (negative motor-frame z
//! velocity) raises thrust; moving along it lowers thrust. With the rotors
//! tilted, body rotations and translations both produce such axial motion,
//! so the effect acts as a set of rate dampers.

use serde::{Deserialize, Serialize};

use crate::dynamics::{QuadParams, State};
use crate::error::{Error, Result};
use crate::frames::{MotorIndex, Vec3};

/// Axial inflow must stay below this fraction of the blade-tip speed for the
/// small-angle thrust-change formula to apply.
pub const HOVER_REGIME_RATIO: f64 = 0.2;

/// Fixed mounting and coefficients of the four rotors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotorConfig {
    /// Twist about motor x, rad.
    pub alpha: [f64; 4],
    /// Dihedral about motor y, rad.
    pub beta: [f64; 4],
    /// Sign of each rotor's reaction torque along its spin axis.
    pub spin_sign: [f64; 4],
    /// Thrust coefficient, N·s²/rad².
    pub k_f: f64,
    /// Reaction-torque to thrust ratio, m.
    pub k_t: f64,
}

impl Default for RotorConfig {
    fn default() -> Self {
        RotorConfig {
            alpha: [0.0; 4],
            beta: [0.0; 4],
            spin_sign: [1.0, -1.0, 1.0, -1.0],
            k_f: 1e-5,
            k_t: 0.02,
        }
    }
}

impl RotorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_f > 0.0 && self.k_f.is_finite()) {
            return Err(Error::InvalidParameter("k_f must be > 0".into()));
        }
        if !(self.k_t > 0.0 && self.k_t.is_finite()) {
            return Err(Error::InvalidParameter("k_t must be > 0".into()));
        }
        if self.alpha.iter().chain(&self.beta).any(|a| !a.is_finite()) {
            return Err(Error::InvalidParameter("alpha and beta must be finite".into()));
        }
        let s = self.spin_sign;
        let unit = s.iter().all(|x| *x == 1.0 || *x == -1.0);
        let alternating = s[0] == s[2] && s[1] == s[3] && s[0] == -s[1];
        if !(unit && alternating) {
            return Err(Error::InvalidParameter(
                "spin_sign must alternate between +1 and -1 around the vehicle".into(),
            ));
        }
        Ok(())
    }
}

/// Blade aerodynamics and the lumped damper constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BladeAero {
    /// Air density, kg/m³.
    pub rho: f64,
    /// Lift-curve slope, 1/rad.
    pub sigma: f64,
    /// Blade chord, m (constant along the span).
    pub chord: f64,
    /// Blade radius, m.
    pub blade_radius: f64,
    pub zeta_roll: f64,
    pub zeta_pitch: f64,
    pub zeta_yaw: f64,
}

impl Default for BladeAero {
    fn default() -> Self {
        BladeAero {
            rho: 1.225,
            sigma: 5.7,
            chord: 0.02,
            blade_radius: 0.1,
            zeta_roll: 0.1,
            zeta_pitch: 0.1,
            zeta_yaw: 0.1,
        }
    }
}

impl BladeAero {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rho", self.rho),
            ("sigma", self.sigma),
            ("chord", self.chord),
            ("blade_radius", self.blade_radius),
            ("zeta_roll", self.zeta_roll),
            ("zeta_pitch", self.zeta_pitch),
            ("zeta_yaw", self.zeta_yaw),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be > 0")));
            }
        }
        Ok(())
    }

    /// Damper constant `¼·c·σ·ρ·|γ̇|·R²` implied by the blade geometry at a
    /// given rotor speed. Setting every `zeta_*` to this value makes the
    /// linear dampers agree with [`delta_thrust_blade`] at that speed.
    pub fn damping_at(&self, gamma_dot: f64) -> f64 {
        0.25 * self.chord * self.sigma * self.rho * gamma_dot.abs() * self.blade_radius.powi(2)
    }
}

/// How axial motor velocity is turned into a thrust change.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DamperModel {
    /// Constant coefficients `zeta_roll/pitch/yaw`, i.e. rotor speed frozen at trim.
    #[default]
    Linear,
    /// Blade-element coefficient recomputed from each rotor's current speed.
    BladeElement,
}

/// Rotor angular speeds, rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RotorSpeeds(pub [f64; 4]);

impl RotorSpeeds {
    pub fn uniform(speed: f64) -> Self {
        RotorSpeeds([speed; 4])
    }

    pub fn get(&self, i: MotorIndex) -> f64 {
        self.0[i.slot()]
    }

    pub fn squared(&self) -> [f64; 4] {
        self.0.map(|g| g * g)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }
}

/// Thrust in the motor frame.
pub fn thrust_force(k_f: f64, gamma_dot: f64) -> Vec3 {
    Vec3::new(0.0, 0.0, k_f * gamma_dot * gamma_dot)
}

/// Reaction torque in the motor frame, with the `(-1)^(i+1)` handedness.
pub fn reaction_torque(i: MotorIndex, k_t: f64, thrust: &Vec3) -> Vec3 {
    thrust * (i.alternating_sign() * k_t)
}

/// Velocity of motor `i`'s hub relative to the inertial frame, expressed in
/// the motor frame.
pub fn motor_point_velocity(state: &State, i: MotorIndex, params: &QuadParams) -> Vec3 {
    let (origin, rot) = params.motor_geometry(i);
    let hub_body = state.attitude.transpose() * state.velocity + state.body_rates.cross(&origin);
    rot.transpose() * hub_body
}

/// Change in blade angle of attack at radius `r` produced by axial hub
/// velocity `odot_z`. Positive results mean the angle of attack drops.
pub fn delta_aoa(odot_z: f64, gamma_dot: f64, r: f64) -> Result<f64> {
    let tangential = gamma_dot.abs() * r;
    if !(tangential > 0.0) {
        return Err(Error::SingularInput(format!(
            "blade speed |γ̇|·r = {tangential} must be positive"
        )));
    }
    Ok((odot_z / tangential).atan())
}

/// Closed-form thrust change for a constant-chord blade under small axial
/// inflow: `[0, 0, -¼·c·σ·ρ·odot_z·|γ̇|·R²]`.
pub fn delta_thrust_blade(blade: &BladeAero, odot_z: f64, gamma_dot: f64) -> Result<Vec3> {
    let tip_speed = gamma_dot.abs() * blade.blade_radius;
    if !(odot_z.abs() < HOVER_REGIME_RATIO * tip_speed) {
        return Err(Error::ModelValidity(format!(
            "axial hub speed {odot_z:.4} m/s is not small against blade tip speed {tip_speed:.4} m/s"
        )));
    }
    Ok(Vec3::new(0.0, 0.0, -blade.damping_at(gamma_dot) * odot_z))
}

/// Thrust change from integrating the lift of each blade element, with the
/// lift coefficient linear in angle of attack and the angle-of-attack change
/// taken exactly from [`delta_aoa`]. Composite Simpson over `panels`
/// (rounded up to even) radial intervals.
pub fn blade_element_delta_thrust(
    blade: &BladeAero,
    odot_z: f64,
    gamma_dot: f64,
    panels: usize,
) -> Result<f64> {
    if gamma_dot == 0.0 {
        return Err(Error::SingularInput("rotor is not spinning".into()));
    }
    let n = (panels.max(2) + 1) & !1;
    let h = blade.blade_radius / n as f64;
    let omega = gamma_dot.abs();
    let integrand = |r: f64| -> Result<f64> {
        if r == 0.0 {
            return Ok(0.0);
        }
        let v = omega * r;
        Ok(-v * v * delta_aoa(odot_z, gamma_dot, r)?)
    };
    let mut sum = integrand(0.0)? + integrand(blade.blade_radius)?;
    for k in 1..n {
        let weight = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += weight * integrand(k as f64 * h)?;
    }
    let integral = sum * h / 3.0;
    Ok(0.5 * blade.rho * blade.chord * blade.sigma * integral)
}

/// Linear damper: `[0, 0, -ζ·odot_z]`.
pub fn delta_thrust_linear(zeta: f64, odot_z: f64) -> Vec3 {
    Vec3::new(0.0, 0.0, -zeta * odot_z)
}

/// Sum of the roll, pitch and yaw damper thrust changes on motor `i`, in
/// the motor frame.
///
/// The hub's axial velocity is split by source: body rates `p`, `q`, `r`
/// through `ω × O_i`, and (when enabled) vehicle translation. Each part is
/// weighted by its own damper constant: `zeta_roll` for `p` and body-y
/// translation, `zeta_pitch` for `q` and body-x translation, `zeta_yaw` for
/// `r`, and the roll/pitch mean for body-z translation. In blade-element
/// mode the whole axial velocity goes through [`delta_thrust_blade`] at the
/// rotor's current speed.
pub fn total_delta_thrust(state: &State, i: MotorIndex, params: &QuadParams) -> Result<Vec3> {
    let options = &params.model;
    if !options.dampers {
        return Ok(Vec3::zeros());
    }
    let (origin, rot) = params.motor_geometry(i);
    let axis = rot.column(2).into_owned();
    let w = state.body_rates;
    let axial_from_rate = |rate: Vec3| axis.dot(&rate.cross(&origin));
    let from_p = axial_from_rate(Vec3::new(w.x, 0.0, 0.0));
    let from_q = axial_from_rate(Vec3::new(0.0, w.y, 0.0));
    let from_r = axial_from_rate(Vec3::new(0.0, 0.0, w.z));
    let trans = if options.translational_dihedral {
        let v = state.attitude.transpose() * state.velocity;
        Vec3::new(axis.x * v.x, axis.y * v.y, axis.z * v.z)
    } else {
        Vec3::zeros()
    };

    match options.damper_model {
        DamperModel::Linear => {
            let b = &params.blade;
            let heave = 0.5 * (b.zeta_roll + b.zeta_pitch);
            let weighted = b.zeta_roll * (from_p + trans.y)
                + b.zeta_pitch * (from_q + trans.x)
                + b.zeta_yaw * from_r
                + heave * trans.z;
            Ok(delta_thrust_linear(1.0, weighted))
        }
        DamperModel::BladeElement => {
            let axial = from_p + from_q + from_r + trans.x + trans.y + trans.z;
            delta_thrust_blade(&params.blade, axial, state.rotor_speeds.get(i))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::QuadParams;
    use proptest::prelude::*;

    fn motor(i: usize) -> MotorIndex {
        MotorIndex::new(i).unwrap()
    }

    #[test]
    fn thrust_force_examples() {
        assert_eq!(thrust_force(1e-5, 500.0), Vec3::new(0.0, 0.0, 1e-5 * 250000.0));
        assert!((thrust_force(1e-5, 500.0).z - 2.5).abs() < 1e-15);
        assert_eq!(thrust_force(1e-5, 0.0), Vec3::zeros());
        assert_eq!(thrust_force(1e-5, -500.0), thrust_force(1e-5, 500.0));
    }

    #[test]
    fn reaction_torque_examples() {
        let f = Vec3::new(0.0, 0.0, 2.5);
        assert!((reaction_torque(motor(1), 0.02, &f) - Vec3::new(0.0, 0.0, 0.05)).norm() < 1e-15);
        assert!((reaction_torque(motor(2), 0.02, &f) - Vec3::new(0.0, 0.0, -0.05)).norm() < 1e-15);
        assert_eq!(reaction_torque(motor(4), 0.02, &Vec3::zeros()), Vec3::zeros());
    }

    fn params(alpha: [f64; 4], arm: f64, d: f64) -> QuadParams {
        let mut p = QuadParams::default();
        p.arm_length = arm;
        p.com_offset = d;
        p.rotor.alpha = alpha;
        p
    }

    fn yawing(r: f64) -> State {
        let mut s = State::default();
        s.body_rates = Vec3::new(0.0, 0.0, r);
        s
    }

    #[test]
    fn motor_point_velocity_examples() {
        let p = params([0.0; 4], 0.2, 0.0);
        assert_eq!(motor_point_velocity(&State::default(), motor(1), &p), Vec3::zeros());
        let v = motor_point_velocity(&yawing(1.0), motor(1), &p);
        assert!((v - Vec3::new(0.0, 0.2, 0.0)).norm() < 1e-15);

        let p = params([0.05, -0.05, 0.05, -0.05], 0.2, 0.05);
        let v = motor_point_velocity(&yawing(1.0), motor(1), &p);
        // R_x(α)ᵀ·[0, 0.2, 0] worked by hand.
        let expected = Vec3::new(0.0, 0.2 * 0.05f64.cos(), -0.2 * 0.05f64.sin());
        assert!((v - expected).norm() < 1e-15);
        assert!((v.y - 0.1997501).abs() < 1e-7 && (v.z + 0.0099958).abs() < 1e-7);
    }

    #[test]
    fn delta_aoa_examples() {
        assert_eq!(delta_aoa(0.0, 500.0, 0.05).unwrap(), 0.0);
        assert!((delta_aoa(0.5, 500.0, 0.1).unwrap() - 0.0099997).abs() < 1e-7);
        assert!((delta_aoa(-0.5, 500.0, 0.1).unwrap() + 0.0099997).abs() < 1e-7);
        assert!(matches!(delta_aoa(0.1, 0.0, 0.1), Err(Error::SingularInput(_))));
        assert!(matches!(delta_aoa(0.1, 500.0, 0.0), Err(Error::SingularInput(_))));
    }

    fn example_blade() -> BladeAero {
        BladeAero { chord: 0.02, sigma: 5.7, rho: 1.225, blade_radius: 0.1, ..BladeAero::default() }
    }

    #[test]
    fn delta_thrust_blade_examples() {
        let blade = example_blade();
        assert_eq!(delta_thrust_blade(&blade, 0.0, 500.0).unwrap(), Vec3::zeros());
        // ¼ · 0.02 · 5.7 · 1.225 · 0.5 · 500 · 0.01
        let expected = 0.25 * 0.02 * 5.7 * 1.225 * 0.5 * 500.0 * 0.01;
        let down = delta_thrust_blade(&blade, 0.5, 500.0).unwrap();
        assert!((down.z + expected).abs() < 1e-15);
        assert!((down.z + 0.0872813).abs() < 1e-7);
        let up = delta_thrust_blade(&blade, -0.5, 500.0).unwrap();
        assert!((up.z - 0.0872813).abs() < 1e-7);
    }

    #[test]
    fn delta_thrust_blade_rejects_large_inflow() {
        let blade = example_blade();
        // tip speed 50 m/s, limit 10 m/s
        assert!(matches!(delta_thrust_blade(&blade, 10.0, 500.0), Err(Error::ModelValidity(_))));
        assert!(delta_thrust_blade(&blade, 9.9, 500.0).is_ok());
        assert!(matches!(delta_thrust_blade(&blade, 0.1, 0.0), Err(Error::ModelValidity(_))));
    }

    #[test]
    fn delta_thrust_linear_examples() {
        assert!((delta_thrust_linear(0.1, 0.5) - Vec3::new(0.0, 0.0, -0.05)).norm() < 1e-16);
        assert_eq!(delta_thrust_linear(0.1, 0.0).z, 0.0);
        let blade = example_blade();
        let zeta = blade.damping_at(500.0);
        for odot in [-1.0, -0.3, 0.0, 0.2, 0.7] {
            let a = delta_thrust_linear(zeta, odot);
            let b = delta_thrust_blade(&blade, odot, 500.0).unwrap();
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn quadrature_matches_closed_form_in_small_angle_regime() {
        let blade = example_blade();
        let closed = delta_thrust_blade(&blade, 0.5, 500.0).unwrap().z;
        let integral = blade_element_delta_thrust(&blade, 0.5, 500.0, 4000).unwrap();
        assert!(((integral - closed) / closed).abs() < 0.01);
    }

    #[test]
    fn total_delta_thrust_examples() {
        let mut p = params([0.05, -0.05, 0.05, -0.05], 0.2, 0.05);
        p.blade.zeta_yaw = 0.1;
        assert_eq!(total_delta_thrust(&State::default(), motor(1), &p).unwrap(), Vec3::zeros());

        // Hand chain: hub velocity [0, L, 0] in body, motor-frame z = -L·sin α,
        // thrust change -ζ·(-L·sin α) = +ζ·L·sin α.
        let expected = 0.1 * 0.2 * 0.05f64.sin();
        let d1 = total_delta_thrust(&yawing(1.0), motor(1), &p).unwrap();
        assert!((d1 - Vec3::new(0.0, 0.0, expected)).norm() < 1e-15);
        assert!((d1.z - 9.99584e-4).abs() < 1e-9);
        let d2 = total_delta_thrust(&yawing(1.0), motor(2), &p).unwrap();
        assert!((d2 - Vec3::new(0.0, 0.0, -expected)).norm() < 1e-15);
    }

    #[test]
    fn flat_quad_has_no_yaw_damper() {
        let p = params([0.0; 4], 0.2, 0.0);
        for i in MotorIndex::ALL {
            assert_eq!(total_delta_thrust(&yawing(0.8), i, &p).unwrap(), Vec3::zeros());
        }
    }

    #[test]
    fn dampers_off_gives_zero() {
        let mut p = params([0.05, -0.05, 0.05, -0.05], 0.2, 0.05);
        p.model.dampers = false;
        assert_eq!(total_delta_thrust(&yawing(1.0), motor(1), &p).unwrap(), Vec3::zeros());
    }

    #[test]
    fn blade_mode_uses_current_rotor_speed() {
        let mut p = params([0.05, -0.05, 0.05, -0.05], 0.2, 0.05);
        p.model.damper_model = DamperModel::BladeElement;
        let mut s = yawing(1.0);
        s.rotor_speeds = RotorSpeeds::uniform(500.0);
        let zeta = p.blade.damping_at(500.0);
        let d1 = total_delta_thrust(&s, motor(1), &p).unwrap();
        assert!((d1.z - zeta * 0.2 * 0.05f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn translation_feeds_dampers_only_when_enabled() {
        let mut p = QuadParams::default();
        p.rotor.beta = [-0.1; 4];
        let mut s = State::default();
        s.velocity = Vec3::new(1.0, 0.0, 0.0);
        // Leading motor sees inflow from below its tilted disk: thrust rises.
        let lead = total_delta_thrust(&s, motor(1), &p).unwrap();
        let trail = total_delta_thrust(&s, motor(3), &p).unwrap();
        assert!(lead.z > 0.0 && trail.z < 0.0);
        assert!((lead.z + trail.z).abs() < 1e-15);
        p.model.translational_dihedral = false;
        assert_eq!(total_delta_thrust(&s, motor(1), &p).unwrap(), Vec3::zeros());
    }

    proptest! {
        #[test]
        fn blade_delta_is_odd_in_inflow_and_even_in_spin(odot in -1.9f64..1.9, g in 100.0f64..1000.0) {
            let blade = example_blade();
            let a = delta_thrust_blade(&blade, odot, g).unwrap().z;
            let b = delta_thrust_blade(&blade, -odot, g).unwrap().z;
            let c = delta_thrust_blade(&blade, odot, -g).unwrap().z;
            prop_assert_eq!(a, -b);
            prop_assert_eq!(a, c);
            prop_assert!((a - (-blade.damping_at(g) * odot)).abs() <= 1e-15 * (1.0 + a.abs()));
        }
    }
}
