//! Rotation algebra, motor-frame geometry and attitude kinematics.
//!
//! Matrices follow the column convention: the columns of `B_R_M` are the
//! axes of frame `M` written in frame `B`. Body-frame quantities carry no
//! prefix in function names; everything returned here is expressed in the
//! body frame unless stated otherwise.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Orthonormality tolerance for anything tagged as a rotation.
pub const ROTATION_TOL: f64 = 1e-9;

/// Largest Frobenius distance from which [`orthonormalize`] will repair a matrix.
pub const MAX_REPAIR_DISTANCE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

/// One of the four motors, numbered 1 through 4 counter-clockwise from the
/// body x-axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MotorIndex(u8);

impl MotorIndex {
    pub const ALL: [MotorIndex; 4] = [MotorIndex(1), MotorIndex(2), MotorIndex(3), MotorIndex(4)];

    pub fn new(i: usize) -> Result<Self> {
        if (1..=4).contains(&i) {
            Ok(MotorIndex(i as u8))
        } else {
            Err(Error::InvalidMotorIndex(i))
        }
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }

    /// Position in 0-based per-motor arrays.
    pub fn slot(self) -> usize {
        self.0 as usize - 1
    }

    /// `(-1)^(i+1)`: +1 for motors 1 and 3, -1 for motors 2 and 4.
    pub fn alternating_sign(self) -> f64 {
        if self.0 % 2 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Arm azimuth about body z, `(i-1)·π/2 + offset`. An offset of π/4
    /// gives the "x" layout.
    pub fn azimuth(self, offset: f64) -> f64 {
        (self.0 as f64 - 1.0) * FRAC_PI_2 + offset
    }
}

impl fmt::Display for MotorIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Right-handed rotation by `angle` radians about a coordinate axis.
pub fn rot_axis(axis: Axis, angle: f64) -> Mat3 {
    let (s, c) = angle.sin_cos();
    match axis {
        Axis::X => Mat3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c),
        Axis::Y => Mat3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c),
        Axis::Z => Mat3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
    }
}

/// Cross-product matrix: `skew(v) * w == v × w`.
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`] on the antisymmetric part of `m`.
pub fn vee(m: &Mat3) -> Vec3 {
    Vec3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Hub position of motor `i` in the body frame for the "+" layout: the arm
/// of length `arm` rotated to its azimuth, with the hub `com_offset` above
/// the center of mass along body z.
pub fn motor_origin(i: MotorIndex, arm: f64, com_offset: f64) -> Vec3 {
    motor_origin_at(i, arm, com_offset, 0.0)
}

/// [`motor_origin`] with an extra azimuth offset applied to every arm.
pub fn motor_origin_at(i: MotorIndex, arm: f64, com_offset: f64, azimuth_offset: f64) -> Vec3 {
    rot_axis(Axis::Z, i.azimuth(azimuth_offset)) * Vec3::new(arm, 0.0, com_offset)
}

/// Orientation of motor frame `i` in the body frame: arm azimuth, then
/// dihedral `beta` about motor y, then twist `alpha` about motor x.
pub fn motor_rotation(i: MotorIndex, alpha: f64, beta: f64) -> Mat3 {
    motor_rotation_at(i, alpha, beta, 0.0)
}

pub fn motor_rotation_at(i: MotorIndex, alpha: f64, beta: f64, azimuth_offset: f64) -> Mat3 {
    rot_axis(Axis::Z, i.azimuth(azimuth_offset)) * rot_axis(Axis::Y, beta) * rot_axis(Axis::X, alpha)
}

/// Frobenius norm of `RᵀR - I`.
pub fn orthonormality_error(r: &Mat3) -> f64 {
    (r.transpose() * r - Mat3::identity()).norm()
}

pub fn check_rotation(r: &Mat3) -> Result<()> {
    let orthonormality = orthonormality_error(r);
    let det = r.determinant();
    if orthonormality.is_finite() && orthonormality < ROTATION_TOL && (det - 1.0).abs() < ROTATION_TOL {
        Ok(())
    } else {
        Err(Error::NotARotation { orthonormality, det })
    }
}

/// Rotation `exp(skew(phi))` via Rodrigues' formula.
pub fn exp_so3(phi: &Vec3) -> Mat3 {
    let theta2 = phi.norm_squared();
    let k = skew(phi);
    // Series coefficients below the crossover keep full precision near zero.
    let (a, b) = if theta2 < 1e-8 {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        let theta = theta2.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    Mat3::identity() + k * a + k * k * b
}

/// Advance `R` through `dt` seconds of constant body rate `omega`, solving
/// `Ṙ = R·skew(ω)` exactly, then re-projecting onto the rotation group.
pub fn integrate_attitude(r: &Mat3, omega_body: &Vec3, dt: f64) -> Result<Mat3> {
    check_rotation(r)?;
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    orthonormalize(&(r * exp_so3(&(omega_body * dt))))
}

/// Nearest rotation matrix in the polar-decomposition sense.
pub fn orthonormalize(r: &Mat3) -> Result<Mat3> {
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::Degenerate("non-finite entries".into()));
    }
    let det = r.determinant();
    if det <= 0.0 {
        return Err(Error::Degenerate(format!("determinant {det} is not positive")));
    }
    let svd = r.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Degenerate("SVD failed".into())),
    };
    if svd.singular_values.min() < 1e-6 {
        return Err(Error::Degenerate("singular matrix".into()));
    }
    let mut q = u * v_t;
    if q.determinant() < 0.0 {
        // det(R) > 0 guarantees this only happens through rounding.
        let mut u = u;
        u.column_mut(2).neg_mut();
        q = u * v_t;
    }
    let distance = (r - q).norm();
    if distance > MAX_REPAIR_DISTANCE {
        return Err(Error::Degenerate(format!(
            "Frobenius distance {distance:.3e} to the nearest rotation exceeds {MAX_REPAIR_DISTANCE}"
        )));
    }
    Ok(q)
}
