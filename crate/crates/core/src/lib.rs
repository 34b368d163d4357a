//! Six-degree-of-freedom dynamics and open-loop stability analysis for
//! quadcopters whose rotors are mounted with fixed dihedral and twist angles
//! and whose center of mass sits off the rotor plane.
//!
//! The crate is organized bottom-up:
//!
//! - [`frames`]: rotation algebra, motor-frame geometry, attitude kinematics.
//! - [`rotor`]: per-rotor thrust and reaction torque, plus the thrust changes
//!   produced by axial airflow through a tilted rotor (the "dihedral effect").
//! - [`dynamics`]: vehicle parameters, state, and the nonlinear equations of
//!   motion.
//! - [`sim`]: fixed-step RK4 integration, hover trim, scenario execution.
//! - [`stability`]: yaw transfer functions, finite-difference linearization,
//!   pole sweeps, and ranking of the six tilt-sign configurations.
//!
//! Conventions: the inertial frame is z-up with gravity `[0, 0, -g]`. A
//! rotation matrix `B_R_M` has the axes of frame `M` expressed in frame `B`
//! as its columns, so `B_R_M * v_M = v_B`.

pub mod dynamics;
pub mod error;
pub mod frames;
pub mod rotor;
pub mod sim;
pub mod stability;

pub use dynamics::{ModelOptions, QuadParams, State, StateDerivative};
pub use error::{Error, Result};
pub use frames::{Mat3, MotorIndex, Vec3};
pub use rotor::{BladeAero, DamperModel, RotorConfig, RotorSpeeds};
pub use sim::{hover_trim, simulate, step, RotorSchedule, Scenario, Trajectory};
pub use stability::{ConfigPreset, FirstOrderTF, LinearModel};
