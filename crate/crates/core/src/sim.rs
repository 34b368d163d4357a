//! Fixed-step integration, hover trim and scenario runs.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{body_force, control_torque, motor_loads, state_derivative, QuadParams, State, StateDerivative};
use crate::error::{Error, Result};
use crate::frames::{orthonormalize, MotorIndex, Vec3};
use crate::rotor::RotorSpeeds;

/// Largest accepted integration step, s.
pub const MAX_STEP: f64 = 0.01;

/// Convergence threshold on the trim residual norm.
pub const TRIM_TOLERANCE: f64 = 1e-10;
pub const TRIM_MAX_ITERATIONS: usize = 50;

/// Open-loop rotor speed command as a function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "knots", rename_all = "snake_case")]
pub enum RotorSchedule {
    Constant(RotorSpeeds),
    /// Each knot's speeds hold until the next knot.
    PiecewiseConstant(Vec<(f64, RotorSpeeds)>),
    /// Linear interpolation between knots.
    Tabulated(Vec<(f64, RotorSpeeds)>),
}

impl RotorSchedule {
    pub fn at(&self, t: f64) -> RotorSpeeds {
        match self {
            RotorSchedule::Constant(s) => *s,
            RotorSchedule::PiecewiseConstant(knots) => {
                let idx = knots.partition_point(|(tk, _)| *tk <= t);
                knots[idx.saturating_sub(1)].1
            }
            RotorSchedule::Tabulated(knots) => {
                let idx = knots.partition_point(|(tk, _)| *tk <= t);
                if idx == 0 {
                    return knots[0].1;
                }
                if idx == knots.len() {
                    return knots[idx - 1].1;
                }
                let (t0, a) = knots[idx - 1];
                let (t1, b) = knots[idx];
                let w = (t - t0) / (t1 - t0);
                RotorSpeeds(std::array::from_fn(|k| a.0[k] + w * (b.0[k] - a.0[k])))
            }
        }
    }

    /// Checks that knots are finite, strictly increasing and span `[0, duration]`.
    pub fn validate(&self, duration: f64) -> Result<()> {
        let knots = match self {
            RotorSchedule::Constant(s) => {
                return if s.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("rotor speeds must be finite".into()))
                }
            }
            RotorSchedule::PiecewiseConstant(k) | RotorSchedule::Tabulated(k) => k,
        };
        if knots.is_empty() {
            return Err(Error::InvalidParameter("rotor schedule has no knots".into()));
        }
        if knots.iter().any(|(t, s)| !t.is_finite() || !s.is_finite()) {
            return Err(Error::InvalidParameter("rotor schedule knots must be finite".into()));
        }
        if knots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidParameter("rotor schedule times must be strictly increasing".into()));
        }
        if knots[0].0 > 0.0 {
            return Err(Error::InvalidParameter("rotor schedule must start at or before t = 0".into()));
        }
        if matches!(self, RotorSchedule::Tabulated(_)) && knots[knots.len() - 1].0 < duration {
            return Err(Error::InvalidParameter("tabulated rotor schedule must extend to the scenario duration".into()));
        }
        Ok(())
    }
}

/// A complete simulation request.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: QuadParams,
    pub initial: State,
    pub schedule: RotorSchedule,
    /// s
    pub duration: f64,
    /// s
    pub dt: f64,
}

impl Scenario {
    /// Number of integration steps; the trajectory holds one more sample.
    pub fn step_count(&self) -> usize {
        // Absorb rounding in duration/dt so that e.g. 1.0/0.001 gives 1000.
        (self.duration / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub state: State,
    /// Control torque at this sample, body frame.
    pub torque: Vec3,
    /// Damper thrust change per motor, N.
    pub delta_thrust: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
}

pub const CSV_HEADER: &str = "t,sx,sy,sz,vx,vy,vz,r11,r12,r13,r21,r22,r23,r31,r32,r33,p,q,r,g1,g2,g3,g4";

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn last(&self) -> Option<&Sample> {
        self.samples.last()
    }

    /// Writes one row per sample, every value with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for sample in &self.samples {
            let s = &sample.state;
            let mut row = Vec::with_capacity(23);
            row.push(sample.t);
            row.extend(s.position.iter());
            row.extend(s.velocity.iter());
            for i in 0..3 {
                for j in 0..3 {
                    row.push(s.attitude[(i, j)]);
                }
            }
            row.extend(s.body_rates.iter());
            row.extend(s.rotor_speeds.0.iter());
            let line: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

fn offset(state: &State, d: &StateDerivative, h: f64) -> State {
    State {
        position: state.position + d.position * h,
        velocity: state.velocity + d.velocity * h,
        attitude: state.attitude + d.attitude * h,
        body_rates: state.body_rates + d.body_rates * h,
        rotor_speeds: state.rotor_speeds,
    }
}

fn advance<F>(state: &State, t: f64, dt: f64, params: &QuadParams, command: F) -> Result<State>
where
    F: Fn(f64) -> RotorSpeeds,
{
    let half = 0.5 * dt;
    let f = |s: &State, at: f64| state_derivative(s, &command(at), params);
    let k1 = f(state, t)?;
    let k2 = f(&offset(state, &k1, half), t + half)?;
    let k3 = f(&offset(state, &k2, half), t + half)?;
    let k4 = f(&offset(state, &k3, dt), t + dt)?;
    let w = dt / 6.0;
    let attitude = state.attitude + (k1.attitude + (k2.attitude + k3.attitude) * 2.0 + k4.attitude) * w;
    let next = State {
        position: state.position + (k1.position + (k2.position + k3.position) * 2.0 + k4.position) * w,
        velocity: state.velocity + (k1.velocity + (k2.velocity + k3.velocity) * 2.0 + k4.velocity) * w,
        attitude: orthonormalize(&attitude).map_err(|e| Error::Divergence {
            time: t + dt,
            reason: e.to_string(),
        })?,
        body_rates: state.body_rates + (k1.body_rates + (k2.body_rates + k3.body_rates) * 2.0 + k4.body_rates) * w,
        rotor_speeds: command(t + dt),
    };
    if !next.is_finite() {
        return Err(Error::Divergence { time: t + dt, reason: "non-finite state".into() });
    }
    Ok(next)
}

fn check_step(dt: f64) -> Result<()> {
    if dt > 0.0 && dt <= MAX_STEP {
        Ok(())
    } else {
        Err(Error::InvalidStep { dt, max: MAX_STEP })
    }
}

/// One RK4 step of length `dt` with constant rotor speeds `cmd`. The
/// attitude is projected back onto the rotation group afterwards.
pub fn step(state: &State, cmd: &RotorSpeeds, params: &QuadParams, dt: f64) -> Result<State> {
    check_step(dt)?;
    advance(state, 0.0, dt, params, |_| *cmd)
}

/// Runs a scenario to completion, sampling after every step.
pub fn simulate(scenario: &Scenario) -> Result<Trajectory> {
    let Scenario { params, initial, schedule, duration, dt } = scenario;
    params.validate()?;
    check_step(*dt)?;
    if !(*duration >= *dt) {
        return Err(Error::InvalidParameter(format!("duration {duration} s is shorter than dt {dt} s")));
    }
    schedule.validate(*duration)?;

    let n = scenario.step_count();
    let mut samples = Vec::with_capacity(n + 1);
    let mut state = State { rotor_speeds: schedule.at(0.0), ..initial.clone() };
    for k in 0..=n {
        let t = k as f64 * dt;
        let loads = motor_loads(&state, params).map_err(|e| Error::AtTime { time: t, source: Box::new(e) })?;
        samples.push(Sample {
            t,
            state: state.clone(),
            torque: loads.iter().map(|l| l.moment).sum(),
            delta_thrust: std::array::from_fn(|i| loads[i].delta_thrust.z),
        });
        if k < n {
            state = advance(&state, t, *dt, params, |at| schedule.at(at)).map_err(|e| match e {
                Error::Divergence { .. } => e,
                other => Error::AtTime { time: t, source: Box::new(other) },
            })?;
        }
    }
    Ok(Trajectory { samples })
}

/// Force and torque imbalance at rest, level, with the given rotor speeds:
/// `(Σ rotor forces - m·g·ẑ, Σ moments)` in the body frame.
pub fn trim_residual(params: &QuadParams, speeds: &RotorSpeeds) -> Result<(Vec3, Vec3)> {
    let mut quiet = params.clone();
    quiet.model.dampers = false;
    let state = State::at_rest(*speeds);
    let force = body_force(&state, &quiet)? - Vec3::new(0.0, 0.0, params.mass * params.gravity);
    Ok((force, control_torque(&state, &quiet)?))
}

/// True when equal rotor speeds balance the vehicle: equal dihedral on every
/// arm, twist equal on motors 1/3 and opposite on motors 2/4.
pub fn is_symmetric(params: &QuadParams) -> bool {
    let a = params.rotor.alpha;
    let b = params.rotor.beta;
    b.iter().all(|x| *x == b[0]) && a[0] == a[2] && a[1] == a[3] && a[1] == -a[0]
}

/// Rotor speeds that hold the vehicle level and motionless.
///
/// Symmetric layouts use the closed form `4·k_f·γ̇²·cos α·cos β = m·g`. Other
/// layouts run a damped Gauss-Newton iteration on the six force and torque
/// residuals, started from the flat-vehicle solution.
pub fn hover_trim(params: &QuadParams) -> Result<RotorSpeeds> {
    params.validate()?;
    let weight = params.mass * params.gravity;
    if is_symmetric(params) {
        let lift: f64 = MotorIndex::ALL.iter().map(|&i| params.motor_geometry(i).1[(2, 2)]).sum();
        if lift > 0.0 {
            let speeds = RotorSpeeds::uniform((weight / (params.rotor.k_f * lift)).sqrt());
            let (f, t) = trim_residual(params, &speeds)?;
            if (f.norm_squared() + t.norm_squared()).sqrt() < TRIM_TOLERANCE {
                return Ok(speeds);
            }
        }
    }
    newton_trim(params)
}

fn residual_vector(params: &QuadParams, speeds: &RotorSpeeds) -> Result<DVector<f64>> {
    let (f, t) = trim_residual(params, speeds)?;
    Ok(DVector::from_iterator(6, f.iter().chain(t.iter()).copied()))
}

fn newton_trim(params: &QuadParams) -> Result<RotorSpeeds> {
    let k_f = params.rotor.k_f;
    let k_t = params.rotor.k_t;
    let mut speeds = RotorSpeeds::uniform((params.mass * params.gravity / (4.0 * k_f)).sqrt());
    let mut residual = residual_vector(params, &speeds)?;
    let failure = |iterations: usize, r: &DVector<f64>| Error::TrimFailure {
        iterations,
        force_residual: r.rows(0, 3).norm(),
        torque_residual: r.rows(3, 3).norm(),
    };

    // Per-motor force and moment per unit thrust, independent of speed.
    let directions: Vec<(Vec3, Vec3)> = MotorIndex::ALL
        .iter()
        .map(|&i| {
            let (origin, rot) = params.motor_geometry(i);
            let axis = rot.column(2).into_owned();
            (axis, origin.cross(&axis) + axis * (params.rotor.spin_sign[i.slot()] * k_t))
        })
        .collect();

    for iteration in 0..TRIM_MAX_ITERATIONS {
        if residual.norm() < TRIM_TOLERANCE {
            return Ok(RotorSpeeds(speeds.0.map(f64::abs)));
        }
        let mut jacobian = DMatrix::zeros(6, 4);
        for (col, (force_dir, moment_dir)) in directions.iter().enumerate() {
            let scale = 2.0 * k_f * speeds.0[col];
            for row in 0..3 {
                jacobian[(row, col)] = scale * force_dir[row];
                jacobian[(row + 3, col)] = scale * moment_dir[row];
            }
        }
        let delta = jacobian
            .svd(true, true)
            .solve(&(-&residual), 1e-14)
            .map_err(|_| failure(iteration, &residual))?;

        let mut lambda = 1.0;
        let mut improved = None;
        while lambda > 1e-6 {
            let trial = RotorSpeeds(std::array::from_fn(|k| speeds.0[k] + lambda * delta[k]));
            let r = residual_vector(params, &trial)?;
            if r.norm() < residual.norm() {
                improved = Some((trial, r));
                break;
            }
            lambda *= 0.5;
        }
        match improved {
            Some((s, r)) => {
                speeds = s;
                residual = r;
            }
            None => return Err(failure(iteration + 1, &residual)),
        }
    }
    if residual.norm() < TRIM_TOLERANCE {
        Ok(RotorSpeeds(speeds.0.map(f64::abs)))
    } else {
        Err(failure(TRIM_MAX_ITERATIONS, &residual))
    }
}
