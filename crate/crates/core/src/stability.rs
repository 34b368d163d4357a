//! Open-loop stability about hover.
//!
//! Two routes are provided. The analytic route covers pure yaw for layouts
//! with equal-magnitude, alternating twist: the yaw rate responds to the
//! motor input `u = γ̇₁² - γ̇₂² + γ̇₃² - γ̇₄²` through `C₁ / (s + ζ'/I_zz)`.
//! The numeric route linearizes the full equations of motion about hover
//! trim by central differences and extracts eigenvalues.
//!
//! Linearized state ordering, see [`STATE_LABELS`]: body-frame attitude
//! perturbation (3), body rates (3), inertial velocity (3). Position is left
//! out because nothing in the model depends on it.

use std::cmp::Ordering;

use nalgebra::{Complex, DMatrix, Schur};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{state_derivative, QuadParams, State};
use crate::error::{Error, Result};
use crate::frames::{exp_so3, MotorIndex, Vec3};
use crate::rotor::{total_delta_thrust, DamperModel, RotorSpeeds};
use crate::sim::hover_trim;

pub const STATE_LABELS: [&str; 9] = ["roll", "pitch", "yaw", "p", "q", "r", "vx", "vy", "vz"];
pub const STATE_DIM: usize = 9;
pub const INPUT_DIM: usize = 4;

/// Twist pattern tolerance when checking the analytic yaw model applies.
const PATTERN_TOL: f64 = 1e-12;

const SCHUR_MAX_ITERATIONS: usize = 10_000;

/// Channel poles closer than this are treated as equal when ranking.
pub const RANK_TIE_TOL: f64 = 1e-9;

/// `gain / (s - pole)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstOrderTF {
    pub gain: f64,
    pub pole: f64,
}

impl FirstOrderTF {
    pub fn is_stable(&self) -> bool {
        self.pole < 0.0
    }

    pub fn is_marginal(&self) -> bool {
        self.pole == 0.0
    }

    pub fn is_unstable(&self) -> bool {
        self.pole > 0.0
    }

    /// Response to a unit step in `u` at time `t`, starting from rest.
    pub fn step_response(&self, t: f64) -> f64 {
        if self.pole == 0.0 {
            self.gain * t
        } else {
            self.gain / -self.pole * (1.0 - (self.pole * t).exp())
        }
    }
}

/// Signed twist `a` of a layout with `α = (a, -a, a, -a)` and no dihedral.
pub fn alternating_twist(params: &QuadParams) -> Result<f64> {
    let a = params.rotor.alpha;
    let pattern = (a[0] - a[2]).abs() < PATTERN_TOL
        && (a[1] + a[0]).abs() < PATTERN_TOL
        && (a[3] + a[0]).abs() < PATTERN_TOL;
    if !pattern {
        return Err(Error::InvalidParameter(format!(
            "yaw transfer function needs twist (a, -a, a, -a), got {a:?}"
        )));
    }
    if params.rotor.beta.iter().any(|b| b.abs() > PATTERN_TOL) {
        return Err(Error::InvalidParameter("yaw transfer function needs zero dihedral".into()));
    }
    Ok(a[0])
}

/// Yaw control gain `C₁ = k_f·(k_t·cos a - L·sin a) / I_zz`.
///
/// Vanishes at `a = atan(k_t / L)`, where the tilted-thrust moment cancels
/// the reaction torque and the motors lose yaw authority.
pub fn yaw_gain(params: &QuadParams) -> Result<f64> {
    let a = alternating_twist(params)?;
    let r = &params.rotor;
    Ok(r.k_f * (r.spin_sign[0] * r.k_t * a.cos() - params.arm_length * a.sin()) / params.inertia[2])
}

/// Effective yaw damping `ζ' = 4·ζ_yaw·L²·sin²a`.
///
/// Even in `a`: reversing the twist chirality reverses each rotor's thrust
/// change and its moment arm together, so the product keeps its sign.
pub fn zeta_prime_yaw(params: &QuadParams) -> Result<f64> {
    let a = alternating_twist(params)?;
    Ok(4.0 * params.blade.zeta_yaw * params.arm_length.powi(2) * a.sin().powi(2))
}

/// `r(s)/u(s)`: `C₁/s` without the damper, `C₁/(s + ζ'/I_zz)` with it.
pub fn yaw_transfer_function(params: &QuadParams, with_damper: bool) -> Result<FirstOrderTF> {
    let gain = yaw_gain(params)?;
    let pole = if with_damper { -zeta_prime_yaw(params)? / params.inertia[2] + 0.0 } else { 0.0 };
    Ok(FirstOrderTF { gain, pole })
}

/// Moment of the yaw-damper thrust changes during pure yaw at rate `r`,
/// summed over the four rotors through their moment arms only. Uses the
/// linear damper constants regardless of the configured damper model.
pub fn yaw_damper_torque(params: &QuadParams, r: f64) -> Result<Vec3> {
    let mut p = params.clone();
    p.model.dampers = true;
    p.model.damper_model = DamperModel::Linear;
    let state = State { body_rates: Vec3::new(0.0, 0.0, r), ..State::default() };
    let mut total = Vec3::zeros();
    for i in MotorIndex::ALL {
        let (origin, rot) = p.motor_geometry(i);
        total += origin.cross(&(rot * total_delta_thrust(&state, i, &p)?));
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearizeOptions {
    /// Central-difference step, relative to max(1, |x|) for states and to
    /// the trim value for inputs.
    pub eps: f64,
    /// Keep propeller gyroscopic coupling in the linear model.
    pub gyro: bool,
}

impl Default for LinearizeOptions {
    fn default() -> Self {
        LinearizeOptions { eps: 1e-6, gyro: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Roll,
    Pitch,
    Yaw,
}

impl Channel {
    pub const ALL: [Channel; 3] = [Channel::Roll, Channel::Pitch, Channel::Yaw];

    /// Indices of the (angle, rate) pair in the linearized state.
    pub fn indices(self) -> (usize, usize) {
        match self {
            Channel::Roll => (0, 3),
            Channel::Pitch => (1, 4),
            Channel::Yaw => (2, 5),
        }
    }
}

/// Rate pole of each rotational channel taken on its own.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelPoles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl ChannelPoles {
    pub fn get(&self, channel: Channel) -> f64 {
        match channel {
            Channel::Roll => self.roll,
            Channel::Pitch => self.pitch,
            Channel::Yaw => self.yaw,
        }
    }

    /// Ranking metric: real part of the leftmost channel pole. Lower is
    /// more stable.
    pub fn metric(&self) -> f64 {
        self.roll.min(self.pitch).min(self.yaw)
    }
}

/// Linear model about hover trim.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// 9×9, rows and columns ordered as [`STATE_LABELS`].
    pub state_matrix: DMatrix<f64>,
    /// 9×4, columns are perturbations of `γ̇ᵢ²`.
    pub input_matrix: DMatrix<f64>,
    /// Sorted by real part, then imaginary part.
    pub eigenvalues: Vec<Complex<f64>>,
    pub trim: RotorSpeeds,
    /// Largest entry change in the state matrix between steps `eps` and `eps/2`.
    pub step_discrepancy: f64,
}

impl LinearModel {
    /// Eigenvalues of a channel's (angle, rate) block with cross-coupling
    /// dropped. The block is a kinematic integrator feeding a first-order
    /// rate mode; the returned value is the rate mode's real part.
    pub fn channel_pole(&self, channel: Channel) -> f64 {
        let (a, r) = channel.indices();
        let m = &self.state_matrix;
        let (p, q, s, t) = (m[(a, a)], m[(a, r)], m[(r, a)], m[(r, r)]);
        let half_trace = 0.5 * (p + t);
        let disc = half_trace * half_trace - (p * t - q * s);
        if disc < 0.0 {
            return half_trace;
        }
        let root = disc.sqrt();
        let (lo, hi) = (half_trace - root, half_trace + root);
        if lo.abs() >= hi.abs() {
            lo
        } else {
            hi
        }
    }

    pub fn channel_poles(&self) -> ChannelPoles {
        ChannelPoles {
            roll: self.channel_pole(Channel::Roll),
            pitch: self.channel_pole(Channel::Pitch),
            yaw: self.channel_pole(Channel::Yaw),
        }
    }

    /// Largest coupling between a channel's (angle, rate) pair and every
    /// other state, in either direction.
    pub fn channel_coupling(&self, channel: Channel) -> f64 {
        let (a, r) = channel.indices();
        let mut worst = 0.0f64;
        for k in (0..STATE_DIM).filter(|k| *k != a && *k != r) {
            for c in [a, r] {
                worst = worst.max(self.state_matrix[(c, k)].abs()).max(self.state_matrix[(k, c)].abs());
            }
        }
        worst
    }

    /// Yaw-rate response to the differential input `u`, read from the input
    /// matrix. Equals `C₁` whenever the analytic yaw model applies.
    pub fn yaw_control_gain(&self) -> f64 {
        let signs = [1.0, -1.0, 1.0, -1.0];
        0.25 * (0..INPUT_DIM).map(|k| signs[k] * self.input_matrix[(5, k)]).sum::<f64>()
    }

    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
    }
}

fn hover_rhs(params: &QuadParams, trim: &RotorSpeeds, x: &[f64; STATE_DIM], du: &[f64; INPUT_DIM]) -> Result<[f64; STATE_DIM]> {
    let dtheta = Vec3::new(x[0], x[1], x[2]);
    let w = Vec3::new(x[3], x[4], x[5]);
    let speeds = RotorSpeeds(std::array::from_fn(|k| (trim.0[k] * trim.0[k] + du[k]).max(0.0).sqrt()));
    let state = State {
        position: Vec3::zeros(),
        velocity: Vec3::new(x[6], x[7], x[8]),
        attitude: exp_so3(&dtheta),
        body_rates: w,
        rotor_speeds: speeds,
    };
    let d = state_derivative(&state, &speeds, params)?;
    // Local attitude coordinates: θ̇ = J⁻¹(θ)·ω to first order in θ.
    let theta_dot = w + dtheta.cross(&w) * 0.5;
    let mut out = [0.0; STATE_DIM];
    out[..3].copy_from_slice(theta_dot.as_slice());
    out[3..6].copy_from_slice(d.body_rates.as_slice());
    out[6..].copy_from_slice(d.velocity.as_slice());
    Ok(out)
}

fn jacobians(params: &QuadParams, trim: &RotorSpeeds, eps: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let mut a = DMatrix::zeros(STATE_DIM, STATE_DIM);
    let mut b = DMatrix::zeros(STATE_DIM, INPUT_DIM);
    let zero_u = [0.0; INPUT_DIM];
    for j in 0..STATE_DIM {
        let mut plus = [0.0; STATE_DIM];
        let mut minus = [0.0; STATE_DIM];
        plus[j] = eps;
        minus[j] = -eps;
        let (fp, fm) = (hover_rhs(params, trim, &plus, &zero_u)?, hover_rhs(params, trim, &minus, &zero_u)?);
        for i in 0..STATE_DIM {
            a[(i, j)] = (fp[i] - fm[i]) / (2.0 * eps);
        }
    }
    let x0 = [0.0; STATE_DIM];
    for j in 0..INPUT_DIM {
        let h = eps * (trim.0[j] * trim.0[j]).max(1.0);
        let mut plus = [0.0; INPUT_DIM];
        let mut minus = [0.0; INPUT_DIM];
        plus[j] = h;
        minus[j] = -h;
        let (fp, fm) = (hover_rhs(params, trim, &x0, &plus)?, hover_rhs(params, trim, &x0, &minus)?);
        for i in 0..STATE_DIM {
            b[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    Ok((a, b))
}

/// Eigenvalues via the irreducible diagonal blocks of `a`.
///
/// The hover Jacobian is mostly block triangular, with zero eigenvalues of
/// high algebraic multiplicity. QR iteration on the whole matrix either
/// stalls on it or smears the defective zeros by roughly `ε^(1/k)`. Splitting
/// along strongly connected components of the sparsity graph first is a
/// permutation similarity, so no rounding enters.
fn eigenvalues(a: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    let n = a.nrows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n * n);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in (0..n).filter(|j| *j != i && a[(i, *j)] != 0.0) {
            graph.add_edge(nodes[i], nodes[j], ());
        }
    }
    let mut out = Vec::with_capacity(n);
    for component in tarjan_scc(&graph) {
        let idx: Vec<usize> = component.iter().map(|v| v.index()).collect();
        if let [k] = idx[..] {
            out.push(Complex::new(a[(k, k)], 0.0));
            continue;
        }
        let block = a.select_rows(&idx).select_columns(&idx);
        let schur = Schur::try_new(block, f64::EPSILON, SCHUR_MAX_ITERATIONS)
            .ok_or_else(|| Error::Degenerate("eigenvalue iteration did not converge".into()))?;
        out.extend(schur.complex_eigenvalues().iter().copied());
    }
    Ok(out)
}

/// Central-difference linearization of the equations of motion about hover
/// trim, with a convergence check at `eps / 2`.
pub fn linearize_hover(params: &QuadParams, options: &LinearizeOptions) -> Result<LinearModel> {
    if !(options.eps > 0.0 && options.eps.is_finite()) {
        return Err(Error::InvalidParameter("eps must be > 0".into()));
    }
    let mut params = params.clone();
    params.model.gyro = options.gyro;
    let trim = hover_trim(&params)?;
    let (a, b) = jacobians(&params, &trim, options.eps)?;
    let (a_half, _) = jacobians(&params, &trim, 0.5 * options.eps)?;
    let step_discrepancy = (&a - &a_half).abs().max();

    let mut eigenvalues = eigenvalues(&a)?;
    eigenvalues.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(LinearModel { state_matrix: a, input_matrix: b, eigenvalues, trim, step_discrepancy })
}

/// Everything the reports need about one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleReport {
    pub trim_speeds: RotorSpeeds,
    pub eigenvalues: Vec<Complex<f64>>,
    pub channel_poles: ChannelPoles,
    pub metric: f64,
    /// `C₁` read from the linear model.
    pub yaw_control_gain: f64,
    /// Informational: `-metric + |C₁|`.
    pub maneuverability: f64,
}

impl PoleReport {
    pub fn from_model(model: &LinearModel) -> Self {
        let channel_poles = model.channel_poles();
        let metric = channel_poles.metric();
        let yaw_control_gain = model.yaw_control_gain();
        PoleReport {
            trim_speeds: model.trim,
            eigenvalues: model.eigenvalues.clone(),
            channel_poles,
            metric,
            yaw_control_gain,
            maneuverability: -metric + yaw_control_gain.abs(),
        }
    }
}

pub fn analyze(params: &QuadParams, options: &LinearizeOptions) -> Result<PoleReport> {
    Ok(PoleReport::from_model(&linearize_hover(params, options)?))
}

/// The six twist/dihedral sign patterns, numbered as in the ranking list.
/// Preset 4 is the flat reference vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum ConfigPreset {
    /// β < 0, α₁,₃ > 0, α₂,₄ < 0
    DihedralAndTwist = 1,
    /// β < 0, α = 0
    DihedralOnly = 2,
    /// β = 0, α₁,₃ > 0, α₂,₄ < 0
    TwistOnly = 3,
    /// β = 0, α = 0
    Flat = 4,
    /// β = 0, α₁,₃ < 0, α₂,₄ > 0
    ReversedTwist = 5,
    /// β > 0, α₁,₃ < 0, α₂,₄ > 0
    Reversed = 6,
}

impl From<ConfigPreset> for u8 {
    fn from(p: ConfigPreset) -> u8 {
        p as u8
    }
}

impl TryFrom<u8> for ConfigPreset {
    type Error = Error;
    fn try_from(id: u8) -> Result<Self> {
        ConfigPreset::from_id(id as usize)
    }
}

impl ConfigPreset {
    pub const ALL: [ConfigPreset; 6] = [
        ConfigPreset::DihedralAndTwist,
        ConfigPreset::DihedralOnly,
        ConfigPreset::TwistOnly,
        ConfigPreset::Flat,
        ConfigPreset::ReversedTwist,
        ConfigPreset::Reversed,
    ];

    pub fn from_id(id: usize) -> Result<Self> {
        ConfigPreset::ALL
            .get(id.wrapping_sub(1))
            .copied()
            .ok_or_else(|| Error::InvalidParameter(format!("preset must be 1..=6, got {id}")))
    }

    pub fn id(self) -> usize {
        self as usize
    }

    /// (sign of β on every arm, sign of α on motors 1 and 3).
    pub fn signs(self) -> (f64, f64) {
        match self {
            ConfigPreset::DihedralAndTwist => (-1.0, 1.0),
            ConfigPreset::DihedralOnly => (-1.0, 0.0),
            ConfigPreset::TwistOnly => (0.0, 1.0),
            ConfigPreset::Flat => (0.0, 0.0),
            ConfigPreset::ReversedTwist => (0.0, -1.0),
            ConfigPreset::Reversed => (1.0, -1.0),
        }
    }

    /// Copy of `params` with this preset's angles at the given magnitudes.
    pub fn apply(self, params: &QuadParams, alpha_magnitude: f64, beta_magnitude: f64) -> QuadParams {
        let (beta_sign, alpha_sign) = self.signs();
        let a = alpha_sign * alpha_magnitude.abs();
        let mut p = params.clone();
        p.rotor.alpha = [a, -a, a, -a];
        p.rotor.beta = [beta_sign * beta_magnitude.abs(); 4];
        p
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedConfig {
    pub preset: ConfigPreset,
    pub report: PoleReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ranking {
    /// Most stable first.
    pub ranked: Vec<RankedConfig>,
    /// Presets that could not be trimmed or linearized.
    pub disqualified: Vec<(ConfigPreset, Error)>,
}

impl Ranking {
    pub fn order(&self) -> Vec<usize> {
        self.ranked.iter().map(|r| r.preset.id()).collect()
    }
}

fn quantized(x: f64) -> i64 {
    (x / RANK_TIE_TOL).round() as i64
}

fn rank_cmp(a: &RankedConfig, b: &RankedConfig) -> Ordering {
    let (pa, pb) = (&a.report.channel_poles, &b.report.channel_poles);
    quantized(pa.metric())
        .cmp(&quantized(pb.metric()))
        .then(quantized(pa.yaw).cmp(&quantized(pb.yaw)))
        .then(quantized(pa.roll).cmp(&quantized(pb.roll)))
        .then(a.preset.cmp(&b.preset))
}

/// Linearizes all six presets and orders them by [`ChannelPoles::metric`],
/// breaking ties (within [`RANK_TIE_TOL`]) by the yaw pole, then the roll
/// pole, then preset number.
pub fn rank_configurations(
    base_alpha: f64,
    base_beta: f64,
    params: &QuadParams,
    options: &LinearizeOptions,
) -> Result<Ranking> {
    for (name, v) in [("base_alpha", base_alpha), ("base_beta", base_beta)] {
        if !(v > 0.0 && v < std::f64::consts::FRAC_PI_4) {
            return Err(Error::InvalidParameter(format!("{name} must lie in (0, π/4), got {v}")));
        }
    }
    let outcomes: Vec<(ConfigPreset, Result<PoleReport>)> = ConfigPreset::ALL
        .par_iter()
        .map(|&preset| (preset, analyze(&preset.apply(params, base_alpha, base_beta), options)))
        .collect();
    let mut ranked = Vec::new();
    let mut disqualified = Vec::new();
    for (preset, outcome) in outcomes {
        match outcome {
            Ok(report) => ranked.push(RankedConfig { preset, report }),
            Err(e) => disqualified.push((preset, e)),
        }
    }
    ranked.sort_by(rank_cmp);
    Ok(Ranking { ranked, disqualified })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub report: Result<PoleReport>,
}

impl SweepPoint {
    /// Roll channel pole, the dominant roll/pitch pole for symmetric layouts.
    pub fn roll_pole(&self) -> Option<f64> {
        self.report.as_ref().ok().map(|r| r.channel_poles.roll)
    }
}

/// Channel poles as the center-of-mass offset varies. Points that fail to
/// trim keep their error and the sweep carries on.
pub fn pole_sweep_d(params: &QuadParams, d_values: &[f64], options: &LinearizeOptions) -> Vec<SweepPoint> {
    d_values
        .par_iter()
        .map(|&d| {
            let mut p = params.clone();
            p.com_offset = d;
            SweepPoint { value: d, report: analyze(&p, options) }
        })
        .collect()
}

/// Channel poles as the twist magnitude varies, keeping the sign pattern of
/// `params` (or the damping pattern `(+, -, +, -)` when `params` has no twist).
pub fn pole_sweep_alpha(params: &QuadParams, magnitudes: &[f64], options: &LinearizeOptions) -> Vec<SweepPoint> {
    let signs = params.rotor.alpha.map(|a| if a == 0.0 { 0.0 } else { a.signum() });
    let signs = if signs.iter().all(|s| *s == 0.0) { [1.0, -1.0, 1.0, -1.0] } else { signs };
    magnitudes
        .par_iter()
        .map(|&m| {
            let mut p = params.clone();
            p.rotor.alpha = std::array::from_fn(|k| signs[k] * m.abs());
            SweepPoint { value: m, report: analyze(&p, options) }
        })
        .collect()
}
