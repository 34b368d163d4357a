use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Value};
use tiltquad_core::sim::{simulate, trim_residual};
use tiltquad_core::stability::{
    linearize_hover, pole_sweep_alpha, pole_sweep_d, rank_configurations, yaw_transfer_function, zeta_prime_yaw,
    ChannelPoles, PoleReport, SweepPoint, STATE_LABELS,
};
use tiltquad_core::{hover_trim, Error, Scenario};

use crate::config::RunConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Hover trim speeds and residuals.
    Trim,
    /// Time-domain simulation to a trajectory CSV.
    Simulate,
    /// Analytic yaw-rate transfer function.
    YawTf,
    /// Linearization about hover and its eigenvalues.
    Poles,
    /// Stability ranking of the six preset layouts.
    Rank,
    /// Channel poles against center-of-mass offset.
    SweepD,
    /// Channel poles against twist magnitude.
    SweepAlpha,
}

impl Command {
    /// Core module whose errors this command surfaces.
    pub fn module(self) -> &'static str {
        match self {
            Command::Trim | Command::Simulate => "sim",
            _ => "stability",
        }
    }

    pub fn name(self) -> String {
        self.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
    }
}

#[derive(Debug)]
pub enum RunError {
    Core(Error),
    Io(std::io::Error),
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Core(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

pub struct Outcome {
    pub artifacts: Vec<String>,
    pub result: Value,
}

#[derive(Serialize)]
struct Pole {
    re: f64,
    im: f64,
}

#[derive(Serialize)]
struct PoleRecord {
    config_id: Option<usize>,
    poles: Vec<Pole>,
    metric: f64,
    trim_speeds: [f64; 4],
    channel_poles: ChannelPoles,
    yaw_control_gain: f64,
    maneuverability: f64,
}

fn record(config_id: Option<usize>, report: &PoleReport) -> PoleRecord {
    PoleRecord {
        config_id,
        poles: report.eigenvalues.iter().map(|z| Pole { re: z.re, im: z.im }).collect(),
        metric: report.metric,
        trim_speeds: report.trim_speeds.0,
        channel_poles: report.channel_poles,
        yaw_control_gain: report.yaw_control_gain,
        maneuverability: report.maneuverability,
    }
}

pub fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> std::io::Result<String> {
    let mut out = BufWriter::new(File::create(dir.join(name))?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(name.to_string())
}

fn sweep_points(key: &str, points: &[SweepPoint], config_id: Option<usize>) -> Vec<Value> {
    points
        .iter()
        .map(|p| match &p.report {
            Ok(r) => json!({ key: p.value, "record": record(config_id, r) }),
            Err(e) => json!({ key: p.value, "error": e.to_string() }),
        })
        .collect()
}

pub fn run(command: Command, cfg: &RunConfig, out: &Path) -> Result<Outcome, RunError> {
    let params = &cfg.params;
    let config_id = cfg.preset.map(|p| p.id());
    let options = cfg.linearize_options();
    match command {
        Command::Trim => {
            let speeds = hover_trim(params)?;
            let (force, torque) = trim_residual(params, &speeds)?;
            let result = json!({
                "trim_speeds": speeds.0,
                "force_residual": force.norm(),
                "torque_residual": torque.norm(),
            });
            let artifacts = vec![write_json(out, "trim.json", &result)?];
            Ok(Outcome { artifacts, result })
        }
        Command::Simulate => {
            let trim = if cfg.needs_trim() { Some(hover_trim(params)?) } else { None };
            let schedule = cfg.schedule(trim).expect("trim computed when required");
            let initial = cfg.initial_state(schedule.at(0.0));
            let sc = &cfg.resolved.scenario;
            let scenario = Scenario { params: params.clone(), initial, schedule, duration: sc.duration, dt: sc.dt };
            let trajectory = simulate(&scenario)?;
            let mut csv = BufWriter::new(File::create(out.join("trajectory.csv"))?);
            trajectory.write_csv(&mut csv)?;
            csv.flush()?;
            let last = trajectory.last().expect("trajectory holds the initial sample");
            let result = json!({
                "samples": trajectory.len(),
                "final_time": last.t,
                "final_position": last.state.position.as_slice(),
                "final_velocity": last.state.velocity.as_slice(),
                "final_body_rates": last.state.body_rates.as_slice(),
                "trim_speeds": trim.map(|s| s.0),
            });
            Ok(Outcome { artifacts: vec!["trajectory.csv".into()], result })
        }
        Command::YawTf => {
            let with_damper = params.model.dampers;
            let tf = yaw_transfer_function(params, with_damper)?;
            let stability = if tf.is_stable() {
                "stable"
            } else if tf.is_marginal() {
                "marginal"
            } else {
                "unstable"
            };
            let result = json!({
                "gain": tf.gain,
                "pole": tf.pole,
                "with_damper": with_damper,
                "zeta_prime_yaw": zeta_prime_yaw(params)?,
                "stability": stability,
            });
            let artifacts = vec![write_json(out, "yaw_tf.json", &result)?];
            Ok(Outcome { artifacts, result })
        }
        Command::Poles => {
            let model = linearize_hover(params, &options)?;
            let report = PoleReport::from_model(&model);
            let full = json!({
                "record": record(config_id, &report),
                "state_labels": STATE_LABELS,
                "state_matrix": model.state_matrix.row_iter()
                    .map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
                "input_matrix": model.input_matrix.row_iter()
                    .map(|r| r.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>(),
                "step_discrepancy": model.step_discrepancy,
            });
            let artifacts = vec![write_json(out, "poles.json", &full)?];
            let result = json!({
                "config_id": config_id,
                "metric": report.metric,
                "max_real_part": model.max_real_part(),
            });
            Ok(Outcome { artifacts, result })
        }
        Command::Rank => {
            let r = &cfg.resolved.rotor;
            let ranking = rank_configurations(r.magnitude_alpha, r.magnitude_beta, params, &options)?;
            let order = ranking.order();
            let full = json!({
                "metric": "leftmost decoupled channel pole",
                "order": order,
                "configs": ranking.ranked.iter().map(|c| record(Some(c.preset.id()), &c.report)).collect::<Vec<_>>(),
                "disqualified": ranking.disqualified.iter()
                    .map(|(p, e)| json!({ "config_id": p.id(), "error": e.to_string() }))
                    .collect::<Vec<_>>(),
            });
            let artifacts = vec![write_json(out, "rank.json", &full)?];
            Ok(Outcome { artifacts, result: json!({ "order": order }) })
        }
        Command::SweepD => {
            let d_values = &cfg.resolved.analysis.d_values;
            let points = pole_sweep_d(params, d_values, &options);
            let full = json!({ "points": sweep_points("d", &points, config_id) });
            let artifacts = vec![write_json(out, "sweep_d.json", &full)?];
            let result = json!({
                "d": d_values,
                "roll_poles": points.iter().map(|p| p.roll_pole()).collect::<Vec<_>>(),
                "failed": points.iter().filter(|p| p.report.is_err()).count(),
            });
            Ok(Outcome { artifacts, result })
        }
        Command::SweepAlpha => {
            let magnitudes = &cfg.resolved.analysis.alpha_values;
            let points = pole_sweep_alpha(params, magnitudes, &options);
            let mut values = sweep_points("alpha", &points, config_id);
            for (v, m) in values.iter_mut().zip(magnitudes) {
                let mut p = params.clone();
                let signs = params.rotor.alpha.map(|a| if a == 0.0 { 0.0 } else { a.signum() });
                let signs = if signs.iter().all(|s| *s == 0.0) { [1.0, -1.0, 1.0, -1.0] } else { signs };
                p.rotor.alpha = signs.map(|s| s * m.abs());
                if let Ok(tf) = yaw_transfer_function(&p, true) {
                    v["analytic_yaw_pole"] = json!(tf.pole);
                    v["yaw_gain"] = json!(tf.gain);
                }
            }
            let full = json!({ "points": values });
            let artifacts = vec![write_json(out, "sweep_alpha.json", &full)?];
            let result = json!({
                "alpha": magnitudes,
                "yaw_poles": points.iter()
                    .map(|p| p.report.as_ref().ok().map(|r| r.channel_poles.yaw))
                    .collect::<Vec<_>>(),
                "failed": points.iter().filter(|p| p.report.is_err()).count(),
            });
            Ok(Outcome { artifacts, result })
        }
    }
}
