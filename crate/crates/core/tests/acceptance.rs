//! Acceptance suite. Prints one line per criterion and exits non-zero if
//! any criterion fails.

use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tiltquad_core::dynamics::control_torque;
use tiltquad_core::frames::orthonormality_error;
use tiltquad_core::rotor::{blade_element_delta_thrust, delta_thrust_blade};
use tiltquad_core::sim::{simulate, trim_residual};
use tiltquad_core::stability::{
    linearize_hover, pole_sweep_d, rank_configurations, yaw_damper_torque, yaw_transfer_function, Channel,
    LinearizeOptions,
};
use tiltquad_core::{hover_trim, ConfigPreset, QuadParams, RotorSchedule, RotorSpeeds, Scenario, State, Vec3};

const MAGNITUDE: f64 = 0.05;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn random_speeds(rng: &mut StdRng) -> RotorSpeeds {
    RotorSpeeds(std::array::from_fn(|_| rng.gen_range(300.0..700.0)))
}

fn flat_reduction() -> Outcome {
    let mut p = QuadParams::default();
    p.com_offset = 0.0;
    p.model.dampers = false;
    let (k_f, k_t, l) = (p.rotor.k_f, p.rotor.k_t, p.arm_length);
    let mut rng = StdRng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let speeds = random_speeds(&mut rng);
        let [g1, g2, g3, g4] = speeds.squared();
        let mixer = Vec3::new(k_f * l * (g2 - g4), k_f * l * (g3 - g1), k_t * k_f * (g1 - g2 + g3 - g4));
        let tau = control_torque(&State::at_rest(speeds), &p).unwrap();
        worst = worst.max((tau - mixer).amax());
    }
    outcome(worst < 1e-12, format!("max deviation {worst:.2e} N·m"))
}

fn closed_form_torque() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a: f64 = rng.gen_range(-0.2..0.2);
        let mut p = QuadParams::default();
        p.model.dampers = false;
        p.rotor.alpha = [a, -a, a, -a];
        p.com_offset = rng.gen_range(-0.1..0.1);
        let speeds = random_speeds(&mut rng);
        let [g1, g2, g3, g4] = speeds.squared();
        let (k_f, k_t, l, d) = (p.rotor.k_f, p.rotor.k_t, p.arm_length, p.com_offset);
        let (s, c) = a.sin_cos();
        let closed = Vec3::new(
            k_f * d * s * (g1 - g3) + (k_f * l * c + k_t * k_f * s) * (g2 - g4),
            (k_f * l * c + k_t * k_f * s) * (g3 - g1) + k_f * d * s * (g4 - g2),
            (k_t * k_f * c - k_f * l * s) * (g1 - g2 + g3 - g4),
        );
        let tau = control_torque(&State::at_rest(speeds), &p).unwrap();
        worst = worst.max((tau - closed).amax());
    }
    outcome(worst < 1e-12, format!("max deviation {worst:.2e} N·m"))
}

fn yaw_torque_chain() -> Outcome {
    let p = ConfigPreset::TwistOnly.apply(&QuadParams::default(), MAGNITUDE, MAGNITUDE);
    let zeta_prime = 4.0 * p.blade.zeta_yaw * p.arm_length.powi(2) * MAGNITUDE.sin().powi(2);
    let mut worst = 0.0f64;
    for r in [0.1, 0.5, 1.0] {
        let tau = yaw_damper_torque(&p, r).unwrap();
        worst = worst.max((tau - Vec3::new(0.0, 0.0, -zeta_prime * r)).amax());
    }
    outcome(worst < 1e-12, format!("max deviation {worst:.2e} N·m"))
}

/// Least-squares slope of ln r against t.
fn log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (st, sy) = points.iter().fold((0.0, 0.0), |(a, b), (t, r)| (a + t, b + r.ln()));
    let (mt, my) = (st / n, sy / n);
    let (num, den) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (t, r)| (a + (t - mt) * (r.ln() - my), b + (t - mt) * (t - mt)));
    num / den
}

fn spin_up(params: &QuadParams, r0: f64, duration: f64) -> Vec<(f64, f64)> {
    let trim = hover_trim(params).unwrap();
    let initial = State { body_rates: Vec3::new(0.0, 0.0, r0), ..State::at_rest(trim) };
    let scenario =
        Scenario { params: params.clone(), initial, schedule: RotorSchedule::Constant(trim), duration, dt: 0.01 };
    simulate(&scenario).unwrap().samples.iter().map(|s| (s.t, s.state.body_rates.z)).collect()
}

fn yaw_pole_three_ways() -> Outcome {
    let mut p = ConfigPreset::TwistOnly.apply(&QuadParams::default(), MAGNITUDE, MAGNITUDE);
    p.model.gyro = false;
    let analytic = yaw_transfer_function(&p, true).unwrap().pole;
    let model = linearize_hover(&p, &LinearizeOptions { gyro: false, ..LinearizeOptions::default() }).unwrap();
    let eigen = model.channel_pole(Channel::Yaw);
    let fitted = log_slope(&spin_up(&p, 0.5, 20.0));
    let e_lin = ((eigen - analytic) / analytic).abs();
    let e_fit = ((fitted - analytic) / analytic).abs();
    outcome(
        e_lin < 1e-3 && e_fit < 0.05,
        format!("analytic {analytic:.6e}, linearized {eigen:.6e} ({e_lin:.1e}), fitted {fitted:.6e} ({e_fit:.1e})"),
    )
}

fn flat_yaw_marginal() -> Outcome {
    let p = ConfigPreset::Flat.apply(&QuadParams::default(), MAGNITUDE, MAGNITUDE);
    let worst = spin_up(&p, 0.5, 5.0).iter().map(|(_, r)| (r.abs() - 0.5).abs()).fold(0.0, f64::max);
    outcome(worst < 1e-6, format!("max |r| change {worst:.2e} rad/s"))
}

fn ranking() -> Outcome {
    let ranking =
        rank_configurations(MAGNITUDE, MAGNITUDE, &QuadParams::default(), &LinearizeOptions::default()).unwrap();
    let order = ranking.order();
    let metrics: Vec<String> =
        ranking.ranked.iter().map(|c| format!("{}:{:.5}", c.preset.id(), c.report.metric)).collect();
    outcome(order == [1, 2, 3, 4, 5, 6], format!("order {order:?}, metrics [{}]", metrics.join(", ")))
}

fn d_monotonic() -> Outcome {
    let p = ConfigPreset::DihedralOnly.apply(&QuadParams::default(), MAGNITUDE, MAGNITUDE);
    let sweep = pole_sweep_d(&p, &[-0.05, 0.0, 0.05, 0.10], &LinearizeOptions::default());
    let poles: Vec<f64> = sweep.iter().map(|s| s.roll_pole().unwrap_or(f64::NAN)).collect();
    let decreasing = poles.windows(2).all(|w| w[1] < w[0]);
    outcome(decreasing, format!("roll poles {poles:.5?}"))
}

fn chirality() -> Outcome {
    let base = QuadParams::default();
    let forward = ConfigPreset::TwistOnly.apply(&base, MAGNITUDE, MAGNITUDE);
    let reversed = ConfigPreset::ReversedTwist.apply(&base, MAGNITUDE, MAGNITUDE);
    let t3 = yaw_damper_torque(&forward, 1.0).unwrap();
    let t5 = yaw_damper_torque(&reversed, 1.0).unwrap();
    let opts = LinearizeOptions::default();
    let p3 = linearize_hover(&forward, &opts).unwrap().channel_pole(Channel::Yaw);
    let p5 = linearize_hover(&reversed, &opts).unwrap().channel_pole(Channel::Yaw);
    let negated = (t3 + t5).amax() < 1e-12;
    let mirrored = (p3 + p5).abs() < 1e-3 * p3.abs();
    outcome(
        negated && mirrored,
        format!("yaw torque at r=1: {:.6e} vs {:.6e}; yaw pole {p3:.6e} vs {p5:.6e}", t3.z, t5.z),
    )
}

fn tumble(dt: f64, duration: f64) -> tiltquad_core::Trajectory {
    let mut p = QuadParams::default();
    p.inertia = [0.01, 0.012, 0.02];
    p.model.dampers = false;
    p.prop_inertia = 0.0;
    let initial = State {
        velocity: Vec3::new(1.0, -0.5, 2.0),
        body_rates: Vec3::new(0.3, 2.0, 0.4),
        ..State::default()
    };
    let scenario =
        Scenario { params: p, initial, schedule: RotorSchedule::Constant(RotorSpeeds::default()), duration, dt };
    simulate(&scenario).unwrap()
}

fn final_rates(dt: f64) -> Vec3 {
    tumble(dt, 2.0).last().unwrap().state.body_rates
}

fn numerics() -> Outcome {
    let reference = final_rates(0.01 / 32.0);
    let coarse = (final_rates(0.01) - reference).norm();
    let fine = (final_rates(0.005) - reference).norm();
    let order = (coarse / fine).log2();

    let long = tumble(0.01, 10.0);
    let ortho = long.samples.iter().map(|s| orthonormality_error(&s.state.attitude)).fold(0.0, f64::max);

    let energy = |s: &State| {
        let i = Vec3::new(0.01, 0.012, 0.02);
        let w = s.body_rates;
        0.5 * s.velocity.norm_squared() + 9.81 * s.position.z + 0.5 * w.component_mul(&w).dot(&i)
    };
    let e0 = energy(&long.samples[0].state);
    let scale = long.samples.iter().map(|s| 0.5 * s.state.velocity.norm_squared()).fold(e0.abs(), f64::max);
    let drift = long.samples.iter().map(|s| (energy(&s.state) - e0).abs()).fold(0.0, f64::max) / scale;

    let base = QuadParams::default();
    let mut trim_worst = 0.0f64;
    for preset in ConfigPreset::ALL {
        let p = preset.apply(&base, MAGNITUDE, MAGNITUDE);
        let (f, t) = trim_residual(&p, &hover_trim(&p).unwrap()).unwrap();
        trim_worst = trim_worst.max(f.norm()).max(t.norm());
    }
    outcome(
        order >= 3.9 && ortho < 1e-9 && drift < 1e-8 && trim_worst < 1e-9,
        format!(
            "RK4 order {order:.3}, orthonormality {ortho:.1e}, relative energy drift {drift:.1e}, trim residual {trim_worst:.1e}"
        ),
    )
}

fn blade_integral() -> Outcome {
    let blade = QuadParams::default().blade;
    let mut worst = 0.0f64;
    for gamma_dot in [200.0, 350.0, 500.0, 650.0, 800.0] {
        for ratio in [-0.045, -0.02, 0.01, 0.03, 0.049] {
            let odot = ratio * gamma_dot * blade.blade_radius;
            let closed = delta_thrust_blade(&blade, odot, gamma_dot).unwrap().z;
            let quad = blade_element_delta_thrust(&blade, odot, gamma_dot, 2000).unwrap();
            worst = worst.max(((quad - closed) / closed).abs());
        }
    }
    outcome(worst < 0.01, format!("max relative deviation {:.3}%", 100.0 * worst))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("flat-quad reduction", Duration::from_secs(1), flat_reduction),
        ("closed-form torque equivalence", Duration::from_secs(1), closed_form_torque),
        ("yaw damper torque chain", Duration::from_secs(1), yaw_torque_chain),
        ("yaw pole three ways", Duration::from_secs(10), yaw_pole_three_ways),
        ("flat yaw is marginal", Duration::from_secs(5), flat_yaw_marginal),
        ("ranking reproduction", Duration::from_secs(30), ranking),
        ("d-monotonicity", Duration::from_secs(30), d_monotonic),
        ("chirality sign rule", Duration::from_secs(5), chirality),
        ("numerics hygiene", Duration::from_secs(30), numerics),
        ("blade-integral consistency", Duration::from_secs(5), blade_integral),
    ];
    let mut failed = Vec::new();
    for (k, (name, limit, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let passed = result.passed && elapsed < *limit;
        let tag = if passed { "PASS" } else { "FAIL" };
        println!(
            "[{tag}] criterion {:>2} {name}: {} [{:.3} s, limit {} s]",
            k + 1,
            result.detail,
            elapsed.as_secs_f64(),
            limit.as_secs()
        );
        if !passed {
            failed.push(k + 1);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", criteria.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
