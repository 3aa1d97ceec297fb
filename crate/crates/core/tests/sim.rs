use crone_core::fixtures::{lorentz_plant, reference_spec, PlantReading, SAMPLE_TIME};
use crone_core::reset::ResetTuning;
use crone_core::sim::*;
use crone_core::synthesis::{synthesize, CroneController, Strategy};

fn design(strategy: Strategy, tuning: ResetTuning) -> CroneController {
    let plant = lorentz_plant(PlantReading::Damping, false);
    synthesize(&reference_spec(), &plant, strategy, tuning, 4).unwrap()
}

fn plant() -> crone_core::lti::RationalTf {
    lorentz_plant(PlantReading::Damping, true)
}

fn cfg(duration: f64) -> SimConfig {
    SimConfig {
        duration,
        ..SimConfig::default()
    }
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
        / scale
}

#[test]
fn linear_step_settles() {
    let c = design(Strategy::Linear, ResetTuning::linear());
    let cfg = cfg(2.0);
    let r = vec![1e-4; cfg.samples()];
    let tr = simulate_controller(&plant(), &c, &r, None, &cfg).unwrap();
    let tail = &tr.e[tr.len() * 9 / 10..];
    let mean = tail.iter().map(|e| e.abs()).sum::<f64>() / tail.len() as f64;
    assert!(mean < 1e-4 * 1e-4, "mean |e| {mean}");
    for k in 0..tr.len() {
        assert_eq!(tr.e[k], tr.r[k] - tr.y[k] - tr.n[k]);
    }
}

#[test]
fn identity_reset_matches_linear_trace() {
    let cfg = cfg(0.5);
    let limits = TrajectoryLimits::default();
    let (r, acc) = fourth_order_trajectory(limits, 0.25, cfg.dt, cfg.samples()).unwrap();
    let ff = nominal_feedforward(&acc);
    for tuning in [
        ResetTuning::new(1.0, 0.3).unwrap(),
        ResetTuning::new(0.2, 1.0).unwrap(),
    ] {
        let c = design(Strategy::LagReset, tuning);
        let reset = simulate_controller(&plant(), &c, &r, Some(&ff), &cfg).unwrap();
        let linear = simulate_controller(
            &plant(),
            &c,
            &r,
            Some(&ff),
            &SimConfig {
                reset_enabled: false,
                ..cfg.clone()
            },
        )
        .unwrap();
        for (a, b) in [
            (&reset.e, &linear.e),
            (&reset.u, &linear.u),
            (&reset.y, &linear.y),
        ] {
            assert!(max_rel(a, b) < 1e-9);
        }
    }
}

#[test]
fn resets_only_at_sign_changes() {
    let c = design(Strategy::LagReset, ResetTuning::new(0.5, 0.0).unwrap());
    let cfg = cfg(0.6);
    let (r, acc) =
        fourth_order_trajectory(TrajectoryLimits::default(), 0.25, cfg.dt, cfg.samples()).unwrap();
    let tr = simulate_controller(&plant(), &c, &r, Some(&nominal_feedforward(&acc)), &cfg).unwrap();
    assert!(!tr.reset_times.is_empty());
    for t in &tr.reset_times {
        let k = (t / cfg.dt).round() as usize;
        assert!(k > 0);
        assert!(tr.e[k] * tr.e[k - 1] < 0.0 || tr.e[k] == 0.0);
    }
    let crossings = (1..tr.len())
        .filter(|&k| tr.e[k] * tr.e[k - 1] < 0.0 || tr.e[k] == 0.0)
        .count();
    assert_eq!(crossings, tr.reset_times.len());
}

#[test]
fn certified_design_decays_from_initial_condition() {
    let c = design(Strategy::LagReset, ResetTuning::new(0.5, 0.5).unwrap());
    let cfg = SimConfig {
        initial_plant_state: Some(vec![0.0, 1e-3]),
        ..cfg(2.0)
    };
    let r = vec![0.0; cfg.samples()];
    let tr = simulate_controller(&plant(), &c, &r, None, &cfg).unwrap();
    let y0 = tr.y.iter().take(100).fold(0.0f64, |m, v| m.max(v.abs()));
    let tail = tr.y[tr.len() - 200..]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let u_tail = tr.u[tr.len() - 200..]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let u0 = tr.u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(y0 > 0.0);
    assert!(tail < 1e-9 * y0, "{tail} vs {y0}");
    assert!(u_tail < 1e-9 * u0);
}

#[test]
fn divergence_is_reported() {
    let c = design(Strategy::Linear, ResetTuning::linear());
    let cfg = cfg(2.0);
    let r = vec![1e-4; cfg.samples()];
    match simulate_controller(&plant().scaled(-1.0), &c, &r, None, &cfg) {
        Err(crone_core::CroneError::Diverged { index, value }) => {
            assert!(index > 0 && value > 1e9);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn trajectory_discrete_derivatives_bounded() {
    let l = TrajectoryLimits::default();
    let dt = SAMPLE_TIME;
    let n = (1.0 / dt) as usize;
    let (r, _) = fourth_order_trajectory(l, 0.25, dt, n).unwrap();
    let bounds = [l.v_max, l.a_max, l.j_max, l.s_max];
    let mut d = r.clone();
    for (order, bound) in bounds.iter().enumerate() {
        d = d.windows(2).map(|w| w[1] - w[0]).collect();
        let h = dt.powi(order as i32 + 1);
        let worst = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        // differencing samples of size ~stroke costs up to 2^(order+1) ulps
        let roundoff = 2f64.powi(order as i32 + 2) * f64::EPSILON * l.stroke;
        assert!(
            worst <= bound * h * (1.0 + 1e-6) + roundoff,
            "order {} worst {} bound {}",
            order + 1,
            worst / h,
            bound
        );
    }
    let end = FourthOrderProfile::new(l).unwrap();
    let k_end = (end.duration() / dt).ceil() as usize + 1;
    assert!((r[k_end] - l.stroke).abs() < 1e-9);
}

fn tracking_rms(p: f64, dt: f64) -> f64 {
    let c = design(Strategy::LagReset, ResetTuning::new(0.5, p).unwrap());
    let cfg = SimConfig { dt, ..cfg(2.0) };
    let (r, acc) =
        fourth_order_trajectory(TrajectoryLimits::default(), 0.25, dt, cfg.samples()).unwrap();
    let tr = simulate_controller(&plant(), &c, &r, Some(&nominal_feedforward(&acc)), &cfg).unwrap();
    rms_error(&tr, 0.5)
}

#[test]
fn tracking_improves_with_reset() {
    let rms: Vec<f64> = [1.0, 0.75, 0.5, 0.25, 0.0]
        .iter()
        .map(|&p| tracking_rms(p, SAMPLE_TIME))
        .collect();
    eprintln!(
        "rms nm {:?}",
        rms.iter().map(|v| v * 1e9).collect::<Vec<_>>()
    );
    assert!(rms.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn halving_dt_changes_rms_little() {
    // delay must stay an integer number of samples: 25 us gives 10 samples
    let a = tracking_rms(0.5, SAMPLE_TIME);
    let b = tracking_rms(0.5, SAMPLE_TIME / 2.0);
    assert!((a - b).abs() < 0.02 * a, "{a} {b}");
}

#[test]
fn sine_noise_attenuated_by_reset() {
    let cfg = cfg(1.0);
    let lin = design(Strategy::LagReset, ResetTuning::new(0.5, 1.0).unwrap());
    let rst = design(Strategy::LagReset, ResetTuning::new(0.5, 0.0).unwrap());
    let a = sine_noise_power(&plant(), &lin, 1000.0, 2e-6, &cfg).unwrap();
    let b = sine_noise_power(&plant(), &rst, 1000.0, 2e-6, &cfg).unwrap();
    assert!(b < a, "{a} {b}");
}

#[test]
fn zero_controller_gives_zero_output() {
    let mut c = design(Strategy::Linear, ResetTuning::linear());
    c.sigma_nr.sections[0] = crone_core::lti::Section::Gain { k: 0.0 };
    let p = sine_noise_power(&plant(), &c, 500.0, 2e-6, &cfg(0.2)).unwrap();
    assert_eq!(p, f64::NEG_INFINITY);
}

#[test]
fn trace_csv_shape() {
    let c = design(Strategy::Linear, ResetTuning::linear());
    let cfg = cfg(0.001);
    let tr = simulate_controller(&plant(), &c, &vec![1e-4; cfg.samples()], None, &cfg).unwrap();
    let csv = tr.to_csv();
    assert!(csv.starts_with("t,r,e,u,y,n\n"));
    assert_eq!(csv.lines().count(), cfg.samples() + 1);
    assert!(!csv.contains('\r'));
}
