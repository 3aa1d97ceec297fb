//! Sampled closed-loop simulation: ZOH plant with a transport-delay buffer,
//! bilinear controller blocks and sample-level reset detection.

mod trajectory;

pub use trajectory::{fourth_order_trajectory, FourthOrderProfile, TrajectoryLimits};

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CroneError, Result};
use crate::fixtures::PLANT_MASS;
use crate::linalg::expm;
use crate::lti::{tf_to_ss, RationalTf, StateSpace};
use crate::reset::ResetStateSpace;
use crate::synthesis::CroneController;

/// Discretization of a linear block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Discretization {
    /// Trapezoidal (bilinear) rule.
    #[default]
    Tustin,
    /// Zero-order hold on the input.
    Zoh,
}

/// Signal added at the noise entry point `n` (subtracted from the error).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    #[default]
    None,
    /// `amplitude · sin(2π f t)`, amplitude in metres.
    Sine { amplitude: f64, freq_hz: f64 },
    /// Gaussian white noise, seeded from [`SimConfig::seed`].
    White { rms: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub controller_method: Discretization,
    /// Only ZOH is accepted: the loop reads `y` one sample before it acts.
    pub plant_method: Discretization,
    pub noise: NoiseSpec,
    pub seed: u64,
    /// Apply resets. `false` runs the base linear loop.
    pub reset_enabled: bool,
    /// Initial plant state (controllable canonical coordinates); zero if absent.
    pub initial_plant_state: Option<Vec<f64>>,
    pub divergence_limit: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: crate::fixtures::SAMPLE_TIME,
            duration: 1.0,
            controller_method: Discretization::Tustin,
            plant_method: Discretization::Zoh,
            noise: NoiseSpec::None,
            seed: 0,
            reset_enabled: true,
            initial_plant_state: None,
            divergence_limit: 1e9,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(invalid("dt", "must be positive"));
        }
        if !(self.duration.is_finite() && self.duration >= self.dt) {
            return Err(invalid("duration", "must be at least one sample"));
        }
        if self.plant_method != Discretization::Zoh {
            return Err(invalid(
                "plant_method",
                "only zoh is supported for the plant",
            ));
        }
        if !(self.divergence_limit > 0.0) {
            return Err(invalid("divergence_limit", "must be positive"));
        }
        match self.noise {
            NoiseSpec::None => {}
            NoiseSpec::Sine { amplitude, freq_hz } => {
                if !amplitude.is_finite() {
                    return Err(invalid("noise.amplitude", "must be finite"));
                }
                if !(freq_hz > 0.0 && freq_hz < 0.5 / self.dt) {
                    return Err(invalid("noise.freq_hz", "must lie in (0, Nyquist)"));
                }
            }
            NoiseSpec::White { rms } => {
                if !(rms.is_finite() && rms >= 0.0) {
                    return Err(invalid("noise.rms", "must be non-negative"));
                }
            }
        }
        Ok(())
    }

    /// Number of samples, `round(duration / dt)`.
    pub fn samples(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn time(&self) -> Vec<f64> {
        (0..self.samples()).map(|k| k as f64 * self.dt).collect()
    }

    pub fn noise_signal(&self) -> Vec<f64> {
        let n = self.samples();
        match self.noise {
            NoiseSpec::None => vec![0.0; n],
            NoiseSpec::Sine { amplitude, freq_hz } => (0..n)
                .map(|k| amplitude * (2.0 * PI * freq_hz * k as f64 * self.dt).sin())
                .collect(),
            NoiseSpec::White { rms } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let dist = Normal::new(0.0, rms).expect("rms validated");
                (0..n).map(|_| dist.sample(&mut rng)).collect()
            }
        }
    }

    /// Delay in whole samples.
    pub fn delay_samples(&self, delay: f64) -> Result<usize> {
        let ratio = delay / self.dt;
        let k = ratio.round();
        if (ratio - k).abs() > 1e-9 * ratio.abs().max(1.0) {
            return Err(CroneError::FractionalDelay { delay, dt: self.dt });
        }
        Ok(k as usize)
    }
}

/// Sampled loop signals.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTrace {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub e: Vec<f64>,
    pub u: Vec<f64>,
    pub y: Vec<f64>,
    pub n: Vec<f64>,
    pub reset_times: Vec<f64>,
}

impl SimTrace {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,r,e,u,y,n\n");
        for k in 0..self.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{}",
                csv_num(self.t[k]),
                csv_num(self.r[k]),
                csv_num(self.e[k]),
                csv_num(self.u[k]),
                csv_num(self.y[k]),
                csv_num(self.n[k])
            );
        }
        s
    }

    pub fn resets_csv(&self) -> String {
        let mut s = String::from("t\n");
        for t in &self.reset_times {
            let _ = writeln!(s, "{}", csv_num(*t));
        }
        s
    }
}

/// Nine significant digits, dot decimal.
pub fn csv_num(v: f64) -> String {
    format!("{v:.8e}")
}

/// A linear block stepped one sample at a time.
#[derive(Debug, Clone)]
pub struct DiscreteBlock {
    phi: DMatrix<f64>,
    gamma: DVector<f64>,
    c: RowDVector<f64>,
    d: f64,
    method: Discretization,
    x: DVector<f64>,
    tmp: DVector<f64>,
    u_prev: f64,
}

impl DiscreteBlock {
    pub fn new(ss: &StateSpace, dt: f64, method: Discretization) -> Result<Self> {
        let n = ss.order();
        let (phi, gamma) = match method {
            Discretization::Tustin => {
                let alpha = dt / 2.0;
                let id = DMatrix::<f64>::identity(n, n);
                let m = (&id - &ss.a * alpha)
                    .try_inverse()
                    .ok_or(CroneError::SingularMatrix {
                        matrix: "I - dt/2 A",
                        omega: 0.0,
                    })?;
                (&m * (&id + &ss.a * alpha), &m * &ss.b * alpha)
            }
            Discretization::Zoh => zoh(&ss.a, &ss.b, dt),
        };
        Ok(Self {
            phi,
            gamma,
            c: ss.c.clone(),
            d: ss.d,
            method,
            x: DVector::zeros(n),
            tmp: DVector::zeros(n),
            u_prev: 0.0,
        })
    }

    pub fn state(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn state_mut(&mut self) -> &mut DVector<f64> {
        &mut self.x
    }

    /// Consumes `u[k]`, returns `y[k]`.
    pub fn step(&mut self, u: f64) -> f64 {
        match self.method {
            Discretization::Tustin => {
                self.tmp.gemv(1.0, &self.phi, &self.x, 0.0);
                self.tmp.axpy(u + self.u_prev, &self.gamma, 1.0);
                std::mem::swap(&mut self.x, &mut self.tmp);
                self.u_prev = u;
                self.c.dot(&self.x.transpose()) + self.d * u
            }
            Discretization::Zoh => {
                let y = self.c.dot(&self.x.transpose()) + self.d * u;
                self.tmp.gemv(1.0, &self.phi, &self.x, 0.0);
                self.tmp.axpy(u, &self.gamma, 1.0);
                std::mem::swap(&mut self.x, &mut self.tmp);
                y
            }
        }
    }

    /// `H(e^{jωdt})` of the sampled block.
    pub fn eval(&self, omega: f64, dt: f64) -> Complex64 {
        let z = Complex64::from_polar(1.0, omega * dt);
        let n = self.x.len();
        if n == 0 {
            return Complex64::new(self.d, 0.0);
        }
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let diag = if i == j { z } else { Complex64::new(0.0, 0.0) };
            diag - self.phi[(i, j)]
        });
        let g = match self.method {
            Discretization::Tustin => self.gamma.map(|v| Complex64::new(v, 0.0) * (z + 1.0)),
            Discretization::Zoh => self.gamma.map(|v| Complex64::new(v, 0.0)),
        };
        let Some(x) = m.lu().solve(&g) else {
            return Complex64::new(f64::INFINITY, 0.0);
        };
        // x[k] = Φ x[k-1] + Γ(u[k] + u[k-1]) gives (zI − Φ) x = Γ (z + 1) u
        let cx: Complex64 = self.c.iter().zip(x.iter()).map(|(c, x)| x * *c).sum();
        cx + self.d
    }
}

fn zoh(a: &DMatrix<f64>, b: &DVector<f64>, dt: f64) -> (DMatrix<f64>, DVector<f64>) {
    let n = a.nrows();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, 1)).copy_from(b);
    let e = expm(&(m * dt));
    (
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, 1)).column(0).into_owned(),
    )
}

/// A reset element stepped with bilinear base dynamics. The state jumps to
/// `A_ρ x` at samples where the input changes sign or equals zero.
#[derive(Debug, Clone)]
pub struct DiscreteReset {
    block: DiscreteBlock,
    a_rho: DMatrix<f64>,
    enabled: bool,
    e_prev: Option<f64>,
    tmp: DVector<f64>,
}

impl DiscreteReset {
    pub fn new(
        sys: &ResetStateSpace,
        dt: f64,
        method: Discretization,
        enabled: bool,
    ) -> Result<Self> {
        Ok(Self {
            block: DiscreteBlock::new(&sys.base(), dt, method)?,
            a_rho: sys.a_rho.clone(),
            enabled: enabled && !sys.is_linear(),
            e_prev: None,
            tmp: DVector::zeros(sys.order()),
        })
    }

    /// Returns the output and whether a reset fired at this sample.
    pub fn step(&mut self, e: f64) -> (f64, bool) {
        let b = &mut self.block;
        let mut fired = false;
        match b.method {
            Discretization::Tustin => {
                b.tmp.gemv(1.0, &b.phi, &b.x, 0.0);
                b.tmp.axpy(e + b.u_prev, &b.gamma, 1.0);
                std::mem::swap(&mut b.x, &mut b.tmp);
                b.u_prev = e;
            }
            Discretization::Zoh => {}
        }
        if let Some(prev) = self.e_prev {
            if self.enabled && (e * prev < 0.0 || e == 0.0) {
                self.tmp.gemv(1.0, &self.a_rho, &b.x, 0.0);
                std::mem::swap(&mut b.x, &mut self.tmp);
                fired = true;
            }
        }
        self.e_prev = Some(e);
        let y = b.c.dot(&b.x.transpose()) + b.d * e;
        if b.method == Discretization::Zoh {
            b.tmp.gemv(1.0, &b.phi, &b.x, 0.0);
            b.tmp.axpy(e, &b.gamma, 1.0);
            std::mem::swap(&mut b.x, &mut b.tmp);
        }
        (y, fired)
    }
}

/// Reset element driven in open loop by `input`. Returns the output and the
/// reset instants.
pub fn simulate_reset_open_loop(
    sys: &ResetStateSpace,
    input: &[f64],
    dt: f64,
    method: Discretization,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut block = DiscreteReset::new(sys, dt, method, true)?;
    let mut out = Vec::with_capacity(input.len());
    let mut resets = Vec::new();
    for (k, &e) in input.iter().enumerate() {
        let (y, fired) = block.step(e);
        if fired {
            resets.push(k as f64 * dt);
        }
        out.push(y);
    }
    Ok((out, resets))
}

fn plant_block(plant: &RationalTf, cfg: &SimConfig) -> Result<(DiscreteBlock, usize)> {
    let ss = tf_to_ss(&plant.without_delay())?;
    if ss.d != 0.0 {
        return Err(CroneError::InvalidModel(
            "plant must be strictly proper".into(),
        ));
    }
    let mut block = DiscreteBlock::new(&ss, cfg.dt, Discretization::Zoh)?;
    if let Some(x0) = &cfg.initial_plant_state {
        if x0.len() != ss.order() {
            return Err(CroneError::Dimension(format!(
                "initial plant state has {} entries, plant order is {}",
                x0.len(),
                ss.order()
            )));
        }
        block.x.copy_from_slice(x0);
    }
    Ok((block, cfg.delay_samples(plant.delay())?))
}

/// Closed loop `r → e → Σ*_r → Σ_nr → (+ff) → delay → plant → y`, with
/// `e = r − y − n` read from the plant output before the plant is updated.
pub fn simulate_closed_loop(
    plant: &RationalTf,
    sigma_nr: &StateSpace,
    sigma_r_star: Option<&ResetStateSpace>,
    reference: &[f64],
    ff: Option<&[f64]>,
    cfg: &SimConfig,
) -> Result<SimTrace> {
    cfg.validate()?;
    run_loop(
        plant,
        sigma_nr,
        sigma_r_star,
        reference,
        ff,
        cfg.noise_signal(),
        cfg,
    )
}

/// [`simulate_closed_loop`] with an explicit noise signal at `n`;
/// `cfg.noise` is ignored.
pub fn simulate_closed_loop_with_noise(
    plant: &RationalTf,
    sigma_nr: &StateSpace,
    sigma_r_star: Option<&ResetStateSpace>,
    reference: &[f64],
    ff: Option<&[f64]>,
    noise: &[f64],
    cfg: &SimConfig,
) -> Result<SimTrace> {
    cfg.validate()?;
    if noise.len() != cfg.samples() {
        return Err(CroneError::Dimension(format!(
            "noise has {} samples, config needs {}",
            noise.len(),
            cfg.samples()
        )));
    }
    run_loop(
        plant,
        sigma_nr,
        sigma_r_star,
        reference,
        ff,
        noise.to_vec(),
        cfg,
    )
}

fn run_loop(
    plant: &RationalTf,
    sigma_nr: &StateSpace,
    sigma_r_star: Option<&ResetStateSpace>,
    reference: &[f64],
    ff: Option<&[f64]>,
    noise: Vec<f64>,
    cfg: &SimConfig,
) -> Result<SimTrace> {
    let n = cfg.samples();
    if reference.len() != n {
        return Err(CroneError::Dimension(format!(
            "reference has {} samples, config needs {n}",
            reference.len()
        )));
    }
    if let Some(f) = ff {
        if f.len() != n {
            return Err(CroneError::Dimension(format!(
                "feedforward has {} samples, config needs {n}",
                f.len()
            )));
        }
    }
    let (mut plant, delay) = plant_block(plant, cfg)?;
    let mut nr = DiscreteBlock::new(sigma_nr, cfg.dt, cfg.controller_method)?;
    let mut rs = match sigma_r_star {
        Some(s) => Some(DiscreteReset::new(
            s,
            cfg.dt,
            cfg.controller_method,
            cfg.reset_enabled,
        )?),
        None => None,
    };
    let mut buf: VecDeque<f64> = std::iter::repeat_n(0.0, delay).collect();

    let mut tr = SimTrace {
        t: cfg.time(),
        r: reference.to_vec(),
        e: Vec::with_capacity(n),
        u: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        n: noise,
        reset_times: Vec::new(),
    };
    for k in 0..n {
        let y = plant.c.dot(&plant.x.transpose());
        if !(y.abs() <= cfg.divergence_limit) {
            return Err(CroneError::Diverged {
                index: k,
                value: y.abs(),
            });
        }
        let e = reference[k] - y - tr.n[k];
        let ur = match rs.as_mut() {
            Some(block) => {
                let (out, fired) = block.step(e);
                if fired {
                    tr.reset_times.push(tr.t[k]);
                }
                out
            }
            None => e,
        };
        let u = nr.step(ur) + ff.map_or(0.0, |f| f[k]);
        buf.push_back(u);
        let applied = buf.pop_front().unwrap_or(u);
        plant.step(applied);
        tr.e.push(e);
        tr.u.push(u);
        tr.y.push(y);
    }
    Ok(tr)
}

/// [`simulate_closed_loop`] for a synthesized controller.
pub fn simulate_controller(
    plant: &RationalTf,
    controller: &CroneController,
    reference: &[f64],
    ff: Option<&[f64]>,
    cfg: &SimConfig,
) -> Result<SimTrace> {
    simulate_closed_loop(
        plant,
        &controller.sigma_nr.to_ss(),
        controller.sigma_r_star.as_ref(),
        reference,
        ff,
        cfg,
    )
}

/// Second-order feedforward `u_ff = (m / k) · a` for the stage plant.
pub fn mass_feedforward(acceleration: &[f64], mass: f64, gain: f64) -> Vec<f64> {
    acceleration.iter().map(|a| mass / gain * a).collect()
}

/// Feedforward with the nominal stage constants.
pub fn nominal_feedforward(acceleration: &[f64]) -> Vec<f64> {
    mass_feedforward(acceleration, PLANT_MASS, crate::fixtures::PLANT_GAIN)
}

/// RMS of `e` over `t ≥ settle`.
pub fn rms_error(trace: &SimTrace, settle: f64) -> f64 {
    let tail: Vec<f64> = trace
        .t
        .iter()
        .zip(&trace.e)
        .filter(|(t, _)| **t >= settle)
        .map(|(_, e)| *e)
        .collect();
    if tail.is_empty() {
        return 0.0;
    }
    (tail.iter().map(|e| e * e).sum::<f64>() / tail.len() as f64).sqrt()
}

/// Mean square of `y` over the largest whole number of noise periods in the
/// second half of the trace, in dB re 1 m². Zero power maps to `-inf`.
pub fn output_power_db(trace: &SimTrace, freq_hz: f64, dt: f64) -> f64 {
    let n = trace.len();
    let per_period = 1.0 / (freq_hz * dt);
    let periods = ((n / 2) as f64 / per_period).floor().max(1.0);
    let count = ((periods * per_period).round() as usize).clamp(1, n);
    let tail = &trace.y[n - count..];
    let ms = tail.iter().map(|y| y * y).sum::<f64>() / count as f64;
    10.0 * ms.log10()
}

/// Output power (dB) of the loop under sine noise `amp·sin(2πft)` at `n`
/// with zero reference.
pub fn sine_noise_power(
    plant: &RationalTf,
    controller: &CroneController,
    freq_hz: f64,
    amp: f64,
    cfg: &SimConfig,
) -> Result<f64> {
    let cfg = SimConfig {
        noise: NoiseSpec::Sine {
            amplitude: amp,
            freq_hz,
        },
        ..cfg.clone()
    };
    cfg.validate()?;
    let r = vec![0.0; cfg.samples()];
    let tr = simulate_controller(plant, controller, &r, None, &cfg)?;
    Ok(output_power_db(&tr, freq_hz, cfg.dt))
}

/// Sampled open loop `C(e^{jωT}) P(e^{jωT}) z^{-d}` seen by the simulator with
/// the reset law disabled: bilinear controller, ZOH plant, delay buffer.
pub fn discrete_open_loop(
    plant: &RationalTf,
    sigma_nr: &StateSpace,
    sigma_r_star: Option<&ResetStateSpace>,
    cfg: &SimConfig,
    omega: f64,
) -> Result<Complex64> {
    let (p, delay) = plant_block(plant, cfg)?;
    let c = DiscreteBlock::new(sigma_nr, cfg.dt, cfg.controller_method)?;
    let r = match sigma_r_star {
        Some(s) => {
            DiscreteBlock::new(&s.base(), cfg.dt, cfg.controller_method)?.eval(omega, cfg.dt)
        }
        None => Complex64::new(1.0, 0.0),
    };
    let z_d = Complex64::from_polar(1.0, -omega * cfg.dt * delay as f64);
    Ok(c.eval(omega, cfg.dt) * r * p.eval(omega, cfg.dt) * z_d)
}
