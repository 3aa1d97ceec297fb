//! Swept-sine identification of the sensitivity `S` and complementary
//! sensitivity `T` of a simulated loop, and the pointwise open-loop estimate
//! `T/S`.
//!
//! The sweep is injected at the noise entry `n`. `S` is the transfer from `n`
//! to `y + n`, `T` the transfer from `−n` to `y`. Both are Welch H1 estimates
//! (Hann window, configurable segment length and overlap). For reset loops
//! they are best-linear-approximation estimates.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CroneError, Result};
use crate::lti::{RationalTf, StateSpace};
use crate::reset::ResetStateSpace;
use crate::sim::{
    csv_num, discrete_open_loop, simulate_closed_loop_with_noise, SimConfig, SimTrace,
};
use crate::synthesis::CroneController;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub f_start: f64,
    pub f_end: f64,
    /// Sweep length, seconds.
    pub duration: f64,
    /// Chirp amplitude, metres.
    pub amplitude: f64,
    /// Welch segment length, seconds.
    pub segment: f64,
    /// Segment overlap fraction in `[0, 1)`.
    pub overlap: f64,
    /// Bins below this coherence are masked in the open-loop estimate.
    pub coherence_threshold: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            f_start: 1.0,
            f_end: 2500.0,
            duration: 20.0,
            amplitude: 1e-6,
            segment: 2.0,
            overlap: 0.75,
            coherence_threshold: 0.9,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self, dt: f64) -> Result<()> {
        if !(self.f_start > 0.0 && self.f_start < self.f_end) {
            return Err(invalid("f_start", "need 0 < f_start < f_end"));
        }
        if !(self.f_end < 0.5 / dt) {
            return Err(invalid(
                "f_end",
                format!("must be below Nyquist ({} Hz)", 0.5 / dt),
            ));
        }
        if !(self.segment > 0.0 && self.segment <= self.duration) {
            return Err(invalid("segment", "need 0 < segment <= duration"));
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(invalid("amplitude", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.overlap) {
            return Err(invalid("overlap", "must lie in [0, 1)"));
        }
        if !(0.0..=1.0).contains(&self.coherence_threshold) {
            return Err(invalid("coherence_threshold", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Exponential (logarithmic) chirp from `f_start` to `f_end` over `duration`.
pub fn log_chirp(cfg: &SweepConfig, dt: f64, samples: usize) -> Vec<f64> {
    let k = (cfg.f_end / cfg.f_start).ln() / cfg.duration;
    (0..samples)
        .map(|i| {
            let t = i as f64 * dt;
            cfg.amplitude * (2.0 * PI * cfg.f_start * ((k * t).exp() - 1.0) / k).sin()
        })
        .collect()
}

/// A loop that can be driven at its noise entry.
pub trait LoopSimulator {
    fn sim_config(&self) -> &SimConfig;
    fn run(&self, noise: &[f64]) -> Result<SimTrace>;
}

/// Plant plus controller blocks, simulated with [`crate::sim`].
#[derive(Debug, Clone)]
pub struct SimulatedLoop {
    pub plant: RationalTf,
    pub sigma_nr: StateSpace,
    pub sigma_r_star: Option<ResetStateSpace>,
    pub cfg: SimConfig,
}

impl SimulatedLoop {
    pub fn new(plant: &RationalTf, controller: &CroneController, cfg: SimConfig) -> Self {
        Self {
            plant: plant.clone(),
            sigma_nr: controller.sigma_nr.to_ss(),
            sigma_r_star: controller.sigma_r_star.clone(),
            cfg,
        }
    }

    /// Sampled open loop with the reset law removed, the oracle for the
    /// linear configuration.
    pub fn discrete_open_loop(&self, omega: f64) -> Result<Complex64> {
        discrete_open_loop(
            &self.plant,
            &self.sigma_nr,
            self.sigma_r_star.as_ref(),
            &self.cfg,
            omega,
        )
    }
}

impl LoopSimulator for SimulatedLoop {
    fn sim_config(&self) -> &SimConfig {
        &self.cfg
    }

    fn run(&self, noise: &[f64]) -> Result<SimTrace> {
        let zero = vec![0.0; noise.len()];
        simulate_closed_loop_with_noise(
            &self.plant,
            &self.sigma_nr,
            self.sigma_r_star.as_ref(),
            &zero,
            None,
            noise,
            &self.cfg,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentifiedResponse {
    pub freqs: Vec<f64>,
    pub s_hat: Vec<Complex64>,
    pub t_hat: Vec<Complex64>,
    /// Raw `T/S` at every bin; see [`open_loop_estimate`] for the masked form.
    pub l_hat: Vec<Complex64>,
    /// Smaller of the `S` and `T` coherences per bin.
    pub coherence: Vec<f64>,
}

impl IdentifiedResponse {
    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("freq_hz,s_re,s_im,t_re,t_im,l_re,l_im,coherence\n");
        for i in 0..self.len() {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{}",
                csv_num(self.freqs[i]),
                csv_num(self.s_hat[i].re),
                csv_num(self.s_hat[i].im),
                csv_num(self.t_hat[i].re),
                csv_num(self.t_hat[i].im),
                csv_num(self.l_hat[i].re),
                csv_num(self.l_hat[i].im),
                csv_num(self.coherence[i])
            );
        }
        s
    }
}

/// Welch cross-spectral estimate: `(H1, coherence)` per bin of a segment of
/// `seg` samples.
pub fn welch_h1(
    x: &[f64],
    y: &[f64],
    seg: usize,
    overlap: f64,
) -> Result<(Vec<Complex64>, Vec<f64>)> {
    if x.len() != y.len() || seg < 2 || seg > x.len() {
        return Err(CroneError::Dimension(format!(
            "welch: input {}, output {}, segment {seg}",
            x.len(),
            y.len()
        )));
    }
    let hop = ((seg as f64 * (1.0 - overlap)).round() as usize).max(1);
    let window: Vec<f64> = (0..seg)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / seg as f64).cos())
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(seg);
    let bins = seg / 2 + 1;
    let mut pxx = vec![0.0; bins];
    let mut pyy = vec![0.0; bins];
    let mut pxy = vec![Complex64::new(0.0, 0.0); bins];
    let mut bx = vec![Complex64::new(0.0, 0.0); seg];
    let mut by = vec![Complex64::new(0.0, 0.0); seg];
    let mut start = 0;
    while start + seg <= x.len() {
        for i in 0..seg {
            bx[i] = Complex64::new(x[start + i] * window[i], 0.0);
            by[i] = Complex64::new(y[start + i] * window[i], 0.0);
        }
        fft.process(&mut bx);
        fft.process(&mut by);
        for k in 0..bins {
            pxx[k] += bx[k].norm_sqr();
            pyy[k] += by[k].norm_sqr();
            pxy[k] += bx[k].conj() * by[k];
        }
        start += hop;
    }
    let h = (0..bins)
        .map(|k| {
            if pxx[k] > 0.0 {
                pxy[k] / pxx[k]
            } else {
                Complex64::new(f64::NAN, f64::NAN)
            }
        })
        .collect();
    let coh = (0..bins)
        .map(|k| {
            let d = pxx[k] * pyy[k];
            if d > 0.0 {
                (pxy[k].norm_sqr() / d).clamp(0.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    Ok((h, coh))
}

/// Drives the loop with a log chirp at `n` and estimates `S` and `T` on the
/// FFT bins inside `[f_start, f_end]`.
pub fn identify_s_t(sim: &impl LoopSimulator, cfg: &SweepConfig) -> Result<IdentifiedResponse> {
    let scfg = sim.sim_config();
    cfg.validate(scfg.dt)?;
    let samples = scfg.samples();
    let want = (cfg.duration / scfg.dt).round() as usize;
    if samples < want {
        return Err(invalid("duration", "simulation is shorter than the sweep"));
    }
    let noise = log_chirp(cfg, scfg.dt, samples);
    let tr = sim.run(&noise)?;
    let y_plus_n: Vec<f64> = tr.y.iter().zip(&tr.n).map(|(y, n)| y + n).collect();
    let minus_n: Vec<f64> = tr.n.iter().map(|n| -n).collect();
    let seg = (cfg.segment / scfg.dt).round() as usize;
    let (s, coh_s) = welch_h1(&tr.n, &y_plus_n, seg, cfg.overlap)?;
    let (t, coh_t) = welch_h1(&minus_n, &tr.y, seg, cfg.overlap)?;
    let df = 1.0 / (seg as f64 * scfg.dt);
    let mut out = IdentifiedResponse {
        freqs: vec![],
        s_hat: vec![],
        t_hat: vec![],
        l_hat: vec![],
        coherence: vec![],
    };
    for k in 0..s.len() {
        let f = k as f64 * df;
        if f < cfg.f_start || f > cfg.f_end {
            continue;
        }
        out.freqs.push(f);
        out.s_hat.push(s[k]);
        out.t_hat.push(t[k]);
        out.l_hat.push(t[k] / s[k]);
        out.coherence.push(coh_s[k].min(coh_t[k]));
    }
    Ok(out)
}

/// `T̂/Ŝ` with bins of coherence below `threshold` masked as `None`.
pub fn open_loop_estimate(idr: &IdentifiedResponse, threshold: f64) -> Vec<Option<Complex64>> {
    idr.t_hat
        .iter()
        .zip(&idr.s_hat)
        .zip(&idr.coherence)
        .map(|((t, s), c)| (*c >= threshold && s.norm() > 0.0).then(|| t / s))
        .collect()
}

/// Worst deviations of an identified response from an analytic open loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundTripReport {
    pub bins: usize,
    pub s_mag_db: f64,
    pub s_phase_deg: f64,
    pub t_mag_db: f64,
    pub t_phase_deg: f64,
    pub l_mag_db: f64,
    pub l_phase_deg: f64,
    /// `max |Ŝ + T̂ − 1|`.
    pub s_plus_t: f64,
}

impl RoundTripReport {
    pub fn passed(&self, mag_db: f64, phase_deg: f64, sum_tol: f64) -> bool {
        self.bins > 0
            && [self.s_mag_db, self.t_mag_db, self.l_mag_db]
                .iter()
                .all(|&e| e <= mag_db)
            && [self.s_phase_deg, self.t_phase_deg, self.l_phase_deg]
                .iter()
                .all(|&e| e <= phase_deg)
            && self.s_plus_t <= sum_tol
    }
}

fn mag_phase_err(a: Complex64, b: Complex64) -> (f64, f64) {
    let r = a / b;
    (20.0 * r.norm().log10().abs(), r.arg().abs().to_degrees())
}

/// Compares `idr` with `S = 1/(1+L)`, `T = L/(1+L)` on bins in
/// `[f_lo, f_hi]` Hz whose coherence exceeds `min_coherence`.
pub fn compare_with_open_loop(
    idr: &IdentifiedResponse,
    open_loop: impl Fn(f64) -> Result<Complex64>,
    f_lo: f64,
    f_hi: f64,
    min_coherence: f64,
) -> Result<RoundTripReport> {
    let mut rep = RoundTripReport {
        bins: 0,
        s_mag_db: 0.0,
        s_phase_deg: 0.0,
        t_mag_db: 0.0,
        t_phase_deg: 0.0,
        l_mag_db: 0.0,
        l_phase_deg: 0.0,
        s_plus_t: 0.0,
    };
    for i in 0..idr.len() {
        let f = idr.freqs[i];
        if f < f_lo || f > f_hi || idr.coherence[i] <= min_coherence {
            continue;
        }
        let l = open_loop(2.0 * PI * f)?;
        let s = 1.0 / (1.0 + l);
        let t = l * s;
        let upd = |m: &mut f64, p: &mut f64, (em, ep): (f64, f64)| {
            *m = m.max(em);
            *p = p.max(ep);
        };
        upd(
            &mut rep.s_mag_db,
            &mut rep.s_phase_deg,
            mag_phase_err(idr.s_hat[i], s),
        );
        upd(
            &mut rep.t_mag_db,
            &mut rep.t_phase_deg,
            mag_phase_err(idr.t_hat[i], t),
        );
        upd(
            &mut rep.l_mag_db,
            &mut rep.l_phase_deg,
            mag_phase_err(idr.l_hat[i], l),
        );
        rep.s_plus_t = rep.s_plus_t.max((idr.s_hat[i] + idr.t_hat[i] - 1.0).norm());
        rep.bins += 1;
    }
    Ok(rep)
}
