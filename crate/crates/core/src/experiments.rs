//! Sweep drivers behind the reproduction pipeline. Each row is computed
//! independently and in parallel; results keep input order.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fixtures::{lorentz_plant, PlantReading};
use crate::lti::RationalTf;
use crate::reset::ResetTuning;
use crate::sim::{
    fourth_order_trajectory, nominal_feedforward, rms_error, simulate_controller, sine_noise_power,
    SimConfig, TrajectoryLimits,
};
use crate::synthesis::{synthesize, CroneSpec, Strategy};

/// Reported gain advantages at 1 kHz for full reset, dB.
pub const REFERENCE_GAIN_ADVANTAGE_DB: [(Strategy, f64); 3] = [
    (Strategy::IntegratorReset, 10.9),
    (Strategy::FofReset, 8.2),
    (Strategy::LagReset, 7.4),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainAdvantageRow {
    pub strategy: Strategy,
    pub linear_db: f64,
    pub reset_db: f64,
    /// `linear_db − reset_db`: how much lower the reset loop gain is.
    pub advantage_db: f64,
    pub reference_db: f64,
}

/// `|L_DF|` of the full-reset design (`γ = 0`, `p = 0`) against the linear
/// design at `freq_hz`, for the three reset strategies.
pub fn gain_advantage_table(
    spec: &CroneSpec,
    plant: &RationalTf,
    freq_hz: f64,
    cells: usize,
) -> Result<Vec<GainAdvantageRow>> {
    let w = 2.0 * PI * freq_hz;
    let linear = synthesize(spec, plant, Strategy::Linear, ResetTuning::linear(), cells)?;
    let linear_db = 20.0 * (plant.eval(w) * linear.controller_df(w)?).norm().log10();
    REFERENCE_GAIN_ADVANTAGE_DB
        .par_iter()
        .map(|&(strategy, reference_db)| {
            let c = synthesize(spec, plant, strategy, ResetTuning::new(0.0, 0.0)?, cells)?;
            let reset_db = 20.0 * (plant.eval(w) * c.controller_df(w)?).norm().log10();
            Ok(GainAdvantageRow {
                strategy,
                linear_db,
                reset_db,
                advantage_db: linear_db - reset_db,
                reference_db,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DesignIdentityRow {
    pub strategy: Strategy,
    pub gamma: f64,
    pub p: f64,
    pub nu_star: f64,
    pub magnitude: f64,
    pub phase_deg: f64,
}

impl DesignIdentityRow {
    /// `|L| = 1 ± mag_tol`, `∠L = −180° + M_Φ ± phase_tol`.
    pub fn holds(&self, phase_margin_deg: f64, mag_tol: f64, phase_tol: f64) -> bool {
        (self.magnitude - 1.0).abs() <= mag_tol
            && (self.phase_deg - (phase_margin_deg - 180.0)).abs() <= phase_tol
    }
}

/// `L_DF(jω_cg)` for every strategy × `p` × `γ` combination.
pub fn design_identity_sweep(
    spec: &CroneSpec,
    plant: &RationalTf,
    strategies: &[Strategy],
    ps: &[f64],
    gammas: &[f64],
    cells: usize,
) -> Result<Vec<DesignIdentityRow>> {
    let mut jobs = Vec::new();
    for &s in strategies {
        for &p in ps {
            for &g in gammas {
                jobs.push((s, g, p));
            }
        }
    }
    jobs.par_iter()
        .map(|&(strategy, gamma, p)| {
            let c = synthesize(spec, plant, strategy, ResetTuning::new(gamma, p)?, cells)?;
            let l = plant.eval(spec.w_cg) * c.controller_df(spec.w_cg)?;
            let mut phase = l.arg().to_degrees();
            if phase > 0.0 {
                phase -= 360.0;
            }
            Ok(DesignIdentityRow {
                strategy,
                gamma,
                p,
                nu_star: c.nu_star,
                magnitude: l.norm(),
                phase_deg: phase,
            })
        })
        .collect()
}

/// Shared settings for the time-domain experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimeDomainSetup {
    pub spec: CroneSpec,
    /// Plant with its transport delay; synthesis uses the delay-free part.
    pub plant: RationalTf,
    pub strategy: Strategy,
    pub gamma: f64,
    pub cells: usize,
    pub sim: SimConfig,
    pub limits: TrajectoryLimits,
    /// Duration of one scan leg, seconds.
    pub period: f64,
    /// Start of the RMS window, seconds.
    pub settle: f64,
    /// Sine-noise amplitude, metres.
    pub noise_amplitude: f64,
    pub noise_duration: f64,
}

impl Default for TimeDomainSetup {
    fn default() -> Self {
        Self {
            spec: crate::fixtures::reference_spec(),
            plant: lorentz_plant(PlantReading::Damping, true),
            strategy: Strategy::LagReset,
            gamma: 0.5,
            cells: crate::synthesis::DEFAULT_CELLS,
            sim: SimConfig {
                duration: 2.0,
                ..SimConfig::default()
            },
            limits: TrajectoryLimits::default(),
            period: 0.25,
            settle: 0.5,
            noise_amplitude: 2e-6,
            noise_duration: 1.0,
        }
    }
}

impl TimeDomainSetup {
    /// Plant used for design (no delay).
    pub fn design_plant(&self) -> RationalTf {
        self.plant.without_delay()
    }

    /// Plant used in simulation (with the transport delay).
    pub fn sim_plant(&self) -> RationalTf {
        self.plant.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackingRow {
    pub p: f64,
    pub nu_star: f64,
    pub rms_nm: f64,
    pub resets: usize,
}

/// RMS tracking error of the triangular scan for each `p`.
pub fn tracking_table(setup: &TimeDomainSetup, ps: &[f64]) -> Result<Vec<TrackingRow>> {
    let cfg = &setup.sim;
    let (r, acc) = fourth_order_trajectory(setup.limits, setup.period, cfg.dt, cfg.samples())?;
    let ff = nominal_feedforward(&acc);
    ps.par_iter()
        .map(|&p| {
            let c = synthesize(
                &setup.spec,
                &setup.design_plant(),
                setup.strategy,
                ResetTuning::new(setup.gamma, p)?,
                setup.cells,
            )?;
            let tr = simulate_controller(&setup.sim_plant(), &c, &r, Some(&ff), cfg)?;
            Ok(TrackingRow {
                p,
                nu_star: c.nu_star,
                rms_nm: rms_error(&tr, setup.settle) * 1e9,
                resets: tr.reset_times.len(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseRow {
    pub freq_hz: f64,
    pub linear_db: f64,
    pub reset_db: f64,
    /// `linear_db − reset_db`; positive means the reset design attenuates more.
    pub reduction_db: f64,
}

/// Output power under sine noise for `p = 1` against `p_reset`.
pub fn noise_table(
    setup: &TimeDomainSetup,
    freqs_hz: &[f64],
    p_reset: f64,
) -> Result<Vec<NoiseRow>> {
    let design = |p: f64| {
        synthesize(
            &setup.spec,
            &setup.design_plant(),
            setup.strategy,
            ResetTuning::new(setup.gamma, p)?,
            setup.cells,
        )
    };
    let (lin, rst) = (design(1.0)?, design(p_reset)?);
    let cfg = SimConfig {
        duration: setup.noise_duration,
        ..setup.sim.clone()
    };
    let plant = setup.sim_plant();
    freqs_hz
        .par_iter()
        .map(|&f| {
            let linear_db = sine_noise_power(&plant, &lin, f, setup.noise_amplitude, &cfg)?;
            let reset_db = sine_noise_power(&plant, &rst, f, setup.noise_amplitude, &cfg)?;
            Ok(NoiseRow {
                freq_hz: f,
                linear_db,
                reset_db,
                reduction_db: linear_db - reset_db,
            })
        })
        .collect()
}

/// `300, 400, …, 1000` Hz.
pub fn noise_frequencies() -> Vec<f64> {
    (3..=10).map(|k| k as f64 * 100.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::reference_spec;

    #[test]
    fn identity_rows_in_input_order() {
        let plant = lorentz_plant(PlantReading::Damping, false);
        let rows = design_identity_sweep(
            &reference_spec(),
            &plant,
            &[Strategy::LagReset, Strategy::FofReset],
            &[0.0, 1.0],
            &[0.5],
            4,
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows[0].strategy, Strategy::LagReset);
        assert_eq!(rows[3].strategy, Strategy::FofReset);
        assert_eq!(rows[1].p, 1.0);
        assert!(rows.iter().all(|r| r.holds(55.0, 1e-6, 0.5)));
    }
}
