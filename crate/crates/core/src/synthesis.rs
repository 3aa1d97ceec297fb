//! First-generation CRONE synthesis and its reset variants.
//!
//! The linear controller is
//! `C(s) = C₀ (1 + ω_I/s)^{n_I} ((1 + s/ω_b)/(1 + s/ω_h))^ν / (1 + s/ω_F)^{n_F}`.
//! A reset strategy moves one first-order factor of `C` into a reset element
//! `Σ_r` (used through its `γ`/`p` combination `Σ*_r`) and lowers the
//! fractional order to `ν*` by the phase the reset element adds at `ω_cg`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CroneError, Result};
use crate::lti::{
    fractional_lag_lead, lag_lead_power_sections, Cascade, FrequencyResponse, RationalTf, Section,
};
use crate::reset::{convex_combination, make_fore, make_lag_reset, ResetStateSpace, ResetTuning};

/// Default number of Oustaloup cells.
pub const DEFAULT_CELLS: usize = 4;

const HZ: f64 = 2.0 * PI;

/// Design inputs. Frequencies in rad/s, phase margin in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CroneSpec {
    pub phase_margin_deg: f64,
    pub w_cg: f64,
    pub w_b: f64,
    pub w_h: f64,
    pub w_i: f64,
    pub w_f: f64,
    pub n_i: u32,
    pub n_f: u32,
}

impl CroneSpec {
    /// Builds a spec from frequencies in Hz.
    #[allow(clippy::too_many_arguments)]
    pub fn from_hz(
        phase_margin_deg: f64,
        f_cg: f64,
        f_b: f64,
        f_h: f64,
        f_i: f64,
        f_f: f64,
        n_i: u32,
        n_f: u32,
    ) -> Result<Self> {
        let s = Self {
            phase_margin_deg,
            w_cg: f_cg * HZ,
            w_b: f_b * HZ,
            w_h: f_h * HZ,
            w_i: f_i * HZ,
            w_f: f_f * HZ,
            n_i,
            n_f,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.phase_margin_deg;
        if !(m > 0.0 && m < 90.0) {
            return Err(invalid(
                "phase_margin",
                format!("must lie in (0, 90) degrees, got {m}"),
            ));
        }
        let chain = [
            ("w_i", self.w_i),
            ("w_b", self.w_b),
            ("w_cg", self.w_cg),
            ("w_h", self.w_h),
            ("w_f", self.w_f),
        ];
        for (name, v) in chain {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(
                    name,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        for pair in chain.windows(2) {
            if pair[0].1 >= pair[1].1 {
                return Err(invalid(
                    pair[1].0,
                    format!(
                        "need {} < {} ({} >= {})",
                        pair[0].0, pair[1].0, pair[0].1, pair[1].1
                    ),
                ));
            }
        }
        if self.n_i == 0 {
            return Err(invalid("n_i", "must be a positive integer"));
        }
        if self.n_f == 0 {
            return Err(invalid("n_f", "must be a positive integer"));
        }
        Ok(())
    }

    /// Phase swing of the unit-order lead at `ω_cg`: `atan(ω_cg/ω_b) - atan(ω_cg/ω_h)`.
    pub fn lead_phase(&self) -> f64 {
        (self.w_cg / self.w_b).atan() - (self.w_cg / self.w_h).atan()
    }

    /// Exact fractional controller (no approximation) with gain `c0`.
    pub fn exact_response(&self, nu: f64, c0: f64, omega: f64) -> Complex64 {
        let s = Complex64::new(0.0, omega);
        c0 * (1.0 + self.w_i / s).powi(self.n_i as i32)
            * fractional_lag_lead(self.w_b, self.w_h, nu, omega)
            / (1.0 + s / self.w_f).powi(self.n_f as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Linear,
    #[serde(alias = "int", alias = "integrator")]
    IntegratorReset,
    #[serde(alias = "fof")]
    FofReset,
    #[serde(alias = "lag")]
    LagReset,
}

impl Strategy {
    pub const RESET: [Strategy; 3] = [
        Strategy::IntegratorReset,
        Strategy::FofReset,
        Strategy::LagReset,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Linear => "linear",
            Strategy::IntegratorReset => "integrator_reset",
            Strategy::FofReset => "fof_reset",
            Strategy::LagReset => "lag_reset",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = CroneError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Strategy::Linear),
            "int" | "integrator" | "integrator_reset" => Ok(Strategy::IntegratorReset),
            "fof" | "fof_reset" => Ok(Strategy::FofReset),
            "lag" | "lag_reset" => Ok(Strategy::LagReset),
            other => Err(invalid(
                "strategy",
                format!("unknown strategy '{other}' (linear, integrator, fof, lag)"),
            )),
        }
    }
}

/// Fractional order placing the loop phase at `-π + M_Φ` at `ω_cg`, given
/// the (continuous, radians) plant phase there.
pub fn compute_nu(spec: &CroneSpec, plant_phase: f64) -> Result<f64> {
    let nu = raw_nu(spec, plant_phase)?;
    if !(0.0..=1.0).contains(&nu) {
        return Err(CroneError::NuOutOfRange { nu });
    }
    Ok(nu)
}

fn raw_nu(spec: &CroneSpec, plant_phase: f64) -> Result<f64> {
    spec.validate()?;
    if !plant_phase.is_finite() {
        return Err(invalid("plant_phase", "must be finite"));
    }
    if plant_phase < -PI - 1e-9 {
        return Err(CroneError::PlantPhaseBelowLimit {
            phase_deg: plant_phase.to_degrees(),
        });
    }
    let w = spec.w_cg;
    let num = -PI + spec.phase_margin_deg.to_radians() - plant_phase
        + spec.n_f as f64 * (w / spec.w_f).atan()
        + spec.n_i as f64 * (FRAC_PI_2 - (w / spec.w_i).atan());
    Ok(num / spec.lead_phase())
}

/// Reduced order `ν* = ν - Φ_r / (atan(ω_cg/ω_b) - atan(ω_cg/ω_h))`.
pub fn compute_nu_star(spec: &CroneSpec, plant_phase: f64, phi_r_deg: f64) -> Result<f64> {
    if !(phi_r_deg.is_finite() && phi_r_deg >= 0.0) {
        return Err(invalid(
            "phi_r",
            format!("must be non-negative, got {phi_r_deg}"),
        ));
    }
    let nu = compute_nu(spec, plant_phase)?;
    let nu_star = nu - phi_r_deg.to_radians() / spec.lead_phase();
    if nu_star < 0.0 {
        return Err(CroneError::NuStarNegative { nu_star, phi_r_deg });
    }
    Ok(nu_star)
}

/// Gain that puts the loop through 0 dB at `ω_cg`.
pub fn compute_gain(unscaled_loop_at_wcg: Complex64) -> Result<f64> {
    let m = unscaled_loop_at_wcg.norm();
    if !(m.is_finite() && m > 0.0) {
        return Err(CroneError::InvalidModel(format!(
            "loop magnitude at w_cg is {m}"
        )));
    }
    Ok(1.0 / m)
}

/// Reset element of a strategy, before the `γ`/`p` combination.
pub fn reset_base(spec: &CroneSpec, strategy: Strategy) -> Result<Option<ResetStateSpace>> {
    Ok(match strategy {
        Strategy::Linear => None,
        Strategy::IntegratorReset => Some(ResetStateSpace::new(
            DMatrix::zeros(1, 1),
            DVector::from_element(1, spec.w_i),
            RowDVector::from_element(1, 1.0),
            0.0,
            DMatrix::zeros(1, 1),
        )?),
        Strategy::FofReset => Some(make_fore(spec.w_b)?),
        Strategy::LagReset => Some(make_lag_reset(spec.w_b, spec.w_h)?),
    })
}

/// Phase added by `Σ*_r` at `ω`, degrees: `∠DF(Σ*_r) - ∠base(Σ_r)`.
pub fn reset_phase(base: &ResetStateSpace, tuning: ResetTuning, omega: f64) -> Result<f64> {
    let star = convex_combination(base, tuning)?;
    Ok((star.describing_function(omega)? / base.base().eval(omega))
        .arg()
        .to_degrees())
}

/// Non-reset sections (unit gain) for a strategy at fractional order `nu`.
/// Improper leftovers of the split (`1 + s/ω_I`, `1 + s/ω_b`) take one of
/// the low-pass poles.
pub fn split_strategy(
    spec: &CroneSpec,
    nu: f64,
    strategy: Strategy,
    cells: usize,
) -> Result<Vec<Section>> {
    spec.validate()?;
    let pi = |n: u32| (0..n).map(|_| Section::PiIntegrator { corner: spec.w_i });
    let lp = |n: u32| (0..n).map(|_| Section::LowPass { corner: spec.w_f });
    let lead = |e: f64| lag_lead_power_sections(spec.w_b, spec.w_h, e, cells);
    let mut out = Vec::new();
    match strategy {
        Strategy::Linear => {
            out.extend(pi(spec.n_i));
            out.extend(lead(nu)?);
            out.extend(lp(spec.n_f));
        }
        Strategy::LagReset => {
            out.extend(pi(spec.n_i));
            out.extend(lead(nu + 1.0)?);
            out.extend(lp(spec.n_f));
        }
        Strategy::FofReset => {
            out.extend(pi(spec.n_i));
            out.push(Section::LeadLag {
                zero: spec.w_b,
                pole: spec.w_f,
            });
            out.extend(lead(nu)?);
            out.extend(lp(spec.n_f - 1));
        }
        Strategy::IntegratorReset => {
            out.extend(pi(spec.n_i - 1));
            out.push(Section::LeadLag {
                zero: spec.w_i,
                pole: spec.w_f,
            });
            out.extend(lead(nu)?);
            out.extend(lp(spec.n_f - 1));
        }
    }
    Ok(out)
}

/// A synthesized design.
#[derive(Debug, Clone)]
pub struct CroneController {
    pub spec: CroneSpec,
    pub strategy: Strategy,
    pub tuning: ResetTuning,
    pub cells: usize,
    /// Order from the plant phase alone.
    pub nu: f64,
    /// Order actually used (equals `nu` for the linear strategy).
    pub nu_star: f64,
    /// Reset phase advantage at `ω_cg`, degrees.
    pub phi_r_deg: f64,
    pub c0: f64,
    /// Non-reset part, gain `c0` first.
    pub sigma_nr: Cascade,
    /// Reset element before combination.
    pub sigma_r: Option<ResetStateSpace>,
    /// `γ`/`p` combination actually placed in the loop.
    pub sigma_r_star: Option<ResetStateSpace>,
}

/// Full synthesis against `plant` (its delay, if any, enters the design).
pub fn synthesize(
    spec: &CroneSpec,
    plant: &RationalTf,
    strategy: Strategy,
    tuning: ResetTuning,
    cells: usize,
) -> Result<CroneController> {
    spec.validate()?;
    tuning.validate()?;
    let plant_phase = plant.continuous_phase(spec.w_cg);
    let nu = compute_nu(spec, plant_phase)?;
    let sigma_r = reset_base(spec, strategy)?;
    let sigma_r_star = match &sigma_r {
        Some(b) => Some(convex_combination(b, tuning)?),
        None => None,
    };
    let phi_r_deg = match &sigma_r {
        Some(b) => reset_phase(b, tuning, spec.w_cg)?.max(0.0),
        None => 0.0,
    };
    let nu_star = compute_nu_star(spec, plant_phase, phi_r_deg)?;
    let mut sigma_nr = Cascade::new(split_strategy(spec, nu_star, strategy, cells)?);
    let reset = match &sigma_r_star {
        Some(s) => s.describing_function(spec.w_cg)?,
        None => Complex64::new(1.0, 0.0),
    };
    let c0 = compute_gain(plant.eval(spec.w_cg) * sigma_nr.eval(spec.w_cg) * reset)?;
    sigma_nr.sections.insert(0, Section::Gain { k: c0 });
    Ok(CroneController {
        spec: *spec,
        strategy,
        tuning,
        cells,
        nu,
        nu_star,
        phi_r_deg,
        c0,
        sigma_nr,
        sigma_r,
        sigma_r_star,
    })
}

impl CroneController {
    pub fn is_linear(&self) -> bool {
        self.sigma_r.is_none()
    }

    pub fn sigma_nr_tf(&self) -> RationalTf {
        self.sigma_nr.to_tf()
    }

    /// Describing function of `Σ*_r` (unity for the linear strategy).
    pub fn reset_df(&self, omega: f64) -> Result<Complex64> {
        match &self.sigma_r_star {
            Some(s) => s.describing_function(omega),
            None => Ok(Complex64::new(1.0, 0.0)),
        }
    }

    /// Base linear response of the reset part (unity for the linear strategy).
    pub fn reset_base_eval(&self, omega: f64) -> Complex64 {
        match &self.sigma_r {
            Some(s) => s.base().eval(omega),
            None => Complex64::new(1.0, 0.0),
        }
    }

    /// Controller DF: `Σ_nr · DF(Σ*_r)`.
    pub fn controller_df(&self, omega: f64) -> Result<Complex64> {
        Ok(self.sigma_nr.eval(omega) * self.reset_df(omega)?)
    }

    /// Controller with the reset law removed: `Σ_nr · base(Σ_r)`.
    pub fn controller_base(&self, omega: f64) -> Complex64 {
        self.sigma_nr.eval(omega) * self.reset_base_eval(omega)
    }

    pub fn open_loop_df(&self, plant: &RationalTf, grid: &[f64]) -> Result<FrequencyResponse> {
        let values = grid
            .iter()
            .map(|&w| Ok(plant.eval(w) * self.controller_df(w)?))
            .collect::<Result<Vec<_>>>()?;
        FrequencyResponse::new(grid.to_vec(), values)
    }

    pub fn open_loop_base(&self, plant: &RationalTf, grid: &[f64]) -> Result<FrequencyResponse> {
        FrequencyResponse::new(
            grid.to_vec(),
            grid.iter()
                .map(|&w| plant.eval(w) * self.controller_base(w))
                .collect(),
        )
    }
}

/// Free function form of [`CroneController::open_loop_df`].
pub fn open_loop_df(
    plant: &RationalTf,
    controller: &CroneController,
    grid: &[f64],
) -> Result<FrequencyResponse> {
    controller.open_loop_df(plant, grid)
}
