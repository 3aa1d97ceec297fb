use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::poly;
use super::response::{validate_grid, FrequencyResponse};
use crate::error::{invalid, CroneError, Result};

/// Rational transfer function `num(s)/den(s) · e^{-s·delay}`, coefficients in
/// descending powers of `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationalTf {
    num: Vec<f64>,
    den: Vec<f64>,
    delay: f64,
}

impl RationalTf {
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        Self::with_delay(num, den, 0.0)
    }

    pub fn with_delay(num: Vec<f64>, den: Vec<f64>, delay: f64) -> Result<Self> {
        if num.iter().chain(&den).any(|c| !c.is_finite()) {
            return Err(CroneError::InvalidModel("non-finite coefficient".into()));
        }
        let num = poly::trim(&num);
        let den = poly::trim(&den);
        if den.is_empty() || den[0] == 0.0 {
            return Err(CroneError::InvalidModel(
                "denominator must have a nonzero leading coefficient".into(),
            ));
        }
        if !(delay.is_finite() && delay >= 0.0) {
            return Err(invalid("delay", "must be finite and non-negative"));
        }
        Ok(Self { num, den, delay })
    }

    pub fn gain(k: f64) -> Self {
        Self {
            num: vec![k],
            den: vec![1.0],
            delay: 0.0,
        }
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn delay(&self) -> f64 {
        self.delay
    }

    pub fn order(&self) -> usize {
        self.den.len() - 1
    }

    pub fn is_proper(&self) -> bool {
        poly::degree(&self.num) <= poly::degree(&self.den)
    }

    /// Same rational part, delay removed.
    pub fn without_delay(&self) -> Self {
        Self {
            delay: 0.0,
            ..self.clone()
        }
    }

    /// Value at `s = jω`. A sample that lands on a pole returns an
    /// infinite-real marker instead of dividing by (nearly) zero.
    pub fn eval(&self, omega: f64) -> Complex64 {
        let s = Complex64::new(0.0, omega);
        let d = poly::eval(&self.den, s);
        if d.norm() <= 1e-14 * poly::abs_scale(&self.den, omega.abs()) {
            return Complex64::new(f64::INFINITY, 0.0);
        }
        let n = poly::eval(&self.num, s);
        n / d * Complex64::from_polar(1.0, -omega * self.delay)
    }

    pub fn freq_response(&self, grid: &[f64]) -> Result<FrequencyResponse> {
        validate_grid(grid)?;
        FrequencyResponse::new(grid.to_vec(), grid.iter().map(|&w| self.eval(w)).collect())
    }

    /// Phase in radians that is continuous in ω: leading-coefficient sign
    /// plus the per-root angles, minus the delay lag. Distinguishes -180°
    /// from +180° where a sampled value cannot.
    pub fn continuous_phase(&self, omega: f64) -> f64 {
        let s = Complex64::new(0.0, omega);
        let lead = self.num[0] / self.den[0];
        let mut phase = if lead < 0.0 {
            -std::f64::consts::PI
        } else {
            0.0
        };
        for z in poly::roots(&self.num) {
            phase += (s - z).arg();
        }
        for p in poly::roots(&self.den) {
            phase -= (s - p).arg();
        }
        phase - omega * self.delay
    }

    /// Cascade `self` then `other`: polynomial products, delays add. No
    /// pole/zero cancellation is attempted.
    pub fn series(&self, other: &RationalTf) -> RationalTf {
        RationalTf {
            num: poly::mul(&self.num, &other.num),
            den: poly::mul(&self.den, &other.den),
            delay: self.delay + other.delay,
        }
    }

    pub fn scaled(&self, k: f64) -> RationalTf {
        RationalTf {
            num: self.num.iter().map(|c| c * k).collect(),
            ..self.clone()
        }
    }
}
