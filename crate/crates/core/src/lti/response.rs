use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Result};

/// Sampled complex response on a strictly increasing grid of angular
/// frequencies (rad/s).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyResponse {
    freqs: Vec<f64>,
    values: Vec<Complex64>,
}

impl FrequencyResponse {
    pub fn new(freqs: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if freqs.len() != values.len() {
            return Err(invalid("values", "length differs from frequency grid"));
        }
        validate_grid(&freqs)?;
        Ok(Self { freqs, values })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    /// True where the sample sits on a pole (infinite magnitude marker).
    pub fn is_flagged(&self, i: usize) -> bool {
        self.values[i].re.is_infinite()
    }

    pub fn magnitude_db(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|v| 20.0 * v.norm().log10())
            .collect()
    }

    /// Phase in degrees, unwrapped along the grid starting from the
    /// principal value of the first sample.
    pub fn phase_deg(&self) -> Vec<f64> {
        unwrap(self.values.iter().map(|v| v.arg()))
            .into_iter()
            .map(f64::to_degrees)
            .collect()
    }

    /// Pointwise product with a response on the same grid.
    pub fn product(&self, other: &FrequencyResponse) -> Result<FrequencyResponse> {
        if self.freqs != other.freqs {
            return Err(invalid("grid", "responses are sampled on different grids"));
        }
        Ok(FrequencyResponse {
            freqs: self.freqs.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }
}

pub(crate) fn validate_grid(freqs: &[f64]) -> Result<()> {
    if freqs.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(invalid("grid", "frequencies must be finite and positive"));
    }
    if freqs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("grid", "frequencies must be strictly increasing"));
    }
    Ok(())
}

pub fn unwrap(phases: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    let tau = std::f64::consts::TAU;
    for p in phases {
        match out.last() {
            None => out.push(p),
            Some(&prev) => {
                let mut q = p;
                while q - prev > std::f64::consts::PI {
                    q -= tau;
                }
                while q - prev < -std::f64::consts::PI {
                    q += tau;
                }
                out.push(q);
            }
        }
    }
    out
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn logspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..points)
                .map(|i| {
                    if i + 1 == points {
                        hi
                    } else {
                        10f64.powf(a + (b - a) * i as f64 / (points - 1) as f64)
                    }
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_grids() {
        assert!(validate_grid(&[1.0, 1.0]).is_err());
        assert!(validate_grid(&[0.0, 1.0]).is_err());
        assert!(validate_grid(&[2.0, 1.0]).is_err());
        assert!(validate_grid(&[1.0, 2.0]).is_ok());
    }

    #[test]
    fn unwrap_removes_jumps() {
        let u = unwrap([3.0, -3.0, 3.1]);
        assert!((u[1] - (-3.0 + std::f64::consts::TAU)).abs() < 1e-12);
        assert!((u[2] - 3.1).abs() < 1e-12);
    }

    #[test]
    fn logspace_endpoints() {
        let g = logspace(1.0, 1e4, 401);
        assert_eq!(g[0], 1.0);
        assert_eq!(g[400], 1e4);
        assert!((g[200] - 100.0).abs() < 1e-9);
    }
}
