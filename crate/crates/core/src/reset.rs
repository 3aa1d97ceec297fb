//! Reset (impulsive) elements: base linear dynamics whose state is mapped
//! through `A_ρ` whenever the input error crosses zero.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, CroneError, Result};
use crate::linalg::expm;
use crate::lti::{FrequencyResponse, StateSpace};

/// `ẋ = A x + B e`, `u = C x + D e`, and `x⁺ = A_ρ x` at `e = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResetStateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
    pub a_rho: DMatrix<f64>,
}

/// Partial-reset factor `γ` and linear-branch weight `p` (`p_reset = 1 - p`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResetTuning {
    pub gamma: f64,
    pub p: f64,
}

impl ResetTuning {
    pub fn new(gamma: f64, p: f64) -> Result<Self> {
        let t = Self { gamma, p };
        t.validate()?;
        Ok(t)
    }

    pub fn linear() -> Self {
        Self { gamma: 1.0, p: 1.0 }
    }

    pub fn full_reset() -> Self {
        Self { gamma: 0.0, p: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("p", self.p)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    pub fn is_linear(&self) -> bool {
        self.gamma == 1.0 || self.p == 1.0
    }

    pub fn p_reset(&self) -> f64 {
        1.0 - self.p
    }
}

impl ResetStateSpace {
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        c: RowDVector<f64>,
        d: f64,
        a_rho: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n || c.len() != n || a_rho.shape() != (n, n) {
            return Err(CroneError::Dimension(format!(
                "reset system: A {:?}, B {}, C {}, A_rho {:?}",
                a.shape(),
                b.len(),
                c.len(),
                a_rho.shape()
            )));
        }
        let finite = a
            .iter()
            .chain(b.iter())
            .chain(c.iter())
            .chain(a_rho.iter())
            .all(|v| v.is_finite());
        if !finite || !d.is_finite() {
            return Err(CroneError::InvalidModel(
                "non-finite reset-system entry".into(),
            ));
        }
        Ok(Self { a, b, c, d, a_rho })
    }

    fn scalar(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self {
            a: DMatrix::from_element(1, 1, a),
            b: DVector::from_element(1, b),
            c: RowDVector::from_element(1, c),
            d,
            a_rho: DMatrix::zeros(1, 1),
        }
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// Stateless pass-through `u = k e`.
    pub fn gain(k: f64) -> Self {
        Self {
            a: DMatrix::zeros(0, 0),
            b: DVector::zeros(0),
            c: RowDVector::zeros(0),
            d: k,
            a_rho: DMatrix::zeros(0, 0),
        }
    }

    /// Indices of states actually changed by a reset (rows of `A_ρ` that are
    /// not rows of the identity).
    pub fn reset_indices(&self) -> Vec<usize> {
        let n = self.order();
        (0..n)
            .filter(|&i| (0..n).any(|j| self.a_rho[(i, j)] != if i == j { 1.0 } else { 0.0 }))
            .collect()
    }

    pub fn is_linear(&self) -> bool {
        self.reset_indices().is_empty()
    }

    /// Base linear system (reset law ignored).
    pub fn base(&self) -> StateSpace {
        StateSpace {
            a: self.a.clone(),
            b: self.b.clone(),
            c: self.c.clone(),
            d: self.d,
        }
    }

    pub fn base_response(&self, grid: &[f64]) -> Result<FrequencyResponse> {
        let base = self.base();
        FrequencyResponse::new(grid.to_vec(), grid.iter().map(|&w| base.eval(w)).collect())
    }

    pub fn with_a_rho(&self, a_rho: DMatrix<f64>) -> Result<Self> {
        Self::new(
            self.a.clone(),
            self.b.clone(),
            self.c.clone(),
            self.d,
            a_rho,
        )
    }

    pub fn describing_function(&self, omega: f64) -> Result<Complex64> {
        describing_function(self, omega)
    }

    pub fn df_response(&self, grid: &[f64]) -> Result<FrequencyResponse> {
        let values = grid
            .iter()
            .map(|&w| describing_function(self, w))
            .collect::<Result<Vec<_>>>()?;
        FrequencyResponse::new(grid.to_vec(), values)
    }
}

/// Clegg integrator `1/s` with full reset.
pub fn make_clegg() -> ResetStateSpace {
    ResetStateSpace::scalar(0.0, 1.0, 1.0, 0.0)
}

/// First-order reset element `ω_r/(s + ω_r)` with full reset.
pub fn make_fore(w_r: f64) -> Result<ResetStateSpace> {
    if !(w_r.is_finite() && w_r > 0.0) {
        return Err(invalid("w_r", "must be positive"));
    }
    Ok(ResetStateSpace::scalar(-w_r, w_r, 1.0, 0.0))
}

/// Reset lag `(1 + s/ω_h)/(1 + s/ω_b)` with full reset; biproper, so the
/// feedthrough `ω_b/ω_h` is nonzero.
pub fn make_lag_reset(w_b: f64, w_h: f64) -> Result<ResetStateSpace> {
    if !(w_b > 0.0 && w_h > w_b && w_h.is_finite()) {
        return Err(invalid(
            "band",
            format!("need 0 < w_b < w_h, got {w_b}, {w_h}"),
        ));
    }
    let r = w_b / w_h;
    Ok(ResetStateSpace::scalar(-w_b, w_b, 1.0 - r, r))
}

/// Two copies of the base dynamics: the first is reset by `γ` and weighted
/// by `1 - p`, the second is never reset and weighted by `p`.
pub fn convex_combination(base: &ResetStateSpace, tuning: ResetTuning) -> Result<ResetStateSpace> {
    tuning.validate()?;
    let n = base.order();
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, 0), (n, n)).copy_from(&base.a);
    a.view_mut((n, n), (n, n)).copy_from(&base.a);
    let mut b = DVector::zeros(2 * n);
    b.rows_mut(0, n).copy_from(&base.b);
    b.rows_mut(n, n).copy_from(&base.b);
    let mut c = RowDVector::zeros(2 * n);
    c.columns_mut(0, n).copy_from(&(&base.c * (1.0 - tuning.p)));
    c.columns_mut(n, n).copy_from(&(&base.c * tuning.p));
    let mut a_rho = DMatrix::identity(2 * n, 2 * n);
    for i in 0..n {
        a_rho[(i, i)] = tuning.gamma;
    }
    ResetStateSpace::new(a, b, c, base.d, a_rho)
}

fn checked_inverse(m: &DMatrix<f64>, name: &'static str, omega: f64) -> Result<DMatrix<f64>> {
    let scale = m.iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
    let lu = m.clone().lu();
    let u = lu.u();
    let pivot = u
        .diagonal()
        .iter()
        .map(|v| v.abs())
        .fold(f64::INFINITY, f64::min);
    if scale == 0.0 || pivot <= 1e-12 * scale {
        return Err(CroneError::SingularMatrix {
            matrix: name,
            omega,
        });
    }
    lu.try_inverse().ok_or(CroneError::SingularMatrix {
        matrix: name,
        omega,
    })
}

/// `Θ_D(ω) = -(2ω²/π) Δ (Γ_D - Λ⁻¹)` with `Λ = ω²I + A²`,
/// `Δ = I + e^{πA/ω}`, `Δ_D = I + A_ρ e^{πA/ω}`, `Γ_D = Δ_D⁻¹ A_ρ Δ Λ⁻¹`.
pub fn theta_d(sys: &ResetStateSpace, omega: f64) -> Result<DMatrix<f64>> {
    if !(omega.is_finite() && omega > 0.0) {
        return Err(invalid("omega", "must be positive"));
    }
    let n = sys.order();
    let id = DMatrix::<f64>::identity(n, n);
    let e = expm(&(&sys.a * (PI / omega)));
    let lambda = &id * (omega * omega) + &sys.a * &sys.a;
    let delta = &id + &e;
    let delta_d = &id + &sys.a_rho * &e;
    let lambda_inv = checked_inverse(&lambda, "Lambda", omega)?;
    let delta_d_inv = checked_inverse(&delta_d, "Delta_D", omega)?;
    let gamma_d = &delta_d_inv * &sys.a_rho * &delta * &lambda_inv;
    Ok(&delta * (gamma_d - lambda_inv) * (-2.0 * omega * omega / PI))
}

/// First-harmonic describing function `C(jωI - A)⁻¹(I + jΘ_D)B + D`.
pub fn describing_function(sys: &ResetStateSpace, omega: f64) -> Result<Complex64> {
    if sys.order() == 0 {
        return Ok(Complex64::new(sys.d, 0.0));
    }
    let theta = theta_d(sys, omega)?;
    let n = sys.order();
    let j = Complex64::new(0.0, 1.0);
    let lhs = DMatrix::<Complex64>::from_fn(n, n, |r, c| {
        let diag = if r == c {
            j * omega
        } else {
            Complex64::new(0.0, 0.0)
        };
        diag - sys.a[(r, c)]
    });
    let tb = &theta * &sys.b;
    let rhs = DVector::<Complex64>::from_fn(n, |r, _| Complex64::new(sys.b[r], tb[r]));
    let x = lhs.lu().solve(&rhs).ok_or(CroneError::SingularMatrix {
        matrix: "jwI - A",
        omega,
    })?;
    let y: Complex64 = sys.c.iter().zip(x.iter()).map(|(c, x)| x * *c).sum();
    Ok(y + sys.d)
}

/// Reset phase advantage of the combined integrator, degrees (independent of ω).
pub fn phase_advantage_int(tuning: ResetTuning) -> f64 {
    let g = tuning.gamma;
    (4.0 / PI * (1.0 - tuning.p) * (1.0 - g) / (1.0 + g))
        .atan()
        .to_degrees()
}

/// Scalar `Θ_D` of a first-order element with corner `a`.
fn theta_first_order(omega: f64, gamma: f64, a: f64) -> f64 {
    let e = (-PI * a / omega).exp();
    2.0 * omega * omega * (1.0 - gamma) * (1.0 + e)
        / (PI * (omega * omega + a * a) * (1.0 + gamma * e))
}

/// Reset phase advantage of the combined first-order filter, degrees.
pub fn phase_advantage_fof(omega: f64, tuning: ResetTuning, w_b: f64) -> f64 {
    ((1.0 - tuning.p) * theta_first_order(omega, tuning.gamma, w_b))
        .atan()
        .to_degrees()
}

/// Reset phase advantage of the combined lag, degrees. The feedthrough of the
/// lag dilutes the first-order advantage:
/// `atan(k q / (1 + (ω/ω_h)² + (ω/ω_h) k q))`, `q = (1-p)Θ_D`, `k = 1 - ω_b/ω_h`.
pub fn phase_advantage_lag(omega: f64, tuning: ResetTuning, w_b: f64, w_h: f64) -> f64 {
    let q = (1.0 - tuning.p) * theta_first_order(omega, tuning.gamma, w_b);
    let k = 1.0 - w_b / w_h;
    let x = omega / w_h;
    (k * q / (1.0 + x * x + x * k * q)).atan().to_degrees()
}

/// First harmonic of the steady-state output under `e(t) = sin(ωt)`, by RK4
/// time simulation with resets at the exact zero crossings. Simulates
/// `periods` periods of `samples` steps and integrates over the last one.
pub fn fourier_first_harmonic(
    sys: &ResetStateSpace,
    omega: f64,
    periods: usize,
    samples: usize,
) -> Complex64 {
    assert!(samples >= 4 && samples.is_multiple_of(2) && periods >= 1);
    let h = 2.0 * PI / omega / samples as f64;
    let f = |t: f64, x: &DVector<f64>| &sys.a * x + &sys.b * (omega * t).sin();
    let mut x = DVector::zeros(sys.order());
    let (mut re, mut im) = (0.0, 0.0);
    let start = (periods - 1) * samples;
    for k in 0..periods * samples {
        let t = k as f64 * h;
        if k > 0 && k % (samples / 2) == 0 {
            x = &sys.a_rho * &x;
        }
        if k >= start {
            let (s, c) = (omega * t).sin_cos();
            let u = (sys.c.clone() * &x)[0] + sys.d * s;
            re += u * s;
            im += u * c;
        }
        let k1 = f(t, &x);
        let k2 = f(t + h / 2.0, &(&x + &k1 * (h / 2.0)));
        let k3 = f(t + h / 2.0, &(&x + &k2 * (h / 2.0)));
        let k4 = f(t + h, &(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    let norm = 2.0 / samples as f64;
    Complex64::new(re * norm, im * norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn clegg_df_constant_phase() {
        let c = make_clegg();
        for w in [0.1, 1.0, 37.0, 1e4] {
            let g = describing_function(&c, w).unwrap();
            assert!((g.arg().to_degrees() + 38.146).abs() < 1e-3);
            assert!((g.norm() * w - (1.0 + (4.0 / PI).powi(2)).sqrt()).abs() < 1e-9);
        }
    }

    #[test]
    fn identity_reset_is_linear() {
        let base = make_fore(50.0).unwrap();
        let lin = base.with_a_rho(DMatrix::identity(1, 1)).unwrap();
        for w in [5.0, 50.0, 500.0] {
            assert!(theta_d(&lin, w).unwrap().norm() < 1e-12);
            assert!(rel(describing_function(&lin, w).unwrap(), base.base().eval(w)) < 1e-9);
        }
    }

    #[test]
    fn combination_structure() {
        let base = make_lag_reset(78.54, 5026.5).unwrap();
        let t = ResetTuning::new(0.3, 0.6).unwrap();
        let s = convex_combination(&base, t).unwrap();
        assert_eq!(s.order(), 2);
        assert_eq!(s.a_rho[(0, 0)], 0.3);
        assert_eq!(s.a_rho[(1, 1)], 1.0);
        assert!((s.c[0] - 0.4 * base.c[0]).abs() < 1e-15);
        assert_eq!(s.reset_indices(), vec![0]);
        // base of the combination equals the original base
        assert!(rel(s.base().eval(100.0), base.base().eval(100.0)) < 1e-12);
    }

    #[test]
    fn linear_limits_of_combination() {
        let base = make_fore(300.0).unwrap();
        for t in [
            ResetTuning { gamma: 0.0, p: 1.0 },
            ResetTuning { gamma: 1.0, p: 0.0 },
        ] {
            let s = convex_combination(&base, t).unwrap();
            for w in [30.0, 300.0, 3000.0] {
                assert!(rel(describing_function(&s, w).unwrap(), base.base().eval(w)) < 1e-9);
            }
        }
    }

    #[test]
    fn closed_form_advantages_match_df() {
        let (wb, wh) = (78.54, 5026.5);
        let t = ResetTuning::new(0.5, 0.5).unwrap();
        let lag = make_lag_reset(wb, wh).unwrap();
        let fof = make_fore(wb).unwrap();
        let int = make_clegg();
        for w in [10.0, 100.0, 628.3, 5000.0] {
            for (base, adv) in [
                (&int, phase_advantage_int(t)),
                (&fof, phase_advantage_fof(w, t, wb)),
                (&lag, phase_advantage_lag(w, t, wb, wh)),
            ] {
                let s = convex_combination(base, t).unwrap();
                let d = (describing_function(&s, w).unwrap() / base.base().eval(w))
                    .arg()
                    .to_degrees();
                assert!((d - adv).abs() < 1e-6, "w={w}: {d} vs {adv}");
            }
        }
        assert!((phase_advantage_int(ResetTuning::full_reset()) - 51.854).abs() < 1e-3);
        assert!((phase_advantage_int(t) - 11.98).abs() < 0.01);
    }

    #[test]
    fn singular_lambda_reported() {
        // undamped oscillator at its own frequency: Λ = ω²I + A² = 0
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, -2.0, 0.0]);
        let s = ResetStateSpace::new(
            a,
            DVector::from_vec(vec![0.0, 1.0]),
            RowDVector::from_vec(vec![1.0, 0.0]),
            0.0,
            DMatrix::zeros(2, 2),
        )
        .unwrap();
        assert!(matches!(
            describing_function(&s, 2.0),
            Err(CroneError::SingularMatrix {
                matrix: "Lambda",
                ..
            })
        ));
    }

    #[test]
    fn invalid_inputs() {
        assert!(make_fore(0.0).is_err());
        assert!(make_lag_reset(10.0, 5.0).is_err());
        assert!(ResetTuning::new(1.2, 0.0).is_err());
        assert!(describing_function(&make_clegg(), 0.0).is_err());
    }
}
