//! Delay rationalization and the band-limited fractional lead
//! `((1 + s/ω_b)/(1 + s/ω_h))^ν` with its recursive (Oustaloup) rational fit.

use num_complex::Complex64;

use super::cascade::{Cascade, Section};
use super::response::{logspace, validate_grid, FrequencyResponse};
use super::tf::RationalTf;
use crate::error::{invalid, CroneError, Result};

/// Magnitude tolerance of the rational fit inside the band, dB.
pub const OUSTALOUP_MAG_TOL_DB: f64 = 1.0;
/// Phase tolerance of the rational fit inside the band, degrees.
pub const OUSTALOUP_PHASE_TOL_DEG: f64 = 5.0;

/// `[order/order]` Padé approximant of `e^{-s·delay}`.
pub fn pade_delay(delay: f64, order: usize) -> Result<RationalTf> {
    if !(1..=3).contains(&order) {
        return Err(invalid("order", "Padé order must be 1, 2 or 3"));
    }
    if !(delay.is_finite() && delay > 0.0) {
        return Err(invalid("delay", "must be positive"));
    }
    let fact = |k: usize| (1..=k).fold(1.0, |acc, i| acc * i as f64);
    let n = order;
    // c_k = (2n-k)! n! / ((2n)! k! (n-k)!)
    let c: Vec<f64> = (0..=n)
        .map(|k| fact(2 * n - k) * fact(n) / (fact(2 * n) * fact(k) * fact(n - k)))
        .collect();
    let mut num = Vec::with_capacity(n + 1);
    let mut den = Vec::with_capacity(n + 1);
    for k in (0..=n).rev() {
        let t = c[k] * delay.powi(k as i32);
        den.push(t);
        num.push(if k % 2 == 1 { -t } else { t });
    }
    RationalTf::new(num, den)
}

/// Exact principal-branch value of the fractional lead at `s = jω`.
pub fn fractional_lag_lead(w_b: f64, w_h: f64, nu: f64, omega: f64) -> Complex64 {
    let s = Complex64::new(0.0, omega);
    let base = (1.0 + s / w_b) / (1.0 + s / w_h);
    if nu == 0.0 {
        return Complex64::new(1.0, 0.0);
    }
    base.powf(nu)
}

pub fn fractional_lag_lead_fr(
    w_b: f64,
    w_h: f64,
    nu: f64,
    grid: &[f64],
) -> Result<FrequencyResponse> {
    check_band(w_b, w_h)?;
    validate_grid(grid)?;
    FrequencyResponse::new(
        grid.to_vec(),
        grid.iter()
            .map(|&w| fractional_lag_lead(w_b, w_h, nu, w))
            .collect(),
    )
}

fn check_band(w_b: f64, w_h: f64) -> Result<()> {
    if !(w_b > 0.0 && w_h > w_b && w_h.is_finite()) {
        return Err(invalid(
            "band",
            format!("need 0 < w_b < w_h, got {w_b}, {w_h}"),
        ));
    }
    Ok(())
}

/// Zero/pole pairs of the recursive approximation: `cells` lead-lag factors
/// `(1 + s/z_i)/(1 + s/p_i)` with geometric spacing over `[ω_b, ω_h]`.
///
/// With `r = ω_h/ω_b`, `α = r^{ν/N}`, `η = r^{(1-ν)/N}`:
/// `z_1 = √η·ω_b`, `p_i = α·z_i`, `z_{i+1} = η·p_i`. The DC gain is 1 and
/// the high-frequency gain is `r^ν`, matching the exact factor.
pub fn oustaloup_cells(w_b: f64, w_h: f64, nu: f64, cells: usize) -> Vec<(f64, f64)> {
    let r = w_h / w_b;
    let n = cells as f64;
    let alpha = r.powf(nu / n);
    let eta = r.powf((1.0 - nu) / n);
    let mut out = Vec::with_capacity(cells);
    let mut z = eta.sqrt() * w_b;
    for _ in 0..cells {
        let p = alpha * z;
        out.push((z, p));
        z = eta * p;
    }
    out
}

/// Worst in-band deviation of a candidate response from the exact factor:
/// `(frequency, |Δ| dB, |Δ∠| deg)` for the larger normalized violation.
pub fn fit_error(
    w_b: f64,
    w_h: f64,
    nu: f64,
    approx: impl Fn(f64) -> Complex64,
) -> (f64, f64, f64) {
    let lo = w_b * 10f64.powf(0.1);
    let hi = w_h * 10f64.powf(-0.1);
    let mut worst = (lo, 0.0, 0.0);
    let mut worst_score = -1.0;
    for w in logspace(lo, hi, 400) {
        let ratio = approx(w) / fractional_lag_lead(w_b, w_h, nu, w);
        let mag = (20.0 * ratio.norm().log10()).abs();
        let ph = ratio.arg().to_degrees().abs();
        let score = (mag / OUSTALOUP_MAG_TOL_DB).max(ph / OUSTALOUP_PHASE_TOL_DEG);
        if score > worst_score {
            worst_score = score;
            worst = (w, mag, ph);
        }
    }
    worst
}

/// Oustaloup sections for `0 ≤ ν ≤ 1`, checked against the exact factor.
pub fn oustaloup_sections(w_b: f64, w_h: f64, nu: f64, cells: usize) -> Result<Vec<Section>> {
    check_band(w_b, w_h)?;
    if !(0.0..=1.0).contains(&nu) {
        return Err(invalid("nu", format!("must lie in [0, 1], got {nu}")));
    }
    if cells == 0 {
        return Err(invalid("cells", "need at least one cell"));
    }
    let sections: Vec<Section> = oustaloup_cells(w_b, w_h, nu, cells)
        .into_iter()
        .map(|(zero, pole)| Section::LeadLag { zero, pole })
        .collect();
    let c = Cascade::new(sections.clone());
    let (worst_freq, mag_err_db, phase_err_deg) = fit_error(w_b, w_h, nu, |w| c.eval(w));
    if mag_err_db > OUSTALOUP_MAG_TOL_DB || phase_err_deg > OUSTALOUP_PHASE_TOL_DEG {
        return Err(CroneError::OustaloupTolerance {
            worst_freq,
            mag_err_db,
            phase_err_deg,
        });
    }
    Ok(sections)
}

pub fn oustaloup_approx(w_b: f64, w_h: f64, nu: f64, cells: usize) -> Result<RationalTf> {
    Ok(Cascade::new(oustaloup_sections(w_b, w_h, nu, cells)?).to_tf())
}

/// Sections for `((1 + s/ω_b)/(1 + s/ω_h))^e` with `e ≥ 0`: the integer part
/// of the exponent as exact lead-lag factors, the remainder by Oustaloup.
pub fn lag_lead_power_sections(
    w_b: f64,
    w_h: f64,
    exponent: f64,
    cells: usize,
) -> Result<Vec<Section>> {
    if !(exponent.is_finite() && exponent >= 0.0) {
        return Err(invalid(
            "exponent",
            format!("must be non-negative, got {exponent}"),
        ));
    }
    let whole = exponent.floor();
    let frac = exponent - whole;
    let mut out: Vec<Section> = (0..whole as usize)
        .map(|_| Section::LeadLag {
            zero: w_b,
            pole: w_h,
        })
        .collect();
    if frac > 0.0 {
        out.extend(oustaloup_sections(w_b, w_h, frac, cells)?);
    } else {
        check_band(w_b, w_h)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn pade_first_order() {
        let tau = 0.01;
        let p = pade_delay(tau, 1).unwrap();
        assert!((p.num()[0] / p.den()[0] + 1.0).abs() < 1e-15);
        assert!((p.num()[0] - (-tau / 2.0)).abs() < 1e-15);
        assert!((p.eval(1e-9).re - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pade_second_order_phase() {
        let tau = 2.5e-4;
        let p = pade_delay(tau, 2).unwrap();
        let w = 2.0 * PI * 100.0;
        assert!((p.eval(w).arg() + w * tau).to_degrees().abs() < 0.1);
    }

    #[test]
    fn pade_rejects_bad_order() {
        assert!(pade_delay(1e-3, 0).is_err());
        assert!(pade_delay(1e-3, 4).is_err());
        assert!(pade_delay(0.0, 2).is_err());
    }

    #[test]
    fn fractional_limits() {
        let (wb, wh) = (10.0, 1000.0);
        assert_eq!(
            fractional_lag_lead(wb, wh, 0.0, 33.0),
            Complex64::new(1.0, 0.0)
        );
        let hf = fractional_lag_lead(wb, wh, 1.0, 1e9);
        assert!((hf.norm() - wh / wb).abs() < 1e-3);
    }

    #[test]
    fn half_order_phase_at_center() {
        let (wb, wh): (f64, f64) = (78.54, 5026.5);
        let wc = (wb * wh).sqrt();
        let half = fractional_lag_lead(wb, wh, 0.5, wc).arg();
        let full = fractional_lag_lead(wb, wh, 1.0, wc).arg();
        assert!((half - full / 2.0).abs() < 1e-12);
    }

    #[test]
    fn oustaloup_unit_order_is_exact() {
        let (wb, wh): (f64, f64) = (78.54, 5026.5);
        for cells in [1, 3, 4] {
            let c = Cascade::new(oustaloup_sections(wb, wh, 1.0, cells).unwrap());
            for w in logspace(1.0, 1e6, 30) {
                let exact = fractional_lag_lead(wb, wh, 1.0, w);
                assert!((c.eval(w) - exact).norm() < 1e-6 * exact.norm());
            }
        }
    }

    #[test]
    fn oustaloup_rejects_out_of_range() {
        assert!(oustaloup_sections(10.0, 100.0, 1.5, 4).is_err());
        assert!(oustaloup_sections(100.0, 10.0, 0.5, 4).is_err());
        assert!(oustaloup_sections(10.0, 100.0, 0.5, 0).is_err());
    }

    #[test]
    fn oustaloup_tolerance_reported() {
        // a single cell over six decades cannot meet 1 dB / 5 deg
        match oustaloup_sections(1.0, 1e6, 0.5, 1) {
            Err(CroneError::OustaloupTolerance { worst_freq, .. }) => assert!(worst_freq > 1.0),
            other => panic!("expected tolerance error, got {other:?}"),
        }
    }

    #[test]
    fn integer_exponent_split() {
        let s = lag_lead_power_sections(10.0, 1000.0, 1.0, 4).unwrap();
        assert_eq!(s.len(), 1);
        let s = lag_lead_power_sections(10.0, 1000.0, 1.7, 4).unwrap();
        assert_eq!(s.len(), 5);
        let c = Cascade::new(s);
        let w = 100.0;
        let exact = fractional_lag_lead(10.0, 1000.0, 1.7, w);
        assert!((c.eval(w) / exact).arg().to_degrees().abs() < 1.0);
    }
}
