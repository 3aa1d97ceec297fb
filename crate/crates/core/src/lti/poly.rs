//! Real polynomials stored in descending powers of `s`.

use nalgebra::DMatrix;
use num_complex::Complex64;

pub fn eval(coeffs: &[f64], s: Complex64) -> Complex64 {
    coeffs
        .iter()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

/// Sum of `|c_i| |s|^i`, used as the scale for pole/zero proximity tests.
pub fn abs_scale(coeffs: &[f64], s_abs: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * s_abs + c.abs())
}

pub fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Drops leading zeros, keeping at least one coefficient.
pub fn trim(coeffs: &[f64]) -> Vec<f64> {
    let first = coeffs.iter().position(|&c| c != 0.0);
    match first {
        Some(i) => coeffs[i..].to_vec(),
        None => vec![0.0],
    }
}

pub fn degree(coeffs: &[f64]) -> usize {
    trim(coeffs).len().saturating_sub(1)
}

/// Roots via companion-matrix eigenvalues.
pub fn roots(coeffs: &[f64]) -> Vec<Complex64> {
    let c = trim(coeffs);
    let n = c.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    // zero roots are split off exactly
    let trailing = c.iter().rev().take_while(|&&v| v == 0.0).count();
    let core = &c[..c.len() - trailing];
    let m = core.len() - 1;
    let mut out = vec![Complex64::new(0.0, 0.0); trailing];
    if m > 0 {
        let mut comp = DMatrix::<f64>::zeros(m, m);
        for j in 0..m {
            comp[(0, j)] = -core[j + 1] / core[0];
        }
        for i in 1..m {
            comp[(i, i - 1)] = 1.0;
        }
        out.extend(crate::linalg::eigenvalues(&comp));
    }
    out
}
