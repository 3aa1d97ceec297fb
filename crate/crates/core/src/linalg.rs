//! Small dense linear-algebra helpers that nalgebra does not ship:
//! matrix exponential, Lyapunov solve, diagonal balancing, and a few
//! symmetric-matrix utilities used by the stability solver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

/// Matrix exponential by scaling and squaring around a degree-6 Padé core.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let norm = a.iter().map(|v| v.abs()).fold(0.0_f64, f64::max) * n as f64;
    let mut squarings = 0u32;
    if norm > 0.5 {
        squarings = (norm / 0.5).log2().ceil() as u32;
    }
    let scaled = a / 2f64.powi(squarings as i32);

    // Padé(6,6) coefficients c_k = (12-k)! 6! / (12! k! (6-k)!)
    const C: [f64; 7] = [
        1.0,
        0.5,
        5.0 / 44.0,
        1.0 / 66.0,
        1.0 / 792.0,
        1.0 / 15840.0,
        1.0 / 665280.0,
    ];
    let id = DMatrix::<f64>::identity(n, n);
    let mut power = id.clone();
    let mut num = id.clone() * C[0];
    let mut den = id.clone() * C[0];
    for (k, c) in C.iter().enumerate().skip(1) {
        power = &power * &scaled;
        num += &power * *c;
        if k % 2 == 0 {
            den += &power * *c;
        } else {
            den -= &power * *c;
        }
    }
    let mut result = den
        .lu()
        .solve(&num)
        .expect("Padé denominator is nonsingular for ||A|| <= 0.5");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Solves `Aᵀ X + X A = -Q` by vectorization. Intended for the small
/// orders found here (n ≲ 20).
pub fn solve_lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let at = a.transpose();
    let nn = n * n;
    let mut k = DMatrix::<f64>::zeros(nn, nn);
    // column-major vec: vec(AᵀX) = (I ⊗ Aᵀ) vec X, vec(XA) = (Aᵀ ⊗ I) vec X
    for j in 0..n {
        for i in 0..n {
            let row = j * n + i;
            for l in 0..n {
                k[(row, j * n + l)] += at[(i, l)];
                k[(row, l * n + i)] += a[(l, j)];
            }
        }
    }
    let rhs = DVector::from_iterator(nn, q.iter().map(|v| -v));
    let x = k.lu().solve(&rhs)?;
    let x = DMatrix::from_column_slice(n, n, x.as_slice());
    Some(symmetrize(&x))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Diagonal balancing without permutation (Parlett–Reinsch, radix 2).
/// Returns `d` such that `D⁻¹ A D` has comparable row and column norms.
pub fn balance(a: &DMatrix<f64>) -> DVector<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut d = DVector::from_element(n, 1.0);
    let radix = 2.0_f64;
    let mut converged = false;
    let mut sweeps = 0;
    while !converged && sweeps < 200 {
        converged = true;
        sweeps += 1;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].abs();
                    r += m[(i, j)].abs();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut cc = c;
            let g = r / radix;
            while cc < g {
                f *= radix;
                cc *= radix * radix;
            }
            let g = r * radix;
            while cc >= g {
                f /= radix;
                cc /= radix * radix;
            }
            if (cc + r / f) / f < 0.95 * s {
                converged = false;
                d[i] *= f;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
    d
}

/// Eigenvalues of a real square matrix.
pub fn eigenvalues(a: &DMatrix<f64>) -> Vec<Complex64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    a.complex_eigenvalues().iter().copied().collect()
}

pub fn max_real_part(a: &DMatrix<f64>) -> f64 {
    eigenvalues(a)
        .iter()
        .map(|l| l.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Sorted (ascending) eigenvalues of the symmetric part of `m`.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .copied()
        .collect();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// `M^{-1/2}` for symmetric positive definite `M`.
pub fn sym_inv_sqrt(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let eig = SymmetricEigen::new(symmetrize(m));
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return None;
    }
    let q = &eig.eigenvectors;
    let scaled = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Some(q * scaled * q.transpose())
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, 0.5, 3.0]));
        let e = expm(&a);
        for (i, l) in [-1.0f64, 0.5, 3.0].iter().enumerate() {
            assert!((e[(i, i)] - l.exp()).abs() < 1e-12 * l.exp().max(1.0));
        }
    }

    #[test]
    fn expm_rotation() {
        // exp([[0, w], [-w, 0]] t) is a rotation
        let w = 7.3;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, w, -w, 0.0]);
        let e = expm(&a);
        assert!((e[(0, 0)] - w.cos()).abs() < 1e-12);
        assert!((e[(0, 1)] - w.sin()).abs() < 1e-12);
    }

    #[test]
    fn expm_large_norm_nilpotent() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1e4, 0.0, 0.0]);
        let e = expm(&a);
        assert!((e[(0, 1)] - 1e4).abs() < 1e-8);
        assert!((e[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lyapunov_residual() {
        let a = DMatrix::from_row_slice(3, 3, &[-1.0, 2.0, 0.0, 0.0, -3.0, 1.0, 0.5, 0.0, -2.0]);
        let q = DMatrix::identity(3, 3);
        let x = solve_lyapunov(&a, &q).unwrap();
        let r = a.transpose() * &x + &x * &a + &q;
        assert!(r.norm() < 1e-12);
        assert!(sym_eigenvalues(&x)[0] > 0.0);
    }

    #[test]
    fn balance_reduces_spread() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 1e8, 1e-8, -2.0]);
        let d = balance(&a);
        let dinv = DMatrix::from_diagonal(&d.map(|x| 1.0 / x));
        let b = &dinv * &a * DMatrix::from_diagonal(&d);
        assert!(b[(0, 1)].abs() < 10.0 && b[(1, 0)].abs() < 10.0);
    }
}
