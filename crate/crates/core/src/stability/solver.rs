//! Restricted Lyapunov problem: find `P ≻ 0` with `A_cl^T P + P A_cl ≺ 0`,
//! the reset rows of `P` tied to `β C_nrp` and `P_ρ`, and no increase of
//! `V` across a jump.
//!
//! The admissible `P` has the reset rows fixed to `[β C_nrp, P_ρ]`. Resets
//! only happen on `C_nrp x = 0`, where such a `P` gives
//! `ΔV = (γ² - 1) x_rᵀ P_ρ x_r ≤ 0`, so the jump condition needs no extra
//! constraint. The problem is solved as a phase-I semidefinite program
//!
//! ```text
//! maximize t  s.t.  P - tI ⪰ 0,  -(AᵀP + PA) - tI ⪰ 0,  tr P ≤ n
//! ```
//!
//! with a log-barrier path-following Newton method in well-conditioned
//! working coordinates.

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::Serialize;

use super::certificate::{
    verify_certificate, CertificateMethod, StabilityCertificate, Verification,
};
use super::closed_loop::ClosedLoopMats;
use crate::error::Result;
use crate::linalg::{balance, solve_lyapunov, spectral_norm, sym_eigenvalues, sym_inv_sqrt};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Relative tolerance used by verification.
    pub tol: f64,
    /// Cap on Newton iterations.
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iterations: 5000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InfeasibleReason {
    /// The base linear loop is not asymptotically stable.
    NonHurwitz,
    /// The non-reset part of the loop is not stable on its own, which rules
    /// out any block-diagonal `P`.
    NonResetBlockUnstable,
    /// The solver converged with a non-positive margin.
    NoStrictSolution,
    /// Iteration cap or a failed verification; not a proof of infeasibility.
    Undecided,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfeasibleReport {
    pub reason: InfeasibleReason,
    pub max_real_eig: f64,
    /// Best `t` reached (working coordinates, `tr P ≤ n`).
    pub best_margin: Option<f64>,
    pub iterations: usize,
    pub verification: Option<Verification>,
}

#[derive(Debug, Clone)]
pub enum StabilityOutcome {
    Certified {
        certificate: Box<StabilityCertificate>,
        verification: Verification,
        iterations: usize,
    },
    Infeasible(InfeasibleReport),
}

impl StabilityOutcome {
    pub fn is_certified(&self) -> bool {
        matches!(self, StabilityOutcome::Certified { .. })
    }

    pub fn certificate(&self) -> Option<&StabilityCertificate> {
        match self {
            StabilityOutcome::Certified { certificate, .. } => Some(certificate),
            StabilityOutcome::Infeasible(_) => None,
        }
    }
}

/// Working coordinates: non-reset states first, diagonal balancing,
/// spectral normalization, Lyapunov preconditioning of the non-reset block,
/// and a reset-state scaling that equalizes its coupling in and out.
struct Working {
    a: DMatrix<f64>,
    transform: DMatrix<f64>,
    scale: f64,
    n_non: usize,
}

fn working_coordinates(clm: &ClosedLoopMats) -> Option<Working> {
    let n = clm.order();
    let order: Vec<usize> = (0..n)
        .filter(|i| !clm.reset.contains(i))
        .chain(clm.reset.iter().copied())
        .collect();
    let n_non = n - clm.reset.len();
    let mut perm = DMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        perm[(i, k)] = 1.0;
    }
    let a1 = perm.transpose() * &clm.a_cl * &perm;

    let d = balance(&a1);
    let a2 = DMatrix::from_fn(n, n, |i, j| a1[(i, j)] * d[j] / d[i]);
    let s1 = spectral_norm(&a2);
    if s1 == 0.0 {
        return None;
    }
    let a3 = a2 / s1;

    let mut t1 = DMatrix::identity(n, n);
    let mut t1_inv = DMatrix::identity(n, n);
    if n_non > 0 {
        let a11 = a3.view((0, 0), (n_non, n_non)).clone_owned();
        let x = solve_lyapunov(&a11, &DMatrix::identity(n_non, n_non))?;
        let x_mh = sym_inv_sqrt(&x)?;
        let x_h = x_mh.clone().try_inverse()?;
        t1.view_mut((0, 0), (n_non, n_non)).copy_from(&x_mh);
        t1_inv.view_mut((0, 0), (n_non, n_non)).copy_from(&x_h);
    }
    let a4 = &t1_inv * &a3 * &t1;

    let mut sr = DVector::from_element(n, 1.0);
    for i in n_non..n {
        let col = a4.view((0, i), (n_non, 1)).norm();
        let row = a4.view((i, 0), (1, n_non)).norm();
        if col > 0.0 && row > 0.0 {
            sr[i] = (row / col).sqrt();
        }
    }
    let a5 = DMatrix::from_fn(n, n, |i, j| a4[(i, j)] * sr[j] / sr[i]);
    let s2 = spectral_norm(&a5);
    let a = a5 / s2;
    let transform = perm * DMatrix::from_diagonal(&d) * t1 * DMatrix::from_diagonal(&sr);
    Some(Working {
        a,
        transform,
        scale: s1 * s2,
        n_non,
    })
}

/// Basis of the admissible `P`: symmetric matrices on the two diagonal
/// blocks, plus one `e_r c̃ᵀ + c̃ e_rᵀ` per reset state for `β`, where `c̃` is
/// the unit-norm output row restricted to the non-reset states.
fn admissible_basis(n_non: usize, n: usize, c_w: &RowDVector<f64>) -> (Vec<DMatrix<f64>>, f64) {
    let mut out = Vec::new();
    for (lo, hi) in [(0, n_non), (n_non, n)] {
        for i in lo..hi {
            for j in i..hi {
                let mut e = DMatrix::zeros(n, n);
                e[(i, j)] = 1.0;
                e[(j, i)] = 1.0;
                out.push(e);
            }
        }
    }
    let c_norm = c_w.columns(0, n_non).norm();
    if c_norm > 0.0 {
        for r in n_non..n {
            let mut e = DMatrix::zeros(n, n);
            for j in 0..n_non {
                e[(r, j)] = c_w[j] / c_norm;
                e[(j, r)] = c_w[j] / c_norm;
            }
            out.push(e);
        }
    }
    (out, c_norm)
}

struct Barrier {
    n: usize,
    basis: Vec<DMatrix<f64>>,
    /// `∂F₂/∂y_k` and `∂f₃/∂y_k` for the `P` coordinates; `∂F₁/∂y_k` is the
    /// basis matrix itself.
    d2: Vec<DMatrix<f64>>,
    d3: Vec<f64>,
    a: DMatrix<f64>,
}

struct Point {
    f1: DMatrix<f64>,
    f2: DMatrix<f64>,
    f3: f64,
}

impl Barrier {
    fn new(a: DMatrix<f64>, basis: Vec<DMatrix<f64>>) -> Self {
        let n = a.nrows();
        let d2 = basis
            .iter()
            .map(|e| -(a.transpose() * e + e * &a))
            .collect();
        let d3 = basis.iter().map(|e| -e.trace()).collect();
        Self {
            n,
            basis,
            d2,
            d3,
            a,
        }
    }

    fn dim(&self) -> usize {
        self.basis.len() + 1
    }

    fn p_of(&self, y: &DVector<f64>) -> DMatrix<f64> {
        let mut p = DMatrix::zeros(self.n, self.n);
        for (k, e) in self.basis.iter().enumerate() {
            p += e * y[k];
        }
        p
    }

    fn point(&self, y: &DVector<f64>) -> Point {
        let t = y[self.basis.len()];
        let p = self.p_of(y);
        let id = DMatrix::<f64>::identity(self.n, self.n);
        Point {
            f1: &p - &id * t,
            f2: -(self.a.transpose() * &p + &p * &self.a) - &id * t,
            f3: self.n as f64 - p.trace(),
        }
    }

    /// Barrier objective, `None` outside the interior.
    fn value(&self, y: &DVector<f64>, tau: f64) -> Option<f64> {
        let pt = self.point(y);
        if pt.f3 <= 0.0 {
            return None;
        }
        let l1 = pt.f1.cholesky()?;
        let l2 = pt.f2.cholesky()?;
        let logdet = |l: &DMatrix<f64>| 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Some(-tau * y[self.basis.len()] - logdet(&l1.l()) - logdet(&l2.l()) - pt.f3.ln())
    }

    fn grad_hess(&self, y: &DVector<f64>, tau: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let pt = self.point(y);
        let m = self.dim();
        let mut g = DVector::zeros(m);
        let mut h = DMatrix::zeros(m, m);
        let id = DMatrix::<f64>::identity(self.n, self.n);
        for (f, derivs) in [(&pt.f1, &self.basis), (&pt.f2, &self.d2)] {
            let l = f.clone().cholesky()?.l();
            // G_k = L⁻¹ D_k L⁻ᵀ
            let whiten = |d: &DMatrix<f64>| -> DMatrix<f64> {
                let x = l
                    .solve_lower_triangular(d)
                    .expect("cholesky factor is nonsingular");
                l.solve_lower_triangular(&x.transpose())
                    .expect("cholesky factor is nonsingular")
            };
            let mut gs: Vec<DMatrix<f64>> = derivs.iter().map(whiten).collect();
            gs.push(whiten(&(-&id)));
            for k in 0..m {
                g[k] -= gs[k].trace();
                for q in k..m {
                    let v = gs[k].dot(&gs[q]);
                    h[(k, q)] += v;
                    if q != k {
                        h[(q, k)] += v;
                    }
                }
            }
        }
        for k in 0..self.basis.len() {
            g[k] -= self.d3[k] / pt.f3;
            for q in 0..self.basis.len() {
                h[(k, q)] += self.d3[k] * self.d3[q] / (pt.f3 * pt.f3);
            }
        }
        g[m - 1] -= tau;
        Some((g, h))
    }
}

struct BarrierResult {
    p: DMatrix<f64>,
    y: DVector<f64>,
    t: f64,
    iterations: usize,
    converged: bool,
}

fn solve_barrier(
    a: &DMatrix<f64>,
    basis: Vec<DMatrix<f64>>,
    max_iterations: usize,
) -> BarrierResult {
    let bar = Barrier::new(a.clone(), basis);
    let n = bar.n;
    let m = bar.dim();
    // start from P = I/2, t well below both minimum eigenvalues
    let mut y = DVector::zeros(m);
    for (k, e) in bar.basis.iter().enumerate() {
        let diag = (0..n).filter(|&i| e[(i, i)] != 0.0).count();
        let entries = e.iter().filter(|v| **v != 0.0).count();
        if diag == 1 && entries == 1 {
            y[k] = 0.5;
        }
    }
    let p0 = bar.p_of(&y);
    let lyap0 = sym_eigenvalues(&(-(a.transpose() * &p0 + &p0 * a)));
    y[m - 1] = lyap0[0].min(0.5) - 1.0;

    let barrier_terms = (2 * n + 1) as f64;
    let mut tau = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    'outer: loop {
        loop {
            if iterations >= max_iterations {
                break 'outer;
            }
            iterations += 1;
            let Some((g, h)) = bar.grad_hess(&y, tau) else {
                break 'outer;
            };
            let step = match h.clone().cholesky() {
                Some(c) => c.solve(&(-&g)),
                None => match h.lu().solve(&(-&g)) {
                    Some(s) => s,
                    None => break 'outer,
                },
            };
            let decrement = -g.dot(&step);
            if decrement < 1e-10 {
                break;
            }
            let f0 = bar.value(&y, tau).expect("iterate stays interior");
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial = &y + &step * alpha;
                if let Some(f) = bar.value(&trial, tau) {
                    if f <= f0 - 0.25 * alpha * decrement {
                        y = trial;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
        }
        let t = y[m - 1];
        let gap = barrier_terms / tau;
        // t is within `gap` of the optimum
        if gap < 1e-9 || (t > 0.0 && gap < 1e-3 * t) || t + gap < 0.0 {
            converged = true;
            break;
        }
        tau *= 8.0;
    }
    BarrierResult {
        p: bar.p_of(&y),
        t: y[m - 1],
        y,
        iterations,
        converged,
    }
}

/// Searches for a quadratic certificate. Every success path has passed
/// [`verify_certificate`] with `opts.tol`.
pub fn check_quadratic_stability(
    clm: &ClosedLoopMats,
    opts: SolverOptions,
) -> Result<StabilityOutcome> {
    let max_real_eig = clm.max_real_eig();
    let report = |reason, best_margin, iterations, verification| {
        StabilityOutcome::Infeasible(InfeasibleReport {
            reason,
            max_real_eig,
            best_margin,
            iterations,
            verification,
        })
    };
    if !clm.is_hurwitz() {
        return Ok(report(InfeasibleReason::NonHurwitz, None, 0, None));
    }
    let Some(work) = working_coordinates(clm) else {
        return Ok(report(
            InfeasibleReason::NonResetBlockUnstable,
            None,
            0,
            None,
        ));
    };
    let n = clm.order();
    let n_reset = n - work.n_non;
    let reset_w: Vec<usize> = (work.n_non..n).collect();
    let nonreset_w: Vec<usize> = (0..work.n_non).collect();

    let c_w = &clm.c_nrp * &work.transform;
    let mut beta = DVector::zeros(n_reset);
    let (p, method, iterations, margin) = if n_reset == 0 {
        let Some(p) = solve_lyapunov(&work.a, &DMatrix::identity(n, n)) else {
            return Ok(report(InfeasibleReason::Undecided, None, 0, None));
        };
        let p = &p * (n as f64 / p.trace());
        (p, CertificateMethod::Lyapunov, 0, None)
    } else {
        let (basis, c_norm) = admissible_basis(work.n_non, n, &c_w);
        let n_sym = basis.len() - if c_norm > 0.0 { n_reset } else { 0 };
        let r = solve_barrier(&work.a, basis, opts.max_iterations);
        if c_norm > 0.0 {
            for a in 0..n_reset {
                beta[a] = r.y[n_sym + a] / c_norm;
            }
        }
        if r.t <= 0.0 {
            let reason = if r.converged {
                InfeasibleReason::NoStrictSolution
            } else {
                InfeasibleReason::Undecided
            };
            return Ok(report(reason, Some(r.t), r.iterations, None));
        }
        (r.p, CertificateMethod::Barrier, r.iterations, Some(r.t))
    };
    let p_rho = DMatrix::from_fn(n_reset, n_reset, |i, j| p[(work.n_non + i, work.n_non + j)]);
    let cert = StabilityCertificate::assemble(
        clm,
        p,
        beta,
        p_rho,
        work.transform,
        work.scale,
        reset_w,
        nonreset_w,
        method,
    )?;
    let verification = verify_certificate(&cert, clm, opts.tol)?;
    if verification.passed() {
        Ok(StabilityOutcome::Certified {
            certificate: Box::new(cert),
            verification,
            iterations,
        })
    } else {
        Ok(report(
            InfeasibleReason::Undecided,
            margin,
            iterations,
            Some(verification),
        ))
    }
}
