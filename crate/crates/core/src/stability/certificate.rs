use nalgebra::{DMatrix, DVector, RowDVector};
use serde::Serialize;

use super::closed_loop::ClosedLoopMats;
use crate::error::{CroneError, Result};
use nalgebra::SymmetricEigen;

use crate::linalg::{spectral_norm, sym_eigenvalues, symmetrize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMethod {
    /// Plain Lyapunov solve; the loop has no reset states.
    Lyapunov,
    /// Barrier-method solution of the restricted problem.
    Barrier,
    /// Supplied by the caller.
    External,
}

/// Quadratic Lyapunov certificate `V = x_wᵀ P x_w` in working coordinates
/// `x = T x_w`, where the working closed-loop matrix is `T⁻¹ A_cl T / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityCertificate {
    pub p: DMatrix<f64>,
    /// One `β` per reset state.
    pub beta: DVector<f64>,
    pub p_rho: DMatrix<f64>,
    pub transform: DMatrix<f64>,
    pub scale: f64,
    /// Reset states, working coordinates.
    pub reset: Vec<usize>,
    /// All other states, working coordinates.
    pub nonreset: Vec<usize>,
    /// `C_nrp` in working coordinates.
    pub c_nrp: RowDVector<f64>,
    pub method: CertificateMethod,
    pub eig_p: Vec<f64>,
    pub eig_lyap: Vec<f64>,
    pub equality_residual: Option<f64>,
    /// Largest eigenvalue of `A_ρᵀ P A_ρ - P` on the reset surface `C_nrp x = 0`.
    pub jump_residual: f64,
    /// Same over the whole state space (informational).
    pub jump_residual_global: f64,
}

/// Outcome of the four checks, each relative to `‖P‖`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verification {
    pub tol: f64,
    pub positive_definite: bool,
    pub lyapunov_decrease: bool,
    pub equality: bool,
    pub jump: bool,
    pub min_eig_p: f64,
    /// `-max eig(AᵀP + PA) / ‖P‖`.
    pub lyapunov_margin: f64,
    /// `None` when the loop has no reset states.
    pub equality_residual: Option<f64>,
    pub jump_residual: f64,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.positive_definite && self.lyapunov_decrease && self.equality && self.jump
    }
}

/// Working-coordinate `A_cl` and `A_ρ` for a certificate.
pub fn working_matrices(
    cert: &StabilityCertificate,
    clm: &ClosedLoopMats,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = clm.order();
    if cert.transform.shape() != (n, n) || cert.p.shape() != (n, n) {
        return Err(CroneError::Dimension(format!(
            "certificate is {:?}, closed loop is {n}x{n}",
            cert.p.shape()
        )));
    }
    let t_inv = cert
        .transform
        .clone()
        .try_inverse()
        .ok_or_else(|| CroneError::Dimension("singular certificate transform".into()))?;
    let a = &t_inv * &clm.a_cl * &cert.transform / cert.scale;
    let a_rho = &t_inv * &clm.a_rho * &cert.transform;
    Ok((a, a_rho))
}

struct Diagnostics {
    eig_p: Vec<f64>,
    eig_lyap: Vec<f64>,
    jump_surface: f64,
    jump_global: f64,
}

/// Orthonormal basis of `{x : c x = 0}`, the set where resets happen.
fn reset_surface(c: &RowDVector<f64>) -> DMatrix<f64> {
    let n = c.len();
    let norm = c.norm();
    if norm == 0.0 {
        return DMatrix::identity(n, n);
    }
    let u = c.transpose() / norm;
    let proj = DMatrix::identity(n, n) - &u * u.transpose();
    let eig = SymmetricEigen::new(proj);
    let cols: Vec<_> = (0..n)
        .filter(|&i| eig.eigenvalues[i] > 0.5)
        .map(|i| eig.eigenvectors.column(i).clone_owned())
        .collect();
    DMatrix::from_columns(&cols)
}

fn diagnostics(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    a_rho: &DMatrix<f64>,
    c: &RowDVector<f64>,
) -> Diagnostics {
    let jump = a_rho.transpose() * p * a_rho - p;
    let on_surface = |m: &DMatrix<f64>| {
        let basis = reset_surface(c);
        sym_eigenvalues(&(basis.transpose() * m * &basis))
            .last()
            .copied()
            .unwrap_or(0.0)
    };
    Diagnostics {
        eig_p: sym_eigenvalues(p),
        eig_lyap: sym_eigenvalues(&(a.transpose() * p + p * a)),
        jump_surface: on_surface(&jump),
        jump_global: sym_eigenvalues(&jump).last().copied().unwrap_or(0.0),
    }
}

fn equality_residual(cert: &StabilityCertificate) -> Option<f64> {
    if cert.reset.is_empty() {
        return None;
    }
    let mut worst = 0.0_f64;
    for (a, &r) in cert.reset.iter().enumerate() {
        for &j in &cert.nonreset {
            worst = worst.max((cert.p[(r, j)] - cert.beta[a] * cert.c_nrp[j]).abs());
        }
        for (b, &q) in cert.reset.iter().enumerate() {
            worst = worst.max((cert.p[(r, q)] - cert.p_rho[(a, b)]).abs());
        }
    }
    Some(worst / spectral_norm(&cert.p).max(1e-300))
}

impl StabilityCertificate {
    /// Wraps a caller-supplied `P` (original coordinates, no scaling) so it
    /// can be checked with [`verify_certificate`].
    pub fn from_parts(
        clm: &ClosedLoopMats,
        p: DMatrix<f64>,
        beta: DVector<f64>,
        p_rho: DMatrix<f64>,
    ) -> Result<Self> {
        let n = clm.order();
        Self::assemble(
            clm,
            p,
            beta,
            p_rho,
            DMatrix::identity(n, n),
            1.0,
            clm.reset.clone(),
            (0..n).filter(|i| !clm.reset.contains(i)).collect(),
            CertificateMethod::External,
        )
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn assemble(
        clm: &ClosedLoopMats,
        p: DMatrix<f64>,
        beta: DVector<f64>,
        p_rho: DMatrix<f64>,
        transform: DMatrix<f64>,
        scale: f64,
        reset: Vec<usize>,
        nonreset: Vec<usize>,
        method: CertificateMethod,
    ) -> Result<Self> {
        let n = clm.order();
        if p.shape() != (n, n)
            || beta.len() != reset.len()
            || p_rho.shape() != (reset.len(), reset.len())
        {
            return Err(CroneError::Dimension(
                "certificate parts do not match the closed loop".into(),
            ));
        }
        let c_nrp = &clm.c_nrp * &transform;
        let mut cert = Self {
            p: symmetrize(&p),
            beta,
            p_rho,
            transform,
            scale,
            reset,
            nonreset,
            c_nrp,
            method,
            eig_p: Vec::new(),
            eig_lyap: Vec::new(),
            equality_residual: None,
            jump_residual: 0.0,
            jump_residual_global: 0.0,
        };
        cert.refresh(clm)?;
        Ok(cert)
    }

    fn refresh(&mut self, clm: &ClosedLoopMats) -> Result<()> {
        let (a, a_rho) = working_matrices(self, clm)?;
        let d = diagnostics(&self.p, &a, &a_rho, &self.c_nrp);
        self.eig_p = d.eig_p;
        self.eig_lyap = d.eig_lyap;
        self.jump_residual = d.jump_surface;
        self.jump_residual_global = d.jump_global;
        self.equality_residual = equality_residual(self);
        Ok(())
    }

    /// `P` in the original closed-loop coordinates, `T⁻ᵀ P T⁻¹`.
    pub fn p_original(&self) -> DMatrix<f64> {
        let t_inv = self
            .transform
            .clone()
            .try_inverse()
            .expect("transform is invertible");
        symmetrize(&(t_inv.transpose() * &self.p * &t_inv))
    }

    /// Certificate for the rescaled loop `S⁻¹ A_cl S`, same working
    /// coordinates.
    pub fn for_rescaled(&self, s: &DMatrix<f64>, rescaled: &ClosedLoopMats) -> Result<Self> {
        let s_inv = s
            .clone()
            .try_inverse()
            .ok_or_else(|| CroneError::Dimension("singular rescaling".into()))?;
        let mut cert = self.clone();
        cert.transform = s_inv * &self.transform;
        cert.c_nrp = &rescaled.c_nrp * &cert.transform;
        cert.refresh(rescaled)?;
        Ok(cert)
    }

    pub fn report(&self, verification: &Verification) -> CertificateReport {
        let rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..m.nrows())
                .map(|i| m.row(i).iter().copied().collect())
                .collect()
        };
        CertificateReport {
            coordinates: "working: x = T x_w, A_w = T^-1 A_cl T / scale",
            method: self.method,
            dims: self.p.nrows(),
            scale: self.scale,
            reset_states: self.reset.clone(),
            p: rows(&self.p),
            beta: self.beta.iter().copied().collect(),
            p_rho: rows(&self.p_rho),
            transform: rows(&self.transform),
            eig_p: self.eig_p.clone(),
            eig_lyap: self.eig_lyap.clone(),
            equality_residual: self.equality_residual,
            jump_residual: self.jump_residual,
            jump_residual_global: self.jump_residual_global,
            verification: verification.clone(),
        }
    }
}

/// Self-describing export of a certificate (matrices row-major).
#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub coordinates: &'static str,
    pub method: CertificateMethod,
    pub dims: usize,
    pub scale: f64,
    pub reset_states: Vec<usize>,
    pub p: Vec<Vec<f64>>,
    pub beta: Vec<f64>,
    pub p_rho: Vec<Vec<f64>>,
    pub transform: Vec<Vec<f64>>,
    pub eig_p: Vec<f64>,
    pub eig_lyap: Vec<f64>,
    pub equality_residual: Option<f64>,
    pub jump_residual: f64,
    pub jump_residual_global: f64,
    pub verification: Verification,
}

/// Checks `P ≻ 0`, `AᵀP + PA ≺ 0` with margin, `B₀ᵀP = C₀(β, P_ρ)` and
/// `A_ρᵀ P A_ρ - P ⪯ 0` on the reset surface, all relative to `‖P‖`, in
/// working coordinates.
pub fn verify_certificate(
    cert: &StabilityCertificate,
    clm: &ClosedLoopMats,
    tol: f64,
) -> Result<Verification> {
    let (a, a_rho) = working_matrices(cert, clm)?;
    let p = &cert.p;
    let norm = spectral_norm(p).max(1e-300);
    let d = diagnostics(p, &a, &a_rho, &cert.c_nrp);
    let min_eig_p = d.eig_p.first().copied().unwrap_or(0.0);
    let lyapunov_margin = -d.eig_lyap.last().copied().unwrap_or(0.0) / norm;
    let equality_residual = equality_residual(cert);
    let jump_residual = d.jump_surface / norm;
    Ok(Verification {
        tol,
        positive_definite: min_eig_p > tol * norm,
        lyapunov_decrease: lyapunov_margin >= tol,
        equality: equality_residual.is_none_or(|r| r < tol),
        jump: jump_residual <= tol,
        min_eig_p,
        lyapunov_margin,
        equality_residual,
        jump_residual,
    })
}
