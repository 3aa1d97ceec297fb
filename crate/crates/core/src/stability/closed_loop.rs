use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use crate::error::{CroneError, Result};
use crate::linalg::{eigenvalues, max_real_part};
use crate::lti::StateSpace;
use crate::reset::ResetStateSpace;

/// Closed loop of `Σ*_r` with the series connection `Σ_nr · plant`, at zero
/// reference. State order is `[Σ*_r states, x_nrp]`; inside `Σ*_r` the reset
/// states are those listed in `reset`, the rest form the never-reset copy.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopMats {
    pub a_cl: DMatrix<f64>,
    /// `diag(Ā_ρ, I)`.
    pub a_rho: DMatrix<f64>,
    /// Indices of states that jump.
    pub reset: Vec<usize>,
    /// Indices of `Σ*_r` states that never jump.
    pub reset_linear: Vec<usize>,
    /// Indices of the `Σ_nr · plant` states.
    pub nrp: Vec<usize>,
    /// `C_nrp` embedded in the full state (zero outside `nrp`).
    pub c_nrp: RowDVector<f64>,
    b_in: DVector<f64>,
}

impl ClosedLoopMats {
    pub fn order(&self) -> usize {
        self.a_cl.nrows()
    }

    /// `(n_r, n_rnr, n_nrp)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.reset.len(), self.reset_linear.len(), self.nrp.len())
    }

    pub fn max_real_eig(&self) -> f64 {
        max_real_part(&self.a_cl)
    }

    /// Hurwitz test with a guard relative to the spectral radius, so that
    /// marginal (zero) eigenvalues count as unstable.
    pub fn is_hurwitz(&self) -> bool {
        let eig = eigenvalues(&self.a_cl);
        let radius = eig.iter().map(|l| l.norm()).fold(0.0_f64, f64::max);
        let max_re = eig.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
        max_re < -1e-10 * radius
    }

    /// Sensitivity `e/r` of the loop with the reset law disabled.
    pub fn base_sensitivity(&self, omega: f64) -> Complex64 {
        let n = self.order();
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let d = if i == j {
                Complex64::new(0.0, omega)
            } else {
                Complex64::new(0.0, 0.0)
            };
            d - self.a_cl[(i, j)]
        });
        let rhs = self.b_in.map(|v| Complex64::new(v, 0.0));
        match m.lu().solve(&rhs) {
            Some(x) => {
                let y: Complex64 = self.c_nrp.iter().zip(x.iter()).map(|(c, x)| x * *c).sum();
                Complex64::new(1.0, 0.0) - y
            }
            None => Complex64::new(f64::INFINITY, 0.0),
        }
    }
}

/// `A_cl = [[Ā, B̄ C_nrp], [-B_nrp C̄, A_nrp - B_nrp D̄ C_nrp]]`, with the
/// `Σ*_r` state sign-flipped relative to the physical one. The `D̄` term is
/// the feedthrough of a biproper reset element.
pub fn build_closed_loop(
    sigma_star: &ResetStateSpace,
    sigma_nr: &StateSpace,
    plant: &StateSpace,
) -> Result<ClosedLoopMats> {
    let nrp = sigma_nr.series(plant);
    if nrp.d != 0.0 {
        return Err(CroneError::Dimension(
            "Sigma_nr * plant must be strictly proper (D_nrp = 0)".into(),
        ));
    }
    let nr = sigma_star.order();
    let np = nrp.order();
    if np == 0 {
        return Err(CroneError::Dimension("empty Sigma_nr * plant".into()));
    }
    let n = nr + np;
    let mut a = DMatrix::zeros(n, n);
    a.view_mut((0, 0), (nr, nr)).copy_from(&sigma_star.a);
    a.view_mut((0, nr), (nr, np))
        .copy_from(&(&sigma_star.b * &nrp.c));
    a.view_mut((nr, 0), (np, nr))
        .copy_from(&(-(&nrp.b * &sigma_star.c)));
    a.view_mut((nr, nr), (np, np))
        .copy_from(&(&nrp.a - &nrp.b * &nrp.c * sigma_star.d));

    let mut a_rho = DMatrix::identity(n, n);
    a_rho
        .view_mut((0, 0), (nr, nr))
        .copy_from(&sigma_star.a_rho);

    let reset = sigma_star.reset_indices();
    let reset_linear = (0..nr).filter(|i| !reset.contains(i)).collect();
    let mut c_nrp = RowDVector::zeros(n);
    c_nrp.columns_mut(nr, np).copy_from(&nrp.c);
    let mut b_in = DVector::zeros(n);
    b_in.rows_mut(0, nr).copy_from(&(-&sigma_star.b));
    b_in.rows_mut(nr, np).copy_from(&(&nrp.b * sigma_star.d));
    Ok(ClosedLoopMats {
        a_cl: a,
        a_rho,
        reset,
        reset_linear,
        nrp: (nr..n).collect(),
        c_nrp,
        b_in,
    })
}
