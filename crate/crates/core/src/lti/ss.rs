use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;

use super::poly;
use super::tf::RationalTf;
use crate::error::{CroneError, Result};

/// SISO state-space model `ẋ = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: RowDVector<f64>,
    pub d: f64,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: RowDVector<f64>, d: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n || c.len() != n {
            return Err(CroneError::Dimension(format!(
                "A {}x{}, B {}, C {}",
                a.nrows(),
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        if a.iter()
            .chain(b.iter())
            .chain(c.iter())
            .any(|v| !v.is_finite())
            || !d.is_finite()
        {
            return Err(CroneError::InvalidModel(
                "non-finite state-space entry".into(),
            ));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn gain(k: f64) -> Self {
        Self {
            a: DMatrix::zeros(0, 0),
            b: DVector::zeros(0),
            c: RowDVector::zeros(0),
            d: k,
        }
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `C (jωI − A)⁻¹ B + D`; infinite marker when `jω` is an eigenvalue.
    pub fn eval(&self, omega: f64) -> Complex64 {
        let n = self.order();
        if n == 0 {
            return Complex64::new(self.d, 0.0);
        }
        let m = DMatrix::<Complex64>::from_fn(n, n, |i, j| {
            let diag = if i == j {
                Complex64::new(0.0, omega)
            } else {
                Complex64::new(0.0, 0.0)
            };
            diag - self.a[(i, j)]
        });
        let rhs = self.b.map(|v| Complex64::new(v, 0.0));
        match m.lu().solve(&rhs) {
            Some(x) => {
                let y: Complex64 = self.c.iter().zip(x.iter()).map(|(c, x)| x * *c).sum();
                y + self.d
            }
            None => Complex64::new(f64::INFINITY, 0.0),
        }
    }

    /// `self` followed by `next`.
    pub fn series(&self, next: &StateSpace) -> StateSpace {
        let (n1, n2) = (self.order(), next.order());
        let n = n1 + n2;
        let mut a = DMatrix::zeros(n, n);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&next.a);
        a.view_mut((n1, 0), (n2, n1))
            .copy_from(&(&next.b * &self.c));
        let mut b = DVector::zeros(n);
        b.rows_mut(0, n1).copy_from(&self.b);
        b.rows_mut(n1, n2).copy_from(&(&next.b * self.d));
        let mut c = RowDVector::zeros(n);
        c.columns_mut(0, n1).copy_from(&(&self.c * next.d));
        c.columns_mut(n1, n2).copy_from(&next.c);
        StateSpace {
            a,
            b,
            c,
            d: self.d * next.d,
        }
    }

    pub fn scaled(&self, k: f64) -> StateSpace {
        StateSpace {
            b: &self.b * k,
            d: self.d * k,
            ..self.clone()
        }
    }
}

/// Controllable canonical realization of a proper, delay-free transfer function.
pub fn tf_to_ss(tf: &RationalTf) -> Result<StateSpace> {
    if tf.delay() != 0.0 {
        return Err(CroneError::DelayNotRational(tf.delay()));
    }
    let den = tf.den();
    let num = poly::trim(tf.num());
    let n = den.len() - 1;
    if num.len() > den.len() {
        return Err(CroneError::Improper {
            num: num.len() - 1,
            den: n,
        });
    }
    let lead = den[0];
    let a_coef: Vec<f64> = den.iter().map(|c| c / lead).collect();
    let mut b_coef = vec![0.0; n + 1 - num.len()];
    b_coef.extend(num.iter().map(|c| c / lead));
    let d = b_coef[0];

    let mut a = DMatrix::zeros(n, n);
    for j in 0..n {
        a[(0, j)] = -a_coef[j + 1];
    }
    for i in 1..n {
        a[(i, i - 1)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    if n > 0 {
        b[0] = 1.0;
    }
    let c = RowDVector::from_fn(n, |_, j| b_coef[j + 1] - d * a_coef[j + 1]);
    StateSpace::new(a, b, c, d)
}

/// Transfer function of a state-space model (Faddeev–LeVerrier). Fine for
/// the low orders used here; high orders lose accuracy in the coefficients.
pub fn ss_to_tf(ss: &StateSpace) -> RationalTf {
    let n = ss.order();
    let id = DMatrix::<f64>::identity(n, n);
    let mut den = vec![1.0];
    let mut num_strict = Vec::with_capacity(n);
    let mut m = id.clone();
    for k in 1..=n {
        num_strict.push((&ss.c * &m * &ss.b)[(0, 0)]);
        let am = &ss.a * &m;
        let ck = -am.trace() / k as f64;
        den.push(ck);
        m = am + &id * ck;
    }
    // num = C adj(sI - A) B + D den
    let mut num: Vec<f64> = den.iter().map(|c| c * ss.d).collect();
    for (k, v) in num_strict.iter().enumerate() {
        num[k + 1] += v;
    }
    RationalTf::new(num, den).expect("finite realization gives finite coefficients")
}
