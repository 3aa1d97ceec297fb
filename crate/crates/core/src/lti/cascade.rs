//! Controllers kept as a product of low-order factors. Realizing each factor
//! separately and chaining them keeps the state-space model well scaled,
//! which the multiplied-out polynomial form (coefficients spanning 20+
//! decades for a CRONE controller) does not.

use nalgebra::{DMatrix, DVector, RowDVector};
use num_complex::Complex64;
use serde::Serialize;

use super::ss::StateSpace;
use super::tf::RationalTf;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Section {
    Gain {
        k: f64,
    },
    /// `(1 + s/zero) / (1 + s/pole)`
    LeadLag {
        zero: f64,
        pole: f64,
    },
    /// `1 / (1 + s/corner)`
    LowPass {
        corner: f64,
    },
    /// `1 + corner/s`
    PiIntegrator {
        corner: f64,
    },
    /// `corner/s`
    Integrator {
        corner: f64,
    },
}

impl Section {
    pub fn eval(&self, omega: f64) -> Complex64 {
        let s = Complex64::new(0.0, omega);
        match *self {
            Section::Gain { k } => Complex64::new(k, 0.0),
            Section::LeadLag { zero, pole } => (1.0 + s / zero) / (1.0 + s / pole),
            Section::LowPass { corner } => 1.0 / (1.0 + s / corner),
            Section::PiIntegrator { corner } => 1.0 + corner / s,
            Section::Integrator { corner } => corner / s,
        }
    }

    pub fn to_tf(&self) -> RationalTf {
        let (num, den) = match *self {
            Section::Gain { k } => (vec![k], vec![1.0]),
            Section::LeadLag { zero, pole } => (vec![1.0 / zero, 1.0], vec![1.0 / pole, 1.0]),
            Section::LowPass { corner } => (vec![1.0], vec![1.0 / corner, 1.0]),
            Section::PiIntegrator { corner } => (vec![1.0, corner], vec![1.0, 0.0]),
            Section::Integrator { corner } => (vec![corner], vec![1.0, 0.0]),
        };
        RationalTf::new(num, den).expect("section coefficients are finite")
    }

    pub fn to_ss(&self) -> StateSpace {
        let one = |a: f64, b: f64, c: f64, d: f64| StateSpace {
            a: DMatrix::from_element(1, 1, a),
            b: DVector::from_element(1, b),
            c: RowDVector::from_element(1, c),
            d,
        };
        match *self {
            Section::Gain { k } => StateSpace::gain(k),
            // p/z + p(z - p)/(z (s + p))
            Section::LeadLag { zero, pole } => one(-pole, pole, (zero - pole) / zero, pole / zero),
            Section::LowPass { corner } => one(-corner, corner, 1.0, 0.0),
            Section::PiIntegrator { corner } => one(0.0, corner, 1.0, 1.0),
            Section::Integrator { corner } => one(0.0, corner, 1.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Cascade {
    pub sections: Vec<Section>,
}

impl Cascade {
    pub fn new(sections: Vec<Section>) -> Self {
        Self { sections }
    }

    pub fn push(&mut self, s: Section) {
        self.sections.push(s);
    }

    pub fn extend(&mut self, s: impl IntoIterator<Item = Section>) {
        self.sections.extend(s);
    }

    pub fn eval(&self, omega: f64) -> Complex64 {
        self.sections
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, s| acc * s.eval(omega))
    }

    pub fn to_tf(&self) -> RationalTf {
        self.sections
            .iter()
            .fold(RationalTf::gain(1.0), |acc, s| acc.series(&s.to_tf()))
    }

    pub fn to_ss(&self) -> StateSpace {
        self.sections
            .iter()
            .fold(StateSpace::gain(1.0), |acc, s| acc.series(&s.to_ss()))
    }

    pub fn order(&self) -> usize {
        self.sections
            .iter()
            .filter(|s| !matches!(s, Section::Gain { .. }))
            .count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn realizations_agree() {
        let c = Cascade::new(vec![
            Section::Gain { k: 3.0 },
            Section::PiIntegrator { corner: 50.0 },
            Section::LeadLag {
                zero: 80.0,
                pole: 5000.0,
            },
            Section::LowPass { corner: 7500.0 },
            Section::Integrator { corner: 2.0 },
        ]);
        let tf = c.to_tf();
        let ss = c.to_ss();
        assert_eq!(ss.order(), 4);
        for w in [1.0, 30.0, 600.0, 1e4] {
            let e = c.eval(w);
            assert!((tf.eval(w) - e).norm() < 1e-10 * e.norm());
            assert!((ss.eval(w) - e).norm() < 1e-10 * e.norm());
        }
    }
}
