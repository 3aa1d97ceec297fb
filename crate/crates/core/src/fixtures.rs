//! Reference design data: the reference CRONE-1 lag controller, the identified
//! Lorentz-stage plant, and the printed numeric controllers.

use serde::{Deserialize, Serialize};

use crate::lti::RationalTf;
use crate::reset::ResetTuning;
use crate::synthesis::CroneSpec;

/// Plant gain.
pub const PLANT_GAIN: f64 = 0.5474;
/// Moving mass coefficient of `s²` in the plant denominator.
pub const PLANT_MASS: f64 = 0.5718;
pub const PLANT_DAMPING: f64 = 0.95;
pub const PLANT_STIFFNESS: f64 = 146.3;
/// Transport delay, seconds (five samples at 20 kHz).
pub const PLANT_DELAY: f64 = 2.5e-4;
/// Controller sample time, seconds.
pub const SAMPLE_TIME: f64 = 5e-5;

/// How the middle denominator term of the identified plant is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantReading {
    /// `0.5718 s² + 0.95 s + 146.3`
    #[default]
    Damping,
    /// `0.5718 s² + (0.95 + 146.3)`, the formula taken literally.
    Printed,
}

pub fn lorentz_plant(reading: PlantReading, with_delay: bool) -> RationalTf {
    let den = match reading {
        PlantReading::Damping => vec![PLANT_MASS, PLANT_DAMPING, PLANT_STIFFNESS],
        PlantReading::Printed => vec![PLANT_MASS, 0.0, PLANT_DAMPING + PLANT_STIFFNESS],
    };
    let delay = if with_delay { PLANT_DELAY } else { 0.0 };
    RationalTf::with_delay(vec![PLANT_GAIN], den, delay).expect("fixed plant coefficients")
}

pub fn reference_spec() -> CroneSpec {
    CroneSpec::from_hz(55.0, 100.0, 12.5, 800.0, 8.33, 1200.0, 1, 1)
        .expect("reference spec is valid")
}

pub fn reference_tuning() -> ResetTuning {
    ResetTuning { gamma: 0.5, p: 0.5 }
}

/// Printed reset lag `(78.54 s + 3.948e5)/(5027 s + 3.948e5)`.
pub fn printed_sigma_r() -> RationalTf {
    RationalTf::new(vec![78.54, 3.948e5], vec![5027.0, 3.948e5]).expect("printed coefficients")
}

/// Printed non-reset part of the reference lag design (6th order).
pub fn printed_sigma_nr() -> RationalTf {
    RationalTf::new(
        vec![2.387e10, 4.589e13, 2.351e16, 4.084e18, 2.618e20, 5.553e21],
        vec![0.0285, 530.6, 3.267e6, 7.426e9, 5.722e12, 1.175e15, 0.0],
    )
    .expect("printed coefficients")
}
