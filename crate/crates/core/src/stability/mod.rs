//! Quadratic stability of reset control loops via a restricted Lyapunov
//! problem.

mod certificate;
mod closed_loop;
mod solver;

pub use certificate::{
    verify_certificate, working_matrices, CertificateMethod, CertificateReport,
    StabilityCertificate, Verification,
};
pub use closed_loop::{build_closed_loop, ClosedLoopMats};
pub use solver::{
    check_quadratic_stability, InfeasibleReason, InfeasibleReport, SolverOptions, StabilityOutcome,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::lti::{pade_delay, tf_to_ss, RationalTf};
use crate::reset::ResetStateSpace;
use crate::synthesis::CroneController;

/// How the plant's transport delay enters the state-space loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayModel {
    #[default]
    Ignore,
    Pade1,
    Pade2,
}

/// Closed loop of a synthesized controller with `plant`.
pub fn closed_loop_for(
    controller: &CroneController,
    plant: &RationalTf,
    delay: DelayModel,
) -> Result<ClosedLoopMats> {
    let mut p = plant.without_delay();
    if plant.delay() > 0.0 {
        match delay {
            DelayModel::Ignore => {}
            DelayModel::Pade1 => p = p.series(&pade_delay(plant.delay(), 1)?),
            DelayModel::Pade2 => p = p.series(&pade_delay(plant.delay(), 2)?),
        }
    }
    let plant_ss = tf_to_ss(&p)?;
    let star = controller
        .sigma_r_star
        .clone()
        .unwrap_or_else(|| ResetStateSpace::gain(1.0));
    build_closed_loop(&star, &controller.sigma_nr.to_ss(), &plant_ss)
}
