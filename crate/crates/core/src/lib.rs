//! CRONE and CRONE-reset control: fractional-order loop shaping, reset
//! elements and their describing functions, quadratic stability
//! certificates, sampled closed-loop simulation and swept-sine
//! identification.

pub mod error;
pub mod experiments;
pub mod fixtures;
pub mod linalg;
pub mod lti;
pub mod reset;
pub mod sim;
pub mod stability;
pub mod synthesis;
pub mod sysid;

pub use error::{CroneError, Result};
pub use lti::{Cascade, FrequencyResponse, RationalTf, Section, StateSpace};
pub use nalgebra;
pub use num_complex::Complex64;
pub use reset::{ResetStateSpace, ResetTuning};
pub use sim::{SimConfig, SimTrace, TrajectoryLimits};
pub use stability::{StabilityCertificate, StabilityOutcome};
pub use synthesis::{CroneController, CroneSpec, Strategy};
pub use sysid::{IdentifiedResponse, SweepConfig};
