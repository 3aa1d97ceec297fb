//! Linear time-invariant building blocks: transfer functions, state-space
//! models, frequency responses and fractional-order approximations.

mod cascade;
mod fractional;
pub mod poly;
mod response;
mod ss;
mod tf;

pub use cascade::{Cascade, Section};
pub use fractional::{
    fit_error, fractional_lag_lead, fractional_lag_lead_fr, lag_lead_power_sections,
    oustaloup_approx, oustaloup_cells, oustaloup_sections, pade_delay, OUSTALOUP_MAG_TOL_DB,
    OUSTALOUP_PHASE_TOL_DEG,
};
pub use response::{logspace, unwrap, FrequencyResponse};
pub use ss::{ss_to_tf, tf_to_ss, StateSpace};
pub use tf::RationalTf;
