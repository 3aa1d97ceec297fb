use thiserror::Error;

/// Errors produced by the synthesis, analysis and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CroneError {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("transfer function is improper (numerator degree {num} > denominator degree {den})")]
    Improper { num: usize, den: usize },

    #[error(
        "transfer function has a transport delay of {0} s; rationalize it with pade_delay first"
    )]
    DelayNotRational(f64),

    #[error(
        "Oustaloup fit exceeds tolerance at {worst_freq:.4} rad/s \
         (magnitude error {mag_err_db:.3} dB, phase error {phase_err_deg:.3} deg)"
    )]
    OustaloupTolerance {
        worst_freq: f64,
        mag_err_db: f64,
        phase_err_deg: f64,
    },

    #[error("matrix {matrix} is singular at w = {omega} rad/s")]
    SingularMatrix { matrix: &'static str, omega: f64 },

    #[error("fractional order nu = {nu:.4} is outside [0, 1]; retune the corner frequencies")]
    NuOutOfRange { nu: f64 },

    #[error("reset phase {phi_r_deg:.3} deg drives nu* = {nu_star:.4} below zero")]
    NuStarNegative { nu_star: f64, phi_r_deg: f64 },

    #[error("plant phase at crossover is {phase_deg:.3} deg (< -180 deg); CRONE-1 design is not applicable")]
    PlantPhaseBelowLimit { phase_deg: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("simulation diverged at sample {index} (|y| = {value:e})")]
    Diverged { index: usize, value: f64 },

    #[error("delay {delay} s is not an integer number of samples of {dt} s")]
    FractionalDelay { delay: f64, dt: f64 },

    #[error("trajectory limits infeasible within period {period} s; minimal feasible period is {min_period} s")]
    TrajectoryInfeasible { period: f64, min_period: f64 },
}

pub type Result<T> = std::result::Result<T, CroneError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> CroneError {
    CroneError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
