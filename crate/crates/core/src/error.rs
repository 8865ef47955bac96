use alloc::string::String;

/// Errors raised by the physics routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("characteristic exponent undefined: a + q^2/2 = {0:e} <= 0")]
    Domain(f64),

    #[error("equilibrium solver did not converge (residual {residual:e})")]
    NonConvergence { residual: f64 },

    #[error("linear chain unstable: mode {mode} has squared frequency {omega_sq:e} rad^2/s^2")]
    Unstable { mode: usize, omega_sq: f64 },

    #[error("regime violation: {what} margin {margin:.4} exceeds {limit}")]
    RegimeViolation { what: &'static str, margin: f64, limit: f64 },

    #[error("detuning is resonant with mode {mode}")]
    Resonance { mode: usize },

    #[error("two-mode commensurability cannot be met on the axial branch")]
    AxialTwoMode,

    #[error("pulse train infeasible: {0}")]
    Infeasible(String),

    #[error("Fock cutoff {cutoff} too small: top-level population {population:e}")]
    CutoffTooSmall { cutoff: usize, population: f64 },

    #[error("thermal truncation keeps only {weight:.6} of the population")]
    Truncation { weight: f64 },

    #[error("integrator step size underflow at t = {t:e} s")]
    StepSizeUnderflow { t: f64 },

    #[error("empty sweep range")]
    EmptyRange,
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
