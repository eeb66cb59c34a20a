use thiserror::Error;

/// A bracketed root search found no sign change.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("no sign change on [{lo:e}, {hi:e}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
pub struct BracketError {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("state component `{0}` is not finite")]
    NonFiniteState(&'static str),
    #[error("coupling strength is zero, the modes are decoupled")]
    Uncoupled,
    #[error("no exceptional point: gamma0 = {gamma0:e} differs from gamma2 = {gamma2:e}")]
    NoExceptionalPoint { gamma0: f64, gamma2: f64 },
    #[error("drive amplitude {amp:e} is not below the instability threshold {threshold:e}; the stationary state is unstable (use force to evaluate anyway)")]
    UnstableFixedPoint { amp: f64, threshold: f64 },
    #[error("weak coupling: squared parametric frequency {omega_p_sq:e} < 0 at amplitude {amp:e}")]
    WeakCoupling { amp: f64, omega_p_sq: f64 },
    #[error(transparent)]
    Bracket(#[from] BracketError),
}
