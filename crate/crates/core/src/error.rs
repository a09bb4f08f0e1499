//! Error taxonomy for the laboratory.
//!
//! Three families matter to callers:
//!
//! * **contract violations** — bad arguments or domain-tag misuse; the caller
//!   constructed something invalid (maps to configuration errors upstream);
//! * **regime problems** — the computation ran but outside the range where
//!   the estimate being tested is meaningful (truncation tails, box exits);
//!   results must be marked out-of-regime rather than pass/fail;
//! * **numerical failures** — an iteration diverged, a quadrature refused to
//!   converge, a path blew up; these are genuine runtime failures.

use thiserror::Error;

/// All failure modes surfaced by the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A grid function was used in the wrong domain (e.g. a multiplier
    /// applied to physical-space values).
    #[error("domain tag mismatch: expected {expected} values, got {got}")]
    DomainTag {
        expected: &'static str,
        got: &'static str,
    },

    /// Two grid functions that must share a grid do not.
    #[error("grid mismatch: {context}")]
    GridMismatch { context: &'static str },

    /// A Fourier multiplier evaluated to NaN or ±∞ at a grid frequency.
    #[error("multiplier singular at grid frequency (tau={tau:.6e}, omega={omega:.6e})")]
    MultiplierSingular { tau: f64, omega: f64 },

    /// A real-valued inverse transform was demanded but the spectrum is not
    /// conjugate-symmetric.
    #[error(
        "inverse transform of non-conjugate-symmetric spectrum: \
         relative imaginary residue {residue:.3e} exceeds {tolerance:.1e}"
    )]
    SymmetryViolation { residue: f64, tolerance: f64 },

    /// A scalar argument fell outside its admissible range.
    #[error("invalid argument {name}: {message}")]
    InvalidArgument { name: &'static str, message: String },

    /// An operation's mathematical precondition does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A quadrature failed its self-consistency (node-doubling) check.
    #[error("quadrature did not converge: {context} (relative change {change:.3e})")]
    QuadratureDivergence { context: &'static str, change: f64 },

    /// The variable-coefficient iteration failed to contract.
    #[error(
        "solver diverged after {iterations} iterations \
         (relative residual history tail: {tail:?})"
    )]
    SolverDivergence { iterations: usize, tail: Vec<f64> },

    /// λ is below the validity threshold of the variable-coefficient theory.
    #[error(
        "lambda {lam:.6} below validity threshold: requires \
         lambda >= max(delta = {delta:.6}, lambda0/2 = {half_lambda0:.6})"
    )]
    LambdaBelowThreshold {
        lam: f64,
        delta: f64,
        half_lambda0: f64,
    },

    /// The computation ran outside the regime in which the tested estimate
    /// is meaningful.
    #[error("out of regime: {0}")]
    Regime(String),

    /// A simulated path left the admissible range.
    #[error("path blow-up at step {step}: |x| = {value:.3e} exceeds {limit:.1e}")]
    PathBlowUp { step: usize, value: f64, limit: f64 },

    /// An internal consistency check failed; indicates a bug.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    /// Filesystem/reporting failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Convenience constructor for [`Error::InvalidArgument`].
    pub fn invalid(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            message: message.into(),
        }
    }
}
