use thiserror::Error;

/// Errors raised by the numerical routines in this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("order mismatch: expected {expected}, got {found}")]
    OrderMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite entry in {what}")]
    NonFinite { what: &'static str },

    #[error("matrix is numerically singular (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("gauge field is singular at {point:?} (condition estimate {condition:.3e})")]
    GaugeSingular { point: Vec<f64>, condition: f64 },

    #[error("spectrum touches the principal-log branch cut (eigenvalue {re:.6e}{im:+.6e}i); shrink the loop")]
    BranchCut { re: f64, im: f64 },

    #[error("point {point:?} lies outside the domain: {reason}")]
    Domain { point: Vec<f64>, reason: String },

    #[error("transported state became non-finite at t = {t}")]
    BlowUp { t: f64 },

    #[error("loop is not closed: endpoints differ by {gap:.3e}")]
    NotClosed { gap: f64 },

    #[error("holonomy sampling failed after {retries} side halvings: {reason}; use a smaller max side")]
    Sampling { retries: usize, reason: String },

    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
