use num_complex::Complex64;

/// Errors surfaced by the numerical kernels and model backends.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("vectors belong to different spaces")]
    SpaceMismatch,

    /// A direct or iterative solve did not reach the requested residual.
    #[error("linear solve failed: residual {residual:.3e}{}", shift_suffix(.shift))]
    SolverFailure {
        residual: f64,
        shift: Option<Complex64>,
    },

    #[error("polynomial is zero after trimming negligible coefficients")]
    DegeneratePolynomial,

    #[error("expansion center coincides with the pole at {pole}")]
    PoleAtCenter { pole: f64 },

    /// Evaluation point too close to a denominator root.
    #[error("evaluation point is numerically a pole (denominator magnitude {qmag:.3e})")]
    NearPole { qmag: f64 },

    /// The Gramian sum over Taylor orders M+1..=E is empty.
    #[error("empty Gramian sum: E = {e} does not exceed M = {m}")]
    EmptyGramianSum { m: usize, e: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn shift_suffix(shift: &Option<Complex64>) -> String {
    match shift {
        Some(z) => format!(" at shift {z}"),
        None => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
