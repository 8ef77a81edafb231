//! Error type shared across the library.

/// Everything that can go wrong in kernel assembly, integration, the
/// estimator, or the PE diagnostics.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An operation received an empty collection where at least one element
    /// is required (no centers, no trajectory samples, ...).
    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    /// Two related quantities disagree in length or shape.
    #[error("dimension mismatch: {context} (expected {expected}, got {got})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A scalar parameter is outside its admissible range.
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// NaN or infinity where a finite value is required.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// The system matrix has an eigenvalue with nonnegative real part, so no
    /// positive definite Lyapunov solution exists.
    #[error("matrix is not Hurwitz: eigenvalue with real part {real_part:.6e}")]
    NotHurwitz { real_part: f64 },

    /// A factorization failed; the matrix is singular or indefinite beyond
    /// what jitter can absorb.
    #[error("linear algebra failure: {0}")]
    Singular(&'static str),

    /// The state norm crossed the blow-up guard during integration.
    #[error("trajectory diverged at t = {t:.6}: |x| = {norm:.3e}")]
    Divergence { t: f64, norm: f64 },

    /// A requested time window is not contained in the trajectory span.
    #[error("window [{start:.6}, {end:.6}] outside trajectory span [{t0:.6}, {t1:.6}]")]
    WindowOutOfRange {
        start: f64,
        end: f64,
        t0: f64,
        t1: f64,
    },

    /// The transient cutoff left no samples to work with.
    #[error("no trajectory samples at or after t = {t_cut:.6}")]
    EmptyTail { t_cut: f64 },

    /// An iterative scheme (Bessel series, continued fraction) did not
    /// converge within its iteration budget.
    #[error("no convergence in {0}")]
    NoConvergence(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;
