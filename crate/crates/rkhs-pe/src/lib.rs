//! Adaptive estimation of unknown ODE right-hand sides in reproducing-kernel
//! subspaces, with numerical persistence-of-excitation (PE) analysis.
//!
//! The crate has three layers:
//!
//! * [`kernels`] — radial kernels (Matérn, Gaussian, user-supplied profiles),
//!   Gram matrices, and functions expressed in a finite span of kernel
//!   sections, including native-norm evaluation.
//! * [`dynamics`] — example vector fields with known/unknown decompositions,
//!   a fixed-step RK4 integrator with blow-up guard, and orbit tooling:
//!   limit-set extraction by spacing or farthest-point sampling, and period
//!   estimation from tail recurrence.
//! * [`estimator`] / [`persistence`] — the adaptive estimator (Lyapunov
//!   solve, coupled plant/estimator/learning-law integration, error fields)
//!   and the PE diagnostics (windowed Gram integrals in the subspace metric,
//!   sharp per-window constants from a generalized eigenvalue pencil,
//!   visitation measures, limit-set membership checks).
//!
//! The central empirical question the two layers answer together: centers
//! placed inside the positive limit set of an orbit are persistently excited
//! by it, and then the estimator's function estimate converges on the limit
//! set; centers placed away from the limit set collapse the excitation
//! constants by many orders of magnitude.

pub mod dynamics;
pub mod error;
pub mod estimator;
pub mod kernels;
pub mod linalg;
pub mod persistence;

pub use error::{Error, Result};
pub use kernels::{Family, FiniteSpanFunction, GramMatrix, Kernel};

// Keep the book's code listings honest: each chapter's fenced Rust blocks
// compile and run as doc-tests of this crate.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(kernels, "../../../book/src/kernels.md");
    chapter!(dynamics, "../../../book/src/dynamics.md");
    chapter!(estimator, "../../../book/src/estimator.md");
    chapter!(persistence, "../../../book/src/persistence.md");
    chapter!(cli, "../../../book/src/cli.md");
}
