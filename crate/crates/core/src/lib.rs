//! Numerics for three vector-valued quantum modular forms on Γ₀(2) built from
//! twelve q-hypergeometric series.
//!
//! The crate is layered bottom-up:
//!
//! * [`kernel`] — K-Bessel functions, adaptive quadrature, compensated sums.
//! * [`qseries`] — exact expansions and numeric values of the series L₁…L₁₂.
//! * [`theta`] — lattices, cones, false-indefinite / mock Maass / completed
//!   theta functions and the three families F, G, H.
//! * [`modular`] — Γ₀(2) arithmetic, generator words, multiplier systems and
//!   the Weil representation.
//! * [`period`] — period integrals u_j, obstructions 𝒰, quantum values and
//!   the transformation-law verifiers.
//! * [`reference`] — published reference values used by the acceptance runs.

use num_complex::Complex64;

pub mod kernel;
pub mod modular;
pub mod period;
pub mod qseries;
pub mod reference;
pub mod theta;

/// Errors raised anywhere in the library.
#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Adaptive quadrature hit its refinement cap before meeting the target.
    #[error("quadrature did not converge: error estimate {error_estimate:e} after {evaluations} evaluations")]
    Quadrature {
        /// Best available estimate, componentwise.
        best: Vec<Complex64>,
        error_estimate: f64,
        evaluations: usize,
    },

    /// An iterative procedure (series tail, stabilisation) did not settle.
    #[error("no convergence: {0}")]
    Convergence(String),

    /// The rational is not a cusp of Γ₀(2) (odd denominator).
    #[error("{0} is not in the cusp set of Γ₀(2) (denominator must be even)")]
    NotInCuspSet(String),

    /// The point is too close to the real line and to no usable cusp anchor.
    #[error("no cusp anchor: {0}")]
    NoCuspAnchor(String),

    /// A computation would need more memory or lattice points than allowed.
    #[error("resource limit: {0}")]
    Resource(String),

    /// Internal consistency check failed; indicates a bug.
    #[error("internal inconsistency: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn quadrature<V: kernel::QuadValue>(best: V, error_estimate: f64, evaluations: usize) -> Self {
        Error::Quadrature { best: best.components(), error_estimate, evaluations }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub use kernel::{QuadratureResult, Tolerance};
pub use modular::{CuspRational, Gamma02Element, MultiplierMatrix};
pub use qseries::{FormalSeries, SeriesId};
pub use theta::{Family, FamilySpec};

/// Guide chapters compiled as doc-tests so their snippets stay runnable.
#[cfg(doctest)]
pub mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/qseries.md")]
    pub mod qseries {}
    #[doc = include_str!("../../../book/src/theta.md")]
    pub mod theta {}
    #[doc = include_str!("../../../book/src/modular.md")]
    pub mod modular {}
    #[doc = include_str!("../../../book/src/periods.md")]
    pub mod periods {}
    #[doc = include_str!("../../../book/src/numerics.md")]
    pub mod numerics {}
}
