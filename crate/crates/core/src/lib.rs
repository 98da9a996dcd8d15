//! Sparse multi-index sets and stochastic moment matrices for stochastic
//! Galerkin finite element methods.
//!
//! The crate builds hierarchical multi-index sets (threshold-sequence,
//! total-degree and tensor-product families, isotropic and anisotropic),
//! constructs the banded univariate moment matrices of Legendre and Hermite
//! polynomials, assembles the sparse stochastic moment matrices `G^mu`
//! required by non-affine diffusion coefficients, and ships a desk-scale
//! 1D stochastic Galerkin solver for convergence experiments.
//!
//! Matrix construction is data-parallel over independent work items when the
//! `parallel` feature (default) is enabled; results are bitwise identical for
//! any worker count.

pub mod moment;
pub mod multiindex;
pub mod orthopoly;
pub mod quad;
pub mod sgfem;

mod par;

pub use multiindex::{IndexSet, IndexSetSpec, MultiIndex, SignedMultiIndex};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Invalid set specification or run configuration.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A multi-index expected to be a member of a set was not found.
    #[error("multi-index not found in set: {0}")]
    NotFound(String),
    /// A neighbour matrix required by a summed matrix is missing.
    #[error("missing neighbour matrix for weight {0}")]
    MissingWeight(String),
    /// A univariate moment matrix is too small for the requested entries.
    #[error("matrix dimension too small: {0}")]
    Dimension(String),
    /// An oracle was asked to handle an instance beyond its size guard.
    #[error("instance too large: {0}")]
    TooLarge(String),
    /// The diffusion model violates its own assumptions.
    #[error("model error: {0}")]
    Model(String),
    /// The linear solver failed to converge.
    #[error("solver failed: {0}")]
    Solver(String),
    /// Not enough data points for a fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Formats a float with 17 significant digits, the fixed width used by all
/// file outputs of this crate.
pub fn fmt_g17(x: f64) -> String {
    format!("{:.16e}", x)
}
