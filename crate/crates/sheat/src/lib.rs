//! Numerical laboratory for the stochastic heat equation
//!
//!   du = (Δu + f) dt + g dw_t   on (0,T) × D,
//!   u = b on the lateral boundary,  u(0,·) = u₀,
//!
//! posed on a planar polygonal (Lipschitz) domain D. The library builds the
//! mild solution u = v₁ + v₂ + v₃ + h from its four constituents — heat flow
//! of the initial data, a deterministic Duhamel term, a stochastic
//! convolution, and a boundary correction solved as a deterministic
//! initial-boundary value problem — and then measures the function-space
//! quantities (Besov, anisotropic space-time, weighted and boundary norms)
//! that control it. The `bounds` and `harness` modules turn those
//! measurements into reproducible checks: operator-constant sweeps, scaling
//! identities, Itô isometry diagnostics, and a main-estimate experiment whose
//! measured constants should sit still under grid refinement.
//!
//! Everything is deterministic given a base seed: Brownian drivers are
//! counter-seeded per sample, ensembles reduce in sample order, and grid
//! operators are pure functions of the grid parameters.

pub mod bounds;
pub mod fft;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod ibvp;
pub mod kernels;
pub mod lp;
pub mod mild;
pub mod numerics;
pub mod spaces;
pub mod stochastic;

/// Errors surfaced by operations with caller-checkable preconditions.
/// Internal invariant violations panic instead.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("mismatched operands: {0}")]
    Mismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
