//! Desk-scale calculus for discrete generalized Young measures.
//!
//! A generalized Young measure encodes the limit statistics of a sequence of
//! `Ξ`-valued functions on a compact metric space `X`: both *oscillation*
//! (which values the functions take, and how often) and *concentration*
//! (mass escaping to infinity along directions of `Ξ`). This crate makes that
//! calculus executable with finitely many atoms:
//!
//! * [`homfn`] — positively one-homogeneous test functions `f(x, ξ, η)` as a
//!   closed combinator algebra, with grid norms, Moreau–Yosida regularisation,
//!   convex splitting, and sampled classification.
//! * [`gym`] — atomic measures in homogeneous coordinates: duality pairings,
//!   the oscillation/concentration decomposition, barycentres, Jensen gaps,
//!   and finite test batteries standing in for the weak* topology.
//! * [`systems`] — time-indexed compatible systems stored as one joint master
//!   measure: marginals, variation, difference quotients, weak*-derivative
//!   estimation, and the variation–derivative integral identities.
//! * [`approx`] — constructive approximation by step functions, canonical
//!   oscillation/concentration generators, Helly-style subsequence extraction,
//!   and semicontinuity checks.
//! * [`io`] — versioned JSON file formats (`gym.v1`, `sgy.v1`, …) with
//!   decimal-string numerics, plus CSV report writers.
//! * [`acceptance`] — the end-to-end verification suite run by the `gymlab`
//!   CLI and by the integration tests.
//!
//! Everything is immutable after construction and deterministic given a seed.

pub mod acceptance;
pub mod approx;
pub mod gym;
pub mod homfn;
pub mod io;
pub mod numeric;
pub mod sample;
pub mod space;
pub mod systems;

mod book_doctests;

pub use gym::{
    Atom, Battery, DiscreteGym, DiscreteMeasure, ValidationReport, VarifoldPart, YoungPart,
};
pub use homfn::{ClassReport, DirectionGrid, HomFn, HomMap, MoreauSearch};
pub use space::SpaceModel;
pub use systems::{SystemGym, SystemOracle, TimeGrid, VariationReport};

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum GymError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("non-finite value produced by {context}")]
    NonFinite { context: String },
    #[error("invalid space model: {0}")]
    InvalidSpace(String),
    #[error("cell index {cell} out of range ({cells} cells)")]
    CellOutOfRange { cell: usize, cells: usize },
    #[error("support condition violated: atom with eta = {eta} < 0")]
    NegativeEta { eta: f64 },
    #[error("projection property violated at cell {cell}: defect {defect:e} (tolerance {tol:e})")]
    ProjectionViolation { cell: usize, defect: f64, tol: f64 },
    #[error("atom with zero direction (|xi| = eta = 0) and positive weight")]
    ZeroAtom,
    #[error("zero-mass singular entry at cell {cell}")]
    ZeroSingularMass { cell: usize },
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("time {t} outside grid range [{lo}, {hi}]")]
    TimeOutOfRange { t: f64, lo: f64, hi: f64 },
    #[error("times must be strictly increasing")]
    TimesNotIncreasing,
    #[error("second differences diverge on the sphere grid: {0}")]
    NotTwiceDifferentiable(String),
    #[error("resolution guard: finest spatial period {period:e} below 4 quadrature cells ({quantum:e})")]
    ResolutionGuard { period: f64, quantum: f64 },
    #[error("nonatomic reference measure required: {0}")]
    NonAtomicRequired(String),
    #[error("oracle inconsistency: {0}")]
    OracleInconsistency(String),
    #[error("serialization: {0}")]
    Serialization(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, GymError>;
