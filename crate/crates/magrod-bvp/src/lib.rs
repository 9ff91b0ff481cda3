//! Orthogonal-collocation solver for nonlinear two-point boundary value
//! problems on [0,1], with pseudo-arclength continuation.
//!
//! A system of n first-order ODEs u'(s) = f(s, u, p) with n_bc boundary
//! conditions g(u(0), u(1), p) = 0 is discretized by piecewise polynomials
//! of degree m on N mesh intervals, collocated at the m Gauss-Legendre
//! points of each interval. Scalar constraints (integral functionals or
//! linear hyperplanes) may be appended, each paired with one released
//! entry of the parameter vector p, so that the discrete system stays
//! square:
//!
//!   n*m*N collocation rows + n_bc + n_constraints
//!     = n*(m*N + 1) point unknowns + n_free parameters.
//!
//! The Jacobian of this system is banded (collocation rows couple only the
//! m+1 base points of one interval) with a dense border (boundary and
//! constraint rows, parameter columns). A specialized LU factorization
//! eliminates the band left to right, defers structurally pivotless
//! columns to a small dense endgame, and tracks the determinant sign and
//! log-magnitude, which drive bifurcation detection during continuation.

pub mod collocation;
pub mod continuation;
pub mod linalg;
pub mod mesh;
pub mod newton;
pub mod system;

pub use collocation::{factor_at, residual_norm};
pub use continuation::{
    switch_branch, Branch, BranchPoint, Continuation, ContinuationOpts, Event, EventKind, Monitor,
    ProblemSpec, StepOpts, StopReason,
};
pub use linalg::{near_null_space, BandedBordered, Factored};
pub use mesh::Mesh;
pub use newton::{solve_newton, NewtonOpts, NewtonReport};
pub use system::{BvpSystem, Constraint, Problem, Solution};

/// Errors shared by the solver layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mesh must have at least {min_intervals} intervals and degree in 2..=7, got {intervals} x {degree}")]
    InvalidMesh {
        intervals: usize,
        degree: usize,
        min_intervals: usize,
    },
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error(
        "ill-posed problem: {n_bc} boundary conditions + {n_constraints} constraints \
         must equal dimension {dim} + {n_free} free parameters"
    )]
    IllPosed {
        n_bc: usize,
        n_constraints: usize,
        dim: usize,
        n_free: usize,
    },
    #[error("Jacobian numerically singular during {stage} (pivot {pivot:.3e})")]
    Singular { stage: &'static str, pivot: f64 },
    #[error("Newton diverged after {iterations} iterations, residual {residual:.3e}, history {history:?}")]
    Diverged {
        iterations: usize,
        residual: f64,
        history: Vec<f64>,
    },
    #[error("null space dimension exceeds {max} at branch point (found at least {found})")]
    UnsupportedDegeneracy { max: usize, found: usize },
    #[error("event refinement failed to bracket: {why}")]
    EventRefinement { why: String },
    #[error("continuation could not start: {why}")]
    BadStart { why: String },
}

pub type Result<T> = std::result::Result<T, Error>;
