//! Equilibria and stability of a current-carrying elastic rod whirling in
//! a uniform magnetic field.
//!
//! A clamped-clamped Cosserat rod carries a current along its centerline
//! while a magnetic field B e_3 acts along the line joining the clamps.
//! In a frame co-rotating with rate omega about e_3, relative equilibria
//! satisfy an 18-dimensional nonlinear boundary value problem for the
//! centerline x, internal force F, internal moment M, and the director
//! frame d_1, d_2, d_3. Linearizing the dynamic equations about such an
//! equilibrium and substituting a normal mode e^(lambda t) yields a
//! 12-dimensional linear boundary value problem whose solvability
//! condition picks out the stability eigenvalues lambda.
//!
//! The crate provides
//!   - the stationary system and its solution measures ([`stationary`]),
//!   - the linearized system and composite eigenvalue extensions
//!     ([`linearized`]),
//!   - closed-form and finite-difference reference values for the straight
//!     state ([`oracles`]),
//!   - eigenvalue initialization and tracking along equilibrium branches
//!     ([`eigen`]),
//!   - bifurcation diagram assembly ([`branches`]),
//!   - two-parameter stability boundary tracing ([`codim2`]).

pub mod branches;
pub mod codim2;
pub mod eigen;
pub mod linearized;
pub mod model;
pub mod oracles;
pub mod stationary;

pub use model::{DimensionalParams, RodParams};
pub use stationary::{
    measure1, measure2, orthonormality_defect, trivial_solution, Stationary, PARAM_B,
    PARAM_OMEGA, PARAM_TENSION,
};

/// Errors raised by the rod model layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameters: {why}")]
    InvalidParameters { why: String },
    #[error(
        "degenerate damping: lambda*gamma = {lambda_gamma} makes the \
         constitutive relation non-invertible"
    )]
    DegenerateDamping { lambda_gamma: f64 },
    #[error(transparent)]
    Solver(#[from] magrod_bvp::Error),
    #[error("scan found no {what} in ({lo}, {hi})")]
    NothingFound { what: &'static str, lo: f64, hi: f64 },
    #[error("mode {mode} lost while tracking at parameter {at}: {why}")]
    ModeLost { mode: usize, at: f64, why: String },
}

pub type Result<T> = std::result::Result<T, Error>;
