//! Solvers for age-structured population models.
//!
//! The crate integrates three families of models along characteristics on a
//! uniform age grid with the time step locked to the age step:
//!
//! * an SIR epidemic with infection age ([`sir`]),
//! * a within-host HIV model with infection age ([`hiv`]),
//! * a general nonlinear system with up to three components ([`general`]).
//!
//! Around the solvers sit tools that make the qualitative theory of these
//! models checkable on discrete trajectories: characteristic roots and
//! conserved functionals ([`spectral`]), monotone iteration and comparison
//! of sub- and supersolutions ([`comparison`]), invariant sub-regions
//! ([`invariance`]), and a JSON scenario runner ([`scenario`]).

pub mod agefn;
pub mod comparison;
pub mod discretization;
pub mod error;
pub mod general;
pub mod hiv;
pub mod invariance;
pub mod linalg;
pub mod operator;
pub mod scenario;
pub mod sir;
pub mod spectral;
pub mod trajectory;

pub use discretization::{integrate, le, make_grid, AgeGrid, AgeProfile, MatrixKernel};
pub use error::{Error, Result};
pub use trajectory::{CharacteristicModel, Diagnostics, ModelState, Trajectory};
