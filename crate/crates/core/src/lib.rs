//! Strong-stability-preserving analysis of Runge–Kutta methods.
//!
//! * [`method`]: Butcher tableaux, second-order conditions and the
//!   `N = I + rA`, `M = N⁻¹`, `wᵀ = r bᵀN⁻¹` change of variables.
//! * [`ssp`]: absolute monotonicity certificates and the SSP radius.
//! * [`optimal`]: the iterated implicit midpoint family with radius `2s`.
//! * [`bounds`]: numeric checks for the pieces of the `r ≤ 2s` argument
//!   for diagonally implicit methods; [`verify`] runs them as a suite.
//! * [`search`]: random sampling and hill climbing over second-order DIRK
//!   methods.
//! * [`integrator`]: DIRK stepping on upwind advection and Burgers problems
//!   with total-variation tracking.
//!
//! Batch work (surveys, restarts, grid scans, lemma sampling) runs on rayon
//! when the `parallel` feature is enabled; see [`par::Execution`].

pub mod bounds;
pub mod error;
pub mod integrator;
pub mod linalg;
pub mod method;
pub mod optimal;
pub mod par;
pub mod search;
pub mod ssp;
pub mod verify;

pub use error::{Result, SspError};
pub use method::{RungeKuttaMethod, TransformedForm, TOL_ALG};
pub use optimal::{make_optimal, OptimalFamilyMember};
pub use ssp::{certify, ssp_radius, MonotonicityCertificate, R_CAP, TOL_BISECT, TOL_FEAS};
