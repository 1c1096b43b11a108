//! fraclab: a desk-scale numerical laboratory for linear time-fractional
//! advection-diffusion-reaction problems
//!
//!   ∂_t u - ∇·(κ∇∂_t^{1-α} - F ∂_t^{1-α} - G) u + (a ∂_t^{1-α} + b) u = g
//!
//! on Ω = (0,1) with homogeneous Dirichlet conditions, worked through the
//! time-integrated weak form so that every memory term is a fractional
//! integral of the trajectory.
//!
//! Module map:
//! - [`fractops`]: ω_μ weights, graded meshes, product-integration fractional
//!   integrals, Riemann-Liouville derivatives, Mittag-Leffler evaluation.
//! - [`identities`]: exact commutator coefficient families for ∂_t^q M^m,
//!   I^μ M^m and mechanical identity verification on monomials.
//! - [`quadfunc`]: quadratic functionals Q₁^μ, Q₂^μ, memory operators B^μ_ψ,
//!   numerical inequality checkers and the fractional Gronwall bound.
//! - [`femcore`]: P1 finite elements, assembled matrices, Ḣ^μ norms via the
//!   generalized eigenproblem.
//! - [`solver`]: implicit product-integration time stepping of the weak form,
//!   a spectral separable-solution oracle, trajectory post-processing.
//! - [`regverify`]: log-log rate fitting against predicted regularity
//!   exponents.

pub mod error;
pub mod femcore;
pub mod fractops;
pub mod identities;
pub mod quadfunc;
pub mod regverify;
pub mod solver;

pub use error::{Error, Result};
