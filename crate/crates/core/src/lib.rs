//! Numerical laboratory for oscillator and Kepler-type systems on the
//! sphere, the pseudosphere, and flat space.
//!
//! The crate implements, over a generic scalar type:
//!
//! * ambient-space geometry of the quadric `eps x.x + x0^2 = R0^2`
//!   ([`geometry`]);
//! * the Higgs oscillator family of potentials, their deformations, and
//!   deformed Kepler relatives, with analytic gradients ([`potentials`]);
//! * RATTLE integration on the constraint surface and Stormer-Verlet in flat
//!   space ([`dynamics`]);
//! * hidden-symmetry generators (Runge-Lenz vectors, anisotropic and
//!   nonlinear invariants) and drift measurement ([`invariants`]);
//! * Levi-Civita and Kustaanheimo-Stiefel oscillator -> Kepler reductions
//!   ([`reductions`]);
//! * a config-driven experiment runner ([`cli`]).
//!
//! All numerics are generic over [`real::Real`] (`f32` or `f64`); the
//! aliases below fix the `f64` instantiations used by the CLI.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod invariants;
pub mod linalg;
pub mod potentials;
pub mod real;
pub mod reductions;

pub use error::{Error, Result};
pub use real::Real;

/// `f64` instantiations of the core types.
pub type SpaceSpec64 = geometry::SpaceSpec<f64>;
pub type AmbientPoint64 = geometry::AmbientPoint<f64>;
pub type PhasePoint64 = geometry::PhasePoint<f64>;
pub type Couplings64 = potentials::Couplings<f64>;
pub type TMatrix64 = potentials::TMatrix<f64>;
pub type PotentialTerm64 = potentials::PotentialTerm<f64>;
pub type SystemSpec64 = potentials::SystemSpec<f64>;
pub type IntegratorConfig64 = dynamics::IntegratorConfig<f64>;
pub type Trajectory64 = dynamics::Trajectory<f64>;
pub type FlatTrajectory64 = dynamics::FlatTrajectory<f64>;
pub type GeneratorSpec64 = invariants::GeneratorSpec<f64>;
pub type DriftReport64 = invariants::DriftReport<f64>;
