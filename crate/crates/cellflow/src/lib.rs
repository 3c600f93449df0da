//! cellflow: inertial particles in steady forced cellular flows.
//!
//! The pipeline: a weakly forced cellular Hamiltonian flow carries heavy inertial
//! particles (`inertial`); to first order in the particle response time ε the
//! motion collapses onto a planar slow-manifold field (`hamflow`, `inertial`);
//! trajectories crossing a vertical channel induce a first-return circle map with
//! flat spots (`poincare`); its rotation number, computed with rational
//! certificates (`circlemap`), yields the asymptotic drift slope of the particle,
//! which traces a devil's staircase over the forcing ratio (`sweep`).

pub mod circlemap;
pub mod cli;
pub mod error;
pub mod hamflow;
pub mod inertial;
pub mod ode;
pub mod poincare;
pub mod svg;
pub mod sweep;

pub use error::{CellflowError, Result};
pub use hamflow::ForcingParams;
