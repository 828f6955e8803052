//! Numerical laboratory for globally coupled Anosov maps on the 2-torus.
//!
//! The state is a cell-averaged probability density ([`torus::TorusDensity`]).
//! One step of the self-consistent dynamics pushes it through the coupled map
//! `T ∘ Φ_h^ε`, where the interaction `Φ` depends on the current state. A finite
//! particle system ([`particles`]) realises the same dynamics on empirical
//! measures.
//!
//! Module map:
//! - [`torus`]: points, densities, observables, distances
//! - [`anosov`]: the site map, its inverse and cone certificates
//! - [`coupling`]: mean-field interaction and its regularity constants
//! - [`transfer`]: Ulam operators and the factorised coupled operator
//! - [`meanfield`]: the nonlinear operator, fixed points and experiments
//! - [`particles`]: finite-N ensembles and the mean-field gap

pub mod anosov;
pub mod coupling;
pub mod error;
pub mod linalg;
pub mod meanfield;
mod par;
pub mod particles;
pub mod rng;
pub mod stats;
pub mod torus;
pub mod transfer;
pub mod trig;

#[cfg(any(test, feature = "oracles"))]
pub mod oracle;

pub use error::{Error, Result};
