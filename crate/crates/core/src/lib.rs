//! Simulation and convergence analysis of sampled-data feedback optimization
//! modelled as a hybrid dynamical system.
//!
//! - [`linalg`]: dense linear algebra for small systems.
//! - [`hybrid`]: hybrid-time execution, arcs and jump bookkeeping.
//! - [`model`]: the feedback-optimization system and its validation.
//! - [`analysis`]: optimal steady state, stability constants and bound checks.
//! - [`robustness`]: perturbed systems and arc closeness.
//! - [`scenarios`]: reference and random scenarios.

pub mod analysis;
pub mod hybrid;
pub mod linalg;
pub mod model;
pub mod robustness;
pub mod scenarios;
