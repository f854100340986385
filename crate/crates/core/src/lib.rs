//! Limiting free energies of generalized random energy models in a
//! transversal magnetic field.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: distribution functions `A`, their concave envelopes and the
//!   transversal field laws.
//! - [`classical`]: partial pressures, the classical GREM/CREM pressure and
//!   the truncated CREM pressure `Φ(β, z)`.
//! - [`quantum`]: the quantum GREM/CREM variational formulas, critical
//!   fields, transversal magnetization and transition classification.
//! - [`nonhier`]: the non-hierarchical GREM, its chains and the greedy
//!   chain reduction.
//! - [`verify`]: finite-N disorder sampling, exact and stochastic quantum
//!   partition functions and the associated consistency checks.

pub mod classical;
pub mod model;
pub mod nonhier;
pub mod quantum;
pub mod verify;

mod error;

pub use error::{Error, Result};

/// `ln 2`, used everywhere as the entropy per spin.
pub const LN2: f64 = std::f64::consts::LN_2;
