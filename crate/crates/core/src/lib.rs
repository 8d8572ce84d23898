//! Spectral ground states, Strang-split dynamics and orbital-stability
//! experiments for two coupled Gross–Pitaevskii equations with a linear
//! (Rabi) coupling in a harmonic trap.

pub mod cli;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod functionals;
pub mod gn_constant;
pub mod grid;
pub mod ground_state;
pub mod model;
pub mod rearrangement;
pub mod sampling;
pub mod stability;

pub use error::{Error, Result};
pub use grid::{ComplexField, ComplexPair, Field, FieldPair, Grid, RealField, RealPair};
pub use model::{Beta, Condition, MassConstraint, ModelParams, SHARP_GN_CONSTANT};
