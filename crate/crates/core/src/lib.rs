//! Simulation and analysis of a two-stage (winged / aquatic) mosquito
//! invasion model: reaction-diffusion-advection with two Stefan free
//! boundaries in a heterogeneous environment.
//!
//! Modules, bottom-up:
//! - [`coefficients`]: rate profiles and far-field checks
//! - [`threshold`]: R0, lambda0 and the R0 trace along moving fronts
//! - [`solver`]: front-fixing time integration
//! - [`steady`]: stationary solutions by monotone iteration
//! - [`classify`]: spreading / vanishing classification and the sharp
//!   threshold in the expansion capability
//! - [`config`], [`output`], [`tasks`]: run configuration, persisted
//!   results and the CLI tasks

pub mod classify;
pub mod coefficients;
pub mod config;
pub mod error;
pub mod interp;
pub mod linalg;
pub mod output;
pub mod parallel;
pub mod solver;
pub mod steady;
pub mod tasks;
pub mod threshold;

pub use error::{Error, Result};
