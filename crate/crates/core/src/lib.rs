//! Entanglement negativity of charge-projected random states.

pub mod asymptotics;
pub mod circuits;
pub mod commands;
pub mod config;
pub mod cubic;
pub mod ensemble;
pub mod error;
pub mod linalg;
pub mod negativity;
pub mod rng;
pub mod quadrature;
pub mod resolvent;
pub mod sectors;

pub use error::{Error, Result};
