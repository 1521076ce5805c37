//! Multi-scale simulation of interacting agents: microscopic particle systems,
//! their kinetic (Vlasov) and hydrodynamic (Euler, Keller-Segel) descriptions,
//! and optimal-transport diagnostics that measure how closely the scales agree.

pub mod error;
pub mod model;
pub mod hydro;
pub mod kinetic;
pub mod particles;
pub mod lab;
pub mod transport;

pub use error::{Error, Result};
