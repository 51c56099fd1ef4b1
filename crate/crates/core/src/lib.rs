//! Quantum state transfer between two atom-cavity nodes joined by a lossy multimode fiber.
//!
//! The crate covers the derived rates of a setup, closed-form success probabilities,
//! drive schedules for wave-packet shaping and adiabatic passage, the full
//! single-excitation equations of motion, reduced models, the hybrid eigenmode
//! basis, and a pulse-parameter optimizer.
#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod analytics;
pub mod config;
pub mod dynamics;
pub mod eigenmodes;
pub mod error;
pub mod ode;
pub mod optimizer;
pub mod parallel;
pub mod params;
pub mod protocols;
pub mod reduced;
pub mod table;

pub use error::{Error, Result};
pub use num_complex::Complex64;
