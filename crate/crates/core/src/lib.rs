//! Cutting-plane solvers for data-driven mixed-integer convex optimization.

pub mod datagen;
pub mod engine;
pub mod error;
pub mod layout;
pub mod milp;
pub mod oracle;
pub mod problems;
pub mod qp;
pub mod sampling;

pub use error::{Result, ScpError};
