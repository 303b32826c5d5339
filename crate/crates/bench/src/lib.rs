//! Experiment runners, reference oracles and verification suites for scpkit.

pub mod experiments;
pub mod oracles;
pub mod plan;
pub mod verify;
