//! Experiment runner for the FDA-OFDM simulator: experiment specs, result
//! tables with provenance, and the six sweeps.

pub mod experiments;
pub mod spec;
pub mod table;
