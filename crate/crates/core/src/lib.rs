//! Simulation library for a frequency diverse array (FDA) OFDM transmitter whose
//! per-antenna spectra overlap block by block.
//!
//! The transmitter repeats `K/M` QPSK symbols over `M` subcarrier blocks,
//! precodes each block for one antenna position and shifts antenna `m` by `m`
//! block widths. The centre block is therefore radiated by every antenna, the
//! outer blocks by progressively smaller subarrays. The crate models that
//! chain end to end:
//!
//! - [`config`]: system parameters, antenna indexing, derived FDA quantities.
//! - [`txchain`]: symbols, block replication, precoders, spectrum assembly.
//! - [`channel`]: line-of-sight channel, array factor, noisy propagation.
//! - [`commrx`]: single-block and full-band communication receivers.
//! - [`sensing`]: zero-forcing estimation, range profiles, AoA, equalization.
//! - [`oracle`]: brute-force time-domain reference for the frequency-domain model.

pub mod channel;
pub mod commrx;
pub mod config;
pub mod dsp;
mod error;
pub mod grid;
pub mod oracle;
pub mod rng;
pub mod sensing;
pub mod txchain;

pub use error::{Error, Result};

pub use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
