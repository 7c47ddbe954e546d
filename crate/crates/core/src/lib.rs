//! Simulator and processing pipeline for appliance-level household
//! electricity datasets.
//!
//! The crate is split along the data path:
//!
//! * [`household`] generates ground-truth appliance demand and the aggregate
//!   mains signal.
//! * [`rfnet`] simulates the 433 MHz metering network: polled individual
//!   appliance monitors, blind-broadcasting current-transformer transmitters,
//!   packet corruption, collisions and the logger-side filters.
//! * [`powercalc`] turns voltage/current waveforms into 1 Hz active power,
//!   apparent power and RMS voltage.
//! * [`calibrate`] estimates ADC conversion constants from reference-meter
//!   readings.
//! * [`datasets`] reads and writes the on-disk house directory layout.
//! * [`stats`] computes validation statistics and preprocessing.
//! * [`cli`] wires everything together for the `dale-forge` binary.

pub mod calibrate;
pub mod cli;
pub mod datasets;
pub mod error;
pub mod household;
pub mod powercalc;
pub mod rfnet;
pub mod stats;

pub use error::{Error, Result};
