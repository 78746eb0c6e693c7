//! Simulation and signal processing for a ring-resonator + interlaced-AWG
//! on-chip spectral monitor.
//!
//! A tunable ring comb selects narrow slices of the input spectrum; M AWGs
//! with interlaced channel grids isolate one resonance per output. Summing an
//! interlaced channel pair while the comb is scanned over one FSR synthesises
//! a virtual channel that tracks the resonance, from which the input spectrum
//! is rebuilt at the ring's resolution.
//!
//! Modules follow the signal path: [`spectrum`] → [`ring`] → [`awg`] →
//! [`scan`] → [`reconstruct`] → [`analysis`], with [`scenario`] tying them
//! together for batch runs.

pub mod analysis;
pub mod awg;
pub mod error;
pub mod reconstruct;
pub mod ring;
pub mod scan;
pub mod scenario;
pub mod spectrum;

pub use error::{Error, Result};
