//! Simulation and parameter inference for acoustically driven single-quantum
//! spin transitions of NV-center ensembles.
//!
//! The pipeline: fit an equivalent circuit to measured Rabi-field spectra
//! ([`mbvd`]), compose the magnetic and acoustic drive fields for each NV of a
//! standing-wave ensemble ([`spin`]), evolve the 3-level density matrix
//! ([`lindblad`]), assemble Rabi spectrograms ([`spectro`]) and score them
//! against data with SSIM to recover the SQ/DQ susceptibility ratio
//! ([`inference`]). [`stress`] maps stress susceptibilities to strain
//! susceptibilities.

pub mod error;
pub mod lindblad;
pub mod inference;
pub mod io;
pub mod lm;
pub mod mbvd;
pub mod measured;
pub mod pipeline;
pub mod plot;
pub mod rng;
pub mod spectro;
pub mod spin;
pub mod stress;

pub use error::{Error, Result};
