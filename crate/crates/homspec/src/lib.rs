//! Spectral solver suite for singularly perturbed fourth-order periodic
//! homogenization: region classification, cell problems, effective
//! operators, their harmonic-oscillator spectra, direct fine-scale
//! eigensolves, and asymptotic consistency sweeps.

pub mod asymptotics;
pub mod banded;
pub mod cellsolve;
pub mod coeffield;
pub mod config;
pub mod direct;
pub mod effective;
pub mod error;
pub mod expr;
pub mod fourier;
pub mod oscillator;
pub mod regions;
pub mod stencil;

pub use error::{Error, Result};
