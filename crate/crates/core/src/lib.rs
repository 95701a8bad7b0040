//! Wavelet renormalization group for free scalar fields on dyadic lattices.
//!
//! The crate is `no_std` (it needs `alloc`). It covers the numerical side of
//! the construction: Daubechies filter banks and their scaling functions,
//! harmonic lattice ground states, the one-particle scaling maps that
//! coarse-grain Gaussian states, the massive scaling-limit state, lattice and
//! continuum dynamics, and the Gaussian-level structure of one MERA layer.
//!
//! IO, configuration and the command line live in the companion `wrg` crate.

#![no_std]

extern crate alloc;

pub mod continuum;
pub mod dynamics;
mod error;
pub mod gaussian;
pub mod lattice;
pub mod linalg;
pub mod mera;
pub mod rg;
pub mod wavelet;

pub use error::{Error, Result};

pub use num_complex::Complex64;
