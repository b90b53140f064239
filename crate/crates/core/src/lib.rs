//! Non-perturbative region widths of Wigner-band random matrices.
//!
//! A perturbed eigenstate of `H = H₀ + λV` splits into a non-perturbative
//! interval `[p1, p2]` of unperturbed levels and a remainder that follows
//! from a convergent expansion. [`npt`] finds the interval three ways (dense
//! spectral radii, a banded pivot scan, and the bandwidth-one recursions);
//! [`shapes`] and [`theory`] hold the ensemble observables and the analytic
//! width laws; [`experiments`] wires them into sweeps.

pub mod banded;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod npt;
pub mod rng;
pub mod shapes;
pub mod stats;
pub mod theory;

pub use banded::{BandedSymmetricMatrix, Direction};
pub use error::{Error, Result};
pub use model::{diagonalize, generate_wbrm, hamiltonian, SpectrumResult, WbrmInstance};
