//! Numerical laboratory for non-linear spiked Wigner models.
//!
//! The crate builds matrices of the form
//! `Y_ij = [f(Z_ij + γ x_i x_j / √n) − E f(Z)] / √n`, computes the
//! information coefficients `ϑ_k(f)` that govern their spectra, predicts
//! the position of the outlier eigenvalue and the eigenvector overlap, and
//! measures both with a Krylov eigensolver.
//!
//! Modules:
//! - [`distributions`]: seeded counter-based sampling of signals and noise.
//! - [`coefficients`]: non-linearities, Hermite polynomials, `ϑ_k`, `k★`, `σ`.
//! - [`models`]: rank-one, rank-K, variance-profile and rectangular builders.
//! - [`spectral`]: leading eigenpair, operator norm, dense spectrum, histograms.
//! - [`theory`]: closed-form phase-transition predictions.
//! - [`harness`]: config-driven Monte-Carlo experiments and output tables.

pub mod coefficients;
pub mod distributions;
pub mod error;
pub mod harness;
pub mod matrix;
pub mod models;
pub mod quadrature;
pub mod spectral;
pub mod theory;

pub use error::{Error, Result};
