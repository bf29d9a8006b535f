//! Least-squares Padé surrogates for parametric Helmholtz frequency-response maps.
//!
//! The crate builds rational surrogates `S_P(z) = P(z) / Q(z)` of a
//! Hilbert-space-valued map `z -> S(z)` from its Taylor coefficients at a
//! single complex center `z0`. The denominator is the minimizer of a weighted
//! least-squares functional over unit-norm polynomial coefficients, obtained
//! as the smallest eigenvector of a small Hermitian Gramian; the numerator is
//! the truncated convolution of the denominator with the Taylor table.
//!
//! Modules:
//! - [`linalg`]: complex sparse matrices, banded LU, BiCGStab, a cyclic Jacobi
//!   Hermitian eigensolver and an Aberth–Ehrlich polynomial root finder.
//! - [`space`]: weighted discrete H^1 inner products over finite-difference
//!   grids.
//! - [`response`]: frequency-response backends (closed-form modal oracle,
//!   interior Helmholtz with or without a refraction interface, exterior
//!   scattering with an impedance boundary).
//! - [`pade`]: the surrogate engine (Gramian, denominator, numerator,
//!   evaluation, diagnostics, JSON round-trip).
//! - [`stochastic`]: Monte Carlo characteristic-function comparison of a
//!   scalar quantity of interest under a random wavenumber.

pub mod error;
pub mod grid;
pub mod linalg;
pub mod pade;
pub mod response;
pub mod space;
pub mod stochastic;

pub use error::{Error, Result};
