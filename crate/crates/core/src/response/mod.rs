//! Frequency-response maps `z -> S(z)` with values in a weighted space.
//!
//! Every backend exposes the same contract: Taylor coefficients of the map
//! at a fixed complex center (computed once and cached), direct evaluation
//! away from the center, and, when available in closed form, the real poles
//! of the underlying operator pencil.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::Result;
use crate::space::{SpaceVector, WeightedSpace};

pub mod helmholtz;
pub mod modal;
pub mod scattering;

pub use helmholtz::{
    fd_eigenvalue, BoundaryCondition, HelmholtzResponseMap, TransmissionGeometry,
};
pub use modal::{ModalResponseMap, ModalTerm};
pub use scattering::ScatteringResponseMap;

/// A parametric map `z -> S(z)` that is meromorphic in `z` with values in a
/// fixed discrete Hilbert space.
pub trait ResponseMap {
    fn space(&self) -> &Arc<WeightedSpace>;

    /// Expansion center `z0` for the Taylor coefficients.
    fn center(&self) -> Complex64;

    /// `beta`-th Taylor coefficient `S_beta` of the map at the center.
    /// Coefficients are computed on first request and cached.
    fn taylor(&self, beta: usize) -> Result<SpaceVector>;

    /// Direct evaluation at `z` (a fresh solve or a closed form), used as
    /// reference truth when measuring surrogate error.
    fn evaluate(&self, z: Complex64) -> Result<SpaceVector>;

    /// Real poles of the map when known exactly, ascending. `None` when the
    /// backend has no closed-form spectrum.
    fn poles(&self) -> Option<Vec<f64>>;
}
