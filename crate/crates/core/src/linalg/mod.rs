//! Self-contained complex linear algebra sized for this crate's needs:
//! sparse operators from finite-difference stencils, banded direct solves
//! with an iterative fallback, small dense Hermitian eigenproblems, and
//! polynomial root finding in a shifted variable.

mod banded;
mod bicgstab;
mod eigen;
mod poly;
mod solve;
mod sparse;

pub use banded::{BandedCholesky, BandedLu};
pub use bicgstab::bicgstab;
pub use eigen::{
    eigh, fix_phase, hermitian_smallest_eigpair, DenseHermitian, HermitianEigen, SmallestEigpair,
};
pub use poly::{poly_roots, ShiftedPolynomial};
pub use solve::{solve_shifted, ShiftedSystem};
pub use sparse::SparseMatrix;
