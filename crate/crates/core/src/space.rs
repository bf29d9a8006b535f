//! Weighted discrete H^1 spaces.
//!
//! The inner product is `<u, v> = v* (K + w^2 M) u` with `K` a
//! finite-difference stiffness, `M` a lumped mass, and `w` a fixed real
//! weight; the induced norm is `(|grad u|^2 + w^2 |u|^2)^(1/2)` in the
//! discrete quadrature. Interior Helmholtz problems use `w = sqrt(Re z0)`,
//! the scattering backend uses `w = Re z0`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{assemble_2d, Grid2d, NodeClass};
use crate::linalg::{BandedCholesky, SparseMatrix};

static NEXT_SPACE_ID: AtomicU64 = AtomicU64::new(1);

/// Mints an identity tag outside any live space, for deserialized vectors.
pub(crate) fn fresh_space_id() -> u64 {
    NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed)
}

/// Discrete Hilbert space carrying its quadrature matrices and norm weight.
#[derive(Debug)]
pub struct WeightedSpace {
    id: u64,
    stiffness: SparseMatrix,
    mass: SparseMatrix,
    boundary_mass: Option<SparseMatrix>,
    weight: f64,
    norm_factor: OnceLock<BandedCholesky>,
}

impl WeightedSpace {
    pub fn new(
        stiffness: SparseMatrix,
        mass: SparseMatrix,
        boundary_mass: Option<SparseMatrix>,
        weight: f64,
    ) -> Result<Arc<Self>> {
        let dim = stiffness.n_rows();
        if stiffness.n_cols() != dim || mass.n_rows() != dim || mass.n_cols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: mass.n_rows(),
            });
        }
        if let Some(b) = &boundary_mass {
            if b.n_rows() != dim || b.n_cols() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: b.n_rows(),
                });
            }
        }
        if !(weight > 0.0) || !weight.is_finite() {
            return Err(Error::invalid(format!(
                "norm weight must be positive and finite, got {weight}"
            )));
        }
        Ok(Arc::new(WeightedSpace {
            id: NEXT_SPACE_ID.fetch_add(1, Ordering::Relaxed),
            stiffness,
            mass,
            boundary_mass,
            weight,
            norm_factor: OnceLock::new(),
        }))
    }

    /// 1D interval `(a, b)` with homogeneous Dirichlet ends: DOFs are the
    /// `cells - 1` interior nodes, stiffness `(1/h) tridiag(-1, 2, -1)`,
    /// mass `h` per node.
    pub fn dirichlet_interval(a: f64, b: f64, cells: usize, weight: f64) -> Result<Arc<Self>> {
        if cells < 2 || b <= a {
            return Err(Error::invalid("interval needs at least 2 cells and a < b"));
        }
        let n = cells - 1;
        let h = (b - a) / cells as f64;
        let mut trips = Vec::with_capacity(3 * n);
        for i in 0..n {
            trips.push((i, i, Complex64::new(2.0 / h, 0.0)));
            if i + 1 < n {
                trips.push((i, i + 1, Complex64::new(-1.0 / h, 0.0)));
                trips.push((i + 1, i, Complex64::new(-1.0 / h, 0.0)));
            }
        }
        let stiffness = SparseMatrix::from_triplets(n, n, &trips)?;
        let mass = SparseMatrix::diagonal(&vec![Complex64::new(h, 0.0); n]);
        Self::new(stiffness, mass, None, weight)
    }

    /// 2D rectangle with homogeneous Dirichlet boundary; DOFs are interior
    /// nodes of the grid.
    pub fn dirichlet_rectangle(grid: &Grid2d, weight: f64) -> Result<Arc<Self>> {
        let g = *grid;
        let asm = assemble_2d(
            grid,
            &move |ix, iy| {
                if g.on_outer_boundary(ix, iy) {
                    NodeClass::Fixed
                } else {
                    NodeClass::Dof
                }
            },
            &|_, _| true,
        )?;
        Self::new(asm.stiffness, asm.mass, None, weight)
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.stiffness.n_rows()
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn boundary_mass(&self) -> Option<&SparseMatrix> {
        self.boundary_mass.as_ref()
    }

    pub fn vector(&self, values: Vec<Complex64>) -> Result<SpaceVector> {
        if values.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: values.len(),
            });
        }
        Ok(SpaceVector {
            space_id: self.id,
            values,
        })
    }

    pub fn zero_vector(&self) -> SpaceVector {
        SpaceVector {
            space_id: self.id,
            values: vec![Complex64::new(0.0, 0.0); self.dim()],
        }
    }

    fn check(&self, v: &SpaceVector) -> Result<()> {
        if v.space_id != self.id {
            return Err(Error::SpaceMismatch);
        }
        if v.values.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.values.len(),
            });
        }
        Ok(())
    }

    /// `(K + w^2 M) u` as raw values.
    fn apply_gram(&self, u: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut y = self.stiffness.matvec(u)?;
        let mu = self.mass.matvec(u)?;
        let w2 = self.weight * self.weight;
        for i in 0..y.len() {
            y[i] += w2 * mu[i];
        }
        Ok(y)
    }

    /// Weighted inner product, linear in `u`, conjugate-linear in `v`.
    pub fn inner(&self, u: &SpaceVector, v: &SpaceVector) -> Result<Complex64> {
        self.check(u)?;
        self.check(v)?;
        let gu = self.apply_gram(&u.values)?;
        Ok(v.values
            .iter()
            .zip(&gu)
            .map(|(vi, gi)| vi.conj() * gi)
            .sum())
    }

    /// Weighted norm; tiny negative rounding in the quadratic form clamps
    /// to zero.
    pub fn norm(&self, u: &SpaceVector) -> Result<f64> {
        let q = self.inner(u, u)?;
        Ok(q.re.max(0.0).sqrt())
    }

    /// Plain mass inner product `v* M u` (no stiffness, no weight).
    pub fn mass_inner(&self, u: &SpaceVector, v: &SpaceVector) -> Result<Complex64> {
        self.check(u)?;
        self.check(v)?;
        let mu = self.mass.matvec(&u.values)?;
        Ok(v.values
            .iter()
            .zip(&mu)
            .map(|(vi, mi)| vi.conj() * mi)
            .sum())
    }

    /// Coordinates of `v` in an orthonormal frame of the weighted inner
    /// product: Euclidean inner products of the outputs equal weighted
    /// inner products of the inputs, so the Euclidean norm of the output
    /// equals `norm(v)`.
    pub fn norm_coordinates(&self, v: &SpaceVector) -> Result<Vec<Complex64>> {
        self.check(v)?;
        let factor = match self.norm_factor.get() {
            Some(f) => f,
            None => {
                let w2 = Complex64::new(self.weight * self.weight, 0.0);
                let gram = self.stiffness.add_scaled(w2, &self.mass)?;
                let chol = BandedCholesky::factor(&gram)?;
                self.norm_factor.get_or_init(|| chol)
            }
        };
        factor.adjoint_apply(&v.values)
    }
}

/// Element of a [`WeightedSpace`], tagged with the space it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceVector {
    space_id: u64,
    values: Vec<Complex64>,
}

impl SpaceVector {
    /// Builds a vector carrying an explicit space tag; used when loading
    /// serialized data that lives in its own anonymous space.
    pub(crate) fn from_raw(space_id: u64, values: Vec<Complex64>) -> SpaceVector {
        SpaceVector { space_id, values }
    }

    pub fn space_id(&self) -> u64 {
        self.space_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// `self += c * other`. The operands must come from the same space.
    pub fn axpy(&mut self, c: Complex64, other: &SpaceVector) {
        assert_eq!(self.space_id, other.space_id, "space mismatch in axpy");
        assert_eq!(self.values.len(), other.values.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: Complex64) {
        for a in self.values.iter_mut() {
            *a *= c;
        }
    }

    pub fn scaled(&self, c: Complex64) -> SpaceVector {
        let mut out = self.clone();
        out.scale(c);
        out
    }

    pub fn sub(&self, other: &SpaceVector) -> SpaceVector {
        let mut out = self.clone();
        out.axpy(Complex64::new(-1.0, 0.0), other);
        out
    }

    /// Largest component magnitude (no quadrature weighting).
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}
