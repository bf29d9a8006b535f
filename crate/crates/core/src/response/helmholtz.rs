//! Finite-difference Helmholtz response maps on rectangles.
//!
//! Two drive modes share one Taylor recursion around the center `z0`:
//! load-driven problems solve `(K - z M_eps) u = M f` with homogeneous
//! boundary conditions, and lifting-driven (two-layer) problems solve for
//! the homogeneous part of the field with the harmonic extension of the
//! boundary data moved to the right-hand side. One factorization of
//! `K - z0 M_eps` is reused for every Taylor order.

use std::cell::{OnceCell, RefCell};
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{assemble_2d, DofMap, Grid2d, GridAssembly, NodeClass};
use crate::linalg::{eigh, DenseHermitian, ShiftedSystem, SparseMatrix};
use crate::response::ResponseMap;
use crate::space::{SpaceVector, WeightedSpace};

/// Relative residual target for all Taylor and evaluation solves.
const SOLVE_TOL: f64 = 1e-10;

/// Homogeneous boundary condition on one side of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    Dirichlet,
    Neumann,
}

/// Sides are indexed west, east, south, north.
pub type SideConditions = [BoundaryCondition; 4];

/// Exact generalized eigenvalue of the five-point Laplacian with lumped
/// mass on `(0, pi)^2` under homogeneous Dirichlet conditions, for the mode
/// `sin(m x) sin(n y)` on a grid of spacing `h`.
pub fn fd_eigenvalue(m: usize, n: usize, h: f64) -> f64 {
    axis_eigenvalue(m as f64, h) + axis_eigenvalue(n as f64, h)
}

/// One-dimensional factor `(4 / h^2) sin^2(kappa h / 2)` of the discrete
/// spectrum; `kappa` is the continuous wavenumber of the mode.
fn axis_eigenvalue(kappa: f64, h: f64) -> f64 {
    let s = (kappa * h / 2.0).sin();
    4.0 / (h * h) * s * s
}

/// Mode wavenumbers of the 1D discrete Laplacian on a side of length `len`
/// with `cells` cells, for the given end conditions. The count matches the
/// per-direction DOF count.
fn axis_wavenumbers(lo: BoundaryCondition, hi: BoundaryCondition, cells: usize, len: f64) -> Vec<f64> {
    use BoundaryCondition::*;
    match (lo, hi) {
        (Dirichlet, Dirichlet) => (1..cells).map(|k| k as f64 * PI / len).collect(),
        (Neumann, Neumann) => (0..=cells).map(|k| k as f64 * PI / len).collect(),
        _ => (0..cells).map(|k| (k as f64 + 0.5) * PI / len).collect(),
    }
}

fn sort_dedup_poles(mut poles: Vec<f64>) -> Vec<f64> {
    poles.sort_by(f64::total_cmp);
    poles.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * a.abs().max(1.0));
    poles
}

/// Two-layer medium on `(-1, 1)^2`: refractive index `n1` below the line
/// `x2 = 0`, `n2` above, driven by a plane wave of wavenumber `kappa`
/// incident at angle `theta` (radians, measured from the `x1` axis).
#[derive(Debug, Clone, Copy)]
pub struct TransmissionGeometry {
    pub n1: f64,
    pub n2: f64,
    pub kappa: f64,
    pub theta: f64,
}

impl TransmissionGeometry {
    pub fn new(n1: f64, n2: f64, kappa: f64, theta: f64) -> Result<Self> {
        if !(n1 > 0.0 && n2 > 0.0 && kappa > 0.0) {
            return Err(Error::invalid("refractive indices and wavenumber must be positive"));
        }
        if !(0.0..PI / 2.0).contains(&theta) {
            return Err(Error::invalid("incidence angle must lie in [0, pi/2)"));
        }
        Ok(TransmissionGeometry { n1, n2, kappa, theta })
    }

    /// Incidence direction `(cos theta, sin theta)`.
    pub fn direction(&self) -> (f64, f64) {
        (self.theta.cos(), self.theta.sin())
    }

    /// Angle below which the upper field is evanescent; `None` when
    /// `n2 > n1` (every angle transmits).
    pub fn critical_angle(&self) -> Option<f64> {
        if self.n2 <= self.n1 {
            Some((self.n2 / self.n1).acos())
        } else {
            None
        }
    }

    /// Vertical wavenumber `K2 = kappa sqrt(n2^2 - (n1 cos theta)^2)` of the
    /// transmitted wave, principal square root (positive imaginary part for
    /// a negative radicand).
    pub fn transverse_wavenumber(&self) -> Complex64 {
        let d1 = self.theta.cos();
        let radicand = self.n2 * self.n2 - (self.n1 * d1) * (self.n1 * d1);
        self.kappa * Complex64::new(radicand, 0.0).sqrt()
    }

    pub fn reflection_coefficient(&self) -> Complex64 {
        let k2 = self.transverse_wavenumber();
        let kd2 = self.kappa * self.n1 * self.theta.sin();
        -(k2 - kd2) / (k2 + kd2)
    }

    pub fn transmission_coefficient(&self) -> Complex64 {
        Complex64::new(1.0, 0.0) + self.reflection_coefficient()
    }

    /// Closed-form solution of the two-layer Helmholtz problem at squared
    /// wavenumber `kappa^2`: incident plus reflected wave below the
    /// interface, transmitted wave above.
    pub fn exact_field(&self, x1: f64, x2: f64) -> Complex64 {
        let (d1, d2) = self.direction();
        let i = Complex64::new(0.0, 1.0);
        if x2 > 0.0 {
            let k1 = self.kappa * self.n1 * d1;
            let k2 = self.transverse_wavenumber();
            self.transmission_coefficient() * (i * (k1 * x1 + k2 * x2)).exp()
        } else {
            let kn = self.kappa * self.n1;
            let incident = (i * kn * (d1 * x1 + d2 * x2)).exp();
            let reflected = (i * kn * (d1 * x1 - d2 * x2)).exp();
            incident + self.reflection_coefficient() * reflected
        }
    }

    /// Squared refraction profile at height `y`; nodes within `tol` of the
    /// interface carry the two-sided average.
    pub fn eps_sq_at(&self, y: f64, tol: f64) -> f64 {
        layered_eps_sq(self.n1 * self.n1, self.n2 * self.n2, y, tol)
    }
}

fn layered_eps_sq(n1_sq: f64, n2_sq: f64, y: f64, tol: f64) -> f64 {
    if y.abs() <= tol {
        0.5 * (n1_sq + n2_sq)
    } else if y < 0.0 {
        n1_sq
    } else {
        n2_sq
    }
}

/// Discrete harmonic extension: full-node values `w` with `w = g` on the
/// outer boundary and zero five-point Laplacian at every interior node.
pub fn harmonic_lifting(grid: &Grid2d, g: &dyn Fn(f64, f64) -> Complex64) -> Result<Vec<Complex64>> {
    let asm = dirichlet_assembly(grid)?;
    let mut full = vec![Complex64::new(0.0, 0.0); grid.node_count()];
    for iy in 0..grid.nodes_y() {
        for ix in 0..grid.nodes_x() {
            if grid.on_outer_boundary(ix, iy) {
                let (x, y) = grid.node_xy(ix, iy);
                full[grid.node_index(ix, iy)] = g(x, y);
            }
        }
    }
    let rhs = asm.coupling.matvec(&full)?;
    let interior = ShiftedSystem::from_matrix(asm.stiffness, Complex64::new(0.0, 0.0))?
        .solve(&rhs, SOLVE_TOL)?;
    for (dof, value) in interior.into_iter().enumerate() {
        full[asm.dof_map.node_of_dof(dof)] = value;
    }
    Ok(full)
}

fn dirichlet_assembly(grid: &Grid2d) -> Result<GridAssembly> {
    let g = *grid;
    assemble_2d(
        grid,
        &move |ix, iy| {
            if g.on_outer_boundary(ix, iy) {
                NodeClass::Fixed
            } else {
                NodeClass::Dof
            }
        },
        &|_, _| true,
    )
}

/// Plane wave of wavenumber `nu` along `direction`, modulated by the
/// normalized quadratic bubble vanishing on the boundary of `(0, pi)^2`.
pub fn plane_wave_bubble(nu: f64, direction: (f64, f64)) -> impl Fn(f64, f64) -> Complex64 {
    let c = 16.0 / PI.powi(4);
    move |x: f64, y: f64| {
        let phase = Complex64::new(0.0, -nu * (direction.0 * x + direction.1 * y)).exp();
        phase * (c * x * (PI - x) * y * (PI - y))
    }
}

/// Load whose exact Helmholtz solution at squared wavenumber `nu^2` is
/// [`plane_wave_bubble`]: `f = -Laplace(w) - nu^2 w` in closed form.
pub fn plane_wave_bubble_load(nu: f64, direction: (f64, f64)) -> impl Fn(f64, f64) -> Complex64 {
    let c = 16.0 / PI.powi(4);
    move |x: f64, y: f64| {
        let p = |t: f64| t * (PI - t);
        let dp = |t: f64| PI - 2.0 * t;
        let grad_dot_d = direction.0 * dp(x) * p(y) + direction.1 * p(x) * dp(y);
        let phase = Complex64::new(0.0, -nu * (direction.0 * x + direction.1 * y)).exp();
        phase * (Complex64::new(0.0, 2.0 * nu) * (c * grad_dot_d) + 2.0 * c * (p(x) + p(y)))
    }
}

#[derive(Debug)]
enum Drive {
    /// Stored right-hand side `M f` over solver DOFs.
    Load(Vec<Complex64>),
    /// Harmonic lifting of the boundary data, full-node values.
    Lifting(Vec<Complex64>),
}

#[derive(Debug, Clone)]
enum PoleRule {
    /// Unit refraction on a rectangle: closed-form tensor spectrum.
    Rectangle,
    /// Two-layer refraction varying in `y` only: per-`x`-mode dense solves.
    Layered { n1_sq: f64, n2_sq: f64 },
}

/// Finite-difference Helmholtz frequency-response map.
pub struct HelmholtzResponseMap {
    grid: Grid2d,
    bcs: SideConditions,
    space: Arc<WeightedSpace>,
    /// `true` when space vectors are full-node fields (lifting drive);
    /// otherwise they coincide with solver DOF vectors.
    full_field: bool,
    stiffness: SparseMatrix,
    coupling: SparseMatrix,
    mass_eps: SparseMatrix,
    dof_map: DofMap,
    center: Complex64,
    drive: Drive,
    pole_rule: PoleRule,
    system: OnceCell<ShiftedSystem>,
    poles_cache: OnceCell<Vec<f64>>,
    cache: RefCell<Vec<SpaceVector>>,
}

impl std::fmt::Debug for HelmholtzResponseMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HelmholtzResponseMap")
            .field("grid", &self.grid)
            .field("center", &self.center)
            .field("full_field", &self.full_field)
            .finish()
    }
}

impl HelmholtzResponseMap {
    /// Load-driven problem `-Laplace(u) - z u = f` with unit refraction and
    /// homogeneous per-side boundary conditions; `load` is sampled at the
    /// DOF nodes.
    pub fn base(
        grid: &Grid2d,
        bcs: SideConditions,
        z0: Complex64,
        load: &dyn Fn(f64, f64) -> Complex64,
    ) -> Result<Self> {
        let asm = side_assembly(grid, bcs)?;
        let f: Vec<Complex64> = (0..asm.dof_map.dof_count())
            .map(|dof| {
                let (ix, iy) = grid.node_coords(asm.dof_map.node_of_dof(dof));
                let (x, y) = grid.node_xy(ix, iy);
                load(x, y)
            })
            .collect();
        Self::base_from_dof_load(grid, bcs, z0, f, asm)
    }

    /// Load-driven problem with the load given directly as DOF values
    /// (e.g. a discrete eigenvector).
    pub fn base_with_dof_load(
        grid: &Grid2d,
        bcs: SideConditions,
        z0: Complex64,
        load: Vec<Complex64>,
    ) -> Result<Self> {
        let asm = side_assembly(grid, bcs)?;
        Self::base_from_dof_load(grid, bcs, z0, load, asm)
    }

    fn base_from_dof_load(
        grid: &Grid2d,
        bcs: SideConditions,
        z0: Complex64,
        load: Vec<Complex64>,
        asm: GridAssembly,
    ) -> Result<Self> {
        check_center(z0)?;
        let ndof = asm.dof_map.dof_count();
        if load.len() != ndof {
            return Err(Error::DimensionMismatch {
                expected: ndof,
                got: load.len(),
            });
        }
        let weight = z0.re.sqrt();
        let space = WeightedSpace::new(asm.stiffness.clone(), asm.mass.clone(), None, weight)?;
        let rhs0 = asm.mass.matvec(&load)?;
        Ok(HelmholtzResponseMap {
            grid: *grid,
            bcs,
            space,
            full_field: false,
            stiffness: asm.stiffness,
            coupling: asm.coupling,
            mass_eps: asm.mass,
            dof_map: asm.dof_map,
            center: z0,
            drive: Drive::Load(rhs0),
            pole_rule: PoleRule::Rectangle,
            system: OnceCell::new(),
            poles_cache: OnceCell::new(),
            cache: RefCell::new(Vec::new()),
        })
    }

    /// Two-layer problem on `(-1, 1)^2` with Dirichlet data from the
    /// geometry's closed-form field at `z = kappa^2`. The norm space spans
    /// all grid nodes since the field does not vanish on the boundary;
    /// `cells` must be even so the interface falls on a grid line.
    pub fn transmission(cells: usize, geom: &TransmissionGeometry, z0: Complex64) -> Result<Self> {
        check_center(z0)?;
        if cells < 4 || cells % 2 != 0 {
            return Err(Error::invalid(
                "two-layer grids need an even cell count of at least 4",
            ));
        }
        let grid = Grid2d::from_box(-1.0, 1.0, -1.0, 1.0, cells, cells)?;
        let asm = dirichlet_assembly(&grid)?;
        let n1_sq = geom.n1 * geom.n1;
        let n2_sq = geom.n2 * geom.n2;
        let tol = grid.h / 4.0;

        let eps_diag: Vec<Complex64> = (0..asm.dof_map.dof_count())
            .map(|dof| {
                let (ix, iy) = grid.node_coords(asm.dof_map.node_of_dof(dof));
                let (_, y) = grid.node_xy(ix, iy);
                layered_eps_sq(n1_sq, n2_sq, y, tol)
            })
            .zip(asm.mass.diag())
            .map(|(eps, m)| m * eps)
            .collect();
        let mass_eps = SparseMatrix::diagonal(&eps_diag);

        let lifting = harmonic_lifting(&grid, &|x, y| geom.exact_field(x, y))?;

        // The norm covers the full field including its boundary trace.
        let full = assemble_2d(&grid, &|_, _| NodeClass::Dof, &|_, _| true)?;
        let weight = z0.re.sqrt();
        let space = WeightedSpace::new(full.stiffness, full.mass, None, weight)?;

        Ok(HelmholtzResponseMap {
            grid,
            bcs: [BoundaryCondition::Dirichlet; 4],
            space,
            full_field: true,
            stiffness: asm.stiffness,
            coupling: asm.coupling,
            mass_eps,
            dof_map: asm.dof_map,
            center: z0,
            drive: Drive::Lifting(lifting),
            pole_rule: PoleRule::Layered { n1_sq, n2_sq },
            system: OnceCell::new(),
            poles_cache: OnceCell::new(),
            cache: RefCell::new(Vec::new()),
        })
    }

    pub fn grid(&self) -> &Grid2d {
        &self.grid
    }

    pub fn dof_map(&self) -> &DofMap {
        &self.dof_map
    }

    /// Full-node values of a map vector (identity embedding for
    /// homogeneous problems, already full for lifted ones).
    pub fn full_field(&self, v: &SpaceVector) -> Vec<Complex64> {
        if self.full_field {
            v.values().to_vec()
        } else {
            self.dof_map.embed(v.values(), Complex64::new(0.0, 0.0))
        }
    }

    /// Residual of the discrete equations at each solver DOF for a given
    /// full-node field `u`: `(K u_I - C u_B) - z M_eps u_I - M f`. Rows are
    /// in assembled scaling; divide by `h^2` for pointwise PDE residuals.
    pub fn equation_residual(&self, full_values: &[Complex64], z: Complex64) -> Result<Vec<Complex64>> {
        if full_values.len() != self.grid.node_count() {
            return Err(Error::DimensionMismatch {
                expected: self.grid.node_count(),
                got: full_values.len(),
            });
        }
        let u = self.dof_map.restrict(full_values);
        let ku = self.stiffness.matvec(&u)?;
        let cu = self.coupling.matvec(full_values)?;
        let me = self.mass_eps.matvec(&u)?;
        let mut r: Vec<Complex64> = (0..u.len()).map(|i| ku[i] - cu[i] - z * me[i]).collect();
        if let Drive::Load(rhs0) = &self.drive {
            for (ri, fi) in r.iter_mut().zip(rhs0) {
                *ri -= *fi;
            }
        }
        Ok(r)
    }

    fn factored(&self) -> Result<&ShiftedSystem> {
        if self.system.get().is_none() {
            let sys = ShiftedSystem::new(&self.stiffness, &self.mass_eps, self.center)?;
            let _ = self.system.set(sys);
        }
        Ok(self.system.get().expect("factorization just stored"))
    }

    fn dof_values(&self, v: &SpaceVector) -> Vec<Complex64> {
        if self.full_field {
            self.dof_map.restrict(v.values())
        } else {
            v.values().to_vec()
        }
    }

    fn to_space(&self, dofs: Vec<Complex64>, add_lifting: bool) -> Result<SpaceVector> {
        if self.full_field {
            let mut full = self.dof_map.embed(&dofs, Complex64::new(0.0, 0.0));
            if add_lifting {
                if let Drive::Lifting(w) = &self.drive {
                    for (a, b) in full.iter_mut().zip(w) {
                        *a += *b;
                    }
                }
            }
            self.space.vector(full)
        } else {
            self.space.vector(dofs)
        }
    }

    fn taylor_next(&self, beta: usize, cache: &[SpaceVector]) -> Result<SpaceVector> {
        let system = self.factored()?;
        if beta == 0 {
            return match &self.drive {
                Drive::Load(rhs0) => {
                    let u = system.solve(rhs0, SOLVE_TOL)?;
                    self.to_space(u, false)
                }
                Drive::Lifting(w) => {
                    let w_dofs = self.dof_map.restrict(w);
                    let mw = self.mass_eps.matvec(&w_dofs)?;
                    let rhs: Vec<Complex64> = mw.iter().map(|v| self.center * v).collect();
                    let u = system.solve(&rhs, SOLVE_TOL)?;
                    self.to_space(u, true)
                }
            };
        }
        let prev = self.dof_values(&cache[beta - 1]);
        let rhs = self.mass_eps.matvec(&prev)?;
        let u = system.solve(&rhs, SOLVE_TOL)?;
        self.to_space(u, false)
    }

    fn compute_poles(&self) -> Vec<f64> {
        match &self.pole_rule {
            PoleRule::Rectangle => {
                let h = self.grid.h;
                let lx = self.grid.nx as f64 * h;
                let ly = self.grid.ny as f64 * h;
                let kx = axis_wavenumbers(self.bcs[0], self.bcs[1], self.grid.nx, lx);
                let ky = axis_wavenumbers(self.bcs[2], self.bcs[3], self.grid.ny, ly);
                let mut poles = Vec::with_capacity(kx.len() * ky.len());
                for &a in &kx {
                    for &b in &ky {
                        poles.push(axis_eigenvalue(a, h) + axis_eigenvalue(b, h));
                    }
                }
                sort_dedup_poles(poles)
            }
            PoleRule::Layered { n1_sq, n2_sq } => {
                layered_poles(&self.grid, *n1_sq, *n2_sq)
            }
        }
    }
}

/// Exact spectrum of the two-layer Dirichlet pencil `K v = z M_eps v` via
/// separation: the medium varies in `y` only, so each `x` mode reduces the
/// problem to a small symmetric eigensolve over the interior `y` nodes.
fn layered_poles(grid: &Grid2d, n1_sq: f64, n2_sq: f64) -> Vec<f64> {
    let h = grid.h;
    let tol = h / 4.0;
    let nyi = grid.ny - 1;
    let eps: Vec<f64> = (1..grid.ny)
        .map(|iy| {
            let (_, y) = grid.node_xy(0, iy);
            layered_eps_sq(n1_sq, n2_sq, y, tol).sqrt()
        })
        .collect();
    let mut poles = Vec::with_capacity((grid.nx - 1) * nyi);
    for k in 1..grid.nx {
        let dk = 2.0 - 2.0 * (k as f64 * PI / grid.nx as f64).cos();
        let t = DenseHermitian::from_fn(nyi, |i, j| {
            let v = if i == j {
                (dk + 2.0) / (eps[i] * eps[i])
            } else if i.abs_diff(j) == 1 {
                -1.0 / (eps[i] * eps[j])
            } else {
                0.0
            };
            Complex64::new(v / (h * h), 0.0)
        })
        .expect("tridiagonal matrix is Hermitian by construction");
        poles.extend(eigh(&t).values);
    }
    sort_dedup_poles(poles)
}

fn check_center(z0: Complex64) -> Result<()> {
    if !(z0.re > 0.0) || !z0.re.is_finite() || !z0.im.is_finite() {
        return Err(Error::invalid(format!(
            "expansion center must have positive finite real part, got {z0}"
        )));
    }
    Ok(())
}

fn side_assembly(grid: &Grid2d, bcs: SideConditions) -> Result<GridAssembly> {
    let g = *grid;
    assemble_2d(
        grid,
        &move |ix, iy| {
            use BoundaryCondition::Dirichlet;
            let fixed = (ix == 0 && bcs[0] == Dirichlet)
                || (ix == g.nx && bcs[1] == Dirichlet)
                || (iy == 0 && bcs[2] == Dirichlet)
                || (iy == g.ny && bcs[3] == Dirichlet);
            if fixed {
                NodeClass::Fixed
            } else {
                NodeClass::Dof
            }
        },
        &|_, _| true,
    )
}

impl ResponseMap for HelmholtzResponseMap {
    fn space(&self) -> &Arc<WeightedSpace> {
        &self.space
    }

    fn center(&self) -> Complex64 {
        self.center
    }

    fn taylor(&self, beta: usize) -> Result<SpaceVector> {
        let mut cache = self.cache.borrow_mut();
        while cache.len() <= beta {
            let next = self.taylor_next(cache.len(), &cache)?;
            cache.push(next);
        }
        Ok(cache[beta].clone())
    }

    fn evaluate(&self, z: Complex64) -> Result<SpaceVector> {
        match &self.drive {
            Drive::Load(rhs0) => {
                let sys = ShiftedSystem::new(&self.stiffness, &self.mass_eps, z)?;
                let u = sys.solve(rhs0, SOLVE_TOL)?;
                self.to_space(u, false)
            }
            Drive::Lifting(w) => {
                let w_dofs = self.dof_map.restrict(w);
                let mw = self.mass_eps.matvec(&w_dofs)?;
                let rhs: Vec<Complex64> = mw.iter().map(|v| z * v).collect();
                let sys = ShiftedSystem::new(&self.stiffness, &self.mass_eps, z)?;
                let u = sys.solve(&rhs, SOLVE_TOL)?;
                self.to_space(u, true)
            }
        }
    }

    fn poles(&self) -> Option<Vec<f64>> {
        if self.poles_cache.get().is_none() {
            let _ = self.poles_cache.set(self.compute_poles());
        }
        self.poles_cache.get().cloned()
    }
}
