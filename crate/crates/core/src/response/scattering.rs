//! Finite-difference scattering response map on a square annulus.
//!
//! The domain is `[-2, 2]^2` minus the obstacle `[-0.5, 0.5]^2`. The field
//! vanishes on the obstacle boundary and satisfies an impedance condition
//! `du/dn - i z u = g_z` on the outer boundary, with data radiated by a unit
//! plane wave along `d`. The solve operator is the quadratic pencil
//! `K - z^2 M - i z B` where `B` is the lumped outer-boundary mass.

use std::cell::{OnceCell, RefCell};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{assemble_2d, DofMap, Grid2d, NodeClass};
use crate::linalg::{ShiftedSystem, SparseMatrix};
use crate::response::ResponseMap;
use crate::space::{SpaceVector, WeightedSpace};

const SOLVE_TOL: f64 = 1e-10;
const HALF_WIDTH: f64 = 2.0;
const OBSTACLE_HALF_WIDTH: f64 = 0.5;

/// Quadrature point on the outer boundary with its outward unit normal.
#[derive(Debug, Clone, Copy)]
pub struct BoundarySample {
    pub x: f64,
    pub y: f64,
    pub normal: (f64, f64),
}

impl BoundarySample {
    fn phase(&self, d: (f64, f64)) -> f64 {
        d.0 * self.x + d.1 * self.y
    }

    fn alignment(&self, d: (f64, f64)) -> f64 {
        d.0 * self.normal.0 + d.1 * self.normal.1
    }
}

/// Taylor coefficients in `z` around `z0` of the impedance data
/// `g_z = i z (d.n - 1) exp(i z d.x)`, one value per sample:
/// `i z0 (d.n - 1) (i d.x)^beta / beta! exp(i z0 d.x)` plus, for
/// `beta >= 1`, `i (d.n - 1) (i d.x)^(beta-1) / (beta-1)! exp(i z0 d.x)`.
pub fn impedance_taylor(
    beta: usize,
    z0: Complex64,
    d: (f64, f64),
    samples: &[BoundarySample],
) -> Vec<Complex64> {
    let i = Complex64::new(0.0, 1.0);
    samples
        .iter()
        .map(|s| {
            let a = s.phase(d);
            let ia = i * a;
            let mut pow = Complex64::new(1.0, 0.0);
            for k in 1..=beta {
                pow *= ia / k as f64;
            }
            let mut val = i * z0 * pow;
            if beta >= 1 {
                let mut prev = Complex64::new(1.0, 0.0);
                for k in 1..beta {
                    prev *= ia / k as f64;
                }
                val += i * prev;
            }
            val * (s.alignment(d) - 1.0) * (i * z0 * a).exp()
        })
        .collect()
}

/// Scattering frequency-response map driven by a plane wave.
pub struct ScatteringResponseMap {
    grid: Grid2d,
    space: Arc<WeightedSpace>,
    dof_map: DofMap,
    stiffness: SparseMatrix,
    mass: SparseMatrix,
    robin: SparseMatrix,
    /// Trapezoid boundary quadrature: (dof, sample, weight).
    entries: Vec<(usize, BoundarySample, f64)>,
    direction: (f64, f64),
    center: Complex64,
    system: OnceCell<ShiftedSystem>,
    cache: RefCell<Vec<SpaceVector>>,
}

impl std::fmt::Debug for ScatteringResponseMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScatteringResponseMap")
            .field("grid", &self.grid)
            .field("center", &self.center)
            .field("direction", &self.direction)
            .finish()
    }
}

impl ScatteringResponseMap {
    /// `cells` is the per-side cell count of the full square and must be a
    /// multiple of 8 so the obstacle boundary falls on grid lines;
    /// `direction_angle` is the incidence angle in radians.
    pub fn new(cells: usize, direction_angle: f64, z0: Complex64) -> Result<Self> {
        if cells < 8 || cells % 8 != 0 {
            return Err(Error::invalid(
                "scattering grids need a cell count that is a positive multiple of 8",
            ));
        }
        if !(z0.re > 0.0) || !z0.re.is_finite() || !z0.im.is_finite() {
            return Err(Error::invalid(format!(
                "expansion center must have positive finite real part, got {z0}"
            )));
        }
        let grid = Grid2d::from_box(-HALF_WIDTH, HALF_WIDTH, -HALF_WIDTH, HALF_WIDTH, cells, cells)?;
        let h = grid.h;
        let band = h / 4.0;
        let g = grid;
        let classify = move |ix: usize, iy: usize| {
            let (x, y) = g.node_xy(ix, iy);
            let m = x.abs().max(y.abs());
            if (m - OBSTACLE_HALF_WIDTH).abs() < band {
                NodeClass::Fixed
            } else if m < OBSTACLE_HALF_WIDTH - band {
                NodeClass::Outside
            } else {
                NodeClass::Dof
            }
        };
        let cell_in_domain = move |cx: usize, cy: usize| {
            let x = g.x0 + (cx as f64 + 0.5) * g.h;
            let y = g.y0 + (cy as f64 + 0.5) * g.h;
            !(x.abs() < OBSTACLE_HALF_WIDTH && y.abs() < OBSTACLE_HALF_WIDTH)
        };
        let asm = assemble_2d(&grid, &classify, &cell_in_domain)?;

        let mut entries = Vec::new();
        let mut push = |node: usize, normal: (f64, f64)| {
            let dof = asm
                .dof_map
                .dof_of_node(node)
                .expect("outer boundary nodes carry degrees of freedom");
            let (ix, iy) = grid.node_coords(node);
            let (x, y) = grid.node_xy(ix, iy);
            entries.push((dof, BoundarySample { x, y, normal }, h / 2.0));
        };
        for iy in 0..cells {
            for e in [iy, iy + 1] {
                push(grid.node_index(0, e), (-1.0, 0.0));
                push(grid.node_index(cells, e), (1.0, 0.0));
            }
        }
        for ix in 0..cells {
            for e in [ix, ix + 1] {
                push(grid.node_index(e, 0), (0.0, -1.0));
                push(grid.node_index(e, cells), (0.0, 1.0));
            }
        }

        let ndof = asm.dof_map.dof_count();
        let mut robin_diag = vec![Complex64::new(0.0, 0.0); ndof];
        for (dof, _, w) in &entries {
            robin_diag[*dof] += *w;
        }
        let robin = SparseMatrix::diagonal(&robin_diag);

        let space = WeightedSpace::new(
            asm.stiffness.clone(),
            asm.mass.clone(),
            Some(robin.clone()),
            z0.re,
        )?;
        Ok(ScatteringResponseMap {
            grid,
            space,
            dof_map: asm.dof_map,
            stiffness: asm.stiffness,
            mass: asm.mass,
            robin,
            entries,
            direction: (direction_angle.cos(), direction_angle.sin()),
            center: z0,
            system: OnceCell::new(),
            cache: RefCell::new(Vec::new()),
        })
    }

    pub fn grid(&self) -> &Grid2d {
        &self.grid
    }

    pub fn dof_map(&self) -> &DofMap {
        &self.dof_map
    }

    pub fn direction(&self) -> (f64, f64) {
        self.direction
    }

    pub fn boundary_samples(&self) -> impl Iterator<Item = &BoundarySample> {
        self.entries.iter().map(|(_, s, _)| s)
    }

    /// Full-node values of a map vector; obstacle nodes carry zeros.
    pub fn full_field(&self, v: &SpaceVector) -> Vec<Complex64> {
        self.dof_map.embed(v.values(), Complex64::new(0.0, 0.0))
    }

    fn pencil(&self, z: Complex64) -> Result<SparseMatrix> {
        let i = Complex64::new(0.0, 1.0);
        self.stiffness
            .add_scaled(-z * z, &self.mass)?
            .add_scaled(-i * z, &self.robin)
    }

    fn factored(&self) -> Result<&ShiftedSystem> {
        if self.system.get().is_none() {
            let sys = ShiftedSystem::from_matrix(self.pencil(self.center)?, self.center)?;
            let _ = self.system.set(sys);
        }
        Ok(self.system.get().expect("factorization just stored"))
    }

    fn samples(&self) -> Vec<BoundarySample> {
        self.entries.iter().map(|(_, s, _)| *s).collect()
    }

    /// Boundary load vector with the given per-sample data values.
    fn load_from(&self, data: &[Complex64]) -> Vec<Complex64> {
        let mut load = vec![Complex64::new(0.0, 0.0); self.dof_map.dof_count()];
        for ((dof, _, w), val) in self.entries.iter().zip(data) {
            load[*dof] += *val * *w;
        }
        load
    }

    fn taylor_load(&self, beta: usize) -> Vec<Complex64> {
        let data = impedance_taylor(beta, self.center, self.direction, &self.samples());
        self.load_from(&data)
    }

    fn taylor_next(&self, beta: usize, cache: &[SpaceVector]) -> Result<SpaceVector> {
        let system = self.factored()?;
        let mut rhs = self.taylor_load(beta);
        if beta >= 1 {
            let prev = cache[beta - 1].values();
            let m_prev = self.mass.matvec(prev)?;
            let b_prev = self.robin.matvec(prev)?;
            let two_z0 = 2.0 * self.center;
            let i = Complex64::new(0.0, 1.0);
            for (r, (m, b)) in rhs.iter_mut().zip(m_prev.iter().zip(&b_prev)) {
                *r += two_z0 * *m + i * *b;
            }
        }
        if beta >= 2 {
            let m_prev2 = self.mass.matvec(cache[beta - 2].values())?;
            for (r, m) in rhs.iter_mut().zip(&m_prev2) {
                *r += *m;
            }
        }
        let u = system.solve(&rhs, SOLVE_TOL)?;
        self.space.vector(u)
    }
}

impl ResponseMap for ScatteringResponseMap {
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
        let i = Complex64::new(0.0, 1.0);
        let data: Vec<Complex64> = self
            .samples()
            .iter()
            .map(|s| {
                let a = s.phase(self.direction);
                i * z * (s.alignment(self.direction) - 1.0) * (i * z * a).exp()
            })
            .collect();
        let rhs = self.load_from(&data);
        let sys = ShiftedSystem::from_matrix(self.pencil(z)?, z)?;
        let u = sys.solve(&rhs, SOLVE_TOL)?;
        self.space.vector(u)
    }

    fn poles(&self) -> Option<Vec<f64>> {
        None
    }
}
