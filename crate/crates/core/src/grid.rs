//! Uniform tensor grids, node classification, and finite-difference assembly.
//!
//! Discrete energies come from the edge form
//! `sum_e w_e |u_a - u_b|^2` with `w_e = (adjacent cells in domain) / 2`,
//! which reproduces the five-point stencil at interior nodes and the
//! ghost-node-eliminated one-sided stencil on Neumann boundaries. Masses are
//! lumped trapezoid weights `h^2 * (adjacent cells in domain) / 4`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;

/// Uniform grid on a rectangle; `nx`/`ny` count cells, nodes are
/// `(nx + 1) * (ny + 1)` in row-major order (x fastest).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2d {
    pub x0: f64,
    pub y0: f64,
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid2d {
    pub fn from_box(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || x1 <= x0 || y1 <= y0 {
            return Err(Error::invalid("grid box must be non-empty"));
        }
        let hx = (x1 - x0) / nx as f64;
        let hy = (y1 - y0) / ny as f64;
        if (hx - hy).abs() > 1e-12 * hx.max(hy) {
            return Err(Error::invalid(format!(
                "grid spacing must be uniform in both directions (hx = {hx}, hy = {hy})"
            )));
        }
        Ok(Grid2d {
            x0,
            y0,
            h: hx,
            nx,
            ny,
        })
    }

    pub fn nodes_x(&self) -> usize {
        self.nx + 1
    }

    pub fn nodes_y(&self) -> usize {
        self.ny + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes_x() * self.nodes_y()
    }

    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nodes_x() + ix
    }

    pub fn node_coords(&self, index: usize) -> (usize, usize) {
        (index % self.nodes_x(), index / self.nodes_x())
    }

    pub fn node_xy(&self, ix: usize, iy: usize) -> (f64, f64) {
        (self.x0 + ix as f64 * self.h, self.y0 + iy as f64 * self.h)
    }

    pub fn on_outer_boundary(&self, ix: usize, iy: usize) -> bool {
        ix == 0 || iy == 0 || ix == self.nx || iy == self.ny
    }
}

/// Role of a node in the assembled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    /// Unknown degree of freedom.
    Dof,
    /// Value prescribed externally (zero for homogeneous Dirichlet).
    Fixed,
    /// Not part of the computational domain.
    Outside,
}

/// Mapping between grid nodes and assembled degrees of freedom.
#[derive(Debug, Clone)]
pub struct DofMap {
    node_to_dof: Vec<Option<usize>>,
    dof_to_node: Vec<usize>,
}

impl DofMap {
    pub fn dof_count(&self) -> usize {
        self.dof_to_node.len()
    }

    pub fn dof_of_node(&self, node: usize) -> Option<usize> {
        self.node_to_dof[node]
    }

    pub fn node_of_dof(&self, dof: usize) -> usize {
        self.dof_to_node[dof]
    }

    /// Scatter DOF values into a full-node vector, `fill` elsewhere.
    pub fn embed(&self, dof_values: &[Complex64], fill: Complex64) -> Vec<Complex64> {
        let mut full = vec![fill; self.node_to_dof.len()];
        for (dof, &node) in self.dof_to_node.iter().enumerate() {
            full[node] = dof_values[dof];
        }
        full
    }

    /// Gather DOF values out of a full-node vector.
    pub fn restrict(&self, node_values: &[Complex64]) -> Vec<Complex64> {
        self.dof_to_node.iter().map(|&n| node_values[n]).collect()
    }
}

/// Stiffness/mass pair over the DOF set plus the coupling to `Fixed` nodes.
#[derive(Debug, Clone)]
pub struct GridAssembly {
    pub stiffness: SparseMatrix,
    /// Diagonal lumped mass over DOFs (no refraction weighting).
    pub mass: SparseMatrix,
    /// `dof x node_count` edge weights toward `Fixed` neighbors; a Dirichlet
    /// lift with boundary data `g` solves `stiffness u = coupling g`.
    pub coupling: SparseMatrix,
    pub dof_map: DofMap,
}

/// Assembles the edge-form stiffness and trapezoid mass on the sub-domain
/// selected by `classify` and `cell_in_domain`.
pub fn assemble_2d(
    grid: &Grid2d,
    classify: &dyn Fn(usize, usize) -> NodeClass,
    cell_in_domain: &dyn Fn(usize, usize) -> bool,
) -> Result<GridAssembly> {
    let total = grid.node_count();
    let mut node_to_dof = vec![None; total];
    let mut dof_to_node = Vec::new();
    let mut class = vec![NodeClass::Outside; total];
    for iy in 0..grid.nodes_y() {
        for ix in 0..grid.nodes_x() {
            let n = grid.node_index(ix, iy);
            class[n] = classify(ix, iy);
            if class[n] == NodeClass::Dof {
                node_to_dof[n] = Some(dof_to_node.len());
                dof_to_node.push(n);
            }
        }
    }
    let ndof = dof_to_node.len();
    if ndof == 0 {
        return Err(Error::invalid("domain has no degrees of freedom"));
    }

    // Count of domain cells adjacent to the cell slot (cx, cy); slots outside
    // the grid or outside the domain contribute nothing.
    let cell_counts = |cells: &[(isize, isize)]| -> usize {
        cells
            .iter()
            .filter(|&&(cx, cy)| {
                cx >= 0
                    && cy >= 0
                    && (cx as usize) < grid.nx
                    && (cy as usize) < grid.ny
                    && cell_in_domain(cx as usize, cy as usize)
            })
            .count()
    };

    let mut stiff = Vec::new();
    let mut couple = Vec::new();
    let mut mass_diag = vec![0.0f64; ndof];

    let mut push_edge = |na: usize, nb: usize, weight: f64| {
        if weight == 0.0 {
            return;
        }
        let w = Complex64::new(weight, 0.0);
        match (node_to_dof[na], node_to_dof[nb]) {
            (Some(a), Some(b)) => {
                stiff.push((a, a, w));
                stiff.push((b, b, w));
                stiff.push((a, b, -w));
                stiff.push((b, a, -w));
            }
            (Some(a), None) if class[nb] == NodeClass::Fixed => {
                stiff.push((a, a, w));
                couple.push((a, nb, w));
            }
            (None, Some(b)) if class[na] == NodeClass::Fixed => {
                stiff.push((b, b, w));
                couple.push((b, na, w));
            }
            _ => {}
        }
    };

    // Horizontal edges between (ix, iy) and (ix + 1, iy).
    for iy in 0..grid.nodes_y() {
        for ix in 0..grid.nx {
            let cells = [(ix as isize, iy as isize - 1), (ix as isize, iy as isize)];
            let w = cell_counts(&cells) as f64 / 2.0;
            push_edge(grid.node_index(ix, iy), grid.node_index(ix + 1, iy), w);
        }
    }
    // Vertical edges between (ix, iy) and (ix, iy + 1).
    for iy in 0..grid.ny {
        for ix in 0..grid.nodes_x() {
            let cells = [(ix as isize - 1, iy as isize), (ix as isize, iy as isize)];
            let w = cell_counts(&cells) as f64 / 2.0;
            push_edge(grid.node_index(ix, iy), grid.node_index(ix, iy + 1), w);
        }
    }

    let h2 = grid.h * grid.h;
    for (dof, &node) in dof_to_node.iter().enumerate() {
        let (ix, iy) = grid.node_coords(node);
        let cells = [
            (ix as isize - 1, iy as isize - 1),
            (ix as isize, iy as isize - 1),
            (ix as isize - 1, iy as isize),
            (ix as isize, iy as isize),
        ];
        mass_diag[dof] = h2 * cell_counts(&cells) as f64 / 4.0;
    }

    let dof_map = DofMap {
        node_to_dof,
        dof_to_node,
    };
    let stiffness = SparseMatrix::from_triplets(ndof, ndof, &stiff)?;
    let mass = SparseMatrix::diagonal(
        &mass_diag
            .iter()
            .map(|&m| Complex64::new(m, 0.0))
            .collect::<Vec<_>>(),
    );
    let coupling = SparseMatrix::from_triplets(ndof, total, &couple)?;
    Ok(GridAssembly {
        stiffness,
        mass,
        coupling,
        dof_map,
    })
}
