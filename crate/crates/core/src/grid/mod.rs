//! Discrete geometry of the box domain, its boundary collar subdomains and
//! the time axis, together with the finite-difference operators and discrete
//! Sobolev norms used by every other module.
//!
//! Nodes are stored row-major (axis 0 slowest). The boundary `Γ` is the set of
//! nodes lying on a face of the box. The observation subdomain `ω` is the
//! collar of nodes whose index distance to `Γ` is below `omega_width`, and
//! `ω′ ⊂ ω` is the thinner collar of width `omega_prime_width`.

mod field;
pub mod io;
mod norms;
pub mod ops;
mod time;

pub use field::{Field, ScalarField, SpaceTimeField, VectorField};
pub use norms::{sobolev_norm, sobolev_norm_sq, space_time_sobolev_norm_sq, NormRegion};
pub use ops::{
    diff, divergence, grad_div, gradient, laplacian, mixed, partial, rot, second, vector_laplacian,
    DiffKind,
};
pub use time::{centered_weights, fornberg_weights, window_derivative};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest Sobolev order supported by the discrete norms.
pub const MAX_NORM_ORDER: usize = 3;

/// Declarative description of a grid, as read from a run config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Lower corner of the box `Ω`.
    pub lower: Vec<f64>,
    /// Upper corner of the box `Ω`.
    pub upper: Vec<f64>,
    /// Node count per axis, boundary nodes included.
    pub nodes: Vec<usize>,
    /// Time step.
    pub dt: f64,
    /// Horizon `T`.
    pub t_final: f64,
    /// Snapshot time `t₀`, snapped to the nearest time level.
    pub t0: f64,
    /// Width of the collar `ω` in cells.
    #[serde(default = "default_omega_width")]
    pub omega_width: usize,
    /// Width of the inner collar `ω′` in cells.
    #[serde(default = "default_omega_prime_width")]
    pub omega_prime_width: usize,
}

fn default_omega_width() -> usize {
    4
}

fn default_omega_prime_width() -> usize {
    2
}

/// Spatial regions over which quadratures and norms can be restricted.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    /// The whole closed box.
    Omega,
    /// Nodes not on `Γ`.
    Interior,
    /// Nodes on `Γ`.
    Boundary,
    /// The observation collar `ω`.
    Collar,
    /// The inner collar `ω′`.
    InnerCollar,
}

#[derive(Clone, Debug)]
pub struct Grid {
    dim: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
    nodes: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    n_nodes: usize,
    dt: f64,
    n_steps: usize,
    t0_index: usize,
    omega_width: usize,
    omega_prime_width: usize,
    // per-node index distance to Γ, in cells
    boundary_distance: Vec<usize>,
    quad_weights: Vec<f64>,
}

impl Grid {
    pub fn new(spec: &GridSpec) -> Result<Grid> {
        let dim = spec.nodes.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::validation(
                "grid dimension",
                format!("expected 1, 2 or 3 axes, got {dim}"),
            ));
        }
        if spec.lower.len() != dim || spec.upper.len() != dim {
            return Err(Error::validation(
                "grid extents",
                format!(
                    "lower/upper have {}/{} entries for {dim} axes",
                    spec.lower.len(),
                    spec.upper.len()
                ),
            ));
        }
        for axis in 0..dim {
            let (a, b) = (spec.lower[axis], spec.upper[axis]);
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::validation(
                    "grid extents",
                    format!("axis {axis}: need lower < upper, got [{a}, {b}]"),
                ));
            }
            // Γ-nodes must touch an interior node.
            if spec.nodes[axis] < 3 {
                return Err(Error::validation(
                    "boundary adjacency",
                    format!(
                        "axis {axis} has {} nodes; at least 3 are needed so every boundary node borders an interior node",
                        spec.nodes[axis]
                    ),
                ));
            }
        }
        if !(spec.dt.is_finite() && spec.dt > 0.0) {
            return Err(Error::validation("time step", format!("dt must be positive, got {}", spec.dt)));
        }
        if !(spec.t_final.is_finite() && spec.t_final > 0.0) {
            return Err(Error::validation("horizon", format!("T must be positive, got {}", spec.t_final)));
        }
        let steps = spec.t_final / spec.dt;
        let n_steps = steps.round() as usize;
        if n_steps < 2 || (steps - n_steps as f64).abs() > 1e-6 * steps.max(1.0) {
            return Err(Error::validation(
                "time axis",
                format!("T/dt = {steps} must be an integer number of steps >= 2"),
            ));
        }
        let t0_index = (spec.t0 / spec.dt).round() as i64;
        if t0_index <= 0 || t0_index >= n_steps as i64 {
            return Err(Error::validation(
                "t0 placement",
                format!("t0 = {} must lie strictly inside (0, T) = (0, {})", spec.t0, spec.t_final),
            ));
        }
        if spec.omega_width < 3 {
            return Err(Error::validation(
                "collar width",
                format!("omega must be a collar of at least 3 cells, got {}", spec.omega_width),
            ));
        }
        if spec.omega_prime_width == 0 || spec.omega_prime_width + 1 > spec.omega_width {
            return Err(Error::validation(
                "collar nesting",
                format!(
                    "omega' width {} must be >= 1 and leave at least one cell of separation inside omega width {}",
                    spec.omega_prime_width, spec.omega_width
                ),
            ));
        }
        let spacing: Vec<f64> = (0..dim)
            .map(|a| (spec.upper[a] - spec.lower[a]) / (spec.nodes[a] - 1) as f64)
            .collect();
        let mut strides = vec![1usize; dim];
        for a in (0..dim.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * spec.nodes[a + 1];
        }
        let n_nodes: usize = spec.nodes.iter().product();

        let mut grid = Grid {
            dim,
            lower: spec.lower.clone(),
            upper: spec.upper.clone(),
            nodes: spec.nodes.clone(),
            spacing,
            strides,
            n_nodes,
            dt: spec.dt,
            n_steps,
            t0_index: t0_index as usize,
            omega_width: spec.omega_width,
            omega_prime_width: spec.omega_prime_width,
            boundary_distance: Vec::new(),
            quad_weights: Vec::new(),
        };
        grid.boundary_distance = (0..n_nodes)
            .map(|node| {
                (0..dim)
                    .map(|a| {
                        let k = grid.axis_index(node, a);
                        k.min(grid.nodes[a] - 1 - k)
                    })
                    .min()
                    .unwrap_or(0)
            })
            .collect();
        grid.quad_weights = (0..n_nodes)
            .map(|node| {
                (0..dim)
                    .map(|a| {
                        let k = grid.axis_index(node, a);
                        let h = grid.spacing[a];
                        if k == 0 || k == grid.nodes[a] - 1 {
                            0.5 * h
                        } else {
                            h
                        }
                    })
                    .product()
            })
            .collect();
        Ok(grid)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn min_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    #[inline]
    pub fn axis_index(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.nodes[axis]
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        (0..self.dim).map(|a| self.axis_index(node, a)).collect()
    }

    pub fn node_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(k, s)| k * s).sum()
    }

    #[inline]
    pub fn coord(&self, node: usize, axis: usize) -> f64 {
        self.lower[axis] + self.axis_index(node, axis) as f64 * self.spacing[axis]
    }

    pub fn point(&self, node: usize) -> Vec<f64> {
        (0..self.dim).map(|a| self.coord(node, a)).collect()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary_distance[node] == 0
    }

    /// Index distance (in cells) from a node to `Γ`.
    pub fn boundary_distance(&self, node: usize) -> usize {
        self.boundary_distance[node]
    }

    pub fn in_region(&self, node: usize, region: Region) -> bool {
        let d = self.boundary_distance[node];
        match region {
            Region::Omega => true,
            Region::Interior => d > 0,
            Region::Boundary => d == 0,
            Region::Collar => d < self.omega_width,
            Region::InnerCollar => d < self.omega_prime_width,
        }
    }

    pub fn mask(&self, region: Region) -> Vec<bool> {
        (0..self.n_nodes).map(|n| self.in_region(n, region)).collect()
    }

    pub fn omega_width(&self) -> usize {
        self.omega_width
    }

    pub fn omega_prime_width(&self) -> usize {
        self.omega_prime_width
    }

    /// Trapezoidal quadrature weight of each node over the closed box.
    pub fn quadrature_weights(&self) -> &[f64] {
        &self.quad_weights
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_levels(&self) -> usize {
        self.n_steps + 1
    }

    pub fn t_final(&self) -> f64 {
        self.n_steps as f64 * self.dt
    }

    pub fn time(&self, level: usize) -> f64 {
        level as f64 * self.dt
    }

    pub fn t0_index(&self) -> usize {
        self.t0_index
    }

    pub fn t0(&self) -> f64 {
        self.time(self.t0_index)
    }

    /// Trapezoidal weights on the time axis.
    pub fn time_weights(&self) -> Vec<f64> {
        let n = self.n_levels();
        (0..n)
            .map(|k| if k == 0 || k == n - 1 { 0.5 * self.dt } else { self.dt })
            .collect()
    }

    /// Same geometry, different time axis.
    pub fn with_time_axis(&self, dt: f64, t_final: f64, t0: f64) -> Result<Grid> {
        let mut spec = self.spec();
        spec.dt = dt;
        spec.t_final = t_final;
        spec.t0 = t0;
        Grid::new(&spec)
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            lower: self.lower.clone(),
            upper: self.upper.clone(),
            nodes: self.nodes.clone(),
            dt: self.dt,
            t_final: self.t_final(),
            t0: self.t0(),
            omega_width: self.omega_width,
            omega_prime_width: self.omega_prime_width,
        }
    }

    /// Largest distance from `x0` to a node of the closed box.
    pub fn max_distance_from(&self, x0: &[f64]) -> f64 {
        // attained at a corner of the box
        let mut acc = 0.0;
        for a in 0..self.dim {
            let d = (self.lower[a] - x0[a]).abs().max((self.upper[a] - x0[a]).abs());
            acc += d * d;
        }
        acc.sqrt()
    }

    /// Distance from `x0` to the closed box (zero when inside).
    pub fn distance_to_box(&self, x0: &[f64]) -> f64 {
        let mut acc = 0.0;
        for a in 0..self.dim {
            let d = if x0[a] < self.lower[a] {
                self.lower[a] - x0[a]
            } else if x0[a] > self.upper[a] {
                x0[a] - self.upper[a]
            } else {
                0.0
            };
            acc += d * d;
        }
        acc.sqrt()
    }

    pub fn same_geometry(&self, other: &Grid) -> bool {
        self.nodes == other.nodes && self.lower == other.lower && self.upper == other.upper
    }

    /// Tabulates a function of the spatial coordinates.
    pub fn tabulate(&self, f: impl Fn(&[f64]) -> f64) -> ScalarField {
        let mut p = vec![0.0; self.dim];
        let values = (0..self.n_nodes)
            .map(|node| {
                for (a, slot) in p.iter_mut().enumerate() {
                    *slot = self.coord(node, a);
                }
                f(&p)
            })
            .collect();
        ScalarField::from_values(self, values)
    }

    /// Tabulates a function of the node index.
    pub fn tabulate_nodes(&self, f: impl Fn(usize) -> f64) -> ScalarField {
        ScalarField::from_values(self, (0..self.n_nodes).map(f).collect())
    }
}
