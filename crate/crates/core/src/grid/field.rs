use crate::error::{Error, Result};

use super::Grid;

/// Nodal values of a scalar quantity on the spatial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    nodes: Vec<usize>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> ScalarField {
        ScalarField {
            nodes: grid.nodes().to_vec(),
            values: vec![0.0; grid.n_nodes()],
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> ScalarField {
        ScalarField {
            nodes: grid.nodes().to_vec(),
            values: vec![c; grid.n_nodes()],
        }
    }

    /// Panics if the length does not match the grid; use [`ScalarField::try_new`]
    /// for untrusted input.
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> ScalarField {
        assert_eq!(values.len(), grid.n_nodes(), "field length must match grid");
        ScalarField {
            nodes: grid.nodes().to_vec(),
            values,
        }
    }

    pub fn try_new(grid: &Grid, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != grid.n_nodes() {
            return Err(Error::Shape(format!(
                "field has {} values, grid has {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite value at node {i}")));
        }
        Ok(ScalarField::from_values(grid, values))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn matches(&self, grid: &Grid) -> bool {
        self.nodes == grid.nodes()
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        if !self.matches(grid) {
            return Err(Error::Shape(format!(
                "field laid out on {:?} nodes, grid has {:?}",
                self.nodes,
                grid.nodes()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            nodes: self.nodes.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert_eq!(self.nodes, other.nodes, "fields on different grids");
        ScalarField {
            nodes: self.nodes.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> ScalarField {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// A `d`-component vector field on the spatial grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> VectorField {
        VectorField {
            components: (0..grid.dim()).map(|_| ScalarField::zeros(grid)).collect(),
        }
    }

    pub fn from_components(components: Vec<ScalarField>) -> VectorField {
        assert!(!components.is_empty(), "vector field needs a component");
        VectorField { components }
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.components
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.components[i]
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        if self.components.len() != grid.dim() {
            return Err(Error::Shape(format!(
                "vector field has {} components on a {}-dimensional grid",
                self.components.len(),
                grid.dim()
            )));
        }
        self.components.iter().try_for_each(|c| c.check(grid))
    }

    pub fn map_components(&self, f: impl Fn(&ScalarField) -> ScalarField) -> VectorField {
        VectorField {
            components: self.components.iter().map(f).collect(),
        }
    }

    pub fn zip_components(
        &self,
        other: &VectorField,
        f: impl Fn(&ScalarField, &ScalarField) -> ScalarField,
    ) -> VectorField {
        VectorField {
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, c: f64) -> VectorField {
        self.map_components(|f| f.scale(c))
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        self.zip_components(other, |a, b| a.add(b))
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        self.zip_components(other, |a, b| a.sub(b))
    }

    /// Pointwise squared Euclidean norm.
    pub fn norm_sq(&self) -> ScalarField {
        let mut acc = self.components[0].map(|v| v * v);
        for c in &self.components[1..] {
            acc = acc.zip_map(c, |a, b| a + b * b);
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.components.iter().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(|c| c.is_finite())
    }
}

/// Either kind of spatial field, as accepted by [`super::diff`].
#[derive(Clone, Debug, PartialEq)]
pub enum Field {
    Scalar(ScalarField),
    Vector(VectorField),
}

impl Field {
    pub fn into_scalar(self) -> Option<ScalarField> {
        match self {
            Field::Scalar(s) => Some(s),
            Field::Vector(_) => None,
        }
    }

    pub fn into_vector(self) -> Option<VectorField> {
        match self {
            Field::Vector(v) => Some(v),
            Field::Scalar(_) => None,
        }
    }
}

/// A scalar quantity on the whole space-time grid, stored level by level
/// (time slowest).
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    nodes: Vec<usize>,
    n_levels: usize,
    values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: &Grid) -> SpaceTimeField {
        SpaceTimeField {
            nodes: grid.nodes().to_vec(),
            n_levels: grid.n_levels(),
            values: vec![0.0; grid.n_levels() * grid.n_nodes()],
        }
    }

    pub fn from_levels(grid: &Grid, levels: &[ScalarField]) -> SpaceTimeField {
        let mut values = Vec::with_capacity(levels.len() * grid.n_nodes());
        for l in levels {
            assert!(l.matches(grid), "level laid out on a different grid");
            values.extend_from_slice(l.values());
        }
        SpaceTimeField {
            nodes: grid.nodes().to_vec(),
            n_levels: levels.len(),
            values,
        }
    }

    pub fn from_values(grid: &Grid, n_levels: usize, values: Vec<f64>) -> SpaceTimeField {
        assert_eq!(values.len(), n_levels * grid.n_nodes(), "space-time length mismatch");
        SpaceTimeField {
            nodes: grid.nodes().to_vec(),
            n_levels,
            values,
        }
    }

    /// Tabulates `f(x, t)` on every level of the grid's time axis.
    pub fn tabulate(grid: &Grid, f: impl Fn(&[f64], f64) -> f64) -> SpaceTimeField {
        let n = grid.n_nodes();
        let mut values = vec![0.0; grid.n_levels() * n];
        let mut p = vec![0.0; grid.dim()];
        for level in 0..grid.n_levels() {
            let t = grid.time(level);
            for node in 0..n {
                for (a, slot) in p.iter_mut().enumerate() {
                    *slot = grid.coord(node, a);
                }
                values[level * n + node] = f(&p, t);
            }
        }
        SpaceTimeField {
            nodes: grid.nodes().to_vec(),
            n_levels: grid.n_levels(),
            values,
        }
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Array shape with the time axis first.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.n_levels];
        d.extend_from_slice(&self.nodes);
        d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let n = self.n_nodes();
        &self.values[k * n..(k + 1) * n]
    }

    pub fn level_field(&self, grid: &Grid, k: usize) -> ScalarField {
        ScalarField::from_values(grid, self.level(k).to_vec())
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        if self.nodes != grid.nodes() || self.n_levels != grid.n_levels() {
            return Err(Error::Shape(format!(
                "space-time field is {:?} x {} levels, grid is {:?} x {} levels",
                self.nodes,
                self.n_levels,
                grid.nodes(),
                grid.n_levels()
            )));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> SpaceTimeField {
        SpaceTimeField {
            nodes: self.nodes.clone(),
            n_levels: self.n_levels,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &SpaceTimeField, f: impl Fn(f64, f64) -> f64) -> SpaceTimeField {
        assert_eq!(self.dims(), other.dims(), "space-time fields differ in shape");
        SpaceTimeField {
            nodes: self.nodes.clone(),
            n_levels: self.n_levels,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn with_values(&self, values: Vec<f64>) -> SpaceTimeField {
        assert_eq!(values.len(), self.values.len());
        SpaceTimeField {
            nodes: self.nodes.clone(),
            n_levels: self.n_levels,
            values,
        }
    }

    pub fn scale(&self, c: f64) -> SpaceTimeField {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &SpaceTimeField) -> SpaceTimeField {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SpaceTimeField) -> SpaceTimeField {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &SpaceTimeField) -> SpaceTimeField {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}
