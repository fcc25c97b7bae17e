//! Finite-difference operators.
//!
//! First derivatives use the centered three-point stencil in the interior and
//! the one-sided second-order stencil `(-3f0 + 4f1 - f2) / 2h` at the ends.
//! Pure second derivatives use `(f-1 - 2f0 + f1) / h^2` in the interior and
//! `(2f0 - 5f1 + 4f2 - f3) / h^2` at the ends. Mixed derivatives are
//! compositions of first derivatives.

use rayon::prelude::*;

use crate::error::{Error, Result};

use super::field::{Field, ScalarField, SpaceTimeField, VectorField};
use super::Grid;

/// Arrays at least this long are processed in parallel.
const PAR_THRESHOLD: usize = 1 << 14;

pub(crate) fn build(len: usize, f: impl Fn(usize) -> f64 + Sync + Send) -> Vec<f64> {
    if len >= PAR_THRESHOLD {
        (0..len).into_par_iter().map(f).collect()
    } else {
        (0..len).map(f).collect()
    }
}

fn stride_of(dims: &[usize], axis: usize) -> usize {
    dims[axis + 1..].iter().product()
}

/// First derivative along `axis` of a row-major array of shape `dims`.
pub fn stencil_d1(data: &[f64], dims: &[usize], axis: usize, h: f64) -> Vec<f64> {
    let n = dims[axis];
    let st = stride_of(dims, axis);
    debug_assert!(n >= 3);
    let inv = 0.5 / h;
    build(data.len(), |i| {
        let k = (i / st) % n;
        if k == 0 {
            (-3.0 * data[i] + 4.0 * data[i + st] - data[i + 2 * st]) * inv
        } else if k == n - 1 {
            (3.0 * data[i] - 4.0 * data[i - st] + data[i - 2 * st]) * inv
        } else {
            (data[i + st] - data[i - st]) * inv
        }
    })
}

/// Second derivative along `axis` of a row-major array of shape `dims`.
pub fn stencil_d2(data: &[f64], dims: &[usize], axis: usize, h: f64) -> Vec<f64> {
    let n = dims[axis];
    let st = stride_of(dims, axis);
    debug_assert!(n >= 3);
    let inv = 1.0 / (h * h);
    build(data.len(), |i| {
        let k = (i / st) % n;
        if k == 0 {
            if n >= 4 {
                (2.0 * data[i] - 5.0 * data[i + st] + 4.0 * data[i + 2 * st] - data[i + 3 * st]) * inv
            } else {
                (data[i] - 2.0 * data[i + st] + data[i + 2 * st]) * inv
            }
        } else if k == n - 1 {
            if n >= 4 {
                (2.0 * data[i] - 5.0 * data[i - st] + 4.0 * data[i - 2 * st] - data[i - 3 * st]) * inv
            } else {
                (data[i] - 2.0 * data[i - st] + data[i - 2 * st]) * inv
            }
        } else {
            (data[i - st] - 2.0 * data[i] + data[i + st]) * inv
        }
    })
}

pub fn partial(grid: &Grid, f: &ScalarField, axis: usize) -> ScalarField {
    ScalarField::from_values(grid, stencil_d1(f.values(), grid.nodes(), axis, grid.spacing()[axis]))
}

pub fn second(grid: &Grid, f: &ScalarField, axis: usize) -> ScalarField {
    ScalarField::from_values(grid, stencil_d2(f.values(), grid.nodes(), axis, grid.spacing()[axis]))
}

/// `∂a ∂b f`; the pure stencil when `a == b`.
pub fn mixed(grid: &Grid, f: &ScalarField, a: usize, b: usize) -> ScalarField {
    if a == b {
        second(grid, f, a)
    } else {
        partial(grid, &partial(grid, f, a), b)
    }
}

pub fn gradient(grid: &Grid, f: &ScalarField) -> VectorField {
    VectorField::from_components((0..grid.dim()).map(|a| partial(grid, f, a)).collect())
}

pub fn divergence(grid: &Grid, u: &VectorField) -> ScalarField {
    let mut acc = partial(grid, u.component(0), 0);
    for a in 1..grid.dim() {
        acc = acc.add(&partial(grid, u.component(a), a));
    }
    acc
}

pub fn laplacian(grid: &Grid, f: &ScalarField) -> ScalarField {
    let mut acc = second(grid, f, 0);
    for a in 1..grid.dim() {
        acc = acc.add(&second(grid, f, a));
    }
    acc
}

pub fn vector_laplacian(grid: &Grid, u: &VectorField) -> VectorField {
    u.map_components(|c| laplacian(grid, c))
}

/// `∇(div u)` assembled from pure and mixed second differences.
pub fn grad_div(grid: &Grid, u: &VectorField) -> VectorField {
    let d = grid.dim();
    VectorField::from_components(
        (0..d)
            .map(|i| {
                let mut acc = second(grid, u.component(i), i);
                for j in (0..d).filter(|&j| j != i) {
                    acc = acc.add(&mixed(grid, u.component(j), j, i));
                }
                acc
            })
            .collect(),
    )
}

/// Scalar curl in 2D, vector curl in 3D.
pub fn rot(grid: &Grid, u: &VectorField) -> Result<Field> {
    match grid.dim() {
        2 => Ok(Field::Scalar(
            partial(grid, u.component(1), 0).sub(&partial(grid, u.component(0), 1)),
        )),
        3 => {
            let p = |c: usize, a: usize| partial(grid, u.component(c), a);
            Ok(Field::Vector(VectorField::from_components(vec![
                p(2, 1).sub(&p(1, 2)),
                p(0, 2).sub(&p(2, 0)),
                p(1, 0).sub(&p(0, 1)),
            ])))
        }
        d => Err(Error::Unsupported(format!("rot is undefined in {d}D"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DiffKind {
    Grad,
    Div,
    Laplacian,
    Rot,
    Dt,
    Dtt,
}

/// Applies a spatial operator to a field. Time derivatives need a trajectory
/// window and are rejected here.
pub fn diff(grid: &Grid, field: &Field, kind: DiffKind) -> Result<Field> {
    match (kind, field) {
        (DiffKind::Grad, Field::Scalar(f)) => {
            f.check(grid)?;
            Ok(Field::Vector(gradient(grid, f)))
        }
        (DiffKind::Grad, Field::Vector(u)) => {
            u.check(grid)?;
            // Jacobian rows flattened component-major.
            let mut comps = Vec::new();
            for c in u.components() {
                comps.extend(gradient(grid, c).components().iter().cloned());
            }
            Ok(Field::Vector(VectorField::from_components(comps)))
        }
        (DiffKind::Div, Field::Vector(u)) => {
            u.check(grid)?;
            Ok(Field::Scalar(divergence(grid, u)))
        }
        (DiffKind::Div, Field::Scalar(f)) => {
            // a scalar is a vector field in 1D
            f.check(grid)?;
            if grid.dim() == 1 {
                Ok(Field::Scalar(partial(grid, f, 0)))
            } else {
                Err(Error::Unsupported("div of a scalar field".into()))
            }
        }
        (DiffKind::Laplacian, Field::Scalar(f)) => {
            f.check(grid)?;
            Ok(Field::Scalar(laplacian(grid, f)))
        }
        (DiffKind::Laplacian, Field::Vector(u)) => {
            u.check(grid)?;
            Ok(Field::Vector(vector_laplacian(grid, u)))
        }
        (DiffKind::Rot, Field::Vector(u)) => {
            u.check(grid)?;
            rot(grid, u)
        }
        (DiffKind::Rot, Field::Scalar(_)) => Err(Error::Unsupported(format!(
            "rot of a scalar field ({}D grid)",
            grid.dim()
        ))),
        (DiffKind::Dt | DiffKind::Dtt, _) => Err(Error::Unsupported(
            "time derivative needs a trajectory window around the requested level".into(),
        )),
    }
}

/// Spatial first derivative of a space-time field.
pub fn st_partial(grid: &Grid, f: &SpaceTimeField, axis: usize) -> SpaceTimeField {
    f.with_values(stencil_d1(f.values(), &f.dims(), axis + 1, grid.spacing()[axis]))
}

pub fn st_second(grid: &Grid, f: &SpaceTimeField, axis: usize) -> SpaceTimeField {
    f.with_values(stencil_d2(f.values(), &f.dims(), axis + 1, grid.spacing()[axis]))
}

pub fn st_mixed(grid: &Grid, f: &SpaceTimeField, a: usize, b: usize) -> SpaceTimeField {
    if a == b {
        st_second(grid, f, a)
    } else {
        st_partial(grid, &st_partial(grid, f, a), b)
    }
}

pub fn st_dt(grid: &Grid, f: &SpaceTimeField) -> SpaceTimeField {
    f.with_values(stencil_d1(f.values(), &f.dims(), 0, grid.dt()))
}

pub fn st_dtt(grid: &Grid, f: &SpaceTimeField) -> SpaceTimeField {
    f.with_values(stencil_d2(f.values(), &f.dims(), 0, grid.dt()))
}

pub fn st_laplacian(grid: &Grid, f: &SpaceTimeField) -> SpaceTimeField {
    let mut acc = st_second(grid, f, 0);
    for a in 1..grid.dim() {
        acc = acc.add(&st_second(grid, f, a));
    }
    acc
}
