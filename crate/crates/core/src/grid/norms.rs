//! Discrete Sobolev norms: trapezoidal quadrature of the sum of squared
//! partial derivatives of every multi-index up to the requested order.

use crate::error::{Error, Result};

use super::field::{ScalarField, SpaceTimeField};
use super::ops::{stencil_d1, stencil_d2};
use super::{Grid, Region, MAX_NORM_ORDER};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormRegion {
    /// The box `Ω`.
    Omega,
    /// The collar `ω`.
    Collar,
    /// The cylinder `Q = Ω × (0,T)`.
    Cylinder,
    /// `ω × (0,T)`.
    CollarCylinder,
    /// `ω′ × (0,T)`. Stencils of order `<= 3` evaluated here only read
    /// nodes of `ω`.
    InnerCollarCylinder,
}

impl NormRegion {
    fn spatial_region(self) -> Region {
        match self {
            NormRegion::Omega | NormRegion::Cylinder => Region::Omega,
            NormRegion::Collar | NormRegion::CollarCylinder => Region::Collar,
            NormRegion::InnerCollarCylinder => Region::InnerCollar,
        }
    }

    fn is_space_time(self) -> bool {
        matches!(
            self,
            NormRegion::Cylinder | NormRegion::CollarCylinder | NormRegion::InnerCollarCylinder
        )
    }
}

/// All multi-indices over `axes` axes with total order `<= order`.
pub(crate) fn multi_indices(axes: usize, order: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; axes];
    fn rec(a: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if a == cur.len() {
            out.push(cur.clone());
            return;
        }
        for m in 0..=left {
            cur[a] = m;
            rec(a + 1, left - m, cur, out);
        }
        cur[a] = 0;
    }
    rec(0, order, &mut cur, &mut out);
    out.sort_by_key(|alpha| alpha.iter().sum::<usize>());
    out
}

/// Applies `∂^alpha` (one entry per array axis) by composing the stencils.
pub(crate) fn apply_multi_index(data: &[f64], dims: &[usize], spacing: &[f64], alpha: &[usize]) -> Vec<f64> {
    let mut cur = data.to_vec();
    for (axis, &m) in alpha.iter().enumerate() {
        let mut left = m;
        while left >= 2 {
            cur = stencil_d2(&cur, dims, axis, spacing[axis]);
            left -= 2;
        }
        if left == 1 {
            cur = stencil_d1(&cur, dims, axis, spacing[axis]);
        }
    }
    cur
}

fn check_order(order: usize) -> Result<()> {
    if order > MAX_NORM_ORDER {
        return Err(Error::validation(
            "norm order",
            format!("discrete Sobolev norms support order <= {MAX_NORM_ORDER}, got {order}"),
        ));
    }
    Ok(())
}

fn spatial_weights(grid: &Grid, region: Region) -> Vec<f64> {
    grid.quadrature_weights()
        .iter()
        .enumerate()
        .map(|(n, &w)| if grid.in_region(n, region) { w } else { 0.0 })
        .collect()
}

/// Squared discrete `H^order` norm of a spatial field over `Ω` or `ω`.
pub fn sobolev_norm_sq(grid: &Grid, f: &ScalarField, order: usize, region: NormRegion) -> Result<f64> {
    check_order(order)?;
    f.check(grid)?;
    if region.is_space_time() {
        return Err(Error::Shape(
            "space-time region requested for a spatial field".into(),
        ));
    }
    let w = spatial_weights(grid, region.spatial_region());
    let mut total = 0.0;
    for alpha in multi_indices(grid.dim(), order) {
        let d = apply_multi_index(f.values(), grid.nodes(), grid.spacing(), &alpha);
        total += d.iter().zip(&w).map(|(v, w)| w * v * v).sum::<f64>();
    }
    Ok(total)
}

pub fn sobolev_norm(grid: &Grid, f: &ScalarField, order: usize, region: NormRegion) -> Result<f64> {
    sobolev_norm_sq(grid, f, order, region).map(f64::sqrt)
}

/// Squared discrete `H^order` norm over `Q` or `ω × (0,T)`, counting time
/// derivatives as an additional axis.
pub fn space_time_sobolev_norm_sq(
    grid: &Grid,
    f: &SpaceTimeField,
    order: usize,
    region: NormRegion,
) -> Result<f64> {
    check_order(order)?;
    f.check(grid)?;
    if !region.is_space_time() {
        return Err(Error::Shape(
            "spatial region requested for a space-time field".into(),
        ));
    }
    let ws = spatial_weights(grid, region.spatial_region());
    let wt = grid.time_weights();
    let n = grid.n_nodes();
    let dims = f.dims();
    let mut spacing = vec![grid.dt()];
    spacing.extend_from_slice(grid.spacing());
    let mut total = 0.0;
    for alpha in multi_indices(grid.dim() + 1, order) {
        let d = apply_multi_index(f.values(), &dims, &spacing, &alpha);
        for (k, level) in d.chunks(n).enumerate() {
            total += wt[k] * level.iter().zip(&ws).map(|(v, w)| w * v * v).sum::<f64>();
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    fn unit(n: usize) -> Grid {
        Grid::new(&GridSpec {
            lower: vec![0.0],
            upper: vec![1.0],
            nodes: vec![n],
            dt: 0.25,
            t_final: 1.0,
            t0: 0.5,
            omega_width: 3,
            omega_prime_width: 1,
        })
        .unwrap()
    }

    #[test]
    fn multi_index_count() {
        // C(d + k, k)
        assert_eq!(multi_indices(2, 3).len(), 10);
        assert_eq!(multi_indices(3, 3).len(), 20);
        assert_eq!(multi_indices(1, 0), vec![vec![0]]);
    }

    #[test]
    fn constant_and_sine() {
        let g = unit(65);
        let one = ScalarField::constant(&g, 1.0);
        assert!((sobolev_norm_sq(&g, &one, 0, NormRegion::Omega).unwrap() - 1.0).abs() < 1e-12);
        let s = g.tabulate(|p| (std::f64::consts::PI * p[0]).sin());
        let v = sobolev_norm_sq(&g, &s, 0, NormRegion::Omega).unwrap();
        assert!((v - 0.5).abs() < 1e-3);
        assert_eq!(sobolev_norm_sq(&g, &ScalarField::zeros(&g), 3, NormRegion::Omega).unwrap(), 0.0);
    }

    #[test]
    fn order_cap() {
        let g = unit(9);
        let f = ScalarField::zeros(&g);
        assert!(sobolev_norm_sq(&g, &f, 4, NormRegion::Omega).is_err());
    }

    #[test]
    fn monotone_in_order_and_region() {
        let g = unit(33);
        let f = g.tabulate(|p| (3.0 * p[0]).cos() + p[0]);
        let mut last = 0.0;
        for k in 0..=3 {
            let v = sobolev_norm_sq(&g, &f, k, NormRegion::Omega).unwrap();
            assert!(v >= last);
            last = v;
        }
        let full = sobolev_norm_sq(&g, &f, 0, NormRegion::Omega).unwrap();
        let collar = sobolev_norm_sq(&g, &f, 0, NormRegion::Collar).unwrap();
        assert!(collar <= full);
    }
}
