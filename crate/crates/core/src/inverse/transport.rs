//! Grid least squares for `∇p·∇θ + pΔθ = F` with `p = 0` on `Γ`.

use nalgebra::{DMatrix, DVector};

use super::ReconstructionSettings;
use crate::error::{Error, Result};
use crate::grid::{self, Grid, ScalarField};

#[derive(Clone, Debug)]
pub struct TransportSolution {
    pub p: ScalarField,
    /// Tikhonov weight actually used.
    pub tau: f64,
    /// Weighted residual norm of the transport rows.
    pub residual: f64,
}

const SVD_EPS: f64 = 1e-14;

/// Rows, in order: the transport equation at interior nodes, the penalty on
/// the normal derivative of `p` at `Γ`, and `√τ (p, ∇p)` with forward
/// differences (which, unlike centred ones, see the odd-even mode). Rows are
/// scaled by the square roots of the quadrature weights, so the objective
/// approximates `|r|²_{L²} + pen |∂ₙp|²_{L²(Γ)} + τ |p|²_{H¹}` with
/// `τ = tikhonov · |F|²_{L²}`.
pub fn solve_transport(
    grid: &Grid,
    theta: &ScalarField,
    rhs: &ScalarField,
    settings: &ReconstructionSettings,
) -> Result<TransportSolution> {
    let d = grid.dim();
    let n = grid.n_nodes();
    let unknowns: Vec<usize> = (0..n).filter(|&i| !grid.is_boundary(i)).collect();
    let mut column = vec![usize::MAX; n];
    for (j, &node) in unknowns.iter().enumerate() {
        column[node] = j;
    }
    let w = grid.quadrature_weights();
    let h = grid.spacing();
    let grad = grid::gradient(grid, theta);
    let lap = grid::laplacian(grid, theta);
    let f_norm_sq: f64 = rhs.values().iter().zip(w).map(|(f, w)| w * f * f).sum();
    let tau = settings.tikhonov * f_norm_sq;
    let grad_scale = grad.max_abs().max(f64::MIN_POSITIVE);
    let penalty = settings.boundary_penalty * grad_scale * grad_scale;

    let mut rows: Vec<(Vec<(usize, f64)>, f64)> = Vec::new();
    let push = |rows: &mut Vec<(Vec<(usize, f64)>, f64)>, entries: Vec<(usize, f64)>, b: f64, scale: f64| {
        let entries: Vec<(usize, f64)> = entries
            .into_iter()
            .filter(|(node, _)| column[*node] != usize::MAX)
            .map(|(node, c)| (column[node], c * scale))
            .collect();
        rows.push((entries, b * scale));
    };

    let n_transport = unknowns.len();
    for &node in &unknowns {
        let mut entries = vec![(node, lap.values()[node])];
        for a in 0..d {
            let st = grid.strides()[a];
            let c = grad.component(a).values()[node] / (2.0 * h[a]);
            entries.push((node + st, c));
            entries.push((node - st, -c));
        }
        push(&mut rows, entries, rhs.values()[node], w[node].sqrt());
    }

    for node in 0..n {
        if !grid.is_boundary(node) {
            continue;
        }
        for a in 0..d {
            let idx = grid.axis_index(node, a);
            let last = grid.nodes()[a] - 1;
            let st = grid.strides()[a] as isize;
            let dir = if idx == 0 {
                1
            } else if idx == last {
                -1
            } else {
                continue;
            };
            let at = |k: isize| (node as isize + dir * k * st) as usize;
            let c = 1.0 / (2.0 * h[a]);
            let entries = vec![(at(1), 4.0 * c), (at(2), -c)];
            push(&mut rows, entries, 0.0, (penalty * w[node]).sqrt());
        }
    }

    if tau > 0.0 {
        for node in 0..n {
            push(&mut rows, vec![(node, 1.0)], 0.0, (tau * w[node]).sqrt());
            for a in 0..d {
                if grid.axis_index(node, a) + 1 < grid.nodes()[a] {
                    let st = grid.strides()[a];
                    let entries = vec![(node + st, 1.0 / h[a]), (node, -1.0 / h[a])];
                    push(&mut rows, entries, 0.0, (tau * w[node]).sqrt());
                }
            }
        }
    }

    let m = unknowns.len();
    let mut a_mat = DMatrix::<f64>::zeros(rows.len(), m);
    let mut b = DVector::<f64>::zeros(rows.len());
    for (r, (entries, rhs_r)) in rows.iter().enumerate() {
        for &(c, v) in entries {
            a_mat[(r, c)] += v;
        }
        b[r] = *rhs_r;
    }
    let svd = a_mat.clone().svd(true, true);
    let x = svd
        .solve(&b, SVD_EPS * svd.singular_values.max())
        .map_err(|e| Error::Numerical(format!("transport least squares: {e}")))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("transport least squares produced non-finite values".into()));
    }
    let r = &a_mat * &x - &b;
    let residual = r.rows(0, n_transport).norm();
    let mut p = vec![0.0; n];
    for (j, &node) in unknowns.iter().enumerate() {
        p[node] = x[j];
    }
    Ok(TransportSolution {
        p: ScalarField::from_values(grid, p),
        tau,
        residual,
    })
}
