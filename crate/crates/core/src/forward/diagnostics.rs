//! Consistency diagnostics on computed trajectories.

use crate::coeffs::{CoefficientField, CoefficientSet};
use crate::error::{Error, Result};
use crate::grid::{self, ops, Grid, ScalarField, SpaceTimeField};

use super::{FieldState, Forcing, Trajectory};

/// `∫ |u_t|² + μ|∇u|² + (μ+λ)|div u|² + |θ|²` by trapezoidal quadrature.
pub fn energy(grid: &Grid, state: &FieldState, coeffs: &CoefficientSet) -> f64 {
    let w = grid.quadrature_weights();
    let div = grid::divergence(grid, &state.u);
    let grads: Vec<_> = state.u.components().iter().map(|c| grid::gradient(grid, c)).collect();
    (0..grid.n_nodes())
        .map(|n| {
            let mu = coeffs.mu.value(n);
            let lam = coeffs.lambda.value(n);
            let ut: f64 = state.u_t.components().iter().map(|c| c.values()[n].powi(2)).sum();
            let gu: f64 = grads
                .iter()
                .flat_map(|g| g.components().iter().map(move |c| c.values()[n].powi(2)))
                .sum();
            w[n] * (ut + mu * gu + (mu + lam) * div.values()[n].powi(2) + state.theta.values()[n].powi(2))
        })
        .sum()
}

/// Max over interior nodes of the residual of the Duhamel representation of
/// `z = Δv` for `v_tt - cΔv - div(k∇v_t) = f`, at time level `level`:
///
/// ```text
/// z(t) = z(t0) e^{δ(t0-t)} + (v_t(t) - e^{δ(t0-t)} v_t(t0))/k
///        - (δ/k) ∫ e^{δ(τ-t)} v_t dτ - (1/k) ∫ e^{δ(τ-t)} (∇k·∇v_t + f) dτ
/// ```
///
/// with `δ = c/k` and integrals from `t0` to `t`.
pub fn duhamel_diagnostic(
    grid: &Grid,
    v: &SpaceTimeField,
    f: &SpaceTimeField,
    c: &CoefficientField,
    k: &CoefficientField,
    lambda0: f64,
    level: usize,
) -> Result<f64> {
    v.check(grid)?;
    f.check(grid)?;
    if level >= v.n_levels() {
        return Err(Error::Shape(format!("level {level} beyond {} levels", v.n_levels())));
    }
    let kmin = k.values.min();
    if kmin < lambda0 {
        return Err(Error::validation(
            "damping lower bound",
            format!("min lambda_star = {kmin} < lambda0 = {lambda0}"),
        ));
    }
    let z = ops::st_laplacian(grid, v);
    let vt = ops::st_dt(grid, v);
    let n = grid.n_nodes();
    let grad_vt: Vec<SpaceTimeField> = (0..grid.dim()).map(|a| ops::st_partial(grid, &vt, a)).collect();
    let k0 = grid.t0_index();
    let dt = grid.dt();
    let t = grid.time(level);
    let t0 = grid.time(k0);
    let (lo, hi) = if level >= k0 { (k0, level) } else { (level, k0) };
    let sign = if level >= k0 { 1.0 } else { -1.0 };
    let mut worst: f64 = 0.0;
    for node in (0..n).filter(|&m| !grid.is_boundary(m)) {
        let kv = k.value(node);
        let delta = c.value(node) / kv;
        let gk = k.grad(node);
        let mut i1 = 0.0;
        let mut i2 = 0.0;
        for j in lo..=hi {
            let w = if j == lo || j == hi { 0.5 * dt } else { dt };
            let w = if lo == hi { 0.0 } else { w };
            let e = (delta * (grid.time(j) - t)).exp();
            let idx = j * n + node;
            let adv: f64 = (0..grid.dim()).map(|a| gk[a] * grad_vt[a].values()[idx]).sum();
            i1 += w * e * vt.values()[idx];
            i2 += w * e * (adv + f.values()[idx]);
        }
        let e0 = (delta * (t0 - t)).exp();
        let rhs = z.values()[k0 * n + node] * e0
            + (vt.values()[level * n + node] - e0 * vt.values()[k0 * n + node]) / kv
            - sign * delta / kv * i1
            - sign * i2 / kv;
        worst = worst.max((z.values()[level * n + node] - rhs).abs());
    }
    Ok(worst)
}

/// `div u` and `rot u` trajectories with the residuals of the equations they
/// satisfy for constant Lamé coefficients:
///
/// ```text
/// v_tt - (2μ+λ)Δv - Δ(λ* v_t) + ϱ1Δθ + ∇ϱ1·∇θ = div f      (v = div u)
/// w_tt - μΔw = rot f                                          (w = rot u)
/// ```
///
/// Residuals are max-norms over nodes at least two cells from `Γ` and
/// levels at least two steps from either end.
#[derive(Clone, Debug)]
pub struct DivRot {
    pub div: SpaceTimeField,
    /// One field in 2D, three in 3D.
    pub rot: Vec<SpaceTimeField>,
    pub div_residual: f64,
    pub rot_residual: f64,
}

fn interior_max(grid: &Grid, f: &SpaceTimeField) -> f64 {
    let n = grid.n_nodes();
    let mut m: f64 = 0.0;
    for k in 2..f.n_levels().saturating_sub(2) {
        for node in 0..n {
            if grid.boundary_distance(node) >= 2 {
                m = m.max(f.values()[k * n + node].abs());
            }
        }
    }
    m
}

fn curl_components(grid: &Grid, comps: &[SpaceTimeField]) -> Vec<SpaceTimeField> {
    let p = |c: usize, a: usize| ops::st_partial(grid, &comps[c], a);
    if grid.dim() == 2 {
        vec![p(1, 0).sub(&p(0, 1))]
    } else {
        vec![p(2, 1).sub(&p(1, 2)), p(0, 2).sub(&p(2, 0)), p(1, 0).sub(&p(0, 1))]
    }
}

pub fn div_rot_decompose(traj: &Trajectory, coeffs: &CoefficientSet, forcing: &dyn Forcing) -> Result<DivRot> {
    let grid = traj.grid();
    if grid.dim() < 2 {
        return Err(Error::Unsupported("rot is undefined in 1D".into()));
    }
    let n = grid.n_nodes();
    let mu = coeffs.mu.value(0);
    let p = coeffs.p_modulus().value(0);
    if !(coeffs.mu.is_constant() && coeffs.lambda.is_constant()) {
        return Err(Error::Unsupported(
            "div/rot equations are derived for constant Lame coefficients".into(),
        ));
    }
    let u: Vec<SpaceTimeField> = (0..grid.dim()).map(|c| traj.u_component(c)).collect();
    let f_levels: Vec<_> = (0..traj.n_levels())
        .map(|k| forcing.body_force(grid, traj.state(k).t))
        .collect();
    let f: Vec<SpaceTimeField> = (0..grid.dim())
        .map(|c| {
            let lv: Vec<ScalarField> = f_levels.iter().map(|f| f.component(c).clone()).collect();
            SpaceTimeField::from_levels(grid, &lv)
        })
        .collect();

    let v = traj.div_u().clone();
    let theta = traj.theta();
    let vt = ops::st_dt(grid, &v);
    let ls = &coeffs.lambda_star.values;
    let ls_vt = vt.with_values(
        vt.values()
            .iter()
            .enumerate()
            .map(|(i, x)| x * ls.values()[i % n])
            .collect(),
    );
    let mut lhs = ops::st_dtt(grid, &v)
        .sub(&ops::st_laplacian(grid, &v).scale(p))
        .sub(&ops::st_laplacian(grid, &ls_vt));
    let lap_theta = ops::st_laplacian(grid, &theta);
    let grad_theta: Vec<SpaceTimeField> = (0..grid.dim()).map(|a| ops::st_partial(grid, &theta, a)).collect();
    let coupling: Vec<f64> = (0..theta.values().len())
        .map(|i| {
            let node = i % n;
            let mut c = coeffs.rho1.value(node) * lap_theta.values()[i];
            for a in 0..grid.dim() {
                c += coeffs.rho1.gradient.component(a).values()[node]
                    * grad_theta[a].values()[i];
            }
            c
        })
        .collect();
    lhs = lhs.add(&theta.with_values(coupling));
    let mut div_f = ops::st_partial(grid, &f[0], 0);
    for a in 1..grid.dim() {
        div_f = div_f.add(&ops::st_partial(grid, &f[a], a));
    }
    let div_residual = interior_max(grid, &lhs.sub(&div_f));

    let rot = curl_components(grid, &u);
    let rot_f = curl_components(grid, &f);
    let rot_residual = rot
        .iter()
        .zip(&rot_f)
        .map(|(w, rf)| {
            let r = ops::st_dtt(grid, w).sub(&ops::st_laplacian(grid, w).scale(mu)).sub(rf);
            interior_max(grid, &r)
        })
        .fold(0.0, f64::max);
    Ok(DivRot {
        div: v,
        rot,
        div_residual,
        rot_residual,
    })
}
