//! Spatial operators of the coupled system assembled from the grid stencils.

use crate::coeffs::{CoefficientField, CoefficientSet};
use crate::grid::{self, Grid, ScalarField, VectorField};

/// Variable-coefficient Lamé operator
/// `μΔu + (μ+λ)∇div u + div u ∇λ + (∇u + ∇uᵀ)∇μ`.
pub fn lame_operator(grid: &Grid, u: &VectorField, coeffs: &CoefficientSet) -> VectorField {
    let d = grid.dim();
    let mu = coeffs.mu.values.values();
    let lam = coeffs.lambda.values.values();
    let div = grid::divergence(grid, u);
    let gd = grid::grad_div(grid, u);
    let lap = grid::vector_laplacian(grid, u);
    let jac: Vec<Vec<ScalarField>> = (0..d)
        .map(|i| (0..d).map(|j| grid::partial(grid, u.component(i), j)).collect())
        .collect();
    let gmu = &coeffs.mu.gradient;
    let glam = &coeffs.lambda.gradient;
    let comps = (0..d)
        .map(|i| {
            let vals = (0..grid.n_nodes())
                .map(|n| {
                    let mut v = mu[n] * lap.component(i).values()[n]
                        + (mu[n] + lam[n]) * gd.component(i).values()[n]
                        + div.values()[n] * glam.component(i).values()[n];
                    for j in 0..d {
                        let sym = jac[i][j].values()[n] + jac[j][i].values()[n];
                        v += sym * gmu.component(j).values()[n];
                    }
                    v
                })
                .collect();
            ScalarField::from_values(grid, vals)
        })
        .collect();
    VectorField::from_components(comps)
}

/// `∇(k div u) = div u ∇k + k ∇div u`.
pub fn grad_k_div(grid: &Grid, u: &VectorField, k: &CoefficientField) -> VectorField {
    let div = grid::divergence(grid, u);
    let gd = grid::grad_div(grid, u);
    VectorField::from_components(
        (0..grid.dim())
            .map(|i| {
                let kv = k.values.values();
                let gk = k.gradient.component(i).values();
                let vals = (0..grid.n_nodes())
                    .map(|n| div.values()[n] * gk[n] + kv[n] * gd.component(i).values()[n])
                    .collect();
                ScalarField::from_values(grid, vals)
            })
            .collect(),
    )
}

/// `div(k ∇y)` in conservative form with arithmetic face averages in the
/// interior; boundary nodes use `kΔy + ∇k·∇y`.
pub fn div_k_grad(grid: &Grid, y: &ScalarField, k: &CoefficientField) -> ScalarField {
    let kv = k.values.values();
    let yv = y.values();
    let lap = grid::laplacian(grid, y);
    let grad = grid::gradient(grid, y);
    let vals = (0..grid.n_nodes())
        .map(|n| {
            if grid.is_boundary(n) {
                let mut v = kv[n] * lap.values()[n];
                for a in 0..grid.dim() {
                    v += k.gradient.component(a).values()[n] * grad.component(a).values()[n];
                }
                return v;
            }
            let mut v = 0.0;
            for a in 0..grid.dim() {
                let st = grid.strides()[a];
                let h2 = grid.spacing()[a].powi(2);
                let kp = 0.5 * (kv[n] + kv[n + st]);
                let km = 0.5 * (kv[n] + kv[n - st]);
                v += (kp * (yv[n + st] - yv[n]) - km * (yv[n] - yv[n - st])) / h2;
            }
            v
        })
        .collect();
    ScalarField::from_values(grid, vals)
}

/// Flattens a vector field component-major.
pub fn flatten(u: &VectorField) -> Vec<f64> {
    u.components().iter().flat_map(|c| c.values().iter().cloned()).collect()
}

pub fn unflatten(grid: &Grid, x: &[f64]) -> VectorField {
    VectorField::from_components(
        x.chunks(grid.n_nodes())
            .map(|c| ScalarField::from_values(grid, c.to_vec()))
            .collect(),
    )
}

/// Boundary mask repeated once per vector component.
pub fn fixed_mask(grid: &Grid, components: usize) -> Vec<bool> {
    let b: Vec<bool> = (0..grid.n_nodes()).map(|n| grid.is_boundary(n)).collect();
    b.iter().cycle().take(b.len() * components).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coeffs::Preset;
    use crate::grid::GridSpec;

    fn grid2(n: usize) -> Grid {
        Grid::new(&GridSpec {
            lower: vec![0.0, 0.0],
            upper: vec![1.0, 1.0],
            nodes: vec![n, n],
            dt: 0.1,
            t_final: 1.0,
            t0: 0.5,
            omega_width: 3,
            omega_prime_width: 1,
        })
        .unwrap()
    }

    #[test]
    fn zero_in_zero_out() {
        let g = grid2(9);
        let c = CoefficientSet::constant(&g, 1.3, 0.7, 1.0, 1.0, 1.0);
        assert_eq!(lame_operator(&g, &VectorField::zeros(&g), &c).max_abs(), 0.0);
    }

    #[test]
    fn constant_coefficients_on_quadratic() {
        let g = grid2(9);
        let (mu, lam) = (1.3, 0.7);
        let c = CoefficientSet::constant(&g, mu, lam, 1.0, 1.0, 1.0);
        let u = VectorField::from_components(vec![g.tabulate(|p| p[0] * p[0]), ScalarField::zeros(&g)]);
        let r = lame_operator(&g, &u, &c);
        let node = g.node_index(&[4, 4]);
        let expect = mu * 2.0 + (mu + lam) * 2.0;
        assert!((r.component(0).values()[node] - expect).abs() < 1e-10);
        assert!(r.component(1).values()[node].abs() < 1e-10);
    }

    #[test]
    fn variable_mu_on_linear_field() {
        // μ = 1 + x, λ = 2, u = (a x + b y, c x + e y):
        // div u ∇λ = 0 and (∇u + ∇uᵀ)∇μ = (2a, b + c)
        let g = grid2(9);
        let mut c = CoefficientSet::constant(&g, 1.0, 2.0, 1.0, 1.0, 1.0);
        c.mu = Preset::Linear { base: 1.0, slope: vec![1.0, 0.0] }.build(&g).unwrap();
        let (a, b, cc, e) = (0.3, -1.1, 0.6, 2.0);
        let u = VectorField::from_components(vec![
            g.tabulate(|p| a * p[0] + b * p[1]),
            g.tabulate(|p| cc * p[0] + e * p[1]),
        ]);
        let r = lame_operator(&g, &u, &c);
        for n in 0..g.n_nodes() {
            assert!((r.component(0).values()[n] - 2.0 * a).abs() < 1e-10);
            assert!((r.component(1).values()[n] - (b + cc)).abs() < 1e-10);
        }
    }

    #[test]
    fn conservative_form_matches_product_rule() {
        let g = grid2(33);
        let k = Preset::Exponential { base: 1.0, rate: vec![0.5, -0.3] }.build(&g).unwrap();
        let y = g.tabulate(|p| (p[0] * 2.0).sin() * p[1]);
        let a = div_k_grad(&g, &y, &k);
        let lap = grid::laplacian(&g, &y);
        let gy = grid::gradient(&g, &y);
        let n = g.node_index(&[16, 16]);
        let b = k.value(n) * lap.values()[n]
            + k.grad(n).iter().zip(0..2).map(|(gk, a)| gk * gy.component(a).values()[n]).sum::<f64>();
        assert!((a.values()[n] - b).abs() < 1e-3);
    }
}
