//! Time primitives and the Grönwall-type kernel inequality.

use crate::grid::{Grid, SpaceTimeField};

/// `∫_{t0}^t e^{δ(τ-t)} h(τ) dτ` on uniform levels by the trapezoidal rule,
/// marching away from `t0` in both directions.
pub fn damped_primitive(h: &[f64], dt: f64, k0: usize, delta: f64) -> Vec<f64> {
    let mut out = vec![0.0; h.len()];
    let decay = (-delta * dt).exp();
    for k in k0 + 1..h.len() {
        out[k] = decay * out[k - 1] + 0.5 * dt * (decay * h[k - 1] + h[k]);
    }
    let growth = (delta * dt).exp();
    for k in (0..k0).rev() {
        out[k] = growth * out[k + 1] - 0.5 * dt * (h[k] + growth * h[k + 1]);
    }
    out
}

/// Both sides of `∫_0^T |∫_{t0}^t e^{δ(τ-t)} h|² dt ≤ C ∫_0^T |∫_{t0}^t h|² dt`
/// for a sampled `h`.
pub fn gronwall_sides(h: &[f64], dt: f64, k0: usize, delta: f64) -> (f64, f64) {
    let integrate = |f: &[f64]| -> f64 {
        let last = f.len() - 1;
        f.iter()
            .enumerate()
            .map(|(k, v)| if k == 0 || k == last { 0.5 * dt * v * v } else { dt * v * v })
            .sum()
    };
    let lhs = integrate(&damped_primitive(h, dt, k0, delta));
    let rhs = integrate(&damped_primitive(h, dt, k0, 0.0));
    (lhs, rhs)
}

/// `1 + δ²T²e^{2δT}`.
pub fn gronwall_bound(delta: f64, t_final: f64) -> f64 {
    1.0 + delta * delta * t_final * t_final * (2.0 * delta * t_final).exp()
}

fn per_node(grid: &Grid, f: &SpaceTimeField, op: impl Fn(&[f64]) -> Vec<f64>) -> SpaceTimeField {
    let n = grid.n_nodes();
    let levels = f.n_levels();
    let mut out = vec![0.0; f.values().len()];
    let mut series = vec![0.0; levels];
    for node in 0..n {
        for (k, s) in series.iter_mut().enumerate() {
            *s = f.values()[k * n + node];
        }
        for (k, v) in op(&series).into_iter().enumerate() {
            out[k * n + node] = v;
        }
    }
    f.with_values(out)
}

/// `∫_{t0}^t w` at every node.
pub fn primitive_from(grid: &Grid, w: &SpaceTimeField, k0: usize) -> SpaceTimeField {
    per_node(grid, w, |s| damped_primitive(s, grid.dt(), k0, 0.0))
}

/// Damped and plain primitives from `t0` at every node.
pub fn gronwall_primitives(grid: &Grid, h: &SpaceTimeField, k0: usize, delta: f64) -> (SpaceTimeField, SpaceTimeField) {
    (
        per_node(grid, h, |s| damped_primitive(s, grid.dt(), k0, delta)),
        primitive_from(grid, h, k0),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_analytic() {
        // h = 1, t0 = 0, T = 1, δ = 1: ∫(1 - e^{-t})² = 0.168091..., ∫t² = 1/3
        let n = 4001;
        let dt = 1.0 / (n - 1) as f64;
        let h = vec![1.0; n];
        let (lhs, rhs) = gronwall_sides(&h, dt, 0, 1.0);
        let exact = 1.0 - 2.0 * (1.0 - (-1.0f64).exp()) + 0.5 * (1.0 - (-2.0f64).exp());
        assert!((lhs - exact).abs() < 1e-7, "{lhs} vs {exact}");
        assert!((lhs - 0.168091).abs() < 1e-4);
        assert!((rhs - 1.0 / 3.0).abs() < 1e-7);
        assert!((gronwall_bound(1.0, 1.0) - (1.0 + 1f64.exp().powi(2))).abs() < 1e-12);
    }

    #[test]
    fn zero_delta_is_identity() {
        let h: Vec<f64> = (0..101).map(|k| (k as f64 * 0.1).sin()).collect();
        let (l, r) = gronwall_sides(&h, 0.01, 40, 0.0);
        assert_eq!(l, r);
    }

    #[test]
    fn backward_primitive_matches_exact() {
        // h = cos t from t0 = 1: ∫_{1}^{t} cos = sin t - sin 1
        let dt = 1e-3;
        let h: Vec<f64> = (0..2001).map(|k| (k as f64 * dt).cos()).collect();
        let p = damped_primitive(&h, dt, 1000, 0.0);
        for k in [0, 500, 1500, 2000] {
            let t = k as f64 * dt;
            assert!((p[k] - (t.sin() - 1f64.sin())).abs() < 1e-6);
        }
    }
}
