//! Finite-difference weights on arbitrary stencils, used for time derivatives
//! over a window of stored levels.

use crate::error::{Error, Result};

/// Fornberg's recursion: `w[m][j]` is the weight of `nodes[j]` in the
/// approximation of the `m`-th derivative at `z`, for `m <= max_order`.
pub fn fornberg_weights(z: f64, nodes: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; n]; max_order + 1];
    if n == 0 {
        return c;
    }
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Weights of the centered `(2 * half_width + 1)`-point stencil for the
/// `order`-th derivative on unit spacing, offsets `-half_width..=half_width`.
pub fn centered_weights(half_width: usize, order: usize) -> Vec<f64> {
    let nodes: Vec<f64> = (0..=2 * half_width)
        .map(|j| j as f64 - half_width as f64)
        .collect();
    fornberg_weights(0.0, &nodes, order).swap_remove(order)
}

/// Derivative of order `order` at the centre of a window of equally spaced
/// levels (odd length).
pub fn window_derivative(window: &[&[f64]], order: usize, dt: f64) -> Result<Vec<f64>> {
    if window.len().is_multiple_of(2) || window.len() < 3 {
        return Err(Error::Shape(format!(
            "time window must have odd length >= 3, got {}",
            window.len()
        )));
    }
    let hw = window.len() / 2;
    if order > 2 * hw {
        return Err(Error::Unsupported(format!(
            "derivative of order {order} needs more than {} levels",
            window.len()
        )));
    }
    let n = window[0].len();
    if window.iter().any(|l| l.len() != n) {
        return Err(Error::Shape("time window levels differ in length".into()));
    }
    let w = centered_weights(hw, order);
    let scale = dt.powi(order as i32);
    let mut out = vec![0.0; n];
    for (level, &wk) in window.iter().zip(&w) {
        if wk == 0.0 {
            continue;
        }
        for (o, v) in out.iter_mut().zip(level.iter()) {
            *o += wk * v;
        }
    }
    for o in &mut out {
        *o /= scale;
    }
    Ok(out)
}
