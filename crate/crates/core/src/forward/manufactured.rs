//! Manufactured solutions: sums of separable products with closed-form
//! derivatives, and the sources that make them exact solutions.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::coeffs::{CoefficientField, CoefficientSet};
use crate::grid::{Grid, ScalarField, SpaceTimeField, VectorField};

use super::{FieldState, Forcing};

/// One-dimensional factor with closed-form derivatives of any order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Factor {
    /// `sin(freq·x + phase)`
    Sin { freq: f64, phase: f64 },
    /// `Σ c_k x^k`
    Poly { coeffs: Vec<f64> },
    /// `e^{rate·x}`
    Exp { rate: f64 },
}

impl Factor {
    pub fn sin(freq: f64) -> Factor {
        Factor::Sin { freq, phase: 0.0 }
    }

    pub fn cos(freq: f64) -> Factor {
        Factor::Sin { freq, phase: FRAC_PI_2 }
    }

    pub fn poly(coeffs: &[f64]) -> Factor {
        Factor::Poly { coeffs: coeffs.to_vec() }
    }

    pub fn one() -> Factor {
        Factor::poly(&[1.0])
    }

    /// `d^order/dx^order` at `x`.
    pub fn eval(&self, order: usize, x: f64) -> f64 {
        match self {
            Factor::Sin { freq, phase } => {
                freq.powi(order as i32) * (freq * x + phase + order as f64 * FRAC_PI_2).sin()
            }
            Factor::Poly { coeffs } => {
                let mut acc = 0.0;
                for (k, c) in coeffs.iter().enumerate().skip(order) {
                    let falling: f64 = ((k - order + 1)..=k).map(|j| j as f64).product();
                    acc += c * falling * x.powi((k - order) as i32);
                }
                acc
            }
            Factor::Exp { rate } => rate.powi(order as i32) * (rate * x).exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparableTerm {
    pub amplitude: f64,
    /// One factor per spatial axis.
    pub space: Vec<Factor>,
    pub time: Factor,
}

/// `Σ a_k Π_i X_ki(x_i) T_k(t)`.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct SeparableField {
    pub terms: Vec<SeparableTerm>,
}

impl SeparableField {
    pub fn zero() -> SeparableField {
        SeparableField::default()
    }

    pub fn product(amplitude: f64, space: Vec<Factor>, time: Factor) -> SeparableField {
        SeparableField {
            terms: vec![SeparableTerm { amplitude, space, time }],
        }
    }

    pub fn plus(mut self, other: SeparableField) -> SeparableField {
        self.terms.extend(other.terms);
        self
    }

    pub fn scaled(&self, c: f64) -> SeparableField {
        SeparableField {
            terms: self
                .terms
                .iter()
                .map(|t| SeparableTerm {
                    amplitude: c * t.amplitude,
                    ..t.clone()
                })
                .collect(),
        }
    }

    /// `∂^alpha ∂ₜ^kt` at `(x, t)`.
    pub fn eval(&self, x: &[f64], t: f64, alpha: &[usize], kt: usize) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                let mut v = term.amplitude * term.time.eval(kt, t);
                for (a, f) in term.space.iter().enumerate() {
                    v *= f.eval(alpha.get(a).copied().unwrap_or(0), x[a]);
                }
                v
            })
            .sum()
    }

    pub fn value(&self, x: &[f64], t: f64, kt: usize) -> f64 {
        self.eval(x, t, &[], kt)
    }

    /// `∂_a ∂ₜ^kt`.
    pub fn d(&self, x: &[f64], t: f64, a: usize, kt: usize) -> f64 {
        let mut alpha = vec![0; x.len()];
        alpha[a] = 1;
        self.eval(x, t, &alpha, kt)
    }

    /// `∂_a ∂_b ∂ₜ^kt`.
    pub fn dd(&self, x: &[f64], t: f64, a: usize, b: usize, kt: usize) -> f64 {
        let mut alpha = vec![0; x.len()];
        alpha[a] += 1;
        alpha[b] += 1;
        self.eval(x, t, &alpha, kt)
    }

    pub fn laplacian(&self, x: &[f64], t: f64, kt: usize) -> f64 {
        (0..x.len()).map(|a| self.dd(x, t, a, a, kt)).sum()
    }

    pub fn tabulate(&self, grid: &Grid, t: f64, alpha: &[usize], kt: usize) -> ScalarField {
        grid.tabulate(|p| self.eval(p, t, alpha, kt))
    }

    pub fn space_time(&self, grid: &Grid, alpha: &[usize], kt: usize) -> SpaceTimeField {
        SpaceTimeField::tabulate(grid, |p, t| self.eval(p, t, alpha, kt))
    }
}

fn div_of(u: &[SeparableField], x: &[f64], t: f64, kt: usize) -> f64 {
    u.iter().enumerate().map(|(j, c)| c.d(x, t, j, kt)).sum()
}

/// Manufactured solution of the coupled system with its exact sources.
#[derive(Clone, Debug)]
pub struct ManufacturedBiot {
    pub u: Vec<SeparableField>,
    pub theta: SeparableField,
    pub coeffs: CoefficientSet,
}

impl ManufacturedBiot {
    pub fn exact_state(&self, grid: &Grid, t: f64) -> FieldState {
        FieldState {
            u: VectorField::from_components(self.u.iter().map(|c| c.tabulate(grid, t, &[], 0)).collect()),
            u_t: VectorField::from_components(self.u.iter().map(|c| c.tabulate(grid, t, &[], 1)).collect()),
            theta: self.theta.tabulate(grid, t, &[], 0),
            t,
        }
    }

    fn momentum_residual(&self, grid: &Grid, node: usize, t: f64, i: usize) -> f64 {
        let x = grid.point(node);
        let c = &self.coeffs;
        let d = grid.dim();
        let (mu, lam, ls) = (c.mu.value(node), c.lambda.value(node), c.lambda_star.value(node));
        let (gmu, glam, gls) = (c.mu.grad(node), c.lambda.grad(node), c.lambda_star.grad(node));
        let ui = &self.u[i];
        let div = div_of(&self.u, &x, t, 0);
        let div_t = div_of(&self.u, &x, t, 1);
        let grad_div = |kt: usize| -> f64 { (0..d).map(|j| self.u[j].dd(&x, t, i, j, kt)).sum() };
        let mut lame = mu * ui.laplacian(&x, t, 0) + (mu + lam) * grad_div(0) + div * glam[i];
        for j in 0..d {
            lame += (ui.d(&x, t, j, 0) + self.u[j].d(&x, t, i, 0)) * gmu[j];
        }
        let damping = gls[i] * div_t + ls * grad_div(1);
        ui.value(&x, t, 2) - lame - damping + c.rho1.value(node) * self.theta.d(&x, t, i, 0)
    }
}

impl Forcing for ManufacturedBiot {
    fn body_force(&self, grid: &Grid, t: f64) -> VectorField {
        VectorField::from_components(
            (0..grid.dim())
                .map(|i| grid.tabulate_nodes(|n| self.momentum_residual(grid, n, t, i)))
                .collect(),
        )
    }

    fn heat_source(&self, grid: &Grid, t: f64) -> ScalarField {
        grid.tabulate_nodes(|n| {
            let x = grid.point(n);
            self.theta.value(&x, t, 1) - self.theta.laplacian(&x, t, 0)
                + self.coeffs.rho2.value(n) * div_of(&self.u, &x, t, 1)
        })
    }

    fn displacement_boundary(&self, grid: &Grid, t: f64) -> Option<VectorField> {
        Some(VectorField::from_components(
            self.u.iter().map(|c| c.tabulate(grid, t, &[], 0)).collect(),
        ))
    }

    fn temperature_boundary(&self, grid: &Grid, t: f64) -> Option<ScalarField> {
        Some(self.theta.tabulate(grid, t, &[], 0))
    }
}

/// Source of `v_tt - cΔv - div(k∇v_t)` for a manufactured `v`.
pub fn damped_wave_source(
    grid: &Grid,
    v: &SeparableField,
    c: &CoefficientField,
    k: &CoefficientField,
    t: f64,
) -> ScalarField {
    grid.tabulate_nodes(|n| {
        let x = grid.point(n);
        let gk = k.grad(n);
        let adv: f64 = (0..grid.dim()).map(|a| gk[a] * v.d(&x, t, a, 1)).sum();
        v.value(&x, t, 2) - c.value(n) * v.laplacian(&x, t, 0) - k.value(n) * v.laplacian(&x, t, 1) - adv
    })
}

/// Source of `v_tt - μΔv`.
pub fn hyperbolic_source(grid: &Grid, v: &SeparableField, mu: f64, t: f64) -> ScalarField {
    grid.tabulate(|x| v.value(x, t, 2) - mu * v.laplacian(x, t, 0))
}

/// Source of `v_t - div(k∇v)`.
pub fn parabolic_source(grid: &Grid, v: &SeparableField, k: &CoefficientField, t: f64) -> ScalarField {
    grid.tabulate_nodes(|n| {
        let x = grid.point(n);
        let gk = k.grad(n);
        let adv: f64 = (0..grid.dim()).map(|a| gk[a] * v.d(&x, t, a, 0)).sum();
        v.value(&x, t, 1) - k.value(n) * v.laplacian(&x, t, 0) - adv
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factor_derivatives() {
        let s = Factor::sin(2.0);
        assert!((s.eval(1, 0.3) - 2.0 * (0.6f64).cos()).abs() < 1e-14);
        assert!((s.eval(2, 0.3) + 4.0 * (0.6f64).sin()).abs() < 1e-14);
        let p = Factor::poly(&[1.0, 0.0, 3.0, 2.0]);
        assert!((p.eval(0, 2.0) - 29.0).abs() < 1e-12);
        assert!((p.eval(1, 2.0) - 36.0).abs() < 1e-12);
        assert!((p.eval(3, 2.0) - 12.0).abs() < 1e-12);
        assert_eq!(p.eval(4, 2.0), 0.0);
        let e = Factor::Exp { rate: -1.5 };
        assert!((e.eval(2, 1.0) - 2.25 * (-1.5f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn mixed_derivative_of_product() {
        let f = SeparableField::product(2.0, vec![Factor::sin(1.0), Factor::poly(&[0.0, 0.0, 1.0])], Factor::poly(&[0.0, 0.0, 1.0]));
        // 2 sin(x) y² t² → ∂x∂y∂t = 2 cos(x) 2y 2t
        let (x, y, t) = (0.4, 0.7, 1.3);
        let got = f.eval(&[x, y], t, &[1, 1], 1);
        assert!((got - 8.0 * x.cos() * y * t).abs() < 1e-13);
    }
}
