//! Time-domain solvers: the coupled displacement/temperature system, the
//! strongly damped wave equation, a plain wave equation and a parabolic
//! equation, together with manufactured solutions and consistency
//! diagnostics.
//!
//! The coupled scheme is first-order IMEX: elasticity and damping implicit,
//! coupling terms lagged.
//!
//! ```text
//! (u+ - 2u + u-)/dt² - Δ_{μ,λ}u+ - ∇(λ* div(u+ - u))/dt = f+ - ϱ1∇θ
//! (θ+ - θ)/dt - Δθ+ = g+ - ϱ2 div(u+ - u)/dt
//! ```

mod diagnostics;
pub mod linalg;
mod manufactured;
mod operators;
mod trajectory;

pub use diagnostics::{div_rot_decompose, duhamel_diagnostic, energy, DivRot};
pub use manufactured::{
    damped_wave_source, hyperbolic_source, parabolic_source, Factor, ManufacturedBiot, SeparableField,
    SeparableTerm,
};
pub use operators::{div_k_grad, flatten, grad_k_div, lame_operator, unflatten};
pub use trajectory::{FieldState, TimeWindow, Trajectory, WINDOW_HALF_WIDTH};

use serde::{Deserialize, Serialize};

use crate::coeffs::{CoefficientField, CoefficientSet};
use crate::error::{Error, Result};
use crate::grid::{self, Grid, ScalarField, SpaceTimeField, VectorField};

use linalg::DirichletSystem;
use operators::fixed_mask;

/// Default CFL factor `c` in `dt <= c h / sqrt(max(2μ+λ))`.
pub const DEFAULT_CFL: f64 = 0.5;

/// Body force, heat source and Dirichlet data of a run. Boundary data
/// default to zero; only the entries on `Γ` of the returned fields are used.
pub trait Forcing: Sync {
    fn body_force(&self, grid: &Grid, t: f64) -> VectorField;
    fn heat_source(&self, grid: &Grid, t: f64) -> ScalarField;

    fn displacement_boundary(&self, _grid: &Grid, _t: f64) -> Option<VectorField> {
        None
    }

    fn temperature_boundary(&self, _grid: &Grid, _t: f64) -> Option<ScalarField> {
        None
    }
}

/// No sources, homogeneous boundary data.
#[derive(Clone, Copy, Debug, Default)]
pub struct Unforced;

impl Forcing for Unforced {
    fn body_force(&self, grid: &Grid, _t: f64) -> VectorField {
        VectorField::zeros(grid)
    }

    fn heat_source(&self, grid: &Grid, _t: f64) -> ScalarField {
        ScalarField::zeros(grid)
    }
}

/// Boundary-driven run without sources: on `Γ`, the first displacement
/// component is `A (t - 1 + e^{-t}) ξ` and the temperature `B (1 - e^{-t}) ξ`,
/// where `ξ` is the normalized first coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryDrive {
    pub displacement: f64,
    pub temperature: f64,
}

impl BoundaryDrive {
    fn profile(grid: &Grid) -> ScalarField {
        let (lo, hi) = (grid.lower()[0], grid.upper()[0]);
        grid.tabulate(|p| (p[0] - lo) / (hi - lo))
    }
}

impl Forcing for BoundaryDrive {
    fn body_force(&self, grid: &Grid, _t: f64) -> VectorField {
        VectorField::zeros(grid)
    }

    fn heat_source(&self, grid: &Grid, _t: f64) -> ScalarField {
        ScalarField::zeros(grid)
    }

    fn displacement_boundary(&self, grid: &Grid, t: f64) -> Option<VectorField> {
        let mut u = VectorField::zeros(grid);
        let ramp = self.displacement * (t - 1.0 + (-t).exp());
        u.components_mut()[0] = Self::profile(grid).scale(ramp);
        Some(u)
    }

    fn temperature_boundary(&self, grid: &Grid, t: f64) -> Option<ScalarField> {
        Some(Self::profile(grid).scale(self.temperature * (1.0 - (-t).exp())))
    }
}

/// Checks `dt <= cfl · h_min / sqrt(max speed²)`.
pub fn check_cfl(grid: &Grid, dt: f64, speed_sq: f64, cfl: f64) -> Result<()> {
    let limit = cfl * grid.min_spacing() / speed_sq.max(f64::MIN_POSITIVE).sqrt();
    if dt > limit {
        return Err(Error::validation(
            "CFL condition",
            format!("dt = {dt:e} exceeds {cfl} * h / sqrt(max(2mu+lambda)) = {limit:e}"),
        ));
    }
    Ok(())
}

fn momentum_diagonal(grid: &Grid, coeffs: &CoefficientSet, dt: f64) -> Vec<f64> {
    let inv_h2: Vec<f64> = grid.spacing().iter().map(|h| 1.0 / (h * h)).collect();
    let lap: f64 = inv_h2.iter().map(|v| 2.0 * v).sum();
    let mut out = Vec::with_capacity(grid.dim() * grid.n_nodes());
    for i in 0..grid.dim() {
        for n in 0..grid.n_nodes() {
            let (mu, lam, ls) = (coeffs.mu.value(n), coeffs.lambda.value(n), coeffs.lambda_star.value(n));
            out.push(1.0 / (dt * dt) + mu * lap + (mu + lam + ls / dt) * 2.0 * inv_h2[i]);
        }
    }
    out
}

fn scalar_diagonal(grid: &Grid, mass: f64, c: impl Fn(usize) -> f64) -> Vec<f64> {
    let lap: f64 = grid.spacing().iter().map(|h| 2.0 / (h * h)).sum();
    (0..grid.n_nodes()).map(|n| mass + c(n) * lap).collect()
}

/// Advances the coupled system by one step. The previous displacement is
/// recovered as `u - dt u_t`, which is exact for states produced here and
/// realizes `u(-dt) = u(0) - dt u_t(0)` for initial data.
pub fn step_biot(
    grid: &Grid,
    state: &FieldState,
    coeffs: &CoefficientSet,
    forcing: &dyn Forcing,
    dt: f64,
) -> Result<FieldState> {
    let d = grid.dim();
    let t1 = state.t + dt;
    let inv_dt2 = 1.0 / (dt * dt);
    let prev = state.u.sub(&state.u_t.scale(dt));

    let grad_theta = grid::gradient(grid, &state.theta);
    let rho1 = coeffs.rho1.values.clone();
    let coupling = grad_theta.map_components(|c| c.mul(&rho1));
    let rhs_field = state
        .u
        .scale(2.0)
        .sub(&prev)
        .scale(inv_dt2)
        .sub(&grad_k_div(grid, &state.u, &coeffs.lambda_star).scale(1.0 / dt))
        .add(&forcing.body_force(grid, t1))
        .sub(&coupling);
    let rhs = flatten(&rhs_field);
    let apply = |x: &[f64]| -> Vec<f64> {
        let u = unflatten(grid, x);
        let r = u
            .scale(inv_dt2)
            .sub(&lame_operator(grid, &u, coeffs))
            .sub(&grad_k_div(grid, &u, &coeffs.lambda_star).scale(1.0 / dt));
        flatten(&r)
    };
    let fixed = fixed_mask(grid, d);
    let diag = momentum_diagonal(grid, coeffs, dt);
    let bu = forcing
        .displacement_boundary(grid, t1)
        .unwrap_or_else(|| VectorField::zeros(grid));
    let guess = flatten(&state.u.add(&state.u_t.scale(dt)));
    let sys = DirichletSystem {
        apply: &apply,
        fixed: &fixed,
        diag: &diag,
        symmetric: false,
    };
    let u1 = unflatten(grid, &sys.solve(&rhs, &flatten(&bu), Some(&guess))?);
    let u_t = u1.sub(&state.u).scale(1.0 / dt);

    let div_rate = grid::divergence(grid, &u_t);
    let rhs: Vec<f64> = (0..grid.n_nodes())
        .map(|n| {
            state.theta.values()[n] / dt - coeffs.rho2.value(n) * div_rate.values()[n]
        })
        .collect();
    let g = forcing.heat_source(grid, t1);
    let rhs: Vec<f64> = rhs.iter().zip(g.values()).map(|(a, b)| a + b).collect();
    let heat = |x: &[f64]| -> Vec<f64> {
        let y = ScalarField::from_values(grid, x.to_vec());
        y.scale(1.0 / dt).sub(&grid::laplacian(grid, &y)).into_values()
    };
    let fixed = fixed_mask(grid, 1);
    let diag = scalar_diagonal(grid, 1.0 / dt, |_| 1.0);
    let bt = forcing
        .temperature_boundary(grid, t1)
        .unwrap_or_else(|| ScalarField::zeros(grid));
    let sys = DirichletSystem {
        apply: &heat,
        fixed: &fixed,
        diag: &diag,
        symmetric: true,
    };
    let theta = ScalarField::from_values(grid, sys.solve(&rhs, bt.values(), Some(state.theta.values()))?);
    let out = FieldState { u: u1, u_t, theta, t: t1 };
    if !(out.u.is_finite() && out.theta.is_finite()) {
        return Err(Error::Numerical(format!("non-finite state at t = {t1}")));
    }
    Ok(out)
}

/// Runs the coupled system over every level of `grid`.
pub fn simulate(
    grid: &Grid,
    coeffs: &CoefficientSet,
    forcing: &dyn Forcing,
    initial: FieldState,
    cfl: f64,
) -> Result<Trajectory> {
    coeffs.check(grid)?;
    check_cfl(grid, grid.dt(), coeffs.max_p_modulus(), cfl)?;
    let mut states = Vec::with_capacity(grid.n_levels());
    states.push(initial);
    for _ in 0..grid.n_steps() {
        let next = step_biot(grid, states.last().unwrap(), coeffs, forcing, grid.dt())?;
        states.push(next);
    }
    Ok(Trajectory::new(grid.clone(), states))
}

/// Like [`simulate`] but keeps only the final state.
pub fn simulate_final(
    grid: &Grid,
    coeffs: &CoefficientSet,
    forcing: &dyn Forcing,
    initial: FieldState,
    cfl: f64,
) -> Result<FieldState> {
    coeffs.check(grid)?;
    check_cfl(grid, grid.dt(), coeffs.max_p_modulus(), cfl)?;
    let mut state = initial;
    for _ in 0..grid.n_steps() {
        state = step_biot(grid, &state, coeffs, forcing, grid.dt())?;
    }
    Ok(state)
}

pub type TimeSource<'a> = &'a (dyn Fn(f64) -> ScalarField + Sync);

/// Data of a scalar initial-boundary value problem.
pub struct ScalarProblem<'a> {
    pub source: TimeSource<'a>,
    /// Dirichlet data on `Γ`; zero when absent.
    pub boundary: Option<TimeSource<'a>>,
    pub initial: ScalarField,
    /// Initial rate (ignored by the parabolic solver).
    pub initial_rate: ScalarField,
}

impl ScalarProblem<'_> {
    fn boundary_at(&self, grid: &Grid, t: f64) -> ScalarField {
        self.boundary.map(|b| b(t)).unwrap_or_else(|| ScalarField::zeros(grid))
    }
}

/// Solves `v_tt - cΔv - div(k∇v_t) = f` with the scheme of the coupled
/// system; returns every level.
pub fn solve_damped_wave(
    grid: &Grid,
    c: &CoefficientField,
    k: &CoefficientField,
    problem: &ScalarProblem,
    cfl: f64,
) -> Result<SpaceTimeField> {
    let dt = grid.dt();
    let cmax = c.values.values().iter().cloned().fold(0.0, f64::max);
    check_cfl(grid, dt, cmax, cfl)?;
    let inv_dt2 = 1.0 / (dt * dt);
    let fixed = fixed_mask(grid, 1);
    let diag = scalar_diagonal(grid, inv_dt2, |n| c.value(n) + k.value(n) / dt);
    let apply = |x: &[f64]| -> Vec<f64> {
        let y = ScalarField::from_values(grid, x.to_vec());
        y.scale(inv_dt2)
            .sub(&grid::laplacian(grid, &y).mul(&c.values))
            .sub(&div_k_grad(grid, &y, k).scale(1.0 / dt))
            .into_values()
    };
    let sys = DirichletSystem {
        apply: &apply,
        fixed: &fixed,
        diag: &diag,
        symmetric: false,
    };
    let mut levels = vec![problem.initial.clone()];
    let mut prev = problem.initial.sub(&problem.initial_rate.scale(dt));
    for step in 1..=grid.n_steps() {
        let t1 = grid.time(step);
        let cur = levels.last().unwrap().clone();
        let rhs = cur
            .scale(2.0)
            .sub(&prev)
            .scale(inv_dt2)
            .sub(&div_k_grad(grid, &cur, k).scale(1.0 / dt))
            .add(&(problem.source)(t1));
        let guess = cur.scale(2.0).sub(&prev);
        let next = sys.solve(rhs.values(), problem.boundary_at(grid, t1).values(), Some(guess.values()))?;
        let next = ScalarField::from_values(grid, next);
        if !next.is_finite() {
            return Err(Error::Numerical(format!("non-finite damped-wave state at t = {t1}")));
        }
        prev = cur;
        levels.push(next);
    }
    Ok(SpaceTimeField::from_levels(grid, &levels))
}

/// Explicit leapfrog for `v_tt - μΔv = f`; requires `dt <= h_min / sqrt(dμ)`.
pub fn solve_hyperbolic(grid: &Grid, mu: f64, problem: &ScalarProblem) -> Result<SpaceTimeField> {
    let dt = grid.dt();
    let limit = grid.min_spacing() / (grid.dim() as f64 * mu).sqrt();
    if dt > limit {
        return Err(Error::validation(
            "CFL condition",
            format!("leapfrog needs dt <= h / sqrt(d mu) = {limit:e}, got {dt:e}"),
        ));
    }
    let mut levels = vec![problem.initial.clone()];
    let apply_bc = |f: ScalarField, t: f64| -> ScalarField {
        let b = problem.boundary_at(grid, t);
        let vals = (0..grid.n_nodes())
            .map(|n| if grid.is_boundary(n) { b.values()[n] } else { f.values()[n] })
            .collect();
        ScalarField::from_values(grid, vals)
    };
    // Taylor start: v1 = v0 + dt v_t + dt²/2 (μΔv0 + f0)
    let acc0 = grid::laplacian(grid, &problem.initial)
        .scale(mu)
        .add(&(problem.source)(0.0));
    let first = problem
        .initial
        .add(&problem.initial_rate.scale(dt))
        .add(&acc0.scale(0.5 * dt * dt));
    levels.push(apply_bc(first, dt));
    for step in 1..grid.n_steps() {
        let t = grid.time(step);
        let cur = &levels[step];
        let prev = &levels[step - 1];
        let acc = grid::laplacian(grid, cur).scale(mu).add(&(problem.source)(t));
        let next = cur.scale(2.0).sub(prev).add(&acc.scale(dt * dt));
        levels.push(apply_bc(next, grid.time(step + 1)));
    }
    Ok(SpaceTimeField::from_levels(grid, &levels))
}

/// Backward Euler for `y_t - div(k∇y) = h`.
pub fn solve_parabolic(grid: &Grid, k: &CoefficientField, problem: &ScalarProblem) -> Result<SpaceTimeField> {
    let dt = grid.dt();
    let fixed = fixed_mask(grid, 1);
    let diag = scalar_diagonal(grid, 1.0 / dt, |n| k.value(n));
    let apply = |x: &[f64]| -> Vec<f64> {
        let y = ScalarField::from_values(grid, x.to_vec());
        y.scale(1.0 / dt).sub(&div_k_grad(grid, &y, k)).into_values()
    };
    let sys = DirichletSystem {
        apply: &apply,
        fixed: &fixed,
        diag: &diag,
        symmetric: true,
    };
    let mut levels = vec![problem.initial.clone()];
    for step in 1..=grid.n_steps() {
        let t1 = grid.time(step);
        let cur = levels.last().unwrap();
        let rhs = cur.scale(1.0 / dt).add(&(problem.source)(t1));
        let next = sys.solve(rhs.values(), problem.boundary_at(grid, t1).values(), Some(cur.values()))?;
        levels.push(ScalarField::from_values(grid, next));
    }
    Ok(SpaceTimeField::from_levels(grid, &levels))
}

/// Solves `Δw = k` with `w = 0` on `Γ`.
pub fn solve_poisson(grid: &Grid, k: &ScalarField) -> Result<ScalarField> {
    let fixed = fixed_mask(grid, 1);
    let diag = scalar_diagonal(grid, 0.0, |_| 1.0);
    // negated to make the operator positive definite
    let apply = |x: &[f64]| -> Vec<f64> {
        let y = ScalarField::from_values(grid, x.to_vec());
        grid::laplacian(grid, &y).scale(-1.0).into_values()
    };
    let sys = DirichletSystem {
        apply: &apply,
        fixed: &fixed,
        diag: &diag,
        symmetric: true,
    };
    let rhs: Vec<f64> = k.values().iter().map(|v| -v).collect();
    let w = sys.solve(&rhs, &vec![0.0; grid.n_nodes()], None)?;
    Ok(ScalarField::from_values(grid, w))
}
