//! Linearized coefficient reconstruction from twin-solve data and the
//! Hölder-type stability experiment.
//!
//! Two forward solves share every coefficient but the unknown ones: `u`
//! uses the base set, `ũ` the perturbed one. Observations are built from
//! the differences `V = u - ũ`, `y = θ - θ̃` and the unknowns are recovered
//! from the divergence of the momentum equation (and the heat equation for
//! the second density) at `t0`.

mod holder;
mod transport;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::coeffs::{
    check_admissible, check_nondegeneracy, AdmissibleSet, CoefficientBounds, CoefficientField, CoefficientSet,
    Nondegeneracy, Traces,
};
use crate::error::{Error, Result};
use crate::forward::{self, lame_operator, BoundaryDrive, FieldState, TimeWindow, Trajectory, DEFAULT_CFL};
use crate::grid::io::fmt_f64;
use crate::grid::{self, Grid, NormRegion, Region, ScalarField, SpaceTimeField, VectorField};

pub use holder::{fit_holder, noise_ladder, HolderFit, LadderPoint};
pub use transport::{solve_transport, TransportSolution};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Problem {
    /// Recover the damping coefficient.
    LambdaStar,
    /// Recover both densities.
    Densities,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::LambdaStar => "lambda_star",
            Problem::Densities => "densities",
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Problem> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "lambda_star" => Ok(Problem::LambdaStar),
            "densities" => Ok(Problem::Densities),
            _ => Err(Error::Config(format!(
                "unknown problem '{s}' (expected lambda_star or densities)"
            ))),
        }
    }
}

/// Additive Gaussian noise with standard deviation `level` times the RMS of
/// the clean field it is added to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub level: f64,
    pub seed: u64,
}

/// Everything the twin experiment needs besides the two coefficient sets.
#[derive(Clone, Debug, PartialEq)]
pub struct TwinScenario {
    pub problem: Problem,
    pub drive: BoundaryDrive,
    pub bounds: CoefficientBounds,
    pub x0: Vec<f64>,
    pub cfl: f64,
    pub noise: Option<NoiseSpec>,
}

impl TwinScenario {
    pub fn new(problem: Problem, drive: BoundaryDrive, bounds: CoefficientBounds, x0: Vec<f64>) -> TwinScenario {
        TwinScenario {
            problem,
            drive,
            bounds,
            x0,
            cfl: DEFAULT_CFL,
            noise: None,
        }
    }
}

/// The perturbation that produced the data.
#[derive(Clone, Debug, PartialEq)]
pub enum GroundTruth {
    /// `f = λ* - λ̃*`.
    LambdaStar { f: ScalarField },
    /// `p = ϱ̃1 - ϱ1`, `q = ϱ̃2 - ϱ2`.
    Densities { p: ScalarField, q: ScalarField },
}

impl GroundTruth {
    pub fn fields(&self) -> Vec<(&'static str, &ScalarField)> {
        match self {
            GroundTruth::LambdaStar { f } => vec![("f", f)],
            GroundTruth::Densities { p, q } => vec![("p", p), ("q", q)],
        }
    }
}

/// Difference data of a twin experiment.
#[derive(Clone, Debug)]
pub struct ObservationSet {
    pub problem: Problem,
    /// Difference displacement on `ω × (0,T)`, zero outside `ω`.
    pub collar: Vec<SpaceTimeField>,
    pub collar_mask: Vec<bool>,
    /// Difference displacement and temperature on `Ω` around `t0`.
    pub window: TimeWindow,
    /// The perturbed solution `(ũ, θ̃)` around `t0`.
    pub reference: TimeWindow,
    pub noise: Option<NoiseSpec>,
}

impl ObservationSet {
    pub fn check(&self, grid: &Grid) -> Result<()> {
        if self.window.center != grid.t0_index() || self.reference.center != grid.t0_index() {
            return Err(Error::Shape(format!(
                "observation window centred on level {} instead of t0 level {}",
                self.window.center,
                grid.t0_index()
            )));
        }
        if self.collar_mask != grid.mask(Region::Collar) {
            return Err(Error::Shape("restriction mask differs from the grid collar".into()));
        }
        if self.collar.len() != grid.dim() {
            return Err(Error::Shape(format!(
                "{} collar components on a {}-dimensional grid",
                self.collar.len(),
                grid.dim()
            )));
        }
        for c in &self.collar {
            c.check(grid)?;
        }
        Ok(())
    }

    /// Copy with noise added to every observed difference field. The
    /// reference solution stays clean.
    pub fn with_noise(&self, noise: NoiseSpec) -> ObservationSet {
        self.with_signed_noise(noise, 1.0)
    }

    /// Same draws as [`with_noise`](Self::with_noise) multiplied by `sign`.
    pub fn with_signed_noise(&self, noise: NoiseSpec, sign: f64) -> ObservationSet {
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let mut perturb = |values: &[f64], rms: f64| -> Vec<f64> {
            let sigma = sign * noise.level * rms;
            values
                .iter()
                .map(|v| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v + sigma * z
                })
                .collect()
        };
        let collar = self
            .collar
            .iter()
            .map(|c| {
                let rms = rms_masked(c.values(), &self.collar_mask);
                let noisy = perturb(c.values(), rms);
                let masked = noisy
                    .iter()
                    .enumerate()
                    .map(|(i, v)| if self.collar_mask[i % self.collar_mask.len()] { *v } else { 0.0 })
                    .collect();
                c.with_values(masked)
            })
            .collect();
        let grid = self.window.grid().clone();
        let d = grid.dim();
        let mut u: Vec<VectorField> = self.window.u.clone();
        for a in 0..d {
            let all: Vec<f64> = self.window.u.iter().flat_map(|f| f.component(a).values().to_vec()).collect();
            let rms = rms(&all);
            for level in u.iter_mut() {
                let vals = perturb(level.component(a).values(), rms);
                level.components_mut()[a] = ScalarField::from_values(&grid, vals);
            }
        }
        let all: Vec<f64> = self.window.theta.iter().flat_map(|f| f.values().to_vec()).collect();
        let rms_theta = rms(&all);
        let theta = self
            .window
            .theta
            .iter()
            .map(|f| ScalarField::from_values(&grid, perturb(f.values(), rms_theta)))
            .collect();
        let window = TimeWindow::new(&grid, self.window.center, u, theta).expect("same window shape");
        ObservationSet {
            problem: self.problem,
            collar,
            collar_mask: self.collar_mask.clone(),
            window,
            reference: self.reference.clone(),
            noise: Some(noise),
        }
    }

    /// Observation norm: the order-3 space-time norm of the collar data
    /// (evaluated on `ω′ × (0,T)` so that only data in `ω` is read) plus the
    /// snapshot terms at `t0`.
    ///
    /// For `λ*`: `|y|²_{H²} + Σ_{j=0..3} |div ∂ₜʲ V|²_{H²}`; for the
    /// densities: `|y|²_{H³} + Σ_{j=1..4} |div ∂ₜʲ V|²_{H³}`.
    pub fn observation_norm(&self, grid: &Grid) -> Result<f64> {
        let mut total = 0.0;
        for c in &self.collar {
            total += grid::space_time_sobolev_norm_sq(grid, c, 3, NormRegion::InnerCollarCylinder)?;
        }
        let (order, orders) = match self.problem {
            Problem::LambdaStar => (2, 0..=3),
            Problem::Densities => (3, 1..=4),
        };
        total += grid::sobolev_norm_sq(grid, self.window.theta_center(), order, NormRegion::Omega)?;
        for j in orders {
            let v = self.window.div_derivative(j)?;
            total += grid::sobolev_norm_sq(grid, &v, order, NormRegion::Omega)?;
        }
        Ok(total)
    }
}

fn rms(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    (values.iter().map(|v| v * v).sum::<f64>() / values.len() as f64).sqrt()
}

fn rms_masked(values: &[f64], mask: &[bool]) -> f64 {
    let picked: Vec<f64> = values
        .iter()
        .enumerate()
        .filter(|(i, _)| mask[i % mask.len()])
        .map(|(_, v)| *v)
        .collect();
    rms(&picked)
}

fn same_field(a: &CoefficientField, b: &CoefficientField) -> bool {
    a.values == b.values
}

fn nondegeneracy_checks(problem: Problem) -> &'static [Nondegeneracy] {
    match problem {
        Problem::LambdaStar => &[Nondegeneracy::DivVelocity],
        Problem::Densities => &[Nondegeneracy::DivVelocity, Nondegeneracy::RadialGradient],
    }
}

/// Runs both forward problems and extracts the difference observations.
pub fn synth_twin_data(
    grid: &Grid,
    coeffs: &CoefficientSet,
    perturbed: &CoefficientSet,
    scenario: &TwinScenario,
) -> Result<(ObservationSet, GroundTruth)> {
    let problem = scenario.problem;
    let fixed_ok = match problem {
        Problem::LambdaStar => {
            same_field(&coeffs.mu, &perturbed.mu)
                && same_field(&coeffs.lambda, &perturbed.lambda)
                && same_field(&coeffs.rho1, &perturbed.rho1)
                && same_field(&coeffs.rho2, &perturbed.rho2)
        }
        Problem::Densities => {
            same_field(&coeffs.mu, &perturbed.mu)
                && same_field(&coeffs.lambda, &perturbed.lambda)
                && same_field(&coeffs.lambda_star, &perturbed.lambda_star)
        }
    };
    if !fixed_ok {
        return Err(Error::validation(
            "twin perturbation",
            format!("only the {problem} coefficients may differ between the two sets"),
        ));
    }
    scenario.bounds.validate()?;
    let which = match problem {
        Problem::LambdaStar => AdmissibleSet::Damping,
        Problem::Densities => AdmissibleSet::Densities,
    };
    let traces = Traces::of(coeffs);
    for set in [coeffs, perturbed] {
        check_admissible(set, grid, which, &scenario.bounds, &traces).into_result("admissible set")?;
    }

    let run = |c: &CoefficientSet| -> Result<Trajectory> {
        forward::simulate(grid, c, &scenario.drive, FieldState::zeros(grid), scenario.cfl)
    };
    let (base, other) = rayon::join(|| run(coeffs), || run(perturbed));
    let (base, other) = (base?, other?);

    let base_window = base.t0_window()?;
    for &check in nondegeneracy_checks(problem) {
        check_nondegeneracy(&base_window, grid, &scenario.x0, scenario.bounds.eps_lb, check)?
            .into_result("non-degeneracy")?;
    }
    let reference = other.t0_window()?;
    let window = base_window.sub(&reference)?;
    let mask = grid.mask(Region::Collar);
    let collar = (0..grid.dim())
        .map(|c| {
            let diff = base.u_component(c).sub(&other.u_component(c));
            let vals = diff
                .values()
                .iter()
                .enumerate()
                .map(|(i, v)| if mask[i % mask.len()] { *v } else { 0.0 })
                .collect();
            diff.with_values(vals)
        })
        .collect();
    let truth = match problem {
        Problem::LambdaStar => GroundTruth::LambdaStar {
            f: coeffs.lambda_star.values.sub(&perturbed.lambda_star.values),
        },
        Problem::Densities => GroundTruth::Densities {
            p: perturbed.rho1.values.sub(&coeffs.rho1.values),
            q: perturbed.rho2.values.sub(&coeffs.rho2.values),
        },
    };
    let obs = ObservationSet {
        problem,
        collar,
        collar_mask: mask,
        window,
        reference,
        noise: None,
    };
    let obs = match scenario.noise {
        Some(n) => obs.with_noise(n),
        None => obs,
    };
    Ok((obs, truth))
}

/// Knobs of the reconstructions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionSettings {
    /// Lower bound required of the non-degeneracy quantities.
    pub eps_lb: f64,
    /// Tikhonov weight relative to the squared norm of the transport data.
    pub tikhonov: f64,
    /// Weight of the boundary-gradient penalty relative to `max|∇θ̃|²`.
    pub boundary_penalty: f64,
}

impl Default for ReconstructionSettings {
    fn default() -> Self {
        ReconstructionSettings {
            eps_lb: 1e-3,
            tikhonov: 1e-8,
            boundary_penalty: 1.0,
        }
    }
}

/// What a reconstruction needs besides the observations.
#[derive(Clone, Copy, Debug)]
pub struct InverseContext<'a> {
    pub grid: &'a Grid,
    /// Coefficients of the base problem (the unknowns enter only through
    /// the perturbed solution).
    pub coeffs: &'a CoefficientSet,
    /// Centre of the weight, used by the radial non-degeneracy guard.
    pub x0: &'a [f64],
    pub settings: &'a ReconstructionSettings,
}

/// Discrete Sobolev error of one recovered field.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorNorm {
    pub field: String,
    pub order: usize,
    pub absolute: f64,
    pub relative: f64,
}

#[derive(Clone, Debug)]
pub struct ReconstructionReport {
    pub problem: Problem,
    pub recovered: Vec<(String, ScalarField)>,
    pub errors: Vec<ErrorNorm>,
    pub d_obs: f64,
    pub diagnostics: Vec<(String, f64)>,
}

impl ReconstructionReport {
    pub fn field(&self, name: &str) -> Option<&ScalarField> {
        self.recovered.iter().find(|(n, _)| n == name).map(|(_, f)| f)
    }

    pub fn error(&self, field: &str, order: usize) -> Option<&ErrorNorm> {
        self.errors.iter().find(|e| e.field == field && e.order == order)
    }

    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Squared error in the norm of the stability estimate: `H²` for the
    /// damping coefficient, `H¹` for `p` plus `L²` for `q`.
    pub fn stability_error(&self) -> Option<f64> {
        let sq = |field: &str, order: usize| self.error(field, order).map(|e| e.absolute * e.absolute);
        match self.problem {
            Problem::LambdaStar => sq("f", 2),
            Problem::Densities => Some(sq("p", 1)? + sq("q", 0)?),
        }
    }

    /// One row per (field, order) error plus the observation norm.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("problem,field,order,absolute,relative,d_obs\n");
        for e in &self.errors {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                self.problem,
                e.field,
                e.order,
                fmt_f64(e.absolute),
                fmt_f64(e.relative),
                fmt_f64(self.d_obs)
            ));
        }
        out
    }
}

fn error_norms(grid: &Grid, name: &str, recovered: &ScalarField, truth: &ScalarField) -> Result<Vec<ErrorNorm>> {
    let diff = recovered.sub(truth);
    (0..=2)
        .map(|order| {
            let e = grid::sobolev_norm(grid, &diff, order, NormRegion::Omega)?;
            let t = grid::sobolev_norm(grid, truth, order, NormRegion::Omega)?;
            Ok(ErrorNorm {
                field: name.to_string(),
                order,
                absolute: e,
                relative: if t > 0.0 { e / t } else { e },
            })
        })
        .collect()
}

/// `v_tt - div(L V) - Δ(λ* v_t) + div(ϱ1 ∇y)` at `t0`, with `v = div V`.
pub fn momentum_residual(grid: &Grid, coeffs: &CoefficientSet, window: &TimeWindow) -> Result<ScalarField> {
    let v_tt = window.div_derivative(2)?;
    let elastic = grid::divergence(grid, &lame_operator(grid, window.u_center(), coeffs));
    let v_t = window.div_derivative(1)?;
    let damping = grid::laplacian(grid, &v_t.mul(&coeffs.lambda_star.values));
    let coupling = forward::div_k_grad(grid, window.theta_center(), &coeffs.rho1);
    Ok(v_tt.sub(&elastic).sub(&damping).add(&coupling))
}

/// `(y_t - Δy + ϱ2 v_t) / div ũ_t` at every node.
pub fn q_quotient(grid: &Grid, rho2: &ScalarField, window: &TimeWindow, div_ref_t: &ScalarField) -> Result<ScalarField> {
    let y_t = window.theta_derivative(1)?;
    let lap = grid::laplacian(grid, window.theta_center());
    let v_t = window.div_derivative(1)?;
    let num = y_t.sub(&lap).add(&rho2.mul(&v_t));
    Ok(num.zip_map(div_ref_t, |a, b| a / b))
}

fn guard(
    obs: &ObservationSet,
    grid: &Grid,
    x0: &[f64],
    eps: f64,
    which: Nondegeneracy,
) -> Result<(String, f64)> {
    let report = check_nondegeneracy(&obs.reference, grid, x0, eps, which)?;
    let item = &report.items[0];
    let out = (item.name.clone(), item.value);
    report.into_result("non-degeneracy")?;
    Ok(out)
}

fn finish(
    grid: &Grid,
    obs: &ObservationSet,
    recovered: Vec<(String, ScalarField)>,
    truth: Option<&GroundTruth>,
    diagnostics: Vec<(String, f64)>,
) -> Result<ReconstructionReport> {
    let mut errors = Vec::new();
    if let Some(truth) = truth {
        for (name, field) in truth.fields() {
            let rec = recovered
                .iter()
                .find(|(n, _)| n == name)
                .ok_or_else(|| Error::Shape(format!("ground truth '{name}' does not match the problem")))?;
            errors.extend(error_norms(grid, name, &rec.1, field)?);
        }
    }
    Ok(ReconstructionReport {
        problem: obs.problem,
        recovered,
        errors,
        d_obs: obs.observation_norm(grid)?,
        diagnostics,
    })
}

/// Recovers `f = λ* - λ̃*` from `Δ(f div ũ_t)(t0) = k` by one Dirichlet
/// Poisson solve and a pointwise division.
pub fn reconstruct_lambda_star(ctx: &InverseContext, obs: &ObservationSet, truth: Option<&GroundTruth>) -> Result<ReconstructionReport> {
    let InverseContext { grid, coeffs, x0, settings } = *ctx;
    obs.check(grid)?;
    let g = guard(obs, grid, x0, settings.eps_lb, Nondegeneracy::DivVelocity)?;
    let k = momentum_residual(grid, coeffs, &obs.window)?;
    let w = forward::solve_poisson(grid, &k)?;
    let div_ref_t = obs.reference.div_derivative(1)?;
    let f = w.zip_map(&div_ref_t, |a, b| a / b);
    if !f.is_finite() {
        return Err(Error::Numerical("non-finite damping reconstruction".into()));
    }
    finish(grid, obs, vec![("f".into(), f)], truth, vec![g])
}

/// Recovers `p = ϱ̃1 - ϱ1` from `div(p ∇θ̃)(t0) = F` by constrained least
/// squares and `q = ϱ̃2 - ϱ2` by the heat-equation quotient.
pub fn reconstruct_densities(ctx: &InverseContext, obs: &ObservationSet, truth: Option<&GroundTruth>) -> Result<ReconstructionReport> {
    let InverseContext { grid, coeffs, x0, settings } = *ctx;
    obs.check(grid)?;
    let g_radial = guard(obs, grid, x0, settings.eps_lb, Nondegeneracy::RadialGradient)?;
    let g_div = guard(obs, grid, x0, settings.eps_lb, Nondegeneracy::DivVelocity)?;
    let rhs = momentum_residual(grid, coeffs, &obs.window)?;
    let solution = solve_transport(grid, obs.reference.theta_center(), &rhs, settings)?;
    let div_ref_t = obs.reference.div_derivative(1)?;
    let q = q_quotient(grid, &coeffs.rho2.values, &obs.window, &div_ref_t)?;
    if !q.is_finite() {
        return Err(Error::Numerical("non-finite density quotient".into()));
    }
    let diagnostics = vec![
        g_radial,
        g_div,
        ("tikhonov weight".into(), solution.tau),
        ("least-squares residual".into(), solution.residual),
    ];
    finish(
        grid,
        obs,
        vec![("p".into(), solution.p), ("q".into(), q)],
        truth,
        diagnostics,
    )
}

/// Dispatches on the problem of the observation set.
pub fn reconstruct(ctx: &InverseContext, obs: &ObservationSet, truth: Option<&GroundTruth>) -> Result<ReconstructionReport> {
    match obs.problem {
        Problem::LambdaStar => reconstruct_lambda_star(ctx, obs, truth),
        Problem::Densities => reconstruct_densities(ctx, obs, truth),
    }
}

#[cfg(test)]
mod tests;
