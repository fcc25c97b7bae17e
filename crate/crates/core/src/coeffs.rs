//! Coefficient fields of the Biot system and the structural checks they must
//! pass: ellipticity, the gradient condition relative to the observation
//! point `x0`, the two admissible sets (damping coefficient and densities)
//! and the pointwise non-degeneracy bounds used by the reconstructions.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forward::TimeWindow;
use crate::grid::{self, io, Grid, Region, ScalarField, VectorField};

/// Tolerance for boundary-trace equalities.
pub const TRACE_TOL: f64 = 1e-6;

/// Analytic coefficient profiles. Bump-type profiles are defined relative to
/// the box `[lower, upper]` so that they vanish with their gradient on `Γ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    Constant { value: f64 },
    /// `base + slope · x`
    Linear { base: f64, slope: Vec<f64> },
    /// `base · exp(rate · x)`
    Exponential { base: f64, rate: Vec<f64> },
    /// `base + amplitude · Π (x_i - a_i)^2 (b_i - x_i)^2`
    PolyBump { base: f64, amplitude: f64 },
    /// `base + amplitude · Π sin(π ξ_i) ξ_i (1 - ξ_i)` with `ξ` the unit-box coordinate.
    SinPoly { base: f64, amplitude: f64 },
    /// Values loaded from a binary field dump.
    File { path: PathBuf },
}

impl Preset {
    pub fn constant(value: f64) -> Preset {
        Preset::Constant { value }
    }

    /// Value and gradient at `x`; `None` for tabulated (file) presets.
    pub fn eval(&self, x: &[f64], lower: &[f64], upper: &[f64]) -> Option<(f64, Vec<f64>)> {
        let d = x.len();
        match self {
            Preset::Constant { value } => Some((*value, vec![0.0; d])),
            Preset::Linear { base, slope } => {
                let v = base + slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
                Some((v, slope.clone()))
            }
            Preset::Exponential { base, rate } => {
                let v = base * rate.iter().zip(x).map(|(a, b)| a * b).sum::<f64>().exp();
                Some((v, rate.iter().map(|r| r * v).collect()))
            }
            Preset::PolyBump { base, amplitude } => {
                let factors: Vec<(f64, f64)> = (0..d)
                    .map(|i| {
                        let (a, b) = (lower[i], upper[i]);
                        let p = (x[i] - a) * (b - x[i]);
                        let dp = (b - x[i]) - (x[i] - a);
                        (p * p, 2.0 * p * dp)
                    })
                    .collect();
                Some(product_rule(*base, *amplitude, &factors))
            }
            Preset::SinPoly { base, amplitude } => {
                let factors: Vec<(f64, f64)> = (0..d)
                    .map(|i| {
                        let len = upper[i] - lower[i];
                        let xi = (x[i] - lower[i]) / len;
                        let pi = std::f64::consts::PI;
                        let (s, c) = (pi * xi).sin_cos();
                        let p = xi * (1.0 - xi);
                        let dp = 1.0 - 2.0 * xi;
                        (s * p, (pi * c * p + s * dp) / len)
                    })
                    .collect();
                Some(product_rule(*base, *amplitude, &factors))
            }
            Preset::File { .. } => None,
        }
    }

    /// Tabulates the preset on `grid`.
    pub fn build(&self, grid: &Grid) -> Result<CoefficientField> {
        if let Preset::File { path } = self {
            let values = io::load_field(path, grid)?;
            return Ok(CoefficientField::from_values(grid, values));
        }
        self.validate(grid.dim())?;
        let n = grid.n_nodes();
        let mut values = Vec::with_capacity(n);
        let mut grads = vec![Vec::with_capacity(n); grid.dim()];
        for node in 0..n {
            let (v, g) = self
                .eval(&grid.point(node), grid.lower(), grid.upper())
                .expect("analytic preset");
            values.push(v);
            for (a, ga) in g.into_iter().enumerate() {
                grads[a].push(ga);
            }
        }
        Ok(CoefficientField {
            values: ScalarField::from_values(grid, values),
            gradient: VectorField::from_components(
                grads.into_iter().map(|g| ScalarField::from_values(grid, g)).collect(),
            ),
            analytic: true,
        })
    }

    fn validate(&self, dim: usize) -> Result<()> {
        let len = match self {
            Preset::Linear { slope, .. } => Some(slope.len()),
            Preset::Exponential { rate, .. } => Some(rate.len()),
            _ => None,
        };
        match len {
            Some(l) if l != dim => Err(Error::Config(format!(
                "coefficient preset has {l} direction entries for a {dim}-dimensional grid"
            ))),
            _ => Ok(()),
        }
    }
}

// base + amp * Π f_i, with factors given as (f_i, f_i').
fn product_rule(base: f64, amp: f64, factors: &[(f64, f64)]) -> (f64, Vec<f64>) {
    let prod: f64 = factors.iter().map(|f| f.0).product();
    let grad = (0..factors.len())
        .map(|i| {
            amp * factors
                .iter()
                .enumerate()
                .map(|(j, f)| if i == j { f.1 } else { f.0 })
                .product::<f64>()
        })
        .collect();
    (base + amp * prod, grad)
}

/// A tabulated coefficient together with its gradient (analytic when the
/// coefficient comes from a preset, discrete otherwise).
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientField {
    pub values: ScalarField,
    pub gradient: VectorField,
    pub analytic: bool,
}

impl CoefficientField {
    pub fn from_values(grid: &Grid, values: ScalarField) -> CoefficientField {
        let gradient = grid::gradient(grid, &values);
        CoefficientField {
            values,
            gradient,
            analytic: false,
        }
    }

    pub fn constant(grid: &Grid, c: f64) -> CoefficientField {
        CoefficientField {
            values: ScalarField::constant(grid, c),
            gradient: VectorField::zeros(grid),
            analytic: true,
        }
    }

    pub fn value(&self, node: usize) -> f64 {
        self.values.values()[node]
    }

    pub fn grad(&self, node: usize) -> Vec<f64> {
        self.gradient.components().iter().map(|c| c.values()[node]).collect()
    }

    pub fn scale(&self, c: f64) -> CoefficientField {
        CoefficientField {
            values: self.values.scale(c),
            gradient: self.gradient.scale(c),
            analytic: self.analytic,
        }
    }

    pub fn add(&self, other: &CoefficientField) -> CoefficientField {
        CoefficientField {
            values: self.values.add(&other.values),
            gradient: self.gradient.add(&other.gradient),
            analytic: self.analytic && other.analytic,
        }
    }

    pub fn sub(&self, other: &CoefficientField) -> CoefficientField {
        self.add(&other.scale(-1.0))
    }

    pub fn is_constant(&self) -> bool {
        let v = self.values.values();
        v.iter().all(|&x| x == v[0])
    }
}

/// Scalar bounds of the structural hypotheses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientBounds {
    /// Lower bound of `μ`.
    pub mu0: f64,
    /// Lower bound of `2μ + λ`.
    pub mu1: f64,
    pub r0: f64,
    pub r1: f64,
    /// Lower bound of the damping coefficient.
    pub lambda0: f64,
    /// Lower bound of the first density on `ω`.
    pub rho0: f64,
    /// Non-degeneracy threshold.
    pub eps_lb: f64,
    /// Bound on the squared `C²` norm of the damping coefficient.
    pub m: f64,
    /// Bound on the summed squared `C²` norms of the densities.
    pub m_b: f64,
    /// A-priori solution bound (recorded, not checked).
    pub m0: f64,
}

impl CoefficientBounds {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mu0", self.mu0),
            ("mu1", self.mu1),
            ("lambda0", self.lambda0),
            ("rho0", self.rho0),
            ("eps_lb", self.eps_lb),
            ("m", self.m),
            ("m_b", self.m_b),
            ("m0", self.m0),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation("bound positivity", format!("{name} = {v} must be > 0")));
            }
        }
        if !(self.r0 > 0.0 && self.r0 < self.mu0) {
            return Err(Error::validation(
                "r0 in (0, mu0)",
                format!("r0 = {} with mu0 = {}", self.r0, self.mu0),
            ));
        }
        if !(self.r1 > 0.0 && self.r1 < self.mu1) {
            return Err(Error::validation(
                "r1 in (0, mu1)",
                format!("r1 = {} with mu1 = {}", self.r1, self.mu1),
            ));
        }
        Ok(())
    }
}

/// The five coefficient fields of the system.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSet {
    pub mu: CoefficientField,
    pub lambda: CoefficientField,
    pub lambda_star: CoefficientField,
    pub rho1: CoefficientField,
    pub rho2: CoefficientField,
}

impl CoefficientSet {
    pub fn constant(grid: &Grid, mu: f64, lambda: f64, lambda_star: f64, rho1: f64, rho2: f64) -> CoefficientSet {
        CoefficientSet {
            mu: CoefficientField::constant(grid, mu),
            lambda: CoefficientField::constant(grid, lambda),
            lambda_star: CoefficientField::constant(grid, lambda_star),
            rho1: CoefficientField::constant(grid, rho1),
            rho2: CoefficientField::constant(grid, rho2),
        }
    }

    /// `2μ + λ` with its gradient.
    pub fn p_modulus(&self) -> CoefficientField {
        self.mu.scale(2.0).add(&self.lambda)
    }

    pub fn check(&self, grid: &Grid) -> Result<()> {
        for f in [&self.mu, &self.lambda, &self.lambda_star, &self.rho1, &self.rho2] {
            f.values.check(grid)?;
            if !f.values.is_finite() {
                return Err(Error::Numerical("non-finite coefficient value".into()));
            }
        }
        Ok(())
    }

    pub fn max_p_modulus(&self) -> f64 {
        self.p_modulus().values.values().iter().cloned().fold(f64::MIN, f64::max)
    }
}

/// Declarative coefficient block of a run config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoefficientSpec {
    pub mu: Preset,
    pub lambda: Preset,
    pub lambda_star: Preset,
    pub rho1: Preset,
    pub rho2: Preset,
}

impl CoefficientSpec {
    pub fn build(&self, grid: &Grid) -> Result<CoefficientSet> {
        Ok(CoefficientSet {
            mu: self.mu.build(grid)?,
            lambda: self.lambda.build(grid)?,
            lambda_star: self.lambda_star.build(grid)?,
            rho1: self.rho1.build(grid)?,
            rho2: self.rho2.build(grid)?,
        })
    }
}

/// Prescribed boundary traces: the damping coefficient and the first
/// density must agree with these (values and gradients) on `Γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct Traces {
    pub lambda_star: CoefficientField,
    pub rho1: CoefficientField,
}

impl Traces {
    /// Traces read off a coefficient set.
    pub fn of(coeffs: &CoefficientSet) -> Traces {
        Traces {
            lambda_star: coeffs.lambda_star.clone(),
            rho1: coeffs.rho1.clone(),
        }
    }
}

/// One itemized check: `value` compared to `bound`, with the worst node.
#[derive(Clone, Debug, PartialEq)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub bound: f64,
    pub worst_node: Option<usize>,
}

impl CheckItem {
    fn upper(name: &str, value: f64, bound: f64, worst_node: Option<usize>) -> CheckItem {
        CheckItem {
            name: name.into(),
            passed: value <= bound,
            value,
            bound,
            worst_node,
        }
    }

    fn lower(name: &str, value: f64, bound: f64, worst_node: Option<usize>) -> CheckItem {
        CheckItem {
            name: name.into(),
            passed: value > bound,
            value,
            bound,
            worst_node,
        }
    }

    /// `bound - value` for upper bounds, `value - bound` for lower bounds.
    pub fn margin(&self) -> f64 {
        if self.name.starts_with("min") {
            self.value - self.bound
        } else {
            self.bound - self.value
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub passed: bool,
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    fn new(items: Vec<CheckItem>) -> CheckReport {
        CheckReport {
            passed: items.iter().all(|i| i.passed),
            items,
        }
    }

    pub fn item(&self, name: &str) -> Option<&CheckItem> {
        self.items.iter().find(|i| i.name == name)
    }

    /// Converts a failed report into a validation error naming the first
    /// failing condition.
    pub fn into_result(self, condition: &str) -> Result<CheckReport> {
        if let Some(bad) = self.items.iter().find(|i| !i.passed) {
            return Err(Error::validation(
                format!("{condition}: {}", bad.name),
                format!(
                    "value {:.6e} against bound {:.6e} at node {:?}",
                    bad.value, bad.bound, bad.worst_node
                ),
            ));
        }
        Ok(self)
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> (f64, Option<usize>) {
    values
        .enumerate()
        .fold((f64::NEG_INFINITY, None), |(m, i), (j, v)| if v > m { (v, Some(j)) } else { (m, i) })
}

fn argmin(values: impl Iterator<Item = f64>) -> (f64, Option<usize>) {
    let (m, i) = argmax(values.map(|v| -v));
    (-m, i)
}

/// Ellipticity: `μ >= μ0` and `2μ + λ >= μ1` at every node.
pub fn check_ellipticity(coeffs: &CoefficientSet, bounds: &CoefficientBounds) -> CheckReport {
    let (mu_min, mu_at) = argmin(coeffs.mu.values.values().iter().cloned());
    let p = coeffs.p_modulus();
    let (p_min, p_at) = argmin(p.values.values().iter().cloned());
    let mut a = CheckItem::lower("min mu", mu_min, bounds.mu0, mu_at);
    a.passed = mu_min >= bounds.mu0;
    let mut b = CheckItem::lower("min 2mu+lambda", p_min, bounds.mu1, p_at);
    b.passed = p_min >= bounds.mu1;
    CheckReport::new(vec![a, b])
}

/// Gradient condition relative to `x0`:
/// `(3/2)|∇log μ||x - x0| <= 1 - r0/μ0` and the same for `2μ + λ` with
/// `r1/μ1`, checked at every node.
pub fn check_a1(
    coeffs: &CoefficientSet,
    grid: &Grid,
    x0: &[f64],
    bounds: &CoefficientBounds,
) -> Result<CheckReport> {
    if x0.len() != grid.dim() {
        return Err(Error::Shape(format!(
            "x0 has {} coordinates on a {}-dimensional grid",
            x0.len(),
            grid.dim()
        )));
    }
    if grid.distance_to_box(x0) == 0.0 {
        return Err(Error::validation(
            "x0 outside closure(Omega)",
            format!("x0 = {x0:?} lies in the closed domain"),
        ));
    }
    let p = coeffs.p_modulus();
    for (name, field) in [("mu", &coeffs.mu), ("2mu+lambda", &p)] {
        if let Some(i) = field.values.values().iter().position(|&v| v <= 0.0) {
            return Err(Error::validation(
                format!("{name} > 0"),
                format!("nonpositive value {} at node {i}", field.values.values()[i]),
            ));
        }
    }
    let lhs = |field: &CoefficientField, node: usize| {
        let g = field.grad(node);
        let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let r = grid
            .point(node)
            .iter()
            .zip(x0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        1.5 * gnorm / field.value(node) * r
    };
    let (mu_max, mu_at) = argmax((0..grid.n_nodes()).map(|n| lhs(&coeffs.mu, n)));
    let (p_max, p_at) = argmax((0..grid.n_nodes()).map(|n| lhs(&p, n)));
    Ok(CheckReport::new(vec![
        CheckItem::upper("gradient log mu", mu_max, 1.0 - bounds.r0 / bounds.mu0, mu_at),
        CheckItem::upper("gradient log (2mu+lambda)", p_max, 1.0 - bounds.r1 / bounds.mu1, p_at),
    ]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdmissibleSet {
    /// Admissible damping coefficients.
    Damping,
    /// Admissible density pairs.
    Densities,
}

/// Discrete `C²` norm: the largest absolute value of the field, its first
/// derivatives and all its second differences.
pub fn c2_norm(grid: &Grid, f: &ScalarField) -> f64 {
    let mut m = f.max_abs();
    for a in 0..grid.dim() {
        m = m.max(grid::partial(grid, f, a).max_abs());
        for b in a..grid.dim() {
            m = m.max(grid::mixed(grid, f, a, b).max_abs());
        }
    }
    m
}

fn trace_items(grid: &Grid, name: &str, field: &CoefficientField, trace: &CoefficientField) -> Vec<CheckItem> {
    let boundary: Vec<usize> = (0..grid.n_nodes()).filter(|&n| grid.is_boundary(n)).collect();
    let (dv, at) = argmax(boundary.iter().map(|&n| (field.value(n) - trace.value(n)).abs()));
    let (dg, gat) = argmax(boundary.iter().map(|&n| {
        field
            .grad(n)
            .iter()
            .zip(trace.grad(n))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }));
    vec![
        CheckItem::upper(&format!("trace {name}"), dv, TRACE_TOL, at.map(|i| boundary[i])),
        CheckItem::upper(&format!("trace grad {name}"), dg, TRACE_TOL, gat.map(|i| boundary[i])),
    ]
}

/// Membership test for one of the admissible sets. Always returns a report.
pub fn check_admissible(
    coeffs: &CoefficientSet,
    grid: &Grid,
    which: AdmissibleSet,
    bounds: &CoefficientBounds,
    traces: &Traces,
) -> CheckReport {
    let mut items = Vec::new();
    match which {
        AdmissibleSet::Damping => {
            let ls = &coeffs.lambda_star;
            let (lo, at) = argmin(ls.values.values().iter().cloned());
            items.push(CheckItem::lower("min lambda_star", lo, bounds.lambda0, at));
            let c2 = c2_norm(grid, &ls.values);
            items.push(CheckItem::upper("c2 norm squared", c2 * c2, bounds.m, None));
            items.extend(trace_items(grid, "lambda_star", ls, &traces.lambda_star));
        }
        AdmissibleSet::Densities => {
            let (lo, at) = argmin(
                (0..grid.n_nodes())
                    .filter(|&n| grid.in_region(n, Region::Collar))
                    .map(|n| coeffs.rho1.value(n)),
            );
            let collar: Vec<usize> = (0..grid.n_nodes())
                .filter(|&n| grid.in_region(n, Region::Collar))
                .collect();
            items.push(CheckItem::lower("min rho1 on omega", lo, bounds.rho0, at.map(|i| collar[i])));
            let a = c2_norm(grid, &coeffs.rho1.values);
            let b = c2_norm(grid, &coeffs.rho2.values);
            items.push(CheckItem::upper("c2 norm squared", a * a + b * b, bounds.m_b, None));
            items.extend(trace_items(grid, "rho1", &coeffs.rho1, &traces.rho1));
        }
    }
    CheckReport::new(items)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Nondegeneracy {
    /// `|div u_t(·, t0)| >= ε` on `Ω`.
    DivVelocity,
    /// `|∇θ(·, t0) · (x - x0)| >= ε` on `Ω`.
    RadialGradient,
}

/// Pointwise quantity whose minimum is compared to `ε`.
pub fn nondegeneracy_field(
    window: &TimeWindow,
    grid: &Grid,
    x0: &[f64],
    which: Nondegeneracy,
) -> Result<ScalarField> {
    match which {
        Nondegeneracy::DivVelocity => {
            let ut = window.u_derivative(1)?;
            Ok(grid::divergence(grid, &ut).map(f64::abs))
        }
        Nondegeneracy::RadialGradient => {
            let theta = window.theta_center();
            let g = grid::gradient(grid, theta);
            let vals = (0..grid.n_nodes())
                .map(|n| {
                    g.components()
                        .iter()
                        .enumerate()
                        .map(|(a, c)| c.values()[n] * (grid.coord(n, a) - x0[a]))
                        .sum::<f64>()
                        .abs()
                })
                .collect();
            Ok(ScalarField::from_values(grid, vals))
        }
    }
}

/// Minimum over `Ω` of the non-degeneracy quantity, compared to `ε`.
pub fn check_nondegeneracy(
    window: &TimeWindow,
    grid: &Grid,
    x0: &[f64],
    eps: f64,
    which: Nondegeneracy,
) -> Result<CheckReport> {
    let q = nondegeneracy_field(window, grid, x0, which)?;
    let (lo, at) = argmin(q.values().iter().cloned());
    let name = match which {
        Nondegeneracy::DivVelocity => "min |div u_t(t0)|",
        Nondegeneracy::RadialGradient => "min |grad theta(t0).(x-x0)|",
    };
    let mut item = CheckItem::lower(name, lo, eps, at);
    item.passed = lo >= eps;
    Ok(CheckReport::new(vec![item]))
}
