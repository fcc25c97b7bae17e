//! Two-sided numerical evaluation of weighted estimates.
//!
//! Every estimate is an inequality `C · LHS ≤ RHS` between weighted
//! quadratures. For an ensemble of admissible test fields and a sweep of
//! `(γ, s)` the evaluator reports `ln LHS`, `ln RHS`, every itemized term and
//! the ratio `LHS/RHS`; the constant `C` is never asserted. An estimate is
//! judged bounded at a given `γ` when the ensemble-max ratio does not grow
//! by more than 5% between consecutive `s` values over the top half of the
//! sweep.

mod ensemble;
mod integrands;
mod scalar;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coeffs::CoefficientSet;
use crate::error::{Error, Result};
use crate::grid::io::fmt_f64;
use crate::grid::{self, Grid, Region, ScalarField, SpaceTimeField, VectorField};
use crate::weights::{ln_add, tabulate, WeightField, WeightParams};

pub use ensemble::{
    centered_member, make_collar_ensemble, make_test_ensemble, tabulate_bumps, Bump, TestFields,
};
pub use scalar::{damped_primitive, gronwall_bound, gronwall_sides};

use integrands::{Integrand, Integrands, Measure};

/// Growth tolerated between consecutive `s` values for a bounded verdict.
pub const GROWTH_TOLERANCE: f64 = 1.05;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EstimateId {
    BiotMain,
    Parabolic,
    DampedWave,
    Hyperbolic,
    TimeIntegral,
    Gronwall,
    SubdomainPoincare,
    TraceT0,
    FirstOrderL2,
    FirstOrderH1,
}

impl EstimateId {
    pub const ALL: [EstimateId; 10] = [
        EstimateId::BiotMain,
        EstimateId::Parabolic,
        EstimateId::DampedWave,
        EstimateId::Hyperbolic,
        EstimateId::TimeIntegral,
        EstimateId::Gronwall,
        EstimateId::SubdomainPoincare,
        EstimateId::TraceT0,
        EstimateId::FirstOrderL2,
        EstimateId::FirstOrderH1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimateId::BiotMain => "BIOT_MAIN",
            EstimateId::Parabolic => "PARABOLIC",
            EstimateId::DampedWave => "DAMPED_WAVE",
            EstimateId::Hyperbolic => "HYPERBOLIC",
            EstimateId::TimeIntegral => "TIME_INTEGRAL",
            EstimateId::Gronwall => "GRONWALL",
            EstimateId::SubdomainPoincare => "SUBDOMAIN_POINCARE",
            EstimateId::TraceT0 => "TRACE_T0",
            EstimateId::FirstOrderL2 => "FIRST_ORDER_L2",
            EstimateId::FirstOrderH1 => "FIRST_ORDER_H1",
        }
    }
}

impl fmt::Display for EstimateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimateId {
    type Err = Error;

    fn from_str(s: &str) -> Result<EstimateId> {
        let key = s.trim().to_ascii_uppercase().replace('-', "_");
        EstimateId::ALL
            .into_iter()
            .find(|id| id.name() == key)
            .ok_or_else(|| {
                let names: Vec<&str> = EstimateId::ALL.iter().map(|id| id.name()).collect();
                Error::Config(format!("unknown estimate '{s}', expected one of {}", names.join(", ")))
            })
    }
}

/// Per-estimate knobs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimateSettings {
    /// Order `k` of the parabolic estimate.
    pub parabolic_order: u32,
    /// Order `k ≥ 0` of the time-integral estimate.
    pub time_integral_order: f64,
    /// Rate `δ` of the Grönwall kernel.
    pub gronwall_delta: f64,
    /// Required lower bound `c0` on `|γ(x)·(x - x0)|` for first-order estimates.
    pub transversality: f64,
}

impl Default for EstimateSettings {
    fn default() -> Self {
        EstimateSettings {
            parabolic_order: 1,
            time_integral_order: 0.0,
            gronwall_delta: 1.0,
            transversality: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub gammas: Vec<f64>,
    pub s_values: Vec<f64>,
}

impl Default for Sweep {
    fn default() -> Self {
        Sweep {
            gammas: vec![1.0, 2.0],
            s_values: vec![1.0, 2.0, 4.0, 8.0, 16.0],
        }
    }
}

impl Sweep {
    pub fn validate(&self) -> Result<()> {
        if self.gammas.is_empty() || self.s_values.is_empty() {
            return Err(Error::validation("sweep", "gamma and s lists must be nonempty"));
        }
        for &v in self.gammas.iter().chain(&self.s_values) {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation("sweep", format!("sweep values must be positive, got {v}")));
            }
        }
        if self.s_values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::validation("sweep", "s values must be strictly increasing"));
        }
        Ok(())
    }
}

/// Everything an evaluation needs besides the fields.
#[derive(Clone, Copy, Debug)]
pub struct EstimateContext<'a> {
    pub grid: &'a Grid,
    pub coeffs: &'a CoefficientSet,
    /// Base weight parameters; `γ` and `s` are overridden by the sweep.
    pub weights: &'a WeightParams,
    pub settings: &'a EstimateSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TermValue {
    pub name: String,
    /// Natural log of the term; `-inf` for a vanishing term.
    pub ln_value: f64,
}

/// One ensemble member at one `(γ, s)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateRow {
    pub member: usize,
    pub gamma: f64,
    pub s: f64,
    pub ln_lhs: f64,
    pub ln_rhs: f64,
    /// Right-hand side with the alternative `γ` exponent where one exists.
    pub ln_rhs_alt: Option<f64>,
    pub lhs_terms: Vec<TermValue>,
    pub rhs_terms: Vec<TermValue>,
    /// Snapshot terms at `t0`, part of the right-hand side.
    pub remainder_terms: Vec<TermValue>,
    /// Both sides vanish; excluded from statistics.
    pub degenerate: bool,
}

impl EstimateRow {
    pub fn ln_ratio(&self) -> Option<f64> {
        (!self.degenerate).then_some(self.ln_lhs - self.ln_rhs)
    }

    pub fn ratio(&self) -> Option<f64> {
        self.ln_ratio().map(f64::exp)
    }

    pub fn ln_ratio_alt(&self) -> Option<f64> {
        match (self.degenerate, self.ln_rhs_alt) {
            (false, Some(alt)) => Some(self.ln_lhs - alt),
            _ => None,
        }
    }
}

/// Ensemble statistics at one `(γ, s)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowStats {
    pub gamma: f64,
    pub s: f64,
    /// Non-degenerate members.
    pub count: usize,
    pub ln_max: f64,
    /// Median of the log ratios (mean of the middle pair for even counts).
    pub ln_median: f64,
}

impl RowStats {
    pub fn max(&self) -> f64 {
        self.ln_max.exp()
    }

    pub fn median(&self) -> f64 {
        self.ln_median.exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Bounded,
    Growing,
    /// Too few non-degenerate rows to decide.
    Undetermined,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Bounded => "bounded",
            Verdict::Growing => "growing",
            Verdict::Undetermined => "undetermined",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CarlemanReport {
    pub id: EstimateId,
    pub rows: Vec<EstimateRow>,
    pub stats: Vec<RowStats>,
    pub verdicts: Vec<(f64, Verdict)>,
    /// Named scalar diagnostics such as an analytic bound or a margin.
    pub diagnostics: Vec<(String, f64)>,
}

impl CarlemanReport {
    /// Bounded only if every `γ` is bounded.
    pub fn verdict(&self) -> Verdict {
        if self.verdicts.iter().any(|(_, v)| *v == Verdict::Growing) {
            Verdict::Growing
        } else if !self.verdicts.is_empty() && self.verdicts.iter().all(|(_, v)| *v == Verdict::Bounded) {
            Verdict::Bounded
        } else {
            Verdict::Undetermined
        }
    }

    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    pub fn stats_for(&self, gamma: f64) -> Vec<&RowStats> {
        self.stats.iter().filter(|r| r.gamma == gamma).collect()
    }

    /// One line per member and `(γ, s)`; term columns hold natural logs.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("estimate,member,gamma,s,ln_lhs,ln_rhs,ln_ratio,ratio,degenerate");
        if let Some(first) = self.rows.first() {
            if first.ln_rhs_alt.is_some() {
                out.push_str(",ln_ratio_alt");
            }
            for t in first.lhs_terms.iter().chain(&first.rhs_terms).chain(&first.remainder_terms) {
                out.push_str(",ln[");
                out.push_str(&t.name.replace(',', ";"));
                out.push(']');
            }
        }
        out.push('\n');
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        for r in &self.rows {
            let mut cells = vec![
                self.id.to_string(),
                r.member.to_string(),
                fmt_f64(r.gamma),
                fmt_f64(r.s),
                fmt_f64(r.ln_lhs),
                fmt_f64(r.ln_rhs),
                opt(r.ln_ratio()),
                opt(r.ratio()),
                r.degenerate.to_string(),
            ];
            if r.ln_rhs_alt.is_some() {
                cells.push(opt(r.ln_ratio_alt()));
            }
            for t in r.lhs_terms.iter().chain(&r.rhs_terms).chain(&r.remainder_terms) {
                cells.push(fmt_f64(t.ln_value));
            }
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Evaluates `id` on every ensemble member over the sweep.
pub fn evaluate_estimate(
    id: EstimateId,
    members: &[TestFields],
    ctx: &EstimateContext,
    sweep: &Sweep,
) -> Result<CarlemanReport> {
    sweep.validate()?;
    if members.is_empty() {
        return Err(Error::validation("ensemble size", "at least one test field is required"));
    }
    let grid = ctx.grid;
    if matches!(id, EstimateId::FirstOrderL2 | EstimateId::FirstOrderH1) {
        let k0 = grid.t0_index();
        let fields: Vec<ScalarField> = members.iter().map(|m| m.y.level_field(grid, k0)).collect();
        let op = FirstOrderOperator::radial(grid, &ctx.weights.x0);
        return evaluate_first_order(
            grid,
            &op,
            &fields,
            ctx.weights,
            sweep,
            id == EstimateId::FirstOrderH1,
            ctx.settings.transversality,
        );
    }
    let per_member = members
        .par_iter()
        .map(|m| integrands::build(id, grid, ctx.coeffs, ctx.settings, m))
        .collect::<Result<Vec<_>>>()?;
    let mut diagnostics = Vec::new();
    if id == EstimateId::Gronwall {
        let delta = ctx.settings.gronwall_delta;
        diagnostics.push(("bound".to_string(), gronwall_bound(delta, grid.t_final())));
    }
    Ok(assemble(id, grid, &per_member, ctx.weights, sweep, diagnostics))
}

fn integrate(term: &Integrand, table: &WeightField, grid: &Grid, collar: &[bool]) -> f64 {
    let p = term.sigma_power;
    let ln = match term.measure {
        Measure::Cylinder => table.ln_integral(&term.sq, p, None, true),
        Measure::Collar => table.ln_integral(&term.sq, p, Some(collar), true),
        Measure::T0Broadcast => {
            let full: Vec<f64> = term.sq.iter().copied().cycle().take(term.sq.len() * grid.n_levels()).collect();
            table.ln_integral(&full, p, None, true)
        }
        Measure::Plain => table.ln_integral(&term.sq, p, None, false),
        Measure::PlainSpatial => table.ln_integral_t0(&term.sq, p, None, false),
        Measure::T0 => table.ln_integral_t0(&term.sq, p, None, true),
    };
    let mut scale = 0.0;
    if term.gamma_power != 0.0 {
        scale += term.gamma_power * table.gamma().ln();
    }
    if term.s_power != 0.0 {
        scale += term.s_power * table.s().ln();
    }
    ln + scale
}

/// Sum of log-values in a fixed order.
pub fn ln_total(terms: &[TermValue]) -> f64 {
    terms.iter().fold(f64::NEG_INFINITY, |acc, t| ln_add(acc, t.ln_value))
}

fn assemble(
    id: EstimateId,
    grid: &Grid,
    per_member: &[Integrands],
    base: &WeightParams,
    sweep: &Sweep,
    diagnostics: Vec<(String, f64)>,
) -> CarlemanReport {
    let collar = grid.mask(Region::Collar);
    let pairs: Vec<(f64, f64)> = sweep
        .gammas
        .iter()
        .flat_map(|&g| sweep.s_values.iter().map(move |&s| (g, s)))
        .collect();
    let rows: Vec<EstimateRow> = pairs
        .par_iter()
        .flat_map_iter(|&(gamma, s)| {
            let table = tabulate(&base.with_gamma_s(gamma, s), grid);
            per_member
                .iter()
                .enumerate()
                .map(|(member, ints)| {
                    let eval = |list: &[Integrand]| -> Vec<TermValue> {
                        list.iter()
                            .map(|t| TermValue {
                                name: t.name.to_string(),
                                ln_value: integrate(t, &table, grid, &collar),
                            })
                            .collect()
                    };
                    let lhs_terms = eval(&ints.lhs);
                    let rhs_terms = eval(&ints.rhs);
                    let remainder_terms = eval(&ints.remainder);
                    let ln_lhs = ln_total(&lhs_terms);
                    let ln_rhs = ln_add(ln_total(&rhs_terms), ln_total(&remainder_terms));
                    let ln_rhs_alt = ints.rhs.iter().any(|t| t.alt_gamma_power.is_some()).then(|| {
                        let alt: Vec<TermValue> = ints
                            .rhs
                            .iter()
                            .zip(&rhs_terms)
                            .map(|(t, v)| match t.alt_gamma_power {
                                Some(p) => TermValue {
                                    name: v.name.clone(),
                                    ln_value: v.ln_value + (p - t.gamma_power) * gamma.ln(),
                                },
                                None => v.clone(),
                            })
                            .collect();
                        ln_add(ln_total(&alt), ln_total(&remainder_terms))
                    });
                    EstimateRow {
                        member,
                        gamma,
                        s,
                        ln_lhs,
                        ln_rhs,
                        ln_rhs_alt,
                        lhs_terms,
                        rhs_terms,
                        remainder_terms,
                        degenerate: ln_lhs == f64::NEG_INFINITY && ln_rhs == f64::NEG_INFINITY,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let stats: Vec<RowStats> = pairs
        .iter()
        .map(|&(gamma, s)| {
            let mut lr: Vec<f64> = rows
                .iter()
                .filter(|r| r.gamma == gamma && r.s == s)
                .filter_map(EstimateRow::ln_ratio)
                .collect();
            lr.sort_by(f64::total_cmp);
            let count = lr.len();
            let (ln_max, ln_median) = if count == 0 {
                (f64::NAN, f64::NAN)
            } else {
                let med = if count % 2 == 1 {
                    lr[count / 2]
                } else {
                    0.5 * (lr[count / 2 - 1] + lr[count / 2])
                };
                (lr[count - 1], med)
            };
            RowStats {
                gamma,
                s,
                count,
                ln_max,
                ln_median,
            }
        })
        .collect();
    let verdicts = sweep
        .gammas
        .iter()
        .map(|&g| {
            let series: Vec<&RowStats> = stats.iter().filter(|r| r.gamma == g).collect();
            (g, judge(&series))
        })
        .collect();
    CarlemanReport {
        id,
        rows,
        stats,
        verdicts,
        diagnostics,
    }
}

/// Non-increasing within [`GROWTH_TOLERANCE`] over the top half of the sweep.
fn judge(series: &[&RowStats]) -> Verdict {
    let top = &series[series.len() / 2..];
    if top.len() < 2 || top.iter().any(|r| r.count == 0) {
        return Verdict::Undetermined;
    }
    let slack = GROWTH_TOLERANCE.ln();
    let ok = top.iter().all(|r| r.ln_max.is_finite() || r.ln_max == f64::NEG_INFINITY)
        && top.windows(2).all(|w| {
            w[1].ln_max == f64::NEG_INFINITY || w[1].ln_max <= w[0].ln_max + slack
        });
    if ok {
        Verdict::Bounded
    } else {
        Verdict::Growing
    }
}

/// Both sides of an inequality.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Sides {
    pub lhs: f64,
    pub rhs: f64,
}

impl Sides {
    /// `None` for `0 / 0`.
    pub fn ratio(&self) -> Option<f64> {
        (self.lhs != 0.0 || self.rhs != 0.0).then(|| self.lhs / self.rhs)
    }
}

/// `∫_Ω |z(·,t0)|²` against `∫_Q (σ|z|² + σ⁻¹|z_t|²)`, both without the
/// exponential weight.
pub fn evaluate_trace_t0(grid: &Grid, z: &SpaceTimeField, weights: &WeightField) -> Result<Sides> {
    z.check(grid)?;
    if weights.n_nodes() != grid.n_nodes() || weights.n_levels() != grid.n_levels() {
        return Err(Error::Shape("field and weight table are on different grids".into()));
    }
    let fields = TestFields {
        u: (0..grid.dim()).map(|_| SpaceTimeField::zeros(grid)).collect(),
        y: z.clone(),
    };
    let ints = integrands::build(
        EstimateId::TraceT0,
        grid,
        &CoefficientSet::constant(grid, 1.0, 1.0, 1.0, 0.0, 0.0),
        &EstimateSettings::default(),
        &fields,
    )?;
    let collar = grid.mask(Region::Collar);
    let total = |list: &[Integrand]| {
        list.iter()
            .map(|t| integrate(t, weights, grid, &collar))
            .fold(f64::NEG_INFINITY, ln_add)
            .exp()
    };
    Ok(Sides {
        lhs: total(&ints.lhs),
        rhs: total(&ints.rhs),
    })
}

/// `P f = γ(x)·∇f + γ0(x) f`.
#[derive(Clone, Debug)]
pub struct FirstOrderOperator {
    pub transport: VectorField,
    pub zeroth: ScalarField,
}

impl FirstOrderOperator {
    /// `γ(x) = x - x0`, `γ0 = 0`.
    pub fn radial(grid: &Grid, x0: &[f64]) -> FirstOrderOperator {
        FirstOrderOperator {
            transport: VectorField::from_components(
                (0..grid.dim())
                    .map(|a| grid.tabulate(|p| p[a] - x0.get(a).copied().unwrap_or(0.0)))
                    .collect(),
            ),
            zeroth: ScalarField::zeros(grid),
        }
    }

    pub fn apply(&self, grid: &Grid, f: &ScalarField) -> ScalarField {
        let grad = grid::gradient(grid, f);
        let mut out = self.zeroth.mul(f);
        for (g, df) in self.transport.components().iter().zip(grad.components()) {
            out = out.add(&g.mul(df));
        }
        out
    }

    /// Smallest `|γ(x)·(x - x0)|` and the node attaining it.
    pub fn transversality(&self, grid: &Grid, x0: &[f64]) -> (f64, usize) {
        (0..grid.n_nodes())
            .map(|n| {
                let p = grid.point(n);
                let dot: f64 = (0..grid.dim())
                    .map(|a| self.transport.component(a).values()[n] * (p[a] - x0[a]))
                    .sum();
                (dot.abs(), n)
            })
            .fold((f64::INFINITY, 0), |acc, v| if v.0 < acc.0 { v } else { acc })
    }
}

/// `s²∫ e^{2sφ(·,t0)}|f|²` (plus `|∇f|²` in the `H¹` form) against
/// `∫ e^{2sφ(·,t0)}|Pf|²` (plus `|∇Pf|²`), for spatial fields vanishing with
/// their gradient on `Γ`.
pub fn evaluate_first_order(
    grid: &Grid,
    op: &FirstOrderOperator,
    fields: &[ScalarField],
    weights: &WeightParams,
    sweep: &Sweep,
    h1: bool,
    c0: f64,
) -> Result<CarlemanReport> {
    sweep.validate()?;
    op.transport.check(grid)?;
    op.zeroth.check(grid)?;
    let (margin, worst) = op.transversality(grid, &weights.x0);
    if margin < c0 {
        return Err(Error::validation(
            "transversality: |gamma(x).(x - x0)| >= c0 > 0",
            format!(
                "min {margin:.3e} < c0 = {c0:.3e} at node {worst} (x = {:?})",
                grid.point(worst)
            ),
        ));
    }
    let id = if h1 {
        EstimateId::FirstOrderH1
    } else {
        EstimateId::FirstOrderL2
    };
    let mut per_member = Vec::with_capacity(fields.len());
    for f in fields {
        f.check(grid)?;
        check_boundary_trace(grid, f)?;
        let grad = grid::gradient(grid, f);
        let pf = op.apply(grid, f);
        let sq = |g: &ScalarField| g.values().iter().map(|v| v * v).collect::<Vec<f64>>();
        let mut lhs = vec![Integrand::new("s^2 |f|^2", sq(f), 0.0).s_power(2.0).on(Measure::T0)];
        let mut rhs = vec![Integrand::new("|Pf|^2", sq(&pf), 0.0).on(Measure::T0)];
        if h1 {
            lhs.push(Integrand::new("s^2 |grad f|^2", grad.norm_sq().into_values(), 0.0).s_power(2.0).on(Measure::T0));
            rhs.push(Integrand::new("|grad Pf|^2", grid::gradient(grid, &pf).norm_sq().into_values(), 0.0).on(Measure::T0));
        }
        per_member.push(Integrands {
            lhs,
            rhs,
            remainder: vec![],
        });
    }
    Ok(assemble(id, grid, &per_member, weights, sweep, vec![("c0".to_string(), margin)]))
}

fn check_boundary_trace(grid: &Grid, f: &ScalarField) -> Result<()> {
    let grad = grid::gradient(grid, f);
    let scale = f.max_abs().max(grad.max_abs()).max(f64::MIN_POSITIVE);
    for n in (0..grid.n_nodes()).filter(|&n| grid.is_boundary(n)) {
        let g: f64 = grad.components().iter().map(|c| c.values()[n].abs()).fold(0.0, f64::max);
        if f.values()[n].abs() > 1e-10 * scale || g > 1e-8 * scale {
            return Err(Error::validation(
                "first-order data: f = 0 and grad f = 0 on the boundary",
                format!("|f| = {:.3e}, |grad f| = {g:.3e} at node {n}", f.values()[n].abs()),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests;
