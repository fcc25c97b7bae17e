//! Pointwise squared integrands of both sides of every estimate.
//!
//! PDE-based estimates define their source terms from the test fields, so
//! every member is an exact solution of the corresponding equation.
//!
//! All second derivatives here are compositions of the first-derivative
//! stencil. With a large exponential weight each ratio is decided by the
//! outermost nodes of the discrete supports, and composed stencils keep the
//! footprint of every second-order term inside that of the Laplacian.

use crate::coeffs::{CoefficientField, CoefficientSet};
use crate::error::{Error, Result};
use crate::grid::ops::{st_dt, st_partial};
use crate::grid::{Grid, SpaceTimeField};

use super::ensemble::TestFields;
use super::scalar::{gronwall_primitives, primitive_from};
use super::{EstimateId, EstimateSettings};

/// Where and how a term is integrated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Measure {
    /// `∫_Q · e^{2sφ}`.
    Cylinder,
    /// `∫_{ω×(0,T)} · e^{2sφ}`.
    Collar,
    /// Spatial integrand at `t0`, broadcast over `Q` with the full weight.
    T0Broadcast,
    /// `∫_Q ·` without the exponential weight.
    Plain,
    /// `∫_Ω ·(x)` without the exponential weight.
    PlainSpatial,
    /// `∫_Ω ·(x) e^{2sφ(x,t0)}`.
    T0,
}

#[derive(Clone, Debug)]
pub(crate) struct Integrand {
    pub name: &'static str,
    pub sq: Vec<f64>,
    pub sigma_power: f64,
    pub gamma_power: f64,
    pub s_power: f64,
    pub measure: Measure,
    /// Alternative `γ` exponent logged next to the primary one.
    pub alt_gamma_power: Option<f64>,
}

impl Integrand {
    pub(crate) fn new(name: &'static str, sq: Vec<f64>, sigma_power: f64) -> Integrand {
        Integrand {
            name,
            sq,
            sigma_power,
            gamma_power: 0.0,
            s_power: 0.0,
            measure: Measure::Cylinder,
            alt_gamma_power: None,
        }
    }

    pub(crate) fn gamma(mut self, p: f64) -> Integrand {
        self.gamma_power = p;
        self
    }

    pub(crate) fn on(mut self, m: Measure) -> Integrand {
        self.measure = m;
        self
    }

    pub(crate) fn s_power(mut self, p: f64) -> Integrand {
        self.s_power = p;
        self
    }
}

#[derive(Clone, Debug, Default)]
pub(crate) struct Integrands {
    pub lhs: Vec<Integrand>,
    pub rhs: Vec<Integrand>,
    /// `t0` snapshot terms on the right-hand side.
    pub remainder: Vec<Integrand>,
}

fn st_dtt(grid: &Grid, f: &SpaceTimeField) -> SpaceTimeField {
    st_dt(grid, &st_dt(grid, f))
}

fn st_mixed(grid: &Grid, f: &SpaceTimeField, a: usize, b: usize) -> SpaceTimeField {
    st_partial(grid, &st_partial(grid, f, a), b)
}

fn st_laplacian(grid: &Grid, f: &SpaceTimeField) -> SpaceTimeField {
    let mut acc = st_mixed(grid, f, 0, 0);
    for a in 1..grid.dim() {
        acc = acc.add(&st_mixed(grid, f, a, a));
    }
    acc
}

fn sq_sum(fields: &[&SpaceTimeField]) -> Vec<f64> {
    let mut out = vec![0.0; fields[0].values().len()];
    for f in fields {
        for (o, v) in out.iter_mut().zip(f.values()) {
            *o += v * v;
        }
    }
    out
}

fn sq_of(f: &SpaceTimeField) -> Vec<f64> {
    sq_sum(&[f])
}

fn gradient(grid: &Grid, f: &SpaceTimeField) -> Vec<SpaceTimeField> {
    (0..grid.dim()).map(|a| st_partial(grid, f, a)).collect()
}

fn grad_sq(grads: &[SpaceTimeField]) -> Vec<f64> {
    sq_sum(&grads.iter().collect::<Vec<_>>())
}

fn t0_slice(sq: &[f64], grid: &Grid, k0: usize) -> Vec<f64> {
    let n = grid.n_nodes();
    sq[k0 * n..(k0 + 1) * n].to_vec()
}

/// Broadcast product `c(x) f(x,t)`.
fn times(f: &SpaceTimeField, c: &[f64]) -> SpaceTimeField {
    let n = c.len();
    f.with_values(f.values().iter().enumerate().map(|(i, v)| v * c[i % n]).collect())
}

/// `div(k∇w) = kΔw + ∇k·∇w` with the analytic coefficient gradient.
fn div_k_grad(grid: &Grid, k: &CoefficientField, w: &SpaceTimeField, grad_w: &[SpaceTimeField]) -> SpaceTimeField {
    let mut acc = times(&st_laplacian(grid, w), k.values.values());
    for (a, g) in grad_w.iter().enumerate() {
        acc = acc.add(&times(g, k.gradient.component(a).values()));
    }
    acc
}

/// Sum of squares of all second spatial derivatives `∂^α y`, `|α| = 2`.
fn hessian_sq(grid: &Grid, y: &SpaceTimeField) -> Vec<f64> {
    let d = grid.dim();
    let parts: Vec<SpaceTimeField> = (0..d)
        .flat_map(|a| (a..d).map(move |b| (a, b)))
        .map(|(a, b)| st_mixed(grid, y, a, b))
        .collect();
    sq_sum(&parts.iter().collect::<Vec<_>>())
}

pub(crate) fn build(
    id: EstimateId,
    grid: &Grid,
    coeffs: &CoefficientSet,
    settings: &EstimateSettings,
    fields: &TestFields,
) -> Result<Integrands> {
    if fields.u.len() != grid.dim() {
        return Err(Error::Shape(format!(
            "test field has {} vector components on a {}-dimensional grid",
            fields.u.len(),
            grid.dim()
        )));
    }
    fields.y.check(grid)?;
    for c in &fields.u {
        c.check(grid)?;
    }
    let k0 = grid.t0_index();
    let y = &fields.y;
    Ok(match id {
        EstimateId::Parabolic => {
            let k = f64::from(settings.parabolic_order);
            let grad = gradient(grid, y);
            let source = st_dt(grid, y).sub(&div_k_grad(grid, &coeffs.lambda_star, y, &grad));
            Integrands {
                lhs: vec![
                    Integrand::new("gamma sigma^(k-1) |D^2 y|^2", hessian_sq(grid, y), k - 1.0).gamma(1.0),
                    Integrand::new("gamma sigma^(k+1) |grad y|^2", grad_sq(&grad), k + 1.0).gamma(1.0),
                    Integrand::new("gamma sigma^(k+3) |y|^2", sq_of(y), k + 3.0).gamma(1.0),
                ],
                rhs: vec![Integrand::new("sigma^k |y_t - div(lambda* grad y)|^2", sq_of(&source), k)],
                remainder: vec![],
            }
        }
        EstimateId::Hyperbolic => {
            let grad = gradient(grid, y);
            let source = st_dtt(grid, y).sub(&times(&st_laplacian(grid, y), coeffs.mu.values.values()));
            Integrands {
                lhs: vec![
                    Integrand::new("sigma |grad y|^2", grad_sq(&grad), 1.0),
                    Integrand::new("sigma |y_t|^2", sq_of(&st_dt(grid, y)), 1.0),
                    Integrand::new("sigma^3 |y|^2", sq_of(y), 3.0),
                ],
                rhs: vec![Integrand::new("|y_tt - mu lap y|^2", sq_of(&source), 0.0)],
                remainder: vec![],
            }
        }
        EstimateId::DampedWave => damped_wave(grid, coeffs, y, k0),
        EstimateId::BiotMain => biot(grid, coeffs, fields, k0),
        EstimateId::TimeIntegral => {
            let k = settings.time_integral_order;
            let prim = primitive_from(grid, y, k0);
            Integrands {
                lhs: vec![Integrand::new("sigma^(2k+1) |int_t0^t w|^2", sq_of(&prim), 2.0 * k + 1.0)],
                rhs: vec![Integrand::new("sigma^(2k) |w|^2", sq_of(y), 2.0 * k)],
                remainder: vec![],
            }
        }
        EstimateId::Gronwall => {
            let (damped, plain) = gronwall_primitives(grid, y, k0, settings.gronwall_delta);
            Integrands {
                lhs: vec![Integrand::new("|int e^(delta(tau-t)) h|^2", sq_of(&damped), 0.0).on(Measure::Plain)],
                rhs: vec![Integrand::new("|int h|^2", sq_of(&plain), 0.0).on(Measure::Plain)],
                remainder: vec![],
            }
        }
        EstimateId::SubdomainPoincare => {
            let collar = grid.mask(crate::grid::Region::Collar);
            let n = grid.n_nodes();
            if let Some(i) = y
                .values()
                .iter()
                .enumerate()
                .find(|(i, v)| **v != 0.0 && !collar[i % n])
                .map(|(i, _)| i)
            {
                return Err(Error::validation(
                    "support: v = 0 outside omega",
                    format!("nonzero value at node {} on level {}", i % n, i / n),
                ));
            }
            Integrands {
                lhs: vec![Integrand::new("sigma^4 |v|^2", sq_of(y), 4.0).on(Measure::Collar)],
                rhs: vec![Integrand::new("sigma^2 |grad v|^2", grad_sq(&gradient(grid, y)), 2.0).on(Measure::Collar)],
                remainder: vec![],
            }
        }
        EstimateId::TraceT0 => {
            let sq = sq_of(y);
            Integrands {
                lhs: vec![Integrand::new("|z(t0)|^2", t0_slice(&sq, grid, k0), 0.0).on(Measure::PlainSpatial)],
                rhs: vec![
                    Integrand::new("sigma |z|^2", sq, 1.0).on(Measure::Plain),
                    Integrand::new("sigma^-1 |z_t|^2", sq_of(&st_dt(grid, y)), -1.0).on(Measure::Plain),
                ],
                remainder: vec![],
            }
        }
        EstimateId::FirstOrderL2 | EstimateId::FirstOrderH1 => {
            return Err(Error::Unsupported(
                "first-order estimates act on spatial fields; use evaluate_first_order".into(),
            ))
        }
    })
}

fn damped_wave(grid: &Grid, coeffs: &CoefficientSet, w: &SpaceTimeField, k0: usize) -> Integrands {
    let p = coeffs.p_modulus();
    let w_t = st_dt(grid, w);
    let grad = gradient(grid, w);
    let grad_t = gradient(grid, &w_t);
    let source = st_dtt(grid, w)
        .sub(&times(&st_laplacian(grid, w), p.values.values()))
        .sub(&div_k_grad(grid, &coeffs.lambda_star, &w_t, &grad_t));
    let w_sq = sq_of(w);
    let wt_sq = sq_of(&w_t);
    let grad_sq_w = grad_sq(&grad);
    let lap_sq = sq_of(&st_laplacian(grid, w));
    Integrands {
        lhs: vec![
            Integrand::new("sigma^2 |grad w|^2", grad_sq_w.clone(), 2.0),
            Integrand::new("sigma^4 |w|^2", w_sq.clone(), 4.0),
            Integrand::new("sigma |grad w_t|^2", grad_sq(&grad_t), 1.0),
            Integrand::new("sigma^3 |w_t|^2", wt_sq.clone(), 3.0),
        ],
        rhs: vec![Integrand::new("gamma^-1 |f|^2", sq_of(&source), 0.0).gamma(-1.0)],
        remainder: t0_terms(grid, k0, &lap_sq, &wt_sq, &w_sq, &grad_sq_w),
    }
}

/// The four snapshot terms shared by the damped-wave and coupled estimates.
fn t0_terms(grid: &Grid, k0: usize, lap_sq: &[f64], wt_sq: &[f64], w_sq: &[f64], grad_sq: &[f64]) -> Vec<Integrand> {
    vec![
        Integrand::new("gamma^-1 |lap w(t0)|^2", t0_slice(lap_sq, grid, k0), 0.0)
            .gamma(-1.0)
            .on(Measure::T0Broadcast),
        Integrand::new("gamma^-1 |w_t(t0)|^2", t0_slice(wt_sq, grid, k0), 0.0)
            .gamma(-1.0)
            .on(Measure::T0Broadcast),
        Integrand::new("sigma^4 |w(t0)|^2", t0_slice(w_sq, grid, k0), 4.0).on(Measure::T0Broadcast),
        Integrand::new("sigma^2 |grad w(t0)|^2", t0_slice(grad_sq, grid, k0), 2.0).on(Measure::T0Broadcast),
    ]
}

fn biot(grid: &Grid, coeffs: &CoefficientSet, fields: &TestFields, k0: usize) -> Integrands {
    let d = grid.dim();
    let v = &fields.u;
    let y = &fields.y;
    let mut div = st_partial(grid, &v[0], 0);
    for (a, c) in v.iter().enumerate().skip(1) {
        div = div.add(&st_partial(grid, c, a));
    }
    let div_t = st_dt(grid, &div);
    let grad_div = gradient(grid, &div);
    let grad_div_t = gradient(grid, &div_t);
    let v_t: Vec<SpaceTimeField> = v.iter().map(|c| st_dt(grid, c)).collect();
    let jac: Vec<Vec<SpaceTimeField>> = v.iter().map(|c| gradient(grid, c)).collect();
    let grad_y = gradient(grid, y);

    let mu = coeffs.mu.values.values();
    let lam = coeffs.lambda.values.values();
    let ls = coeffs.lambda_star.values.values();
    let r1 = coeffs.rho1.values.values();
    let r2 = coeffs.rho2.values.values();
    let n = grid.n_nodes();

    // f = v_tt - Δ_{μ,λ}v - ∇(λ* div v_t) + ϱ1 ∇y
    let f: Vec<SpaceTimeField> = (0..d)
        .map(|i| {
            let lap = st_laplacian(grid, &v[i]);
            let v_tt = st_dtt(grid, &v[i]);
            let vals = (0..v_tt.values().len())
                .map(|idx| {
                    let node = idx % n;
                    let mut lame = mu[node] * lap.values()[idx]
                        + (mu[node] + lam[node]) * grad_div[i].values()[idx]
                        + div.values()[idx] * coeffs.lambda.gradient.component(i).values()[node];
                    for j in 0..d {
                        let sym = jac[i][j].values()[idx] + jac[j][i].values()[idx];
                        lame += sym * coeffs.mu.gradient.component(j).values()[node];
                    }
                    let damping = div_t.values()[idx] * coeffs.lambda_star.gradient.component(i).values()[node]
                        + ls[node] * grad_div_t[i].values()[idx];
                    v_tt.values()[idx] - lame - damping + r1[node] * grad_y[i].values()[idx]
                })
                .collect();
            v_tt.with_values(vals)
        })
        .collect();
    // h = y_t - Δy + ϱ2 div v_t
    let h = st_dt(grid, y)
        .sub(&st_laplacian(grid, y))
        .add(&times(&div_t, r2));

    let mut grad_xt: Vec<&SpaceTimeField> = v_t.iter().collect();
    for row in &jac {
        grad_xt.extend(row.iter());
    }
    let grad_f: Vec<SpaceTimeField> = f.iter().flat_map(|c| gradient(grid, c)).collect();
    let div_sq = sq_of(&div);
    let div_t_sq = sq_of(&div_t);
    let grad_div_sq = grad_sq(&grad_div);
    let lap_div_sq = sq_of(&st_laplacian(grid, &div));

    let mut h_term = Integrand::new("gamma^-1 sigma |h|^2", sq_of(&h), 1.0).gamma(-1.0);
    h_term.alt_gamma_power = Some(-2.0);
    Integrands {
        lhs: vec![
            Integrand::new("sigma |grad_xt v|^2", sq_sum(&grad_xt), 1.0),
            Integrand::new("sigma^3 |v|^2", sq_sum(&v.iter().collect::<Vec<_>>()), 3.0),
            Integrand::new("sigma^4 |div v|^2", div_sq.clone(), 4.0),
            Integrand::new("sigma^3 |div v_t|^2", div_t_sq.clone(), 3.0),
            Integrand::new("sigma^2 |grad div v|^2", grad_div_sq.clone(), 2.0),
            Integrand::new("sigma |grad div v_t|^2", grad_sq(&grad_div_t), 1.0),
            Integrand::new("|lap y|^2", sq_of(&st_laplacian(grid, y)), 0.0),
            Integrand::new("sigma^2 |grad y|^2", grad_sq(&grad_y), 2.0),
            Integrand::new("sigma^4 |y|^2", sq_of(y), 4.0),
        ],
        rhs: vec![
            Integrand::new("|f|^2", sq_sum(&f.iter().collect::<Vec<_>>()), 0.0),
            Integrand::new("|grad f|^2", grad_sq(&grad_f), 0.0),
            h_term,
        ],
        remainder: t0_terms(grid, k0, &lap_div_sq, &div_t_sq, &div_sq, &grad_div_sq),
    }
}
