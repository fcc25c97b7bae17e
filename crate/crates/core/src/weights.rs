//! Exponential weights `φ = e^{γψ}`, `ψ(x,t) = |x - x0|² - β((t - t0)² - M)`,
//! the large-parameter factor `σ = sγφ`, smooth cutoffs, and weighted
//! quadrature accumulated in log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, NormRegion, Region, ScalarField, SpaceTimeField};

/// Parameters of the weight. The base time `t0` is taken from the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightParams {
    pub x0: Vec<f64>,
    pub beta: f64,
    /// Offset `M` inside `ψ`.
    pub m_w: f64,
    /// Margin `δ` between the time-edge weight and the value at `t0`.
    pub delta_w: f64,
    pub gamma: f64,
    pub s: f64,
    /// Half-width of the time cutoff bands.
    pub eps_t: f64,
}

impl WeightParams {
    pub fn with_gamma_s(&self, gamma: f64, s: f64) -> WeightParams {
        WeightParams {
            gamma,
            s,
            ..self.clone()
        }
    }

    /// Checks every parameter condition against `grid` and the lower
    /// gradient constant `r0`.
    pub fn validate(&self, grid: &Grid, r0: f64) -> Result<()> {
        if self.x0.len() != grid.dim() {
            return Err(Error::Shape(format!(
                "x0 has {} coordinates on a {}-dimensional grid",
                self.x0.len(),
                grid.dim()
            )));
        }
        if grid.distance_to_box(&self.x0) == 0.0 {
            return Err(Error::validation(
                "x0 outside closure(Omega)",
                format!("x0 = {:?} lies in the closed domain", self.x0),
            ));
        }
        for (name, v) in [
            ("beta", self.beta),
            ("m_w", self.m_w),
            ("delta_w", self.delta_w),
            ("gamma", self.gamma),
            ("s", self.s),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation("weight parameter positivity", format!("{name} = {v}")));
            }
        }
        let (t0, t_final) = (grid.t0(), grid.t_final());
        let tmin2 = t0.powi(2).min((t_final - t0).powi(2));
        let theta_max = grid.max_distance_from(&self.x0).powi(2);
        if self.beta >= r0 {
            return Err(Error::validation(
                "weight margin: 0 < beta < r0",
                format!("beta = {} >= r0 = {r0}", self.beta),
            ));
        }
        let lhs = self.beta * tmin2;
        let rhs = theta_max + self.delta_w;
        if lhs <= rhs {
            return Err(Error::validation(
                "weight margin: beta * min(t0^2, (T-t0)^2) > max|x-x0|^2 + delta",
                format!("{lhs:.6} <= {rhs:.6}"),
            ));
        }
        let rhs = theta_max / r0;
        if tmin2 <= rhs {
            return Err(Error::validation(
                "observation time: min(t0^2, (T-t0)^2) > max|x-x0|^2 / r0",
                format!("{tmin2:.6} <= {rhs:.6}"),
            ));
        }
        if !(self.eps_t > 0.0 && self.eps_t < t_final / 4.0) {
            return Err(Error::validation(
                "time band: 0 < eps_t < T/4",
                format!("eps_t = {} with T = {t_final}", self.eps_t),
            ));
        }
        Ok(())
    }
}

/// Tabulated weights. Space-time tables are level-major like
/// [`SpaceTimeField`].
#[derive(Clone, Debug)]
pub struct WeightField {
    pub params: WeightParams,
    t0: f64,
    /// `|x - x0|²` per node.
    pub theta: Vec<f64>,
    /// `e^{γ(|x - x0|² + βM)}` per node.
    pub rho: Vec<f64>,
    /// `e^{-βγ(t - t0)²}` per level.
    pub alpha: Vec<f64>,
    pub psi: Vec<f64>,
    pub phi: Vec<f64>,
    n_nodes: usize,
    times: Vec<f64>,
    quad: Vec<f64>,
    time_quad: Vec<f64>,
}

/// Outcome of the three structural properties of `ψ`.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightProperties {
    /// Max of `ψ` at `t = 0` and `t = T`, bound `βM - δ`.
    pub end_values: (f64, f64),
    /// Max of `ψ` over the time edge bands, bound `βM - δ/2`.
    pub edge_bands: (f64, f64),
    /// Min of `ψ(·, t0)`, lower bound `βM`.
    pub base_time: (f64, f64),
}

impl WeightProperties {
    pub fn holds(&self) -> bool {
        self.end_values.0 <= self.end_values.1
            && self.edge_bands.0 <= self.edge_bands.1
            && self.base_time.0 >= self.base_time.1
    }
}

impl WeightField {
    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_levels(&self) -> usize {
        self.alpha.len()
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn s(&self) -> f64 {
        self.params.s
    }

    pub fn gamma(&self) -> f64 {
        self.params.gamma
    }

    pub fn phi_at(&self, level: usize, node: usize) -> f64 {
        self.phi[level * self.n_nodes + node]
    }

    pub fn sigma_at(&self, level: usize, node: usize) -> f64 {
        self.params.s * self.params.gamma * self.phi_at(level, node)
    }

    /// `σ` as a space-time field.
    pub fn sigma(&self, grid: &Grid) -> SpaceTimeField {
        let c = self.params.s * self.params.gamma;
        SpaceTimeField::from_values(grid, self.n_levels(), self.phi.iter().map(|p| c * p).collect())
    }

    /// `e^{(βM - δ/2)γ}`.
    pub fn d0(&self) -> f64 {
        let p = &self.params;
        ((p.beta * p.m_w - p.delta_w / 2.0) * p.gamma).exp()
    }

    /// `e^{γβM}`.
    pub fn d(&self) -> f64 {
        let p = &self.params;
        (p.gamma * p.beta * p.m_w).exp()
    }

    /// Largest deviation of `φ` from `ρ(x)α(t)`, relative.
    pub fn factorization_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, a) in self.alpha.iter().enumerate() {
            for (n, r) in self.rho.iter().enumerate() {
                let phi = self.phi[k * self.n_nodes + n];
                worst = worst.max((phi - r * a).abs() / phi);
            }
        }
        worst
    }

    fn psi_extrema(&self, levels: impl Iterator<Item = usize>) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for k in levels {
            for v in &self.psi[k * self.n_nodes..(k + 1) * self.n_nodes] {
                lo = lo.min(*v);
                hi = hi.max(*v);
            }
        }
        (lo, hi)
    }

    pub fn properties(&self) -> WeightProperties {
        let p = &self.params;
        let bm = p.beta * p.m_w;
        let last = self.n_levels() - 1;
        let (_, end_max) = self.psi_extrema([0, last].into_iter());
        let t_final = self.times[last];
        let band: Vec<usize> = (0..self.n_levels())
            .filter(|&k| self.times[k] < 2.0 * p.eps_t || self.times[k] > t_final - 2.0 * p.eps_t)
            .collect();
        let (_, band_max) = self.psi_extrema(band.into_iter());
        let k0 = self
            .times
            .iter()
            .position(|&t| t == self.t0)
            .expect("t0 is a time level");
        let (base_min, _) = self.psi_extrema(std::iter::once(k0));
        WeightProperties {
            end_values: (end_max, bm - p.delta_w),
            edge_bands: (band_max, bm - p.delta_w / 2.0),
            base_time: (base_min, bm),
        }
    }

    /// Log of `∫ σ^k |f|² e^{2sφ}` over `Q` (or `ω × (0,T)`), where `sq`
    /// holds the squared integrand `|f|²` level-major. Returns `-inf` for a
    /// vanishing integrand.
    pub fn ln_integral_sq(&self, sq: &[f64], sigma_power: f64, mask: Option<&[bool]>) -> f64 {
        self.ln_integral(sq, sigma_power, mask, true)
    }

    /// Same as [`WeightField::ln_integral_sq`], with the factor `e^{2sφ}`
    /// dropped when `exponential` is false.
    pub fn ln_integral(&self, sq: &[f64], sigma_power: f64, mask: Option<&[bool]>, exponential: bool) -> f64 {
        assert_eq!(sq.len(), self.phi.len(), "integrand does not match the weight table");
        let n_nodes = self.n_nodes;
        let terms = (0..self.n_levels()).flat_map(|k| (0..n_nodes).map(move |n| (k, n)));
        log_sum_exp(terms.map(|(k, n)| {
            let w = self.time_quad[k] * self.quad[n];
            self.ln_term(sq[k * n_nodes + n], w, self.phi[k * n_nodes + n], sigma_power, mask.map(|m| m[n]), exponential)
        }))
    }

    /// Log of `∫_Ω σ^k(·, t0) |f|² e^{2sφ(·, t0)}` for a spatial integrand.
    pub fn ln_integral_t0_sq(&self, sq: &[f64], sigma_power: f64, mask: Option<&[bool]>) -> f64 {
        self.ln_integral_t0(sq, sigma_power, mask, true)
    }

    pub fn ln_integral_t0(&self, sq: &[f64], sigma_power: f64, mask: Option<&[bool]>, exponential: bool) -> f64 {
        assert_eq!(sq.len(), self.n_nodes, "integrand does not match the weight table");
        let k0 = self.t0_level();
        log_sum_exp((0..self.n_nodes).map(|n| {
            let phi = self.phi[k0 * self.n_nodes + n];
            self.ln_term(sq[n], self.quad[n], phi, sigma_power, mask.map(|m| m[n]), exponential)
        }))
    }

    /// Index of the time level holding `t0`.
    pub fn t0_level(&self) -> usize {
        self.times
            .iter()
            .position(|&t| t == self.t0)
            .expect("t0 is a time level")
    }

    fn ln_term(&self, v: f64, w: f64, phi: f64, sigma_power: f64, inside: Option<bool>, exponential: bool) -> f64 {
        if v <= 0.0 || w <= 0.0 || inside == Some(false) {
            return f64::NEG_INFINITY;
        }
        let (s, g) = (self.params.s, self.params.gamma);
        let mut ln = w.ln() + v.ln();
        if sigma_power != 0.0 {
            ln += sigma_power * ((s * g).ln() + phi.ln());
        }
        if exponential {
            ln += 2.0 * s * phi;
        }
        ln
    }
}

/// `ln Σ e^{a_i}` without overflow; `-inf` for an empty or all-`-inf` input.
pub fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = terms.map(|a| (a - max).exp()).sum();
    max + sum.ln()
}

/// `ln(e^a + e^b)`.
pub fn ln_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Tabulates the weight on `grid`, rejecting parameters that violate any of
/// the margin conditions or the structural properties of `ψ`.
pub fn build_weights(params: &WeightParams, grid: &Grid, r0: f64) -> Result<WeightField> {
    params.validate(grid, r0)?;
    let w = tabulate(params, grid);
    let p = w.properties();
    let checks = [
        ("end values: psi(., 0), psi(., T) <= beta*M - delta", p.end_values, p.end_values.0 <= p.end_values.1),
        ("edge bands: psi <= beta*M - delta/2", p.edge_bands, p.edge_bands.0 <= p.edge_bands.1),
        ("base time: min psi(., t0) >= beta*M", p.base_time, p.base_time.0 >= p.base_time.1),
    ];
    for (name, (a, b), ok) in checks {
        if !ok {
            return Err(Error::validation(name, format!("{a:.6} against {b:.6}")));
        }
    }
    Ok(w)
}

/// Tabulation without validation (used for the degenerate `s -> 0` probes).
pub fn tabulate(params: &WeightParams, grid: &Grid) -> WeightField {
    let n = grid.n_nodes();
    let (beta, gamma, m_w) = (params.beta, params.gamma, params.m_w);
    let theta: Vec<f64> = (0..n)
        .map(|node| {
            grid.point(node)
                .iter()
                .zip(&params.x0)
                .map(|(a, b)| (a - b) * (a - b))
                .sum()
        })
        .collect();
    let rho: Vec<f64> = theta.iter().map(|t| (gamma * (t + beta * m_w)).exp()).collect();
    let times: Vec<f64> = (0..grid.n_levels()).map(|k| grid.time(k)).collect();
    let t0 = grid.t0();
    let alpha: Vec<f64> = times.iter().map(|t| (-beta * gamma * (t - t0).powi(2)).exp()).collect();
    let mut psi = Vec::with_capacity(n * times.len());
    for t in &times {
        psi.extend(theta.iter().map(|th| th - beta * ((t - t0).powi(2) - m_w)));
    }
    let phi = psi.iter().map(|p| (gamma * p).exp()).collect();
    WeightField {
        params: params.clone(),
        t0,
        theta,
        rho,
        alpha,
        psi,
        phi,
        n_nodes: n,
        times,
        quad: grid.quadrature_weights().to_vec(),
        time_quad: grid.time_weights(),
    }
}

/// Restriction mask for a quadrature region.
pub fn region_mask(grid: &Grid, region: NormRegion) -> Option<Vec<bool>> {
    match region {
        NormRegion::Omega | NormRegion::Cylinder => None,
        NormRegion::Collar | NormRegion::CollarCylinder => Some(grid.mask(Region::Collar)),
        NormRegion::InnerCollarCylinder => Some(grid.mask(Region::InnerCollar)),
    }
}

/// `∫ σ^k |f|² e^{2sφ}` over a space-time region, as a plain number (may
/// overflow to infinity; use [`WeightField::ln_integral_sq`] for large `sφ`).
pub fn weighted_integral(
    grid: &Grid,
    f: &SpaceTimeField,
    weights: &WeightField,
    sigma_power: i32,
    region: NormRegion,
) -> Result<f64> {
    f.check(grid)?;
    if f.n_nodes() != weights.n_nodes() || f.n_levels() != weights.n_levels() {
        return Err(Error::Shape("field and weight table are on different grids".into()));
    }
    let sq: Vec<f64> = f.values().iter().map(|v| v * v).collect();
    let mask = region_mask(grid, region);
    let ln = match region {
        NormRegion::Cylinder | NormRegion::CollarCylinder => {
            weights.ln_integral_sq(&sq, sigma_power as f64, mask.as_deref())
        }
        _ => return Err(Error::Shape("space-time integrand needs a space-time region".into())),
    };
    Ok(ln.exp())
}

/// Smooth cutoffs built from the quintic smoothstep.
#[derive(Clone, Debug)]
pub struct Cutoffs {
    /// 1 away from the inner collar, 0 on `Γ`.
    pub chi: ScalarField,
    /// 1 on the closed inner collar, 0 outside the collar.
    pub chi1: ScalarField,
    /// Time cutoff per level.
    pub eta: Vec<f64>,
    /// `η'` per level.
    pub eta_dt: Vec<f64>,
    pub eps_t: f64,
}

/// `6ξ⁵ - 15ξ⁴ + 10ξ³` clamped to `[0, 1]`.
pub fn smoothstep(xi: f64) -> f64 {
    let x = xi.clamp(0.0, 1.0);
    x * x * x * (x * (6.0 * x - 15.0) + 10.0)
}

pub fn smoothstep_dx(xi: f64) -> f64 {
    if !(0.0..=1.0).contains(&xi) {
        return 0.0;
    }
    30.0 * xi * xi * (xi - 1.0) * (xi - 1.0)
}

/// Time cutoff: 0 on `[0, ε]`, 1 on `[2ε, T - 2ε]`, smooth in between.
pub fn eta(t: f64, eps: f64, t_final: f64) -> (f64, f64) {
    if t < 2.0 * eps {
        let xi = (t - eps) / eps;
        (smoothstep(xi), smoothstep_dx(xi) / eps)
    } else if t > t_final - 2.0 * eps {
        let xi = (t_final - eps - t) / eps;
        (smoothstep(xi), -smoothstep_dx(xi) / eps)
    } else {
        (1.0, 0.0)
    }
}

pub fn build_cutoffs(grid: &Grid, eps_t: f64) -> Result<Cutoffs> {
    let t_final = grid.t_final();
    if !(eps_t > 0.0 && eps_t < t_final / 4.0) {
        return Err(Error::validation(
            "time band: 0 < eps_t < T/4",
            format!("eps_t = {eps_t} with T = {t_final}"),
        ));
    }
    let wp = grid.omega_prime_width() as f64;
    let w = grid.omega_width() as f64;
    // per-axis distance to the nearest face, in cells
    let dist = |node: usize| -> Vec<f64> {
        (0..grid.dim())
            .map(|a| {
                let x = grid.coord(node, a);
                let h = grid.spacing()[a];
                ((x - grid.lower()[a]).min(grid.upper()[a] - x) / h).max(0.0)
            })
            .collect()
    };
    let chi = grid.tabulate_nodes(|node| dist(node).iter().map(|d| smoothstep(d / wp)).product());
    let ramp = (w - 1.0 - wp).max(0.0);
    let chi1 = grid.tabulate_nodes(|node| {
        let inside: f64 = dist(node)
            .iter()
            .map(|&d| {
                if ramp == 0.0 {
                    if d > wp { 1.0 } else { 0.0 }
                } else {
                    smoothstep((d - wp) / ramp)
                }
            })
            .product();
        1.0 - inside
    });
    if chi.values().iter().all(|&v| v < 1.0) {
        return Err(Error::validation(
            "cutoff plateau",
            "no node lies outside the inner collar at this resolution",
        ));
    }
    let (eta, eta_dt): (Vec<f64>, Vec<f64>) = (0..grid.n_levels()).map(|k| eta(grid.time(k), eps_t, t_final)).unzip();
    if !eta.contains(&1.0) {
        return Err(Error::validation(
            "cutoff plateau",
            format!("no time level in [2 eps_t, T - 2 eps_t] with eps_t = {eps_t}"),
        ));
    }
    Ok(Cutoffs {
        chi,
        chi1,
        eta,
        eta_dt,
        eps_t,
    })
}

/// Largest `e^{2sφ}` over the support of `η'`, together with `e^{2s d0}`.
pub fn edge_band_bound(weights: &WeightField, cutoffs: &Cutoffs) -> (f64, f64) {
    let s = weights.s();
    let mut max_phi = f64::NEG_INFINITY;
    for (k, d) in cutoffs.eta_dt.iter().enumerate() {
        if *d == 0.0 {
            continue;
        }
        for n in 0..weights.n_nodes() {
            max_phi = max_phi.max(weights.phi_at(k, n));
        }
    }
    let bound = (2.0 * s * weights.d0()).exp();
    if max_phi == f64::NEG_INFINITY {
        return (0.0, bound);
    }
    ((2.0 * s * max_phi).exp(), bound)
}
