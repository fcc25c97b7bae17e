//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so that the lines are always printed.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::f64::consts::PI;
use std::fs;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use biotlab::carleman::{
    centered_member, evaluate_estimate, evaluate_first_order, make_test_ensemble, CarlemanReport, EstimateContext,
    EstimateId, EstimateSettings, FirstOrderOperator, Sweep, TermValue, TestFields, Verdict, GROWTH_TOLERANCE,
    damped_primitive, gronwall_bound, gronwall_sides,
};
use biotlab::coeffs::{nondegeneracy_field, CoefficientBounds, CoefficientSet, Nondegeneracy, Preset};
use biotlab::forward::{simulate_final, BoundaryDrive, Factor, ManufacturedBiot, SeparableField, TimeWindow, DEFAULT_CFL};
use biotlab::grid::{self, ops, Grid, GridSpec, NormRegion, ScalarField, VectorField};
use biotlab::inverse::{
    fit_holder, noise_ladder, q_quotient, reconstruct, synth_twin_data, GroundTruth, InverseContext, ObservationSet,
    Problem, ReconstructionSettings, TwinScenario,
};
use biotlab::weights::{build_cutoffs, build_weights, WeightParams};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn line_grid(nodes: usize, dt: f64, t_final: f64, t0: f64) -> Grid {
    Grid::new(&GridSpec {
        lower: vec![0.0],
        upper: vec![1.0],
        nodes: vec![nodes],
        dt,
        t_final,
        t0,
        omega_width: 4,
        omega_prime_width: 2,
    })
    .expect("valid grid")
}

fn square_grid() -> Grid {
    Grid::new(&GridSpec {
        lower: vec![0.0, 0.0],
        upper: vec![1.0, 1.0],
        nodes: vec![33, 33],
        dt: 6.0 / 64.0,
        t_final: 6.0,
        t0: 3.0,
        omega_width: 4,
        omega_prime_width: 2,
    })
    .expect("valid grid")
}

fn l2(grid: &Grid, f: &ScalarField) -> f64 {
    f.values()
        .iter()
        .zip(grid.quadrature_weights())
        .map(|(v, w)| w * v * v)
        .sum::<f64>()
        .sqrt()
}

// 1. Manufactured solutions.

fn mms_error(grid: &Grid, m: &ManufacturedBiot) -> Result<f64, String> {
    let end = ok(simulate_final(grid, &m.coeffs, m, m.exact_state(grid, 0.0), DEFAULT_CFL))?;
    let exact = m.exact_state(grid, end.t);
    let du = end.u.components()[0].sub(&exact.u.components()[0]);
    let dth = end.theta.sub(&exact.theta);
    Ok((l2(grid, &du).powi(2) + l2(grid, &dth).powi(2)).sqrt())
}

fn orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn mms_convergence() -> Outcome {
    let start = Instant::now();
    // sin(πx) in space; dt ∝ h² so the first-order time error keeps pace.
    let mut space = Vec::new();
    for n in [65, 129, 257] {
        let h = 1.0 / (n - 1) as f64;
        let g = line_grid(n, 4.0 * h * h, 0.25, 0.125);
        let m = ManufacturedBiot {
            u: vec![SeparableField::product(1.0, vec![Factor::sin(PI)], Factor::poly(&[0.0, 0.0, 1.0]))],
            theta: SeparableField::product(1.0, vec![Factor::sin(PI)], Factor::poly(&[0.0, 1.0])),
            coeffs: CoefficientSet::constant(&g, 1.0, 1.0, 1.0, 1.0, 1.0),
        };
        space.push(mms_error(&g, &m)?);
    }
    // Quadratic in space, which the stencils differentiate exactly, so only
    // the time error remains.
    let mut time = Vec::new();
    for dt in [4e-3, 2e-3, 1e-3] {
        let g = line_grid(65, dt, 1.0, 0.5);
        let m = ManufacturedBiot {
            u: vec![SeparableField::product(1.0, vec![Factor::poly(&[0.0, 1.0, -1.0])], Factor::sin(2.0))],
            theta: SeparableField::product(1.0, vec![Factor::poly(&[0.0, 1.0, -1.0])], Factor::cos(1.0)),
            coeffs: CoefficientSet::constant(&g, 1.0, 1.0, 1.0, 1.0, 1.0),
        };
        time.push(mms_error(&g, &m)?);
    }
    let (so, to) = (orders(&space), orders(&time));
    let secs = start.elapsed().as_secs_f64();
    ensure!(so.iter().all(|&o| o >= 1.8), "spatial orders {so:?} (errors {space:?})");
    ensure!(to.iter().all(|&o| o >= 0.8), "temporal orders {to:?} (errors {time:?})");
    ensure!(secs < 60.0, "runtime {secs:.1} s");
    Ok(format!(
        "space orders {:.3}/{:.3}, time orders {:.3}/{:.3}, {secs:.1} s",
        so[0], so[1], to[0], to[1]
    ))
}

// 2. Weight validation.

fn weight_validation() -> Outcome {
    let g = line_grid(33, 0.01, 6.0, 3.0);
    let params = |beta: f64, delta_w: f64, gamma: f64, eps_t: f64| WeightParams {
        x0: vec![-1.0],
        beta,
        m_w: 1.0,
        delta_w,
        gamma,
        s: 2.0,
        eps_t,
    };
    let r0 = 0.6;
    ensure!(build_weights(&params(0.5, 0.4, 1.0, 0.04), &g, r0).is_ok(), "beta 0.5 rejected");
    let err = match build_weights(&params(0.4, 0.4, 1.0, 0.04), &g, r0) {
        Ok(_) => return Err("beta 0.4 accepted".into()),
        Err(e) => e.to_string(),
    };
    ensure!(err.contains("beta * min(t0^2, (T-t0)^2)"), "unexpected message {err}");

    let mut checked = 0;
    for beta in [0.5, 0.55, 0.59] {
        for delta_w in [0.2, 0.4] {
            for gamma in [1.0, 2.0] {
                for eps_t in [0.02, 0.04] {
                    let p = params(beta, delta_w, gamma, eps_t);
                    // max |x - x0|² over [0,1] is 4 for x0 = -1
                    let accept = beta < r0 && beta * 9.0 > 4.0 + delta_w && 9.0 > 4.0 / r0;
                    let built = build_weights(&p, &g, r0);
                    ensure!(built.is_ok() == accept, "beta {beta} delta {delta_w}: accept {accept}");
                    let Ok(w) = built else { continue };
                    let bm = p.beta * p.m_w;
                    let mut end_max = f64::NEG_INFINITY;
                    let mut band_max = f64::NEG_INFINITY;
                    let mut base_min = f64::INFINITY;
                    for k in 0..g.n_levels() {
                        let t = g.time(k);
                        for node in 0..g.n_nodes() {
                            let x = g.coord(node, 0);
                            let psi = (x + 1.0).powi(2) - p.beta * ((t - 3.0).powi(2) - p.m_w);
                            let tabulated = w.psi[k * g.n_nodes() + node];
                            ensure!((tabulated - psi).abs() <= 1e-12 * psi.abs().max(1.0), "psi mismatch");
                            if k == 0 || k + 1 == g.n_levels() {
                                end_max = end_max.max(psi);
                            }
                            if t < 2.0 * eps_t || t > 6.0 - 2.0 * eps_t {
                                band_max = band_max.max(psi);
                            }
                            if k == g.t0_index() {
                                base_min = base_min.min(psi);
                            }
                        }
                    }
                    ensure!(end_max <= bm - delta_w, "end values {end_max} > {}", bm - delta_w);
                    ensure!(band_max <= bm - delta_w / 2.0, "edge bands {band_max}");
                    ensure!(base_min >= bm, "base time {base_min} < {bm}");
                    ensure!(w.properties().holds(), "reported properties disagree");
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("0.5 accepted, 0.4 rejected; psi properties hold on {checked} accepted configs"))
}

// 3. Grönwall.

fn gronwall() -> Outcome {
    let n = 1001;
    let dt = 1.0 / (n - 1) as f64;
    let delta = 1.0;
    let bound = gronwall_bound(delta, 1.0);
    ensure!((bound - (1.0 + 1f64.exp().powi(2))).abs() < 1e-12, "bound {bound}");

    let (lhs, rhs) = gronwall_sides(&vec![1.0; n], dt, 0, delta);
    let exact_lhs = 1.0 - 2.0 * (1.0 - (-1f64).exp()) + 0.5 * (1.0 - (-2f64).exp());
    ensure!((exact_lhs - 0.168091).abs() < 1e-6, "closed form {exact_lhs}");
    ensure!((lhs - exact_lhs).abs() < 1e-4 && (rhs - 1.0 / 3.0).abs() < 1e-4, "h = 1: {lhs} {rhs}");

    let trapezoid = |f: &[f64]| -> f64 {
        let last = f.len() - 1;
        f.iter().enumerate().map(|(k, v)| if k == 0 || k == last { 0.5 * dt * v } else { dt * v }).sum()
    };
    let mut min_margin = f64::INFINITY;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes: Vec<(f64, f64)> = (0..6).map(|_| (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        let h: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                modes
                    .iter()
                    .enumerate()
                    .map(|(j, (a, b))| a * (j as f64 * PI * t).cos() + b * ((j + 1) as f64 * PI * t).sin())
                    .sum()
            })
            .collect();
        let (lhs, rhs) = gronwall_sides(&h, dt, 0, delta);
        // direct double quadrature of ∫(∫_0^t e^{-δ(t-τ)} h dτ)² dt
        let inner: Vec<f64> = (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                let f: Vec<f64> = (0..=k).map(|j| (-delta * (t - j as f64 * dt)).exp() * h[j]).collect();
                if k == 0 {
                    0.0
                } else {
                    let last = f.len() - 1;
                    f.iter().enumerate().map(|(j, v)| if j == 0 || j == last { 0.5 * dt * v } else { dt * v }).sum()
                }
            })
            .collect();
        let direct = trapezoid(&inner.iter().map(|v| v * v).collect::<Vec<_>>());
        ensure!((direct - lhs).abs() <= 1e-9 * direct.abs().max(1e-12), "seed {seed}: {lhs} vs {direct}");
        ensure!(damped_primitive(&h, dt, 0, delta)[0] == 0.0, "primitive must start at zero");
        let margin = bound * rhs - lhs;
        ensure!(margin >= 0.0, "seed {seed}: margin {margin}");
        min_margin = min_margin.min(margin / (bound * rhs));
    }
    Ok(format!("h = 1: LHS {lhs:.6} RHS {rhs:.6}; 100 seeds, min relative margin {min_margin:.3}"))
}

// Bounded-ratio rule recomputed from the report statistics.
fn recomputed_verdict(report: &CarlemanReport, gamma: f64) -> bool {
    let mut top: Vec<(f64, f64)> = report
        .stats
        .iter()
        .filter(|s| s.gamma == gamma && s.s >= 4.0)
        .map(|s| (s.s, s.ln_max))
        .collect();
    top.sort_by(|a, b| a.0.total_cmp(&b.0));
    top.len() >= 2 && top.windows(2).all(|w| w[1].1 <= w[0].1 + GROWTH_TOLERANCE.ln())
}

struct Setup {
    grid: Grid,
    coeffs: CoefficientSet,
    weights: WeightParams,
    settings: EstimateSettings,
    members: Vec<TestFields>,
}

impl Setup {
    fn new() -> Setup {
        let grid = square_grid();
        let coeffs = CoefficientSet::constant(&grid, 1.0, 1.0, 1.0, 0.5, 0.5);
        let weights = WeightParams {
            x0: vec![-0.2, -0.2],
            beta: 0.4,
            m_w: 1.0,
            delta_w: 0.4,
            gamma: 1.0,
            s: 1.0,
            eps_t: 0.1,
        };
        let cutoffs = build_cutoffs(&grid, weights.eps_t).expect("cutoffs");
        let members = make_test_ensemble(&grid, &cutoffs, 8, 2024);
        Setup {
            grid,
            coeffs,
            weights,
            settings: EstimateSettings::default(),
            members,
        }
    }

    fn ctx(&self) -> EstimateContext<'_> {
        EstimateContext {
            grid: &self.grid,
            coeffs: &self.coeffs,
            weights: &self.weights,
            settings: &self.settings,
        }
    }

    fn bounded(&self, id: EstimateId, members: &[TestFields]) -> Result<CarlemanReport, String> {
        let report = ok(evaluate_estimate(id, members, &self.ctx(), &Sweep::default()))?;
        for gamma in [1.0, 2.0] {
            let mine = recomputed_verdict(&report, gamma);
            ensure!(mine, "{id} at gamma {gamma}: ensemble max grows ({:?})", report.stats);
            ensure!(
                report.verdicts.iter().any(|(g, v)| *g == gamma && *v == Verdict::Bounded),
                "{id}: reported verdict disagrees"
            );
        }
        Ok(report)
    }
}

// 4. Time-integral and trace estimates.

fn time_integral_and_trace(st: &Setup) -> Outcome {
    for id in [EstimateId::TimeIntegral, EstimateId::TraceT0] {
        st.bounded(id, &st.members)?;
    }
    Ok("TIME_INTEGRAL and TRACE_T0 bounded over s in {1,2,4,8,16} at gamma 1 and 2, 8 fields".into())
}

// 5. Carleman estimates.

fn term(terms: &[TermValue], name: &str) -> Result<f64, String> {
    terms
        .iter()
        .find(|t| t.name == name)
        .map(|t| t.ln_value)
        .ok_or_else(|| format!("no term '{name}'"))
}

fn carleman(st: &Setup) -> Outcome {
    let start = Instant::now();
    let ids = [
        EstimateId::Parabolic,
        EstimateId::Hyperbolic,
        EstimateId::DampedWave,
        EstimateId::BiotMain,
    ];
    for id in ids {
        let base = st.bounded(id, &st.members)?;
        for c in [1e3, 1e-3] {
            let scaled: Vec<TestFields> = st.members.iter().map(|m| m.scale(c)).collect();
            let rep = ok(evaluate_estimate(id, &scaled, &st.ctx(), &Sweep::default()))?;
            for (a, b) in base.rows.iter().zip(&rep.rows) {
                let (ra, rb) = (a.ln_ratio(), b.ln_ratio());
                let (Some(ra), Some(rb)) = (ra, rb) else {
                    return Err(format!("{id}: degenerate row"));
                };
                // |ln ra - ln rb| < 1e-10 bounds the relative change of the ratio
                ensure!((ra - rb).abs() < 1e-10, "{id} scale {c}: ln ratio {ra} vs {rb}");
            }
        }
    }

    // Without coupling the coupled estimate splits into its two blocks.
    let mut split = Setup::new();
    split.coeffs = CoefficientSet::constant(&split.grid, 1.0, 1.0, 1.0, 0.0, 0.0);
    let sweep = Sweep::default();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * a.abs().max(1.0);
    let vec_only: Vec<TestFields> = split.members.iter().map(TestFields::vector_only).collect();
    let as_wave: Vec<TestFields> = vec_only
        .iter()
        .map(|m| {
            let g = &split.grid;
            let div = ops::st_partial(g, &m.u[0], 0).add(&ops::st_partial(g, &m.u[1], 1));
            TestFields { u: m.u.clone(), y: div }
        })
        .collect();
    let biot = ok(evaluate_estimate(EstimateId::BiotMain, &vec_only, &split.ctx(), &sweep))?;
    let wave = ok(evaluate_estimate(EstimateId::DampedWave, &as_wave, &split.ctx(), &sweep))?;
    for (b, w) in biot.rows.iter().zip(&wave.rows) {
        for (bn, wn) in [
            ("sigma^4 |div v|^2", "sigma^4 |w|^2"),
            ("sigma^3 |div v_t|^2", "sigma^3 |w_t|^2"),
            ("sigma^2 |grad div v|^2", "sigma^2 |grad w|^2"),
            ("sigma |grad div v_t|^2", "sigma |grad w_t|^2"),
        ] {
            ensure!(close(term(&b.lhs_terms, bn)?, term(&w.lhs_terms, wn)?), "vector block: {bn}");
        }
        ensure!(b.remainder_terms == w.remainder_terms, "vector block remainders");
    }
    let scal_only: Vec<TestFields> = split.members.iter().map(TestFields::scalar_only).collect();
    let biot = ok(evaluate_estimate(EstimateId::BiotMain, &scal_only, &split.ctx(), &sweep))?;
    let par = ok(evaluate_estimate(EstimateId::Parabolic, &scal_only, &split.ctx(), &sweep))?;
    for (b, p) in biot.rows.iter().zip(&par.rows) {
        let lg = b.gamma.ln();
        ensure!(
            close(term(&b.lhs_terms, "sigma^2 |grad y|^2")? + lg, term(&p.lhs_terms, "gamma sigma^(k+1) |grad y|^2")?),
            "scalar block gradient term"
        );
        ensure!(
            close(term(&b.lhs_terms, "sigma^4 |y|^2")? + lg, term(&p.lhs_terms, "gamma sigma^(k+3) |y|^2")?),
            "scalar block zeroth term"
        );
        ensure!(close(b.ln_rhs + lg, p.ln_rhs), "scalar block right side");
    }
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 600.0, "runtime {secs:.1} s");
    Ok(format!(
        "4 estimates bounded on 33x33x65, homogeneity to 1e-10 under 1e+-3, block-diagonal split holds, {secs:.1} s"
    ))
}

// Twin experiments on the calibrated one-dimensional setup.

const X0: [f64; 1] = [-1.0];

fn twin_bounds() -> CoefficientBounds {
    CoefficientBounds {
        mu0: 1.0,
        mu1: 3.0,
        r0: 0.6,
        r1: 1.0,
        lambda0: 0.5,
        rho0: 0.25,
        eps_lb: 1e-3,
        m: 100.0,
        m_b: 100.0,
        m0: 1.0,
    }
}

struct Twin {
    grid: Grid,
    coeffs: CoefficientSet,
    obs: ObservationSet,
    truth: GroundTruth,
}

impl Twin {
    fn run(problem: Problem, perturb: impl Fn(&Grid, &mut CoefficientSet)) -> Result<Twin, String> {
        let grid = line_grid(129, 0.002, 6.0, 3.0);
        let coeffs = CoefficientSet::constant(&grid, 1.0, 1.0, 1.0, 0.5, 0.5);
        let mut perturbed = coeffs.clone();
        perturb(&grid, &mut perturbed);
        let drive = BoundaryDrive {
            displacement: 1.0,
            temperature: 1.0,
        };
        let scenario = TwinScenario::new(problem, drive, twin_bounds(), X0.to_vec());
        let (obs, truth) = ok(synth_twin_data(&grid, &coeffs, &perturbed, &scenario))?;
        Ok(Twin {
            grid,
            coeffs,
            obs,
            truth,
        })
    }

    fn ctx<'a>(&'a self, settings: &'a ReconstructionSettings) -> InverseContext<'a> {
        InverseContext {
            grid: &self.grid,
            coeffs: &self.coeffs,
            x0: &X0,
            settings,
        }
    }

    fn reconstruct(&self, eps_lb: f64) -> Result<biotlab::inverse::ReconstructionReport, biotlab::Error> {
        let settings = ReconstructionSettings {
            eps_lb,
            ..Default::default()
        };
        reconstruct(&self.ctx(&settings), &self.obs, Some(&self.truth))
    }
}

fn damping_twin() -> Result<Twin, String> {
    Twin::run(Problem::LambdaStar, |g, c| {
        c.lambda_star = Preset::PolyBump {
            base: 1.0,
            amplitude: -0.1,
        }
        .build(g)
        .expect("preset")
    })
}

// 6. Damping reconstruction.

fn lambda_star(twin: &Twin) -> Outcome {
    let r = ok(twin.reconstruct(1e-3))?;
    let rel = r.error("f", 0).ok_or("no L2 error")?.relative;
    // golden value 3.66e-4 recorded on this grid
    ensure!(rel <= 1e-3, "relative L2 error {rel:e} above the recorded golden bound 1e-3");
    ensure!(rel <= 1e-2, "relative L2 error {rel:e}");
    let zero = Twin::run(Problem::LambdaStar, |_, _| {})?;
    let rz = ok(zero.reconstruct(1e-3))?;
    let max = rz.field("f").ok_or("no f")?.max_abs();
    ensure!(max == 0.0, "zero perturbation recovered {max:e}");
    Ok(format!("relative L2 error {rel:.3e} (golden <= 1e-3); zero perturbation recovers exactly 0"))
}

// 7. Density reconstruction.

/// Quotient on analytic fields around `t0 = 0.5`:
/// `ũ = (t + t²/2)(x + 0.3x²)`, `V = 0.1 sin t sin 2x`, `y = e^{-t} cos 3x`,
/// `ϱ2 = 0.5 + 0.1x`.
fn quotient_error(n: usize) -> Result<f64, String> {
    let g = line_grid(n, 1e-3, 1.0, 0.5);
    let hw = 4;
    let t0 = g.t0();
    let times: Vec<f64> = (0..=2 * hw).map(|k| t0 + (k as f64 - hw as f64) * g.dt()).collect();
    let vec1 = |f: &dyn Fn(f64, f64) -> f64, t: f64| VectorField::from_components(vec![g.tabulate(|x| f(x[0], t))]);
    let reference = ok(TimeWindow::new(
        &g,
        g.t0_index(),
        times.iter().map(|&t| vec1(&|x, t| (t + 0.5 * t * t) * (x + 0.3 * x * x), t)).collect(),
        times.iter().map(|_| ScalarField::zeros(&g)).collect(),
    ))?;
    let window = ok(TimeWindow::new(
        &g,
        g.t0_index(),
        times.iter().map(|&t| vec1(&|x, t| 0.1 * t.sin() * (2.0 * x).sin(), t)).collect(),
        times.iter().map(|&t| g.tabulate(|x| (-t).exp() * (3.0 * x[0]).cos())).collect(),
    ))?;
    let rho2 = g.tabulate(|x| 0.5 + 0.1 * x[0]);
    let div_ref = ok(reference.div_derivative(1))?;
    let q = ok(q_quotient(&g, &rho2, &window, &div_ref))?;
    let exact = g.tabulate(|x| {
        let x = x[0];
        let y_t = -(-t0).exp() * (3.0 * x).cos();
        let y_xx = -9.0 * (-t0).exp() * (3.0 * x).cos();
        let v_t = 0.2 * t0.cos() * (2.0 * x).cos();
        (y_t - y_xx + (0.5 + 0.1 * x) * v_t) / ((1.0 + t0) * (1.0 + 0.6 * x))
    });
    ok(grid::sobolev_norm(&g, &q.sub(&exact), 0, NormRegion::Omega))
}

fn guard_fires_exactly(twin: &Twin, which: Nondegeneracy, label: &str) -> Result<(), String> {
    let min = ok(nondegeneracy_field(&twin.obs.reference, &twin.grid, &X0, which))?.min();
    ensure!(twin.reconstruct(min * 0.999).is_ok(), "{label}: guard fired below its threshold");
    match twin.reconstruct(min * 1.001) {
        Ok(_) => Err(format!("{label}: guard silent above its threshold")),
        Err(e) => {
            let msg = e.to_string();
            ensure!(msg.contains(label), "{label}: wrong guard '{msg}'");
            Ok(())
        }
    }
}

fn densities(damping: &Twin) -> Outcome {
    let errs = [17, 33, 65].iter().map(|&n| quotient_error(n)).collect::<Result<Vec<_>, _>>()?;
    let qo = orders(&errs);
    ensure!(qo.iter().all(|&o| o >= 1.8), "quotient orders {qo:?}");

    let twin = Twin::run(Problem::Densities, |g, c| {
        c.rho1 = Preset::PolyBump { base: 0.5, amplitude: 0.05 }.build(g).expect("preset");
        c.rho2 = Preset::SinPoly { base: 0.5, amplitude: 0.05 }.build(g).expect("preset");
    })?;
    let r = ok(twin.reconstruct(1e-3))?;
    let p1 = r.error("p", 1).ok_or("no p error")?.relative;
    let q0 = r.error("q", 0).ok_or("no q error")?.relative;
    // golden values 6.4e-3 and 2.2e-4 recorded on this grid
    ensure!(p1 <= 5e-2 && q0 <= 5e-2, "p H1 {p1:e}, q L2 {q0:e}");

    guard_fires_exactly(damping, Nondegeneracy::DivVelocity, "min |div u_t(t0)|")?;
    guard_fires_exactly(&twin, Nondegeneracy::RadialGradient, "min |grad theta(t0).(x-x0)|")?;
    Ok(format!(
        "quotient orders {:.3}/{:.3}; p H1 {p1:.3e}, q L2 {q0:.3e} (<= 5e-2); both guards switch at their minima",
        qo[0], qo[1]
    ))
}

// 8. Hölder ladder.

fn holder(twin: &Twin) -> Outcome {
    let settings = ReconstructionSettings::default();
    let levels = [1e-6, 1e-5, 1e-4, 1e-3, 1e-2];
    let points = ok(noise_ladder(&twin.ctx(&settings), &twin.obs, &twin.truth, &levels, 11))?;
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.d_obs, p.e_err)).collect();
    ensure!(
        pairs.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1),
        "ladder not monotone: {pairs:?}"
    );
    let fit = ok(fit_holder(&pairs))?;
    ensure!(fit.slope > 0.0 && fit.slope <= 1.0, "slope {}", fit.slope);

    let kappa = 0.37;
    let synthetic: Vec<(f64, f64)> = [1e-3, 1e-1, 1e1, 1e3, 1e5].iter().map(|&d| (d, 2.5 * f64::powf(d, kappa))).collect();
    let exact = ok(fit_holder(&synthetic))?;
    ensure!((exact.slope - kappa).abs() <= 1e-12, "exact power slope {}", exact.slope);
    Ok(format!(
        "5 monotone pairs, fitted slope {:.7}; exact power {kappa} recovered to {:.1e}",
        fit.slope,
        (exact.slope - kappa).abs()
    ))
}

// 9. Determinism and first-order estimates.

fn determinism_and_first_order(st: &Setup) -> Outcome {
    let cutoffs = build_cutoffs(&st.grid, st.weights.eps_t).map_err(|e| e.to_string())?;
    let again = make_test_ensemble(&st.grid, &cutoffs, 8, 2024);
    ensure!(again == st.members, "ensemble differs for the same seed");

    let dirs = [tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?];
    let mut runs = Vec::new();
    for dir in &dirs {
        let out = dir.path().to_str().ok_or("path")?;
        let code = biotlab::cli::run(["biotlab", "verify", "--estimate", "BIOT_MAIN,FIRST_ORDER_H1", "--out", out]);
        ensure!(code == 0, "verify exit code {code}");
        let code = biotlab::cli::run(["biotlab", "invert", "--noise", "1e-6,1e-4,1e-2", "--seed", "5", "--out", out]);
        ensure!(code == 0, "invert exit code {code}");
        let mut files: Vec<(String, Vec<u8>)> = Vec::new();
        for entry in fs::read_dir(dir.path()).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            files.push((name, fs::read(&path).map_err(|e| e.to_string())?));
        }
        files.sort();
        runs.push(files);
    }
    ensure!(runs[0].len() >= 8, "too few outputs: {}", runs[0].len());
    ensure!(runs[0] == runs[1], "outputs differ between identical runs");

    for id in [EstimateId::FirstOrderL2, EstimateId::FirstOrderH1] {
        st.bounded(id, &st.members)?;
    }
    let k0 = st.grid.t0_index();
    let f = centered_member(&st.grid, &cutoffs).y.level_field(&st.grid, k0);
    let x0 = &st.weights.x0;
    let rotation = FirstOrderOperator {
        transport: VectorField::from_components(vec![
            st.grid.tabulate(|p| -(p[1] - x0[1])),
            st.grid.tabulate(|p| p[0] - x0[0]),
        ]),
        zeroth: ScalarField::zeros(&st.grid),
    };
    match evaluate_first_order(&st.grid, &rotation, &[f], &st.weights, &Sweep::default(), false, 1e-6) {
        Ok(_) => return Err("rotational transport field accepted".into()),
        Err(e) => ensure!(e.to_string().contains("transversality"), "unexpected error {e}"),
    }
    Ok(format!(
        "{} output files byte-identical across runs; FIRST_ORDER_L2/H1 bounded; rotational field rejected",
        runs[0].len()
    ))
}

fn main() {
    let st = Setup::new();
    let damping = damping_twin();
    let with_twin = |f: fn(&Twin) -> Outcome| match &damping {
        Ok(t) => f(t),
        Err(e) => Err(format!("twin synthesis failed: {e}")),
    };
    let criteria: Vec<Criterion> = vec![
        ("MMS convergence", Box::new(mms_convergence)),
        ("weight validation", Box::new(weight_validation)),
        ("Gronwall lemma", Box::new(gronwall)),
        ("time-integral and trace", Box::new(|| time_integral_and_trace(&st))),
        ("Carleman s-boundedness", Box::new(|| carleman(&st))),
        ("damping reconstruction", Box::new(move || with_twin(lambda_star))),
        ("density reconstruction", Box::new(move || with_twin(densities))),
        ("Holder experiment", Box::new(move || with_twin(holder))),
        ("determinism and first order", Box::new(|| determinism_and_first_order(&st))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail}) [{secs:.1} s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({detail}) [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
