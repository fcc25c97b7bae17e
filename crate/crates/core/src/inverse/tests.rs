use std::sync::OnceLock;

use super::*;
use crate::coeffs::{nondegeneracy_field, Preset};
use crate::grid::GridSpec;

fn line(nodes: usize) -> Grid {
    Grid::new(&GridSpec {
        lower: vec![0.0],
        upper: vec![1.0],
        nodes: vec![nodes],
        dt: 0.002,
        t_final: 6.0,
        t0: 3.0,
        omega_width: 4,
        omega_prime_width: 2,
    })
    .unwrap()
}

fn bounds() -> CoefficientBounds {
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

fn base(grid: &Grid) -> CoefficientSet {
    CoefficientSet::constant(grid, 1.0, 1.0, 1.0, 0.5, 0.5)
}

const X0: [f64; 1] = [-1.0];

fn drive() -> BoundaryDrive {
    BoundaryDrive {
        displacement: 1.0,
        temperature: 1.0,
    }
}

fn damping_twin(grid: &Grid, amplitude: f64) -> (CoefficientSet, CoefficientSet) {
    let c = base(grid);
    let mut p = c.clone();
    p.lambda_star = Preset::PolyBump { base: 1.0, amplitude: -amplitude }.build(grid).unwrap();
    (c, p)
}

fn density_twin(grid: &Grid) -> (CoefficientSet, CoefficientSet) {
    let c = base(grid);
    let mut p = c.clone();
    p.rho1 = Preset::PolyBump { base: 0.5, amplitude: 0.05 }.build(grid).unwrap();
    p.rho2 = Preset::SinPoly { base: 0.5, amplitude: 0.05 }.build(grid).unwrap();
    (c, p)
}

fn scenario(problem: Problem) -> TwinScenario {
    TwinScenario::new(problem, drive(), bounds(), X0.to_vec())
}

struct Twin {
    grid: Grid,
    coeffs: CoefficientSet,
    obs: ObservationSet,
    truth: GroundTruth,
}

impl Twin {
    fn run(grid: Grid, pair: (CoefficientSet, CoefficientSet), problem: Problem) -> Twin {
        let (obs, truth) = synth_twin_data(&grid, &pair.0, &pair.1, &scenario(problem)).unwrap();
        Twin {
            grid,
            coeffs: pair.0,
            obs,
            truth,
        }
    }

    fn reconstruct(&self, settings: &ReconstructionSettings) -> Result<ReconstructionReport> {
        let ctx = InverseContext {
            grid: &self.grid,
            coeffs: &self.coeffs,
            x0: &X0,
            settings,
        };
        reconstruct(&ctx, &self.obs, Some(&self.truth))
    }
}

fn damping(amplitude_tenths: usize) -> &'static Twin {
    static CELLS: [OnceLock<Twin>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
    CELLS[amplitude_tenths].get_or_init(|| {
        let g = line(129);
        let pair = damping_twin(&g, 0.05 * amplitude_tenths as f64);
        Twin::run(g, pair, Problem::LambdaStar)
    })
}

fn densities() -> &'static Twin {
    static CELL: OnceLock<Twin> = OnceLock::new();
    CELL.get_or_init(|| {
        let g = line(129);
        let pair = density_twin(&g);
        Twin::run(g, pair, Problem::Densities)
    })
}

#[test]
fn zero_perturbation_gives_zero() {
    let twin = damping(0);
    assert!(twin.obs.collar.iter().all(|c| c.max_abs() == 0.0));
    assert!(twin.obs.window.u.iter().all(|u| u.max_abs() == 0.0));
    assert_eq!(twin.obs.observation_norm(&twin.grid).unwrap(), 0.0);
    let r = twin.reconstruct(&ReconstructionSettings::default()).unwrap();
    assert_eq!(r.field("f").unwrap().max_abs(), 0.0);
}

#[test]
fn zero_density_perturbation_gives_zero() {
    let g = line(129);
    let c = base(&g);
    let (obs, truth) = synth_twin_data(&g, &c, &c, &scenario(Problem::Densities)).unwrap();
    let settings = ReconstructionSettings::default();
    let ctx = InverseContext {
        grid: &g,
        coeffs: &c,
        x0: &X0,
        settings: &settings,
    };
    let r = reconstruct_densities(&ctx, &obs, Some(&truth)).unwrap();
    assert_eq!(r.field("p").unwrap().max_abs(), 0.0);
    assert_eq!(r.field("q").unwrap().max_abs(), 0.0);
    assert_eq!(r.diagnostic("tikhonov weight"), Some(0.0));
}

#[test]
fn damping_twin_recovers_bump() {
    let twin = damping(2);
    assert!(twin.obs.observation_norm(&twin.grid).unwrap() > 0.0);
    let r = twin.reconstruct(&ReconstructionSettings::default()).unwrap();
    let l2 = r.error("f", 0).unwrap().relative;
    // golden value 3.66e-4 on this grid
    assert!(l2 <= 1e-3, "relative L2 error {l2:e}");
    assert!(r.error("f", 1).unwrap().relative <= 2e-3);
    assert!(r.errors.iter().all(|e| e.absolute >= 0.0));
}

#[test]
fn damping_reconstruction_is_linear() {
    let small = damping(1).reconstruct(&ReconstructionSettings::default()).unwrap();
    let large = damping(2).reconstruct(&ReconstructionSettings::default()).unwrap();
    let (a, b) = (small.field("f").unwrap(), large.field("f").unwrap());
    let dev = b.sub(&a.scale(2.0)).max_abs() / b.max_abs();
    assert!(dev < 0.1, "deviation {dev}");
}

#[test]
fn density_twin_recovers_pair() {
    let twin = densities();
    let r = twin.reconstruct(&ReconstructionSettings::default()).unwrap();
    let p1 = r.error("p", 1).unwrap().relative;
    let q0 = r.error("q", 0).unwrap().relative;
    // golden values 6.4e-3 and 2.2e-4 on this grid
    assert!(p1 <= 5e-2, "p relative H1 error {p1:e}");
    assert!(q0 <= 5e-2, "q relative L2 error {q0:e}");
    assert!(r.stability_error().unwrap() > 0.0);
}

#[test]
fn noise_has_requested_relative_size() {
    let twin = damping(2);
    let noisy = twin.obs.with_noise(NoiseSpec { level: 1e-3, seed: 7 });
    let rel = |a: &[f64], b: &[f64]| {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    };
    let collar = rel(noisy.collar[0].values(), twin.obs.collar[0].values());
    assert!((collar / 1e-3 - 1.0).abs() < 0.05, "{collar}");
    let theta_noisy: Vec<f64> = noisy.window.theta.iter().flat_map(|f| f.values().to_vec()).collect();
    let theta_clean: Vec<f64> = twin.obs.window.theta.iter().flat_map(|f| f.values().to_vec()).collect();
    let theta = rel(&theta_noisy, &theta_clean);
    assert!((theta / 1e-3 - 1.0).abs() < 0.1, "{theta}");
    // outside the collar the restricted data stays zero
    let mask = &twin.obs.collar_mask;
    assert!(noisy.collar[0]
        .values()
        .iter()
        .enumerate()
        .all(|(i, v)| mask[i % mask.len()] || *v == 0.0));
    let again = twin.obs.with_noise(NoiseSpec { level: 1e-3, seed: 7 });
    assert_eq!(again.collar[0].values(), noisy.collar[0].values());
}

#[test]
fn division_guard_fires_at_threshold() {
    let twin = damping(2);
    let min = nondegeneracy_field(&twin.obs.reference, &twin.grid, &X0, Nondegeneracy::DivVelocity)
        .unwrap()
        .min();
    let below = ReconstructionSettings {
        eps_lb: min * 0.999,
        ..Default::default()
    };
    assert!(twin.reconstruct(&below).is_ok());
    let above = ReconstructionSettings {
        eps_lb: min * 1.001,
        ..Default::default()
    };
    let err = twin.reconstruct(&above).unwrap_err().to_string();
    assert!(err.contains("min |div u_t(t0)|"), "{err}");
}

#[test]
fn radial_guard_fires_at_threshold() {
    let twin = densities();
    let field = |which| nondegeneracy_field(&twin.obs.reference, &twin.grid, &X0, which).unwrap().min();
    let radial = field(Nondegeneracy::RadialGradient);
    let div = field(Nondegeneracy::DivVelocity);
    assert!(radial < div, "test assumes the radial quantity is the smaller one");
    let at = |eps: f64| ReconstructionSettings {
        eps_lb: eps,
        ..Default::default()
    };
    assert!(twin.reconstruct(&at(radial * 0.999)).is_ok());
    let err = twin.reconstruct(&at(radial * 1.001)).unwrap_err().to_string();
    assert!(err.contains("min |grad theta(t0).(x-x0)|"), "{err}");
}

#[test]
fn synthesis_rejects_degenerate_data() {
    let g = line(33).with_time_axis(0.002, 1.0, 0.5).unwrap();
    let (c, p) = damping_twin(&g, 0.1);
    let mut s = scenario(Problem::LambdaStar);
    s.bounds.eps_lb = 10.0;
    let err = synth_twin_data(&g, &c, &p, &s).expect_err("guard must fire").to_string();
    assert!(err.contains("non-degeneracy"), "{err}");
}

#[test]
fn synthesis_rejects_mixed_perturbation() {
    let g = line(33);
    let (c, mut p) = damping_twin(&g, 0.1);
    p.rho2 = CoefficientField::constant(&g, 0.6);
    let err = synth_twin_data(&g, &c, &p, &scenario(Problem::LambdaStar)).unwrap_err().to_string();
    assert!(err.contains("twin perturbation"), "{err}");
}

#[test]
fn synthesis_rejects_trace_violation() {
    let g = line(33);
    let c = base(&g);
    let mut p = c.clone();
    p.lambda_star = CoefficientField::constant(&g, 0.9);
    let err = synth_twin_data(&g, &c, &p, &scenario(Problem::LambdaStar)).unwrap_err().to_string();
    assert!(err.contains("trace lambda_star"), "{err}");
}

#[test]
fn transport_homogeneous_and_manufactured() {
    let g = line(65);
    let theta = g.tabulate(|x| x[0] + 0.2 * x[0] * x[0]);
    let settings = ReconstructionSettings::default();
    let zero = solve_transport(&g, &theta, &ScalarField::zeros(&g), &settings).unwrap();
    assert_eq!(zero.p.max_abs(), 0.0);

    // p = x²(1-x)², θ' = 1 + 0.4x, θ'' = 0.4: F = p'θ' + pθ''
    let errs: Vec<f64> = [33, 65, 129]
        .iter()
        .map(|&n| {
            let g = line(n);
            let theta = g.tabulate(|x| x[0] + 0.2 * x[0] * x[0]);
            let p = g.tabulate(|x| (x[0] * (1.0 - x[0])).powi(2));
            let f = g.tabulate(|x| {
                let x = x[0];
                let p = (x * (1.0 - x)).powi(2);
                let dp = 2.0 * x * (1.0 - x) * (1.0 - 2.0 * x);
                dp * (1.0 + 0.4 * x) + 0.4 * p
            });
            let sol = solve_transport(&g, &theta, &f, &settings).unwrap();
            grid::sobolev_norm(&g, &sol.p.sub(&p), 0, NormRegion::Omega).unwrap()
        })
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order > 1.8, "{errs:?}");
    }
}

/// Analytic fields on `[0,1]` around `t0 = 0.5`:
/// `ũ = (t + t²/2)(x + 0.3x²)`, `V = 0.1 sin(t) sin(2x)`, `y = e^{-t} cos(3x)`,
/// `ϱ2 = 0.5 + 0.1x`.
fn quotient_error(n: usize) -> f64 {
    let g = Grid::new(&GridSpec {
        lower: vec![0.0],
        upper: vec![1.0],
        nodes: vec![n],
        dt: 1e-3,
        t_final: 1.0,
        t0: 0.5,
        omega_width: 4,
        omega_prime_width: 2,
    })
    .unwrap();
    let hw = 4;
    let t0 = g.t0();
    let times: Vec<f64> = (0..=2 * hw).map(|k| t0 + (k as f64 - hw as f64) * g.dt()).collect();
    let vec1 = |f: &dyn Fn(f64, f64) -> f64, t: f64| VectorField::from_components(vec![g.tabulate(|x| f(x[0], t))]);
    let reference = TimeWindow::new(
        &g,
        g.t0_index(),
        times.iter().map(|&t| vec1(&|x, t| (t + 0.5 * t * t) * (x + 0.3 * x * x), t)).collect(),
        times.iter().map(|_| ScalarField::zeros(&g)).collect(),
    )
    .unwrap();
    let window = TimeWindow::new(
        &g,
        g.t0_index(),
        times.iter().map(|&t| vec1(&|x, t| 0.1 * t.sin() * (2.0 * x).sin(), t)).collect(),
        times.iter().map(|&t| g.tabulate(|x| (-t).exp() * (3.0 * x[0]).cos())).collect(),
    )
    .unwrap();
    let rho2 = g.tabulate(|x| 0.5 + 0.1 * x[0]);
    let div_ref = reference.div_derivative(1).unwrap();
    let q = q_quotient(&g, &rho2, &window, &div_ref).unwrap();
    let exact = g.tabulate(|x| {
        let x = x[0];
        let y_t = -(-t0).exp() * (3.0 * x).cos();
        let y_xx = -9.0 * (-t0).exp() * (3.0 * x).cos();
        let v_t = 0.2 * t0.cos() * (2.0 * x).cos();
        let g = (1.0 + t0) * (1.0 + 0.6 * x);
        (y_t - y_xx + (0.5 + 0.1 * x) * v_t) / g
    });
    grid::sobolev_norm(&g, &q.sub(&exact), 0, NormRegion::Omega).unwrap()
}

#[test]
fn quotient_converges_at_second_order() {
    let errs: Vec<f64> = [17, 33, 65].iter().map(|&n| quotient_error(n)).collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 1.8, "{errs:?}");
    }
}

#[test]
fn ladder_is_monotone_with_holder_slope() {
    let twin = damping(2);
    let settings = ReconstructionSettings::default();
    let ctx = InverseContext {
        grid: &twin.grid,
        coeffs: &twin.coeffs,
        x0: &X0,
        settings: &settings,
    };
    let points = noise_ladder(&ctx, &twin.obs, &twin.truth, &[1e-6, 1e-5, 1e-4, 1e-3, 1e-2], 11).unwrap();
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.d_obs, p.e_err)).collect();
    println!("{points:?}");
    assert!(pairs.windows(2).all(|w| w[1].0 >= w[0].0 && w[1].1 >= w[0].1), "{pairs:?}");
    let fit = fit_holder(&pairs).unwrap();
    println!("{fit:?}");
    assert!(fit.slope > 0.0 && fit.slope <= 1.0, "{fit:?}");
}

#[test]
fn problem_names_round_trip() {
    for p in [Problem::LambdaStar, Problem::Densities] {
        assert_eq!(p.name().parse::<Problem>().unwrap(), p);
    }
    assert!("rho".parse::<Problem>().is_err());
}
