use super::*;
use crate::grid::GridSpec;
use crate::weights::build_cutoffs;

fn grid(n: usize, levels: usize) -> Grid {
    Grid::new(&GridSpec {
        lower: vec![0.0, 0.0],
        upper: vec![1.0, 1.0],
        nodes: vec![n, n],
        dt: 6.0 / (levels - 1) as f64,
        t_final: 6.0,
        t0: 3.0,
        omega_width: 4,
        omega_prime_width: 2,
    })
    .unwrap()
}

fn params() -> WeightParams {
    WeightParams {
        x0: vec![-0.2, -0.2],
        beta: 0.4,
        m_w: 1.0,
        delta_w: 0.4,
        gamma: 1.0,
        s: 1.0,
        eps_t: 0.1,
    }
}

struct Setup {
    grid: Grid,
    coeffs: CoefficientSet,
    params: WeightParams,
    settings: EstimateSettings,
    cutoffs: crate::weights::Cutoffs,
}

impl Setup {
    fn new(n: usize, levels: usize) -> Setup {
        let grid = grid(n, levels);
        let coeffs = CoefficientSet::constant(&grid, 1.0, 1.0, 1.0, 0.5, 0.5);
        let cutoffs = build_cutoffs(&grid, 0.1).unwrap();
        Setup {
            grid,
            coeffs,
            params: params(),
            settings: EstimateSettings::default(),
            cutoffs,
        }
    }

    fn ctx(&self) -> EstimateContext<'_> {
        EstimateContext {
            grid: &self.grid,
            coeffs: &self.coeffs,
            weights: &self.params,
            settings: &self.settings,
        }
    }
}

fn short_sweep() -> Sweep {
    Sweep {
        gammas: vec![1.0, 2.0],
        s_values: vec![1.0, 4.0],
    }
}

#[test]
fn ensemble_vanishes_on_boundary_and_time_ends() {
    let st = Setup::new(17, 33);
    let ens = make_test_ensemble(&st.grid, &st.cutoffs, 3, 7);
    let n = st.grid.n_nodes();
    let last = st.grid.n_levels() - 1;
    for m in &ens {
        for f in m.u.iter().chain([&m.y]) {
            assert!(f.max_abs() > 0.0);
            for (i, v) in f.values().iter().enumerate() {
                let (k, node) = (i / n, i % n);
                if k == 0 || k == last || st.grid.is_boundary(node) {
                    assert_eq!(*v, 0.0);
                }
            }
        }
    }
}

#[test]
fn ensemble_is_seed_repeatable() {
    let st = Setup::new(17, 33);
    let a = make_test_ensemble(&st.grid, &st.cutoffs, 4, 11);
    let b = make_test_ensemble(&st.grid, &st.cutoffs, 4, 11);
    let c = make_test_ensemble(&st.grid, &st.cutoffs, 4, 12);
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn centred_bump_support_is_interior() {
    let st = Setup::new(33, 65);
    let m = centered_member(&st.grid, &st.cutoffs);
    let n = st.grid.n_nodes();
    let mut touched = 0;
    for (i, v) in m.y.values().iter().enumerate() {
        if *v != 0.0 {
            touched += 1;
            let (k, node) = (i / n, i % n);
            assert!(k > 1 && k + 2 < st.grid.n_levels());
            assert!(st.grid.boundary_distance(node) >= 2);
        }
    }
    assert!(touched > 0);
}

#[test]
fn zero_field_is_degenerate() {
    let st = Setup::new(17, 33);
    let zero = TestFields::zeros(&st.grid);
    for id in [EstimateId::Parabolic, EstimateId::BiotMain, EstimateId::TraceT0, EstimateId::FirstOrderH1] {
        let rep = evaluate_estimate(id, std::slice::from_ref(&zero), &st.ctx(), &short_sweep()).unwrap();
        assert!(rep.rows.iter().all(|r| r.degenerate && r.ratio().is_none()), "{id}");
        assert_eq!(rep.verdict(), Verdict::Undetermined);
    }
}

#[test]
fn homogeneity_and_term_accounting() {
    let st = Setup::new(17, 33);
    let ens = make_test_ensemble(&st.grid, &st.cutoffs, 2, 3);
    for id in EstimateId::ALL {
        if id == EstimateId::SubdomainPoincare {
            continue;
        }
        let base = evaluate_estimate(id, &ens, &st.ctx(), &short_sweep()).unwrap();
        for c in [1e3, 1e-3] {
            let scaled: Vec<TestFields> = ens.iter().map(|m| m.scale(c)).collect();
            let rep = evaluate_estimate(id, &scaled, &st.ctx(), &short_sweep()).unwrap();
            for (a, b) in base.rows.iter().zip(&rep.rows) {
                // relative change of the ratio, measured in log space so that
                // underflowing ratios still count
                let (ra, rb) = (a.ln_ratio().unwrap(), b.ln_ratio().unwrap());
                assert!((ra - rb).abs() < 1e-10, "{id}: ln {ra} vs {rb}");
            }
        }
        for r in &base.rows {
            assert_eq!(r.ln_lhs.to_bits(), ln_total(&r.lhs_terms).to_bits());
            let rhs = ln_add(ln_total(&r.rhs_terms), ln_total(&r.remainder_terms));
            assert_eq!(r.ln_rhs.to_bits(), rhs.to_bits());
        }
    }
}

fn term(terms: &[TermValue], name: &str) -> f64 {
    terms.iter().find(|t| t.name == name).unwrap_or_else(|| panic!("no term {name}")).ln_value
}

#[test]
fn coupled_estimate_is_block_diagonal_without_coupling() {
    let mut st = Setup::new(17, 33);
    st.coeffs = CoefficientSet::constant(&st.grid, 1.0, 1.0, 1.0, 0.0, 0.0);
    let ens = make_test_ensemble(&st.grid, &st.cutoffs, 2, 5);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-10 * a.abs().max(1.0);

    // vector part alone against the damped wave on w = div v
    let vec_only: Vec<TestFields> = ens.iter().map(TestFields::vector_only).collect();
    let as_wave: Vec<TestFields> = vec_only
        .iter()
        .map(|m| {
            let g = &st.grid;
            let mut div = grid::ops::st_partial(g, &m.u[0], 0);
            div = div.add(&grid::ops::st_partial(g, &m.u[1], 1));
            TestFields { u: m.u.clone(), y: div }
        })
        .collect();
    let biot = evaluate_estimate(EstimateId::BiotMain, &vec_only, &st.ctx(), &short_sweep()).unwrap();
    let wave = evaluate_estimate(EstimateId::DampedWave, &as_wave, &st.ctx(), &short_sweep()).unwrap();
    for (b, w) in biot.rows.iter().zip(&wave.rows) {
        for (bn, wn) in [
            ("sigma^4 |div v|^2", "sigma^4 |w|^2"),
            ("sigma^3 |div v_t|^2", "sigma^3 |w_t|^2"),
            ("sigma^2 |grad div v|^2", "sigma^2 |grad w|^2"),
            ("sigma |grad div v_t|^2", "sigma |grad w_t|^2"),
        ] {
            assert!(close(term(&b.lhs_terms, bn), term(&w.lhs_terms, wn)), "{bn}");
        }
        assert_eq!(b.remainder_terms, w.remainder_terms);
        assert_eq!(term(&b.rhs_terms, "gamma^-1 sigma |h|^2"), f64::NEG_INFINITY);
        for name in ["|lap y|^2", "sigma^2 |grad y|^2", "sigma^4 |y|^2"] {
            assert_eq!(term(&b.lhs_terms, name), f64::NEG_INFINITY);
        }
    }

    // scalar part alone against the parabolic estimate of order 1
    let scal_only: Vec<TestFields> = ens.iter().map(TestFields::scalar_only).collect();
    let biot = evaluate_estimate(EstimateId::BiotMain, &scal_only, &st.ctx(), &short_sweep()).unwrap();
    let par = evaluate_estimate(EstimateId::Parabolic, &scal_only, &st.ctx(), &short_sweep()).unwrap();
    for (b, p) in biot.rows.iter().zip(&par.rows) {
        let lg = b.gamma.ln();
        assert!(close(term(&b.lhs_terms, "sigma^2 |grad y|^2") + lg, term(&p.lhs_terms, "gamma sigma^(k+1) |grad y|^2")));
        assert!(close(term(&b.lhs_terms, "sigma^4 |y|^2") + lg, term(&p.lhs_terms, "gamma sigma^(k+3) |y|^2")));
        assert!(close(b.ln_rhs + lg, p.ln_rhs));
        assert_eq!(term(&b.rhs_terms, "|f|^2"), f64::NEG_INFINITY);
        assert!(b.remainder_terms.iter().all(|t| t.ln_value == f64::NEG_INFINITY));
    }
}

#[test]
fn parabolic_single_bump_bounded() {
    let mut st = Setup::new(33, 65);
    st.settings.parabolic_order = 0;
    let m = centered_member(&st.grid, &st.cutoffs);
    let rep = evaluate_estimate(EstimateId::Parabolic, &[m], &st.ctx(), &Sweep::default()).unwrap();
    assert_eq!(rep.verdict(), Verdict::Bounded, "{:?}", rep.stats);
}

#[test]
fn gronwall_rows_respect_bound() {
    let mut st = Setup::new(9, 33);
    st.settings.gronwall_delta = 0.0;
    let ens = make_test_ensemble(&st.grid, &st.cutoffs, 2, 1);
    let rep = evaluate_estimate(EstimateId::Gronwall, &ens, &st.ctx(), &short_sweep()).unwrap();
    for r in &rep.rows {
        assert!((r.ratio().unwrap() - 1.0).abs() < 1e-12);
    }
    assert_eq!(rep.diagnostic("bound"), Some(1.0));
    st.settings.gronwall_delta = 0.2;
    let rep = evaluate_estimate(EstimateId::Gronwall, &ens, &st.ctx(), &Sweep::default()).unwrap();
    let bound = rep.diagnostic("bound").unwrap();
    assert!(rep.rows.iter().all(|r| r.ratio().unwrap() <= bound));
    assert_eq!(rep.verdict(), Verdict::Bounded);
}

#[test]
fn trace_zero_and_scaling() {
    let st = Setup::new(17, 33);
    let w = tabulate(&st.params.with_gamma_s(1.0, 2.0), &st.grid);
    let zero = evaluate_trace_t0(&st.grid, &SpaceTimeField::zeros(&st.grid), &w).unwrap();
    assert_eq!((zero.lhs, zero.rhs), (0.0, 0.0));
    assert_eq!(zero.ratio(), None);
    let z = centered_member(&st.grid, &st.cutoffs).y;
    let a = evaluate_trace_t0(&st.grid, &z, &w).unwrap().ratio().unwrap();
    let b = evaluate_trace_t0(&st.grid, &z.scale(37.0), &w).unwrap().ratio().unwrap();
    assert!(a > 0.0 && ((a - b) / a).abs() < 1e-12);
}

#[test]
fn first_order_radial_and_rotational() {
    let st = Setup::new(33, 65);
    let f = centered_member(&st.grid, &st.cutoffs).y.level_field(&st.grid, st.grid.t0_index());
    let op = FirstOrderOperator::radial(&st.grid, &st.params.x0);
    for h1 in [false, true] {
        let rep = evaluate_first_order(&st.grid, &op, std::slice::from_ref(&f), &st.params, &Sweep::default(), h1, 1e-6).unwrap();
        assert_eq!(rep.verdict(), Verdict::Bounded);
        assert!(rep.diagnostic("c0").unwrap() > 0.07);
    }
    let zero = evaluate_first_order(&st.grid, &op, &[ScalarField::zeros(&st.grid)], &st.params, &short_sweep(), true, 1e-6)
        .unwrap();
    assert!(zero.rows.iter().all(|r| r.degenerate));

    let x0 = &st.params.x0;
    let rot = FirstOrderOperator {
        transport: VectorField::from_components(vec![
            st.grid.tabulate(|p| -(p[1] - x0[1])),
            st.grid.tabulate(|p| p[0] - x0[0]),
        ]),
        zeroth: ScalarField::zeros(&st.grid),
    };
    let err = evaluate_first_order(&st.grid, &rot, &[f], &st.params, &short_sweep(), false, 1e-6).unwrap_err();
    assert!(err.to_string().contains("transversality"), "{err}");
    assert!(err.to_string().contains("at node"));
}

#[test]
fn poincare_on_collar_fields() {
    let st = Setup::new(33, 65);
    let ens = make_collar_ensemble(&st.grid, &st.cutoffs, 3, 2);
    let rep = evaluate_estimate(EstimateId::SubdomainPoincare, &ens, &st.ctx(), &Sweep::default()).unwrap();
    assert_eq!(rep.verdict(), Verdict::Bounded, "{:?}", rep.stats);
    let interior = make_test_ensemble(&st.grid, &st.cutoffs, 1, 2);
    assert!(evaluate_estimate(EstimateId::SubdomainPoincare, &interior, &st.ctx(), &short_sweep()).is_err());
}

#[test]
fn estimate_names_round_trip() {
    for id in EstimateId::ALL {
        assert_eq!(id.to_string().parse::<EstimateId>().unwrap(), id);
        let json = serde_json::to_string(&id).unwrap();
        assert_eq!(json, format!("\"{}\"", id.name()));
    }
    assert_eq!("damped-wave".parse::<EstimateId>().unwrap(), EstimateId::DampedWave);
    assert!("NOPE".parse::<EstimateId>().is_err());
}

#[test]
fn verdict_rule() {
    let mk = |vals: &[f64]| -> Vec<RowStats> {
        vals.iter()
            .enumerate()
            .map(|(i, v)| RowStats {
                gamma: 1.0,
                s: (1 << i) as f64,
                count: 1,
                ln_max: v.ln(),
                ln_median: v.ln(),
            })
            .collect()
    };
    let judge_of = |vals: &[f64]| {
        let rows = mk(vals);
        judge(&rows.iter().collect::<Vec<_>>())
    };
    assert_eq!(judge_of(&[9.0, 9.0, 1.0, 1.04, 1.0]), Verdict::Bounded);
    assert_eq!(judge_of(&[0.1, 0.1, 1.0, 1.06, 1.0]), Verdict::Growing);
    assert_eq!(judge_of(&[1.0, 1.0, 1.0, 0.5, f64::INFINITY]), Verdict::Growing);
}


