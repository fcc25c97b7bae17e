//! Random admissible test fields: smooth bumps with a trigonometric
//! modulation, cut off by `χ(x)η(t)` so that every member vanishes on `Γ`
//! and near `t = 0, T`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{Grid, SpaceTimeField};
use crate::weights::Cutoffs;

/// A displacement-like vector field and a scalar field on `Q`.
#[derive(Clone, Debug, PartialEq)]
pub struct TestFields {
    pub u: Vec<SpaceTimeField>,
    pub y: SpaceTimeField,
}

impl TestFields {
    pub fn scale(&self, c: f64) -> TestFields {
        TestFields {
            u: self.u.iter().map(|f| f.scale(c)).collect(),
            y: self.y.scale(c),
        }
    }

    pub fn zeros(grid: &Grid) -> TestFields {
        TestFields {
            u: (0..grid.dim()).map(|_| SpaceTimeField::zeros(grid)).collect(),
            y: SpaceTimeField::zeros(grid),
        }
    }

    /// Same fields with the vector part replaced by zero.
    pub fn scalar_only(&self) -> TestFields {
        TestFields {
            u: self.u.iter().map(|f| f.scale(0.0)).collect(),
            y: self.y.clone(),
        }
    }

    /// Same fields with the scalar part replaced by zero.
    pub fn vector_only(&self) -> TestFields {
        TestFields {
            u: self.u.clone(),
            y: self.y.scale(0.0),
        }
    }
}

/// Shape parameters of one bump, in coordinates normalized to the unit box.
#[derive(Clone, Debug, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    /// Time centre as a fraction of `T`.
    pub time_center: f64,
    /// Time half-width as a fraction of `T/2`.
    pub time_width: f64,
    pub amplitude: f64,
    pub modulation: f64,
    pub frequency: Vec<f64>,
    pub phase: f64,
}

const BUMP_POWER: i32 = 4;

impl Bump {
    pub fn centered(dim: usize) -> Bump {
        Bump {
            center: vec![0.5; dim],
            radius: 0.35,
            time_center: 0.5,
            time_width: 0.8,
            amplitude: 1.0,
            modulation: 0.0,
            frequency: vec![0.0; dim],
            phase: 0.0,
        }
    }

    fn random(rng: &mut ChaCha8Rng, dim: usize) -> Bump {
        Bump {
            center: (0..dim).map(|_| rng.random_range(0.4..0.6)).collect(),
            radius: rng.random_range(0.25..0.35),
            time_center: rng.random_range(0.48..0.52),
            time_width: rng.random_range(0.7..0.85),
            amplitude: rng.random_range(0.5..1.5) * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            modulation: rng.random_range(0.0..0.5),
            frequency: (0..dim).map(|_| f64::from(rng.random_range(0..3u8))).collect(),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
        }
    }

    /// Value at normalized position `xi` and time `t`.
    pub fn eval(&self, xi: &[f64], t: f64, t_final: f64) -> f64 {
        let r2: f64 = xi
            .iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            / (self.radius * self.radius);
        if r2 >= 1.0 {
            return 0.0;
        }
        let tau = (t - self.time_center * t_final) / (0.5 * self.time_width * t_final);
        if tau.abs() >= 1.0 {
            return 0.0;
        }
        let arg: f64 = xi
            .iter()
            .zip(&self.frequency)
            .map(|(a, k)| std::f64::consts::PI * k * a)
            .sum::<f64>()
            + self.phase;
        let trig = 1.0 + self.modulation * arg.cos();
        self.amplitude * (1.0 - r2).powi(BUMP_POWER) * (1.0 - tau * tau).powi(BUMP_POWER) * trig
    }
}

/// Tabulates a sum of bumps times `χ(x)η(t)`.
pub fn tabulate_bumps(grid: &Grid, cutoffs: &Cutoffs, bumps: &[Bump]) -> SpaceTimeField {
    let n = grid.n_nodes();
    let xis: Vec<Vec<f64>> = (0..n)
        .map(|node| {
            (0..grid.dim())
                .map(|a| (grid.coord(node, a) - grid.lower()[a]) / (grid.upper()[a] - grid.lower()[a]))
                .collect()
        })
        .collect();
    let t_final = grid.t_final();
    let mut values = Vec::with_capacity(n * grid.n_levels());
    for k in 0..grid.n_levels() {
        let t = grid.time(k);
        let eta = cutoffs.eta[k];
        for (node, xi) in xis.iter().enumerate() {
            let cut = eta * cutoffs.chi.values()[node];
            let v = if cut == 0.0 {
                0.0
            } else {
                cut * bumps.iter().map(|b| b.eval(xi, t, t_final)).sum::<f64>()
            };
            values.push(v);
        }
    }
    SpaceTimeField::from_values(grid, grid.n_levels(), values)
}

/// `n` random members, deterministic per `seed`. Each component carries one
/// or two bumps.
pub fn make_test_ensemble(grid: &Grid, cutoffs: &Cutoffs, n: usize, seed: u64) -> Vec<TestFields> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let draw = |rng: &mut ChaCha8Rng| -> Vec<Bump> {
        let count = rng.random_range(1..=2);
        (0..count).map(|_| Bump::random(rng, d)).collect()
    };
    let specs: Vec<(Vec<Vec<Bump>>, Vec<Bump>)> = (0..n)
        .map(|_| {
            let u = (0..d).map(|_| draw(&mut rng)).collect();
            let y = draw(&mut rng);
            (u, y)
        })
        .collect();
    specs
        .iter()
        .map(|(u, y)| TestFields {
            u: u.iter().map(|b| tabulate_bumps(grid, cutoffs, b)).collect(),
            y: tabulate_bumps(grid, cutoffs, y),
        })
        .collect()
}

/// Single centred bump in every component.
pub fn centered_member(grid: &Grid, cutoffs: &Cutoffs) -> TestFields {
    let b = [Bump::centered(grid.dim())];
    let f = tabulate_bumps(grid, cutoffs, &b);
    TestFields {
        u: vec![f.clone(); grid.dim()],
        y: f,
    }
}

/// Fields supported in the collar `ω`: `χ χ₁ η` times a random
/// low-order trigonometric polynomial. They vanish on `Γ` and on the inner
/// boundary of `ω`.
pub fn make_collar_ensemble(grid: &Grid, cutoffs: &Cutoffs, n: usize, seed: u64) -> Vec<TestFields> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    (0..n)
        .map(|_| {
            let comp = |rng: &mut ChaCha8Rng| {
                let freq: Vec<f64> = (0..d).map(|_| f64::from(rng.random_range(1..=3u8))).collect();
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                let omega = rng.random_range(0.5..2.0);
                let amp = rng.random_range(0.5..1.5);
                SpaceTimeField::tabulate(grid, |x, t| {
                    let arg: f64 = x
                        .iter()
                        .zip(&freq)
                        .zip(grid.lower().iter().zip(grid.upper()))
                        .map(|((xa, k), (lo, hi))| std::f64::consts::PI * k * (xa - lo) / (hi - lo))
                        .sum();
                    amp * (1.5 + (arg + phase).cos()) * (1.0 + 0.5 * (omega * t).sin())
                })
            };
            let cut = |f: SpaceTimeField| {
                let n_nodes = grid.n_nodes();
                let mut v = f.values().to_vec();
                for (i, x) in v.iter_mut().enumerate() {
                    let node = i % n_nodes;
                    *x *= cutoffs.eta[i / n_nodes] * cutoffs.chi.values()[node] * cutoffs.chi1.values()[node];
                }
                f.with_values(v)
            };
            let u = (0..d).map(|_| cut(comp(&mut rng))).collect();
            let y = cut(comp(&mut rng));
            TestFields { u, y }
        })
        .collect()
}
