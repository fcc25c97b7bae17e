//! Run configuration: a TOML file with one section per subsystem, parsed
//! into [`RunConfig`] and checked into a [`ValidatedRun`].

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::carleman::{EstimateSettings, Sweep};
use crate::coeffs::{check_a1, check_ellipticity, CoefficientBounds, CoefficientSet, CoefficientSpec, Preset};
use crate::error::{Error, Result};
use crate::forward::{BoundaryDrive, DEFAULT_CFL};
use crate::grid::{Grid, GridSpec};
use crate::inverse::{Problem, ReconstructionSettings};
use crate::weights::{build_cutoffs, WeightParams};

/// Configuration shipped with the binary.
pub const DEFAULT_CONFIG: &str = include_str!("../config/default.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Grid of the weighted-estimate verification.
    pub grid: GridSpec,
    pub coefficients: CoefficientSpec,
    pub bounds: CoefficientBounds,
    pub weights: WeightParams,
    #[serde(default)]
    pub sweep: Sweep,
    #[serde(default)]
    pub ensemble: EnsembleSpec,
    #[serde(default)]
    pub estimates: EstimateSettings,
    #[serde(default)]
    pub scenario: ScenarioSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSpec {
    pub members: usize,
    pub seed: u64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        EnsembleSpec { members: 8, seed: 2024 }
    }
}

/// Twin experiment driving `simulate` and `invert`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub grid: GridSpec,
    /// Base coefficients on the scenario grid; the top-level block when absent.
    pub coefficients: Option<CoefficientSpec>,
    pub x0: Vec<f64>,
    pub cfl: f64,
    pub problem: Problem,
    pub drive: BoundaryDrive,
    pub perturbed: PerturbedSpec,
    pub noise_levels: Vec<f64>,
    pub seed: u64,
    /// Times at which `simulate` dumps the state, snapped to time levels.
    pub checkpoints: Vec<f64>,
    pub reconstruction: ReconstructionSpec,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            grid: GridSpec {
                lower: vec![0.0],
                upper: vec![1.0],
                nodes: vec![129],
                dt: 0.002,
                t_final: 6.0,
                t0: 3.0,
                omega_width: 4,
                omega_prime_width: 2,
            },
            coefficients: None,
            x0: vec![-1.0],
            cfl: DEFAULT_CFL,
            problem: Problem::LambdaStar,
            drive: BoundaryDrive {
                displacement: 1.0,
                temperature: 1.0,
            },
            perturbed: PerturbedSpec::default(),
            noise_levels: vec![1e-6, 1e-5, 1e-4, 1e-3, 1e-2],
            seed: 7,
            checkpoints: vec![3.0, 6.0],
            reconstruction: ReconstructionSpec::default(),
        }
    }
}

/// Replacement coefficients of the perturbed twin run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbedSpec {
    pub lambda_star: Preset,
    pub rho1: Preset,
    pub rho2: Preset,
}

impl Default for PerturbedSpec {
    fn default() -> Self {
        PerturbedSpec {
            lambda_star: Preset::PolyBump {
                base: 1.0,
                amplitude: -0.1,
            },
            rho1: Preset::PolyBump {
                base: 0.5,
                amplitude: 0.05,
            },
            rho2: Preset::SinPoly {
                base: 0.5,
                amplitude: 0.05,
            },
        }
    }
}

/// Reconstruction knobs; the non-degeneracy threshold comes from `bounds`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructionSpec {
    pub tikhonov: f64,
    pub boundary_penalty: f64,
}

impl Default for ReconstructionSpec {
    fn default() -> Self {
        let d = ReconstructionSettings::default();
        ReconstructionSpec {
            tikhonov: d.tikhonov,
            boundary_penalty: d.boundary_penalty,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub directory: PathBuf,
    /// Write binary field dumps next to the CSV files.
    pub dumps: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            directory: PathBuf::from("biotlab-out"),
            dumps: true,
        }
    }
}

/// Attaches the config section to an error while keeping its condition.
fn in_section(section: &str, err: Error) -> Error {
    match err {
        Error::Validation { condition, detail } => Error::Validation {
            condition,
            detail: format!("[{section}] {detail}"),
        },
        Error::Numerical(m) => Error::Numerical(m),
        other => Error::Config(format!("[{section}] {other}")),
    }
}

fn positive(section: &str, name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(
            format!("{name} > 0"),
            format!("[{section}] {name} = {v}"),
        ))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads `path`; relative preset file paths are resolved against the
    /// directory of the config file.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config =
            RunConfig::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(dir) = path.parent() {
            config.rebase_files(dir);
        }
        Ok(config)
    }

    pub fn bundled() -> RunConfig {
        RunConfig::parse(DEFAULT_CONFIG).expect("bundled config parses")
    }

    fn rebase_files(&mut self, dir: &Path) {
        let mut presets: Vec<&mut Preset> = Vec::new();
        for spec in std::iter::once(&mut self.coefficients).chain(self.scenario.coefficients.as_mut()) {
            presets.extend([
                &mut spec.mu,
                &mut spec.lambda,
                &mut spec.lambda_star,
                &mut spec.rho1,
                &mut spec.rho2,
            ]);
        }
        let p = &mut self.scenario.perturbed;
        presets.extend([&mut p.lambda_star, &mut p.rho1, &mut p.rho2]);
        for preset in presets {
            if let Preset::File { path } = preset {
                if path.is_relative() {
                    *path = dir.join(&*path);
                }
            }
        }
    }

    /// The configuration with every optional block filled in.
    pub fn effective(&self) -> RunConfig {
        let mut out = self.clone();
        if out.scenario.coefficients.is_none() {
            out.scenario.coefficients = Some(out.coefficients.clone());
        }
        out
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Checks every block and builds the grids and coefficient sets.
    pub fn validate(&self) -> Result<ValidatedRun> {
        let config = self.effective();
        let grid = Grid::new(&config.grid).map_err(|e| in_section("grid", e))?;
        let coeffs = config.coefficients.build(&grid).map_err(|e| in_section("coefficients", e))?;
        coeffs.check(&grid).map_err(|e| in_section("coefficients", e))?;
        config.bounds.validate().map_err(|e| in_section("bounds", e))?;
        check_ellipticity(&coeffs, &config.bounds)
            .into_result("ellipticity")
            .map_err(|e| in_section("coefficients", e))?;
        config
            .weights
            .validate(&grid, config.bounds.r0)
            .map_err(|e| in_section("weights", e))?;
        build_cutoffs(&grid, config.weights.eps_t).map_err(|e| in_section("weights", e))?;
        check_a1(&coeffs, &grid, &config.weights.x0, &config.bounds)
            .and_then(|r| r.into_result("gradient condition"))
            .map_err(|e| in_section("coefficients", e))?;
        config.sweep.validate().map_err(|e| in_section("sweep", e))?;
        if config.ensemble.members == 0 {
            return Err(Error::validation("ensemble size >= 1", "[ensemble] members = 0"));
        }
        positive("estimates", "gronwall_delta", config.estimates.gronwall_delta)?;
        positive("estimates", "transversality", config.estimates.transversality)?;
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
        if !(config.estimates.time_integral_order >= 0.0) {
            return Err(Error::validation(
                "time_integral_order >= 0",
                format!("[estimates] time_integral_order = {}", config.estimates.time_integral_order),
            ));
        }

        let sc = &config.scenario;
        let scenario_grid = Grid::new(&sc.grid).map_err(|e| in_section("scenario.grid", e))?;
        let base_spec = sc.coefficients.as_ref().expect("filled by effective");
        let scenario_coeffs = base_spec
            .build(&scenario_grid)
            .and_then(|c| c.check(&scenario_grid).map(|_| c))
            .map_err(|e| in_section("scenario.coefficients", e))?;
        check_ellipticity(&scenario_coeffs, &config.bounds)
            .into_result("ellipticity")
            .map_err(|e| in_section("scenario.coefficients", e))?;
        check_a1(&scenario_coeffs, &scenario_grid, &sc.x0, &config.bounds)
            .and_then(|r| r.into_result("gradient condition"))
            .map_err(|e| in_section("scenario", e))?;
        positive("scenario", "cfl", sc.cfl)?;
        if !(sc.drive.displacement.is_finite() && sc.drive.temperature.is_finite()) {
            return Err(Error::validation(
                "finite boundary drive",
                format!("[scenario.drive] {:?}", sc.drive),
            ));
        }
        let mut perturbed = scenario_coeffs.clone();
        let build = |p: &Preset| {
            p.build(&scenario_grid)
                .map_err(|e| in_section("scenario.perturbed", e))
        };
        match sc.problem {
            Problem::LambdaStar => perturbed.lambda_star = build(&sc.perturbed.lambda_star)?,
            Problem::Densities => {
                perturbed.rho1 = build(&sc.perturbed.rho1)?;
                perturbed.rho2 = build(&sc.perturbed.rho2)?;
            }
        }
        for &level in &sc.noise_levels {
            positive("scenario", "noise level", level)?;
        }
        if (1..3).contains(&sc.noise_levels.len()) {
            return Err(Error::validation(
                "noise ladder: none or at least 3 levels",
                format!("[scenario] {} noise levels given", sc.noise_levels.len()),
            ));
        }
        for &t in &sc.checkpoints {
            if !(t.is_finite() && (0.0..=scenario_grid.t_final()).contains(&t)) {
                return Err(Error::validation(
                    "checkpoint in [0, T]",
                    format!("[scenario] checkpoint {t} outside [0, {}]", scenario_grid.t_final()),
                ));
            }
        }
        let tikhonov = sc.reconstruction.tikhonov;
        if !(tikhonov.is_finite() && tikhonov >= 0.0) {
            return Err(Error::validation(
                "tikhonov >= 0",
                format!("[scenario.reconstruction] tikhonov = {tikhonov}"),
            ));
        }
        positive(
            "scenario.reconstruction",
            "boundary_penalty",
            sc.reconstruction.boundary_penalty,
        )?;
        let settings = ReconstructionSettings {
            eps_lb: config.bounds.eps_lb,
            tikhonov: sc.reconstruction.tikhonov,
            boundary_penalty: sc.reconstruction.boundary_penalty,
        };
        Ok(ValidatedRun {
            grid,
            coeffs,
            scenario_grid,
            scenario_coeffs,
            perturbed,
            settings,
            config,
        })
    }
}

/// A configuration that passed validation, with its built objects.
#[derive(Clone, Debug)]
pub struct ValidatedRun {
    /// Effective configuration.
    pub config: RunConfig,
    pub grid: Grid,
    pub coeffs: CoefficientSet,
    pub scenario_grid: Grid,
    pub scenario_coeffs: CoefficientSet,
    /// Scenario coefficients with the perturbation of the configured problem.
    pub perturbed: CoefficientSet,
    pub settings: ReconstructionSettings,
}
