//! Command-line front end: `simulate`, `verify`, `invert` and `report`.
//!
//! Every pipeline command writes `effective_config.toml` and records its
//! outputs in `manifest.json` inside the output directory.

mod manifest;
mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::carleman::{
    evaluate_estimate, make_collar_ensemble, make_test_ensemble, CarlemanReport, EstimateContext, EstimateId,
    Sweep,
};
use crate::config::{RunConfig, ValidatedRun};
use crate::error::{Error, Result};
use crate::forward::{energy, simulate, FieldState};
use crate::grid::io::{dump_field, field_csv, fmt_f64};
use crate::grid::{self, Grid, ScalarField};
use crate::inverse::{
    fit_holder, noise_ladder, reconstruct, synth_twin_data, InverseContext, LadderPoint, TwinScenario,
};
use crate::weights::build_cutoffs;

pub use manifest::{Manifest, RunRecord, MANIFEST_FILE};
pub use report::{summarize, Summary};

/// Environment variable overriding the output directory of the config.
pub const OUT_ENV: &str = "BIOTLAB_OUT";
pub const EFFECTIVE_CONFIG_FILE: &str = "effective_config.toml";

#[derive(Debug, Parser)]
#[command(name = "biotlab", version, about = "Biot system forward solves, weighted-estimate checks and coefficient reconstruction")]
pub struct Cli {
    /// Run configuration (TOML); the bundled default when omitted.
    #[arg(long, short, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides BIOTLAB_OUT and the config.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the scenario's base problem and write energies and checkpoints.
    Simulate,
    /// Evaluate weighted estimates over an ensemble and a (gamma, s) sweep.
    Verify {
        /// Estimate names (comma separated) or "all".
        #[arg(long, value_delimiter = ',', required = true)]
        estimate: Vec<String>,
        /// Sweep lists, e.g. "s=1,2,4,8,16,gamma=1,2".
        #[arg(long)]
        sweep: Option<String>,
        /// Ensemble size and seed, e.g. "8,2024".
        #[arg(long)]
        ensemble: Option<String>,
    },
    /// Run a twin experiment, reconstruct and fit the noise ladder.
    Invert {
        /// lambda_star or densities.
        #[arg(long)]
        problem: Option<String>,
        /// Noise levels (comma separated); "none" disables the ladder.
        #[arg(long)]
        noise: Option<String>,
        /// Noise seed; the scenario seed when omitted.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Summarize a run directory and write summary.csv.
    Report { dir: PathBuf },
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let env_out = std::env::var_os(OUT_ENV).map(PathBuf::from);
    match execute(&cli, env_out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command; `env_out` is the value of [`OUT_ENV`].
pub fn execute(cli: &Cli, env_out: Option<PathBuf>) -> Result<()> {
    if let Command::Report { dir } = &cli.command {
        let summary = summarize(dir)?;
        print!("{}", summary.text);
        return Ok(());
    }
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::bundled(),
    };
    let mut options = BTreeMap::new();
    let estimates = match &cli.command {
        Command::Verify {
            estimate,
            sweep,
            ensemble,
        } => {
            if let Some(s) = sweep {
                config.sweep = parse_sweep(s)?;
                options.insert("sweep".to_string(), s.clone());
            }
            if let Some(e) = ensemble {
                let (members, seed) = parse_ensemble(e)?;
                config.ensemble.members = members;
                config.ensemble.seed = seed.unwrap_or(config.ensemble.seed);
                options.insert("ensemble".to_string(), e.clone());
            }
            parse_estimates(estimate)?
        }
        Command::Invert { problem, noise, seed } => {
            if let Some(p) = problem {
                config.scenario.problem = p.parse()?;
            }
            if let Some(n) = noise {
                config.scenario.noise_levels = parse_levels(n)?;
                options.insert("noise".to_string(), n.clone());
            }
            if let Some(s) = seed {
                config.scenario.seed = *s;
            }
            Vec::new()
        }
        _ => Vec::new(),
    };
    let run = config.validate()?;
    let out_dir = cli
        .out
        .clone()
        .or(env_out)
        .unwrap_or_else(|| run.config.output.directory.clone());
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let effective = run.config.to_toml();
    write(&out_dir, EFFECTIVE_CONFIG_FILE, effective.as_bytes())?;
    let mut manifest = Manifest::load_or_new(&out_dir)?;
    let inputs = input_hashes(&run.config)?;
    let record = |command: &str, seed: Option<u64>| {
        RunRecord::new(command, seed, options.clone(), &effective, inputs.clone())
    };

    let mut failure = None;
    match &cli.command {
        Command::Simulate => {
            let outcome = run_simulate(&run, &out_dir);
            manifest.insert("simulate".into(), record("simulate", None).finish(&outcome));
            failure = outcome.err();
        }
        Command::Verify { .. } => {
            let seed = Some(run.config.ensemble.seed);
            for id in estimates {
                let outcome = run_verify(&run, id, &out_dir);
                manifest.insert(format!("verify:{id}"), record("verify", seed).finish(&outcome));
                if let Err(e) = outcome {
                    failure = Some(e);
                    break;
                }
            }
        }
        Command::Invert { .. } => {
            let problem = run.config.scenario.problem;
            let outcome = run_invert(&run, &out_dir);
            let seed = Some(run.config.scenario.seed);
            manifest.insert(format!("invert:{problem}"), record("invert", seed).finish(&outcome));
            failure = outcome.err();
        }
        Command::Report { .. } => unreachable!("handled above"),
    }
    manifest.save(&out_dir)?;
    failure.map_or(Ok(()), Err)
}

/// Output file name and its bytes.
type Output = (String, Vec<u8>);

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
}

fn write_all(dir: &Path, outputs: &[Output]) -> Result<Vec<(String, String)>> {
    outputs
        .iter()
        .map(|(name, bytes)| {
            write(dir, name, bytes)?;
            Ok((name.clone(), manifest::sha256_hex(bytes)))
        })
        .collect()
}

/// Hashes of the field files referenced by coefficient presets.
fn input_hashes(config: &RunConfig) -> Result<BTreeMap<String, String>> {
    let text = toml::to_string(config).expect("config serializes");
    let value: toml::Value = toml::from_str(&text).expect("config round-trips");
    let mut out = BTreeMap::new();
    let mut stack = vec![value];
    while let Some(v) = stack.pop() {
        match v {
            toml::Value::Table(t) => {
                if t.get("kind").and_then(|k| k.as_str()) == Some("file") {
                    if let Some(path) = t.get("path").and_then(|p| p.as_str()) {
                        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
                        out.insert(path.to_string(), manifest::sha256_hex(&bytes));
                    }
                }
                stack.extend(t.into_iter().map(|(_, v)| v));
            }
            toml::Value::Array(a) => stack.extend(a),
            _ => {}
        }
    }
    Ok(out)
}

/// Parses `s=1,2,4,gamma=1,2`: a `key=` token starts a list, bare numbers
/// extend the current one. Lists not mentioned keep their config values.
pub fn parse_sweep(text: &str) -> Result<Sweep> {
    let mut gammas = Vec::new();
    let mut s_values = Vec::new();
    let mut current: Option<&mut Vec<f64>> = None;
    for token in text.split([',', ';', ' ']).filter(|t| !t.is_empty()) {
        let value = match token.split_once('=') {
            Some((key, value)) => {
                current = Some(match key.trim() {
                    "s" => &mut s_values,
                    "gamma" => &mut gammas,
                    other => return Err(Error::Config(format!("--sweep: unknown list '{other}' (expected s or gamma)"))),
                });
                value
            }
            None => token,
        };
        let list = current
            .as_deref_mut()
            .ok_or_else(|| Error::Config(format!("--sweep: value '{token}' before any 's=' or 'gamma='")))?;
        list.push(parse_number(value, "--sweep")?);
    }
    let defaults = Sweep::default();
    Ok(Sweep {
        gammas: if gammas.is_empty() { defaults.gammas } else { gammas },
        s_values: if s_values.is_empty() { defaults.s_values } else { s_values },
    })
}

fn parse_number(text: &str, flag: &str) -> Result<f64> {
    text.trim()
        .parse()
        .map_err(|_| Error::Config(format!("{flag}: '{text}' is not a number")))
}

/// Parses `n` or `n,seed`.
pub fn parse_ensemble(text: &str) -> Result<(usize, Option<u64>)> {
    let bad = || Error::Config(format!("--ensemble: expected 'n' or 'n,seed', got '{text}'"));
    let mut parts = text.split(',').map(str::trim);
    let n = parts.next().and_then(|p| p.parse().ok()).ok_or_else(bad)?;
    let seed = match parts.next() {
        Some(p) => Some(p.parse().map_err(|_| bad())?),
        None => None,
    };
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok((n, seed))
}

fn parse_levels(text: &str) -> Result<Vec<f64>> {
    if text.trim().eq_ignore_ascii_case("none") {
        return Ok(Vec::new());
    }
    text.split(',').map(|t| parse_number(t, "--noise")).collect()
}

fn parse_estimates(names: &[String]) -> Result<Vec<EstimateId>> {
    let mut ids = Vec::new();
    for name in names {
        if name.trim().eq_ignore_ascii_case("all") {
            ids.extend(EstimateId::ALL);
        } else {
            ids.push(name.parse()?);
        }
    }
    let mut seen = Vec::new();
    ids.retain(|id| {
        let fresh = !seen.contains(id);
        seen.push(*id);
        fresh
    });
    Ok(ids)
}

fn state_columns(grid: &Grid, state: &FieldState) -> Vec<(String, ScalarField)> {
    let mut cols: Vec<(String, ScalarField)> = state
        .u
        .components()
        .iter()
        .enumerate()
        .map(|(a, c)| (format!("u{}", a + 1), c.clone()))
        .collect();
    cols.push(("theta".into(), state.theta.clone()));
    cols.push(("div_u".into(), grid::divergence(grid, &state.u)));
    cols
}

fn csv_columns(cols: &[(String, ScalarField)]) -> Vec<(&str, &ScalarField)> {
    cols.iter().map(|(n, f)| (n.as_str(), f)).collect()
}

fn run_simulate(run: &ValidatedRun, out: &Path) -> Result<Vec<(String, String)>> {
    let sc = &run.config.scenario;
    let grid = &run.scenario_grid;
    let traj = simulate(grid, &run.scenario_coeffs, &sc.drive, FieldState::zeros(grid), sc.cfl)?;
    let mut series = String::from("time,energy,max_abs_u,max_abs_theta,l2_div_u\n");
    let w = grid.quadrature_weights();
    for state in traj.states() {
        let div = grid::divergence(grid, &state.u);
        let l2_div = div.values().iter().zip(w).map(|(d, w)| w * d * d).sum::<f64>().sqrt();
        let max_u = state.u.components().iter().map(|c| c.max_abs()).fold(0.0, f64::max);
        series.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(state.t),
            fmt_f64(energy(grid, state, &run.scenario_coeffs)),
            fmt_f64(max_u),
            fmt_f64(state.theta.max_abs()),
            fmt_f64(l2_div)
        ));
    }
    let mut outputs: Vec<Output> = vec![("simulation.csv".into(), series.into_bytes())];
    let mut levels: Vec<usize> = sc
        .checkpoints
        .iter()
        .map(|&t| ((t / grid.dt()).round() as usize).min(grid.n_steps()))
        .collect();
    levels.sort_unstable();
    levels.dedup();
    for level in levels {
        let cols = state_columns(grid, traj.state(level));
        outputs.push((format!("state_k{level}.csv"), field_csv(grid, &csv_columns(&cols)).into_bytes()));
        if run.config.output.dumps {
            for (name, field) in &cols {
                outputs.push((format!("state_k{level}_{name}.blf"), dump_field(grid, field)));
            }
        }
    }
    let hashes = write_all(out, &outputs)?;
    println!(
        "simulate: {} levels on {:?} nodes, final energy {:.6e}",
        traj.n_levels(),
        grid.nodes(),
        energy(grid, traj.state(traj.n_levels() - 1), &run.scenario_coeffs)
    );
    Ok(hashes)
}

fn verdict_csv(report: &CarlemanReport) -> String {
    let mut out = String::from("estimate,gamma,s,count,max_ratio,median_ratio,verdict\n");
    for st in &report.stats {
        let verdict = report
            .verdicts
            .iter()
            .find(|(g, _)| *g == st.gamma)
            .map(|(_, v)| v.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            report.id,
            fmt_f64(st.gamma),
            fmt_f64(st.s),
            st.count,
            fmt_f64(st.max()),
            fmt_f64(st.median()),
            verdict
        ));
    }
    out
}

fn run_verify(run: &ValidatedRun, id: EstimateId, out: &Path) -> Result<Vec<(String, String)>> {
    let cfg = &run.config;
    let cutoffs = build_cutoffs(&run.grid, cfg.weights.eps_t)?;
    let members = if id == EstimateId::SubdomainPoincare {
        make_collar_ensemble(&run.grid, &cutoffs, cfg.ensemble.members, cfg.ensemble.seed)
    } else {
        make_test_ensemble(&run.grid, &cutoffs, cfg.ensemble.members, cfg.ensemble.seed)
    };
    let ctx = EstimateContext {
        grid: &run.grid,
        coeffs: &run.coeffs,
        weights: &cfg.weights,
        settings: &cfg.estimates,
    };
    let report = evaluate_estimate(id, &members, &ctx, &cfg.sweep)?;
    let outputs = vec![
        (format!("carleman_{id}.csv"), report.to_csv().into_bytes()),
        (format!("verdict_{id}.csv"), verdict_csv(&report).into_bytes()),
    ];
    let hashes = write_all(out, &outputs)?;
    let per_gamma: Vec<String> = report
        .verdicts
        .iter()
        .map(|(g, v)| format!("gamma {g}: {v}"))
        .collect();
    println!("{id}: {} ({})", report.verdict(), per_gamma.join(", "));
    Ok(hashes)
}

fn holder_csv(points: &[LadderPoint], slope: f64) -> String {
    let mut out = String::from("level,d_obs,e_err,slope\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(p.level),
            fmt_f64(p.d_obs),
            fmt_f64(p.e_err),
            fmt_f64(slope)
        ));
    }
    out
}

fn run_invert(run: &ValidatedRun, out: &Path) -> Result<Vec<(String, String)>> {
    let cfg = &run.config;
    let sc = &cfg.scenario;
    let grid = &run.scenario_grid;
    let scenario = TwinScenario {
        cfl: sc.cfl,
        ..TwinScenario::new(sc.problem, sc.drive, cfg.bounds.clone(), sc.x0.clone())
    };
    let (obs, truth) = synth_twin_data(grid, &run.scenario_coeffs, &run.perturbed, &scenario)?;
    let ctx = InverseContext {
        grid,
        coeffs: &run.scenario_coeffs,
        x0: &sc.x0,
        settings: &run.settings,
    };
    let report = reconstruct(&ctx, &obs, Some(&truth))?;
    let problem = sc.problem;
    let mut cols: Vec<(String, ScalarField)> = Vec::new();
    for (name, field) in &report.recovered {
        cols.push((format!("{name}_recovered"), field.clone()));
    }
    for (name, field) in truth.fields() {
        cols.push((format!("{name}_true"), field.clone()));
    }
    let mut outputs: Vec<Output> = vec![
        (format!("reconstruction_{problem}.csv"), report.to_csv().into_bytes()),
        (format!("recovered_{problem}.csv"), field_csv(grid, &csv_columns(&cols)).into_bytes()),
    ];
    if cfg.output.dumps {
        for (name, field) in &report.recovered {
            outputs.push((format!("recovered_{problem}_{name}.blf"), dump_field(grid, field)));
        }
    }
    for e in &report.errors {
        println!(
            "{problem}: {} H{} error {:.6e} (relative {:.6e})",
            e.field, e.order, e.absolute, e.relative
        );
    }
    println!("{problem}: D_obs {:.6e}", report.d_obs);
    if !sc.noise_levels.is_empty() {
        let points = noise_ladder(&ctx, &obs, &truth, &sc.noise_levels, sc.seed)?;
        let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.d_obs, p.e_err)).collect();
        let fit = fit_holder(&pairs)?;
        outputs.push((format!("holder_{problem}.csv"), holder_csv(&points, fit.slope).into_bytes()));
        println!("{problem}: fitted Holder slope {:.6}", fit.slope);
    }
    write_all(out, &outputs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_lists_parse() {
        let s = parse_sweep("s=1,2,4,gamma=1,2").unwrap();
        assert_eq!(s.s_values, vec![1.0, 2.0, 4.0]);
        assert_eq!(s.gammas, vec![1.0, 2.0]);
        let s = parse_sweep("gamma=3").unwrap();
        assert_eq!(s.gammas, vec![3.0]);
        assert_eq!(s.s_values, Sweep::default().s_values);
        assert!(parse_sweep("1,2").is_err());
        assert!(parse_sweep("k=1").is_err());
        assert!(parse_sweep("s=x").is_err());
    }

    #[test]
    fn ensemble_and_levels_parse() {
        assert_eq!(parse_ensemble("8,2024").unwrap(), (8, Some(2024)));
        assert_eq!(parse_ensemble("3").unwrap(), (3, None));
        assert!(parse_ensemble("3,4,5").is_err());
        assert!(parse_ensemble("x").is_err());
        assert_eq!(parse_levels("1e-3,1e-2").unwrap(), vec![1e-3, 1e-2]);
        assert!(parse_levels("none").unwrap().is_empty());
    }

    #[test]
    fn estimate_lists_expand_and_dedup() {
        let ids = parse_estimates(&["gronwall".into(), "GRONWALL".into()]).unwrap();
        assert_eq!(ids, vec![EstimateId::Gronwall]);
        assert_eq!(parse_estimates(&["all".into()]).unwrap().len(), EstimateId::ALL.len());
        assert!(parse_estimates(&["nope".into()]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn sweep_lists_round_trip(
            s in proptest::collection::vec(1e-3f64..1e3, 1..6),
            gamma in proptest::collection::vec(1e-3f64..1e3, 1..4),
        ) {
            let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
            let parsed = parse_sweep(&format!("gamma={},s={}", join(&gamma), join(&s))).unwrap();
            proptest::prop_assert_eq!(parsed.s_values, s);
            proptest::prop_assert_eq!(parsed.gammas, gamma);
        }

        #[test]
        fn ensemble_round_trips(n in 1usize..10_000, seed in proptest::option::of(proptest::num::u64::ANY)) {
            let text = match seed {
                Some(seed) => format!("{n},{seed}"),
                None => n.to_string(),
            };
            proptest::prop_assert_eq!(parse_ensemble(&text).unwrap(), (n, seed));
        }
    }
}
