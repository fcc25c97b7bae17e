//! Summary of a run directory: verdicts, reconstruction errors and Hölder
//! slopes, printed and merged into `summary.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::manifest::{sha256_hex, Manifest, RunRecord, MANIFEST_FILE};
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    /// Human-readable lines.
    pub text: String,
    /// Rows `run,item,metric,value`.
    pub csv: String,
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines().filter(|l| !l.is_empty());
        let split = |l: &str| l.split(',').map(str::to_string).collect::<Vec<_>>();
        let header = lines.next().map(split).unwrap_or_default();
        Ok(Table {
            header,
            rows: lines.map(split).collect(),
        })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("column '{name}' missing")))
    }
}

struct Collector {
    text: String,
    csv: String,
}

impl Collector {
    fn row(&mut self, run: &str, item: &str, metric: &str, value: &str) {
        let _ = writeln!(self.csv, "{run},{item},{metric},{value}");
    }

    fn line(&mut self, line: String) {
        self.text.push_str(&line);
        self.text.push('\n');
    }
}

fn plain(v: &str) -> String {
    v.parse::<f64>().map(|x| x.to_string()).unwrap_or_else(|_| v.to_string())
}

fn short(v: &str) -> String {
    v.parse::<f64>().map(|x| format!("{x:.4e}")).unwrap_or_else(|_| v.to_string())
}

/// Reads the manifest of `dir`, summarizes every recorded run and writes
/// `summary.csv` into `dir`.
pub fn summarize(dir: &Path) -> Result<Summary> {
    if !dir.join(MANIFEST_FILE).is_file() {
        return Err(Error::Config(format!(
            "{}: no {MANIFEST_FILE}; not a run directory",
            dir.display()
        )));
    }
    let manifest = Manifest::load(dir)?;
    let mut out = Collector {
        text: format!("{} {}\n", manifest.tool, manifest.version),
        csv: String::from("run,item,metric,value\n"),
    };
    for (key, record) in &manifest.runs {
        if record.status != "ok" {
            out.line(format!("{key}: {}", record.status));
            out.row(key, "", "status", "failed");
            continue;
        }
        for (file, hash) in &record.outputs {
            let bytes = fs::read(dir.join(file)).map_err(|e| Error::io(dir.join(file), e))?;
            if sha256_hex(&bytes) != *hash {
                out.line(format!("{key}: warning: {file} differs from the manifest"));
            }
        }
        match record.command.as_str() {
            "verify" => verify_lines(dir, key, record, &mut out)?,
            "invert" => invert_lines(dir, key, record, &mut out)?,
            "simulate" => simulate_lines(dir, key, record, &mut out)?,
            other => out.line(format!("{key}: unknown command '{other}'")),
        }
    }
    let path = dir.join(SUMMARY_FILE);
    fs::write(&path, &out.csv).map_err(|e| Error::io(&path, e))?;
    Ok(Summary {
        text: out.text,
        csv: out.csv,
    })
}

fn output_with_prefix<'a>(record: &'a RunRecord, prefix: &str) -> Option<&'a str> {
    record.outputs.keys().find(|f| f.starts_with(prefix)).map(String::as_str)
}

fn verify_lines(dir: &Path, key: &str, record: &RunRecord, out: &mut Collector) -> Result<()> {
    let Some(file) = output_with_prefix(record, "verdict_") else {
        return Ok(());
    };
    let t = Table::read(&dir.join(file))?;
    let (g, s, max, verdict) = (t.col("gamma")?, t.col("s")?, t.col("max_ratio")?, t.col("verdict")?);
    let mut gammas: Vec<&str> = Vec::new();
    for r in &t.rows {
        if !gammas.contains(&r[g].as_str()) {
            gammas.push(&r[g]);
        }
    }
    let mut parts = Vec::new();
    let mut overall = "bounded";
    for gamma in gammas {
        let rows: Vec<&Vec<String>> = t.rows.iter().filter(|r| r[g] == gamma).collect();
        let last = rows.last().expect("rows of a listed gamma");
        let v = last[verdict].as_str();
        if v != "bounded" && overall != "growing" {
            overall = if v == "growing" { "growing" } else { "undetermined" };
        }
        parts.push(format!(
            "gamma {}: {v}, max ratio {} at s {}",
            plain(gamma),
            short(&last[max]),
            plain(&last[s])
        ));
        out.row(key, &format!("gamma={gamma}"), "verdict", v);
        for r in rows {
            out.row(key, &format!("gamma={gamma} s={}", r[s]), "max_ratio", &r[max]);
        }
    }
    out.line(format!("{key}: {overall} ({})", parts.join("; ")));
    Ok(())
}

fn invert_lines(dir: &Path, key: &str, record: &RunRecord, out: &mut Collector) -> Result<()> {
    if let Some(file) = output_with_prefix(record, "reconstruction_") {
        let t = Table::read(&dir.join(file))?;
        let (field, order, abs, rel, d) = (
            t.col("field")?,
            t.col("order")?,
            t.col("absolute")?,
            t.col("relative")?,
            t.col("d_obs")?,
        );
        let mut parts = Vec::new();
        for r in &t.rows {
            let item = format!("{} H{}", r[field], r[order]);
            out.row(key, &item, "absolute_error", &r[abs]);
            out.row(key, &item, "relative_error", &r[rel]);
            parts.push(format!("{item} rel {}", short(&r[rel])));
        }
        if let Some(r) = t.rows.first() {
            out.row(key, "clean", "d_obs", &r[d]);
        }
        out.line(format!("{key}: {}", parts.join(", ")));
    }
    if let Some(file) = output_with_prefix(record, "holder_") {
        let t = Table::read(&dir.join(file))?;
        let (level, d, e, slope) = (t.col("level")?, t.col("d_obs")?, t.col("e_err")?, t.col("slope")?);
        for r in &t.rows {
            out.row(key, &format!("noise={}", r[level]), "d_obs", &r[d]);
            out.row(key, &format!("noise={}", r[level]), "e_err", &r[e]);
        }
        if let Some(r) = t.rows.first() {
            out.row(key, "ladder", "holder_slope", &r[slope]);
            out.line(format!(
                "{key}: fitted Holder slope {:.6} over {} noise levels",
                r[slope].parse::<f64>().unwrap_or(f64::NAN),
                t.rows.len()
            ));
        }
    }
    Ok(())
}

fn simulate_lines(dir: &Path, key: &str, record: &RunRecord, out: &mut Collector) -> Result<()> {
    if !record.outputs.contains_key("simulation.csv") {
        return Ok(());
    }
    let t = Table::read(&dir.join("simulation.csv"))?;
    let (time, energy) = (t.col("time")?, t.col("energy")?);
    if let Some(last) = t.rows.last() {
        out.row(key, "final", "time", &last[time]);
        out.row(key, "final", "energy", &last[energy]);
        out.line(format!(
            "{key}: {} levels, energy {} at t = {:.6}",
            t.rows.len(),
            short(&last[energy]),
            last[time].parse::<f64>().unwrap_or(f64::NAN)
        ));
    }
    Ok(())
}
