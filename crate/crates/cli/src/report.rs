//! Summary documents and plot data rebuilt from a finished result
//! directory.

use std::fmt::Write as _;
use std::path::Path;

use serde_json::Value;

use crate::config::ExperimentKind;
use crate::experiments::Table;
use crate::{CliError, Manifest};

pub const MANIFEST: &str = "manifest.json";
pub const SUMMARY: &str = "summary.md";

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    fn read(path: &Path) -> Result<Self, CliError> {
        let mut r = csv::Reader::from_path(path).map_err(|e| {
            CliError::Config(format!("{}: {e}", path.display()))
        })?;
        let header = r
            .headers()
            .map_err(|e| CliError::Config(e.to_string()))?
            .iter()
            .map(String::from)
            .collect();
        let rows = r
            .records()
            .map(|rec| {
                rec.map(|r| r.iter().map(String::from).collect())
                    .map_err(|e| CliError::Config(e.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { header, rows })
    }

    fn col(&self, name: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Config(format!("result csv lacks column {name}")))
    }

    /// Projection onto the named columns.
    fn select(&self, names: &[&str]) -> Result<Vec<Vec<String>>, CliError> {
        let idx = names.iter().map(|n| self.col(n)).collect::<Result<Vec<_>, _>>()?;
        Ok(self
            .rows
            .iter()
            .map(|r| idx.iter().map(|&i| r[i].clone()).collect())
            .collect())
    }
}

fn markdown_table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}|", header.iter().map(|_| "---").collect::<Vec<_>>().join("|"));
    for r in rows {
        let _ = writeln!(out, "| {} |", r.join(" | "));
    }
    out.push('\n');
}

fn plot(dir: &Path, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<(), CliError> {
    let mut t = Table::new(header);
    for r in rows {
        t.push(r);
    }
    let a = t.artifact(name)?;
    std::fs::write(dir.join(a.name), a.bytes)?;
    Ok(())
}

fn value_line(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Reads `manifest.json` and the result CSVs of `dir`, writes
/// `summary.md` and the plot-data files, and returns the summary.
pub fn render(dir: &Path) -> Result<String, CliError> {
    let path = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&path)
        .map_err(|_| CliError::Config(format!("missing manifest {}", path.display())))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;

    let mut s = String::new();
    let _ = writeln!(s, "# {} ({})\n", m.experiment.name(), if m.passed { "pass" } else { "FAIL" });
    let _ = writeln!(s, "- seed: {}", m.seed);
    let _ = writeln!(s, "- config hash: `{}`", m.config_hash);
    let _ = writeln!(s, "- mflab {} / core {}", m.version, m.core_version);
    let _ = writeln!(s, "- workers: {}, wall time: {:.2} s\n", m.workers, m.wall_time_s);

    s.push_str("## Invariants\n\n");
    let rows: Vec<Vec<String>> = m
        .invariants
        .iter()
        .map(|i| {
            vec![
                if i.passed { "pass" } else { "FAIL" }.to_string(),
                i.name.clone(),
                i.detail.clone(),
            ]
        })
        .collect();
    markdown_table(&mut s, &["status", "invariant", "detail"], &rows);

    s.push_str("## Results\n\n");
    if let Value::Object(map) = &m.results {
        for (k, v) in map {
            let _ = writeln!(s, "- {k}: {}", value_line(v));
        }
    }
    s.push('\n');

    match m.experiment {
        ExperimentKind::ChaosSweep => {
            let c = Csv::read(&dir.join("chaos.csv"))?;
            let cols = ["n", "seed", "kl", "kl_half_width", "bound_poc", "bound_poc_ii", "margin"];
            s.push_str("## KL against the bounds\n\n");
            markdown_table(&mut s, &["N", "seed", "KL", "CI half-width", "bound (poc)", "bound (poc-ii)", "margin"], &c.select(&cols)?);
            plot(
                dir,
                "plot_chaos.csv",
                &["n", "seed", "kl", "kl_lo", "kl_hi", "bound_poc", "bound_poc_ii"],
                c.select(&["n", "seed", "kl", "kl_lo", "kl_hi", "bound_poc", "bound_poc_ii"])?,
            )?;
        }
        ExperimentKind::TiltProfile => {
            let c = Csv::read(&dir.join("profile.csv"))?;
            let t_star = m.results.get("t_star").map(value_line).unwrap_or_default();
            let _ = writeln!(s, "Regime threshold t* = {t_star}\n");
            s.push_str("## Covariance profile\n\n");
            let cols = ["t", "y_id", "opnorm", "gaussian_ref", "small_regime_ref", "large_regime_ref", "regime"];
            markdown_table(&mut s, &cols, &c.select(&cols)?);
            plot(
                dir,
                "plot_tilt.csv",
                &["t", "y_id", "opnorm", "small_regime_ref", "large_regime_ref"],
                c.select(&["t", "y_id", "opnorm", "small_regime_ref", "large_regime_ref"])?,
            )?;
        }
        ExperimentKind::TransportMap => {
            let get = |k: &str| m.results.get(k).map(value_line).unwrap_or_default();
            s.push_str("## Lipschitz constants\n\n");
            markdown_table(
                &mut s,
                &["empirical L", "heat-flow bound (fitted)", "main bound (generic)", "main bound (specific)"],
                &[vec![
                    get("empirical_lipschitz"),
                    get("heatflow_bound"),
                    get("main_bound_generic"),
                    get("main_bound_specific"),
                ]],
            );
            let c = Csv::read(&dir.join("map.csv"))?;
            plot(dir, "plot_map.csv", &["z", "t_of_z"], c.select(&["z", "t_of_z"])?)?;
        }
        ExperimentKind::MfldRun => {
            let c = Csv::read(&dir.join("moments.csv"))?;
            s.push_str("## Particle moments\n\n");
            let header: Vec<&str> = c.header.iter().map(String::as_str).collect();
            markdown_table(&mut s, &header, &c.rows);
            plot(dir, "plot_moments.csv", &header, c.rows.clone())?;
        }
        ExperimentKind::BoundsTable => {
            let c = Csv::read(&dir.join("bounds.csv"))?;
            let cols = ["sigma", "lambda", "beta_hat", "b", "main_generic", "main_specific", "lsi_pi", "poc_generic", "poc_example_nn"];
            s.push_str("## Bounds\n\n");
            markdown_table(&mut s, &cols, &c.select(&cols)?);
        }
    }
    std::fs::write(dir.join(SUMMARY), &s)?;
    Ok(s)
}
