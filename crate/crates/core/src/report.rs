//! Versioned CSV and JSON reports.
//!
//! CSV files open with `#`-prefixed metadata lines (configuration, library
//! version, seed) followed by a single header row. Everything after the
//! comment block depends only on the inputs, so two runs with the same
//! configuration produce identical bodies.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Report(format!("unknown format '{other}' (expected csv or json)"))),
        }
    }
}

/// Declared columns (CSV) or top-level fields (JSON) per command.
pub fn report_schema(format: &str, command: &str) -> Result<&'static [&'static str]> {
    let format: Format = format.parse()?;
    let cols: &'static [&'static str] = match (format, command) {
        (Format::Csv, "lln") => &["ell", "n", "count", "pairs", "empirical", "reference", "abs_error", "exact"],
        (Format::Csv, "exact") => &["n", "ell", "alpha_n", "beta_n", "sigma_n_sq", "sigma_n_sq_over_n3", "limit_variance"],
        (Format::Csv, "clt") => &["n", "replicas", "mean", "variance", "d_ks", "bound", "vacuous", "dependency_degree", "slope"],
        (Format::Csv, "ldp") => &[
            "x", "rate", "lambda", "iterations", "converged",
            "k", "reference_level", "level_residual", "mixture", "measure_checksum",
        ],
        (Format::Csv, "squarefree") => &["n", "count", "density", "reference", "draws", "mc_frequency", "rate"],
        (Format::Csv, "dgcd") => &["d", "n", "count", "empirical", "reference", "abs_error", "replicas", "ensemble_variance"],
        (Format::Csv, "coupling") => &[
            "n", "window", "m", "draws", "mismatch_rate", "mismatch_bound", "mismatch_se",
            "chi_square", "dof", "p_value", "log_coupling_bound",
        ],
        (Format::Csv, "tails") => &[
            "measure", "window", "n", "epsilon", "replicas", "exceedances",
            "log_prob_point", "log_prob_ucb", "analytic_bound", "analytic_formula",
        ],
        (Format::Json, "lln") => &["schema", "config", "rows"],
        (Format::Json, "exact") => &["schema", "config", "rows"],
        (Format::Json, "clt") => &["schema", "config", "reports", "d_ks", "baldi_bound", "D_mode", "fit"],
        (Format::Json, "ldp") => &["schema", "config", "curves"],
        (Format::Json, "squarefree") => &["schema", "config", "rows"],
        (Format::Json, "dgcd") => &["schema", "config", "rows"],
        (Format::Json, "coupling") => &["schema", "config", "rows"],
        (Format::Json, "tails") => &["schema", "config", "experiments"],
        (_, other) => return Err(Error::Report(format!("unknown command '{other}'"))),
    };
    Ok(cols)
}

/// Schema tag written into every report, e.g. `gcd-density/ldp/v1`.
pub fn schema_tag(command: &str) -> String {
    format!("gcd-density/{command}/v{SCHEMA_VERSION}")
}

/// A table of string cells with metadata, rendered as CSV or JSON.
#[derive(Debug, Clone)]
pub struct Table {
    pub command: String,
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        Self {
            command: command.to_string(),
            metadata: vec![
                ("schema".into(), schema_tag(command)),
                ("library_version".into(), LIBRARY_VERSION.into()),
            ],
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.metadata.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Report(format!(
                "row of {} cells for {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}: {v}").map_err(io)?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(|e| Error::Report(e.to_string()))?;
        for r in &self.rows {
            w.write_record(r).map_err(|e| Error::Report(e.to_string()))?;
        }
        w.flush().map_err(io)
    }
}

/// JSON document `{"schema": ..., "library_version": ..., ...payload}`.
pub fn write_json<W: Write, S: Serialize>(out: W, command: &str, payload: &S) -> Result<()> {
    let mut value = serde_json::to_value(payload).map_err(|e| Error::Report(e.to_string()))?;
    let obj = value
        .as_object_mut()
        .ok_or_else(|| Error::Report("JSON payload must be an object".into()))?;
    obj.insert("schema".into(), schema_tag(command).into());
    obj.insert("library_version".into(), LIBRARY_VERSION.into());
    serde_json::to_writer_pretty(out, &value).map_err(|e| Error::Report(e.to_string()))
}

/// Shortest round-trip representation, `inf`/`-inf`/`nan` spelled out.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x}")
    }
}

fn io(e: std::io::Error) -> Error {
    Error::Report(e.to_string())
}
