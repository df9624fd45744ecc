//! CSV and JSON output formats and their readers.
//!
//! CSV files are UTF-8, comma separated, LF terminated, with a header row.
//! Metadata precedes the header as `# key=value` comment lines. Floats are
//! written in scientific notation with 17 significant digits, which
//! round-trips every `f64`; missing values are empty cells.

use std::collections::BTreeMap;

use crate::dynamics::{check_envelope, FlowConfig, FlowTrace};
use crate::error::{QviError, Result};
use crate::solvers::IterationTrace;

/// Fixed-precision float formatting shared by every writer.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        // non-finite values never appear in successful traces
        format!("{v}")
    }
}

pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// In-memory CSV document with leading `# key=value` metadata.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub meta: Vec<(String, String)>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            meta: Vec::new(),
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.meta.push((key.into(), value.into()));
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| QviError::invalid("csv", format!("missing column '{name}'")))
    }

    /// Column parsed as floats; empty cells become `None`.
    pub fn column_f64(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let idx = self.column_index(name)?;
        self.rows
            .iter()
            .map(|r| {
                let cell = r[idx].trim();
                if cell.is_empty() {
                    Ok(None)
                } else {
                    cell.parse::<f64>()
                        .map(Some)
                        .map_err(|e| QviError::invalid("csv", format!("column '{name}': {e}")))
                }
            })
            .collect()
    }

    pub fn column_str(&self, name: &str) -> Result<Vec<&str>> {
        let idx = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[idx].as_str()).collect())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}={v}\n"));
        }
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        let body = w.into_inner().expect("in-memory flush");
        out.push_str(std::str::from_utf8(&body).expect("utf-8 input"));
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = Vec::new();
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim();
            let (k, v) = body.split_once('=').unwrap_or((body, ""));
            meta.push((k.to_string(), v.to_string()));
        }
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let bad = |e: csv::Error| QviError::invalid("csv", e.to_string());
        let header = reader.headers().map_err(bad)?.iter().map(String::from).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(String::from).collect()).map_err(bad))
            .collect::<Result<Vec<Vec<String>>>>()?;
        Ok(CsvTable { meta, header, rows })
    }
}

/// Trace CSV: columns `k, residual, dist_to_solution`.
pub fn trace_table(problem_name: &str, trace: &IterationTrace) -> CsvTable {
    let mut t = CsvTable::new(["k", "residual", "dist_to_solution"]);
    t.push_meta("problem", problem_name);
    t.push_meta("variant", trace.variant.as_str());
    t.push_meta("lambda", fmt_f64(trace.lambda));
    t.push_meta("status", trace.status.as_str());
    t.push_meta("iterations", trace.iterations().to_string());
    t.push_meta("empirical_rate", fmt_opt(trace.empirical_rate));
    t.push_meta("warnings", trace.warnings.join(";"));
    if let Some(f) = &trace.failure {
        t.push_meta("failure", f.clone());
    }
    for r in &trace.records {
        t.push_row(vec![r.k.to_string(), fmt_f64(r.residual), fmt_opt(r.dist_to_solution)]);
    }
    t
}

/// Flow CSV: columns `t, V, envelope` plus `x0..x{n-1}` when requested.
pub fn flow_table(problem_name: &str, config: &FlowConfig, trace: &FlowTrace, coords: bool) -> CsvTable {
    let dim = trace.samples.first().map_or(0, |s| s.x.dim());
    let mut header: Vec<String> = vec!["t".into(), "V".into(), "envelope".into()];
    if coords {
        header.extend((0..dim).map(|i| format!("x{i}")));
    }
    let mut t = CsvTable::new(header);
    t.push_meta("problem", problem_name);
    t.push_meta("lambda", fmt_f64(config.lambda));
    t.push_meta("h", fmt_f64(config.h));
    t.push_meta("scheme", format!("{:?}", config.scheme).to_lowercase());
    t.push_meta("Lambda", fmt_f64(trace.lambda_rate));
    if config.alpha.is_some() {
        t.push_meta("envelope_exponent", "Lambda * integral of alpha (time-rescaled flow)");
    }
    t.push_meta("envelope_check", check_envelope(trace).describe());
    for s in &trace.samples {
        let mut row = vec![fmt_f64(s.t), fmt_opt(s.v), fmt_opt(s.envelope)];
        if coords {
            row.extend(s.x.iter().map(|&v| fmt_f64(v)));
        }
        t.push_row(row);
    }
    t
}

/// Parses `# key=value` metadata into a map (last value wins).
pub fn meta_map(table: &CsvTable) -> BTreeMap<&str, &str> {
    table.meta.iter().map(|(k, v)| (k.as_str(), v.as_str())).collect()
}
