//! Parameter sweeps over `λ × l × β` grids, tabulating certificates and,
//! optionally, empirical Tseng rates.

use rayon::prelude::*;

use crate::certify::{full_certificate, Certificate, ProblemConstants};
use crate::error::{QviError, Result};
use crate::io::{fmt_f64, fmt_opt, CsvTable};
use crate::problem::QviProblem;
use crate::solvers::{solve, SolverConfig, Variant};
use crate::vector::Vector;

/// Parses a grid: `start:stop:count` (inclusive linspace), a JSON array, or
/// a comma-separated list.
pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
    let text = text.trim();
    let bad = |m: String| QviError::invalid("grid", m);
    let values: Vec<f64> = if text.starts_with('[') {
        serde_json::from_str(text).map_err(|e| bad(e.to_string()))?
    } else if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(format!("expected start:stop:count, got '{text}'")));
        }
        let start: f64 = parts[0].trim().parse().map_err(|e| bad(format!("{e}")))?;
        let stop: f64 = parts[1].trim().parse().map_err(|e| bad(format!("{e}")))?;
        let count: usize = parts[2].trim().parse().map_err(|e| bad(format!("{e}")))?;
        match count {
            0 => Vec::new(),
            1 => vec![start],
            _ => (0..count)
                .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                .collect(),
        }
    } else if text.is_empty() {
        Vec::new()
    } else {
        text.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|e| bad(format!("'{s}': {e}"))))
            .collect::<Result<_>>()?
    };
    if values.is_empty() {
        return Err(bad("grid is empty".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(bad("grid values must be finite".into()));
    }
    Ok(values)
}

/// Optional per-cell Tseng run.
#[derive(Debug, Clone)]
pub struct SweepSolve {
    pub problem: QviProblem,
    pub x0: Vector,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub lipschitz: f64,
    pub rho: f64,
    pub lambdas: Vec<f64>,
    pub ls: Vec<f64>,
    /// Empty means no moving-set certificate.
    pub betas: Vec<f64>,
    pub solve: Option<SweepSolve>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda: f64,
    pub l: f64,
    pub beta: Option<f64>,
    pub cert: Option<Certificate>,
    /// `(1+θ)(1+λL)`.
    pub tseng_factor: Option<f64>,
    pub empirical_rate: Option<f64>,
    pub status: String,
}

/// Aggregate over all valid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub cells: usize,
    pub valid_cells: usize,
    pub min_tseng_factor: f64,
    pub max_discrete_rhs: f64,
    pub continuous_ok_cells: usize,
    pub discrete_ok_cells: usize,
    pub moving_ok_cells: usize,
}

impl FeasibilityReport {
    pub fn unmet_everywhere(&self) -> bool {
        self.continuous_ok_cells == 0 && self.discrete_ok_cells == 0 && self.moving_ok_cells == 0
    }
}

fn cell(spec: &SweepSpec, lambda: f64, l: f64, beta: Option<f64>) -> SweepRow {
    let mut row = SweepRow {
        lambda,
        l,
        beta,
        cert: None,
        tseng_factor: None,
        empirical_rate: None,
        status: "ok".into(),
    };
    let constants = ProblemConstants::new(spec.lipschitz, spec.rho, l, lambda).and_then(|c| match beta {
        Some(b) => c.with_beta(b),
        None => Ok(c),
    });
    let constants = match constants {
        Ok(c) => c,
        Err(e) => {
            row.status = format!("invalid: {e}");
            return row;
        }
    };
    row.cert = full_certificate(&constants).ok();
    row.tseng_factor = Some(constants.tseng_factor());
    if let Some(s) = &spec.solve {
        let run =
            SolverConfig::new(Variant::Tseng, lambda, s.tol, s.max_iter).and_then(|cfg| solve(&s.problem, &s.x0, &cfg));
        match run {
            Ok(trace) => {
                row.empirical_rate = trace.empirical_rate;
                row.status = trace.status.as_str().into();
            }
            Err(e) => row.status = format!("error: {e}"),
        }
    }
    row
}

/// Evaluates every grid cell (concurrently); rows come back in grid order
/// `λ`-major, then `l`, then `β`.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    if spec.lambdas.is_empty() {
        return Err(QviError::invalid("lambda_grid", "grid is empty"));
    }
    if spec.ls.is_empty() {
        return Err(QviError::invalid("l_grid", "grid is empty"));
    }
    let betas: Vec<Option<f64>> = if spec.betas.is_empty() {
        vec![None]
    } else {
        spec.betas.iter().copied().map(Some).collect()
    };
    let cells: Vec<(f64, f64, Option<f64>)> = spec
        .lambdas
        .iter()
        .flat_map(|&lam| {
            let betas = &betas;
            spec.ls
                .iter()
                .flat_map(move |&l| betas.iter().map(move |&b| (lam, l, b)))
        })
        .collect();
    Ok(cells.par_iter().map(|&(lam, l, b)| cell(spec, lam, l, b)).collect())
}

pub fn feasibility(rows: &[SweepRow]) -> FeasibilityReport {
    let mut r = FeasibilityReport {
        cells: rows.len(),
        valid_cells: 0,
        min_tseng_factor: f64::INFINITY,
        max_discrete_rhs: f64::NEG_INFINITY,
        continuous_ok_cells: 0,
        discrete_ok_cells: 0,
        moving_ok_cells: 0,
    };
    for row in rows {
        let (Some(cert), Some(p)) = (&row.cert, row.tseng_factor) else {
            continue;
        };
        r.valid_cells += 1;
        r.min_tseng_factor = r.min_tseng_factor.min(p);
        if let Some(d) = cert.discrete_rhs {
            r.max_discrete_rhs = r.max_discrete_rhs.max(d);
        }
        r.continuous_ok_cells += cert.flags.continuous_ok as usize;
        r.discrete_ok_cells += cert.flags.discrete_ok as usize;
        r.moving_ok_cells += cert.flags.moving_ok as usize;
    }
    r
}

pub const SWEEP_COLUMNS: [&str; 17] = [
    "lambda",
    "l",
    "beta",
    "theta",
    "mu",
    "Lambda",
    "rate_r",
    "tseng_factor",
    "discrete_rhs",
    "moving_rhs",
    "existence_ok",
    "nesterov_ok",
    "continuous_ok",
    "discrete_ok",
    "moving_ok",
    "empirical_rate",
    "status",
];

pub fn sweep_table(spec: &SweepSpec, rows: &[SweepRow]) -> CsvTable {
    let report = feasibility(rows);
    let mut t = CsvTable::new(SWEEP_COLUMNS);
    t.push_meta("L", fmt_f64(spec.lipschitz));
    t.push_meta("rho", fmt_f64(spec.rho));
    t.push_meta("cells", report.cells.to_string());
    t.push_meta("valid_cells", report.valid_cells.to_string());
    t.push_meta("min_tseng_factor", fmt_f64(report.min_tseng_factor));
    t.push_meta("max_discrete_rhs", fmt_f64(report.max_discrete_rhs));
    t.push_meta("continuous_ok_cells", report.continuous_ok_cells.to_string());
    t.push_meta("discrete_ok_cells", report.discrete_ok_cells.to_string());
    t.push_meta("moving_ok_cells", report.moving_ok_cells.to_string());
    t.push_meta(
        "sufficient_conditions",
        if report.unmet_everywhere() {
            "unmet at every grid point"
        } else {
            "met at some grid point"
        },
    );
    let flag = |b: bool| if b { "true" } else { "false" }.to_string();
    for row in rows {
        let mut cells = vec![fmt_f64(row.lambda), fmt_f64(row.l), fmt_opt(row.beta)];
        match &row.cert {
            Some(c) => cells.extend([
                fmt_f64(c.theta),
                fmt_f64(c.mu),
                fmt_f64(c.lambda_rate),
                fmt_f64(c.rate_r),
                fmt_opt(row.tseng_factor),
                fmt_opt(c.discrete_rhs),
                fmt_opt(c.moving_rhs),
                flag(c.flags.existence_ok),
                flag(c.flags.nesterov_ok),
                flag(c.flags.continuous_ok),
                flag(c.flags.discrete_ok),
                flag(c.flags.moving_ok),
            ]),
            None => cells.extend(std::iter::repeat_n(String::new(), 12)),
        }
        cells.push(fmt_opt(row.empirical_rate));
        cells.push(row.status.clone());
        t.push_row(cells);
    }
    t
}
