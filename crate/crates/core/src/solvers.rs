//! Discrete iterations: the Tseng-type forward-backward-forward scheme
//!
//! ```text
//! y^k     = P_{K(x^k)}(x^k − λF(x^k))
//! x^{k+1} = y^k + λ(F(x^k) − F(y^k))
//! ```
//!
//! and the gradient-projection and extragradient baselines.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::certify::{self, ProblemConstants};
use crate::error::{QviError, Result};
use crate::problem::{check_lambda, QviProblem};
use crate::vector::Vector;

/// Iterates whose norm exceeds this are treated as divergence.
pub const DIVERGENCE_NORM: f64 = 1e12;

/// Ratios with a denominator below this are skipped by the rate estimate.
pub const RATE_FLOOR: f64 = 1e-14;

/// Warning attached to traces run outside the certified regime.
pub const WARN_DISCRETE_UNMET: &str = "discrete_condition_unmet";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Tseng,
    GradientProjection,
    Extragradient,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Tseng, Variant::GradientProjection, Variant::Extragradient];

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Tseng => "tseng",
            Variant::GradientProjection => "gradient_projection",
            Variant::Extragradient => "extragradient",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = QviError;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| QviError::invalid("variant", format!("unknown variant '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub variant: Variant,
}

impl SolverConfig {
    pub fn new(variant: Variant, lambda: f64, tol: f64, max_iter: usize) -> Result<Self> {
        let c = SolverConfig {
            lambda,
            max_iter,
            tol,
            variant,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(QviError::invalid("tol", "must be positive and finite"));
        }
        if self.max_iter == 0 {
            return Err(QviError::invalid("max_iter", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterRecord {
    pub k: usize,
    pub x: Vector,
    /// Forward-backward point `P_{K(x)}(x − λF(x))` at this iterate.
    pub y: Vector,
    /// Natural residual `‖x − y‖`.
    pub residual: f64,
    pub dist_to_solution: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIterReached,
    NumericFailure,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIterReached => "max_iter_reached",
            Status::NumericFailure => "numeric_failure",
        }
    }
}

impl FromStr for Status {
    type Err = QviError;
    fn from_str(s: &str) -> Result<Self> {
        [Status::Converged, Status::MaxIterReached, Status::NumericFailure]
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| QviError::invalid("status", format!("unknown status '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub variant: Variant,
    pub lambda: f64,
    pub records: Vec<IterRecord>,
    pub status: Status,
    pub empirical_rate: Option<f64>,
    pub warnings: Vec<String>,
    /// Diagnostic for a numeric failure.
    pub failure: Option<String>,
}

impl IterationTrace {
    pub fn last(&self) -> Option<&IterRecord> {
        self.records.last()
    }

    /// Index of the last recorded iterate.
    pub fn iterations(&self) -> usize {
        self.last().map_or(0, |r| r.k)
    }
}

fn tseng_from(problem: &QviProblem, fx: &Vector, y: &Vector, lambda: f64) -> Result<Vector> {
    let fy = problem.evaluate_operator(y)?;
    Ok(y.axpy(lambda, &(fx - &fy)))
}

fn extragradient_from(problem: &QviProblem, x: &Vector, y: &Vector, lambda: f64) -> Result<Vector> {
    let fy = problem.evaluate_operator(y)?;
    problem.project(x, &x.axpy(-lambda, &fy))
}

/// One Tseng step: returns `(y, x_next)`. One projection and two operator
/// evaluations.
pub fn tseng_step(problem: &QviProblem, x: &Vector, lambda: f64) -> Result<(Vector, Vector)> {
    check_lambda(lambda)?;
    let (fx, y) = problem.forward_backward(x, lambda)?;
    let next = tseng_from(problem, &fx, &y, lambda)?;
    Ok((y, next))
}

/// `x⁺ = P_{K(x)}(x − λF(x))`.
pub fn gradient_projection_step(problem: &QviProblem, x: &Vector, lambda: f64) -> Result<Vector> {
    check_lambda(lambda)?;
    Ok(problem.forward_backward(x, lambda)?.1)
}

/// `y = P_{K(x)}(x − λF(x))`, `x⁺ = P_{K(x)}(x − λF(y))`.
pub fn extragradient_step(problem: &QviProblem, x: &Vector, lambda: f64) -> Result<Vector> {
    check_lambda(lambda)?;
    let (_, y) = problem.forward_backward(x, lambda)?;
    extragradient_from(problem, x, &y, lambda)
}

/// Runs the configured variant from `x0` until the natural residual drops
/// to `tol` or `max_iter` steps were taken. Numeric failures end the run
/// with a partial trace; only invalid input is returned as `Err`.
pub fn solve(problem: &QviProblem, x0: &Vector, config: &SolverConfig) -> Result<IterationTrace> {
    config.validate()?;
    x0.ensure_dim(problem.dim())?;
    if !x0.is_finite() {
        return Err(QviError::invalid("x0", "must be finite"));
    }
    let lambda = config.lambda;
    let (l_op, rho, l) = problem.constants();
    let cert = certify::full_certificate(&ProblemConstants::new(l_op, rho, l, lambda)?)?;
    let mut warnings = Vec::new();
    if !cert.flags.discrete_ok {
        warnings.push(WARN_DISCRETE_UNMET.to_string());
    }

    let x_star = problem.known_solution();
    let mut records = Vec::new();
    let mut x = x0.clone();
    let mut k = 0;
    let (status, failure) = loop {
        let (fx, y) = match problem.forward_backward(&x, lambda) {
            Ok(v) => v,
            Err(e) => break (Status::NumericFailure, Some(e.to_string())),
        };
        let residual = x.dist(&y);
        records.push(IterRecord {
            k,
            x: x.clone(),
            y: y.clone(),
            residual,
            dist_to_solution: x_star.map(|s| x.dist(s)),
        });
        if residual <= config.tol {
            break (Status::Converged, None);
        }
        if k == config.max_iter {
            break (Status::MaxIterReached, None);
        }
        let next = match config.variant {
            Variant::Tseng => tseng_from(problem, &fx, &y, lambda),
            Variant::GradientProjection => Ok(y),
            Variant::Extragradient => extragradient_from(problem, &x, &y, lambda),
        };
        match next {
            Ok(n) if n.norm() > DIVERGENCE_NORM => {
                break (
                    Status::NumericFailure,
                    Some(format!("iterate norm exceeded {DIVERGENCE_NORM:e} at k={}", k + 1)),
                )
            }
            Ok(n) => x = n,
            Err(e) => break (Status::NumericFailure, Some(e.to_string())),
        }
        k += 1;
    };

    let empirical_rate = empirical_rate(&records);
    Ok(IterationTrace {
        variant: config.variant,
        lambda,
        records,
        status,
        empirical_rate,
        warnings,
        failure,
    })
}

/// Geometric mean of successive ratios of `dist_to_solution` (or of the
/// residual when no solution is known), skipping near-zero denominators.
pub fn empirical_rate(records: &[IterRecord]) -> Option<f64> {
    let use_dist = records.iter().all(|r| r.dist_to_solution.is_some());
    let series: Vec<f64> = records
        .iter()
        .map(|r| {
            if use_dist {
                r.dist_to_solution.unwrap()
            } else {
                r.residual
            }
        })
        .collect();
    let mut log_sum = 0.0;
    let mut count = 0usize;
    for w in series.windows(2) {
        if w[0] < RATE_FLOOR {
            continue;
        }
        if w[1] == 0.0 {
            return Some(0.0);
        }
        log_sum += (w[1] / w[0]).ln();
        count += 1;
    }
    (count > 0).then(|| (log_sum / count as f64).exp())
}
