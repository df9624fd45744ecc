//! Continuous-time Tseng dynamics `ẋ = α(t)·f(x)` with
//! `f(x) = y + λ(F(x) − F(y)) − x`, `y = P_{K(x)}(x − λF(x))`, integrated
//! with fixed-step explicit Euler or classical RK4.

use serde::{Deserialize, Serialize};

use crate::certify::{self, ProblemConstants};
use crate::error::{QviError, Result};
use crate::problem::{check_lambda, QviProblem};
use crate::solvers::DIVERGENCE_NORM;
use crate::vector::Vector;

/// Relative slack allowed above the exponential envelope.
pub const ENVELOPE_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    Rk4,
}

/// Time scaling `α(t) ≥ 0`. A piecewise table lists `(t_start, value)`
/// pairs, starts at `t = 0` and is right-continuous. The divergence of
/// `∫α` is not checked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeScaling {
    Constant(f64),
    Piecewise(Vec<(f64, f64)>),
}

impl TimeScaling {
    pub fn validate(&self) -> Result<()> {
        let ok_value = |v: f64| v >= 0.0 && v.is_finite();
        match self {
            TimeScaling::Constant(a) if ok_value(*a) => Ok(()),
            TimeScaling::Constant(_) => Err(QviError::invalid("alpha", "must be nonnegative and finite")),
            TimeScaling::Piecewise(table) => {
                if table.first().map(|e| e.0) != Some(0.0) {
                    return Err(QviError::invalid("alpha", "table must start at t = 0"));
                }
                if table.iter().any(|&(t, v)| !t.is_finite() || !ok_value(v)) {
                    return Err(QviError::invalid("alpha", "values must be nonnegative and finite"));
                }
                if table.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(QviError::invalid("alpha", "breakpoints must increase strictly"));
                }
                Ok(())
            }
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            TimeScaling::Constant(a) => *a,
            TimeScaling::Piecewise(table) => {
                let idx = table.partition_point(|&(start, _)| start <= t);
                table[idx.saturating_sub(1)].1
            }
        }
    }

    /// `∫₀ᵗ α(s) ds`.
    pub fn integral(&self, t: f64) -> f64 {
        match self {
            TimeScaling::Constant(a) => a * t,
            TimeScaling::Piecewise(table) => {
                let mut total = 0.0;
                for (i, &(start, value)) in table.iter().enumerate() {
                    if start >= t {
                        break;
                    }
                    let end = table.get(i + 1).map_or(t, |e| e.0.min(t));
                    total += value * (end - start);
                }
                total
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub lambda: f64,
    pub h: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<TimeScaling>,
}

impl FlowConfig {
    pub fn new(lambda: f64, h: f64, t_end: f64, scheme: Scheme) -> Result<Self> {
        let c = FlowConfig {
            lambda,
            h,
            t_end,
            scheme,
            alpha: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_alpha(mut self, alpha: TimeScaling) -> Result<Self> {
        self.alpha = Some(alpha);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        check_lambda(self.lambda)?;
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(QviError::invalid("t_end", "must be positive and finite"));
        }
        if !(self.h > 0.0 && self.h <= self.t_end) {
            return Err(QviError::invalid("h", "must satisfy 0 < h <= t_end"));
        }
        if let Some(a) = &self.alpha {
            a.validate()?;
        }
        Ok(())
    }

    /// Sample times `0 = t_0 < … < t_n = t_end` spaced by `h` (the last
    /// interval may be shorter).
    pub fn times(&self) -> Vec<f64> {
        let n = ((self.t_end / self.h) - 1e-9).ceil().max(1.0) as usize;
        (0..=n)
            .map(|k| if k == n { self.t_end } else { k as f64 * self.h })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSample {
    pub t: f64,
    pub x: Vector,
    /// Lyapunov value `½‖x − x*‖²`.
    pub v: Option<f64>,
    /// `V₀·exp(Λ·∫₀ᵗ α)`.
    pub envelope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrace {
    pub samples: Vec<FlowSample>,
    /// `Λ = (1+λL)(1+θ) − 2` for the configured step.
    pub lambda_rate: f64,
}

/// `α(t)·f(x)`; `α ≡ 1` when absent.
pub fn rhs(problem: &QviProblem, x: &Vector, lambda: f64, t: f64, alpha: Option<&TimeScaling>) -> Result<Vector> {
    let f = problem.tseng_map(x, lambda)?;
    Ok(match alpha {
        Some(a) => a.value(t) * &f,
        None => f,
    })
}

fn lyapunov(x: &Vector, x_star: Option<&Vector>) -> Option<f64> {
    x_star.map(|s| {
        let d = x.dist(s);
        0.5 * d * d
    })
}

pub fn integrate(problem: &QviProblem, x0: &Vector, config: &FlowConfig) -> Result<FlowTrace> {
    config.validate()?;
    x0.ensure_dim(problem.dim())?;
    x0.ensure_finite("x0")?;
    let (l_op, rho, l) = problem.constants();
    let lambda = config.lambda;
    let lambda_rate = ProblemConstants::new(l_op, rho, l, lambda)?.tseng_factor() - 2.0;
    let alpha = config.alpha.as_ref();
    let x_star = problem.known_solution();
    let v0 = lyapunov(x0, x_star);
    let exponent = |t: f64| lambda_rate * alpha.map_or(t, |a| a.integral(t));

    let f = |t: f64, x: &Vector| rhs(problem, x, lambda, t, alpha);
    let times = config.times();
    let mut samples = Vec::with_capacity(times.len());
    let mut x = x0.clone();
    for (i, &t) in times.iter().enumerate() {
        if i > 0 {
            let t0 = times[i - 1];
            let h = t - t0;
            x = match config.scheme {
                Scheme::Euler => x.axpy(h, &f(t0, &x)?),
                Scheme::Rk4 => {
                    let k1 = f(t0, &x)?;
                    let k2 = f(t0 + h / 2.0, &x.axpy(h / 2.0, &k1))?;
                    let k3 = f(t0 + h / 2.0, &x.axpy(h / 2.0, &k2))?;
                    let k4 = f(t, &x.axpy(h, &k3))?;
                    let incr = k1.axpy(2.0, &k2).axpy(2.0, &k3).axpy(1.0, &k4);
                    x.axpy(h / 6.0, &incr)
                }
            };
            x.ensure_finite("flow state")?;
            if x.norm() > DIVERGENCE_NORM {
                return Err(QviError::NumericFailure(format!(
                    "state norm exceeded {DIVERGENCE_NORM:e} at t={t}"
                )));
            }
        }
        samples.push(FlowSample {
            t,
            v: lyapunov(&x, x_star),
            envelope: v0.map(|v0| v0 * exponent(t).exp()),
            x: x.clone(),
        });
    }
    Ok(FlowTrace { samples, lambda_rate })
}

/// Outcome of comparing `V(t)` against the exponential envelope.
#[derive(Debug, Clone, PartialEq)]
pub enum EnvelopeCheck {
    /// `Λ ≥ 0`: the envelope is not a convergence guarantee, nothing to check.
    Skipped {
        lambda_rate: f64,
    },
    /// No known solution, so `V` is unavailable.
    NoSolution,
    Held,
    Violated {
        t: f64,
        v: f64,
        envelope: f64,
    },
}

impl EnvelopeCheck {
    pub fn describe(&self) -> String {
        match self {
            EnvelopeCheck::Skipped { lambda_rate } => {
                format!("condition infeasible: Lambda = {lambda_rate} >= 0, envelope check skipped")
            }
            EnvelopeCheck::NoSolution => "no known solution, envelope check skipped".into(),
            EnvelopeCheck::Held => "V(t) stayed below the envelope".into(),
            EnvelopeCheck::Violated { t, v, envelope } => {
                format!("V({t}) = {v} exceeds envelope {envelope}")
            }
        }
    }
}

pub fn check_envelope(trace: &FlowTrace) -> EnvelopeCheck {
    if trace.lambda_rate >= 0.0 {
        return EnvelopeCheck::Skipped {
            lambda_rate: trace.lambda_rate,
        };
    }
    for s in &trace.samples {
        match (s.v, s.envelope) {
            (Some(v), Some(env)) if v > env * (1.0 + ENVELOPE_SLACK) => {
                return EnvelopeCheck::Violated {
                    t: s.t,
                    v,
                    envelope: env,
                }
            }
            (Some(_), Some(_)) => {}
            _ => return EnvelopeCheck::NoSolution,
        }
    }
    EnvelopeCheck::Held
}

/// `θ` for the flow configuration, handy for reports.
pub fn flow_theta(problem: &QviProblem, lambda: f64) -> f64 {
    let (l_op, rho, l) = problem.constants();
    certify::theta(l_op, rho, l, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::halfline_vi;

    #[test]
    fn rhs_examples() {
        let p = halfline_vi();
        let x = Vector::from(vec![2.0]);
        assert!((rhs(&p, &x, 0.1, 0.0, None).unwrap()[0] + 0.18).abs() < 1e-15);
        let two = TimeScaling::Constant(2.0);
        assert!((rhs(&p, &x, 0.1, 0.0, Some(&two)).unwrap()[0] + 0.36).abs() < 1e-15);
        assert_eq!(rhs(&p, &Vector::from(vec![1.0]), 0.1, 0.0, None).unwrap()[0], 0.0);
    }

    #[test]
    fn one_euler_step() {
        let p = halfline_vi();
        let cfg = FlowConfig::new(0.1, 0.5, 0.5, Scheme::Euler).unwrap();
        let tr = integrate(&p, &Vector::from(vec![2.0]), &cfg).unwrap();
        assert_eq!(tr.samples.len(), 2);
        assert!((tr.samples[1].x[0] - 1.91).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_is_constant() {
        let p = halfline_vi();
        for scheme in [Scheme::Euler, Scheme::Rk4] {
            let cfg = FlowConfig::new(0.1, 0.1, 2.0, scheme).unwrap();
            let tr = integrate(&p, &Vector::from(vec![1.0]), &cfg).unwrap();
            assert!(tr.samples.iter().all(|s| s.x[0] == 1.0 && s.v == Some(0.0)));
        }
    }

    #[test]
    fn times_cover_interval() {
        let cfg = FlowConfig::new(0.1, 0.3, 1.0, Scheme::Euler).unwrap();
        assert_eq!(cfg.times(), vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
        let cfg = FlowConfig::new(0.1, 0.1, 1.0, Scheme::Euler).unwrap();
        assert_eq!(cfg.times().len(), 11);
        assert_eq!(*cfg.times().last().unwrap(), 1.0);
        assert!(FlowConfig::new(0.1, 2.0, 1.0, Scheme::Euler).is_err());
    }

    #[test]
    fn piecewise_scaling() {
        let a = TimeScaling::Piecewise(vec![(0.0, 1.0), (1.0, 3.0)]);
        a.validate().unwrap();
        assert_eq!(a.value(0.5), 1.0);
        assert_eq!(a.value(1.0), 3.0);
        assert_eq!(a.integral(0.5), 0.5);
        assert_eq!(a.integral(2.0), 4.0);
        assert!(TimeScaling::Piecewise(vec![(0.5, 1.0)]).validate().is_err());
        assert!(TimeScaling::Piecewise(vec![(0.0, 1.0), (0.0, 2.0)]).validate().is_err());
        assert!(TimeScaling::Constant(-1.0).validate().is_err());
    }

    #[test]
    fn envelope_skips_when_rate_nonnegative() {
        let p = halfline_vi();
        let cfg = FlowConfig::new(0.1, 0.1, 1.0, Scheme::Rk4).unwrap();
        let tr = integrate(&p, &Vector::from(vec![2.0]), &cfg).unwrap();
        assert!(tr.lambda_rate >= 0.0);
        let check = check_envelope(&tr);
        assert!(matches!(check, EnvelopeCheck::Skipped { .. }));
        assert!(check.describe().starts_with("condition infeasible"));
    }

    #[test]
    fn envelope_check_evaluates_supplied_negative_rate() {
        let sample = |t: f64, v: f64| FlowSample {
            t,
            x: Vector::zeros(1),
            v: Some(v),
            envelope: Some((-t).exp()),
        };
        let held = FlowTrace {
            samples: vec![sample(0.0, 1.0), sample(1.0, 0.3)],
            lambda_rate: -1.0,
        };
        assert_eq!(check_envelope(&held), EnvelopeCheck::Held);
        let broken = FlowTrace {
            samples: vec![sample(0.0, 1.0), sample(1.0, 0.5)],
            lambda_rate: -1.0,
        };
        assert!(matches!(check_envelope(&broken), EnvelopeCheck::Violated { .. }));
    }
}
