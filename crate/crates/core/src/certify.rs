//! Closed-form constants and sufficient conditions for the Tseng-type QVI
//! scheme and flow.
//!
//! With `P = (1+θ)(1+λL)` the quantities reported here are
//!
//! ```text
//! θ = l + √(1 − 2λρ + λ²L²)
//! Λ = P − 2                        (flow rate, continuous_ok ⇔ Λ < 0)
//! μ = ½ − l²/2 − θ + l − λL − λLθ
//! r = 1 − 2μ + P²                  (squared per-step factor of the iteration)
//! discrete_ok ⇔ (P + 1)² < 4 − l² + 2l
//! ```
//!
//! Conditions are reported as data; nothing here gates the solvers.

use serde::{Deserialize, Serialize};

use crate::error::{QviError, Result};

/// Constants `(L, ρ, l, λ)` and, for moving sets `K(x) = m(x) + K`, the
/// Lipschitz constant `β` of the shift `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    #[serde(rename = "L")]
    pub lipschitz: f64,
    pub rho: f64,
    pub l: f64,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

impl ProblemConstants {
    pub fn new(lipschitz: f64, rho: f64, l: f64, lambda: f64) -> Result<Self> {
        let c = ProblemConstants {
            lipschitz,
            rho,
            l,
            lambda,
            beta: None,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn with_beta(mut self, beta: f64) -> Result<Self> {
        self.beta = Some(beta);
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.lipschitz) {
            return Err(QviError::invalid("L", "must be positive and finite"));
        }
        if !positive(self.rho) {
            return Err(QviError::invalid("rho", "must be positive and finite"));
        }
        if self.rho > self.lipschitz {
            return Err(QviError::invalid("rho", "rho exceeds L"));
        }
        if !(self.l >= 0.0 && self.l.is_finite()) {
            return Err(QviError::invalid("l", "must be nonnegative and finite"));
        }
        if !positive(self.lambda) {
            return Err(QviError::invalid("lambda", "must be positive and finite"));
        }
        if let Some(b) = self.beta {
            if !(b >= 0.0 && b.is_finite()) {
                return Err(QviError::invalid("beta", "must be nonnegative and finite"));
            }
        }
        Ok(())
    }

    pub fn gamma(&self) -> f64 {
        self.lipschitz / self.rho
    }

    /// `(1+θ)(1+λL)`, the factor compared against both right-hand sides.
    pub fn tseng_factor(&self) -> f64 {
        (1.0 + theta(self.lipschitz, self.rho, self.l, self.lambda)) * (1.0 + self.lambda * self.lipschitz)
    }
}

/// Named boolean outcomes of every sufficient condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateFlags {
    /// `l ≤ 1/(γ(γ + √(γ² − 1)))`
    pub existence_ok: bool,
    /// `l ≤ 1/γ`
    pub nesterov_ok: bool,
    /// `Λ < 0`
    pub continuous_ok: bool,
    /// `((1+θ)(1+λL) + 1)² < 4 − l² + 2l`
    pub discrete_ok: bool,
    /// Moving-set condition with `l = 2β`; false when no `β` is given.
    pub moving_ok: bool,
    pub radicand_ok: bool,
}

/// Every derived constant for one `(L, ρ, l, λ[, β])`. Serializes to a flat
/// JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub gamma: f64,
    pub theta: f64,
    pub radicand: f64,
    pub mu: f64,
    #[serde(rename = "Lambda")]
    pub lambda_rate: f64,
    pub rate_r: f64,
    pub existence_bound: f64,
    pub nesterov_bound: f64,
    /// `√(4 − l² + 2l) − 1`; `None` when `4 − l² + 2l < 0` (`l > 3`).
    pub discrete_rhs: Option<f64>,
    /// `2√(1 − β² + β) − 1`; `None` without `β` or when the root is imaginary.
    pub moving_rhs: Option<f64>,
    #[serde(flatten)]
    pub flags: CertificateFlags,
}

/// `1 − 2λρ + λ²L²`, evaluated as `(1 − λρ)² + λ²(L² − ρ²)`.
pub fn radicand(lipschitz: f64, rho: f64, lambda: f64) -> f64 {
    let a = 1.0 - lambda * rho;
    a * a + lambda * lambda * (lipschitz - rho) * (lipschitz + rho)
}

/// `θ = l + √(1 − 2λρ + λ²L²)`, the Lipschitz constant of
/// `x ↦ P_{K(x)}(x − λF(x))`.
pub fn theta(lipschitz: f64, rho: f64, l: f64, lambda: f64) -> f64 {
    let rad = radicand(lipschitz, rho, lambda);
    assert!(rad >= 0.0, "negative radicand {rad} (requires rho <= L)");
    l + rad.sqrt()
}

/// `(1/(γ(γ + √(γ² − 1))), 1/γ)`: the bounds on `l` guaranteeing existence
/// and uniqueness, and the weaker uniqueness-only bound.
pub fn existence_bounds(gamma: f64) -> Result<(f64, f64)> {
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(QviError::invalid("gamma", "must be finite and at least 1"));
    }
    let root = ((gamma - 1.0) * (gamma + 1.0)).sqrt();
    Ok((1.0 / (gamma * (gamma + root)), 1.0 / gamma))
}

/// `√(4 − l² + 2l) − 1`, or `None` for `l > 3`.
pub fn discrete_rhs(l: f64) -> Option<f64> {
    let delta = 4.0 - l * l + 2.0 * l;
    (delta >= 0.0).then(|| delta.sqrt() - 1.0)
}

/// `2√(1 − β² + β) − 1`, the discrete right-hand side at `l = 2β`.
pub fn moving_rhs(beta: f64) -> Option<f64> {
    let q = 1.0 - beta * beta + beta;
    (q >= 0.0).then(|| 2.0 * q.sqrt() - 1.0)
}

struct Core {
    theta: f64,
    mu: f64,
    lambda_rate: f64,
    rate_r: f64,
    discrete_ok: bool,
}

fn core_constants(lipschitz: f64, rho: f64, l: f64, lambda: f64) -> Core {
    let theta = theta(lipschitz, rho, l, lambda);
    let ll = lambda * lipschitz;
    let product = (1.0 + theta) * (1.0 + ll);
    let mu = 0.5 - 0.5 * l * l - theta + l - ll - ll * theta;
    let rate_r = 1.0 - 2.0 * mu + product * product;
    let delta = 4.0 - l * l + 2.0 * l;
    Core {
        theta,
        mu,
        lambda_rate: product - 2.0,
        rate_r,
        discrete_ok: (product + 1.0) * (product + 1.0) < delta,
    }
}

pub fn full_certificate(c: &ProblemConstants) -> Result<Certificate> {
    c.validate()?;
    let gamma = c.gamma();
    let (noor, nesterov) = existence_bounds(gamma)?;
    let rad = radicand(c.lipschitz, c.rho, c.lambda);
    let core = core_constants(c.lipschitz, c.rho, c.l, c.lambda);

    let (moving_rhs, moving_ok) = match c.beta {
        Some(beta) => {
            let moved = core_constants(c.lipschitz, c.rho, 2.0 * beta, c.lambda);
            (moving_rhs(beta), moved.discrete_ok)
        }
        None => (None, false),
    };

    Ok(Certificate {
        gamma,
        theta: core.theta,
        radicand: rad,
        mu: core.mu,
        lambda_rate: core.lambda_rate,
        rate_r: core.rate_r,
        existence_bound: noor,
        nesterov_bound: nesterov,
        discrete_rhs: discrete_rhs(c.l),
        moving_rhs,
        flags: CertificateFlags {
            existence_ok: c.l <= noor,
            nesterov_ok: c.l <= nesterov,
            continuous_ok: core.lambda_rate < 0.0,
            discrete_ok: core.discrete_ok,
            moving_ok,
            radicand_ok: rad >= 0.0,
        },
    })
}

/// Largest step scanned by [`best_lambda`]: ten times `2ρ/L²`.
pub fn lambda_scan_max(lipschitz: f64, rho: f64) -> f64 {
    20.0 * rho / (lipschitz * lipschitz)
}

/// Grid search for the step minimizing `rate_r`. The grid is logarithmic
/// over six decades ending at [`lambda_scan_max`]. When `rate_r ≥ 1`
/// everywhere the minimizer is still returned as a heuristic default.
pub fn best_lambda(lipschitz: f64, rho: f64, l: f64, grid: usize) -> Result<(f64, Certificate)> {
    if grid < 2 {
        return Err(QviError::invalid("grid", "needs at least 2 points"));
    }
    ProblemConstants::new(lipschitz, rho, l, 1.0)?;
    let hi = lambda_scan_max(lipschitz, rho);
    let mut best: Option<(f64, Certificate)> = None;
    for i in 0..grid {
        let frac = i as f64 / (grid - 1) as f64;
        let lambda = hi * 10f64.powf(-6.0 * (1.0 - frac));
        let cert = full_certificate(&ProblemConstants::new(lipschitz, rho, l, lambda)?)?;
        if best.as_ref().is_none_or(|(_, b)| cert.rate_r < b.rate_r) {
            best = Some((lambda, cert));
        }
    }
    Ok(best.expect("grid is nonempty"))
}
