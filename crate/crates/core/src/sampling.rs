//! Sampling validators for declared constants and the inequality chain
//! behind the convergence analysis. Violations are reported as counts so
//! tests can assert on them; nothing here is used by the solvers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::certify;
use crate::error::Result;
use crate::problem::QviProblem;
use crate::vector::Vector;

/// Gaussian vector with a scale drawn from {1e-3, 1e-1, 1, 10}, shifted
/// around `center` when given.
pub fn random_point(rng: &mut ChaCha8Rng, n: usize, center: Option<&Vector>) -> Vector {
    const SCALES: [f64; 4] = [1e-3, 1e-1, 1.0, 10.0];
    let scale = SCALES[rng.random_range(0..SCALES.len())];
    let v = Vector::from_fn(n, |_| scale * rng.sample::<f64, _>(StandardNormal));
    match center {
        Some(c) => &v + c,
        None => v,
    }
}

/// Samples a close pair when `near` so local constants are exercised too.
fn random_pair(rng: &mut ChaCha8Rng, n: usize, center: Option<&Vector>) -> (Vector, Vector) {
    let x = random_point(rng, n, center);
    let y = if rng.random_bool(0.3) {
        &x + &random_point(rng, n, None).map(|v| v * 1e-3)
    } else {
        random_point(rng, n, center)
    };
    (x, y)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OperatorCheck {
    pub samples: usize,
    pub lipschitz_violations: usize,
    pub monotone_violations: usize,
    /// Largest observed `‖F(x)−F(y)‖/‖x−y‖`.
    pub max_lipschitz_ratio: f64,
    /// Smallest observed `⟨x−y, F(x)−F(y)⟩/‖x−y‖²`.
    pub min_monotone_ratio: f64,
}

/// Checks `‖F(x)−F(y)‖ ≤ L‖x−y‖` and `⟨x−y, F(x)−F(y)⟩ ≥ ρ‖x−y‖²` with
/// relative slack `rel`.
pub fn check_operator(problem: &QviProblem, samples: usize, seed: u64, rel: f64) -> Result<OperatorCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (l_op, rho, _) = problem.constants();
    let center = problem.known_solution();
    let mut out = OperatorCheck {
        samples,
        max_lipschitz_ratio: 0.0,
        min_monotone_ratio: f64::INFINITY,
        ..Default::default()
    };
    for _ in 0..samples {
        let (x, y) = random_pair(&mut rng, problem.dim(), center);
        let d = &x - &y;
        let dn = d.norm();
        if dn == 0.0 {
            continue;
        }
        let df = &problem.evaluate_operator(&x)? - &problem.evaluate_operator(&y)?;
        let lip = df.norm() / dn;
        let mon = d.dot(&df) / (dn * dn);
        out.max_lipschitz_ratio = out.max_lipschitz_ratio.max(lip);
        out.min_monotone_ratio = out.min_monotone_ratio.min(mon);
        if lip > l_op * (1.0 + rel) {
            out.lipschitz_violations += 1;
        }
        if mon < rho * (1.0 - rel) {
            out.monotone_violations += 1;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConstraintCheck {
    pub samples: usize,
    pub idempotence_violations: usize,
    pub nonexpansive_violations: usize,
    pub parametric_violations: usize,
    /// Violations of `⟨z − p, w − p⟩ ≤ tol` for members `w ∈ K(x)`.
    pub characterization_violations: usize,
    /// Largest observed `‖P_{K(x)}(z) − P_{K(y)}(z)‖ / ‖x−y‖`.
    pub max_parametric_ratio: f64,
}

/// Checks idempotence, nonexpansiveness in `z`, the variational
/// characterization of the projection and the parametric bound with the
/// declared `l`, each to absolute tolerance `tol`.
pub fn check_constraint(problem: &QviProblem, samples: usize, seed: u64, tol: f64) -> Result<ConstraintCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = problem.dim();
    let l = problem.constraint().lip_l();
    let center = problem.known_solution();
    let mut out = ConstraintCheck {
        samples,
        ..Default::default()
    };
    for _ in 0..samples {
        let (x, y) = random_pair(&mut rng, n, center);
        let (u, v) = random_pair(&mut rng, n, center);

        let p = problem.project(&x, &u)?;
        let pp = problem.project(&x, &p)?;
        if pp.dist(&p) > tol * (1.0 + p.norm()) {
            out.idempotence_violations += 1;
        }

        let q = problem.project(&x, &v)?;
        if p.dist(&q) > u.dist(&v) + tol {
            out.nonexpansive_violations += 1;
        }

        let member = problem.project(&x, &random_point(&mut rng, n, center))?;
        let lhs = (&u - &p).dot(&(&member - &p));
        if lhs > tol * (1.0 + u.norm() * member.norm()) {
            out.characterization_violations += 1;
        }

        let py = problem.project(&y, &u)?;
        let dxy = x.dist(&y);
        let gap = p.dist(&py);
        if dxy > 0.0 {
            out.max_parametric_ratio = out.max_parametric_ratio.max(gap / dxy);
        }
        if gap > l * dxy + tol {
            out.parametric_violations += 1;
        }
    }
    Ok(out)
}

/// Violation counts of the sampled inequality chain at a fixed `λ`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InequalityCheck {
    pub samples: usize,
    /// `‖P_{K(x)}(x−λF(x)) − P_{K(y)}(y−λF(y))‖ ≤ θ‖x−y‖`
    pub contraction: usize,
    /// `‖(x−λF(x)) − (y−λF(y))‖ ≤ √(1−2λρ+λ²L²)·‖x−y‖`
    pub step_operator: usize,
    /// `‖f(x) − f(y)‖ ≤ (1+λL)(1+θ)‖x−y‖`
    pub field_lipschitz: usize,
    /// `‖x − y − λ(F(x)−F(y))‖ ≤ (1+θ)(1+λL)‖x−x*‖`, with `y` the
    /// forward-backward point; only counted when `x*` is known.
    pub residual_bound: usize,
    /// `‖P_{K(x)}(z) − P_{K(y)}(z)‖ ≤ l‖x−y‖`
    pub parametric: usize,
    pub residual_checked: bool,
}

impl InequalityCheck {
    pub fn total(&self) -> usize {
        self.contraction + self.step_operator + self.field_lipschitz + self.residual_bound + self.parametric
    }
}

/// Runs every inequality on `samples` random pairs with absolute `slack`.
/// `l_override` replaces the declared `l` for the parametric check.
pub fn check_inequalities(
    problem: &QviProblem,
    lambda: f64,
    samples: usize,
    seed: u64,
    slack: f64,
    l_override: Option<f64>,
) -> Result<InequalityCheck> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = problem.dim();
    let (l_op, rho, l) = problem.constants();
    let theta = certify::theta(l_op, rho, l, lambda);
    let step_factor = certify::radicand(l_op, rho, lambda).sqrt();
    let field_factor = (1.0 + lambda * l_op) * (1.0 + theta);
    let l_param = l_override.unwrap_or(l);
    let x_star = problem.known_solution();

    let mut out = InequalityCheck {
        samples,
        residual_checked: x_star.is_some(),
        ..Default::default()
    };
    for _ in 0..samples {
        let (x, y) = random_pair(&mut rng, n, x_star);
        let d = x.dist(&y);

        let (fx, px) = problem.forward_backward(&x, lambda)?;
        let (fy, py) = problem.forward_backward(&y, lambda)?;
        if px.dist(&py) > theta * d + slack {
            out.contraction += 1;
        }

        let sx = x.axpy(-lambda, &fx);
        let sy = y.axpy(-lambda, &fy);
        if sx.dist(&sy) > step_factor * d + slack {
            out.step_operator += 1;
        }

        let field_x = problem.tseng_map(&x, lambda)?;
        let field_y = problem.tseng_map(&y, lambda)?;
        if field_x.dist(&field_y) > field_factor * d + slack {
            out.field_lipschitz += 1;
        }

        if let Some(star) = x_star {
            let fpx = problem.evaluate_operator(&px)?;
            let lhs = (&(&x - &px) - &(lambda * &(&fx - &fpx))).norm();
            if lhs > field_factor * x.dist(star) + slack {
                out.residual_bound += 1;
            }
        }

        let z = random_point(&mut rng, n, x_star);
        let gap = problem.project(&x, &z)?.dist(&problem.project(&y, &z)?);
        if gap > l_param * d + slack {
            out.parametric += 1;
        }
    }
    Ok(out)
}
