//! Concrete QVI instances: the truncated ℓ² example, moving-set problems
//! `K(x) = m(x) + K`, single-set VIs and a seeded affine generator.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{QviError, Result};
use crate::problem::{ConstraintSpec, OperatorSpec, QviProblem};
use crate::sets::ConvexSet;
use crate::vector::Vector;

const CONTRACTION_MAX_ITER: usize = 100_000;

/// `P_{K(x)}(z)` for `K(x) = {y : y₀ ≥ x₀/10, y_k = 0 for k ≥ 1}`.
///
/// Three branches: `z` itself when `z ∈ K(x)`, otherwise `(x₀/10, 0, …)`
/// when `z₀ < x₀/10` and `(z₀, 0, …)` when `z₀ ≥ x₀/10`.
pub fn l2_projection(x: &Vector, z: &Vector) -> Vector {
    let floor = x[0] / 10.0;
    let tail_zero = z.iter().skip(1).all(|&v| v == 0.0);
    if tail_zero && z[0] >= floor {
        return z.clone();
    }
    let mut out = vec![0.0; z.dim()];
    out[0] = if z[0] < floor { floor } else { z[0] };
    Vector::from(out)
}

/// `F(x)_i = α·x_i + |sin x_i|`.
pub fn l2_operator(alpha: f64) -> Result<OperatorSpec> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(QviError::invalid("alpha", "must exceed 1"));
    }
    OperatorSpec::new(
        move |x: &Vector| x.map(|v| alpha * v + v.sin().abs()),
        alpha + 1.0,
        alpha - 1.0,
    )
}

/// The ℓ² example truncated to `n` coordinates, with `L = α+1`, `ρ = α−1`,
/// `l = 1/10` and solution `x* = 0`.
pub fn make_l2_example(n: usize, alpha: f64) -> Result<QviProblem> {
    let op = l2_operator(alpha)?;
    let k = ConstraintSpec::new(l2_projection, 0.1)?;
    QviProblem::new(format!("l2_example(n={n},alpha={alpha})"), n, op, k)?.with_known_solution(Vector::zeros(n))
}

/// Starting point `x⁰_k = 1/(2·3^k)` for the ℓ² convergence plot.
pub fn l2_initial_point(n: usize) -> Vector {
    Vector::from_fn(n, |k| 0.5 / 3f64.powi(k as i32))
}

type ShiftFn = dyn Fn(&Vector) -> Vector + Send + Sync;

/// A moving set `K(x) = m(x) + K` with `m` β-Lipschitz and `K` fixed.
#[derive(Clone)]
pub struct MovingSetSpec {
    shift: Arc<ShiftFn>,
    beta: f64,
    base: ConvexSet,
}

impl MovingSetSpec {
    pub fn new(shift: impl Fn(&Vector) -> Vector + Send + Sync + 'static, beta: f64, base: ConvexSet) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(QviError::invalid("beta", "must be nonnegative and finite"));
        }
        base.validate()?;
        Ok(MovingSetSpec {
            shift: Arc::new(shift),
            beta,
            base,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn base(&self) -> &ConvexSet {
        &self.base
    }

    pub fn shift(&self, x: &Vector) -> Vector {
        (self.shift)(x)
    }

    pub fn base_projection(&self, z: &Vector) -> Vector {
        self.base.project(z)
    }
}

impl fmt::Debug for MovingSetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MovingSetSpec")
            .field("beta", &self.beta)
            .field("base", &self.base)
            .finish_non_exhaustive()
    }
}

/// `P_{m(x)+K}(z) = m(x) + P_K(z − m(x))`.
pub fn moving_set_project(spec: &MovingSetSpec, x: &Vector, z: &Vector) -> Result<Vector> {
    let n = spec.base.dim();
    x.ensure_dim(n)?;
    z.ensure_dim(n)?;
    let m = spec.shift(x);
    m.ensure_dim(n)?;
    Ok(&m + &spec.base_projection(&(z - &m)))
}

/// Builds the QVI with `K(x) = m(x) + K`; the projection constant is `l = 2β`.
pub fn make_moving_set_problem(n: usize, operator: OperatorSpec, spec: MovingSetSpec) -> Result<QviProblem> {
    if spec.base.dim() != n {
        return Err(QviError::DimensionMismatch {
            expected: n,
            got: spec.base.dim(),
        });
    }
    let lip_l = 2.0 * spec.beta;
    let constraint = ConstraintSpec::new(
        move |x: &Vector, z: &Vector| {
            let m = spec.shift(x);
            &m + &spec.base_projection(&(z - &m))
        },
        lip_l,
    )?;
    QviProblem::new(
        format!("moving_set(n={n},beta={})", lip_l / 2.0),
        n,
        operator,
        constraint,
    )
}

/// A classical VI over a fixed set (`l = 0`).
pub fn make_single_set_vi(operator: OperatorSpec, set: ConvexSet) -> Result<QviProblem> {
    set.validate()?;
    let n = set.dim();
    let constraint = ConstraintSpec::new(move |_: &Vector, z: &Vector| set.project(z), 0.0)?;
    QviProblem::new(format!("single_set_vi(n={n})"), n, operator, constraint)
}

/// One-dimensional VI with `K = [1, ∞)` and `F(x) = x`; solution `x* = 1`.
pub fn halfline_vi() -> QviProblem {
    let op = OperatorSpec::new(|x: &Vector| x.clone(), 1.0, 1.0).expect("valid constants");
    let set = ConvexSet::new_box(vec![1.0], vec![f64::INFINITY]).expect("valid box");
    make_single_set_vi(op, set)
        .and_then(|p| p.with_known_solution(Vector::from(vec![1.0])))
        .expect("x* = 1 solves the half-line VI")
}

/// `F(x) = Ax + b`, with `ρ = λ_min((A + Aᵀ)/2)` and `L = σ_max(A)`.
pub fn affine_operator(a: DMatrix<f64>, b: Vec<f64>) -> Result<OperatorSpec> {
    if !a.is_square() || a.nrows() != b.len() || b.is_empty() {
        return Err(QviError::invalid(
            "operator",
            "matrix must be square and match the offset length",
        ));
    }
    if a.iter().chain(&b).any(|v| !v.is_finite()) {
        return Err(QviError::invalid("operator", "entries must be finite"));
    }
    let sym = (&a + a.transpose()) * 0.5;
    let rho = sym.symmetric_eigenvalues().min();
    let lipschitz = a.clone().singular_values().max();
    if rho <= 0.0 {
        return Err(QviError::invalid("operator", "matrix is not strongly monotone"));
    }
    let b = DVector::from_vec(b);
    OperatorSpec::new(
        move |x: &Vector| {
            let y = &a * DVector::from_column_slice(x.as_slice()) + &b;
            Vector::from(y.as_slice().to_vec())
        },
        lipschitz.max(rho),
        rho,
    )
}

fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    g.qr().q()
}

/// The matrix `A = ρI + (L−ρ)S` of [`make_affine_qvi`], exposed for checks.
pub fn affine_matrix(n: usize, seed: u64, rho: f64, lipschitz: f64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_orthogonal(n, &mut rng);
    let unit = Uniform::new_inclusive(0.0, 1.0).expect("valid range");
    let s = DMatrix::from_diagonal(&DVector::from_fn(n, |_, _| unit.sample(&mut rng)));
    let s = &q * s * q.transpose();
    // symmetrize away rounding so A is exactly symmetric
    let s = (&s + s.transpose()) * 0.5;
    DMatrix::identity(n, n) * rho + s * (lipschitz - rho)
}

/// Seeded affine QVI: `F(x) = Ax + b` with `A = ρI + (L−ρ)S` for a random
/// symmetric `0 ⪯ S ⪯ I`, and moving set `m(x) = β·Cx + K` where `C` is a
/// random orthogonal map and `K` a random ball. When `θ < 1` at `λ = ρ/L²`
/// the solution is computed by fixed-point iteration and attached.
pub fn make_affine_qvi(n: usize, seed: u64, rho_target: f64, lipschitz_target: f64, beta: f64) -> Result<QviProblem> {
    if n == 0 {
        return Err(QviError::invalid("n", "must be positive"));
    }
    if !(rho_target > 0.0 && rho_target.is_finite()) {
        return Err(QviError::invalid("rho", "must be positive and finite"));
    }
    if !(lipschitz_target.is_finite() && lipschitz_target >= rho_target) {
        return Err(QviError::invalid("L", "must be finite and at least rho"));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(QviError::invalid("beta", "must be nonnegative and finite"));
    }
    let a = affine_matrix(n, seed, rho_target, lipschitz_target);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let b = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let c = random_orthogonal(n, &mut rng);
    let center: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let radius = 0.5 + Uniform::new(0.0, 1.0).expect("valid range").sample(&mut rng);

    let operator = OperatorSpec::new(
        move |x: &Vector| {
            let y = &a * DVector::from_column_slice(x.as_slice()) + &b;
            Vector::from(y.as_slice().to_vec())
        },
        lipschitz_target,
        rho_target,
    )?;
    let spec = MovingSetSpec::new(
        move |x: &Vector| {
            let y = &c * DVector::from_column_slice(x.as_slice()) * beta;
            Vector::from(y.as_slice().to_vec())
        },
        beta,
        ConvexSet::new_ball(center, radius)?,
    )?;
    let problem = make_moving_set_problem(n, operator, spec)?;
    let name = format!("affine(n={n},seed={seed},rho={rho_target},L={lipschitz_target},beta={beta})");
    attach_contraction_solution(rename(problem, name))
}

fn rename(p: QviProblem, name: String) -> QviProblem {
    let (op, k) = (p.operator().clone(), p.constraint().clone());
    QviProblem::new(name, p.dim(), op, k).expect("dimension already validated")
}

/// Attaches a fixed-point solution when the projection map is a contraction.
pub fn attach_contraction_solution(problem: QviProblem) -> Result<QviProblem> {
    if problem.known_solution().is_some() {
        return Ok(problem);
    }
    let x0 = Vector::zeros(problem.dim());
    match problem.solve_by_contraction(&x0, CONTRACTION_MAX_ITER)? {
        Some(x_star) => problem.with_known_solution(x_star),
        None => Ok(problem),
    }
}

/// Box example: `F(x) = x`, `m(x) = 0.1x`, `K = [−1, 1]ⁿ`, solution `x* = 0`.
pub fn moving_box_example(n: usize) -> Result<QviProblem> {
    let op = OperatorSpec::new(|x: &Vector| x.clone(), 1.0, 1.0)?;
    let spec = MovingSetSpec::new(|x: &Vector| 0.1 * x, 0.1, ConvexSet::cube(n, -1.0, 1.0)?)?;
    make_moving_set_problem(n, op, spec)?.with_known_solution(Vector::zeros(n))
}

/// The problems every sampled inequality and solver property is run on.
pub fn registry() -> Vec<QviProblem> {
    vec![
        make_l2_example(50, 2.0).expect("valid"),
        halfline_vi(),
        moving_box_example(4).expect("valid"),
        make_affine_qvi(5, 1, 1.0, 2.0, 0.05).expect("valid"),
        make_affine_qvi(10, 2, 0.5, 1.5, 0.0).expect("valid"),
    ]
}

/// `F(x) = Ax + b` given either a full `matrix` or a scalar `scale`
/// (`A = scale·I`); the dimension is the length of `offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    pub offset: Vec<f64>,
}

impl AffineSpec {
    pub fn build(&self) -> Result<OperatorSpec> {
        let n = self.offset.len();
        let a = match (&self.matrix, self.scale) {
            (Some(_), Some(_)) => return Err(QviError::invalid("operator", "give either matrix or scale, not both")),
            (Some(rows), None) => {
                if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                    return Err(QviError::invalid(
                        "operator",
                        "matrix must be n x n with n = offset length",
                    ));
                }
                DMatrix::from_fn(n, n, |i, j| rows[i][j])
            }
            (None, s) => DMatrix::identity(n, n) * s.unwrap_or(1.0),
        };
        affine_operator(a, self.offset.clone())
    }
}

/// Shift `m(x) = scale·x + offset`, so `β = |scale|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSpec {
    pub scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<Vec<f64>>,
}

/// JSON problem descriptor, tagged by `family`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemDescriptor {
    L2Example {
        #[serde(default = "default_n")]
        n: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    MovingSet {
        operator: AffineSpec,
        shift: ShiftSpec,
        base: ConvexSet,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        known_solution: Option<Vec<f64>>,
    },
    Affine {
        n: usize,
        seed: u64,
        rho: f64,
        #[serde(rename = "L")]
        lipschitz: f64,
        #[serde(default)]
        beta: f64,
    },
    SingleSetVi {
        operator: AffineSpec,
        base: ConvexSet,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        known_solution: Option<Vec<f64>>,
    },
}

fn default_n() -> usize {
    50
}

fn default_alpha() -> f64 {
    2.0
}

impl ProblemDescriptor {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| QviError::invalid("problem", e.to_string()))
    }

    pub fn build(&self) -> Result<QviProblem> {
        match self {
            ProblemDescriptor::L2Example { n, alpha } => {
                if *n == 0 {
                    return Err(QviError::invalid("n", "must be positive"));
                }
                make_l2_example(*n, *alpha)
            }
            ProblemDescriptor::Affine {
                n,
                seed,
                rho,
                lipschitz,
                beta,
            } => make_affine_qvi(*n, *seed, *rho, *lipschitz, *beta),
            ProblemDescriptor::MovingSet {
                operator,
                shift,
                base,
                known_solution,
            } => {
                let op = operator.build()?;
                let n = operator.offset.len();
                let base = base.clone().resolve_unbounded();
                let offset = match &shift.offset {
                    Some(o) if o.len() != n => {
                        return Err(QviError::DimensionMismatch {
                            expected: n,
                            got: o.len(),
                        })
                    }
                    Some(o) => Vector::from(o.clone()),
                    None => Vector::zeros(n),
                };
                let scale = shift.scale;
                if !scale.is_finite() {
                    return Err(QviError::invalid("shift", "scale must be finite"));
                }
                let spec = MovingSetSpec::new(move |x: &Vector| offset.axpy(scale, x), scale.abs(), base)?;
                finish(make_moving_set_problem(n, op, spec)?, known_solution)
            }
            ProblemDescriptor::SingleSetVi {
                operator,
                base,
                known_solution,
            } => {
                let op = operator.build()?;
                let base = base.clone().resolve_unbounded();
                if base.dim() != operator.offset.len() {
                    return Err(QviError::DimensionMismatch {
                        expected: operator.offset.len(),
                        got: base.dim(),
                    });
                }
                finish(make_single_set_vi(op, base)?, known_solution)
            }
        }
    }

    /// Default starting point: the plotted point for the ℓ² example, ones otherwise.
    pub fn default_initial_point(&self, dim: usize) -> Vector {
        match self {
            ProblemDescriptor::L2Example { .. } => l2_initial_point(dim),
            _ => Vector::from(vec![1.0; dim]),
        }
    }
}

fn finish(problem: QviProblem, known: &Option<Vec<f64>>) -> Result<QviProblem> {
    match known {
        Some(x) => problem.with_known_solution(Vector::new(x.clone())?),
        None => attach_contraction_solution(problem),
    }
}
