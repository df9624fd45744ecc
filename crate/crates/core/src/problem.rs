//! The QVI problem abstraction: an operator oracle `F`, a parametric
//! projection oracle `(x, z) ↦ P_{K(x)}(z)`, and the quantities built from
//! them (natural residual and the Tseng vector field).

use std::fmt;
use std::sync::Arc;

use crate::certify;
use crate::error::{QviError, Result};
use crate::vector::Vector;

/// Residual threshold a declared solution must meet at `λ = 0.1`.
pub const KNOWN_SOLUTION_TOL: f64 = 1e-9;

type OperatorFn = dyn Fn(&Vector) -> Vector + Send + Sync;
type ProjectionFn = dyn Fn(&Vector, &Vector) -> Vector + Send + Sync;

/// A single-valued operator `F` with declared Lipschitz constant `L` and
/// strong monotonicity modulus `ρ`.
#[derive(Clone)]
pub struct OperatorSpec {
    eval: Arc<OperatorFn>,
    lipschitz_l: f64,
    strong_rho: f64,
}

impl OperatorSpec {
    pub fn new(
        eval: impl Fn(&Vector) -> Vector + Send + Sync + 'static,
        lipschitz_l: f64,
        strong_rho: f64,
    ) -> Result<Self> {
        if !(strong_rho > 0.0 && strong_rho.is_finite()) {
            return Err(QviError::invalid("rho", "must be positive and finite"));
        }
        if !(lipschitz_l > 0.0 && lipschitz_l.is_finite()) {
            return Err(QviError::invalid("L", "must be positive and finite"));
        }
        if strong_rho > lipschitz_l {
            return Err(QviError::invalid("rho", "rho exceeds L"));
        }
        Ok(OperatorSpec {
            eval: Arc::new(eval),
            lipschitz_l,
            strong_rho,
        })
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz_l
    }

    pub fn strong_monotonicity(&self) -> f64 {
        self.strong_rho
    }

    /// Raw oracle call, no validation.
    pub fn call(&self, x: &Vector) -> Vector {
        (self.eval)(x)
    }
}

impl fmt::Debug for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorSpec")
            .field("lipschitz_l", &self.lipschitz_l)
            .field("strong_rho", &self.strong_rho)
            .finish_non_exhaustive()
    }
}

/// The constraint map `K` given through its projection, with the constant
/// `l` of `‖P_{K(x)}(z) − P_{K(y)}(z)‖ ≤ l‖x − y‖`.
#[derive(Clone)]
pub struct ConstraintSpec {
    project: Arc<ProjectionFn>,
    lip_l: f64,
}

impl ConstraintSpec {
    pub fn new(project: impl Fn(&Vector, &Vector) -> Vector + Send + Sync + 'static, lip_l: f64) -> Result<Self> {
        if !(lip_l >= 0.0 && lip_l.is_finite()) {
            return Err(QviError::invalid("l", "must be nonnegative and finite"));
        }
        Ok(ConstraintSpec {
            project: Arc::new(project),
            lip_l,
        })
    }

    pub fn lip_l(&self) -> f64 {
        self.lip_l
    }

    /// Raw oracle call: `P_{K(x)}(z)`.
    pub fn call(&self, x: &Vector, z: &Vector) -> Vector {
        (self.project)(x, z)
    }
}

impl fmt::Debug for ConstraintSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ConstraintSpec")
            .field("lip_l", &self.lip_l)
            .finish_non_exhaustive()
    }
}

/// Find `x* ∈ K(x*)` with `⟨F(x*), y − x*⟩ ≥ 0` for all `y ∈ K(x*)`.
#[derive(Debug, Clone)]
pub struct QviProblem {
    name: String,
    dim: usize,
    operator: OperatorSpec,
    constraint: ConstraintSpec,
    known_solution: Option<Vector>,
}

impl QviProblem {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        operator: OperatorSpec,
        constraint: ConstraintSpec,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(QviError::invalid("dimension", "must be positive"));
        }
        Ok(QviProblem {
            name: name.into(),
            dim,
            operator,
            constraint,
            known_solution: None,
        })
    }

    /// Attaches a solution after checking its natural residual at `λ = 0.1`.
    pub fn with_known_solution(mut self, x_star: Vector) -> Result<Self> {
        x_star.ensure_dim(self.dim)?;
        x_star.ensure_finite("known solution")?;
        let r = self.natural_residual(&x_star, 0.1)?;
        if r > KNOWN_SOLUTION_TOL {
            return Err(QviError::invalid(
                "known_solution",
                format!("natural residual {r:e} exceeds {KNOWN_SOLUTION_TOL:e}"),
            ));
        }
        self.known_solution = Some(x_star);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn operator(&self) -> &OperatorSpec {
        &self.operator
    }

    pub fn constraint(&self) -> &ConstraintSpec {
        &self.constraint
    }

    pub fn known_solution(&self) -> Option<&Vector> {
        self.known_solution.as_ref()
    }

    /// Declared `(L, ρ, l)`.
    pub fn constants(&self) -> (f64, f64, f64) {
        (
            self.operator.lipschitz_l,
            self.operator.strong_rho,
            self.constraint.lip_l,
        )
    }

    pub fn evaluate_operator(&self, x: &Vector) -> Result<Vector> {
        x.ensure_dim(self.dim)?;
        let fx = self.operator.call(x);
        fx.ensure_dim(self.dim)?;
        fx.ensure_finite("operator")?;
        Ok(fx)
    }

    pub fn project(&self, x: &Vector, z: &Vector) -> Result<Vector> {
        x.ensure_dim(self.dim)?;
        z.ensure_dim(self.dim)?;
        let p = self.constraint.call(x, z);
        p.ensure_dim(self.dim)?;
        p.ensure_finite("projection")?;
        Ok(p)
    }

    /// `P_{K(x)}(x − λF(x))`, returning `(F(x), y)` so callers can reuse `F(x)`.
    pub fn forward_backward(&self, x: &Vector, lambda: f64) -> Result<(Vector, Vector)> {
        let fx = self.evaluate_operator(x)?;
        let y = self.project(x, &x.axpy(-lambda, &fx))?;
        Ok((fx, y))
    }

    /// `‖x − P_{K(x)}(x − λF(x))‖`, zero exactly at solutions.
    pub fn natural_residual(&self, x: &Vector, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        let (_, y) = self.forward_backward(x, lambda)?;
        Ok(x.dist(&y))
    }

    /// The Tseng vector field `f(x) = y + λ(F(x) − F(y)) − x` with
    /// `y = P_{K(x)}(x − λF(x))`. One projection, two operator calls.
    pub fn tseng_map(&self, x: &Vector, lambda: f64) -> Result<Vector> {
        check_lambda(lambda)?;
        let (fx, y) = self.forward_backward(x, lambda)?;
        let fy = self.evaluate_operator(&y)?;
        let correction = &fx - &fy;
        Ok(&y.axpy(lambda, &correction) - x)
    }

    /// Approximates the solution by iterating `x ↦ P_{K(x)}(x − λF(x))` at
    /// `λ = ρ/L²`, which is a contraction with factor `θ` whenever `θ < 1`.
    /// Returns `None` when `θ ≥ 1` or the iteration stalls.
    pub fn solve_by_contraction(&self, x0: &Vector, max_iter: usize) -> Result<Option<Vector>> {
        let (l_op, rho, l) = self.constants();
        let lambda = rho / (l_op * l_op);
        let theta = certify::theta(l_op, rho, l, lambda);
        if theta >= 1.0 {
            return Ok(None);
        }
        let mut x = x0.clone();
        for _ in 0..max_iter {
            let (_, next) = self.forward_backward(&x, lambda)?;
            let step = next.dist(&x);
            x = next;
            // a posteriori bound ‖x − x*‖ ≤ θ/(1−θ)·step
            if step * theta / (1.0 - theta) <= 1e-14 * (1.0 + x.norm()) {
                return Ok(Some(x));
            }
        }
        Ok(None)
    }
}

pub(crate) fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(QviError::invalid("lambda", "must be positive and finite"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// K = [1, ∞), F(x) = x in one dimension.
    fn halfline() -> QviProblem {
        let op = OperatorSpec::new(|x: &Vector| x.clone(), 1.0, 1.0).unwrap();
        let k = ConstraintSpec::new(|_: &Vector, z: &Vector| z.map(|v| v.max(1.0)), 0.0).unwrap();
        QviProblem::new("halfline", 1, op, k).unwrap()
    }

    #[test]
    fn residual_examples() {
        let p = halfline();
        let r1 = p.natural_residual(&Vector::from(vec![1.0]), 0.1).unwrap();
        assert_eq!(r1, 0.0);
        let r2 = p.natural_residual(&Vector::from(vec![2.0]), 0.1).unwrap();
        assert!((r2 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn tseng_map_example() {
        let p = halfline();
        let f = p.tseng_map(&Vector::from(vec![2.0]), 0.1).unwrap();
        assert!((f[0] + 0.18).abs() < 1e-12);
        let f_star = p.tseng_map(&Vector::from(vec![1.0]), 0.1).unwrap();
        assert_eq!(f_star[0], 0.0);
    }

    #[test]
    fn lambda_must_be_positive() {
        let p = halfline();
        let x = Vector::from(vec![2.0]);
        for bad in [0.0, -0.1, f64::NAN] {
            assert!(matches!(
                p.natural_residual(&x, bad),
                Err(QviError::InvalidConfig { field: "lambda", .. })
            ));
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = halfline();
        let x = Vector::from(vec![1.0, 2.0]);
        assert_eq!(
            p.evaluate_operator(&x).unwrap_err(),
            QviError::DimensionMismatch { expected: 1, got: 2 }
        );
        assert!(p.project(&Vector::from(vec![1.0]), &x).is_err());
    }

    #[test]
    fn rho_above_l_rejected() {
        let err = OperatorSpec::new(|x: &Vector| x.clone(), 1.0, 2.0).unwrap_err();
        assert_eq!(err.to_string(), "invalid rho: rho exceeds L");
    }

    #[test]
    fn nan_from_oracle_is_numeric_failure() {
        let op = OperatorSpec::new(|x: &Vector| x.map(|_| f64::NAN), 1.0, 1.0).unwrap();
        let k = ConstraintSpec::new(|_: &Vector, z: &Vector| z.clone(), 0.0).unwrap();
        let p = QviProblem::new("nan", 1, op, k).unwrap();
        assert!(matches!(
            p.evaluate_operator(&Vector::from(vec![1.0])),
            Err(QviError::NumericFailure(_))
        ));
    }

    #[test]
    fn known_solution_is_checked() {
        assert!(halfline().with_known_solution(Vector::from(vec![1.0])).is_ok());
        assert!(halfline().with_known_solution(Vector::from(vec![2.0])).is_err());
    }

    #[test]
    fn contraction_finds_solution() {
        let p = halfline();
        let x = p.solve_by_contraction(&Vector::from(vec![5.0]), 100).unwrap().unwrap();
        assert_eq!(x[0], 1.0);
    }
}
