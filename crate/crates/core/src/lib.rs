//! Solvers, continuous-time flows and convergence certificates for
//! quasi-variational inequalities (QVIs)
//!
//! ```text
//! find x* ∈ K(x*) such that ⟨F(x*), y − x*⟩ ≥ 0 for all y ∈ K(x*)
//! ```
//!
//! where `F` is `L`-Lipschitz and `ρ`-strongly monotone and the moving
//! constraint set satisfies `‖P_{K(x)}(z) − P_{K(y)}(z)‖ ≤ l‖x − y‖`.
//!
//! * [`problem`]: the operator/projection oracles, natural residual and
//!   Tseng vector field.
//! * [`certify`]: closed-form constants `θ, μ, Λ, r` and every sufficient
//!   condition, reported as data.
//! * [`solvers`]: the forward-backward-forward iteration plus
//!   gradient-projection and extragradient baselines.
//! * [`dynamics`]: Euler/RK4 integration of `ẋ = α(t) f(x)` with Lyapunov
//!   monitoring.
//! * [`problems`]: the truncated ℓ² example, moving sets, single-set VIs and
//!   a seeded affine generator.
//! * [`cli`]: the `tseng-qvi` command line.

pub mod certify;
pub mod cli;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod problem;
pub mod problems;
pub mod sampling;
pub mod sets;
pub mod solvers;
pub mod sweep;
pub mod vector;

pub use error::{QviError, Result};
pub use problem::{ConstraintSpec, OperatorSpec, QviProblem};
pub use vector::Vector;
