//! Game definitions: control-affine dynamics with quadratic cost, the
//! linear-quadratic special case, and moment constraints on mixed strategies.
//!
//! The running cost is `xᵀQx + uᵀR₁u − vᵀR₂v` and the terminal cost is
//! `xᵀQ_T x`; player 1 minimizes, player 2 maximizes. Dynamics are
//! `ẋ = f(x) + G₁(x)u + G₂(x)v`.

use crate::error::{Error, Result};
use crate::spectral::sym_eigenvalues;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

/// Relative eigenvalue threshold for positive definiteness checks.
const PD_RTOL: f64 = 1e-12;
/// Absolute symmetry tolerance for cost matrices.
const SYM_TOL: f64 = 1e-10;

/// Control-affine dynamics evaluators with declared dimensions.
///
/// Lipschitz and growth constants of the model class are metadata for the
/// theory and are not enforced at runtime.
pub trait Dynamics: Send + Sync {
    fn dim_x(&self) -> usize;
    fn dim_u(&self) -> usize;
    fn dim_v(&self) -> usize;
    /// Drift term `f(x)`.
    fn f(&self, x: &DVector<f64>) -> DVector<f64>;
    /// Input map of player 1, `G₁(x)`, a `d × d₁` matrix.
    fn g1(&self, x: &DVector<f64>) -> DMatrix<f64>;
    /// Input map of player 2, `G₂(x)`, a `d × d₂` matrix.
    fn g2(&self, x: &DVector<f64>) -> DMatrix<f64>;
}

/// Linear dynamics `f(x) = Ax`, `G₁(x) = B₁`, `G₂(x) = B₂`.
#[derive(Debug, Clone)]
pub struct LinearDynamics {
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
}

impl Dynamics for LinearDynamics {
    fn dim_x(&self) -> usize {
        self.a.nrows()
    }
    fn dim_u(&self) -> usize {
        self.b1.ncols()
    }
    fn dim_v(&self) -> usize {
        self.b2.ncols()
    }
    fn f(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x
    }
    fn g1(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.b1.clone()
    }
    fn g2(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.b2.clone()
    }
}

/// Dynamics given by closures; used for nonlinear control-affine models.
pub struct ClosureDynamics {
    pub dim_x: usize,
    pub dim_u: usize,
    pub dim_v: usize,
    pub f: Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>,
    pub g1: Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>,
    pub g2: Box<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>,
}

impl Dynamics for ClosureDynamics {
    fn dim_x(&self) -> usize {
        self.dim_x
    }
    fn dim_u(&self) -> usize {
        self.dim_u
    }
    fn dim_v(&self) -> usize {
        self.dim_v
    }
    fn f(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(x)
    }
    fn g1(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.g1)(x)
    }
    fn g2(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.g2)(x)
    }
}

/// Quadratic cost data `(Q, R₁, R₂, Q_T)`, all symmetric positive definite.
#[derive(Debug, Clone)]
pub struct QuadraticCost {
    pub q: DMatrix<f64>,
    pub r1: DMatrix<f64>,
    pub r2: DMatrix<f64>,
    pub qt: DMatrix<f64>,
}

/// A zero-sum game with control-affine dynamics and quadratic cost.
#[derive(Clone)]
pub struct Game {
    pub dynamics: Arc<dyn Dynamics>,
    pub cost: QuadraticCost,
    pub t0: f64,
    pub t_final: f64,
    pub x0: DVector<f64>,
}

/// The linear-quadratic specialization; keeps `A`, `B₁`, `B₂` explicit for
/// the Riccati solver.
#[derive(Debug, Clone)]
pub struct LqGame {
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub cost: QuadraticCost,
    pub t0: f64,
    pub t_final: f64,
    pub x0: DVector<f64>,
}

impl LqGame {
    pub fn dim_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn to_game(&self) -> Game {
        Game {
            dynamics: Arc::new(LinearDynamics {
                a: self.a.clone(),
                b1: self.b1.clone(),
                b2: self.b2.clone(),
            }),
            cost: self.cost.clone(),
            t0: self.t0,
            t_final: self.t_final,
            x0: self.x0.clone(),
        }
    }

    pub fn validate(&self) -> Vec<String> {
        self.to_game().validate()
    }
}

fn check_dims(name: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::InvalidArgument(format!(
            "{name} has dimension {got}, expected {want}"
        )));
    }
    Ok(())
}

impl Game {
    /// Running cost `h(x,u,v) = xᵀQx + uᵀR₁u − vᵀR₂v`.
    pub fn running_cost(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> Result<f64> {
        check_dims("x", x.len(), self.dynamics.dim_x())?;
        check_dims("u", u.len(), self.dynamics.dim_u())?;
        check_dims("v", v.len(), self.dynamics.dim_v())?;
        Ok(quad_form(&self.cost.q, x) + quad_form(&self.cost.r1, u) - quad_form(&self.cost.r2, v))
    }

    /// Terminal cost `g(x) = xᵀQ_T x`.
    pub fn terminal_cost(&self, x: &DVector<f64>) -> Result<f64> {
        check_dims("x", x.len(), self.dynamics.dim_x())?;
        Ok(quad_form(&self.cost.qt, x))
    }

    /// Dynamics right-hand side `f(x) + G₁(x)u + G₂(x)v`.
    pub fn drift(&self, x: &DVector<f64>, u: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_dims("x", x.len(), self.dynamics.dim_x())?;
        check_dims("u", u.len(), self.dynamics.dim_u())?;
        check_dims("v", v.len(), self.dynamics.dim_v())?;
        Ok(self.dynamics.f(x) + self.dynamics.g1(x) * u + self.dynamics.g2(x) * v)
    }

    /// Report violated standing assumptions; empty means valid.
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !(self.t_final > self.t0) {
            problems.push(format!(
                "horizon must satisfy t_final > t0, got [{}, {}]",
                self.t0, self.t_final
            ));
        }
        if self.x0.len() != self.dynamics.dim_x() {
            problems.push(format!(
                "x0 has dimension {}, expected {}",
                self.x0.len(),
                self.dynamics.dim_x()
            ));
        }
        let d = self.dynamics.dim_x();
        let checks: [(&str, &DMatrix<f64>, usize); 4] = [
            ("Q", &self.cost.q, d),
            ("R1", &self.cost.r1, self.dynamics.dim_u()),
            ("R2", &self.cost.r2, self.dynamics.dim_v()),
            ("QT", &self.cost.qt, d),
        ];
        for (name, m, dim) in checks {
            if m.nrows() != dim || m.ncols() != dim {
                problems.push(format!(
                    "{name} is {}x{}, expected {dim}x{dim}",
                    m.nrows(),
                    m.ncols()
                ));
                continue;
            }
            let scale = 1.0_f64.max(m.amax());
            let asym = (m - m.transpose()).amax();
            if asym > SYM_TOL * scale {
                problems.push(format!("{name} is asymmetric by {asym:.3e}"));
                continue;
            }
            match sym_eigenvalues(m) {
                Ok(ev) => {
                    let lo = ev.first().copied().unwrap_or(0.0);
                    let hi = ev.last().copied().unwrap_or(0.0);
                    if lo <= PD_RTOL * hi.max(1.0) {
                        problems.push(format!(
                            "{name} is not positive definite: smallest eigenvalue {lo:.3e}"
                        ));
                    }
                }
                Err(e) => problems.push(format!("{name}: {e}")),
            }
        }
        problems
    }
}

fn quad_form(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    (x.transpose() * m * x)[(0, 0)]
}

/// Moment constraint set for one player's mixed strategies: mean norm bound
/// `gamma` (may be infinite) and covariance cap `D` (PSD).
#[derive(Debug, Clone)]
pub struct MomentConstraint {
    pub gamma: f64,
    pub d: DMatrix<f64>,
}

impl MomentConstraint {
    pub fn new(gamma: f64, d: DMatrix<f64>) -> Result<Self> {
        if gamma < 0.0 || gamma.is_nan() {
            return Err(Error::InvalidArgument(
                "mean bound gamma must be nonnegative or infinite".into(),
            ));
        }
        if !crate::spectral::is_psd_within(&d, SYM_TOL)? {
            return Err(Error::InvalidArgument("covariance cap D must be PSD".into()));
        }
        Ok(Self { gamma, d })
    }

    /// Unconstrained mean, covariance capped by `d`.
    pub fn unbounded_mean(d: DMatrix<f64>) -> Result<Self> {
        Self::new(f64::INFINITY, d)
    }
}

#[cfg(test)]
pub(crate) mod test_games {
    use super::*;

    /// The scalar benchmark instance: A=2, B1=B2=3, Q=3, R1=0.1, R2=0.11,
    /// QT=0.3, horizon [0,2], x0=1.
    pub fn scalar_lq() -> LqGame {
        LqGame {
            a: DMatrix::from_element(1, 1, 2.0),
            b1: DMatrix::from_element(1, 1, 3.0),
            b2: DMatrix::from_element(1, 1, 3.0),
            cost: QuadraticCost {
                q: DMatrix::from_element(1, 1, 3.0),
                r1: DMatrix::from_element(1, 1, 0.1),
                r2: DMatrix::from_element(1, 1, 0.11),
                qt: DMatrix::from_element(1, 1, 0.3),
            },
            t0: 0.0,
            t_final: 2.0,
            x0: DVector::from_element(1, 1.0),
        }
    }
}
