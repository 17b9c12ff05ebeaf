//! Backward value solve for the designed stochastic game in the
//! linear-quadratic case, plus strategy extraction for general inputs.
//!
//! With the quadratic ansatz `V(t,x) = xᵀP(t)x + r(t)` the second-order
//! HJI equation separates into
//!
//! ```text
//! -Ṗ = AᵀP + PA + Q + P (B₂R₂⁻¹B₂ᵀ − B₁R₁⁻¹B₁ᵀ) P,        P(T) = Q_T
//! -ṙ = ½ tr[(D₂^{1/2} (2 δπ(t) B₂ᵀPB₂ − 2R₂) D₂^{1/2})₊],  r(T) = 0
//! ```
//!
//! where `δπ(t)` is the interval-length function of the commitment
//! partition. The matrix equation is the classical game Riccati equation;
//! the scalar equation carries the value gained by randomizing, and its
//! integrand is a projected trace, hence nonnegative: `r` is nonincreasing
//! in `t` and `r ≥ 0`.
//!
//! Integration is fixed-step classical RK4, with steps split at partition
//! knots so `δπ` is constant inside every step.

use crate::error::{Error, Result};
use crate::game::{Game, LqGame};
use crate::spectral::{heaviside_psd, sqrt_psd, sym_eigenvalues};
use crate::timegrid::Partition;
use nalgebra::{DMatrix, DVector};
use std::io::Write;

/// Frobenius-norm threshold that triggers finite-escape detection.
const ESCAPE_NORM: f64 = 1e12;

/// Backward-solved quadratic value data on a dense time grid.
#[derive(Debug, Clone)]
pub struct ValueSolution {
    times: Vec<f64>,
    p: Vec<DMatrix<f64>>,
    r: Vec<f64>,
    partition: Partition,
}

/// Optimal per-player first two moments at a point `(t, x)`.
#[derive(Debug, Clone)]
pub struct StrategyPrescription {
    pub gamma1: DVector<f64>,
    pub sigma1: DMatrix<f64>,
    pub gamma2: DVector<f64>,
    pub sigma2: DMatrix<f64>,
}

fn riccati_rhs(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    q: &DMatrix<f64>,
    gain_diff: &DMatrix<f64>,
) -> DMatrix<f64> {
    // dP/dt = -(AᵀP + PA + Q + P G P), G = B₂R₂⁻¹B₂ᵀ − B₁R₁⁻¹B₁ᵀ
    -(a.transpose() * p + p * a + q + p * gain_diff * p)
}

fn r_rhs(p: &DMatrix<f64>, b2: &DMatrix<f64>, r2: &DMatrix<f64>, d2_sqrt: &DMatrix<f64>, delta: f64) -> f64 {
    let inner = d2_sqrt * (b2.transpose() * p * b2 * (2.0 * delta) - r2 * 2.0) * d2_sqrt;
    let pos_trace: f64 = sym_eigenvalues(&inner)
        .expect("r-equation integrand is symmetric by construction")
        .iter()
        .map(|l| l.max(0.0))
        .sum();
    -0.5 * pos_trace
}

/// Solve the backward matrix-Riccati plus scalar system for `g` on the
/// commitment partition `p` with covariance cap `d2`.
///
/// `ode_step` is the RK4 step; steps are shortened to land exactly on
/// partition knots. Samples are stored at every RK4 node; query with
/// [`ValueSolution::value_at`] or the raw accessors.
pub fn solve_lq_value(
    g: &LqGame,
    partition: &Partition,
    d2: &DMatrix<f64>,
    ode_step: f64,
) -> Result<ValueSolution> {
    if !(ode_step > 0.0) || !ode_step.is_finite() {
        return Err(Error::InvalidArgument("ode_step must be positive".into()));
    }
    let problems = g.validate();
    if !problems.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "game failed validation: {}",
            problems.join("; ")
        )));
    }
    if (partition.t0() - g.t0).abs() > 1e-12 || (partition.t_final() - g.t_final).abs() > 1e-12 {
        return Err(Error::InvalidArgument(
            "partition horizon does not match the game horizon".into(),
        ));
    }
    if d2.nrows() != g.b2.ncols() || d2.ncols() != g.b2.ncols() {
        return Err(Error::InvalidArgument(format!(
            "D2 must be {0}x{0}",
            g.b2.ncols()
        )));
    }
    let d2_sqrt = sqrt_psd(d2)?;
    let r1_inv = g
        .cost
        .r1
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("R1 is singular".into()))?;
    let r2_inv = g
        .cost
        .r2
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("R2 is singular".into()))?;
    let gain_diff = &g.b2 * &r2_inv * g.b2.transpose() - &g.b1 * &r1_inv * g.b1.transpose();

    let mut times = Vec::new();
    let mut p_path = Vec::new();
    let mut r_path = Vec::new();

    let mut p = g.cost.qt.clone();
    let mut r = 0.0_f64;
    times.push(g.t_final);
    p_path.push(p.clone());
    r_path.push(r);

    // march backward interval by interval so δπ is constant within steps
    for k in (1..=partition.num_intervals()).rev() {
        let t_hi = partition.knots()[k];
        let t_lo = partition.knots()[k - 1];
        let delta = t_hi - t_lo;
        let n_steps = (delta / ode_step).ceil().max(1.0) as usize;
        let h = delta / n_steps as f64;
        let mut t = t_hi;
        for _ in 0..n_steps {
            // RK4 with negative step -h on (P, r)
            let hh = -h;
            let k1p = riccati_rhs(&p, &g.a, &g.cost.q, &gain_diff);
            let k1r = r_rhs(&p, &g.b2, &g.cost.r2, &d2_sqrt, delta);
            let p2 = &p + &k1p * (hh / 2.0);
            let k2p = riccati_rhs(&p2, &g.a, &g.cost.q, &gain_diff);
            let k2r = r_rhs(&p2, &g.b2, &g.cost.r2, &d2_sqrt, delta);
            let p3 = &p + &k2p * (hh / 2.0);
            let k3p = riccati_rhs(&p3, &g.a, &g.cost.q, &gain_diff);
            let k3r = r_rhs(&p3, &g.b2, &g.cost.r2, &d2_sqrt, delta);
            let p4 = &p + &k3p * hh;
            let k4p = riccati_rhs(&p4, &g.a, &g.cost.q, &gain_diff);
            let k4r = r_rhs(&p4, &g.b2, &g.cost.r2, &d2_sqrt, delta);
            p += (k1p + k2p * 2.0 + k3p * 2.0 + k4p) * (hh / 6.0);
            r += (k1r + 2.0 * k2r + 2.0 * k3r + k4r) * (hh / 6.0);
            // keep the stored iterate exactly symmetric
            p = (&p + p.transpose()) * 0.5;
            t += hh;
            if !p.iter().all(|v| v.is_finite()) || p.norm() > ESCAPE_NORM {
                return Err(Error::FiniteEscape {
                    time: t,
                    norm: p.norm(),
                });
            }
            times.push(t);
            p_path.push(p.clone());
            r_path.push(r);
        }
        // land exactly on the knot
        let last = times.len() - 1;
        times[last] = t_lo;
    }

    times.reverse();
    p_path.reverse();
    r_path.reverse();
    Ok(ValueSolution {
        times,
        p: p_path,
        r: r_path,
        partition: partition.clone(),
    })
}

impl ValueSolution {
    pub fn grid(&self) -> &[f64] {
        &self.times
    }

    pub fn p_samples(&self) -> &[DMatrix<f64>] {
        &self.p
    }

    pub fn r_samples(&self) -> &[f64] {
        &self.r
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().unwrap()
    }

    fn locate(&self, t: f64) -> Result<(usize, usize, f64)> {
        if t < self.t0() - 1e-12 || t > self.t_final() + 1e-12 {
            return Err(Error::OutOfRange(format!(
                "t = {t} outside [{}, {}]",
                self.t0(),
                self.t_final()
            )));
        }
        let t = t.clamp(self.t0(), self.t_final());
        let hi = self
            .times
            .partition_point(|&s| s < t)
            .clamp(1, self.times.len() - 1);
        let lo = hi - 1;
        let span = self.times[hi] - self.times[lo];
        let w = if span > 0.0 { (t - self.times[lo]) / span } else { 0.0 };
        Ok((lo, hi, w))
    }

    /// `P(t)` by linear interpolation between grid samples.
    pub fn p_at(&self, t: f64) -> Result<DMatrix<f64>> {
        let (lo, hi, w) = self.locate(t)?;
        Ok(&self.p[lo] * (1.0 - w) + &self.p[hi] * w)
    }

    /// `r(t)` by linear interpolation.
    pub fn r_at(&self, t: f64) -> Result<f64> {
        let (lo, hi, w) = self.locate(t)?;
        Ok(self.r[lo] * (1.0 - w) + self.r[hi] * w)
    }

    /// Value `V(t,x) = xᵀP(t)x + r(t)`.
    pub fn value_at(&self, t: f64, x: &DVector<f64>) -> Result<f64> {
        let p = self.p_at(t)?;
        Ok((x.transpose() * p * x)[(0, 0)] + self.r_at(t)?)
    }

    /// Nearest interior grid index to `t` (used by the residual check).
    pub fn nearest_interior_index(&self, t: f64) -> Result<usize> {
        self.locate(t).map(|(lo, hi, w)| {
            let idx = if w < 0.5 { lo } else { hi };
            idx.clamp(1, self.times.len() - 2)
        })
    }

    /// Write the solution as CSV: `t`, `P` entries row-major, `r`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.p[0].nrows();
        let mut header = vec!["t".to_string()];
        for i in 0..d {
            for j in 0..d {
                header.push(format!("p{}{}", i, j));
            }
        }
        header.push("r".to_string());
        writeln!(out, "{}", header.join(","))?;
        for (idx, &t) in self.times.iter().enumerate() {
            let mut row = vec![format!("{:.16e}", t)];
            for i in 0..d {
                for j in 0..d {
                    row.push(format!("{:.16e}", self.p[idx][(i, j)]));
                }
            }
            row.push(format!("{:.16e}", self.r[idx]));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Optimal first two moments for both players at `(t, x)`:
///
/// ```text
/// Γ₁* = −½ R₁⁻¹ G₁(x)ᵀ ∂ₓV,   Σ₁* = 0
/// Γ₂* = +½ R₂⁻¹ G₂(x)ᵀ ∂ₓV,
/// Σ₂* = D₂^{1/2} 1(D₂^{1/2} (δπ(t) G₂ᵀ ∂ₓ²V G₂ − 2R₂) D₂^{1/2}) D₂^{1/2}
/// ```
///
/// with `∂ₓV = 2P(t)x` and `∂ₓ²V = 2P(t)` from the quadratic value.
pub fn optimal_prescription(
    vs: &ValueSolution,
    game: &Game,
    partition: &Partition,
    d2: &DMatrix<f64>,
    t: f64,
    x: &DVector<f64>,
) -> Result<StrategyPrescription> {
    let p = vs.p_at(t)?;
    let delta = partition.interval_length_at(t)?;
    let grad = &p * x * 2.0;
    let g1 = game.dynamics.g1(x);
    let g2 = game.dynamics.g2(x);
    let r1_inv = game
        .cost
        .r1
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("R1 is singular".into()))?;
    let r2_inv = game
        .cost
        .r2
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InvalidArgument("R2 is singular".into()))?;
    let gamma1 = -(&r1_inv * g1.transpose() * &grad) * 0.5;
    let gamma2 = (&r2_inv * g2.transpose() * &grad) * 0.5;
    let d2_sqrt = sqrt_psd(d2)?;
    let hess_term = g2.transpose() * &p * &g2 * (2.0 * delta) - &game.cost.r2 * 2.0;
    let inner = &d2_sqrt * hess_term * &d2_sqrt;
    let sigma2 = &d2_sqrt * heaviside_psd(&inner)? * &d2_sqrt;
    let du = game.dynamics.dim_u();
    Ok(StrategyPrescription {
        gamma1,
        sigma1: DMatrix::zeros(du, du),
        gamma2,
        sigma2,
    })
}

/// Absolute residual of the solved value in the HJI equation at the grid
/// node nearest to `t`, with `∂ₜV` from a second-order finite difference of
/// the stored `P`, `r` samples and all other terms evaluated analytically.
pub fn hji_residual(
    vs: &ValueSolution,
    g: &LqGame,
    partition: &Partition,
    d2: &DMatrix<f64>,
    t: f64,
    x: &DVector<f64>,
) -> Result<f64> {
    let idx = vs.nearest_interior_index(t)?;
    let (tm, t0, tp) = (vs.times[idx - 1], vs.times[idx], vs.times[idx + 1]);
    let h1 = t0 - tm;
    let h2 = tp - t0;
    let quad = |p: &DMatrix<f64>| (x.transpose() * p * x)[(0, 0)];
    let vm = quad(&vs.p[idx - 1]) + vs.r[idx - 1];
    let v0 = quad(&vs.p[idx]) + vs.r[idx];
    let vp = quad(&vs.p[idx + 1]) + vs.r[idx + 1];
    // second-order first derivative on a possibly nonuniform stencil
    let dv_dt = (h1 * h1 * vp + (h2 * h2 - h1 * h1) * v0 - h2 * h2 * vm) / (h1 * h2 * (h1 + h2));

    let p = &vs.p[idx];
    let grad = p * x * 2.0;
    let r1_inv = g.cost.r1.clone().try_inverse().unwrap();
    let r2_inv = g.cost.r2.clone().try_inverse().unwrap();
    let gain_diff = &g.b2 * &r2_inv * g.b2.transpose() - &g.b1 * &r1_inv * g.b1.transpose();
    let delta = partition.interval_length_at(t0)?;
    let d2_sqrt = sqrt_psd(d2)?;
    let inner = &d2_sqrt * (g.b2.transpose() * p * &g.b2 * (2.0 * delta) - &g.cost.r2 * 2.0) * &d2_sqrt;
    let pos_trace: f64 = sym_eigenvalues(&inner)?.iter().map(|l| l.max(0.0)).sum();

    let rhs = (grad.transpose() * (&g.a * x))[(0, 0)]
        + (x.transpose() * &g.cost.q * x)[(0, 0)]
        + 0.25 * (grad.transpose() * &gain_diff * &grad)[(0, 0)]
        + 0.5 * pos_trace;
    Ok((dv_dt + rhs).abs())
}
