//! Mixed-strategy players in extensive form.
//!
//! A [`MixedPlayerPolicy`] commits, at each left knot, the first two moments
//! of its control draw for the coming interval as a function of the
//! committed state. Draws are Gaussian: other two-moment families would slot
//! in behind the same moment rule, but only the Gaussian family ships.
//! [`algorithm1_players`] builds the near-optimal pair from a solved value:
//! player 1 plays its optimal mean deterministically, player 2 randomizes
//! with the optimal covariance.

use crate::error::{Error, Result};
use crate::game::{Game, MomentConstraint};
use crate::spectral::{is_psd_within, sqrt_psd, sym_eigenvalues};
use crate::timegrid::Partition;
use crate::value::{optimal_prescription, ValueSolution};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use std::sync::Arc;

const MOMENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Player {
    One,
    Two,
}

/// Map from (interval index, committed state) to (mean, covariance).
pub type MomentRule =
    Arc<dyn Fn(usize, &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> + Send + Sync>;

pub struct MixedPlayerPolicy {
    pub side: Player,
    rule: MomentRule,
    pub constraint: MomentConstraint,
}

impl MixedPlayerPolicy {
    pub fn new(side: Player, rule: MomentRule, constraint: MomentConstraint) -> Self {
        Self {
            side,
            rule,
            constraint,
        }
    }

    /// Constant-moment policy (state- and interval-independent).
    pub fn constant(
        side: Player,
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        constraint: MomentConstraint,
    ) -> Self {
        Self::new(
            side,
            Arc::new(move |_, _| Ok((mean.clone(), cov.clone()))),
            constraint,
        )
    }

    /// Moments for interval `k` from committed state `x`, checked online
    /// against the constraint set.
    pub fn moments(&self, k: usize, x: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let (mean, cov) = (self.rule)(k, x)?;
        if self.constraint.gamma.is_finite() && mean.norm() > self.constraint.gamma + MOMENT_TOL {
            return Err(Error::ConstraintViolation(format!(
                "mean norm {} exceeds gamma = {} at interval {k}",
                mean.norm(),
                self.constraint.gamma
            )));
        }
        // covariance must sit below the cap: D - cov PSD
        let slack = &self.constraint.d - &cov;
        if !is_psd_within(&slack, MOMENT_TOL)? {
            let lo = sym_eigenvalues(&slack)?[0];
            return Err(Error::ConstraintViolation(format!(
                "covariance exceeds cap D at interval {k}: min eig of D - cov is {lo:.3e}"
            )));
        }
        Ok((mean, cov))
    }

    /// Draw a control for interval `k`. Consumes exactly `dim` standard
    /// normals from `rng` regardless of covariance rank, so draws can be
    /// reproduced from the stream alone.
    pub fn sample<R: Rng>(&self, k: usize, x: &DVector<f64>, rng: &mut R) -> Result<DVector<f64>> {
        let (mean, cov) = self.moments(k, x)?;
        let root = sqrt_psd(&cov)?;
        let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
        Ok(&mean + root * z)
    }
}

/// The two near-optimal players extracted from a solved value: player 1's
/// draws are deterministic (zero covariance), player 2 randomizes with the
/// optimal covariance from the heaviside formula.
pub fn algorithm1_players(
    vs: &ValueSolution,
    game: &Game,
    partition: &Partition,
    d2: &DMatrix<f64>,
    constraints: (MomentConstraint, MomentConstraint),
) -> Result<(MixedPlayerPolicy, MixedPlayerPolicy)> {
    if vs.partition() != partition {
        return Err(Error::InvalidArgument(
            "value solution was solved on a different partition".into(),
        ));
    }
    let (c1, c2) = constraints;
    let vs1 = Arc::new(vs.clone());
    let vs2 = Arc::clone(&vs1);
    let game1 = game.clone();
    let game2 = game.clone();
    let part1 = partition.clone();
    let part2 = partition.clone();
    let d2_1 = d2.clone();
    let d2_2 = d2.clone();

    let du = game.dynamics.dim_u();
    let rule1: MomentRule = Arc::new(move |k, x| {
        let t = part1.knots()[k - 1];
        let pres = optimal_prescription(&vs1, &game1, &part1, &d2_1, t, x)?;
        Ok((pres.gamma1, DMatrix::zeros(du, du)))
    });
    let rule2: MomentRule = Arc::new(move |k, x| {
        let t = part2.knots()[k - 1];
        let pres = optimal_prescription(&vs2, &game2, &part2, &d2_2, t, x)?;
        Ok((pres.gamma2, pres.sigma2))
    });
    Ok((
        MixedPlayerPolicy::new(Player::One, rule1, c1),
        MixedPlayerPolicy::new(Player::Two, rule2, c2),
    ))
}

/// One side of a stepwise control path for the approximating stochastic
/// game: per-interval mean and noise factor.
#[derive(Debug, Clone)]
pub struct SdgControlFragment {
    pub side: Player,
    /// `(interval index, mean Γ̃, factor Λ̃)` with `Λ̃Λ̃ᵀ` the covariance.
    pub entries: Vec<(usize, DVector<f64>, DMatrix<f64>)>,
}

/// Map a mixed-strategy player to stochastic-game controls on realized
/// committed states: the mean carries over and the noise factor is the
/// principal square root of the covariance.
pub fn phi_map(
    policy: &MixedPlayerPolicy,
    realized_states: &[(usize, DVector<f64>)],
) -> Result<SdgControlFragment> {
    let mut entries = Vec::with_capacity(realized_states.len());
    for (k, x) in realized_states {
        let (mean, cov) = policy.moments(*k, x)?;
        if !is_psd_within(&cov, MOMENT_TOL)? {
            return Err(Error::InvalidArgument(format!(
                "covariance at interval {k} is not positive semidefinite"
            )));
        }
        entries.push((*k, mean, sqrt_psd(&cov)?));
    }
    Ok(SdgControlFragment {
        side: policy.side,
        entries,
    })
}
