//! Monte Carlo simulation of the original game under mixed strategies and
//! of its approximating stochastic game under stepwise pure strategies.
//!
//! The original game integrates `ẋ = f + G₁u + G₂v` with the drawn controls
//! held across each commitment interval; state and accumulated cost are
//! advanced together by RK4, so the cost quadrature is Simpson-consistent
//! on the same substeps. The stochastic game is advanced by Euler–Maruyama
//! with the diffusion `δπ^{1/2}(t) [G₁Λ̃₁, G₂Λ̃₂] dW` and left-endpoint cost
//! quadrature on the same grid.
//!
//! Randomness is drawn from per-(trajectory, interval, player) streams; see
//! [`crate::rng`]. Brownian increments are generated total-increment-first,
//! so the interval total reuses exactly the normals the original game draws
//! for its control in that interval: paired runs of both games share their
//! dominant randomness (common random numbers).

use crate::error::{Error, Result};
use crate::game::Game;
use crate::policy::{MixedPlayerPolicy, Player, SdgControlFragment};
use crate::rng::{player_stream, split};
use crate::timegrid::Partition;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Which game produced an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GameKind {
    Original,
    Sdg,
}

/// One simulated trajectory, sampled at the partition knots.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub sample_times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Accumulated cost at each knot; the final entry includes the terminal
    /// cost exactly once.
    pub costs: Vec<f64>,
    pub seed: u64,
}

/// Controls drawn per interval during a run of the original game.
#[derive(Debug, Clone)]
pub struct ControlTrace {
    pub draws: Vec<(DVector<f64>, DVector<f64>)>,
}

/// A seeded Monte Carlo collection of trajectories of one game.
#[derive(Debug, Clone)]
pub struct TrajectoryEnsemble {
    pub records: Vec<TrajectoryRecord>,
    pub master_seed: u64,
    pub kind: GameKind,
}

/// Ensemble plus any per-trajectory failures (indexed).
pub struct EnsembleRun {
    pub ensemble: TrajectoryEnsemble,
    pub failures: Vec<(usize, Error)>,
}

fn check_substep(partition: &Partition, substep: f64) -> Result<()> {
    if !(substep > 0.0) || !substep.is_finite() {
        return Err(Error::InvalidArgument("substep must be positive".into()));
    }
    if substep > partition.pi_min() * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "substep {substep} exceeds the smallest interval {}",
            partition.pi_min()
        )));
    }
    Ok(())
}

/// RK4 on the cost-augmented state `(x, y)` over one interval with the
/// controls held fixed. Returns the interval cost increment.
fn integrate_interval_rk4(
    game: &Game,
    x: &mut DVector<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
    t_lo: f64,
    t_hi: f64,
    substep: f64,
) -> Result<f64> {
    let len = t_hi - t_lo;
    let n_sub = (len / substep).ceil().max(1.0) as usize;
    let h = len / n_sub as f64;
    let mut y = 0.0_f64;
    for _ in 0..n_sub {
        let k1x = game.drift(x, u, v)?;
        let k1y = game.running_cost(x, u, v)?;
        let x2 = &*x + &k1x * (h / 2.0);
        let k2x = game.drift(&x2, u, v)?;
        let k2y = game.running_cost(&x2, u, v)?;
        let x3 = &*x + &k2x * (h / 2.0);
        let k3x = game.drift(&x3, u, v)?;
        let k3y = game.running_cost(&x3, u, v)?;
        let x4 = &*x + &k3x * h;
        let k4x = game.drift(&x4, u, v)?;
        let k4y = game.running_cost(&x4, u, v)?;
        *x += (k1x + k2x * 2.0 + k3x * 2.0 + k4x) * (h / 6.0);
        y += (k1y + 2.0 * k2y + 2.0 * k3y + k4y) * (h / 6.0);
    }
    Ok(y)
}

/// Integrate the original game across a single interval of length `delta`
/// with the controls held fixed; four RK4 substeps resolve the interval.
/// Returns the accumulated running cost of the interval.
pub fn integrate_one_interval(
    game: &Game,
    x: &mut DVector<f64>,
    u: &DVector<f64>,
    v: &DVector<f64>,
    delta: f64,
) -> Result<f64> {
    integrate_interval_rk4(game, x, u, v, 0.0, delta, delta / 4.0)
}

/// Simulate one trajectory of the original game under a pair of mixed
/// players, recording the per-interval control draws.
pub fn simulate_original_with_trace(
    game: &Game,
    partition: &Partition,
    players: (&MixedPlayerPolicy, &MixedPlayerPolicy),
    seed: u64,
    substep: f64,
) -> Result<(TrajectoryRecord, ControlTrace)> {
    check_substep(partition, substep)?;
    let (p1, p2) = players;
    let n = partition.num_intervals();
    let mut x = game.x0.clone();
    let mut states = Vec::with_capacity(n + 1);
    let mut costs = Vec::with_capacity(n + 1);
    let mut draws = Vec::with_capacity(n);
    states.push(x.clone());
    costs.push(0.0);
    let mut cost = 0.0_f64;
    for k in 1..=n {
        let u = p1.sample(k, &x, &mut player_stream(seed, k, 1))?;
        let v = p2.sample(k, &x, &mut player_stream(seed, k, 2))?;
        let t_lo = partition.knots()[k - 1];
        let t_hi = partition.knots()[k];
        cost += integrate_interval_rk4(game, &mut x, &u, &v, t_lo, t_hi, substep)?;
        if !x.iter().all(|s| s.is_finite()) || !cost.is_finite() {
            return Err(Error::DivergedTrajectory { interval: k });
        }
        states.push(x.clone());
        costs.push(cost);
        draws.push((u, v));
    }
    *costs.last_mut().unwrap() += game.terminal_cost(&x)?;
    Ok((
        TrajectoryRecord {
            sample_times: partition.knots().to_vec(),
            states,
            costs,
            seed,
        },
        ControlTrace { draws },
    ))
}

/// Simulate one trajectory of the original game under mixed strategies.
pub fn simulate_original(
    game: &Game,
    partition: &Partition,
    players: (&MixedPlayerPolicy, &MixedPlayerPolicy),
    seed: u64,
    substep: f64,
) -> Result<TrajectoryRecord> {
    simulate_original_with_trace(game, partition, players, seed, substep).map(|(rec, _)| rec)
}

/// Per-interval control source for the stochastic game: mean and noise
/// factor for both players, possibly fed back on the committed state.
pub trait SdgControls: Send + Sync {
    fn controls(
        &self,
        k: usize,
        x_left: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>, DVector<f64>, DMatrix<f64>)>;
}

/// Open-loop stepwise controls `(Γ̃₁, Λ̃₁, Γ̃₂, Λ̃₂)`, one entry per interval.
#[derive(Debug, Clone)]
pub struct SdgControlPath {
    partition: Partition,
    gamma1: Vec<DVector<f64>>,
    lambda1: Vec<DMatrix<f64>>,
    gamma2: Vec<DVector<f64>>,
    lambda2: Vec<DMatrix<f64>>,
}

impl SdgControlPath {
    /// Assemble a full path from one fragment per player. Every interval
    /// must be covered exactly once per side.
    pub fn from_fragments(
        partition: &Partition,
        frag1: &SdgControlFragment,
        frag2: &SdgControlFragment,
    ) -> Result<Self> {
        if frag1.side != Player::One || frag2.side != Player::Two {
            return Err(Error::InvalidArgument(
                "fragments must be (player 1, player 2)".into(),
            ));
        }
        let n = partition.num_intervals();
        let collect = |frag: &SdgControlFragment| -> Result<(Vec<DVector<f64>>, Vec<DMatrix<f64>>)> {
            let mut means = vec![None; n];
            let mut roots = vec![None; n];
            for (k, g, l) in &frag.entries {
                if *k == 0 || *k > n {
                    return Err(Error::InvalidArgument(format!(
                        "fragment interval {k} outside 1..={n}"
                    )));
                }
                means[*k - 1] = Some(g.clone());
                roots[*k - 1] = Some(l.clone());
            }
            if means.iter().any(|m| m.is_none()) {
                return Err(Error::InvalidArgument(
                    "fragment does not cover every interval".into(),
                ));
            }
            Ok((
                means.into_iter().map(Option::unwrap).collect(),
                roots.into_iter().map(Option::unwrap).collect(),
            ))
        };
        let (gamma1, lambda1) = collect(frag1)?;
        let (gamma2, lambda2) = collect(frag2)?;
        Ok(Self {
            partition: partition.clone(),
            gamma1,
            lambda1,
            gamma2,
            lambda2,
        })
    }

    /// Constant controls on every interval.
    pub fn constant(
        partition: &Partition,
        gamma1: DVector<f64>,
        lambda1: DMatrix<f64>,
        gamma2: DVector<f64>,
        lambda2: DMatrix<f64>,
    ) -> Self {
        let n = partition.num_intervals();
        Self {
            partition: partition.clone(),
            gamma1: vec![gamma1; n],
            lambda1: vec![lambda1; n],
            gamma2: vec![gamma2; n],
            lambda2: vec![lambda2; n],
        }
    }

    /// Check `Λ̃ᵢΛ̃ᵢᵀ ⪯ Dᵢ` on every interval.
    pub fn validate_caps(&self, d1: &DMatrix<f64>, d2: &DMatrix<f64>) -> Result<()> {
        for k in 0..self.gamma1.len() {
            for (lam, cap, side) in [(&self.lambda1[k], d1, 1), (&self.lambda2[k], d2, 2)] {
                let slack = cap - lam * lam.transpose();
                if !crate::spectral::is_psd_within(&slack, 1e-10)? {
                    return Err(Error::ConstraintViolation(format!(
                        "player {side} noise factor exceeds its cap on interval {}",
                        k + 1
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }
}

impl SdgControls for SdgControlPath {
    fn controls(
        &self,
        k: usize,
        _x_left: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
        let i = k - 1;
        Ok((
            self.gamma1[i].clone(),
            self.lambda1[i].clone(),
            self.gamma2[i].clone(),
            self.lambda2[i].clone(),
        ))
    }
}

/// Feedback source: applies the mixed players' moment rules to the
/// stochastic game's own committed states through the moment-matching map.
pub struct PhiMappedControls<'a> {
    pub p1: &'a MixedPlayerPolicy,
    pub p2: &'a MixedPlayerPolicy,
}

impl SdgControls for PhiMappedControls<'_> {
    fn controls(
        &self,
        k: usize,
        x_left: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
        let state = [(k, x_left.clone())];
        let f1 = crate::policy::phi_map(self.p1, &state)?;
        let f2 = crate::policy::phi_map(self.p2, &state)?;
        let (_, g1, l1) = f1.entries.into_iter().next().unwrap();
        let (_, g2, l2) = f2.entries.into_iter().next().unwrap();
        Ok((g1, l1, g2, l2))
    }
}

/// Standard-normal increments for one player's channel over an interval:
/// `n_sub` rows of dimension `dim`, generated so that the row sum equals
/// `√n_sub` times the first `dim` normals of the stream. Distribution is
/// i.i.d. standard normal either way; the construction only fixes the
/// coupling with the original game's draw from the same stream.
fn bridged_normals<R: Rng>(rng: &mut R, n_sub: usize, dim: usize) -> Vec<DVector<f64>> {
    let head = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    if n_sub == 1 {
        return vec![head];
    }
    let mut rows: Vec<DVector<f64>> =
        (0..n_sub)
            .map(|_| DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal)))
            .collect();
    let mut mean = DVector::zeros(dim);
    for r in &rows {
        mean += r;
    }
    mean /= n_sub as f64;
    let scale = 1.0 / (n_sub as f64).sqrt();
    for r in &mut rows {
        *r -= &mean;
        *r += &head * scale;
    }
    rows
}

/// Simulate one trajectory of the approximating stochastic game by
/// Euler–Maruyama under a per-interval control source.
pub fn simulate_sdg_with(
    game: &Game,
    partition: &Partition,
    controls: &dyn SdgControls,
    seed: u64,
    substep: f64,
) -> Result<TrajectoryRecord> {
    check_substep(partition, substep)?;
    let n = partition.num_intervals();
    let (du, dv) = (game.dynamics.dim_u(), game.dynamics.dim_v());
    let mut x = game.x0.clone();
    let mut states = Vec::with_capacity(n + 1);
    let mut costs = Vec::with_capacity(n + 1);
    states.push(x.clone());
    costs.push(0.0);
    let mut cost = 0.0_f64;
    for k in 1..=n {
        let (g1, l1, g2, l2) = controls.controls(k, &x)?;
        let t_lo = partition.knots()[k - 1];
        let t_hi = partition.knots()[k];
        let delta = t_hi - t_lo;
        let n_sub = (delta / substep).ceil().max(1.0) as usize;
        let h = delta / n_sub as f64;
        let sqrt_delta_h = (delta * h).sqrt();
        let dw1 = bridged_normals(&mut player_stream(seed, k, 1), n_sub, du);
        let dw2 = bridged_normals(&mut player_stream(seed, k, 2), n_sub, dv);
        // running cost of the stochastic game with the controls held
        let base_cost = (g1.transpose() * &game.cost.r1 * &g1)[(0, 0)]
            - (g2.transpose() * &game.cost.r2 * &g2)[(0, 0)]
            + (l1.transpose() * &game.cost.r1 * &l1).trace()
            - (l2.transpose() * &game.cost.r2 * &l2).trace();
        for step in dw1.iter().zip(dw2.iter()).take(n_sub) {
            let (z1, z2) = step;
            cost += h * ((x.transpose() * &game.cost.q * &x)[(0, 0)] + base_cost);
            let drift = game.drift(&x, &g1, &g2)?;
            let gm1 = game.dynamics.g1(&x);
            let gm2 = game.dynamics.g2(&x);
            x += drift * h + (gm1 * &l1 * z1 + gm2 * &l2 * z2) * sqrt_delta_h;
        }
        if !x.iter().all(|s| s.is_finite()) || !cost.is_finite() {
            return Err(Error::DivergedTrajectory { interval: k });
        }
        states.push(x.clone());
        costs.push(cost);
    }
    *costs.last_mut().unwrap() += game.terminal_cost(&x)?;
    Ok(TrajectoryRecord {
        sample_times: partition.knots().to_vec(),
        states,
        costs,
        seed,
    })
}

/// Simulate the stochastic game under a fixed stepwise control path.
pub fn simulate_sdg(
    game: &Game,
    partition: &Partition,
    controls: &SdgControlPath,
    seed: u64,
    substep: f64,
) -> Result<TrajectoryRecord> {
    if controls.partition() != partition {
        return Err(Error::InvalidArgument(
            "control path lives on a different partition".into(),
        ));
    }
    simulate_sdg_with(game, partition, controls, seed, substep)
}

/// Precomputed per-substep feedback law for estimating the stochastic
/// game's own value: the optimal moment formulas are re-evaluated at every
/// Euler–Maruyama node rather than held per interval.
#[derive(Debug, Clone)]
pub struct SdgFeedbackLaw {
    /// Per interval: substep `h`, `√δπ`, and per-node gains.
    intervals: Vec<FeedbackInterval>,
}

#[derive(Debug, Clone)]
struct FeedbackInterval {
    h: f64,
    sqrt_delta: f64,
    /// Per EM node: `(K₁, K₂, Λ₂, tr(Λ₂ᵀR₂Λ₂))` with `Γᵢ = Kᵢ x`.
    nodes: Vec<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, f64)>,
}

/// Build the feedback law for a linear-quadratic game from its solved value.
pub fn prepare_sdg_feedback(
    g: &crate::game::LqGame,
    partition: &Partition,
    vs: &crate::value::ValueSolution,
    d2: &DMatrix<f64>,
    substep: f64,
) -> Result<SdgFeedbackLaw> {
    check_substep(partition, substep)?;
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
    let d2_sqrt = crate::spectral::sqrt_psd(d2)?;
    let mut intervals = Vec::with_capacity(partition.num_intervals());
    for k in 1..=partition.num_intervals() {
        let t_lo = partition.knots()[k - 1];
        let t_hi = partition.knots()[k];
        let delta = t_hi - t_lo;
        let n_sub = (delta / substep).ceil().max(1.0) as usize;
        let h = delta / n_sub as f64;
        let mut nodes = Vec::with_capacity(n_sub);
        for j in 0..n_sub {
            let t = t_lo + j as f64 * h;
            let p = vs.p_at(t)?;
            let k1 = -(&r1_inv * g.b1.transpose() * &p);
            let k2 = &r2_inv * g.b2.transpose() * &p;
            let inner =
                &d2_sqrt * (g.b2.transpose() * &p * &g.b2 * (2.0 * delta) - &g.cost.r2 * 2.0) * &d2_sqrt;
            let sigma2 = &d2_sqrt * crate::spectral::heaviside_psd(&inner)? * &d2_sqrt;
            let lam2 = crate::spectral::sqrt_psd(&sigma2)?;
            let trace = (lam2.transpose() * &g.cost.r2 * &lam2).trace();
            nodes.push((k1, k2, lam2, trace));
        }
        intervals.push(FeedbackInterval {
            h,
            sqrt_delta: delta.sqrt(),
            nodes,
        });
    }
    Ok(SdgFeedbackLaw { intervals })
}

/// Simulate the stochastic game under the per-substep feedback law.
/// Player 1's optimal noise factor is identically zero, so only player 2's
/// stream is consumed.
pub fn simulate_sdg_feedback(
    g: &crate::game::LqGame,
    partition: &Partition,
    law: &SdgFeedbackLaw,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let mut x = g.x0.clone();
    let n = partition.num_intervals();
    let mut states = Vec::with_capacity(n + 1);
    let mut costs = Vec::with_capacity(n + 1);
    states.push(x.clone());
    costs.push(0.0);
    let mut cost = 0.0_f64;
    let dv = g.b2.ncols();
    for k in 1..=n {
        let iv = &law.intervals[k - 1];
        let mut rng = player_stream(seed, k, 2);
        let sqrt_h = iv.h.sqrt();
        for (k1, k2, lam2, trace) in &iv.nodes {
            let gamma1 = k1 * &x;
            let gamma2 = k2 * &x;
            cost += iv.h
                * ((x.transpose() * &g.cost.q * &x)[(0, 0)]
                    + (gamma1.transpose() * &g.cost.r1 * &gamma1)[(0, 0)]
                    - (gamma2.transpose() * &g.cost.r2 * &gamma2)[(0, 0)]
                    - trace);
            let z = DVector::from_fn(dv, |_, _| rng.sample::<f64, _>(StandardNormal));
            x = &g.a * &x * iv.h + &x + (&g.b1 * gamma1 + &g.b2 * gamma2) * iv.h
                + &g.b2 * lam2 * z * (iv.sqrt_delta * sqrt_h);
        }
        if !x.iter().all(|s| s.is_finite()) || !cost.is_finite() {
            return Err(Error::DivergedTrajectory { interval: k });
        }
        states.push(x.clone());
        costs.push(cost);
    }
    let term = (x.transpose() * &g.cost.qt * &x)[(0, 0)];
    *costs.last_mut().unwrap() += term;
    Ok(TrajectoryRecord {
        sample_times: partition.knots().to_vec(),
        states,
        costs,
        seed,
    })
}

fn collect_ensemble<F>(n: usize, master_seed: u64, kind: GameKind, run: F) -> EnsembleRun
where
    F: Fn(u64) -> Result<TrajectoryRecord> + Sync,
{
    let results: Vec<(usize, Result<TrajectoryRecord>)> = (0..n)
        .into_par_iter()
        .map(|i| (i, run(split(master_seed, i as u64))))
        .collect();
    let mut records = Vec::with_capacity(n);
    let mut failures = Vec::new();
    for (i, res) in results {
        match res {
            Ok(rec) => records.push(rec),
            Err(e) => failures.push((i, e)),
        }
    }
    EnsembleRun {
        ensemble: TrajectoryEnsemble {
            records,
            master_seed,
            kind,
        },
        failures,
    }
}

/// Monte Carlo ensemble of the original game. Trajectory `i` uses the seed
/// `split(master_seed, i)`; the result is invariant to worker count.
pub fn run_original_ensemble(
    game: &Game,
    partition: &Partition,
    players: (&MixedPlayerPolicy, &MixedPlayerPolicy),
    n: usize,
    master_seed: u64,
    substep: f64,
) -> EnsembleRun {
    collect_ensemble(n, master_seed, GameKind::Original, |seed| {
        simulate_original(game, partition, players, seed, substep)
    })
}

/// Monte Carlo ensemble of the stochastic game under a control source.
pub fn run_sdg_ensemble(
    game: &Game,
    partition: &Partition,
    controls: &dyn SdgControls,
    n: usize,
    master_seed: u64,
    substep: f64,
) -> EnsembleRun {
    collect_ensemble(n, master_seed, GameKind::Sdg, |seed| {
        simulate_sdg_with(game, partition, controls, seed, substep)
    })
}

/// Monte Carlo ensemble of the stochastic game under the feedback law.
pub fn run_sdg_feedback_ensemble(
    g: &crate::game::LqGame,
    partition: &Partition,
    law: &SdgFeedbackLaw,
    n: usize,
    master_seed: u64,
) -> EnsembleRun {
    collect_ensemble(n, master_seed, GameKind::Sdg, |seed| {
        simulate_sdg_feedback(g, partition, law, seed)
    })
}
