//! Time partitions, stepwise paths, and the zero-order hold.
//!
//! A [`Partition`] is the commitment-delay pattern `t0 < t1 < ... < tN = T`.
//! Controls committed on it are piecewise constant over the intervals
//! `[t_{k-1}, t_k)` (the last interval is closed at `T`), which is what
//! [`StepwisePath`] and [`zoh_path`] encode.

use crate::error::{Error, Result};
use nalgebra::DVector;

/// Relative tolerance used to flag a partition as equispaced.
const EQUISPACED_RTOL: f64 = 1e-12;

/// Strictly increasing time grid `t0 < t1 < ... < tN = T`.
///
/// Knots are stored explicitly; interval lengths are never recomputed from
/// an assumed common step, so non-equispaced grids carry no drift.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    knots: Vec<f64>,
    pi_max: f64,
    pi_min: f64,
}

impl Partition {
    /// Build a partition from explicit knots.
    pub fn new(knots: Vec<f64>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidArgument(
                "partition needs at least 2 knots".into(),
            ));
        }
        if knots.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidArgument("partition knots must be finite".into()));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "partition knots must be strictly increasing".into(),
            ));
        }
        let mut pi_max = f64::MIN;
        let mut pi_min = f64::MAX;
        for w in knots.windows(2) {
            let len = w[1] - w[0];
            pi_max = pi_max.max(len);
            pi_min = pi_min.min(len);
        }
        Ok(Self {
            knots,
            pi_max,
            pi_min,
        })
    }

    /// `n_intervals` intervals of equal length on `[t0, t_final]`.
    pub fn equispaced(t0: f64, t_final: f64, n_intervals: usize) -> Result<Self> {
        if !(t_final > t0) {
            return Err(Error::InvalidArgument(format!(
                "horizon must satisfy t_final > t0, got [{t0}, {t_final}]"
            )));
        }
        if n_intervals == 0 {
            return Err(Error::InvalidArgument("need at least one interval".into()));
        }
        let span = t_final - t0;
        let n = n_intervals as f64;
        let mut knots: Vec<f64> = (0..=n_intervals)
            .map(|i| t0 + span * (i as f64) / n)
            .collect();
        // pin the endpoint exactly
        *knots.last_mut().unwrap() = t_final;
        Self::new(knots)
    }

    /// Step-`step` grid on `[t0, t_final]`; the final interval absorbs the
    /// remainder when `step` does not divide the horizon evenly.
    ///
    /// A remainder shorter than `step/2` is merged into the previous
    /// interval, so no interval ever exceeds `step` and `pi_max == step`
    /// whenever at least one full step fits.
    pub fn by_step(t0: f64, t_final: f64, step: f64) -> Result<Self> {
        if !(t_final > t0) {
            return Err(Error::InvalidArgument(format!(
                "horizon must satisfy t_final > t0, got [{t0}, {t_final}]"
            )));
        }
        if !(step > 0.0) || !step.is_finite() {
            return Err(Error::InvalidArgument("step must be positive".into()));
        }
        let mut knots = Vec::new();
        let mut i = 0u64;
        loop {
            let t = t0 + (i as f64) * step;
            if t >= t_final - step * 1e-9 {
                break;
            }
            knots.push(t);
            i += 1;
        }
        knots.push(t_final);
        Self::new(knots)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn t0(&self) -> f64 {
        self.knots[0]
    }

    pub fn t_final(&self) -> f64 {
        *self.knots.last().unwrap()
    }

    /// Number of intervals `N = |pi|`.
    pub fn num_intervals(&self) -> usize {
        self.knots.len() - 1
    }

    /// Largest interval length (the commitment delay bound).
    pub fn pi_max(&self) -> f64 {
        self.pi_max
    }

    /// Smallest interval length.
    pub fn pi_min(&self) -> f64 {
        self.pi_min
    }

    pub fn is_equispaced(&self) -> bool {
        self.pi_max - self.pi_min <= EQUISPACED_RTOL * self.pi_max
    }

    /// Index function: the unique `k` in `1..=N` with `t` in `[t_{k-1}, t_k)`.
    /// Intervals are right-open except the last, which includes `T`.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        if t < self.t0() || t > self.t_final() {
            return Err(Error::OutOfRange(format!(
                "t = {t} outside [{}, {}]",
                self.t0(),
                self.t_final()
            )));
        }
        if t >= self.t_final() {
            return Ok(self.num_intervals());
        }
        // first knot strictly greater than t
        let k = self.knots.partition_point(|&knot| knot <= t);
        Ok(k)
    }

    /// Interval length function: `|Δ_{ζ(t)}|`.
    pub fn interval_length_at(&self, t: f64) -> Result<f64> {
        let k = self.index_of(t)?;
        Ok(self.knots[k] - self.knots[k - 1])
    }

    /// Length of interval `k` (1-based).
    pub fn interval_length(&self, k: usize) -> f64 {
        self.knots[k] - self.knots[k - 1]
    }
}

/// A piecewise-constant vector path over a [`Partition`]: one value per
/// interval, evaluated by the index function.
#[derive(Debug, Clone, PartialEq)]
pub struct StepwisePath {
    partition: Partition,
    values: Vec<DVector<f64>>,
}

impl StepwisePath {
    pub fn new(partition: Partition, values: Vec<DVector<f64>>) -> Result<Self> {
        if values.len() != partition.num_intervals() {
            return Err(Error::InvalidArgument(format!(
                "expected {} values, got {}",
                partition.num_intervals(),
                values.len()
            )));
        }
        Ok(Self { partition, values })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    /// Value held on the interval containing `t`.
    pub fn at(&self, t: f64) -> Result<&DVector<f64>> {
        let k = self.partition.index_of(t)?;
        Ok(&self.values[k - 1])
    }
}

/// Zero-order hold: sample `samples` at each left knot and hold the value
/// across the interval. Idempotent on stepwise paths over the same grid.
pub fn zoh_path<F>(partition: &Partition, mut samples: F) -> StepwisePath
where
    F: FnMut(f64) -> DVector<f64>,
{
    let values = partition.knots[..partition.num_intervals()]
        .iter()
        .map(|&t| samples(t))
        .collect();
    StepwisePath {
        partition: partition.clone(),
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn equispaced_single_interval() {
        let p = Partition::equispaced(0.0, 2.0, 1).unwrap();
        assert_eq!(p.knots(), &[0.0, 2.0]);
        assert_eq!(p.pi_max(), 2.0);
    }

    #[test]
    fn equispaced_67_matches_reported_step() {
        let p = Partition::equispaced(0.0, 2.0, 67).unwrap();
        assert_relative_eq!(p.pi_max(), 2.0 / 67.0, max_relative = 1e-12);
        assert!(p.is_equispaced());
        assert!((p.pi_max() - 0.02985).abs() < 1e-4);
    }

    #[test]
    fn equispaced_quarters() {
        let p = Partition::equispaced(0.0, 1.0, 4).unwrap();
        let expect = [0.0, 0.25, 0.5, 0.75, 1.0];
        for (a, b) in p.knots().iter().zip(expect.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn by_step_absorbs_remainder() {
        let p = Partition::by_step(0.0, 2.0, 0.03).unwrap();
        assert_eq!(p.num_intervals(), 67);
        assert_relative_eq!(p.pi_max(), 0.03, max_relative = 1e-9);
        assert_relative_eq!(p.interval_length(67), 0.02, max_relative = 1e-6);
        assert!(!p.is_equispaced());
        assert_eq!(p.t_final(), 2.0);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(Partition::equispaced(1.0, 1.0, 4).is_err());
        assert!(Partition::equispaced(0.0, -1.0, 4).is_err());
        assert!(Partition::equispaced(0.0, 1.0, 0).is_err());
        assert!(Partition::new(vec![0.0]).is_err());
        assert!(Partition::new(vec![0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn index_of_examples() {
        let p = Partition::equispaced(0.0, 2.0, 4).unwrap();
        assert_eq!(p.index_of(0.5).unwrap(), 2);
        assert_eq!(p.index_of(2.0).unwrap(), 4);
        assert_eq!(p.index_of(0.0).unwrap(), 1);
        assert!(p.index_of(-0.1).is_err());
        assert!(p.index_of(2.1).is_err());
    }

    #[test]
    fn interval_length_examples() {
        let p = Partition::equispaced(0.0, 2.0, 4).unwrap();
        assert_relative_eq!(p.interval_length_at(1.3).unwrap(), 0.5);
        let q = Partition::new(vec![0.0, 0.1, 2.0]).unwrap();
        assert_relative_eq!(q.interval_length_at(1.0).unwrap(), 1.9);
        assert_relative_eq!(q.interval_length_at(0.05).unwrap(), 0.1);
    }

    #[test]
    fn zoh_of_constant_and_idempotence() {
        let p = Partition::equispaced(0.0, 1.0, 5).unwrap();
        let c = DVector::from_vec(vec![3.0, -1.0]);
        let path = zoh_path(&p, |_| c.clone());
        assert!(path.values().iter().all(|v| v == &c));

        let ramp = zoh_path(&p, |t| DVector::from_vec(vec![t]));
        let held = ramp.clone();
        let again = zoh_path(&p, |t| held.at(t).unwrap().clone());
        assert_eq!(ramp, again);
    }

    #[test]
    fn zoh_samples_left_knots() {
        let p = Partition::equispaced(0.0, 1.0, 2).unwrap();
        let path = zoh_path(&p, |t| DVector::from_vec(vec![t]));
        assert_eq!(path.values()[0][0], 0.0);
        assert_eq!(path.values()[1][0], 0.5);
    }

    #[test]
    fn piecewise_constant_evaluation_is_bitwise() {
        let p = Partition::new(vec![0.0, 0.4, 1.0]).unwrap();
        let path = zoh_path(&p, |t| DVector::from_vec(vec![t.sin()]));
        let a = path.at(0.41).unwrap();
        let b = path.at(0.99).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn interval_lengths_sum_to_horizon(lens in prop::collection::vec(1e-3..1.0f64, 1..40)) {
            let mut knots = vec![0.25f64];
            for l in &lens {
                knots.push(knots.last().unwrap() + l);
            }
            let p = Partition::new(knots).unwrap();
            let total: f64 = (1..=p.num_intervals()).map(|k| p.interval_length(k)).sum();
            prop_assert!((total - (p.t_final() - p.t0())).abs() <= 1e-12 * total.abs());
        }

        #[test]
        fn index_is_the_unique_enclosing_interval(
            lens in prop::collection::vec(1e-3..1.0f64, 1..40),
            frac in 0.0..1.0f64,
        ) {
            let mut knots = vec![-0.5f64];
            for l in &lens {
                knots.push(knots.last().unwrap() + l);
            }
            let p = Partition::new(knots).unwrap();
            let t = p.t0() + frac * (p.t_final() - p.t0());
            let k = p.index_of(t).unwrap();
            // indicator form: exactly one interval contains t
            let mut hits = 0;
            for j in 1..=p.num_intervals() {
                let lo = p.knots()[j - 1];
                let hi = p.knots()[j];
                let inside = if j == p.num_intervals() {
                    t >= lo && t <= hi
                } else {
                    t >= lo && t < hi
                };
                if inside {
                    hits += 1;
                    prop_assert_eq!(j, k);
                }
            }
            prop_assert_eq!(hits, 1);
        }
    }
}
