//! Ensemble summary statistics: box-plot summaries, CLT confidence
//! intervals, and log-log slope fits for order-of-convergence estimates.

use crate::error::{Error, Result};

/// Neumaier-compensated sum; order-stable for the magnitudes seen here.
pub fn compensated_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for &v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Arithmetic mean with compensated accumulation.
pub fn mean(values: &[f64]) -> f64 {
    compensated_sum(values) / values.len() as f64
}

/// Unbiased sample variance.
pub fn variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(values);
    let sq: Vec<f64> = values.iter().map(|v| (v - m) * (v - m)).collect();
    compensated_sum(&sq) / (n as f64 - 1.0)
}

/// Standard error of the mean.
pub fn std_error(values: &[f64]) -> f64 {
    (variance(values) / values.len() as f64).sqrt()
}

/// Five-line box summary at one time point, Tukey-fenced.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSummary {
    pub t: f64,
    /// Extremes over all samples.
    pub raw_min: f64,
    pub raw_max: f64,
    /// Extremes over in-fence samples (whiskers).
    pub min: f64,
    pub max: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub mean: f64,
    pub outliers: Vec<f64>,
    pub n: usize,
}

/// Linear-interpolation quantile on a sorted slice (the common "type 7"
/// convention).
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Box summary of `samples` tagged with time `t`. Quartiles use linear
/// interpolation; whiskers are the extremes inside the Tukey fences
/// `[q1 − 1.5·IQR, q3 + 1.5·IQR]`; everything outside is listed in
/// `outliers`.
pub fn box_summary(samples: &[f64], t: f64) -> Result<BoxSummary> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("box summary of empty sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let lo_fence = q1 - 1.5 * iqr;
    let hi_fence = q3 + 1.5 * iqr;
    let mut outliers = Vec::new();
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in &sorted {
        if v < lo_fence || v > hi_fence {
            outliers.push(v);
        } else {
            min = min.min(v);
            max = max.max(v);
        }
    }
    Ok(BoxSummary {
        t,
        raw_min: sorted[0],
        raw_max: *sorted.last().unwrap(),
        min,
        max,
        q1,
        median,
        q3,
        mean: mean(&sorted),
        outliers,
        n: sorted.len(),
    })
}

/// Inverse standard normal CDF (Acklam's rational approximation, |err| < 1.15e-9).
fn inv_norm_cdf(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    let p_low = 0.02425;
    if p < p_low {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - p_low {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -inv_norm_cdf(1.0 - p)
    }
}

/// CLT confidence interval: `(mean, z · s/√n)` at the given level.
pub fn mean_ci(samples: &[f64], level: f64) -> Result<(f64, f64)> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(
            "confidence interval needs at least 2 samples".into(),
        ));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "confidence level must be in (0,1), got {level}"
        )));
    }
    let z = inv_norm_cdf(0.5 + level / 2.0);
    Ok((mean(samples), z * std_error(samples)))
}

/// Result of a least-squares line fit on `(log x, log y)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence interval on the slope (Student t with n−2 dof).
    pub slope_ci95: (f64, f64),
}

/// Two-sided 0.975 Student-t quantiles for small degrees of freedom.
fn t_quantile_975(dof: usize) -> f64 {
    const TABLE: [f64; 30] = [
        12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179,
        2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
        2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
    ];
    if dof == 0 {
        f64::INFINITY
    } else if dof <= TABLE.len() {
        TABLE[dof - 1]
    } else {
        1.96
    }
}

/// Least-squares slope of `log y` against `log x`, with a 95% interval.
/// Inputs must be positive and at least 3 points long.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidArgument("slope fit: length mismatch".into()));
    }
    if xs.len() < 3 {
        return Err(Error::InvalidArgument(
            "slope fit needs at least 3 points".into(),
        ));
    }
    if xs.iter().chain(ys.iter()).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(
            "slope fit needs strictly positive values".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = mean(&lx);
    let my = mean(&ly);
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(ly.iter()).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = lx
        .iter()
        .zip(ly.iter())
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let dof = lx.len().saturating_sub(2);
    let se = if dof > 0 {
        (ss_res / dof as f64 / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    let half = t_quantile_975(dof) * se;
    let _ = n;
    Ok(SlopeFit {
        slope,
        intercept,
        slope_ci95: (slope - half, slope + half),
    })
}
