//! Spectral matrix operations used by the HJI solution formulas.
//!
//! All three operations act through the eigendecomposition of a symmetric
//! matrix: the spectral heaviside keeps eigenspaces with positive
//! eigenvalues, the PSD projection clamps eigenvalues at zero, and the
//! trace maximproblem `max tr(Σ M)` over `0 ⪯ Σ ⪯ D` is solved in closed
//! form by sandwiching the heaviside between square roots of `D`.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};

/// Absolute-scale symmetry tolerance for inputs to the spectral ops.
pub const SYMMETRY_TOL: f64 = 1e-10;

fn check_symmetric(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidArgument(format!("{what} must be square")));
    }
    let scale = 1.0_f64.max(m.amax());
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::InvalidArgument(format!(
            "{what} must be symmetric: max asymmetry {asym:.3e}"
        )));
    }
    Ok(())
}

fn eigen_sym(m: &DMatrix<f64>) -> SymmetricEigen<f64, nalgebra::Dyn> {
    // symmetrize first so the decomposition sees an exactly symmetric matrix
    let s = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(s)
}

fn recompose<F>(m: &DMatrix<f64>, map: F) -> DMatrix<f64>
where
    F: Fn(f64) -> f64,
{
    let eig = eigen_sym(m);
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(map));
    &eig.eigenvectors * d * eig.eigenvectors.transpose()
}

/// Spectral heaviside `1(M)`: the orthogonal projector onto the span of
/// eigenvectors with strictly positive eigenvalues.
pub fn heaviside_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(m, "heaviside input")?;
    Ok(recompose(m, |l| if l > 0.0 { 1.0 } else { 0.0 }))
}

/// Projection `M₊` onto the positive semidefinite cone (eigenvalues clamped
/// at zero). Nearest PSD matrix in Frobenius norm.
pub fn psd_project(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(m, "psd projection input")?;
    Ok(recompose(m, |l| l.max(0.0)))
}

/// Principal symmetric square root of a PSD matrix; eigenvalues are clamped
/// at zero before rooting so slightly indefinite inputs round down.
pub fn sqrt_psd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(m, "matrix square root input")?;
    Ok(recompose(m, |l| l.max(0.0).sqrt()))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(m, "eigenvalue input")?;
    let mut ev: Vec<f64> = eigen_sym(m).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(ev)
}

/// Is `m` PSD within `tol` (relative to its largest eigenvalue magnitude)?
pub fn is_psd_within(m: &DMatrix<f64>, tol: f64) -> Result<bool> {
    let ev = sym_eigenvalues(m)?;
    let scale = ev.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    Ok(ev.first().map(|&l| l >= -tol * scale).unwrap_or(true))
}

/// Maximize `tr(Σ M)` over the cap `0 ⪯ Σ ⪯ D`.
///
/// Returns the maximizer `Σ* = D^{1/2} 1(D^{1/2} M D^{1/2}) D^{1/2}` and the
/// optimal value `tr[(D^{1/2} M D^{1/2})₊]`.
pub fn trace_max_over_cap(m: &DMatrix<f64>, d: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    check_symmetric(m, "trace objective")?;
    check_symmetric(d, "trace cap")?;
    if !is_psd_within(d, SYMMETRY_TOL)? {
        return Err(Error::InvalidArgument("trace cap must be PSD".into()));
    }
    if m.nrows() != d.nrows() {
        return Err(Error::InvalidArgument(format!(
            "dimension mismatch: objective is {}x{}, cap is {}x{}",
            m.nrows(),
            m.ncols(),
            d.nrows(),
            d.ncols()
        )));
    }
    let ds = sqrt_psd(d)?;
    let inner = &ds * m * &ds;
    let sigma = &ds * heaviside_psd(&inner)? * &ds;
    let value: f64 = sym_eigenvalues(&inner)?.iter().map(|l| l.max(0.0)).sum();
    Ok((sigma, value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-2.0..2.0));
        (&a + a.transpose()) * 0.5
    }

    fn random_psd(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        &a * a.transpose()
    }

    #[test]
    fn heaviside_of_negative_definite_is_zero() {
        let m = -DMatrix::<f64>::identity(3, 3);
        let h = heaviside_psd(&m).unwrap();
        assert!(h.amax() < 1e-14);
    }

    #[test]
    fn heaviside_diagonal_case() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, -3.0]));
        let h = heaviside_psd(&m).unwrap();
        assert_relative_eq!(h[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(h[(1, 1)], 0.0, epsilon = 1e-12);
        assert!(h[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn heaviside_is_projector_and_commutes() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let m = random_symmetric(4, &mut rng);
            let x = heaviside_psd(&m).unwrap();
            // idempotent, symmetric, commutes with input
            assert!(((&x * &x) - &x).amax() < 1e-10);
            assert!((&x - x.transpose()).amax() < 1e-10);
            assert!(((&x * &m) - (&m * &x)).amax() < 1e-9);
            // tr(X M) equals the sum of positive eigenvalues (eigensolver oracle)
            let pos_sum: f64 = sym_eigenvalues(&m)
                .unwrap()
                .iter()
                .map(|l| l.max(0.0))
                .sum();
            assert_relative_eq!((&x * &m).trace(), pos_sum, epsilon = 1e-9);
            // eigenvalues of X are 0/1
            for l in sym_eigenvalues(&x).unwrap() {
                assert!(l.abs() < 1e-10 || (l - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn heaviside_rejects_asymmetric() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        assert!(heaviside_psd(&m).is_err());
        assert!(psd_project(&m).is_err());
    }

    #[test]
    fn psd_project_fixes_psd_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let m = random_psd(3, &mut rng);
            let p = psd_project(&m).unwrap();
            assert!((&p - &m).norm() < 1e-10);
        }
    }

    #[test]
    fn psd_project_clamps_diagonal() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, -3.0]));
        let p = psd_project(&m).unwrap();
        assert_relative_eq!(p[(0, 0)], 2.0, epsilon = 1e-12);
        assert_relative_eq!(p[(1, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn psd_project_eigenvalues_are_clamped_input_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let m = random_symmetric(4, &mut rng);
            let p = psd_project(&m).unwrap();
            let mut want: Vec<f64> = sym_eigenvalues(&m)
                .unwrap()
                .into_iter()
                .map(|l| l.max(0.0))
                .collect();
            want.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let got = sym_eigenvalues(&p).unwrap();
            for (g, w) in got.iter().zip(want.iter()) {
                assert!((g - w).abs() < 1e-10);
            }
            // idempotent
            let pp = psd_project(&p).unwrap();
            assert!((&pp - &p).amax() < 1e-10);
        }
    }

    #[test]
    fn psd_project_is_nearest_in_frobenius() {
        // brute-force sampling oracle: no random PSD matrix beats the projection
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let m = random_symmetric(3, &mut rng);
        let p = psd_project(&m).unwrap();
        let best = (&m - &p).norm();
        for _ in 0..100 {
            let s = random_psd(3, &mut rng);
            assert!((&m - &s).norm() + 1e-12 >= best);
        }
    }

    #[test]
    fn trace_max_diagonal_example() {
        let d = DMatrix::<f64>::identity(2, 2);
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
        let (sigma, value) = trace_max_over_cap(&m, &d).unwrap();
        assert_relative_eq!(value, 1.0, epsilon = 1e-12);
        assert_relative_eq!(sigma[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(sigma[(1, 1)], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn trace_max_negative_definite_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = random_psd(3, &mut rng);
        let m = -random_psd(3, &mut rng) - DMatrix::identity(3, 3) * 0.1;
        let (sigma, value) = trace_max_over_cap(&m, &d).unwrap();
        assert!(value.abs() < 1e-12);
        assert!(sigma.amax() < 1e-9);
    }

    #[test]
    fn trace_max_dominates_random_feasible_points() {
        // feasible-point sampling oracle: sample Σ = D^{1/2} K D^{1/2} with
        // K = W Λ Wᵀ, eigenvalues in [0,1], and check tr(Σ M) ≤ value.
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for dim in 1..=3usize {
            let m = random_symmetric(dim, &mut rng);
            let d = random_psd(dim, &mut rng);
            let (_, value) = trace_max_over_cap(&m, &d).unwrap();
            let ds = sqrt_psd(&d).unwrap();
            for _ in 0..1000 {
                let g = random_symmetric(dim, &mut rng);
                let eig = SymmetricEigen::new(g);
                let lam = DMatrix::from_diagonal(
                    &eig.eigenvalues.map(|_| rng.gen_range(0.0..=1.0)),
                );
                let k = &eig.eigenvectors * lam * eig.eigenvectors.transpose();
                let sigma = &ds * k * &ds;
                let tr = (&sigma * &m).trace();
                assert!(
                    tr <= value + 1e-9,
                    "feasible point beat the maximizer: {tr} > {value}"
                );
            }
        }
    }

    #[test]
    fn sqrt_psd_squares_back() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let m = random_psd(4, &mut rng);
        let s = sqrt_psd(&m).unwrap();
        assert!(((&s * &s) - &m).amax() < 1e-10);
        assert!((&s - s.transpose()).amax() < 1e-12);
    }
}
