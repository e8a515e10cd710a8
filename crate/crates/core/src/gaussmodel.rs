//! Multivariate Gaussian models with cached Cholesky and spectral data.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{self, SymmetricEigen};
use crate::{seeded_rng, Error, Point, Result, SeededRng};

/// Default relative covariance floor used by [`regularize_cov`].
pub const DEFAULT_FLOOR_RATIO: f64 = 1e-6;
/// Default absolute covariance floor used by [`regularize_cov`].
pub const DEFAULT_ABS_FLOOR: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-12;

/// `N(mean, cov)` with a positive-definite covariance.
///
/// Immutable once built: the Cholesky factor, log-determinant and the
/// descending eigendecomposition are computed at construction and always agree
/// with `cov`.
#[derive(Clone, Debug)]
pub struct GaussianModel {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol_lower: DMatrix<f64>,
    log_det_cov: f64,
    eigvals: DVector<f64>,
    eigvecs: DMatrix<f64>,
}

impl GaussianModel {
    /// Validates `cov` (square, finite, symmetric within `1e-12` relative,
    /// positive definite) and caches its factorizations.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if n == 0 {
            return Err(Error::InvalidArgument("zero-dimensional Gaussian".into()));
        }
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: cov.nrows(),
            });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "non-finite Gaussian parameters".into(),
            ));
        }
        let asym = linalg::max_asymmetry(&cov);
        if asym > SYMMETRY_TOL * linalg::max_abs(&cov) {
            return Err(Error::NotSymmetric { asymmetry: asym });
        }
        let cov = linalg::symmetrize(&cov);

        let SymmetricEigen { values, vectors } = linalg::symmetric_eigen(&cov);
        let min_eig = values[n - 1];
        if min_eig <= 0.0 {
            return Err(Error::NotPositiveDefinite {
                min_eigenvalue: min_eig,
            });
        }
        let chol = nalgebra::Cholesky::new(cov.clone()).ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: min_eig,
        })?;
        let chol_lower = chol.l();
        let log_det_cov = 2.0 * chol_lower.diagonal().iter().map(|d| d.ln()).sum::<f64>();

        Ok(Self {
            mean,
            cov,
            chol_lower,
            log_det_cov,
            eigvals: values,
            eigvecs: vectors,
        })
    }

    /// `N(0, I_n)`.
    pub fn standard(n: usize) -> Self {
        Self::new(DVector::zeros(n), DMatrix::identity(n, n)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Lower-triangular `L` with `L L^T = cov`.
    pub fn cholesky_lower(&self) -> &DMatrix<f64> {
        &self.chol_lower
    }

    pub fn log_det_cov(&self) -> f64 {
        self.log_det_cov
    }

    /// Eigenvalues in decreasing order.
    pub fn eigvals(&self) -> &DVector<f64> {
        &self.eigvals
    }

    /// Orthonormal eigenvectors as columns, matching [`Self::eigvals`].
    pub fn eigvecs(&self) -> &DMatrix<f64> {
        &self.eigvecs
    }

    fn check_dim(&self, actual: usize) -> Result<()> {
        if actual != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual,
            });
        }
        Ok(())
    }

    /// `(x - mean)^T cov^{-1} (x - mean)`.
    pub fn mahalanobis_sq(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.mahalanobis_sq_unchecked(x))
    }

    fn mahalanobis_sq_unchecked(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.mean;
        let z = self
            .chol_lower
            .solve_lower_triangular(&d)
            .expect("Cholesky factor has a positive diagonal");
        z.norm_squared()
    }

    /// `ln N(x; mean, cov)`, including the `-(n/2) ln 2π` constant.
    pub fn log_density(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_dim(x.len())?;
        Ok(self.log_density_unchecked(x))
    }

    pub(crate) fn log_density_unchecked(&self, x: &DVector<f64>) -> f64 {
        let n = self.dim() as f64;
        -0.5 * (n * (2.0 * PI).ln() + self.log_det_cov + self.mahalanobis_sq_unchecked(x))
    }

    /// `D(self || to)`.
    pub fn kl_to(&self, to: &GaussianModel) -> Result<f64> {
        kl_gaussian(self, to)
    }

    /// One draw `mean + L z` with `z ~ N(0, I)`.
    pub fn draw(&self, rng: &mut SeededRng) -> Point {
        let z = DVector::from_fn(self.dim(), |_, _| StandardNormal.sample(rng));
        &self.mean + &self.chol_lower * z
    }

    /// `count` draws from a generator seeded with `seed`.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Point> {
        let mut rng = seeded_rng(seed);
        (0..count).map(|_| self.draw(&mut rng)).collect()
    }
}

/// Closed-form relative entropy `D(from || to)` between two Gaussians:
///
/// `½ (ln det(K_from⁻¹ K_to) + tr(K_to⁻¹ K_from) + Δᵀ K_to⁻¹ Δ − n)`
/// with `Δ = mean_to − mean_from`.
pub fn kl_gaussian(from: &GaussianModel, to: &GaussianModel) -> Result<f64> {
    to.check_dim(from.dim())?;
    let n = from.dim() as f64;
    let whitened = to
        .chol_lower
        .solve_lower_triangular(&from.chol_lower)
        .ok_or(Error::NotPositiveDefinite {
            min_eigenvalue: 0.0,
        })?;
    let trace = whitened.norm_squared();
    let quad = to.mahalanobis_sq_unchecked(&from.mean);
    let kl = 0.5 * (to.log_det_cov - from.log_det_cov + trace + quad - n);
    // Rounding can push an exact zero slightly negative.
    if kl < 0.0 && kl > -1e-9 {
        return Ok(0.0);
    }
    Ok(kl)
}

/// Recomputes the cached factorizations from the model's covariance.
pub fn spectral_refresh(g: &GaussianModel) -> Result<GaussianModel> {
    GaussianModel::new(g.mean.clone(), g.cov.clone())
}

/// Returns `cov + εI` with `ε = max(floor_ratio · tr(cov)/n, abs_floor)`.
pub fn regularize_cov(cov: &DMatrix<f64>, floor_ratio: f64, abs_floor: f64) -> DMatrix<f64> {
    let n = cov.nrows();
    let eps = (floor_ratio * cov.trace() / n as f64).max(abs_floor);
    let mut out = linalg::symmetrize(cov);
    for i in 0..n {
        out[(i, i)] += eps;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn diag(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_diagonal(&DVector::from_row_slice(v))
    }

    fn random_model(n: usize, rng: &mut impl Rng) -> GaussianModel {
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let cov = &b * b.transpose() + DMatrix::identity(n, n) * 0.2;
        let mean = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        GaussianModel::new(mean, linalg::symmetrize(&cov)).unwrap()
    }

    // Composite Simpson rule on [a, b] with `intervals` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
        let h = (b - a) / intervals as f64;
        let mut acc = f(a) + f(b);
        for i in 1..intervals {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    fn pdf_1d(mean: f64, var: f64, x: f64) -> f64 {
        (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
    }

    #[test]
    fn log_density_at_origin_of_standard_normal() {
        for n in 1..5 {
            let g = GaussianModel::standard(n);
            let v = g.log_density(&DVector::zeros(n)).unwrap();
            assert_relative_eq!(v, -(n as f64) / 2.0 * (2.0 * PI).ln(), epsilon = 1e-15);
        }
    }

    #[test]
    fn log_density_one_dimensional_at_one() {
        let g = GaussianModel::standard(1);
        let v = g.log_density(&DVector::from_element(1, 1.0)).unwrap();
        assert_relative_eq!(v, -0.5 - 0.5 * (2.0 * PI).ln(), epsilon = 1e-14);
        assert_relative_eq!(v, -1.418_938_533_204_672_7, epsilon = 1e-12);
    }

    #[test]
    fn log_density_at_mean() {
        let mut rng = crate::seeded_rng(1);
        let g = random_model(4, &mut rng);
        let v = g.log_density(g.mean()).unwrap();
        let expected = -0.5 * (4.0 * (2.0 * PI).ln() + g.log_det_cov());
        assert_relative_eq!(v, expected, epsilon = 1e-12);
    }

    #[test]
    fn log_density_rejects_wrong_dimension() {
        let g = GaussianModel::standard(2);
        assert!(matches!(
            g.log_density(&DVector::zeros(3)),
            Err(Error::DimensionMismatch {
                expected: 2,
                actual: 3
            })
        ));
    }

    #[test]
    fn kl_of_identical_models_is_zero() {
        let mut rng = crate::seeded_rng(2);
        for n in 1..6 {
            let g = random_model(n, &mut rng);
            assert!(kl_gaussian(&g, &g).unwrap().abs() <= 1e-12);
        }
    }

    #[test]
    fn kl_hand_values() {
        let a = GaussianModel::standard(1);
        let b = GaussianModel::new(DVector::from_element(1, 1.0), DMatrix::identity(1, 1)).unwrap();
        assert_relative_eq!(kl_gaussian(&a, &b).unwrap(), 0.5, epsilon = 1e-14);

        let from = GaussianModel::standard(2);
        let to = GaussianModel::new(DVector::zeros(2), diag(&[2.0, 2.0])).unwrap();
        assert_relative_eq!(
            kl_gaussian(&from, &to).unwrap(),
            2f64.ln() - 0.5,
            epsilon = 1e-14
        );
    }

    #[test]
    fn kl_matches_one_dimensional_quadrature() {
        let mut rng = crate::seeded_rng(20);
        for _ in 0..20 {
            let (m1, v1) = (rng.random_range(-2.0..2.0), rng.random_range(0.3..3.0));
            let (m2, v2) = (rng.random_range(-2.0..2.0), rng.random_range(0.3..3.0));
            let f = GaussianModel::new(DVector::from_element(1, m1), diag(&[v1])).unwrap();
            let g = GaussianModel::new(DVector::from_element(1, m2), diag(&[v2])).unwrap();
            let integrand = |x: f64| {
                let p = pdf_1d(m1, v1, x);
                if p == 0.0 {
                    0.0
                } else {
                    p * (p / pdf_1d(m2, v2, x)).ln()
                }
            };
            let quad = simpson(
                integrand,
                m1 - 14.0 * v1.sqrt(),
                m1 + 14.0 * v1.sqrt(),
                20_000,
            );
            assert!((kl_gaussian(&f, &g).unwrap() - quad).abs() <= 1e-6);
        }
    }

    #[test]
    fn density_integrates_to_one() {
        let g1 = GaussianModel::new(DVector::from_element(1, 0.3), diag(&[0.7])).unwrap();
        let mass1 = simpson(
            |x| g1.log_density(&DVector::from_element(1, x)).unwrap().exp(),
            -10.0,
            10.0,
            4000,
        );
        assert!((mass1 - 1.0).abs() <= 1e-3);

        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.4, 0.5]);
        let g2 = GaussianModel::new(DVector::from_row_slice(&[0.5, -0.2]), cov).unwrap();
        let mass2 = simpson(
            |x| {
                simpson(
                    |y| {
                        g2.log_density(&DVector::from_row_slice(&[x, y]))
                            .unwrap()
                            .exp()
                    },
                    -8.0,
                    8.0,
                    400,
                )
            },
            -8.0,
            8.0,
            400,
        );
        assert!((mass2 - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn refresh_of_identity_and_diagonal() {
        let g = GaussianModel::standard(3);
        assert!(g.eigvals().iter().all(|&v| v == 1.0));
        assert_eq!(g.log_det_cov(), 0.0);

        let g = GaussianModel::new(DVector::zeros(2), diag(&[4.0, 1.0])).unwrap();
        assert_eq!(g.eigvals().as_slice(), &[4.0, 1.0]);
        assert_eq!(g.eigvecs(), &DMatrix::identity(2, 2));
        assert_relative_eq!(g.log_det_cov(), 4f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn refresh_reconstructs_random_spd() {
        let mut rng = crate::seeded_rng(5);
        for _ in 0..10 {
            let g = spectral_refresh(&random_model(5, &mut rng)).unwrap();
            let e = g.eigvecs();
            let recon = e * DMatrix::from_diagonal(g.eigvals()) * e.transpose();
            assert!(linalg::max_abs(&(recon - g.cov())) <= 1e-9 * linalg::max_abs(g.cov()));
            let gram = e.transpose() * e;
            assert!(linalg::max_abs(&(gram - DMatrix::identity(5, 5))) <= 1e-9);
            let sum_log: f64 = g.eigvals().iter().map(|v| v.ln()).sum();
            assert!((sum_log - g.log_det_cov()).abs() <= 1e-9 * g.log_det_cov().abs().max(1.0));
        }
    }

    #[test]
    fn rejects_indefinite_and_asymmetric() {
        let err = GaussianModel::new(DVector::zeros(2), diag(&[1.0, -0.5])).unwrap_err();
        match err {
            Error::NotPositiveDefinite { min_eigenvalue } => assert_eq!(min_eigenvalue, -0.5),
            e => panic!("unexpected {e}"),
        }
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]);
        assert!(matches!(
            GaussianModel::new(DVector::zeros(2), asym),
            Err(Error::NotSymmetric { .. })
        ));
    }

    #[test]
    fn regularize_zero_scatter() {
        let out = regularize_cov(
            &DMatrix::zeros(3, 3),
            DEFAULT_FLOOR_RATIO,
            DEFAULT_ABS_FLOOR,
        );
        assert_eq!(out, DMatrix::identity(3, 3) * DEFAULT_ABS_FLOOR);
    }

    #[test]
    fn regularize_shifts_spectrum() {
        let mut rng = crate::seeded_rng(6);
        let g = random_model(4, &mut rng);
        let eps = 1e-6 * g.cov().trace() / 4.0;
        let shifted =
            GaussianModel::new(DVector::zeros(4), regularize_cov(g.cov(), 1e-6, 1e-12)).unwrap();
        for (a, b) in shifted.eigvals().iter().zip(g.eigvals().iter()) {
            assert_relative_eq!(*a, b + eps, max_relative = 1e-12);
        }
    }

    #[test]
    fn regularize_colinear_scatter() {
        // Points on the line t * (1, 2, 2) / 3: rank-one scatter.
        let dir = DVector::from_row_slice(&[1.0, 2.0, 2.0]) / 3.0;
        let pts: Vec<Point> = (0..7).map(|i| &dir * (i as f64 - 3.0)).collect();
        let center = linalg::mean(&pts, 3);
        let scatter = linalg::scatter_about(&pts, &center);
        let eps = 1e-6 * scatter.trace() / 3.0;
        let g = GaussianModel::new(center, regularize_cov(&scatter, 1e-6, 1e-12)).unwrap();
        assert_relative_eq!(g.eigvals()[2], eps, max_relative = 1e-6);
        assert_relative_eq!(g.eigvals()[1], eps, max_relative = 1e-6);
    }

    #[test]
    fn sample_moments_and_determinism() {
        let g = GaussianModel::standard(2);
        let pts = g.sample(100_000, 11);
        let m = linalg::mean(&pts, 2);
        let c = linalg::scatter_about(&pts, &m);
        assert!(m.amax() < 0.02);
        assert!(linalg::max_abs(&(c - DMatrix::identity(2, 2))) < 0.03);
        assert_eq!(g.sample(50, 11), g.sample(50, 11));
    }

    #[test]
    fn sample_is_affine_transform_of_standard_draws() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let g = GaussianModel::new(DVector::from_row_slice(&[1.0, -1.0]), cov).unwrap();
        let z = GaussianModel::standard(2).sample(5, 4);
        let x = g.sample(5, 4);
        for (zi, xi) in z.iter().zip(&x) {
            let expected = g.mean() + g.cholesky_lower() * zi;
            assert!((expected - xi).amax() < 1e-14);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn kl_is_nonnegative(seed in any::<u64>(), n in 1usize..5) {
            let mut rng = crate::seeded_rng(seed);
            let a = random_model(n, &mut rng);
            let b = random_model(n, &mut rng);
            prop_assert!(kl_gaussian(&a, &b).unwrap() >= 0.0);
            prop_assert!(kl_gaussian(&a, &a).unwrap() <= 1e-12);
        }
    }
}
