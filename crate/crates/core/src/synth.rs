//! Gaussian chart embeddings: `L ~ w`, `Y | L ~ N(0, I_k)`,
//! `X | Y, L ~ N(μ_L + A_L Y, Σ_L)`, whose marginal density is the mixture
//! `Σ_l w_l N(x; μ_l, A_l A_lᵀ + Σ_l)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::codebook::log_sum_exp;
use crate::{linalg, seeded_rng, Error, GaussianModel, Point, Result};

/// Names accepted by [`builtin_fixture`].
pub const FIXTURES: [&str; 3] = ["two-charts-2d", "arc-3d-k1", "clusters-5d-k2"];

#[derive(Clone, Debug)]
pub struct EmbeddingChart {
    pub weight: f64,
    pub mean: DVector<f64>,
    /// `n × k` loading matrix `A_l`.
    pub loading: DMatrix<f64>,
    /// `n × n` noise covariance `Σ_l`.
    pub noise_cov: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct EmbeddingSpec {
    n: usize,
    k: usize,
    charts: Vec<EmbeddingChart>,
    marginals: Vec<GaussianModel>,
    noise: Vec<GaussianModel>,
}

impl EmbeddingSpec {
    pub fn new(k: usize, charts: Vec<EmbeddingChart>) -> Result<Self> {
        let first = charts
            .first()
            .ok_or_else(|| Error::InvalidArgument("embedding needs at least one chart".into()))?;
        let n = first.mean.len();
        if k == 0 || k >= n {
            return Err(Error::InvalidArgument(format!(
                "need 0 < k < n, got k={k}, n={n}"
            )));
        }
        let mut marginals = Vec::with_capacity(charts.len());
        let mut noise = Vec::with_capacity(charts.len());
        for (l, c) in charts.iter().enumerate() {
            if !(c.weight > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "chart {l} weight must be > 0"
                )));
            }
            if c.mean.len() != n || c.noise_cov.shape() != (n, n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: c.mean.len(),
                });
            }
            if c.loading.shape() != (n, k) {
                return Err(Error::InvalidArgument(format!(
                    "chart {l} loading is {:?}, expected ({n}, {k})",
                    c.loading.shape()
                )));
            }
            noise.push(GaussianModel::new(DVector::zeros(n), c.noise_cov.clone())?);
            let cov = linalg::symmetrize(&(&c.loading * c.loading.transpose() + &c.noise_cov));
            marginals.push(GaussianModel::new(c.mean.clone(), cov)?);
        }
        let total: f64 = charts.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "chart weights sum to {total}, not 1"
            )));
        }
        Ok(Self {
            n,
            k,
            charts,
            marginals,
            noise,
        })
    }

    /// One chart with zero loading: the density is exactly `model`.
    pub fn from_gaussian(model: &GaussianModel, k: usize) -> Result<Self> {
        let n = model.dim();
        Self::new(
            k,
            vec![EmbeddingChart {
                weight: 1.0,
                mean: model.mean().clone(),
                loading: DMatrix::zeros(n, k),
                noise_cov: model.cov().clone(),
            }],
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn charts(&self) -> &[EmbeddingChart] {
        &self.charts
    }

    /// `N(μ_l, A_l A_lᵀ + Σ_l)`.
    pub fn chart_marginal(&self, l: usize) -> &GaussianModel {
        &self.marginals[l]
    }

    pub fn log_density(&self, x: &Point) -> Result<f64> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: x.len(),
            });
        }
        Ok(self.log_density_unchecked(x))
    }

    pub(crate) fn log_density_unchecked(&self, x: &Point) -> f64 {
        let terms: Vec<f64> = self
            .charts
            .iter()
            .zip(&self.marginals)
            .map(|(c, g)| c.weight.ln() + g.log_density_unchecked(x))
            .collect();
        log_sum_exp(&terms)
    }

    /// Draws one sample along with its latent chart and coordinates.
    pub fn draw(&self, rng: &mut crate::SeededRng) -> (Point, Latent) {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chart = self.charts.len() - 1;
        for (l, c) in self.charts.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                chart = l;
                break;
            }
        }
        let y = DVector::from_fn(self.k, |_, _| StandardNormal.sample(rng));
        let c = &self.charts[chart];
        let x = &c.mean + &c.loading * &y + self.noise[chart].draw(rng);
        (x, Latent { chart, coords: y })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Latent {
    pub chart: usize,
    pub coords: DVector<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub points: Vec<Point>,
    pub latents: Option<Vec<Latent>>,
}

/// `count` i.i.d. draws with their latent labels; deterministic in `seed`.
pub fn sample_embedding(spec: &EmbeddingSpec, count: usize, seed: u64) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::InvalidArgument("sample count must be >= 1".into()));
    }
    let mut rng = seeded_rng(seed);
    let (points, latents) = (0..count).map(|_| spec.draw(&mut rng)).unzip();
    Ok(Dataset {
        points,
        latents: Some(latents),
    })
}

/// `ln Σ_l w_l N(x; μ_l, A_l A_lᵀ + Σ_l)` via log-sum-exp.
pub fn true_log_density(spec: &EmbeddingSpec, x: &Point) -> Result<f64> {
    spec.log_density(x)
}

fn isotropic(n: usize, var: f64) -> DMatrix<f64> {
    DMatrix::identity(n, n) * var
}

/// Fixed regression embeddings.
///
/// - `two-charts-2d`: `n = 2, k = 1`, equal weights, means `(0,0)` and
///   `(4,0)`, loadings along the x-axis, noise `0.01 I`.
/// - `arc-3d-k1`: six equally weighted charts centred on a half circle of
///   radius 3 in the xy-plane of ℝ³, loadings `0.5 ×` the arc tangent,
///   noise standard deviation 0.05.
/// - `clusters-5d-k2`: four equally weighted charts in ℝ⁵ with random means
///   (`N(0, 9 I)`) and random orthonormal 2-frames scaled by 0.8, noise
///   `0.01 I`. The only fixture that depends on `seed`.
pub fn builtin_fixture(name: &str, seed: u64) -> Result<EmbeddingSpec> {
    match name {
        "two-charts-2d" => {
            let chart = |x0: f64| EmbeddingChart {
                weight: 0.5,
                mean: DVector::from_row_slice(&[x0, 0.0]),
                loading: DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
                noise_cov: isotropic(2, 0.01),
            };
            EmbeddingSpec::new(1, vec![chart(0.0), chart(4.0)])
        }
        "arc-3d-k1" => {
            let radius = 3.0;
            let charts = (0..6)
                .map(|l| {
                    let theta = l as f64 * PI / 5.0;
                    EmbeddingChart {
                        weight: 1.0 / 6.0,
                        mean: DVector::from_row_slice(&[
                            radius * theta.cos(),
                            radius * theta.sin(),
                            0.0,
                        ]),
                        loading: DMatrix::from_row_slice(
                            3,
                            1,
                            &[-0.5 * theta.sin(), 0.5 * theta.cos(), 0.0],
                        ),
                        noise_cov: isotropic(3, 0.05 * 0.05),
                    }
                })
                .collect();
            EmbeddingSpec::new(1, charts)
        }
        "clusters-5d-k2" => {
            let mut rng = seeded_rng(seed);
            let charts = (0..4)
                .map(|_| {
                    let mean =
                        DVector::from_fn(5, |_, _| 3.0 * rng.sample::<f64, _>(StandardNormal));
                    let raw = DMatrix::from_fn(5, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
                    let frame = raw.qr().q();
                    EmbeddingChart {
                        weight: 0.25,
                        mean,
                        loading: frame * 0.8,
                        noise_cov: isotropic(5, 0.01),
                    }
                })
                .collect();
            EmbeddingSpec::new(2, charts)
        }
        _ => Err(Error::UnknownFixture {
            name: name.to_string(),
            valid: FIXTURES.join(", "),
        }),
    }
}
