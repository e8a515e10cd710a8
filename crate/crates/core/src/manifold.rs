//! Chart atlas, smooth partition of unity and the glued Riemannian metric on
//! reduced coordinates.
//!
//! Every codebook component becomes a chart: a ball of radius
//! `r_m = √λ₁(K_m)` centred at `Π_m μ_m` in `ℝᵏ`, with a bump `ψ_m` that is
//! 1 up to `r_m − δ_m` and vanishes from `r_m` on. The metric at `y` is
//! `G(y) = Σ_m η_m(y + Π_m μ_m) G_m`, where `G_m = R_mᵀ R_m` and
//! `R_m = Π_m Π_refᵀ` re-expresses reference-chart coordinates in chart `m`.

use nalgebra::{DMatrix, DVector};

use crate::kernels::BumpProfile;
use crate::linalg::{symmetric_eigen, symmetrize};
use crate::{Codebook, Error, Result};

pub const DEFAULT_DELTA_RATIO: f64 = 0.1;
/// Lower bound enforced on the spectrum of each chart form `G_m`.
pub const RANK_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct Chart {
    pub radius: f64,
    pub delta: f64,
    /// `k × n`, orthonormal rows.
    pub frame: DMatrix<f64>,
    pub offset: DVector<f64>,
    pub weight: f64,
    bump: BumpProfile,
}

impl Chart {
    pub fn bump(&self) -> &BumpProfile {
        &self.bump
    }
}

#[derive(Clone, Debug)]
pub struct ChartAtlas {
    k: usize,
    n: usize,
    charts: Vec<Chart>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionWeights {
    pub weights: Vec<f64>,
    pub defined: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricValue {
    pub form: DMatrix<f64>,
    pub defined: bool,
    /// Chart whose frame the coordinates are read in; `None` when undefined.
    pub reference: Option<usize>,
    /// `η_m(y + Π_m μ_m)` per chart.
    pub coefficients: Vec<f64>,
}

pub fn build_atlas(cb: &Codebook, k: usize, delta_ratio: f64) -> Result<ChartAtlas> {
    let n = cb.dim();
    if k == 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "chart dimension must satisfy 1 <= k < n = {n}, got {k}"
        )));
    }
    if !(delta_ratio > 0.0 && delta_ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "delta_ratio must lie in (0, 1), got {delta_ratio}"
        )));
    }
    let charts = cb
        .components()
        .iter()
        .map(|c| {
            let radius = c.model.eigvals()[0].sqrt();
            let delta = delta_ratio * radius;
            let frame: DMatrix<f64> = c.model.eigvecs().columns(0, k).transpose();
            let offset = &frame * c.model.mean();
            Ok(Chart {
                radius,
                delta,
                frame,
                offset,
                weight: c.weight,
                bump: BumpProfile::new(radius - delta, radius)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChartAtlas { k, n, charts })
}

impl ChartAtlas {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.charts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.charts.is_empty()
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    /// `G_m` relative to the reference chart. Identity when `m == reference`.
    pub fn chart_form(&self, m: usize, reference: usize) -> Result<DMatrix<f64>> {
        self.check_chart(m)?;
        self.check_chart(reference)?;
        if m == reference {
            return Ok(DMatrix::identity(self.k, self.k));
        }
        let r = &self.charts[m].frame * self.charts[reference].frame.transpose();
        let mut g = symmetrize(&(r.transpose() * &r));
        let lo = symmetric_eigen(&g).values[self.k - 1];
        if lo < RANK_FLOOR {
            for i in 0..self.k {
                g[(i, i)] += RANK_FLOOR;
            }
        }
        Ok(g)
    }

    fn check_chart(&self, m: usize) -> Result<()> {
        if m >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "chart {m} out of range ({} charts)",
                self.len()
            )));
        }
        Ok(())
    }

    fn check_vec(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                actual: v.len(),
            });
        }
        Ok(())
    }

    fn weights_unchecked(&self, u: &DVector<f64>) -> PartitionWeights {
        let raw: Vec<f64> = self
            .charts
            .iter()
            .map(|c| c.weight * c.bump.eval_unchecked((u - &c.offset).norm()))
            .collect();
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            PartitionWeights {
                weights: raw.iter().map(|w| w / total).collect(),
                defined: true,
            }
        } else {
            PartitionWeights {
                weights: vec![0.0; raw.len()],
                defined: false,
            }
        }
    }

    fn coefficients(&self, y: &DVector<f64>) -> Vec<f64> {
        (0..self.len())
            .map(|m| {
                self.weights_unchecked(&(y + &self.charts[m].offset))
                    .weights[m]
            })
            .collect()
    }
}

/// `η_m(u) = p_m ψ_m(u) / Σ p_m' ψ_m'(u)`; all zero and `defined = false`
/// when no bump covers `u`.
pub fn partition_weights(atlas: &ChartAtlas, u: &DVector<f64>) -> Result<PartitionWeights> {
    atlas.check_vec(u)?;
    Ok(atlas.weights_unchecked(u))
}

/// `G(y)`. Without an explicit reference the chart with the largest
/// coefficient is used (ties to the smaller index).
pub fn metric_matrix(
    atlas: &ChartAtlas,
    y: &DVector<f64>,
    reference: Option<usize>,
) -> Result<MetricValue> {
    atlas.check_vec(y)?;
    if let Some(r) = reference {
        atlas.check_chart(r)?;
    }
    let coefficients = atlas.coefficients(y);
    let k = atlas.k;
    if coefficients.iter().all(|&c| c == 0.0) {
        return Ok(MetricValue {
            form: DMatrix::zeros(k, k),
            defined: false,
            reference: None,
            coefficients,
        });
    }
    let reference = reference.unwrap_or_else(|| {
        let mut best = 0;
        for (m, &c) in coefficients.iter().enumerate() {
            if c > coefficients[best] {
                best = m;
            }
        }
        best
    });
    let mut form = DMatrix::zeros(k, k);
    for (m, &c) in coefficients.iter().enumerate() {
        if c > 0.0 {
            form += atlas.chart_form(m, reference)? * c;
        }
    }
    Ok(MetricValue {
        form: symmetrize(&form),
        defined: true,
        reference: Some(reference),
        coefficients,
    })
}

/// `g_y(u, u2) = uᵀ G(y) u2`; zero where the metric is undefined.
pub fn metric(
    atlas: &ChartAtlas,
    y: &DVector<f64>,
    u: &DVector<f64>,
    u2: &DVector<f64>,
    reference: Option<usize>,
) -> Result<f64> {
    atlas.check_vec(u)?;
    atlas.check_vec(u2)?;
    let g = metric_matrix(atlas, y, reference)?;
    Ok(u.dot(&(&g.form * u2)))
}

/// `‖G(y + h·dir) − G(y)‖_max / h`, with the reference chart resolved at `y`
/// and held fixed.
pub fn metric_smoothness_probe(
    atlas: &ChartAtlas,
    y: &DVector<f64>,
    direction: &DVector<f64>,
    h: f64,
    reference: Option<usize>,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step must be > 0, got {h}")));
    }
    atlas.check_vec(direction)?;
    let here = metric_matrix(atlas, y, reference)?;
    if !here.defined {
        return Err(Error::UndefinedMetric(format!(
            "metric undefined at {:?}",
            y.as_slice()
        )));
    }
    let there = metric_matrix(atlas, &(y + direction * h), here.reference)?;
    if !there.defined {
        return Err(Error::UndefinedMetric(
            "metric undefined at the displaced point".into(),
        ));
    }
    Ok(crate::linalg::max_abs(&(there.form - here.form)) / h)
}
