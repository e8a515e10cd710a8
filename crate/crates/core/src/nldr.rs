//! Local-PCA reduction and reconstruction on the encoder partition.
//!
//! A point is sent to its minimum-`ρ₀` cell `m` and represented by the
//! coefficients of `x − μ_m` on the top-`k` eigenvectors of `K_m`. The
//! decoder maps `(m, u)` back to `μ_m + Σ_i u_i e_i^{(m)}`, so decode ∘
//! encode is the orthogonal projection onto the cell's principal affine
//! subspace.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::{Codebook, Error, Point, Result};

/// A reduced point: chart index and `k` coordinates in that chart's frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedPoint {
    pub chart: usize,
    pub coords: DVector<f64>,
}

/// Per-component projections `Π_m` (rows = top-`k` eigenvectors of `K_m`).
#[derive(Clone, Debug)]
pub struct ChartProjector {
    k: usize,
    frames: Vec<DMatrix<f64>>,
    means: Vec<DVector<f64>>,
}

impl ChartProjector {
    /// Frames from the codebook's spectral cache. `k = n` is accepted and
    /// gives a lossless projector.
    pub fn from_codebook(cb: &Codebook, k: usize) -> Result<Self> {
        let n = cb.dim();
        if k == 0 || k > n {
            return Err(Error::InvalidArgument(format!(
                "reduced dimension must satisfy 1 <= k <= n = {n}, got {k}"
            )));
        }
        let frames = cb
            .components()
            .iter()
            .map(|c| c.model.eigvecs().columns(0, k).transpose())
            .collect();
        let means = cb
            .components()
            .iter()
            .map(|c| c.model.mean().clone())
            .collect();
        Ok(Self { k, frames, means })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.means[0].len()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame(&self, m: usize) -> &DMatrix<f64> {
        &self.frames[m]
    }

    pub fn mean(&self, m: usize) -> &DVector<f64> {
        &self.means[m]
    }

    /// `v_m(x) = Π_m (x − μ_m)`.
    pub fn project(&self, m: usize, x: &Point) -> Result<DVector<f64>> {
        self.check_chart(m)?;
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch {
                expected: self.n(),
                actual: x.len(),
            });
        }
        Ok(&self.frames[m] * (x - &self.means[m]))
    }

    /// `w_m(u) = μ_m + Π_mᵀ u`.
    pub fn lift(&self, m: usize, u: &DVector<f64>) -> Result<Point> {
        self.check_chart(m)?;
        if u.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                actual: u.len(),
            });
        }
        Ok(&self.means[m] + self.frames[m].tr_mul(u))
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
}

fn check_pair(cb: &Codebook, proj: &ChartProjector) -> Result<()> {
    if cb.len() != proj.len() || cb.dim() != proj.n() {
        return Err(Error::InvalidArgument(format!(
            "projector ({} charts, n = {}) does not match codebook ({} components, n = {})",
            proj.len(),
            proj.n(),
            cb.len(),
            cb.dim()
        )));
    }
    Ok(())
}

/// `v̂(x) = (α(x), Π_α(x) (x − μ_α(x)))`.
pub fn reduce(cb: &Codebook, proj: &ChartProjector, x: &Point) -> Result<ReducedPoint> {
    check_pair(cb, proj)?;
    let chart = cb.encode_point(x)?;
    Ok(ReducedPoint {
        chart,
        coords: proj.project(chart, x)?,
    })
}

/// `ŵ(m, u) = μ_m + Σ_i u_i e_i^{(m)}`.
pub fn reconstruct(proj: &ChartProjector, p: &ReducedPoint) -> Result<Point> {
    proj.lift(p.chart, &p.coords)
}

/// `(1/N) Σ ‖X_i − ŵ(v̂(X_i))‖²`.
pub fn avg_reconstruction_distortion(
    cb: &Codebook,
    proj: &ChartProjector,
    data: &[Point],
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::NotEnoughSamples { needed: 1, got: 0 });
    }
    let errs = data
        .par_iter()
        .map(|x| {
            let r = reduce(cb, proj, x)?;
            Ok((x - reconstruct(proj, &r)?).norm_squared())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.iter().sum::<f64>() / data.len() as f64)
}

/// `A √(2 (Ī − μ Σ_m p_m Φ_m))`: bound on the excess squared-error of the
/// composite coder when run on the true source instead of the fitted mixture.
pub fn pinsker_mismatch_bound(ibar: f64, phi_avg: f64, mu: f64, dist_bound: f64) -> Result<f64> {
    if !(dist_bound > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "distortion bound must be > 0, got {dist_bound}"
        )));
    }
    if !(mu >= 0.0 && phi_avg >= 0.0) {
        return Err(Error::InvalidArgument(
            "mu and average complexity must be >= 0".into(),
        ));
    }
    let radicand = ibar - mu * phi_avg;
    if radicand < 0.0 || radicand.is_nan() {
        return Err(Error::InvalidArgument(format!(
            "inconsistent estimates: Ī = {ibar} is below μ·Φ̄ = {}",
            mu * phi_avg
        )));
    }
    Ok(dist_bound * (2.0 * radicand).sqrt())
}
