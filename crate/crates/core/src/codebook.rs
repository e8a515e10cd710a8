//! The Gaussian codebook with its weights, idealized codelengths and the
//! kernel-weighted relative-entropy complexity `Φ_Γ`.

use nalgebra::DMatrix;

use crate::gaussmodel::kl_gaussian;
use crate::kernels::{kernel_eval, KernelSpec};
use crate::{Error, GaussianModel, Point, Result};

const WEIGHT_TOL: f64 = 1e-9;

/// One codebook entry: a Gaussian, its probability and its codelength in nats.
#[derive(Clone, Debug)]
pub struct Component {
    pub model: GaussianModel,
    pub weight: f64,
    pub length: f64,
}

/// Pairwise kernel weights between component means and the resulting
/// per-component complexity.
#[derive(Clone, Debug)]
pub struct ComplexityCache {
    kappa: DMatrix<f64>,
    phi: Vec<f64>,
}

impl ComplexityCache {
    fn build(components: &[Component], kernel: &KernelSpec) -> Result<Self> {
        let m = components.len();
        let mut kappa = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in (i + 1)..m {
                let k = kernel_eval(
                    kernel,
                    components[i].model.mean(),
                    components[j].model.mean(),
                )?;
                kappa[(i, j)] = k;
                kappa[(j, i)] = k;
            }
        }
        let mut phi = vec![0.0; m];
        for (i, slot) in phi.iter_mut().enumerate() {
            let mut acc = 0.0;
            for j in 0..m {
                if j == i || kappa[(i, j)] == 0.0 {
                    continue;
                }
                // D(g_j || g_i): divergence from the neighbour to this component.
                acc += kappa[(i, j)] * kl_gaussian(&components[j].model, &components[i].model)?;
            }
            *slot = acc;
        }
        Ok(Self { kappa, phi })
    }

    pub fn kappa(&self) -> &DMatrix<f64> {
        &self.kappa
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }
}

/// The codebook `Γ` together with kernel, trade-off `μ` and complexity cache.
#[derive(Clone, Debug)]
pub struct Codebook {
    components: Vec<Component>,
    kernel: KernelSpec,
    mu: f64,
    cache: ComplexityCache,
}

impl Codebook {
    /// Validates the invariants (non-empty, common dimension, weights summing
    /// to one, nonnegative lengths satisfying Kraft) and builds the cache.
    pub fn new(components: Vec<Component>, kernel: KernelSpec, mu: f64) -> Result<Self> {
        kernel.validate()?;
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidCodebook(format!(
                "trade-off mu must be >= 0, got {mu}"
            )));
        }
        let first = components
            .first()
            .ok_or_else(|| Error::InvalidCodebook("codebook has no components".into()))?;
        let n = first.model.dim();
        for c in &components {
            if c.model.dim() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: c.model.dim(),
                });
            }
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(Error::InvalidCodebook(format!(
                    "invalid weight {}",
                    c.weight
                )));
            }
            if !(c.length >= 0.0 && c.length.is_finite()) {
                return Err(Error::InvalidCodebook(format!(
                    "invalid length {}",
                    c.length
                )));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidCodebook(format!(
                "weights sum to {total}, not 1"
            )));
        }
        let kraft: f64 = components.iter().map(|c| (-c.length).exp()).sum();
        if kraft > 1.0 + WEIGHT_TOL {
            return Err(Error::InvalidCodebook(format!(
                "Kraft sum {kraft} exceeds 1"
            )));
        }
        let cache = ComplexityCache::build(&components, &kernel)?;
        Ok(Self {
            components,
            kernel,
            mu,
            cache,
        })
    }

    /// Same kernel and `μ`, new components.
    pub fn with_components(&self, components: Vec<Component>) -> Result<Self> {
        Self::new(components, self.kernel, self.mu)
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.components[0].model.dim()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn component(&self, m: usize) -> &Component {
        &self.components[m]
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn cache(&self) -> &ComplexityCache {
        &self.cache
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight).collect()
    }

    pub fn lengths(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.length).collect()
    }

    /// `Σ_m e^{-ℓ_m}`.
    pub fn kraft_sum(&self) -> f64 {
        self.components.iter().map(|c| (-c.length).exp()).sum()
    }

    /// `Φ_Γ(g_m) = Σ_{m′≠m} κ(μ_m, μ_{m′}) D(g_{m′} || g_m)`.
    pub fn complexity_phi(&self, m: usize) -> f64 {
        self.cache.phi[m]
    }

    /// `ℓ_m + μ Φ_Γ(g_m)`, the part of `ρ₀` that does not depend on `x`.
    pub fn rate_term(&self, m: usize) -> f64 {
        self.components[m].length + self.mu * self.cache.phi[m]
    }

    /// `ρ₀(x, m) = −ln g_m(x) + ℓ_m + μ Φ_Γ(g_m)`.
    pub fn rho0(&self, x: &Point, m: usize) -> Result<f64> {
        self.check_index(m)?;
        Ok(-self.components[m].model.log_density(x)? + self.rate_term(m))
    }

    pub(crate) fn rho0_unchecked(&self, x: &Point, m: usize) -> f64 {
        -self.components[m].model.log_density_unchecked(x) + self.rate_term(m)
    }

    /// Minimum-`ρ₀` index for `x`; ties resolve to the smallest index.
    pub fn encode_point(&self, x: &Point) -> Result<usize> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(self.encode_point_unchecked(x))
    }

    pub(crate) fn encode_point_unchecked(&self, x: &Point) -> usize {
        let mut best = (0, f64::INFINITY);
        for m in 0..self.len() {
            let v = self.rho0_unchecked(x, m);
            if v < best.1 {
                best = (m, v);
            }
        }
        best.0
    }

    /// `ρ(x, m) = ln f(x) + ρ₀(x, m)` for a caller-supplied `ln f(x)`.
    pub fn rho(&self, x: &Point, m: usize, log_f: f64) -> Result<f64> {
        Ok(log_f + self.rho0(x, m)?)
    }

    /// `ln Σ_m p_m g_m(x)`.
    pub fn mixture_log_density(&self, x: &Point) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(self.mixture_log_density_unchecked(x))
    }

    pub(crate) fn mixture_log_density_unchecked(&self, x: &Point) -> f64 {
        let terms: Vec<f64> = self
            .components
            .iter()
            .filter(|c| c.weight > 0.0)
            .map(|c| c.weight.ln() + c.model.log_density_unchecked(x))
            .collect();
        log_sum_exp(&terms)
    }

    /// Sets every length to the Kraft-optimal `ℓ_m = −ln p_m`.
    pub fn length_update(&self) -> Result<Codebook> {
        let mut components = self.components.clone();
        for (index, c) in components.iter_mut().enumerate() {
            if c.weight <= 0.0 {
                return Err(Error::ZeroWeight { index });
            }
            c.length = -c.weight.ln();
        }
        self.with_components(components)
    }

    /// Drops cells with zero count and sets the survivors' weights to their
    /// empirical frequencies `N_m / Σ N`. Lengths and models are kept.
    pub fn remove_empty(&self, counts: &[usize]) -> Result<Codebook> {
        if counts.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: counts.len(),
            });
        }
        let total: usize = counts.iter().sum();
        if total == 0 {
            return Err(Error::AllCellsEmpty);
        }
        let components = self
            .components
            .iter()
            .zip(counts)
            .filter(|(_, &n)| n > 0)
            .map(|(c, &n)| Component {
                weight: n as f64 / total as f64,
                ..c.clone()
            })
            .collect();
        self.with_components(components)
    }

    fn check_index(&self, m: usize) -> Result<()> {
        if m >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "component index {m} out of range (|M| = {})",
                self.len()
            )));
        }
        Ok(())
    }
}

/// New index of each old cell after [`Codebook::remove_empty`].
pub fn compact_index_map(counts: &[usize]) -> Vec<Option<usize>> {
    let mut next = 0;
    counts
        .iter()
        .map(|&n| {
            (n > 0).then(|| {
                next += 1;
                next - 1
            })
        })
        .collect()
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}
