//! Known-density diagnostics: Monte-Carlo relative entropy and L₁ distance,
//! the design objective `Ī`, the index of resolvability and the finite-sample
//! loss bounds it controls.
//!
//! Every estimator takes an explicit seed and reports a standard error.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::lloyd::{fit, FitConfig};
use crate::synth::{sample_embedding, EmbeddingSpec};
use crate::{seeded_rng, Codebook, Error, GaussianModel, Point, Result, SeededRng};

pub const MIN_MC_SAMPLES: usize = 100;

/// A density that can be evaluated pointwise.
pub trait Density: Sync {
    fn dim(&self) -> usize;
    fn ln_density(&self, x: &Point) -> f64;
}

/// A density that can also be sampled.
pub trait Sampler: Density {
    fn sample_point(&self, rng: &mut SeededRng) -> Point;
}

impl Density for GaussianModel {
    fn dim(&self) -> usize {
        GaussianModel::dim(self)
    }

    fn ln_density(&self, x: &Point) -> f64 {
        self.log_density_unchecked(x)
    }
}

impl Sampler for GaussianModel {
    fn sample_point(&self, rng: &mut SeededRng) -> Point {
        self.draw(rng)
    }
}

impl Density for EmbeddingSpec {
    fn dim(&self) -> usize {
        self.n()
    }

    fn ln_density(&self, x: &Point) -> f64 {
        self.log_density_unchecked(x)
    }
}

impl Sampler for EmbeddingSpec {
    fn sample_point(&self, rng: &mut SeededRng) -> Point {
        self.draw(rng).0
    }
}

/// The codebook read as the mixture `Σ p_m g_m`.
impl Density for Codebook {
    fn dim(&self) -> usize {
        Codebook::dim(self)
    }

    fn ln_density(&self, x: &Point) -> f64 {
        self.mixture_log_density_unchecked(x)
    }
}

impl Sampler for Codebook {
    fn sample_point(&self, rng: &mut SeededRng) -> Point {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.len() - 1;
        for (m, c) in self.components().iter().enumerate() {
            acc += c.weight;
            if u < acc && c.weight > 0.0 {
                pick = m;
                break;
            }
        }
        self.component(pick).model.draw(rng)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MCEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl MCEstimate {
    fn from_terms(terms: &[f64], seed: u64) -> Self {
        let n = terms.len() as f64;
        let mean = terms.iter().sum::<f64>() / n;
        let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self {
            value: mean,
            std_error: (var / n).sqrt(),
            n_samples: terms.len(),
            seed,
        }
    }
}

fn check_n(n: usize) -> Result<()> {
    if n < MIN_MC_SAMPLES {
        return Err(Error::NotEnoughSamples {
            needed: MIN_MC_SAMPLES,
            got: n,
        });
    }
    Ok(())
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: a,
            actual: b,
        });
    }
    Ok(())
}

fn draw_all<S: Sampler + ?Sized>(s: &S, n: usize, seed: u64) -> Vec<Point> {
    let mut rng = seeded_rng(seed);
    (0..n).map(|_| s.sample_point(&mut rng)).collect()
}

fn finite_terms<F>(points: &[Point], f: F) -> Result<Vec<f64>>
where
    F: Fn(&Point) -> f64 + Sync,
{
    points
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let v = f(x);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::NonFinite { index: i, value: v })
            }
        })
        .collect()
}

/// `D(f*‖g) ≈ (1/n) Σ [ln f*(X_i) − ln g(X_i)]`, `X_i ~ f*`.
pub fn mc_kl<F, G>(f_star: &F, g: &G, n: usize, seed: u64) -> Result<MCEstimate>
where
    F: Sampler + ?Sized,
    G: Density + ?Sized,
{
    check_n(n)?;
    check_dims(f_star.dim(), g.dim())?;
    let xs = draw_all(f_star, n, seed);
    let terms = finite_terms(&xs, |x| f_star.ln_density(x) - g.ln_density(x))?;
    Ok(MCEstimate::from_terms(&terms, seed))
}

/// `∫|f − g|` by importance sampling from `½f + ½g`, where the weighted
/// integrand reduces to `2|tanh((ln f − ln g)/2)|`.
pub fn mc_l1<F, G>(f: &F, g: &G, n: usize, seed: u64) -> Result<MCEstimate>
where
    F: Sampler + ?Sized,
    G: Sampler + ?Sized,
{
    check_n(n)?;
    check_dims(f.dim(), g.dim())?;
    let mut rng = seeded_rng(seed);
    let xs: Vec<Point> = (0..n)
        .map(|_| {
            if rng.random::<bool>() {
                f.sample_point(&mut rng)
            } else {
                g.sample_point(&mut rng)
            }
        })
        .collect();
    let terms = xs
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let (a, b) = (f.ln_density(x), g.ln_density(x));
            if a == f64::NEG_INFINITY && b == f64::NEG_INFINITY || a.is_nan() || b.is_nan() {
                return Err(Error::InvalidArgument(format!(
                    "proposal degenerate at sample {i}: both densities vanish"
                )));
            }
            let t = if a == b {
                0.0
            } else {
                2.0 * ((a - b) / 2.0).tanh().abs()
            };
            Ok(t)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MCEstimate::from_terms(&terms, seed))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IbarEstimate {
    pub value: f64,
    pub std_error: f64,
    /// `P̂(R_m)`, the cell frequencies.
    pub cell_probs: Vec<f64>,
    /// Within-cell `D(f_m‖g_m)` estimates; `None` for empty cells.
    pub cell_divergence: Vec<Option<f64>>,
    pub skipped: Vec<usize>,
}

/// `Ī = Σ_m P̂(R_m) [D̂(f_m‖g_m) + μ Φ_m]` from samples of `f*` and their
/// encoder assignments.
pub fn ibar_estimate<F>(
    cb: &Codebook,
    assignments: &[usize],
    f_star: &F,
    data: &[Point],
) -> Result<IbarEstimate>
where
    F: Density + ?Sized,
{
    if data.len() != assignments.len() {
        return Err(Error::InvalidArgument(format!(
            "{} assignments for {} samples",
            assignments.len(),
            data.len()
        )));
    }
    if data.len() < 2 {
        return Err(Error::NotEnoughSamples {
            needed: 2,
            got: data.len(),
        });
    }
    check_dims(cb.dim(), f_star.dim())?;
    let mut counts = vec![0usize; cb.len()];
    for &a in assignments {
        if a >= cb.len() {
            return Err(Error::InvalidArgument(format!(
                "assignment {a} out of range"
            )));
        }
        counts[a] += 1;
    }
    let total = data.len() as f64;
    let probs: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
    let ratios = finite_terms(data, |x| f_star.ln_density(x))?;
    let ratios: Vec<f64> = data
        .par_iter()
        .zip(ratios.par_iter())
        .zip(assignments.par_iter())
        .map(|((x, lf), &a)| lf - cb.component(a).model.log_density_unchecked(x))
        .collect();
    if let Some(i) = ratios.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            index: i,
            value: ratios[i],
        });
    }
    let mut sums = vec![0.0; cb.len()];
    for (r, &a) in ratios.iter().zip(assignments) {
        sums[a] += r;
    }
    let mut skipped = Vec::new();
    let mut cell_divergence = Vec::with_capacity(cb.len());
    let mut complexity = 0.0;
    for m in 0..cb.len() {
        if counts[m] == 0 {
            log::warn!("cell {m} is empty; skipped in the objective estimate");
            skipped.push(m);
            cell_divergence.push(None);
            continue;
        }
        cell_divergence.push(Some(sums[m] / counts[m] as f64 - probs[m].ln()));
        complexity += probs[m] * cb.complexity_phi(m);
    }
    let terms: Vec<f64> = ratios
        .iter()
        .zip(assignments)
        .map(|(r, &a)| r - probs[a].ln())
        .collect();
    let est = MCEstimate::from_terms(&terms, 0);
    Ok(IbarEstimate {
        value: est.value + cb.mu() * complexity,
        std_error: est.std_error,
        cell_probs: probs,
        cell_divergence,
        skipped,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvabilityTerm {
    pub divergence: MCEstimate,
    /// `L(g_m) = Φ_m − ln p_m`.
    pub complexity: f64,
    /// `D(f*‖g_m) + μ L(g_m) / N`.
    pub term: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvabilityReport {
    pub terms: Vec<ResolvabilityTerm>,
    pub r_index: f64,
    pub r_index_std_error: f64,
    pub argmin: usize,
    pub n: usize,
}

/// `R_{μ,N}(f*) = min_m [D(f*‖g_m) + μ L(g_m)/N]`. All divergences share one
/// sample of `f*`.
pub fn resolvability<F>(
    cb: &Codebook,
    f_star: &F,
    n: usize,
    mc_n: usize,
    seed: u64,
) -> Result<ResolvabilityReport>
where
    F: Sampler + ?Sized,
{
    if n == 0 {
        return Err(Error::InvalidArgument("sample size N must be >= 1".into()));
    }
    check_n(mc_n)?;
    check_dims(f_star.dim(), cb.dim())?;
    let xs = draw_all(f_star, mc_n, seed);
    let lf = finite_terms(&xs, |x| f_star.ln_density(x))?;
    let mut terms = Vec::with_capacity(cb.len());
    for (m, c) in cb.components().iter().enumerate() {
        let ratios = finite_terms(&xs, |x| c.model.log_density_unchecked(x))?;
        let ratios: Vec<f64> = lf.iter().zip(&ratios).map(|(a, b)| a - b).collect();
        let divergence = MCEstimate::from_terms(&ratios, seed);
        let complexity = cb.complexity_phi(m) - c.weight.ln();
        terms.push(ResolvabilityTerm {
            term: divergence.value + cb.mu() * complexity / n as f64,
            divergence,
            complexity,
        });
    }
    let mut argmin = 0;
    for (m, t) in terms.iter().enumerate() {
        if t.term < terms[argmin].term {
            argmin = m;
        }
    }
    Ok(ResolvabilityReport {
        r_index: terms[argmin].term,
        r_index_std_error: terms[argmin].divergence.std_error,
        argmin,
        terms,
        n,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Theorem1Bounds {
    pub alpha: f64,
    /// Holds with probability at least `1 − 2δ`.
    pub prob_bound: f64,
    /// Bound on the expected loss.
    pub exp_bound: f64,
}

/// Finite-sample loss bounds in terms of the index of resolvability, with
/// `α = M(f*) / (2(μ − h))`. The Bernstein constants `h` and `M(f*)` are
/// taken as given.
pub fn theorem1_bound(
    r_index: f64,
    codebook_size: usize,
    mu: f64,
    h: f64,
    m_fstar: f64,
    n: usize,
    delta: f64,
) -> Result<Theorem1Bounds> {
    if !(h > 0.0) {
        return Err(Error::HypothesisViolated(format!(
            "h > 0 required, got h = {h}"
        )));
    }
    if !(m_fstar >= 0.0) {
        return Err(Error::HypothesisViolated(format!(
            "M(f*) >= 0 required, got {m_fstar}"
        )));
    }
    if !(mu > h + m_fstar / 2.0) {
        return Err(Error::HypothesisViolated(format!(
            "mu > h + M(f*)/2 violated: {mu} <= {}",
            h + m_fstar / 2.0
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::HypothesisViolated(format!(
            "0 < delta < 1 violated: delta = {delta}"
        )));
    }
    if codebook_size == 0 || n == 0 {
        return Err(Error::InvalidArgument(
            "codebook size and N must be >= 1".into(),
        ));
    }
    if !r_index.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "non-finite resolvability index {r_index}"
        )));
    }
    let alpha = m_fstar / (2.0 * (mu - h));
    let lead = (1.0 + alpha) / (1.0 - alpha) * r_index;
    let scale = (1.0 - alpha) * n as f64;
    let size = codebook_size as f64;
    Ok(Theorem1Bounds {
        alpha,
        prob_bound: lead + 2.0 * mu * (size / delta).ln() / scale,
        exp_bound: lead + 4.0 * size * mu / scale,
    })
}

/// Sample mean and variance of `U_m = ln g_m(X) − ln f*(X)`, `X ~ f*`.
/// Advisory only: these do not verify the Bernstein condition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentAdvisory {
    pub mean: f64,
    pub variance: f64,
}

pub fn moment_advisory<F>(
    cb: &Codebook,
    f_star: &F,
    mc_n: usize,
    seed: u64,
) -> Result<Vec<MomentAdvisory>>
where
    F: Sampler + ?Sized,
{
    check_n(mc_n)?;
    check_dims(f_star.dim(), cb.dim())?;
    let xs = draw_all(f_star, mc_n, seed);
    let lf = finite_terms(&xs, |x| f_star.ln_density(x))?;
    cb.components()
        .iter()
        .map(|c| {
            let lg = finite_terms(&xs, |x| c.model.log_density_unchecked(x))?;
            let u: Vec<f64> = lg.iter().zip(&lf).map(|(a, b)| a - b).collect();
            let n = u.len() as f64;
            let mean = u.iter().sum::<f64>() / n;
            let variance = u.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            Ok(MomentAdvisory { mean, variance })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    /// Fit settings; `m_init` and `seed` are overridden per grid point.
    pub template: FitConfig,
    pub n_grid: Vec<usize>,
    pub seeds: Vec<u64>,
    pub mc_n: usize,
    /// Upper bound on `m_init = ⌈√N⌉`.
    pub m_cap: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            template: FitConfig::default(),
            n_grid: vec![500, 1000, 2000, 4000, 8000],
            seeds: (0..5).collect(),
            mc_n: 20_000,
            m_cap: 256,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub seed: u64,
    pub m_init: usize,
    pub m_final: usize,
    pub m_over_n: f64,
    pub kl: MCEstimate,
    pub r_index: f64,
    pub max_complexity: f64,
    pub max_complexity_over_n: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    /// Ordered by `N`, then by seed.
    pub rows: Vec<SweepRow>,
    /// `(N, median KL)` per grid point.
    pub median_kl: Vec<(usize, f64)>,
}

/// Seed used for the Monte-Carlo evaluation of a grid point fitted with `seed`.
pub fn sweep_mc_seed(seed: u64) -> u64 {
    seed.wrapping_add(0x9E37_79B9)
}

/// Fits a fresh sample at every `(N, seed)` and reports the divergence of the
/// fitted mixture from `f*`.
pub fn consistency_sweep(cfg: &SweepConfig, f_star: &EmbeddingSpec) -> Result<SweepTable> {
    if cfg.n_grid.is_empty() || cfg.seeds.is_empty() {
        return Err(Error::InvalidArgument(
            "sweep grid and seed list must be non-empty".into(),
        ));
    }
    if cfg.n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(
            "sweep grid must be strictly increasing".into(),
        ));
    }
    check_n(cfg.mc_n)?;
    let jobs: Vec<(usize, u64)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| cfg.seeds.iter().map(move |&s| (n, s)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(n, seed)| {
            let data = sample_embedding(f_star, n, seed)?.points;
            let m_init = ((n as f64).sqrt().ceil() as usize).clamp(1, cfg.m_cap.max(1));
            let fit_cfg = FitConfig {
                m_init: Some(m_init),
                seed,
                ..cfg.template.clone()
            };
            let report = fit(&data, &fit_cfg)?;
            let cb = &report.final_codebook;
            let mc_seed = sweep_mc_seed(seed);
            let kl = mc_kl(f_star, cb, cfg.mc_n, mc_seed)?;
            let res = resolvability(cb, f_star, n, cfg.mc_n, mc_seed)?;
            let max_complexity = res
                .terms
                .iter()
                .map(|t| t.complexity)
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(SweepRow {
                n,
                seed,
                m_init,
                m_final: cb.len(),
                m_over_n: m_init as f64 / n as f64,
                kl,
                r_index: res.r_index,
                max_complexity,
                max_complexity_over_n: max_complexity / n as f64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let median_kl = cfg
        .n_grid
        .iter()
        .map(|&n| {
            let mut v: Vec<f64> = rows
                .iter()
                .filter(|r| r.n == n)
                .map(|r| r.kl.value)
                .collect();
            v.sort_by(f64::total_cmp);
            let mid = v.len() / 2;
            let med = if v.len() % 2 == 1 {
                v[mid]
            } else {
                0.5 * (v[mid - 1] + v[mid])
            };
            (n, med)
        })
        .collect();
    Ok(SweepTable { rows, median_kl })
}
