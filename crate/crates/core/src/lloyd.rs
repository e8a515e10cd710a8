//! Empirical Lloyd descent for the complexity-regularized codebook.
//!
//! Each iteration runs the minimum-`ρ₀` encoder, drops empty cells, applies
//! the centroid decoder and resets lengths to `−ln p_m`. The centroid update
//! freezes the kernel weights and neighbouring components at their values
//! from the previous iteration, which turns the coupled update into an
//! independent closed form per cell (see [`centroid_step`]).

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::codebook::{compact_index_map, Codebook, Component};
use crate::gaussmodel::{kl_gaussian, regularize_cov, DEFAULT_ABS_FLOOR, DEFAULT_FLOOR_RATIO};
use crate::kernels::KernelSpec;
use crate::{linalg, seeded_rng, Error, GaussianModel, Point, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitScheme {
    /// First mean is the sample nearest the data centroid; each further mean
    /// is the sample farthest from those already chosen.
    FarthestPoint,
    /// Uniformly random distinct samples.
    RandomSubset,
}

/// Covariance floor applied after every centroid update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CovFloor {
    pub ratio: f64,
    pub abs: f64,
}

impl Default for CovFloor {
    fn default() -> Self {
        Self {
            ratio: DEFAULT_FLOOR_RATIO,
            abs: DEFAULT_ABS_FLOOR,
        }
    }
}

impl CovFloor {
    pub fn apply(&self, cov: &DMatrix<f64>) -> DMatrix<f64> {
        regularize_cov(cov, self.ratio, self.abs)
    }
}

#[derive(Clone, Debug)]
pub struct FitConfig {
    /// Initial codebook size; `None` means `min(32, N/10)` (at least 1).
    pub m_init: Option<usize>,
    pub mu: f64,
    /// `None` means a Gaussian kernel with `σ = diameter / √m_init`.
    pub kernel: Option<KernelSpec>,
    /// Relative-improvement stopping threshold.
    pub epsilon: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub cov_floor: CovFloor,
    pub init_scheme: InitScheme,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            m_init: None,
            mu: 1.0,
            kernel: None,
            epsilon: 1e-4,
            max_iter: 200,
            seed: 0,
            cov_floor: CovFloor::default(),
            init_scheme: InitScheme::FarthestPoint,
        }
    }
}

impl FitConfig {
    pub fn resolved_m_init(&self, n_samples: usize) -> usize {
        self.m_init.unwrap_or_else(|| (n_samples / 10).clamp(1, 32))
    }

    pub fn resolved_kernel(&self, data: &[Point]) -> KernelSpec {
        self.kernel.unwrap_or_else(|| {
            let m = self.resolved_m_init(data.len()) as f64;
            let diam = linalg::diameter(data);
            let sigma = if diam > 0.0 { diam / m.sqrt() } else { 1.0 };
            KernelSpec::Gaussian { sigma }
        })
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be > 0, got {}",
                self.epsilon
            )));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "mu must be >= 0, got {}",
                self.mu
            )));
        }
        if self.m_init == Some(0) {
            return Err(Error::InvalidArgument("m_init must be >= 1".into()));
        }
        if !(self.cov_floor.ratio > 0.0 && self.cov_floor.abs > 0.0) {
            return Err(Error::InvalidArgument(
                "covariance floors must be positive".into(),
            ));
        }
        if let Some(k) = &self.kernel {
            k.validate()?;
        }
        Ok(())
    }
}

/// Output of the minimum-distortion encoder.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Encoding {
    pub assignments: Vec<usize>,
    pub counts: Vec<usize>,
}

/// Average `ρ₀` values and per-cell surrogate values recorded around each
/// step of one Lloyd iteration.
#[derive(Clone, Debug)]
pub struct IterationDiagnostics {
    /// Previous codebook with previous assignments (`D_{r−1}`).
    pub before_encode: f64,
    /// Previous codebook with the fresh assignments.
    pub after_encode: f64,
    /// After the centroid update, before lengths are reset.
    pub before_length: f64,
    /// After the length update (`D_r`).
    pub after_length: f64,
    /// Frozen surrogate per cell at the old and at the updated model.
    pub surrogate_before: Vec<f64>,
    pub surrogate_after: Vec<f64>,
    pub removed: usize,
    /// Cells that kept their previous model in the centroid step.
    pub retained: usize,
    /// Kraft sum right after the length update.
    pub kraft_sum: f64,
}

#[derive(Clone, Debug)]
pub struct FitReport {
    /// `D_0`, the average `ρ₀` of the initial codebook under its own encoder.
    pub initial_distortion: f64,
    /// `D_1, D_2, …`, one entry per completed iteration.
    pub distortion_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_codebook: Codebook,
    pub assignments: Vec<usize>,
    pub counts: Vec<usize>,
    pub removed_cells: usize,
    pub steps: Vec<IterationDiagnostics>,
    pub m_init: usize,
}

fn check_data(data: &[Point]) -> Result<usize> {
    let first = data
        .first()
        .ok_or(Error::NotEnoughSamples { needed: 1, got: 0 })?;
    let n = first.len();
    for x in data {
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite sample".into()));
        }
    }
    Ok(n)
}

/// Builds the starting codebook: seeded means, the regularized global
/// covariance for every component, uniform weights and lengths `ln m_init`.
pub fn initialize(data: &[Point], cfg: &FitConfig) -> Result<Codebook> {
    cfg.validate()?;
    let n = check_data(data)?;
    let m_init = cfg.resolved_m_init(data.len());
    if data.len() < m_init {
        return Err(Error::NotEnoughSamples {
            needed: m_init,
            got: data.len(),
        });
    }
    let centre = linalg::mean(data, n);
    let cov = cfg.cov_floor.apply(&linalg::scatter_about(data, &centre));

    let seeds = match cfg.init_scheme {
        InitScheme::FarthestPoint => farthest_point_seeds(data, &centre, m_init),
        InitScheme::RandomSubset => {
            let mut rng = seeded_rng(cfg.seed);
            rand::seq::index::sample(&mut rng, data.len(), m_init).into_vec()
        }
    };

    let weight = 1.0 / m_init as f64;
    let length = (m_init as f64).ln();
    let components = seeds
        .into_iter()
        .map(|i| {
            Ok(Component {
                model: GaussianModel::new(data[i].clone(), cov.clone())?,
                weight,
                length,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Codebook::new(components, cfg.resolved_kernel(data), cfg.mu)
}

fn farthest_point_seeds(data: &[Point], centre: &DVector<f64>, count: usize) -> Vec<usize> {
    let first = argmin_by(data.iter().map(|x| (x - centre).norm_squared()));
    let mut chosen = vec![first];
    let mut min_dist: Vec<f64> = data
        .iter()
        .map(|x| (x - &data[first]).norm_squared())
        .collect();
    while chosen.len() < count {
        let next = argmin_by(min_dist.iter().map(|d| -d));
        chosen.push(next);
        for (d, x) in min_dist.iter_mut().zip(data) {
            *d = d.min((x - &data[next]).norm_squared());
        }
    }
    chosen
}

/// Index of the smallest value; ties go to the smallest index.
fn argmin_by(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::INFINITY);
    for (i, v) in values.enumerate() {
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Minimum-`ρ₀` encoder. Ties resolve to the smallest index.
pub fn encode_step(cb: &Codebook, data: &[Point]) -> Encoding {
    let rates: Vec<f64> = (0..cb.len()).map(|m| cb.rate_term(m)).collect();
    let assignments: Vec<usize> = data
        .par_iter()
        .map(|x| {
            argmin_by(
                cb.components()
                    .iter()
                    .zip(&rates)
                    .map(|(c, rate)| -c.model.log_density_unchecked(x) + rate),
            )
        })
        .collect();
    let mut counts = vec![0; cb.len()];
    for &a in &assignments {
        counts[a] += 1;
    }
    Encoding {
        assignments,
        counts,
    }
}

/// `(1/N) Σ_i ρ₀(X_i, assignments_i)`.
pub fn average_distortion(cb: &Codebook, data: &[Point], assignments: &[usize]) -> f64 {
    let per_sample: Vec<f64> = data
        .par_iter()
        .zip(assignments.par_iter())
        .map(|(x, &m)| cb.rho0_unchecked(x, m))
        .collect();
    per_sample.iter().sum::<f64>() / data.len() as f64
}

fn cells(assignments: &[usize], m: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); m];
    for (i, &a) in assignments.iter().enumerate() {
        out[a].push(i);
    }
    out
}

/// Frozen-kernel objective of cell `m` evaluated at `candidate`:
///
/// `(1/N_m) Σ_{i∈R_m} −ln g(X_i) + μ Σ_{m′≠m} κ(μ_m, μ_{m′}) D(g_{m′} || g)`
///
/// with the kernel weights and neighbours `g_{m′}` taken from `cb`. The
/// length term is omitted because it does not depend on `g`.
pub fn frozen_surrogate(
    cb: &Codebook,
    data: &[Point],
    assignments: &[usize],
    m: usize,
    candidate: &GaussianModel,
) -> Result<f64> {
    let members: Vec<&Point> = assignments
        .iter()
        .zip(data)
        .filter(|(&a, _)| a == m)
        .map(|(_, x)| x)
        .collect();
    if members.is_empty() {
        return Err(Error::EmptyCell { index: m });
    }
    let nll = members
        .iter()
        .map(|x| -candidate.log_density_unchecked(x))
        .sum::<f64>()
        / members.len() as f64;
    let mut penalty = 0.0;
    for (j, other) in cb.components().iter().enumerate() {
        let k = cb.cache().kappa()[(m, j)];
        if j == m || k == 0.0 {
            continue;
        }
        penalty += k * kl_gaussian(&other.model, candidate)?;
    }
    Ok(nll + cb.mu() * penalty)
}

/// Centroid decoder with frozen kernel data.
///
/// With `λ_{m′} = μ κ(μ_m, μ_{m′})` from the current codebook and
/// `T = 1 + Σ λ_{m′}`, the frozen objective of cell `m` is `T` times the
/// Gaussian cross-entropy of the mixture of the cell's empirical measure
/// (weight 1) and the neighbours `g_{m′}` (weights `λ_{m′}`). Its minimizer
/// matches that mixture's first two moments:
///
/// `μ_new = (x̄_m + Σ λ μ_{m′}) / T`
///
/// `K_new = (S_m + Σ λ (K_{m′} + (μ_new − μ_{m′})(μ_new − μ_{m′})ᵀ)) / T`
///
/// where `S_m` is the cell scatter about `μ_new`. The covariance is then
/// floored. Weights and lengths are carried over unchanged.
pub fn centroid_step(
    cb: &Codebook,
    data: &[Point],
    assignments: &[usize],
    floor: &CovFloor,
) -> Result<Codebook> {
    if assignments.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            actual: assignments.len(),
        });
    }
    let n = cb.dim();
    let by_cell = cells(assignments, cb.len());
    if let Some(index) = by_cell.iter().position(|c| c.is_empty()) {
        return Err(Error::EmptyCell { index });
    }
    let kappa = cb.cache().kappa();
    let mu = cb.mu();

    let components = by_cell
        .par_iter()
        .enumerate()
        .map(|(m, members)| {
            let xbar = linalg::mean(members.iter().map(|&i| &data[i]), n);
            let mut total = 1.0;
            let mut mean = xbar;
            for (j, other) in cb.components().iter().enumerate() {
                let lambda = mu * kappa[(m, j)];
                if j == m || lambda == 0.0 {
                    continue;
                }
                total += lambda;
                mean.axpy(lambda, other.model.mean(), 1.0);
            }
            mean /= total;

            let mut cov = linalg::scatter_about(members.iter().map(|&i| &data[i]), &mean);
            for (j, other) in cb.components().iter().enumerate() {
                let lambda = mu * kappa[(m, j)];
                if j == m || lambda == 0.0 {
                    continue;
                }
                let d = &mean - other.model.mean();
                cov += other.model.cov() * lambda;
                cov.ger(lambda, &d, &d, 1.0);
            }
            cov /= total;

            Ok(Component {
                model: GaussianModel::new(mean, floor.apply(&cov))?,
                ..cb.component(m).clone()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    cb.with_components(components)
}

fn relative_improvement_below(prev: f64, cur: f64, epsilon: f64) -> bool {
    if prev > 0.0 {
        (prev - cur) / prev < epsilon
    } else {
        (prev - cur).abs() < epsilon
    }
}

/// Runs the full descent from [`initialize`] until the relative improvement
/// of the average `ρ₀` drops below `epsilon` or `max_iter` is reached.
pub fn fit(data: &[Point], cfg: &FitConfig) -> Result<FitReport> {
    let mut cb = initialize(data, cfg)?;
    let m_init = cb.len();
    let Encoding {
        mut assignments,
        mut counts,
    } = encode_step(&cb, data);
    let initial_distortion = average_distortion(&cb, data, &assignments);

    let mut prev = initial_distortion;
    let mut trace = Vec::new();
    let mut steps = Vec::new();
    let mut removed_cells = 0;
    let mut converged = false;

    for iteration in 1..=cfg.max_iter {
        let before_encode = average_distortion(&cb, data, &assignments);
        let enc = encode_step(&cb, data);
        let after_encode = average_distortion(&cb, data, &enc.assignments);

        let map = compact_index_map(&enc.counts);
        let removed = map.iter().filter(|m| m.is_none()).count();
        removed_cells += removed;
        let pruned = cb.remove_empty(&enc.counts)?;
        assignments = enc
            .assignments
            .iter()
            .map(|&a| map[a].expect("assigned cells are non-empty"))
            .collect();
        counts = enc.counts.into_iter().filter(|&c| c > 0).collect();

        let proposed = centroid_step(&pruned, data, &assignments, &cfg.cov_floor)?;
        // The floor shifts the closed-form minimizer slightly; a cell keeps its
        // current model whenever the floored update would score worse.
        let mut surrogate_before = Vec::with_capacity(pruned.len());
        let mut surrogate_after = Vec::with_capacity(pruned.len());
        let mut components = Vec::with_capacity(pruned.len());
        let mut retained = 0;
        for m in 0..pruned.len() {
            let old = frozen_surrogate(&pruned, data, &assignments, m, &pruned.component(m).model)?;
            let new =
                frozen_surrogate(&pruned, data, &assignments, m, &proposed.component(m).model)?;
            surrogate_before.push(old);
            if new > old {
                retained += 1;
                surrogate_after.push(old);
                components.push(pruned.component(m).clone());
            } else {
                surrogate_after.push(new);
                components.push(proposed.component(m).clone());
            }
        }
        let updated = if retained == 0 {
            proposed
        } else {
            pruned.with_components(components)?
        };
        let before_length = average_distortion(&updated, data, &assignments);
        cb = updated.length_update()?;
        let current = average_distortion(&cb, data, &assignments);

        log::debug!(
            "iteration {iteration}: |M| = {}, D = {current:.6}, removed {removed}",
            cb.len()
        );
        steps.push(IterationDiagnostics {
            before_encode,
            after_encode,
            before_length,
            after_length: current,
            surrogate_before,
            surrogate_after,
            removed,
            retained,
            kraft_sum: cb.kraft_sum(),
        });
        trace.push(current);

        if relative_improvement_below(prev, current, cfg.epsilon) {
            converged = true;
            break;
        }
        prev = current;
    }

    Ok(FitReport {
        initial_distortion,
        iterations: trace.len(),
        distortion_trace: trace,
        converged,
        final_codebook: cb,
        assignments,
        counts,
        removed_cells,
        steps,
        m_init,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use std::f64::consts::PI;

    fn pts(rows: &[&[f64]]) -> Vec<Point> {
        rows.iter().map(|r| DVector::from_row_slice(r)).collect()
    }

    fn clusters(centres: &[[f64; 2]], per: usize, spread: f64, seed: u64) -> Vec<Point> {
        let mut out = Vec::new();
        for (i, c) in centres.iter().enumerate() {
            let g = GaussianModel::new(
                DVector::from_row_slice(c),
                DMatrix::identity(2, 2) * (spread * spread),
            )
            .unwrap();
            out.extend(g.sample(per, seed + i as u64));
        }
        out
    }

    #[test]
    fn initialize_single_component() {
        let data = pts(&[&[0.0, 0.0], &[1.0, 0.0], &[0.4, 0.1], &[2.0, 2.0]]);
        let cfg = FitConfig {
            m_init: Some(1),
            ..Default::default()
        };
        let cb = initialize(&data, &cfg).unwrap();
        assert_eq!(cb.len(), 1);
        // centroid is (0.85, 0.525); nearest sample is (1, 0)
        assert_eq!(cb.component(0).model.mean(), &data[1]);
        let centre = linalg::mean(&data, 2);
        let expected = cfg.cov_floor.apply(&linalg::scatter_about(&data, &centre));
        assert_eq!(cb.component(0).model.cov(), &expected);
        assert_eq!(cb.weights(), vec![1.0]);
        assert_eq!(cb.lengths(), vec![0.0]);
    }

    #[test]
    fn initialize_farthest_point_hits_each_cluster() {
        let centres = [[0.0, 0.0], [20.0, 0.0], [0.0, 20.0]];
        let data = clusters(&centres, 50, 0.5, 1);
        let cfg = FitConfig {
            m_init: Some(3),
            ..Default::default()
        };
        let cb = initialize(&data, &cfg).unwrap();
        let mut hit = [false; 3];
        for c in cb.components() {
            let nearest = argmin_by(
                centres
                    .iter()
                    .map(|z| (c.model.mean() - DVector::from_row_slice(z)).norm()),
            );
            hit[nearest] = true;
        }
        assert_eq!(hit, [true; 3]);
        assert_relative_eq!(cb.lengths()[0], 3f64.ln(), epsilon = 1e-15);
    }

    #[test]
    fn initialize_is_deterministic() {
        let data = clusters(&[[0.0, 0.0], [5.0, 5.0]], 40, 1.0, 3);
        for scheme in [InitScheme::FarthestPoint, InitScheme::RandomSubset] {
            let cfg = FitConfig {
                m_init: Some(5),
                init_scheme: scheme,
                seed: 17,
                ..Default::default()
            };
            let a = initialize(&data, &cfg).unwrap();
            let b = initialize(&data, &cfg).unwrap();
            for m in 0..5 {
                assert_eq!(a.component(m).model.mean(), b.component(m).model.mean());
            }
        }
    }

    #[test]
    fn initialize_rejects_too_few_samples() {
        let data = pts(&[&[0.0], &[1.0]]);
        let cfg = FitConfig {
            m_init: Some(3),
            ..Default::default()
        };
        assert!(matches!(
            initialize(&data, &cfg),
            Err(Error::NotEnoughSamples { .. })
        ));
        assert!(fit(&[], &FitConfig::default()).is_err());
    }

    fn random_codebook(m: usize, n: usize, mu: f64, rng: &mut impl Rng) -> Codebook {
        let comps = (0..m)
            .map(|_| {
                let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                let cov = linalg::symmetrize(&(&b * b.transpose() + DMatrix::identity(n, n) * 0.2));
                let mean = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
                Component {
                    model: GaussianModel::new(mean, cov).unwrap(),
                    weight: 1.0 / m as f64,
                    length: (m as f64).ln(),
                }
            })
            .collect();
        Codebook::new(comps, KernelSpec::Gaussian { sigma: 2.0 }, mu).unwrap()
    }

    #[test]
    fn encode_matches_brute_force() {
        let mut rng = crate::seeded_rng(4);
        let cb = random_codebook(6, 3, 0.7, &mut rng);
        let data: Vec<Point> = (0..300)
            .map(|_| DVector::from_fn(3, |_, _| rng.random_range(-4.0..4.0)))
            .collect();
        let enc = encode_step(&cb, &data);
        for (x, &a) in data.iter().zip(&enc.assignments) {
            let values: Vec<f64> = (0..cb.len()).map(|m| cb.rho0(x, m).unwrap()).collect();
            let best = values.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(values[a], best);
            assert_eq!(a, values.iter().position(|&v| v == best).unwrap());
        }
        assert_eq!(enc.counts.iter().sum::<usize>(), data.len());
    }

    #[test]
    fn encode_single_and_tied_components() {
        let g = GaussianModel::standard(2);
        let data = clusters(&[[0.0, 0.0]], 20, 1.0, 5);
        let single = Codebook::new(
            vec![Component {
                model: g.clone(),
                weight: 1.0,
                length: 0.0,
            }],
            KernelSpec::inverse_distance(),
            1.0,
        )
        .unwrap();
        assert!(encode_step(&single, &data)
            .assignments
            .iter()
            .all(|&a| a == 0));

        let twin = Component {
            model: g,
            weight: 0.5,
            length: 2f64.ln(),
        };
        let tied = Codebook::new(
            vec![twin.clone(), twin],
            KernelSpec::Gaussian { sigma: 1.0 },
            1.0,
        )
        .unwrap();
        let enc = encode_step(&tied, &data);
        assert!(enc.assignments.iter().all(|&a| a == 0));
        assert_eq!(enc.counts, vec![20, 0]);
    }

    #[test]
    fn centroid_without_regularization_is_cell_moments() {
        let data = clusters(&[[-3.0, 0.0], [0.0, 3.0], [3.0, 0.0]], 60, 0.8, 9);
        let cfg = FitConfig {
            m_init: Some(3),
            mu: 0.0,
            ..Default::default()
        };
        let cb = initialize(&data, &cfg).unwrap();
        let enc = encode_step(&cb, &data);
        let floor = CovFloor::default();
        let updated = centroid_step(&cb, &data, &enc.assignments, &floor).unwrap();
        for m in 0..3 {
            let members: Vec<&Point> = data
                .iter()
                .zip(&enc.assignments)
                .filter(|(_, &a)| a == m)
                .map(|(x, _)| x)
                .collect();
            let mean =
                members.iter().fold(DVector::zeros(2), |acc, x| acc + *x) / members.len() as f64;
            let mut scatter = DMatrix::zeros(2, 2);
            for x in &members {
                let d = *x - &mean;
                scatter += &d * d.transpose();
            }
            scatter /= members.len() as f64;
            let got = &updated.component(m).model;
            assert!((got.mean() - &mean).amax() < 1e-12);
            assert!(linalg::max_abs(&(got.cov() - floor.apply(&scatter))) < 1e-12);
        }
    }

    #[test]
    fn centroid_with_separated_bump_matches_mu_zero() {
        let mut rng = crate::seeded_rng(10);
        let base = random_codebook(2, 2, 0.0, &mut rng);
        let far: Vec<Component> = base
            .components()
            .iter()
            .enumerate()
            .map(|(i, c)| Component {
                model: GaussianModel::new(
                    DVector::from_row_slice(&[i as f64 * 50.0, 0.0]),
                    c.model.cov().clone(),
                )
                .unwrap(),
                ..c.clone()
            })
            .collect();
        let plain = Codebook::new(far.clone(), KernelSpec::Bump { r1: 1.0, r2: 2.0 }, 0.0).unwrap();
        let penalized = Codebook::new(far, KernelSpec::Bump { r1: 1.0, r2: 2.0 }, 10.0).unwrap();
        let data = clusters(&[[0.0, 0.0], [50.0, 0.0]], 30, 1.0, 11);
        let enc = encode_step(&plain, &data);
        let floor = CovFloor::default();
        let a = centroid_step(&plain, &data, &enc.assignments, &floor).unwrap();
        let b = centroid_step(&penalized, &data, &enc.assignments, &floor).unwrap();
        for m in 0..2 {
            assert_eq!(a.component(m).model.mean(), b.component(m).model.mean());
            assert_eq!(a.component(m).model.cov(), b.component(m).model.cov());
        }
    }

    #[test]
    fn centroid_rejects_empty_cell() {
        let mut rng = crate::seeded_rng(12);
        let cb = random_codebook(2, 2, 1.0, &mut rng);
        let data = clusters(&[[0.0, 0.0]], 5, 1.0, 13);
        let err = centroid_step(&cb, &data, &[0; 5], &CovFloor::default()).unwrap_err();
        assert!(matches!(err, Error::EmptyCell { index: 1 }));
    }

    #[test]
    fn average_distortion_single_point() {
        let cb = Codebook::new(
            vec![Component {
                model: GaussianModel::standard(1),
                weight: 1.0,
                length: 0.0,
            }],
            KernelSpec::inverse_distance(),
            0.0,
        )
        .unwrap();
        let d = average_distortion(&cb, &pts(&[&[0.0]]), &[0]);
        assert_relative_eq!(d, 0.5 * (2.0 * PI).ln(), epsilon = 1e-15);
    }

    #[test]
    fn fit_on_repeated_point() {
        let data = pts(&[&[1.5, -2.0]]);
        let cfg = FitConfig {
            m_init: Some(1),
            ..Default::default()
        };
        let report = fit(&data, &cfg).unwrap();
        assert!(report.iterations <= 2);
        assert!(report.converged);
        let g = &report.final_codebook.component(0).model;
        assert_eq!(g.mean(), &data[0]);
        assert_eq!(g.cov(), &(DMatrix::identity(2, 2) * DEFAULT_ABS_FLOOR));
    }

    #[test]
    fn fit_recovers_two_clusters_without_penalty() {
        let centres = [[-4.0, 0.0], [4.0, 1.0]];
        let data = clusters(&centres, 1000, 1.0, 21);
        let cfg = FitConfig {
            m_init: Some(2),
            mu: 0.0,
            ..Default::default()
        };
        let report = fit(&data, &cfg).unwrap();
        assert_eq!(report.final_codebook.len(), 2);
        for (c, centre) in centres.iter().enumerate() {
            let truth = linalg::mean(&data[c * 1000..(c + 1) * 1000], 2);
            let got = report
                .final_codebook
                .components()
                .iter()
                .map(|comp| (comp.model.mean() - &truth).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(got < 0.1, "cluster {centre:?}: {got}");
        }
    }

    #[test]
    fn epsilon_one_stops_after_first_iteration() {
        let data = clusters(&[[0.0, 0.0], [3.0, 3.0]], 100, 1.0, 31);
        let cfg = FitConfig {
            m_init: Some(4),
            epsilon: 1.0,
            ..Default::default()
        };
        let report = fit(&data, &cfg).unwrap();
        assert_eq!(report.iterations, 1);
    }

    #[test]
    fn fit_is_deterministic() {
        let data = clusters(&[[0.0, 0.0], [3.0, 3.0], [6.0, 0.0]], 100, 1.0, 41);
        let cfg = FitConfig {
            m_init: Some(6),
            mu: 2.0,
            seed: 3,
            init_scheme: InitScheme::RandomSubset,
            ..Default::default()
        };
        let a = fit(&data, &cfg).unwrap();
        let b = fit(&data, &cfg).unwrap();
        assert_eq!(a.distortion_trace, b.distortion_trace);
        assert_eq!(a.assignments, b.assignments);
        for (x, y) in a
            .final_codebook
            .components()
            .iter()
            .zip(b.final_codebook.components())
        {
            assert_eq!(x.model.cov(), y.model.cov());
        }
    }

    #[test]
    fn stepwise_monotonicity_over_seeded_fits() {
        for seed in 0..10 {
            let data = clusters(&[[0.0, 0.0], [2.5, 2.0], [5.0, -1.0]], 80, 0.9, 100 + seed);
            let cfg = FitConfig {
                m_init: Some(8),
                mu: 1.5,
                seed,
                init_scheme: InitScheme::RandomSubset,
                ..Default::default()
            };
            let report = fit(&data, &cfg).unwrap();
            for s in &report.steps {
                assert!(s.after_encode <= s.before_encode + 1e-9);
                assert!(s.after_length <= s.before_length + 1e-9);
                for (b, a) in s.surrogate_before.iter().zip(&s.surrogate_after) {
                    assert!(*a <= b + 1e-9 * b.abs().max(1.0), "surrogate {b} -> {a}");
                }
                assert!((s.kraft_sum - 1.0).abs() <= 1e-9);
            }
        }
    }
}
