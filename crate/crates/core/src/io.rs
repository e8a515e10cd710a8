//! File formats: the model and embedding text formats, CSV datasets and the
//! flat `section.key = value` run configuration.
//!
//! Model and embedding files are line-oriented: a key followed by
//! whitespace-separated values. Reals are written with 17 significant digits
//! so that a load/save cycle reproduces the file byte for byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::codebook::Component;
use crate::kernels::KernelSpec;
use crate::lloyd::{CovFloor, FitConfig, InitScheme};
use crate::synth::{Dataset, EmbeddingChart, EmbeddingSpec, Latent};
use crate::{Codebook, Error, GaussianModel, Point, Result};

pub const MODEL_MAGIC: &str = "geoquant-model";
pub const EMBEDDING_MAGIC: &str = "geoquant-embedding";
pub const SCHEMA_VERSION: u32 = 1;

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

fn reals<'a>(it: impl IntoIterator<Item = &'a f64>) -> String {
    it.into_iter()
        .map(|&v| real(v))
        .collect::<Vec<_>>()
        .join(" ")
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Provenance of a fitted model.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FitMeta {
    pub iterations: usize,
    pub final_distortion: f64,
    pub seed: u64,
    pub n_samples: usize,
}

#[derive(Clone, Debug)]
pub struct ModelFile {
    pub codebook: Codebook,
    /// Reduced dimension used by encode/reconstruct/metric.
    pub k: usize,
    pub meta: FitMeta,
}

impl ModelFile {
    pub fn to_text(&self) -> String {
        let cb = &self.codebook;
        let mut s = String::new();
        let _ = writeln!(s, "{MODEL_MAGIC}");
        let _ = writeln!(s, "schema_version {SCHEMA_VERSION}");
        let _ = writeln!(s, "n {}", cb.dim());
        let _ = writeln!(s, "k {}", self.k);
        let _ = writeln!(s, "kernel {}", kernel_text(cb.kernel()));
        let _ = writeln!(s, "mu {}", real(cb.mu()));
        let _ = writeln!(s, "iterations {}", self.meta.iterations);
        let _ = writeln!(s, "final_distortion {}", real(self.meta.final_distortion));
        let _ = writeln!(s, "seed {}", self.meta.seed);
        let _ = writeln!(s, "n_samples {}", self.meta.n_samples);
        let _ = writeln!(s, "components {}", cb.len());
        for c in cb.components() {
            let _ = writeln!(s, "weight {}", real(c.weight));
            let _ = writeln!(s, "length {}", real(c.length));
            let _ = writeln!(s, "mean {}", reals(c.model.mean().iter()));
            let _ = writeln!(s, "cov {}", reals(&row_major(c.model.cov())));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Fields::new(text);
        r.magic(MODEL_MAGIC)?;
        r.schema()?;
        let n: usize = r.scalar("n")?;
        let k: usize = r.scalar("k")?;
        if k == 0 || k > n {
            return Err(Error::Parse(format!(
                "k = {k} must satisfy 1 <= k <= n = {n}"
            )));
        }
        let kernel = parse_kernel(&r.values("kernel")?)?;
        let mu: f64 = r.scalar("mu")?;
        let meta = FitMeta {
            iterations: r.scalar("iterations")?,
            final_distortion: r.scalar("final_distortion")?,
            seed: r.scalar("seed")?,
            n_samples: r.scalar("n_samples")?,
        };
        let count: usize = r.scalar("components")?;
        let mut comps = Vec::with_capacity(count);
        for _ in 0..count {
            let weight = r.scalar("weight")?;
            let length = r.scalar("length")?;
            let mean = DVector::from_vec(r.reals("mean", n)?);
            let cov = DMatrix::from_row_slice(n, n, &r.reals("cov", n * n)?);
            comps.push(Component {
                model: GaussianModel::new(mean, cov)?,
                weight,
                length,
            });
        }
        r.finish()?;
        Ok(Self {
            codebook: Codebook::new(comps, kernel, mu)?,
            k,
            meta,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&read_file(path)?)
    }
}

fn kernel_text(k: &KernelSpec) -> String {
    match *k {
        KernelSpec::InverseDistance { min_distance } => {
            format!("inverse-distance {}", real(min_distance))
        }
        KernelSpec::Gaussian { sigma } => format!("gaussian {}", real(sigma)),
        KernelSpec::Bump { r1, r2 } => format!("bump {} {}", real(r1), real(r2)),
    }
}

fn parse_kernel(v: &[&str]) -> Result<KernelSpec> {
    let num = |i: usize| -> Result<f64> { parse_value(v.get(i).copied().unwrap_or(""), "kernel") };
    let spec = match (v.first().copied(), v.len()) {
        (Some("inverse-distance"), 2) => KernelSpec::InverseDistance {
            min_distance: num(1)?,
        },
        (Some("gaussian"), 2) => KernelSpec::Gaussian { sigma: num(1)? },
        (Some("bump"), 3) => KernelSpec::Bump {
            r1: num(1)?,
            r2: num(2)?,
        },
        _ => {
            return Err(Error::Parse(format!(
                "unrecognised kernel line {:?}",
                v.join(" ")
            )))
        }
    };
    spec.validate()?;
    Ok(spec)
}

impl EmbeddingSpec {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{EMBEDDING_MAGIC}");
        let _ = writeln!(s, "schema_version {SCHEMA_VERSION}");
        let _ = writeln!(s, "n {}", self.n());
        let _ = writeln!(s, "k {}", self.k());
        let _ = writeln!(s, "charts {}", self.charts().len());
        for c in self.charts() {
            let _ = writeln!(s, "weight {}", real(c.weight));
            let _ = writeln!(s, "mean {}", reals(c.mean.iter()));
            let _ = writeln!(s, "loading {}", reals(&row_major(&c.loading)));
            let _ = writeln!(s, "noise {}", reals(&row_major(&c.noise_cov)));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Fields::new(text);
        r.magic(EMBEDDING_MAGIC)?;
        r.schema()?;
        let n: usize = r.scalar("n")?;
        let k: usize = r.scalar("k")?;
        let count: usize = r.scalar("charts")?;
        let mut charts = Vec::with_capacity(count);
        for _ in 0..count {
            charts.push(EmbeddingChart {
                weight: r.scalar("weight")?,
                mean: DVector::from_vec(r.reals("mean", n)?),
                loading: DMatrix::from_row_slice(n, k, &r.reals("loading", n * k)?),
                noise_cov: DMatrix::from_row_slice(n, n, &r.reals("noise", n * n)?),
            });
        }
        r.finish()?;
        EmbeddingSpec::new(k, charts)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_file(path, &self.to_text())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&read_file(path)?)
    }
}

struct Fields<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
}

impl<'a> Fields<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
            .filter(|(_, t)| !t.is_empty())
            .collect();
        Self { lines, pos: 0 }
    }

    fn next(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (line, tokens) = self
            .lines
            .get(self.pos)
            .cloned()
            .ok_or_else(|| Error::Parse(format!("unexpected end of file, expected `{key}`")))?;
        if tokens[0] != key {
            return Err(Error::Parse(format!(
                "line {line}: expected `{key}`, found `{}`",
                tokens[0]
            )));
        }
        self.pos += 1;
        Ok((line, tokens[1..].to_vec()))
    }

    fn magic(&mut self, magic: &str) -> Result<()> {
        let (line, rest) = self.next(magic)?;
        if !rest.is_empty() {
            return Err(Error::Parse(format!(
                "line {line}: trailing tokens after header"
            )));
        }
        Ok(())
    }

    fn schema(&mut self) -> Result<()> {
        let v: u32 = self.scalar("schema_version")?;
        if v != SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported schema_version {v} (expected {SCHEMA_VERSION})"
            )));
        }
        Ok(())
    }

    fn values(&mut self, key: &str) -> Result<Vec<&'a str>> {
        Ok(self.next(key)?.1)
    }

    fn scalar<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let (line, v) = self.next(key)?;
        if v.len() != 1 {
            return Err(Error::Parse(format!(
                "line {line}: `{key}` takes one value"
            )));
        }
        v[0].parse()
            .map_err(|_| Error::Parse(format!("line {line}: invalid value {:?} for `{key}`", v[0])))
    }

    fn reals(&mut self, key: &str, count: usize) -> Result<Vec<f64>> {
        let (line, v) = self.next(key)?;
        if v.len() != count {
            return Err(Error::Parse(format!(
                "line {line}: `{key}` needs {count} values, found {}",
                v.len()
            )));
        }
        v.iter()
            .map(|t| {
                t.parse()
                    .map_err(|_| Error::Parse(format!("line {line}: invalid number {t:?}")))
            })
            .collect()
    }

    fn finish(&self) -> Result<()> {
        match self.lines.get(self.pos) {
            Some((line, _)) => Err(Error::Parse(format!(
                "line {line}: unexpected trailing content"
            ))),
            None => Ok(()),
        }
    }
}

fn read_file(path: &Path) -> Result<String> {
    let mut s = String::new();
    std::fs::File::open(path)?.read_to_string(&mut s)?;
    Ok(s)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)
}

fn num_fields<'a>(it: impl IntoIterator<Item = &'a f64>) -> Vec<String> {
    it.into_iter().map(|v| v.to_string()).collect()
}

/// Header `x1..xn`, plus `l,y1..yk` when latents are present.
pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let n = data.points.first().map_or(0, |p| p.len());
    let k = data
        .latents
        .as_ref()
        .and_then(|l| l.first())
        .map_or(0, |l| l.coords.len());
    let mut w = csv_writer(path)?;
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    if data.latents.is_some() {
        header.push("l".into());
        header.extend((1..=k).map(|i| format!("y{i}")));
    }
    w.write_record(&header).map_err(csv_err)?;
    for (i, p) in data.points.iter().enumerate() {
        let mut row = num_fields(p.iter());
        if let Some(lat) = &data.latents {
            row.push(lat[i].chart.to_string());
            row.extend(num_fields(lat[i].coords.iter()));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a dataset written by [`write_dataset`] (or any CSV whose leading
/// columns are `x1..xn`).
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut r = csv::ReaderBuilder::new().from_path(path).map_err(csv_err)?;
    let header: Vec<String> = r
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_owned)
        .collect();
    let n = header.iter().take_while(|h| h.starts_with('x')).count();
    if n == 0 {
        return Err(Error::Parse("dataset header must start with x1".into()));
    }
    let latent_col = header.iter().position(|h| h == "l");
    let k = latent_col.map_or(0, |c| header.len() - c - 1);
    let mut points = Vec::new();
    let mut latents = latent_col.map(|_| Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let row = i + 2;
        let field = |j: usize| -> Result<f64> {
            let v: f64 = rec
                .get(j)
                .ok_or_else(|| Error::Parse(format!("row {row}: missing column {}", j + 1)))?
                .trim()
                .parse()
                .map_err(|_| {
                    Error::Parse(format!("row {row}: invalid number in column {}", j + 1))
                })?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("row {row}: non-finite value")));
            }
            Ok(v)
        };
        points.push(DVector::from_vec(
            (0..n).map(field).collect::<Result<Vec<_>>>()?,
        ));
        if let (Some(c), Some(l)) = (latent_col, latents.as_mut()) {
            let chart = rec
                .get(c)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Parse(format!("row {row}: invalid chart label")))?;
            let coords = (c + 1..c + 1 + k).map(field).collect::<Result<Vec<_>>>()?;
            l.push(Latent {
                chart,
                coords: DVector::from_vec(coords),
            });
        }
    }
    if points.is_empty() {
        return Err(Error::NotEnoughSamples { needed: 1, got: 0 });
    }
    Ok(Dataset { points, latents })
}

/// Header `chart,u1..uk`.
pub fn write_codes(path: &Path, codes: &[crate::nldr::ReducedPoint]) -> Result<()> {
    let k = codes.first().map_or(0, |c| c.coords.len());
    let mut w = csv_writer(path)?;
    let mut header = vec!["chart".to_string()];
    header.extend((1..=k).map(|i| format!("u{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for c in codes {
        let mut row = vec![c.chart.to_string()];
        row.extend(num_fields(c.coords.iter()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_codes(path: &Path) -> Result<Vec<crate::nldr::ReducedPoint>> {
    let mut r = csv::ReaderBuilder::new().from_path(path).map_err(csv_err)?;
    let header = r.headers().map_err(csv_err)?.clone();
    if header.get(0) != Some("chart") {
        return Err(Error::Parse("codes header must start with `chart`".into()));
    }
    let k = header.len() - 1;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let bad = || Error::Parse(format!("row {}: malformed code", i + 2));
        let chart = rec
            .get(0)
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(bad)?;
        let coords = (1..=k)
            .map(|j| {
                rec.get(j)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(bad)
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(crate::nldr::ReducedPoint {
            chart,
            coords: DVector::from_vec(coords),
        });
    }
    Ok(out)
}

/// Header `defined,reference,g1_1..gk_k` (row-major); `reference` is empty
/// where the metric is undefined.
pub fn write_metric(path: &Path, k: usize, values: &[crate::manifold::MetricValue]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["defined".to_string(), "reference".to_string()];
    for i in 1..=k {
        for j in 1..=k {
            header.push(format!("g{i}_{j}"));
        }
    }
    w.write_record(&header).map_err(csv_err)?;
    for v in values {
        let mut row = vec![
            v.defined.to_string(),
            v.reference.map(|r| r.to_string()).unwrap_or_default(),
        ];
        row.extend(num_fields(&row_major(&v.form)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_points(path: &Path, points: &[Point]) -> Result<()> {
    write_dataset(
        path,
        &Dataset {
            points: points.to_vec(),
            latents: None,
        },
    )
}

/// Keys accepted in a run configuration file.
pub const CONFIG_KEYS: &[&str] = &[
    "fit.m_init",
    "fit.mu",
    "fit.epsilon",
    "fit.max_iter",
    "fit.seed",
    "fit.init",
    "fit.cov_floor_ratio",
    "fit.cov_floor_abs",
    "kernel.type",
    "kernel.sigma",
    "kernel.min_distance",
    "kernel.r1",
    "kernel.r2",
    "nldr.k",
    "atlas.delta_ratio",
    "synth.fixture",
    "synth.n_samples",
    "synth.seed",
    "eval.mc_n",
    "eval.seed",
    "eval.n",
    "eval.h",
    "eval.m_fstar",
    "eval.delta",
    "sweep.grid",
    "sweep.seeds",
    "sweep.m_cap",
    "run.threads",
];

/// Parses `section.key = value` lines; `#` starts a comment. Unknown or
/// repeated keys are rejected.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Parse(format!("config line {}: expected `key = value`", i + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        if !CONFIG_KEYS.contains(&key) {
            return Err(Error::Parse(format!(
                "config line {}: unknown key `{key}`",
                i + 1
            )));
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(Error::Parse(format!(
                "config line {}: duplicate key `{key}`",
                i + 1
            )));
        }
    }
    Ok(out)
}

pub fn load_config(path: &Path) -> Result<BTreeMap<String, String>> {
    parse_config(&read_file(path)?)
}

pub fn parse_value<T: std::str::FromStr>(raw: &str, key: &str) -> Result<T> {
    raw.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("invalid value {raw:?} for `{key}`")))
}

pub fn parse_list<T: std::str::FromStr>(raw: &str, key: &str) -> Result<Vec<T>> {
    raw.split(',').map(|t| parse_value(t, key)).collect()
}

/// Builds a [`FitConfig`] from `fit.*` and `kernel.*` entries; missing keys
/// keep their defaults and `kernel.type = auto` (or no type) selects the
/// data-driven Gaussian kernel.
pub fn fit_config_from(map: &BTreeMap<String, String>) -> Result<FitConfig> {
    let mut cfg = FitConfig::default();
    let get = |k: &str| map.get(k).map(String::as_str);
    if let Some(v) = get("fit.m_init") {
        cfg.m_init = Some(parse_value(v, "fit.m_init")?);
    }
    if let Some(v) = get("fit.mu") {
        cfg.mu = parse_value(v, "fit.mu")?;
    }
    if let Some(v) = get("fit.epsilon") {
        cfg.epsilon = parse_value(v, "fit.epsilon")?;
    }
    if let Some(v) = get("fit.max_iter") {
        cfg.max_iter = parse_value(v, "fit.max_iter")?;
    }
    if let Some(v) = get("fit.seed") {
        cfg.seed = parse_value(v, "fit.seed")?;
    }
    if let Some(v) = get("fit.init") {
        cfg.init_scheme = match v {
            "farthest" => InitScheme::FarthestPoint,
            "random" => InitScheme::RandomSubset,
            _ => {
                return Err(Error::Parse(format!(
                    "fit.init must be `farthest` or `random`, got {v:?}"
                )))
            }
        };
    }
    let floor = CovFloor::default();
    cfg.cov_floor = CovFloor {
        ratio: get("fit.cov_floor_ratio")
            .map_or(Ok(floor.ratio), |v| parse_value(v, "fit.cov_floor_ratio"))?,
        abs: get("fit.cov_floor_abs")
            .map_or(Ok(floor.abs), |v| parse_value(v, "fit.cov_floor_abs"))?,
    };
    let need = |k: &str| -> Result<f64> {
        parse_value(
            get(k).ok_or_else(|| Error::Parse(format!("`{k}` is required for this kernel")))?,
            k,
        )
    };
    cfg.kernel = match get("kernel.type").unwrap_or("auto") {
        "auto" => None,
        "inverse-distance" => Some(KernelSpec::InverseDistance {
            min_distance: get("kernel.min_distance")
                .map_or(Ok(crate::kernels::DEFAULT_MIN_DISTANCE), |v| {
                    parse_value(v, "kernel.min_distance")
                })?,
        }),
        "gaussian" => Some(KernelSpec::Gaussian {
            sigma: need("kernel.sigma")?,
        }),
        "bump" => Some(KernelSpec::Bump {
            r1: need("kernel.r1")?,
            r2: need("kernel.r2")?,
        }),
        other => return Err(Error::Parse(format!("unknown kernel.type {other:?}"))),
    };
    if let Some(k) = &cfg.kernel {
        k.validate()?;
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lloyd::fit;
    use crate::synth::{builtin_fixture, sample_embedding};

    fn fitted() -> ModelFile {
        let spec = builtin_fixture("two-charts-2d", 0).unwrap();
        let data = sample_embedding(&spec, 500, 1).unwrap().points;
        let rep = fit(
            &data,
            &FitConfig {
                m_init: Some(4),
                mu: 0.5,
                ..Default::default()
            },
        )
        .unwrap();
        ModelFile {
            k: 1,
            meta: FitMeta {
                iterations: rep.iterations,
                final_distortion: *rep.distortion_trace.last().unwrap(),
                seed: 0,
                n_samples: data.len(),
            },
            codebook: rep.final_codebook,
        }
    }

    #[test]
    fn model_round_trip_is_byte_identical() {
        let m = fitted();
        let text = m.to_text();
        let back = ModelFile::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.meta, m.meta);
        for (a, b) in back
            .codebook
            .components()
            .iter()
            .zip(m.codebook.components())
        {
            assert_eq!(a.model.mean(), b.model.mean());
            assert_eq!(a.model.cov(), b.model.cov());
            assert_eq!(a.weight, b.weight);
        }
    }

    #[test]
    fn model_load_revalidates() {
        let text = fitted().to_text();
        let broken = text
            .replacen("weight ", "weight 5", 1)
            .replacen("weight 5", "weight 5 ", 1);
        assert!(ModelFile::from_text(&broken).is_err());
        let bad_version = text.replace("schema_version 1", "schema_version 2");
        assert!(matches!(
            ModelFile::from_text(&bad_version),
            Err(Error::Parse(_))
        ));
        assert!(ModelFile::from_text(&format!("{text}extra 1\n")).is_err());
        let not_spd = text.replacen("cov ", "cov -", 1);
        assert!(ModelFile::from_text(&not_spd).is_err());
    }

    #[test]
    fn embedding_round_trip() {
        for name in crate::synth::FIXTURES {
            let spec = builtin_fixture(name, 3).unwrap();
            let text = spec.to_text();
            let back = EmbeddingSpec::from_text(&text).unwrap();
            assert_eq!(back.to_text(), text);
        }
    }

    #[test]
    fn dataset_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let spec = builtin_fixture("two-charts-2d", 0).unwrap();
        let data = sample_embedding(&spec, 20, 4).unwrap();
        write_dataset(&path, &data).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x1,x2,l,y1\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_dataset(&path).unwrap(), data);
        write_points(&path, &data.points).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.points, data.points);
        assert!(back.latents.is_none());
    }

    #[test]
    fn codes_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        let codes = vec![
            crate::nldr::ReducedPoint {
                chart: 2,
                coords: DVector::from_row_slice(&[0.1, -3.5]),
            },
            crate::nldr::ReducedPoint {
                chart: 0,
                coords: DVector::from_row_slice(&[1e-300, 7.0]),
            },
        ];
        write_codes(&path, &codes).unwrap();
        assert_eq!(read_codes(&path).unwrap(), codes);
    }

    #[test]
    fn config_parsing() {
        let text = "# comment\nfit.m_init = 8\nfit.mu=0.5 # trailing\n\nkernel.type = gaussian\nkernel.sigma = 2\n";
        let map = parse_config(text).unwrap();
        let cfg = fit_config_from(&map).unwrap();
        assert_eq!(cfg.m_init, Some(8));
        assert_eq!(cfg.mu, 0.5);
        assert_eq!(cfg.kernel, Some(KernelSpec::Gaussian { sigma: 2.0 }));
        assert!(parse_config("fit.bogus = 1").is_err());
        assert!(parse_config("fit.mu = 1\nfit.mu = 2").is_err());
        assert!(parse_config("just words").is_err());
        let map = parse_config("kernel.type = bump\nkernel.r1 = 1").unwrap();
        assert!(fit_config_from(&map).is_err());
        assert_eq!(parse_list::<usize>("1, 2,3", "x").unwrap(), vec![1, 2, 3]);
    }
}
