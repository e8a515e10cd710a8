use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use geoquant::diagnostics::{self, SweepConfig};
use geoquant::io::{self, FitMeta, ModelFile};
use geoquant::manifold;
use geoquant::nldr::{self, ChartProjector};
use geoquant::synth::{self, EmbeddingSpec};
use geoquant::{fit, KernelSpec};

#[derive(Parser)]
#[command(
    name = "geoquant",
    version,
    about = "Complexity-regularized Gaussian-mixture quantization"
)]
struct Cli {
    /// Run configuration (`section.key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "GEOQUANT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from a built-in fixture or an embedding file.
    Synth(SynthArgs),
    /// Fit a codebook to a dataset.
    Fit(FitArgs),
    /// Reduce points to (chart, coordinates).
    Encode(EncodeArgs),
    /// Map reduced codes back to the ambient space.
    Reconstruct(ReconstructArgs),
    /// Evaluate the Riemannian metric at reduced points.
    Metric(MetricArgs),
    /// Divergence, resolvability and bound diagnostics against a known density.
    Eval(EvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, conflicts_with = "spec")]
    fixture: Option<String>,
    /// Embedding file to sample from instead of a fixture.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    n_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Also write the embedding used.
    #[arg(long)]
    spec_out: Option<PathBuf>,
    /// Omit the latent `l,y1..yk` columns.
    #[arg(long)]
    no_latents: bool,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model_out: PathBuf,
    /// JSON fit report.
    #[arg(long)]
    report_out: Option<PathBuf>,
    /// Reduced dimension stored with the model.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m_init: Option<usize>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// auto | inverse-distance | gaussian | bump
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Must match the model's reduced dimension when given.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    codes: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Original points, row-aligned with the codes; enables the distortion printout.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Args)]
struct MetricArgs {
    #[arg(long)]
    model: PathBuf,
    /// Reduced points (`chart,u1..uk`); the chart column selects the reference frame.
    #[arg(long)]
    codes: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    delta_ratio: Option<f64>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Known density as an embedding file.
    #[arg(long, conflicts_with = "fixture")]
    fstar: Option<PathBuf>,
    /// Known density as a built-in fixture.
    #[arg(long)]
    fixture: Option<String>,
    #[arg(long)]
    out: PathBuf,
    /// Samples of f* for the objective estimate.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    mc_n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sample size N in the resolvability index (default: the model's training size).
    #[arg(long)]
    n: Option<usize>,
    /// Bernstein constant h; bounds are reported when h and M(f*) are given.
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    m_fstar: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Run the consistency sweep.
    #[arg(long)]
    sweep: bool,
}

enum Failure {
    Usage(String),
    Compute(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Compute(e)
    }
}

impl From<geoquant::Error> for Failure {
    fn from(e: geoquant::Error) -> Self {
        Failure::Compute(e.into())
    }
}

type Outcome = Result<(), Failure>;

struct Settings(BTreeMap<String, String>);

impl Settings {
    fn get<T: std::str::FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Failure> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => match self.0.get(key) {
                Some(raw) => io::parse_value(raw, key)
                    .map(Some)
                    .map_err(|e| Failure::Usage(e.to_string())),
                None => Ok(None),
            },
        }
    }

    fn or<T: std::str::FromStr>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> Result<T, Failure> {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = run(cli);
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let map = match &cli.config {
        Some(p) => io::load_config(p).map_err(|e| usage(format!("{}: {e}", p.display())))?,
        None => BTreeMap::new(),
    };
    let settings = Settings(map);
    let threads = settings.get(cli.threads, "run.threads")?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(usage("--threads must be >= 1"));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| Failure::Compute(e.into()))?;
    pool.install(|| match cli.command {
        Command::Synth(a) => cmd_synth(a, &settings),
        Command::Fit(a) => cmd_fit(a, &settings),
        Command::Encode(a) => cmd_encode(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Metric(a) => cmd_metric(a, &settings),
        Command::Eval(a) => cmd_eval(a, &settings),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn load_model(path: &Path) -> anyhow::Result<ModelFile> {
    ModelFile::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn load_fstar(
    fstar: Option<&Path>,
    fixture: Option<String>,
    settings: &Settings,
) -> Result<EmbeddingSpec, Failure> {
    if let Some(p) = fstar {
        return EmbeddingSpec::load(p)
            .with_context(|| format!("loading embedding {}", p.display()))
            .map_err(Failure::Compute);
    }
    let name = settings
        .get(fixture, "synth.fixture")?
        .ok_or_else(|| usage("a known density is required: pass --fstar or --fixture"))?;
    let seed = settings.or(None, "synth.seed", 0u64)?;
    synth::builtin_fixture(&name, seed).map_err(|e| usage(e.to_string()))
}

fn cmd_synth(a: SynthArgs, settings: &Settings) -> Outcome {
    let seed = settings.or(a.seed, "synth.seed", 0u64)?;
    let count = settings.or(a.n_samples, "synth.n_samples", 1000usize)?;
    let spec = match &a.spec {
        Some(p) => {
            EmbeddingSpec::load(p).with_context(|| format!("loading embedding {}", p.display()))?
        }
        None => {
            let name = settings
                .get(a.fixture, "synth.fixture")?
                .ok_or_else(|| usage("pass --fixture or --spec"))?;
            synth::builtin_fixture(&name, seed).map_err(|e| usage(e.to_string()))?
        }
    };
    let mut data = synth::sample_embedding(&spec, count, seed)?;
    if a.no_latents {
        data.latents = None;
    }
    io::write_dataset(&a.out, &data).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.spec_out {
        spec.save(p)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    println!("N = {count}, n = {}, k = {}", spec.n(), spec.k());
    Ok(())
}

#[derive(Serialize)]
struct FitJson {
    m_init: usize,
    components: usize,
    iterations: usize,
    converged: bool,
    initial_distortion: f64,
    distortion_trace: Vec<f64>,
    counts: Vec<usize>,
    removed_cells: usize,
    kernel: String,
    mu: f64,
    seed: u64,
    n_samples: usize,
}

fn kernel_name(k: &KernelSpec) -> String {
    match *k {
        KernelSpec::InverseDistance { min_distance } => format!("inverse-distance({min_distance})"),
        KernelSpec::Gaussian { sigma } => format!("gaussian({sigma})"),
        KernelSpec::Bump { r1, r2 } => format!("bump({r1},{r2})"),
    }
}

fn cmd_fit(a: FitArgs, settings: &Settings) -> Outcome {
    let mut map = settings.0.clone();
    if let Some(kernel) = &a.kernel {
        map.insert("kernel.type".into(), kernel.clone());
    }
    if let Some(s) = a.sigma {
        map.insert("kernel.sigma".into(), s.to_string());
    }
    let mut cfg = io::fit_config_from(&map).map_err(|e| usage(e.to_string()))?;
    if let Some(v) = a.m_init {
        cfg.m_init = Some(v);
    }
    if let Some(v) = a.mu {
        cfg.mu = v;
    }
    if let Some(v) = a.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = a.max_iter {
        cfg.max_iter = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    let k = settings.or(a.k, "nldr.k", 1usize)?;
    let data =
        io::read_dataset(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let n = data.points[0].len();
    if k == 0 || k > n {
        return Err(usage(format!("k = {k} must satisfy 1 <= k <= n = {n}")));
    }
    let report = fit(&data.points, &cfg).context("fit failed")?;
    let cb = &report.final_codebook;
    let final_distortion = report
        .distortion_trace
        .last()
        .copied()
        .unwrap_or(report.initial_distortion);
    let model = ModelFile {
        codebook: cb.clone(),
        k,
        meta: FitMeta {
            iterations: report.iterations,
            final_distortion,
            seed: cfg.seed,
            n_samples: data.points.len(),
        },
    };
    model
        .save(&a.model_out)
        .with_context(|| format!("writing {}", a.model_out.display()))?;
    if let Some(p) = &a.report_out {
        write_json(
            p,
            &FitJson {
                m_init: report.m_init,
                components: cb.len(),
                iterations: report.iterations,
                converged: report.converged,
                initial_distortion: report.initial_distortion,
                distortion_trace: report.distortion_trace.clone(),
                counts: report.counts.clone(),
                removed_cells: report.removed_cells,
                kernel: kernel_name(cb.kernel()),
                mu: cb.mu(),
                seed: cfg.seed,
                n_samples: data.points.len(),
            },
        )?;
    }
    println!(
        "components = {}, iterations = {}, final distortion = {final_distortion}",
        cb.len(),
        report.iterations
    );
    Ok(())
}

fn cmd_encode(a: EncodeArgs) -> Outcome {
    let model = load_model(&a.model)?;
    if let Some(k) = a.k {
        if k != model.k {
            return Err(Failure::Compute(anyhow::anyhow!(
                "requested k = {k} but the model was fitted for k = {}",
                model.k
            )));
        }
    }
    let data =
        io::read_dataset(&a.data).with_context(|| format!("reading {}", a.data.display()))?;
    let proj = ChartProjector::from_codebook(&model.codebook, model.k)?;
    let codes = data
        .points
        .iter()
        .map(|x| nldr::reduce(&model.codebook, &proj, x))
        .collect::<geoquant::Result<Vec<_>>>()?;
    io::write_codes(&a.out, &codes).with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}

fn cmd_reconstruct(a: ReconstructArgs) -> Outcome {
    let model = load_model(&a.model)?;
    let proj = ChartProjector::from_codebook(&model.codebook, model.k)?;
    let codes =
        io::read_codes(&a.codes).with_context(|| format!("reading {}", a.codes.display()))?;
    let points = codes
        .iter()
        .map(|c| nldr::reconstruct(&proj, c))
        .collect::<geoquant::Result<Vec<_>>>()?;
    io::write_points(&a.out, &points).with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.data {
        let data = io::read_dataset(p).with_context(|| format!("reading {}", p.display()))?;
        if data.points.len() != points.len() {
            return Err(Failure::Compute(anyhow::anyhow!(
                "{} data rows but {} codes",
                data.points.len(),
                points.len()
            )));
        }
        let total: f64 = data
            .points
            .iter()
            .zip(&points)
            .map(|(x, y)| (x - y).norm_squared())
            .sum();
        println!("average distortion = {}", total / points.len() as f64);
    }
    Ok(())
}

fn cmd_metric(a: MetricArgs, settings: &Settings) -> Outcome {
    let model = load_model(&a.model)?;
    let ratio = settings.or(
        a.delta_ratio,
        "atlas.delta_ratio",
        manifold::DEFAULT_DELTA_RATIO,
    )?;
    let atlas = manifold::build_atlas(&model.codebook, model.k, ratio)?;
    let codes =
        io::read_codes(&a.codes).with_context(|| format!("reading {}", a.codes.display()))?;
    let values = codes
        .iter()
        .map(|c| manifold::metric_matrix(&atlas, &c.coords, Some(c.chart)))
        .collect::<geoquant::Result<Vec<_>>>()?;
    io::write_metric(&a.out, model.k, &values)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let undefined = values.iter().filter(|v| !v.defined).count();
    println!("points = {}, undefined = {undefined}", values.len());
    Ok(())
}

#[derive(Serialize)]
struct EvalJson {
    mixture_kl: diagnostics::MCEstimate,
    resolvability: diagnostics::ResolvabilityReport,
    moments: Vec<diagnostics::MomentAdvisory>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<diagnostics::Theorem1Bounds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ibar: Option<diagnostics::IbarEstimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sweep: Option<diagnostics::SweepTable>,
}

fn cmd_eval(a: EvalArgs, settings: &Settings) -> Outcome {
    let model = load_model(&a.model)?;
    let cb = &model.codebook;
    let f_star = load_fstar(a.fstar.as_deref(), a.fixture, settings)?;
    let mc_n = settings.or(a.mc_n, "eval.mc_n", 20_000usize)?;
    let seed = settings.or(a.seed, "eval.seed", 0u64)?;
    let n = settings.or(a.n, "eval.n", model.meta.n_samples.max(1))?;
    let mixture_kl = diagnostics::mc_kl(&f_star, cb, mc_n, seed)?;
    let resolvability = diagnostics::resolvability(cb, &f_star, n, mc_n, seed)?;
    let moments = diagnostics::moment_advisory(cb, &f_star, mc_n, seed)?;
    let h = settings.get(a.h, "eval.h")?;
    let m_fstar = settings.get(a.m_fstar, "eval.m_fstar")?;
    let bounds = match (h, m_fstar) {
        (Some(h), Some(m)) => {
            let delta = settings.or(a.delta, "eval.delta", 0.05)?;
            Some(diagnostics::theorem1_bound(
                resolvability.r_index,
                cb.len(),
                cb.mu(),
                h,
                m,
                n,
                delta,
            )?)
        }
        (None, None) => None,
        _ => return Err(usage("bounds need both --h and --m-fstar")),
    };
    let ibar = match &a.data {
        Some(p) => {
            let data = io::read_dataset(p).with_context(|| format!("reading {}", p.display()))?;
            let enc = geoquant::lloyd::encode_step(cb, &data.points);
            Some(diagnostics::ibar_estimate(
                cb,
                &enc.assignments,
                &f_star,
                &data.points,
            )?)
        }
        None => None,
    };
    let sweep = if a.sweep {
        let mut cfg = SweepConfig {
            template: io::fit_config_from(&settings.0).map_err(|e| usage(e.to_string()))?,
            mc_n,
            ..Default::default()
        };
        if let Some(g) = settings.0.get("sweep.grid") {
            cfg.n_grid = io::parse_list(g, "sweep.grid").map_err(|e| usage(e.to_string()))?;
        }
        if let Some(s) = settings.0.get("sweep.seeds") {
            cfg.seeds = io::parse_list(s, "sweep.seeds").map_err(|e| usage(e.to_string()))?;
        }
        cfg.m_cap = settings.or(None, "sweep.m_cap", cfg.m_cap)?;
        Some(diagnostics::consistency_sweep(&cfg, &f_star)?)
    } else {
        None
    };
    println!(
        "mixture KL = {} ± {}, r_index = {} (component {})",
        mixture_kl.value, mixture_kl.std_error, resolvability.r_index, resolvability.argmin
    );
    write_json(
        &a.out,
        &EvalJson {
            mixture_kl,
            resolvability,
            moments,
            bounds,
            ibar,
            sweep,
        },
    )?;
    Ok(())
}
