//! Command-line front end: `fit`, `transform`, `baseline`, `bench`, `demo-co2`.
//!
//! Every command writes a JSON run manifest next to its outputs. Exit codes:
//! 0 on success, 2 for usage and input errors, 3 for numerical failures.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bench::{run_study, GridConfig, StudyConfig};
use crate::bgf::{bgf_fourier, default_omega_grid, integral_transform, rbl_fourier, KernelTransform};
use crate::dft::{dft_frequencies, multitaper_spectrum, ComplexSpectrum, PowerSpectrum};
use crate::error::{Error, Result};
use crate::gpcore::{fit_gp, KernelSpec};
use crate::signal::{detrend_poly, load_csv, load_csv_snapped, TimeSeries};
use crate::speclearn::{default_noise_variance, default_se_scale, fit_map_with_report, FitOptions, SpectralModel};
use crate::taper::{dpss, hann, square, TaperSet};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "gpfourier",
    version,
    about = "Fourier transforms of sampled signals via GP regression with a learned spectral covariance"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Learn a spectral model from one or more realizations.
    Fit(FitArgs),
    /// Transform the posterior mean of a fitted GP.
    Transform(TransformArgs),
    /// Tapered DFT / multitaper power spectrum.
    Baseline(BaselineArgs),
    /// Run a simulation study.
    Bench(BenchArgs),
    /// Detrend a monthly CO2 record and compare spectral estimates.
    DemoCo2(DemoArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ColumnArgs {
    /// Name of the time column.
    #[arg(long, default_value = "time")]
    pub time_col: String,
    /// Name of the value column.
    #[arg(long, default_value = "value")]
    pub value_col: String,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input CSV (one realization).
    #[arg(required_unless_present = "trials", conflicts_with = "trials")]
    pub input: Option<PathBuf>,
    /// Directory of CSV files, one realization each, on a shared grid.
    #[arg(long)]
    pub trials: Option<PathBuf>,
    #[command(flatten)]
    pub columns: ColumnArgs,
    /// SE width of the spectral bumps in rad/time (default: four DFT bins).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Noise variance (default: the input's annotation, else 0).
    #[arg(long, conflicts_with = "noisy")]
    pub lambda: Option<f64>,
    /// Estimate the noise variance from the high-frequency periodogram.
    #[arg(long)]
    pub noisy: bool,
    #[arg(long, default_value_t = FitOptions::default().step_size)]
    pub step: f64,
    #[arg(long, default_value_t = FitOptions::default().max_iters)]
    pub max_iters: usize,
    #[arg(long, default_value_t = FitOptions::default().grad_tol)]
    pub grad_tol: f64,
    #[arg(long, default_value_t = FitOptions::default().prior_weight)]
    pub prior_weight: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransformKind {
    Fourier,
    Quadrature,
    RblFourier,
}

#[derive(Debug, Args)]
pub struct TransformArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub columns: ColumnArgs,
    /// Spectral model JSON from `fit` (optional for `rbl-fourier`).
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "fourier")]
    pub transform: TransformKind,
    #[arg(long, allow_hyphen_values = true)]
    pub omega_min: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub omega_max: Option<f64>,
    #[arg(long)]
    pub omega_count: Option<usize>,
    /// Lower integration bound for `quadrature`.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    /// Upper integration bound for `quadrature`.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Noise variance override (default: the model's).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Time scale of the rBL envelope (default: record duration).
    #[arg(long)]
    pub rbl_scale: Option<f64>,
    /// Write frequencies in cycles per time unit.
    #[arg(long)]
    pub hz: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TaperChoice {
    Square,
    Hann,
    Dpss,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub columns: ColumnArgs,
    #[arg(long, value_enum, default_value = "hann")]
    pub taper: TaperChoice,
    /// DPSS time-half-bandwidth product (default: (k + 1) / 2).
    #[arg(long)]
    pub nw: Option<f64>,
    /// Number of DPSS tapers.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long)]
    pub hz: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// StudyConfig JSON (default: the noise-free study).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sample at dt = 0.01 (5001 points) instead of the configured grid.
    #[arg(long)]
    pub fine_grid: bool,
    /// Override the number of trials.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct DemoArgs {
    pub input: PathBuf,
    #[arg(long, default_value = "decimal date")]
    pub time_col: String,
    #[arg(long, default_value = "average")]
    pub value_col: String,
    /// Keep only the trailing window of this many years.
    #[arg(long)]
    pub years: Option<f64>,
    /// Largest accepted offset of a time stamp from the uniform grid, in steps.
    #[arg(long, default_value_t = 0.05)]
    pub snap_tolerance: f64,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = FitOptions::default().max_iters)]
    pub max_iters: usize,
    #[arg(long, default_value_t = FitOptions::default().prior_weight)]
    pub prior_weight: f64,
    #[arg(long)]
    pub hz: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub options: Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    pub version: String,
    pub wall_time_seconds: f64,
    pub diagnostics: Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn digest(path: &Path) -> Result<InputDigest> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(InputDigest {
        path: path.to_path_buf(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

struct Outcome {
    options: Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    manifest: PathBuf,
    diagnostics: Value,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    configure_threads();
    match execute(&cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                EXIT_NUMERICAL
            } else {
                EXIT_USAGE
            }
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("BGF_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|n| *n >= 1)
    {
        // fails only if a pool already exists (repeated in-process runs)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

pub fn execute(command: &Command) -> Result<()> {
    let start = Instant::now();
    let (name, outcome) = match command {
        Command::Fit(a) => ("fit", cmd_fit(a)?),
        Command::Transform(a) => ("transform", cmd_transform(a)?),
        Command::Baseline(a) => ("baseline", cmd_baseline(a)?),
        Command::Bench(a) => ("bench", cmd_bench(a)?),
        Command::DemoCo2(a) => ("demo-co2", cmd_demo_co2(a)?),
    };
    let manifest = RunManifest {
        command: name.to_string(),
        options: outcome.options,
        inputs: outcome.inputs.iter().map(|p| digest(p)).collect::<Result<_>>()?,
        outputs: outcome.outputs,
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_seconds: start.elapsed().as_secs_f64(),
        diagnostics: outcome.diagnostics,
    };
    let text = serde_json::to_string_pretty(&manifest)?;
    fs::write(&outcome.manifest, text).map_err(|e| Error::io(&outcome.manifest, e))
}

/// `out.csv` → `out.csv.manifest.json`.
fn sibling_manifest(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

/// Loads a series and applies a `# noise_variance=` annotation when present.
pub fn read_series(path: &Path, columns: &ColumnArgs) -> Result<TimeSeries> {
    let ts = load_csv(path, &columns.time_col, &columns.value_col)?;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let annotated = text
        .lines()
        .filter_map(|l| l.trim().strip_prefix("# noise_variance="))
        .next()
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad noise_variance comment `{v}`")))
        })
        .transpose()?;
    match annotated {
        Some(l) => ts.with_noise_variance(l),
        None => Ok(ts),
    }
}

fn trial_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidArgument(format!("no .csv files in {}", dir.display())));
    }
    Ok(files)
}

fn cmd_fit(a: &FitArgs) -> Result<Outcome> {
    let files = match (&a.input, &a.trials) {
        (Some(p), None) => vec![p.clone()],
        (None, Some(d)) => trial_files(d)?,
        _ => return Err(Error::InvalidArgument("give either an input file or --trials".into())),
    };
    let trials = files
        .iter()
        .map(|p| read_series(p, &a.columns))
        .collect::<Result<Vec<_>>>()?;
    let first = &trials[0];
    for (i, t) in trials.iter().enumerate().skip(1) {
        if !first.same_grid(t) {
            return Err(Error::GridMismatch { trial: i });
        }
    }
    let sigma = a.sigma.unwrap_or_else(|| default_se_scale(first));
    let lambda = match (a.lambda, a.noisy) {
        (Some(l), _) => l,
        (None, true) => {
            let est = trials.iter().map(default_noise_variance).collect::<Result<Vec<_>>>()?;
            est.iter().sum::<f64>() / est.len() as f64
        }
        (None, false) => first.noise_variance(),
    };
    let opts = FitOptions {
        step_size: a.step,
        max_iters: a.max_iters,
        grad_tol: a.grad_tol,
        prior_weight: a.prior_weight,
    };
    let (model, report) = fit_map_with_report(&trials, sigma, lambda, &opts)?;
    ensure_parent(&a.output)?;
    fs::write(&a.output, serde_json::to_string_pretty(&model)?).map_err(|e| Error::io(&a.output, e))?;
    Ok(Outcome {
        options: json!({
            "trials": files,
            "time_col": a.columns.time_col,
            "value_col": a.columns.value_col,
            "sigma": sigma,
            "lambda": lambda,
            "step": a.step,
            "max_iters": a.max_iters,
            "grad_tol": a.grad_tol,
            "prior_weight": a.prior_weight,
        }),
        inputs: files,
        outputs: vec![a.output.clone()],
        manifest: sibling_manifest(&a.output),
        diagnostics: json!({
            "iterations": report.iterations,
            "converged": report.converged,
            "initial_objective": report.initial_objective,
            "final_objective": report.final_objective,
            "initial_grad_norm": report.initial_grad_norm,
            "final_grad_norm": report.final_grad_norm,
        }),
    })
}

fn read_model(path: &Path) -> Result<SpectralModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let model: SpectralModel = serde_json::from_str(&text)?;
    model.validate()?;
    Ok(model)
}

/// Models are fitted on the DFT grid of their training data; the series
/// being transformed must share it.
fn check_model_grid(model: &SpectralModel, ts: &TimeSeries) -> Result<()> {
    let grid = dft_frequencies(ts);
    let same = grid.len() == model.len()
        && grid
            .iter()
            .zip(&model.centers)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0));
    if same {
        Ok(())
    } else {
        Err(Error::InvalidArgument(
            "model centers do not match the DFT grid of the input series".into(),
        ))
    }
}

fn omega_grid(a: &TransformArgs, ts: &TimeSeries) -> Result<Vec<f64>> {
    let default = default_omega_grid(ts);
    let lo = a.omega_min.unwrap_or(default[0]);
    let hi = a.omega_max.unwrap_or(default[default.len() - 1]);
    let count = match a.omega_count {
        Some(c) => c,
        None if a.omega_min.is_none() && a.omega_max.is_none() => return Ok(default),
        None => default.len(),
    };
    if count == 0 || !(lo <= hi) {
        return Err(Error::InvalidArgument(format!(
            "invalid frequency grid [{lo}, {hi}] with {count} points"
        )));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let step = (hi - lo) / (count - 1) as f64;
    Ok((0..count).map(|i| lo + i as f64 * step).collect())
}

fn cmd_transform(a: &TransformArgs) -> Result<Outcome> {
    let ts = read_series(&a.input, &a.columns)?;
    let model = a.model.as_deref().map(read_model).transpose()?;
    let mut inputs = vec![a.input.clone()];
    inputs.extend(a.model.clone());
    ensure_parent(&a.output)?;

    let need_model = || {
        model
            .clone()
            .ok_or_else(|| Error::InvalidArgument("--model is required for this transform".into()))
    };
    let mut options = json!({
        "transform": format!("{:?}", a.transform).to_lowercase(),
        "time_col": a.columns.time_col,
        "value_col": a.columns.value_col,
        "hz": a.hz,
    });
    match a.transform {
        TransformKind::Fourier => {
            let m = need_model()?;
            check_model_grid(&m, &ts)?;
            let lambda = a.lambda.unwrap_or(m.noise_variance);
            let post = fit_gp(&ts, &KernelSpec::bgf_for_step(m, ts.dt()), lambda)?;
            let grid = omega_grid(a, &ts)?;
            bgf_fourier(&post, &grid)?.write_csv(&a.output, a.hz)?;
            options["lambda"] = json!(lambda);
            options["omega_count"] = json!(grid.len());
            options["omega_min"] = json!(grid[0]);
            options["omega_max"] = json!(grid[grid.len() - 1]);
        }
        TransformKind::Quadrature => {
            let m = need_model()?;
            check_model_grid(&m, &ts)?;
            let (Some(lo), Some(hi)) = (a.a, a.b) else {
                return Err(Error::InvalidArgument("quadrature needs --a and --b".into()));
            };
            let lambda = a.lambda.unwrap_or(m.noise_variance);
            let post = fit_gp(&ts, &KernelSpec::bgf_for_step(m, ts.dt()), lambda)?;
            let kt = KernelTransform::quadrature(&post.kernel, lo, hi)?;
            let value = integral_transform(&post, &kt, &[0.0])[0].re;
            let text = serde_json::to_string_pretty(&json!({ "a": lo, "b": hi, "value": value }))?;
            fs::write(&a.output, text).map_err(|e| Error::io(&a.output, e))?;
            options["lambda"] = json!(lambda);
            options["a"] = json!(lo);
            options["b"] = json!(hi);
        }
        TransformKind::RblFourier => {
            let lambda = a
                .lambda
                .or_else(|| model.as_ref().map(|m| m.noise_variance))
                .unwrap_or(ts.noise_variance());
            let scale = a.rbl_scale.unwrap_or(ts.duration());
            let spec = KernelSpec::Rbl {
                period: ts.duration(),
                n: ts.len(),
                amplitude: 1.0,
                scale,
            };
            let post = fit_gp(&ts, &spec, lambda)?;
            let grid = omega_grid(a, &ts)?;
            rbl_fourier(&post, &grid)?.write_csv(&a.output, a.hz)?;
            options["lambda"] = json!(lambda);
            options["rbl_scale"] = json!(scale);
            options["omega_count"] = json!(grid.len());
        }
    }
    Ok(Outcome {
        options,
        inputs,
        outputs: vec![a.output.clone()],
        manifest: sibling_manifest(&a.output),
        diagnostics: Value::Null,
    })
}

fn taper_set(choice: TaperChoice, n: usize, nw: Option<f64>, k: usize) -> Result<TaperSet> {
    match choice {
        TaperChoice::Square => square(n),
        TaperChoice::Hann => hann(n),
        TaperChoice::Dpss => dpss(n, nw.unwrap_or((k as f64 + 1.0) / 2.0), k),
    }
}

fn cmd_baseline(a: &BaselineArgs) -> Result<Outcome> {
    let ts = read_series(&a.input, &a.columns)?;
    let tapers = taper_set(a.taper, ts.len(), a.nw, a.k)?;
    let spec = multitaper_spectrum(&ts, &tapers)?;
    ensure_parent(&a.output)?;
    spec.write_csv(&a.output, a.hz)?;
    Ok(Outcome {
        options: json!({
            "taper": format!("{:?}", a.taper).to_lowercase(),
            "k": tapers.count(),
            "nw": tapers.bandwidth(),
            "hz": a.hz,
        }),
        inputs: vec![a.input.clone()],
        outputs: vec![a.output.clone()],
        manifest: sibling_manifest(&a.output),
        diagnostics: Value::Null,
    })
}

fn cmd_bench(a: &BenchArgs) -> Result<Outcome> {
    let mut config = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str::<StudyConfig>(&text)?
        }
        None => StudyConfig::default(),
    };
    if a.fine_grid {
        config.grid = GridConfig::fine();
    }
    if let Some(n) = a.trials {
        config.n_trials = n;
    }
    let result = run_study(&config)?;
    let outputs = result.write_all(&a.output)?;
    let failures: usize = result.failures.iter().sum();
    Ok(Outcome {
        options: serde_json::to_value(&config)?,
        inputs: a.config.iter().cloned().collect(),
        outputs,
        manifest: a.output.join("manifest.json"),
        diagnostics: json!({ "failures": failures }),
    })
}

fn write_power(spec: &PowerSpectrum, path: &Path, hz: bool, outputs: &mut Vec<PathBuf>) -> Result<()> {
    spec.write_csv(path, hz)?;
    outputs.push(path.to_path_buf());
    Ok(())
}

fn cmd_demo_co2(a: &DemoArgs) -> Result<Outcome> {
    let raw = load_csv_snapped(&a.input, &a.time_col, &a.value_col, a.snap_tolerance)?;
    let raw = match a.years {
        Some(years) => trailing_window(&raw, years)?,
        None => raw,
    };
    let detrended = detrend_poly(&raw, 2)?;
    // a noise floor keeps the fit defined on exactly polynomial input
    let scale = raw.values().iter().map(|v| v * v).sum::<f64>() / raw.len() as f64;
    let floor = 1e-12 * scale.max(1.0);
    let lambda = match a.lambda {
        Some(l) => l,
        None => default_noise_variance(&detrended)?.max(floor),
    };
    let sigma = a.sigma.unwrap_or_else(|| default_se_scale(&detrended));
    let opts = FitOptions {
        max_iters: a.max_iters,
        prior_weight: a.prior_weight,
        ..FitOptions::default()
    };
    let detrended = detrended.with_noise_variance(lambda)?;
    let (model, report) = fit_map_with_report(std::slice::from_ref(&detrended), sigma, lambda, &opts)?;
    let post = fit_gp(
        &detrended,
        &KernelSpec::bgf_for_step(model.clone(), detrended.dt()),
        lambda,
    )?;
    let bgf: ComplexSpectrum = bgf_fourier(&post, &default_omega_grid(&detrended))?;

    let dir = &a.output;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut outputs = Vec::new();
    let series_path = dir.join("detrended.csv");
    detrended.write_csv(&series_path)?;
    outputs.push(series_path);
    let model_path = dir.join("model.json");
    fs::write(&model_path, serde_json::to_string_pretty(&model)?).map_err(|e| Error::io(&model_path, e))?;
    outputs.push(model_path);
    let bgf_path = dir.join("bgf.csv");
    bgf.write_csv(&bgf_path, a.hz)?;
    outputs.push(bgf_path);
    write_power(&bgf.power(), &dir.join("bgf_power.csv"), a.hz, &mut outputs)?;

    let n = detrended.len();
    let baselines = [
        ("square.csv", square(n)?),
        ("hann.csv", hann(n)?),
        ("dpss2.csv", dpss(n, 1.5, 2)?),
        ("dpss3.csv", dpss(n, 2.0, 3)?),
    ];
    for (name, tapers) in &baselines {
        write_power(
            &multitaper_spectrum(&detrended, tapers)?,
            &dir.join(name),
            a.hz,
            &mut outputs,
        )?;
    }

    Ok(Outcome {
        options: json!({
            "time_col": a.time_col,
            "value_col": a.value_col,
            "years": a.years,
            "snap_tolerance": a.snap_tolerance,
            "detrend_order": 2,
            "sigma": sigma,
            "lambda": lambda,
            "max_iters": a.max_iters,
            "prior_weight": a.prior_weight,
            "hz": a.hz,
            "samples": n,
            "dt": detrended.dt(),
        }),
        inputs: vec![a.input.clone()],
        outputs,
        manifest: dir.join("manifest.json"),
        diagnostics: json!({
            "iterations": report.iterations,
            "converged": report.converged,
            "final_objective": report.final_objective,
            "jitter": post.jitter,
        }),
    })
}

/// Last `years` time units of the record.
fn trailing_window(ts: &TimeSeries, years: f64) -> Result<TimeSeries> {
    if !(years > 0.0) {
        return Err(Error::InvalidArgument(format!("--years must be > 0, got {years}")));
    }
    let keep = ((years / ts.dt()).round() as usize).clamp(2, ts.len());
    let start = ts.len() - keep;
    TimeSeries::new(
        ts.time(start),
        ts.dt(),
        ts.values()[start..].to_vec(),
        ts.noise_variance(),
    )
}
