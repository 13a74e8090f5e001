//! Seeded simulation studies: random anharmonic signals, analytic
//! ground-truth spectra, band deviations and per-trial rankings.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bgf::bgf_fourier;
use crate::dft::{dft_frequencies, multitaper_spectrum, normalize_energy, ComplexSpectrum, Convention, PowerSpectrum};
use crate::error::{ensure, Error, Result};
use crate::gpcore::{fit_gp, GPPosterior, KernelSpec};
use crate::signal::{add_white_noise, generate_anharmonic, AnharmonicParams, TimeSeries};
use crate::speclearn::{fit_map, FitOptions};
use crate::taper::{dpss, hann, square};

/// Analytic Fourier transform of `e^{-t²/(2a²)} cos³(ω₀t + φ₀)` (analog convention).
pub fn ground_truth_value(params: &AnharmonicParams, omega: f64) -> Complex64 {
    let AnharmonicParams { a, omega0, phi0 } = *params;
    let g = |mu: f64| (-0.5 * a * a * (omega - mu).powi(2)).exp();
    let p1 = Complex64::from_polar(1.0, phi0);
    let p3 = Complex64::from_polar(1.0, 3.0 * phi0);
    let sum = (p1 * g(omega0) + p1.conj() * g(-omega0)) * 0.375
        + (p3 * g(3.0 * omega0) + p3.conj() * g(-3.0 * omega0)) * 0.125;
    sum * (a / (2.0 * PI).sqrt())
}

pub fn ground_truth_spectrum(params: &AnharmonicParams, omega_grid: &[f64]) -> Result<ComplexSpectrum> {
    params.validate()?;
    let values = omega_grid.iter().map(|w| ground_truth_value(params, *w)).collect();
    ComplexSpectrum::new(omega_grid.to_vec(), values, Convention::Analog)
}

/// Absolute deviations summed over each band; `None` for an empty band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandDeviation {
    pub passband: Option<f64>,
    pub stopband: Option<f64>,
}

impl BandDeviation {
    pub fn get(&self, band: Band) -> Option<f64> {
        match band {
            Band::Passband => self.passband,
            Band::Stopband => self.stopband,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Passband,
    Stopband,
}

impl Band {
    pub const ALL: [Band; 2] = [Band::Passband, Band::Stopband];

    pub fn name(self) -> &'static str {
        match self {
            Band::Passband => "passband",
            Band::Stopband => "stopband",
        }
    }
}

/// Passband is `{j : log10 truth_j > θ}`, stopband its complement.
pub fn band_deviation(est: &PowerSpectrum, truth: &PowerSpectrum, theta: f64) -> Result<BandDeviation> {
    band_deviation_by(est, truth, theta, |e, t| (e - t).abs())
}

/// Same bands, deviation `|log10 est - log10 truth|` (zero power clamped to
/// the smallest positive double).
pub fn log_band_deviation(est: &PowerSpectrum, truth: &PowerSpectrum, theta: f64) -> Result<BandDeviation> {
    let lg = |x: f64| x.max(f64::MIN_POSITIVE).log10();
    band_deviation_by(est, truth, theta, |e, t| (lg(e) - lg(t)).abs())
}

fn band_deviation_by(
    est: &PowerSpectrum,
    truth: &PowerSpectrum,
    theta: f64,
    dev: impl Fn(f64, f64) -> f64,
) -> Result<BandDeviation> {
    ensure(est.len() == truth.len(), || {
        format!("estimate has {} bins, truth has {}", est.len(), truth.len())
    })?;
    let shared = est
        .freqs
        .iter()
        .zip(&truth.freqs)
        .all(|(a, b)| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0));
    ensure(shared, || "estimate and truth are on different frequency grids".into())?;
    let (mut pass, mut stop) = (None::<f64>, None::<f64>);
    for (e, t) in est.power.iter().zip(&truth.power) {
        let d = dev(*e, *t);
        let slot = if t.log10() > theta { &mut pass } else { &mut stop };
        *slot = Some(slot.unwrap_or(0.0) + d);
    }
    Ok(BandDeviation {
        passband: pass,
        stopband: stop,
    })
}

/// Spectral estimators compared in a study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Bgf,
    SquareDft,
    HannDft,
    Dpss(usize),
}

impl Estimator {
    /// DFT-based estimators are energy-normalized against the truth.
    pub fn is_dft(self) -> bool {
        !matches!(self, Estimator::Bgf)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Estimator::Bgf => f.write_str("bgf"),
            Estimator::SquareDft => f.write_str("square"),
            Estimator::HannDft => f.write_str("hann"),
            Estimator::Dpss(k) => write!(f, "dpss{k}"),
        }
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bgf" => Ok(Estimator::Bgf),
            "square" => Ok(Estimator::SquareDft),
            "hann" => Ok(Estimator::HannDft),
            _ => s
                .strip_prefix("dpss")
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|k| *k >= 1)
                .map(Estimator::Dpss)
                .ok_or_else(|| Error::InvalidArgument(format!("unknown estimator `{s}`"))),
        }
    }
}

impl Serialize for Estimator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Estimator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Sampling grid of each trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub dt: f64,
}

impl GridConfig {
    /// `t ∈ [-25, 25]`, `dt = 0.05` (1001 points).
    pub fn desk() -> Self {
        Self {
            t_min: -25.0,
            t_max: 25.0,
            dt: 0.05,
        }
    }

    /// `t ∈ [-25, 25]`, `dt = 0.01` (5001 points).
    pub fn fine() -> Self {
        Self {
            dt: 0.01,
            ..Self::desk()
        }
    }
}

impl Default for GridConfig {
    fn default() -> Self {
        Self::desk()
    }
}

/// Hyperparameters of the learned-kernel estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BgfSettings {
    /// SE width of the spectral bumps, in DFT bins (`2π/T`).
    pub se_scale_bins: f64,
    pub prior_weight: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Noise variance; the square of `noise_sd` when absent.
    pub lambda: Option<f64>,
}

impl Default for BgfSettings {
    fn default() -> Self {
        let opts = FitOptions::default();
        Self {
            se_scale_bins: 2.0,
            prior_weight: opts.prior_weight,
            max_iters: opts.max_iters,
            grad_tol: opts.grad_tol,
            lambda: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub n_trials: usize,
    pub noise_sd: f64,
    pub phi0_range: [f64; 2],
    pub omega0_range: [f64; 2],
    pub a_range: [f64; 2],
    pub seed: u64,
    pub estimators: Vec<Estimator>,
    /// log10 power separating passband from stopband.
    pub theta: f64,
    pub grid: GridConfig,
    pub bgf: BgfSettings,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            n_trials: 200,
            noise_sd: 0.0,
            phi0_range: [0.0, 2.0 * PI],
            omega0_range: [0.3 * 2.0 * PI, 0.6 * 2.0 * PI],
            a_range: [0.5, 30.0],
            seed: 0,
            estimators: vec![Estimator::Bgf, Estimator::SquareDft, Estimator::HannDft],
            theta: -6.0,
            grid: GridConfig::desk(),
            bgf: BgfSettings::default(),
        }
    }
}

impl StudyConfig {
    /// Defaults of the noisy study: sd 0.1 and DPSS with 2, 3 and 4 tapers.
    pub fn noisy() -> Self {
        Self {
            noise_sd: 0.1,
            estimators: vec![
                Estimator::Bgf,
                Estimator::SquareDft,
                Estimator::Dpss(2),
                Estimator::Dpss(3),
                Estimator::Dpss(4),
            ],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.n_trials >= 1, || "n_trials must be >= 1".into())?;
        ensure(self.noise_sd.is_finite() && self.noise_sd >= 0.0, || {
            format!("noise_sd must be >= 0, got {}", self.noise_sd)
        })?;
        let [p0, p1] = self.phi0_range;
        ensure(0.0 <= p0 && p0 < p1 && p1 <= 2.0 * PI, || {
            format!(
                "phi0_range must be a nonempty subrange of [0, 2π], got {:?}",
                self.phi0_range
            )
        })?;
        let [w0, w1] = self.omega0_range;
        ensure(0.0 < w0 && w0 < w1 && w1.is_finite(), || {
            format!(
                "omega0_range must be a nonempty positive range, got {:?}",
                self.omega0_range
            )
        })?;
        let [a0, a1] = self.a_range;
        ensure(0.0 < a0 && a0 < a1 && a1.is_finite(), || {
            format!("a_range must be a nonempty positive range, got {:?}", self.a_range)
        })?;
        ensure(!self.estimators.is_empty(), || {
            "at least one estimator is required".into()
        })?;
        ensure(!self.theta.is_nan(), || "theta must not be NaN".into())?;
        let g = self.grid;
        ensure(g.t_min < g.t_max && g.dt > 0.0 && g.dt.is_finite(), || {
            format!("invalid grid {g:?}")
        })?;
        let b = self.bgf;
        ensure(b.se_scale_bins > 0.0 && b.se_scale_bins.is_finite(), || {
            format!("se_scale_bins must be > 0, got {}", b.se_scale_bins)
        })?;
        if let Some(l) = b.lambda {
            ensure(l.is_finite() && l >= 0.0, || format!("lambda must be >= 0, got {l}"))?;
        }
        self.fit_options().validate()
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            max_iters: self.bgf.max_iters,
            grad_tol: self.bgf.grad_tol,
            prior_weight: self.bgf.prior_weight,
            ..FitOptions::default()
        }
    }

    pub fn lambda(&self) -> f64 {
        self.bgf.lambda.unwrap_or(self.noise_sd * self.noise_sd)
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix64(splitmix64(master) ⊕ index)`; mixing the master first keeps
/// nearby master seeds from sharing trials.
pub fn trial_seed(master: u64, index: u64) -> u64 {
    splitmix64(splitmix64(master) ^ index)
}

/// Parameters and noise seed of one trial.
pub fn draw_trial(config: &StudyConfig, index: usize) -> (AnharmonicParams, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(config.seed, index as u64));
    let [p0, p1] = config.phi0_range;
    let [w0, w1] = config.omega0_range;
    let [a0, a1] = config.a_range;
    let phi0 = rng.random_range(p0..p1);
    let omega0 = rng.random_range(w0..w1);
    // (a0, a1]
    let a = a1 - rng.random_range(0.0..(a1 - a0));
    let noise_seed = rng.random();
    (AnharmonicParams { a, omega0, phi0 }, noise_seed)
}

/// Learned-kernel posterior with the study's hyperparameters.
pub fn fit_bgf(ts: &TimeSeries, config: &StudyConfig) -> Result<GPPosterior> {
    let se_scale = config.bgf.se_scale_bins * 2.0 * PI / ts.duration();
    let lambda = config.lambda();
    let model = fit_map(std::slice::from_ref(ts), se_scale, lambda, &config.fit_options())?;
    fit_gp(ts, &KernelSpec::bgf_for_step(model, ts.dt()), lambda)
}

/// Raw power spectrum of one estimator on the DFT grid of `ts`.
pub fn estimate(estimator: Estimator, ts: &TimeSeries, config: &StudyConfig) -> Result<PowerSpectrum> {
    let n = ts.len();
    match estimator {
        Estimator::Bgf => Ok(bgf_fourier(&fit_bgf(ts, config)?, &dft_frequencies(ts))?.power()),
        Estimator::SquareDft => multitaper_spectrum(ts, &square(n)?),
        Estimator::HannDft => multitaper_spectrum(ts, &hann(n)?),
        Estimator::Dpss(k) => multitaper_spectrum(ts, &dpss(n, dpss_half_bandwidth(k), k)?),
    }
}

/// Time-half-bandwidth product used for `k` tapers: `(k + 1) / 2`.
pub fn dpss_half_bandwidth(k: usize) -> f64 {
    (k as f64 + 1.0) / 2.0
}

/// One estimator's outcome on one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutcome {
    pub estimator: Estimator,
    pub deviation: Option<BandDeviation>,
    pub log_deviation: Option<BandDeviation>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub params: AnharmonicParams,
    pub noise_seed: u64,
    pub outcomes: Vec<EstimatorOutcome>,
    /// Rank per estimator (registry order) per band; absent when the band is empty.
    pub ranks: BTreeMap<Band, Vec<usize>>,
}

/// `histogram[rank - 1]` = number of trials in which the estimator got that rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankHistogram {
    pub estimator: Estimator,
    pub band: Band,
    pub histogram: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub version: String,
    pub config: StudyConfig,
    pub trials: Vec<TrialRecord>,
    pub histograms: Vec<RankHistogram>,
    /// Failed trials per estimator (registry order).
    pub failures: Vec<usize>,
}

/// Ranks (1 = smallest deviation); failures rank last, ties by registry order.
pub fn rank(deviations: &[Option<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..deviations.len()).collect();
    let key = |i: usize| deviations[i].filter(|d| !d.is_nan()).unwrap_or(f64::INFINITY);
    order.sort_by(|&i, &j| key(i).total_cmp(&key(j)).then(i.cmp(&j)));
    let mut ranks = vec![0; deviations.len()];
    for (r, i) in order.into_iter().enumerate() {
        ranks[i] = r + 1;
    }
    ranks
}

pub fn run_trial(config: &StudyConfig, index: usize) -> Result<TrialRecord> {
    let (params, noise_seed) = draw_trial(config, index);
    let g = config.grid;
    let clean = generate_anharmonic(&params, g.t_min, g.t_max, g.dt)?;
    let ts = if config.noise_sd > 0.0 {
        add_white_noise(&clean, config.noise_sd, noise_seed)?
    } else {
        clean
    };
    let grid = dft_frequencies(&ts);
    let truth = ground_truth_spectrum(&params, &grid)?.power();

    let outcomes: Vec<EstimatorOutcome> = config
        .estimators
        .iter()
        .map(|&est| {
            let scored = estimate(est, &ts, config).and_then(|p| {
                let p = if est.is_dft() { normalize_energy(&p, &truth)? } else { p };
                Ok((
                    band_deviation(&p, &truth, config.theta)?,
                    log_band_deviation(&p, &truth, config.theta)?,
                ))
            });
            match scored {
                Ok((d, l)) => EstimatorOutcome {
                    estimator: est,
                    deviation: Some(d),
                    log_deviation: Some(l),
                    error: None,
                },
                Err(e) => EstimatorOutcome {
                    estimator: est,
                    deviation: None,
                    log_deviation: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let mut ranks = BTreeMap::new();
    for band in Band::ALL {
        let devs: Vec<Option<f64>> = outcomes.iter().map(|o| o.deviation.and_then(|d| d.get(band))).collect();
        // an empty band is empty for every estimator (it depends on truth only)
        let present = outcomes
            .iter()
            .any(|o| o.deviation.is_some_and(|d| d.get(band).is_some()));
        let all_failed = outcomes.iter().all(|o| o.deviation.is_none());
        if present || all_failed {
            ranks.insert(band, rank(&devs));
        }
    }
    Ok(TrialRecord {
        trial: index,
        params,
        noise_seed,
        outcomes,
        ranks,
    })
}

pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let trials = (0..config.n_trials)
        .into_par_iter()
        .map(|i| run_trial(config, i))
        .collect::<Result<Vec<_>>>()?;
    let e = config.estimators.len();
    let mut histograms = Vec::new();
    for (slot, &est) in config.estimators.iter().enumerate() {
        for band in Band::ALL {
            let mut histogram = vec![0; e];
            for t in &trials {
                if let Some(r) = t.ranks.get(&band) {
                    histogram[r[slot] - 1] += 1;
                }
            }
            histograms.push(RankHistogram {
                estimator: est,
                band,
                histogram,
            });
        }
    }
    let failures = (0..e)
        .map(|slot| trials.iter().filter(|t| t.outcomes[slot].error.is_some()).count())
        .collect();
    Ok(StudyResult {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        trials,
        histograms,
        failures,
    })
}

impl StudyResult {
    /// Fraction of trials (with the band present) in which `estimator` ranked first.
    pub fn win_rate(&self, estimator: Estimator, band: Band) -> Option<f64> {
        let h = self
            .histograms
            .iter()
            .find(|h| h.estimator == estimator && h.band == band)?;
        let total: usize = h.histogram.iter().sum();
        (total > 0).then(|| h.histogram[0] as f64 / total as f64)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `trial,estimator,band,value,log10_value`; failed or empty bands are skipped.
    pub fn write_deviations_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(["trial", "estimator", "band", "value", "log10_value"])
            .map_err(|e| csv_io(path, e))?;
        for t in &self.trials {
            for o in &t.outcomes {
                let (Some(d), Some(l)) = (o.deviation, o.log_deviation) else {
                    continue;
                };
                for band in Band::ALL {
                    if let (Some(v), Some(lv)) = (d.get(band), l.get(band)) {
                        w.write_record([
                            t.trial.to_string(),
                            o.estimator.to_string(),
                            band.name().to_string(),
                            v.to_string(),
                            lv.to_string(),
                        ])
                        .map_err(|e| csv_io(path, e))?;
                    }
                }
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// `estimator,band,rank,count`.
    pub fn write_ranks_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        w.write_record(["estimator", "band", "rank", "count"])
            .map_err(|e| csv_io(path, e))?;
        for h in &self.histograms {
            for (r, c) in h.histogram.iter().enumerate() {
                w.write_record([
                    h.estimator.to_string(),
                    h.band.name().to_string(),
                    (r + 1).to_string(),
                    c.to_string(),
                ])
                .map_err(|e| csv_io(path, e))?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Writes `result.json`, `deviations.csv` and `ranks.csv`; returns their paths.
    pub fn write_all(&self, dir: &Path) -> Result<Vec<std::path::PathBuf>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let json = dir.join("result.json");
        fs::write(&json, self.to_json()?).map_err(|e| Error::io(&json, e))?;
        let dev = dir.join("deviations.csv");
        self.write_deviations_csv(&dev)?;
        let ranks = dir.join("ranks.csv");
        self.write_ranks_csv(&ranks)?;
        Ok(vec![json, dev, ranks])
    }
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{other:?}")),
    }
}
