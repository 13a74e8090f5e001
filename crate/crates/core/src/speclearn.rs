//! MAP learning of a positive spectral density.
//!
//! The density is restricted to `s(ξ) = Σ_j e^{a_j} K_SE(ξ, ξ_j)` with one
//! squared-exponential bump per DFT frequency `ξ_j`, so it is positive for
//! every choice of the log-weights `a_j`. Each Hann-tapered DFT coefficient
//! is modelled as an independent complex normal with variance `s(ξ_j) + λ`:
//!
//! ```text
//! l(a) = Σ_j  -|y_j|² / (s(ξ_j) + λ) - ln(π (s(ξ_j) + λ))
//! p(a) = -½ Σ_{k,j} e^{a_k} K_SE(ξ_k, ξ_j) e^{a_j}
//! ```
//!
//! and `l + prior_weight·p` is maximized over `a` by gradient ascent with a
//! backtracking line search. Several realizations on the same grid add
//! their log-likelihoods.

use serde::{Deserialize, Serialize};

use crate::dft::{dft_frequencies, tapered_dft};
use crate::error::{ensure, Error, Result};
use crate::signal::TimeSeries;
use crate::taper::hann;

/// Learned spectral density, in periodogram units (unit-energy taper).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    pub se_scale: f64,
    pub noise_variance: f64,
    pub centers: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl SpectralModel {
    pub fn new(centers: Vec<f64>, log_weights: Vec<f64>, se_scale: f64, noise_variance: f64) -> Result<Self> {
        let m = Self {
            se_scale,
            noise_variance,
            centers,
            log_weights,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.centers.len() == self.log_weights.len(), || {
            format!(
                "{} centers but {} log-weights",
                self.centers.len(),
                self.log_weights.len()
            )
        })?;
        ensure(!self.centers.is_empty(), || "spectral model has no centers".into())?;
        ensure(self.se_scale.is_finite() && self.se_scale > 0.0, || {
            format!("SE scale must be > 0, got {}", self.se_scale)
        })?;
        ensure(self.noise_variance.is_finite() && self.noise_variance >= 0.0, || {
            format!("noise variance must be >= 0, got {}", self.noise_variance)
        })?;
        ensure(
            self.centers.iter().chain(&self.log_weights).all(|v| v.is_finite()),
            || "centers and log-weights must be finite".into(),
        )
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|a| a.exp()).collect()
    }

    /// Index of the center with the largest density value.
    pub fn argmax_center(&self) -> usize {
        let d = se_operator(&self.centers, self.se_scale).apply(&self.weights());
        d.iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |best, (i, v)| if *v > best.1 { (i, *v) } else { best },
            )
            .0
    }

    /// Averages log-weights over `±ξ` pairs of centers.
    pub fn symmetrize(&mut self) {
        let tol = 1e-9 * self.centers.iter().fold(1.0f64, |m, c| m.max(c.abs()));
        for i in 0..self.len() {
            let xi = self.centers[i];
            if xi <= 0.0 {
                continue;
            }
            if let Some(j) = self.centers.iter().position(|c| (c + xi).abs() <= tol) {
                let mean = 0.5 * (self.log_weights[i] + self.log_weights[j]);
                self.log_weights[i] = mean;
                self.log_weights[j] = mean;
            }
        }
    }
}

#[inline]
pub fn se(x: f64, y: f64, scale: f64) -> f64 {
    let d = (x - y) / scale;
    (-0.5 * d * d).exp()
}

/// `s(ξ) = Σ_j e^{a_j} exp(-(ξ-ξ_j)²/(2σ²))`.
pub fn density_eval(model: &SpectralModel, xi: f64) -> f64 {
    model
        .centers
        .iter()
        .zip(&model.log_weights)
        .map(|(c, a)| (a - 0.5 * ((xi - c) / model.se_scale).powi(2)).exp())
        .sum()
}

/// Multiplication by the SE Gram matrix over the centers.
///
/// Uniform center grids use a banded Toeplitz form; the band stops where the
/// SE kernel underflows to exactly zero, so the product is unchanged.
enum SeOperator {
    Toeplitz(Vec<f64>),
    Dense(Vec<Vec<f64>>),
}

impl SeOperator {
    fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            SeOperator::Toeplitz(row) => {
                let n = v.len();
                let band = row.len();
                (0..n)
                    .map(|k| {
                        let up = (n - k).min(band);
                        let down = (k + 1).min(band);
                        let ahead: f64 = row[..up].iter().zip(&v[k..k + up]).map(|(r, x)| r * x).sum();
                        let behind: f64 = row[1..down]
                            .iter()
                            .zip(v[k + 1 - down..k].iter().rev())
                            .map(|(r, x)| r * x)
                            .sum();
                        ahead + behind
                    })
                    .collect()
            }
            SeOperator::Dense(m) => m.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect(),
        }
    }
}

fn se_operator(centers: &[f64], scale: f64) -> SeOperator {
    let n = centers.len();
    if n >= 2 {
        let step = centers[1] - centers[0];
        let uniform = step > 0.0 && centers.windows(2).all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step);
        if uniform {
            let mut row = Vec::new();
            for d in 0..n {
                let v = se(d as f64 * step, 0.0, scale);
                if v == 0.0 {
                    break;
                }
                row.push(v);
            }
            return SeOperator::Toeplitz(row);
        }
    }
    SeOperator::Dense(
        centers
            .iter()
            .map(|x| centers.iter().map(|y| se(*x, *y, scale)).collect())
            .collect(),
    )
}

/// Summed periodograms of one or more realizations.
struct Data<'a> {
    summed: &'a [f64],
    realizations: f64,
}

struct Evaluator {
    op: SeOperator,
    lambda: f64,
    prior_weight: f64,
}

struct State {
    weights: Vec<f64>,
    density: Vec<f64>,
}

impl Evaluator {
    fn state(&self, log_weights: &[f64]) -> State {
        let weights: Vec<f64> = log_weights.iter().map(|a| a.exp()).collect();
        let density = self.op.apply(&weights);
        State { weights, density }
    }

    fn log_likelihood(&self, st: &State, data: &Data) -> f64 {
        st.density
            .iter()
            .zip(data.summed)
            .map(|(s, p)| {
                let v = s + self.lambda;
                -p / v - data.realizations * (std::f64::consts::PI * v).ln()
            })
            .sum()
    }

    fn log_prior(&self, st: &State) -> f64 {
        -0.5 * st.weights.iter().zip(&st.density).map(|(w, s)| w * s).sum::<f64>()
    }

    fn objective(&self, st: &State, data: &Data) -> f64 {
        let prior = if self.prior_weight == 0.0 {
            0.0
        } else {
            self.prior_weight * self.log_prior(st)
        };
        self.log_likelihood(st, data) + prior
    }

    fn likelihood_gradient(&self, st: &State, data: &Data) -> Result<Vec<f64>> {
        let mut resid = Vec::with_capacity(st.density.len());
        for (j, (s, p)) in st.density.iter().zip(data.summed).enumerate() {
            let v = s + self.lambda;
            if v < 1e-300 {
                return Err(Error::NumericalDegeneracy(format!(
                    "density plus noise variance underflows at center {j}"
                )));
            }
            resid.push((p - data.realizations * v) / (v * v));
        }
        let conv = self.op.apply(&resid);
        Ok(st.weights.iter().zip(conv).map(|(w, c)| w * c).collect())
    }

    fn prior_gradient(&self, st: &State) -> Vec<f64> {
        st.weights.iter().zip(&st.density).map(|(w, s)| -w * s).collect()
    }

    fn gradient(&self, st: &State, data: &Data) -> Result<Vec<f64>> {
        let mut g = self.likelihood_gradient(st, data)?;
        if self.prior_weight != 0.0 {
            for (gi, pi) in g.iter_mut().zip(self.prior_gradient(st)) {
                *gi += self.prior_weight * pi;
            }
        }
        Ok(g)
    }
}

fn evaluator(model: &SpectralModel, prior_weight: f64) -> Evaluator {
    Evaluator {
        op: se_operator(&model.centers, model.se_scale),
        lambda: model.noise_variance,
        prior_weight,
    }
}

fn check_periodogram(model: &SpectralModel, periodogram: &[f64]) -> Result<()> {
    ensure(periodogram.len() == model.len(), || {
        format!(
            "periodogram has {} entries for {} centers",
            periodogram.len(),
            model.len()
        )
    })?;
    ensure(periodogram.iter().all(|p| *p >= 0.0), || {
        "periodogram must be non-negative".into()
    })
}

/// Complex-normal log-likelihood of one periodogram, summed over centers.
pub fn log_likelihood(model: &SpectralModel, periodogram: &[f64]) -> Result<f64> {
    check_periodogram(model, periodogram)?;
    let ev = evaluator(model, 0.0);
    let st = ev.state(&model.log_weights);
    Ok(ev.log_likelihood(
        &st,
        &Data {
            summed: periodogram,
            realizations: 1.0,
        },
    ))
}

/// `∂l/∂a_k = e^{a_k} Σ_j (|y_j|² - (s(ξ_j)+λ)) / (s(ξ_j)+λ)² · K_SE(ξ_k, ξ_j)`.
pub fn likelihood_gradient(model: &SpectralModel, periodogram: &[f64]) -> Result<Vec<f64>> {
    check_periodogram(model, periodogram)?;
    let ev = evaluator(model, 0.0);
    let st = ev.state(&model.log_weights);
    ev.likelihood_gradient(
        &st,
        &Data {
            summed: periodogram,
            realizations: 1.0,
        },
    )
}

/// `p(a) = -½ Σ_{k,j} e^{a_k} K_SE(ξ_k, ξ_j) e^{a_j}`.
pub fn log_prior(model: &SpectralModel) -> f64 {
    let ev = evaluator(model, 1.0);
    ev.log_prior(&ev.state(&model.log_weights))
}

/// `∂p/∂a_k = -e^{a_k} Σ_j K_SE(ξ_k, ξ_j) e^{a_j}`.
pub fn prior_gradient(model: &SpectralModel) -> Vec<f64> {
    let ev = evaluator(model, 1.0);
    ev.prior_gradient(&ev.state(&model.log_weights))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Initial ascent step on the log-weights.
    pub step_size: f64,
    /// Number of ascent iterations; 0 returns the initialization.
    pub max_iters: usize,
    /// Stop once the gradient sup-norm falls below this fraction of its
    /// value at the initialization.
    pub grad_tol: f64,
    /// Multiplier on the log-prior.
    pub prior_weight: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            max_iters: 5000,
            grad_tol: 1e-6,
            prior_weight: 1.0,
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        ensure(self.step_size.is_finite() && self.step_size > 0.0, || {
            format!("step size must be > 0, got {}", self.step_size)
        })?;
        ensure(self.grad_tol.is_finite() && self.grad_tol > 0.0, || {
            format!("gradient tolerance must be > 0, got {}", self.grad_tol)
        })?;
        ensure(self.prior_weight.is_finite() && self.prior_weight >= 0.0, || {
            format!("prior weight must be >= 0, got {}", self.prior_weight)
        })
    }
}

/// Default SE width in frequency: four DFT bins, `4·2π/T`.
pub fn default_se_scale(ts: &TimeSeries) -> f64 {
    4.0 * 2.0 * std::f64::consts::PI / ts.duration()
}

/// Default noise variance for noisy records: median of the Hann periodogram
/// over the upper quarter of the positive frequencies.
pub fn default_noise_variance(ts: &TimeSeries) -> Result<f64> {
    let pg = hann_periodogram(ts)?;
    let freqs = dft_frequencies(ts);
    let fmax = freqs.iter().fold(0.0f64, |m, f| m.max(*f));
    let mut upper: Vec<f64> = freqs
        .iter()
        .zip(&pg)
        .filter(|(f, _)| **f >= 0.75 * fmax)
        .map(|(_, p)| *p)
        .collect();
    ensure(!upper.is_empty(), || "series too short to estimate noise".into())?;
    upper.sort_by(|a, b| a.total_cmp(b));
    let m = upper.len();
    Ok(if m % 2 == 1 {
        upper[m / 2]
    } else {
        0.5 * (upper[m / 2 - 1] + upper[m / 2])
    })
}

/// `|X(ω_j)|²` with a unit-energy Hann taper, on the signed DFT grid.
pub fn hann_periodogram(ts: &TimeSeries) -> Result<Vec<f64>> {
    let spec = tapered_dft(ts, &hann(ts.len())?)?;
    Ok(spec.values.iter().map(|v| v.norm_sqr()).collect())
}

/// Diagnostics of a MAP fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations: usize,
    pub converged: bool,
    pub initial_objective: f64,
    pub final_objective: f64,
    pub initial_grad_norm: f64,
    pub final_grad_norm: f64,
    /// Penalized objective after each accepted step (first entry: init).
    pub objective_trace: Vec<f64>,
}

/// Initial log-weights `a_j = ln(max(P_j, ε) / G_j)`, `G_j = Σ_m K_SE(ξ_j, ξ_m)`,
/// `ε = 1e-12·max(max P, λ)`.
pub fn initial_log_weights(centers: &[f64], mean_periodogram: &[f64], se_scale: f64, lambda: f64) -> Result<Vec<f64>> {
    let pmax = mean_periodogram.iter().fold(0.0f64, |m, p| m.max(*p));
    let eps = 1e-12 * pmax.max(lambda);
    if !(eps > 0.0) {
        return Err(Error::Degenerate(
            "all periodogram values are zero and the noise variance is zero".into(),
        ));
    }
    let overlap = se_operator(centers, se_scale).apply(&vec![1.0; centers.len()]);
    Ok(mean_periodogram
        .iter()
        .zip(overlap)
        .map(|(p, g)| (p.max(eps) / g).ln())
        .collect())
}

/// MAP spectral density from one or more realizations on a shared grid.
pub fn fit_map(trials: &[TimeSeries], se_scale: f64, lambda: f64, opts: &FitOptions) -> Result<SpectralModel> {
    fit_map_with_report(trials, se_scale, lambda, opts).map(|(m, _)| m)
}

pub fn fit_map_with_report(
    trials: &[TimeSeries],
    se_scale: f64,
    lambda: f64,
    opts: &FitOptions,
) -> Result<(SpectralModel, FitReport)> {
    opts.validate()?;
    let first = trials
        .first()
        .ok_or_else(|| Error::InvalidArgument("at least one trial is required".into()))?;
    for (i, t) in trials.iter().enumerate().skip(1) {
        if !first.same_grid(t) {
            return Err(Error::GridMismatch { trial: i });
        }
    }
    ensure(lambda.is_finite() && lambda >= 0.0, || {
        format!("noise variance must be >= 0, got {lambda}")
    })?;

    let centers = dft_frequencies(first);
    let mut summed = vec![0.0; centers.len()];
    for t in trials {
        for (s, p) in summed.iter_mut().zip(hann_periodogram(t)?) {
            *s += p;
        }
    }
    let realizations = trials.len() as f64;
    let mean: Vec<f64> = summed.iter().map(|s| s / realizations).collect();
    let init = initial_log_weights(&centers, &mean, se_scale, lambda)?;
    let mut model = SpectralModel::new(centers, init, se_scale, lambda)?;
    let data = Data {
        summed: &summed,
        realizations,
    };
    let report = ascend(&mut model, &data, opts)?;
    model.symmetrize();
    Ok((model, report))
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn ascend(model: &mut SpectralModel, data: &Data, opts: &FitOptions) -> Result<FitReport> {
    let ev = evaluator(model, opts.prior_weight);
    let mut a = model.log_weights.clone();
    let mut st = ev.state(&a);
    let mut obj = ev.objective(&st, data);
    if !obj.is_finite() {
        return Err(Error::Divergence { iteration: 0 });
    }
    let mut grad = ev.gradient(&st, data)?;
    let g0 = sup_norm(&grad);
    let mut report = FitReport {
        iterations: 0,
        converged: g0 == 0.0,
        initial_objective: obj,
        final_objective: obj,
        initial_grad_norm: g0,
        final_grad_norm: g0,
        objective_trace: vec![obj],
    };
    let threshold = opts.grad_tol * g0;
    let mut step = opts.step_size;

    for iter in 1..=opts.max_iters {
        if report.converged {
            break;
        }
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { iteration: iter });
        }
        let mut accepted = None;
        for _ in 0..=30 {
            let cand: Vec<f64> = a.iter().zip(&grad).map(|(x, g)| x + step * g).collect();
            let cst = ev.state(&cand);
            let cobj = ev.objective(&cst, data);
            if cobj.is_finite() && cobj >= obj {
                accepted = Some((cand, cst, cobj));
                break;
            }
            step *= 0.5;
        }
        let Some((cand, cst, cobj)) = accepted else {
            // no ascent direction left at working precision
            break;
        };
        a = cand;
        st = cst;
        obj = cobj;
        grad = ev.gradient(&st, data)?;
        report.iterations = iter;
        report.objective_trace.push(obj);
        report.final_grad_norm = sup_norm(&grad);
        if !report.final_grad_norm.is_finite() {
            return Err(Error::Divergence { iteration: iter });
        }
        report.converged = report.final_grad_norm < threshold;
        step *= 2.0;
    }
    report.final_objective = obj;
    model.log_weights = a;
    Ok(report)
}
