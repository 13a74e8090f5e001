//! Covariance functions, Gram matrices and GP regression weights.
//!
//! The posterior mean of GP regression with covariance `K` and noise
//! variance `λ` is `m(t) = Σ_k w_k K(t, t_k)` with `w = (K + λI)^{-1} y`.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::convention::periodogram_to_covariance;
use crate::dft::dft_indices;
use crate::error::{ensure, Error, Result};
use crate::signal::TimeSeries;
use crate::speclearn::SpectralModel;

/// Largest training set solved directly.
pub const MAX_DIRECT_SOLVE: usize = 6000;

/// Stationary covariance variants. All of them depend on `t - t'` only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
pub enum KernelSpec {
    /// Inverse transform of a learned spectral density:
    /// `amplitude · σ e^{-σ²τ²/2} Σ_j e^{h_j} cos(ξ_j τ)`.
    Bgf { model: SpectralModel, amplitude: f64 },
    /// `amplitude · exp(-τ²/(2·scale²))`.
    Se { scale: f64, amplitude: f64 },
    /// Band-limited periodic kernel `β Σ_k Φ_k(t) Φ_k*(t')`,
    /// `Φ_k(t) = e^{iω_k t}/N`, `ω_k = 2πk/T`.
    Bl { period: f64, n: usize, amplitude: f64 },
    /// Band-limited kernel damped by `exp(-τ²/(2·scale²))`.
    Rbl {
        period: f64,
        n: usize,
        amplitude: f64,
        scale: f64,
    },
}

impl KernelSpec {
    /// Learned kernel with unit amplitude.
    pub fn bgf(model: SpectralModel) -> Self {
        KernelSpec::Bgf { model, amplitude: 1.0 }
    }

    /// Learned kernel scaled so that the periodogram-unit density of `model`
    /// becomes a covariance in signal units for samples spaced `dt` apart.
    pub fn bgf_for_step(model: SpectralModel, dt: f64) -> Self {
        KernelSpec::Bgf {
            model,
            amplitude: periodogram_to_covariance(dt),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Bgf { .. } => "bgf",
            KernelSpec::Se { .. } => "se",
            KernelSpec::Bl { .. } => "bl",
            KernelSpec::Rbl { .. } => "rbl",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64, what: &str| ensure(v.is_finite() && v > 0.0, || format!("{what} must be > 0, got {v}"));
        match self {
            KernelSpec::Bgf { model, amplitude } => {
                model.validate()?;
                pos(*amplitude, "amplitude")
            }
            KernelSpec::Se { scale, amplitude } => {
                pos(*scale, "scale")?;
                pos(*amplitude, "amplitude")
            }
            KernelSpec::Bl { period, n, amplitude } => {
                pos(*period, "period")?;
                pos(*amplitude, "amplitude")?;
                ensure(*n >= 1, || "band-limited kernel needs n >= 1".into())
            }
            KernelSpec::Rbl {
                period,
                n,
                amplitude,
                scale,
            } => {
                pos(*period, "period")?;
                pos(*amplitude, "amplitude")?;
                pos(*scale, "scale")?;
                ensure(*n >= 1, || "band-limited kernel needs n >= 1".into())
            }
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self, KernelSpec::Bgf { .. } | KernelSpec::Se { .. })
    }

    /// Precomputes whatever the variant needs for repeated evaluation.
    pub fn evaluator(&self) -> KernelEval {
        match self {
            KernelSpec::Bgf { model, amplitude } => {
                let c: Vec<f64> = model.weights();
                let uniform_step = uniform_step(&model.centers);
                KernelEval::Bgf {
                    prefactor: amplitude * model.se_scale,
                    sigma: model.se_scale,
                    weights: c,
                    centers: model.centers.clone(),
                    uniform_step,
                }
            }
            KernelSpec::Se { scale, amplitude } => KernelEval::Se {
                scale: *scale,
                amplitude: *amplitude,
            },
            KernelSpec::Bl { period, n, amplitude } => KernelEval::Bl {
                freqs: bl_freqs(*period, *n),
                factor: amplitude / (*n as f64 * *n as f64),
                damping: None,
            },
            KernelSpec::Rbl {
                period,
                n,
                amplitude,
                scale,
            } => KernelEval::Bl {
                freqs: bl_freqs(*period, *n),
                factor: amplitude / (*n as f64 * *n as f64),
                damping: Some(*scale),
            },
        }
    }
}

fn bl_freqs(period: f64, n: usize) -> Vec<f64> {
    dft_indices(n)
        .map(|k| 2.0 * std::f64::consts::PI * k as f64 / period)
        .collect()
}

fn uniform_step(x: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let step = x[1] - x[0];
    let ok = step > 0.0 && x.windows(2).all(|w| ((w[1] - w[0]) - step).abs() <= 1e-9 * step);
    ok.then_some(step)
}

/// Ready-to-evaluate form of a [`KernelSpec`].
#[derive(Debug, Clone)]
pub enum KernelEval {
    Bgf {
        prefactor: f64,
        sigma: f64,
        weights: Vec<f64>,
        centers: Vec<f64>,
        uniform_step: Option<f64>,
    },
    Se {
        scale: f64,
        amplitude: f64,
    },
    Bl {
        freqs: Vec<f64>,
        factor: f64,
        damping: Option<f64>,
    },
}

impl KernelEval {
    /// `K(t, t')` as a function of `τ = t' - t`.
    pub fn lag(&self, tau: f64) -> Complex64 {
        match self {
            KernelEval::Bgf {
                prefactor,
                sigma,
                weights,
                centers,
                uniform_step,
            } => {
                let env = (-0.5 * sigma * sigma * tau * tau).exp();
                if env == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                let sum = match uniform_step {
                    Some(step) => cosine_sum_uniform(weights, centers[0], *step, tau),
                    None => weights.iter().zip(centers).map(|(w, c)| w * (c * tau).cos()).sum(),
                };
                Complex64::new(prefactor * env * sum, 0.0)
            }
            KernelEval::Se { scale, amplitude } => {
                let d = tau / scale;
                Complex64::new(amplitude * (-0.5 * d * d).exp(), 0.0)
            }
            KernelEval::Bl { freqs, factor, damping } => {
                // Σ_k Φ_k(t) Φ_k*(t') = N^{-2} Σ_k e^{iω_k (t - t')} = N^{-2} Σ_k e^{-iω_k τ}
                let s: Complex64 = freqs.iter().map(|w| Complex64::from_polar(1.0, -w * tau)).sum();
                let damp = damping.map_or(1.0, |nu| (-0.5 * (tau / nu).powi(2)).exp());
                s * (factor * damp)
            }
        }
    }

    pub fn eval(&self, t: f64, t_prime: f64) -> Complex64 {
        self.lag(t_prime - t)
    }
}

/// `Σ_j c_j cos(ξ_j τ)` for `ξ_j = ξ_0 + j·step`, by phase rotation.
fn cosine_sum_uniform(weights: &[f64], xi0: f64, step: f64, tau: f64) -> f64 {
    let rot = Complex64::from_polar(1.0, step * tau);
    let mut phase = Complex64::new(0.0, 0.0);
    let mut acc = 0.0;
    for (j, c) in weights.iter().enumerate() {
        if j % 64 == 0 {
            phase = Complex64::from_polar(1.0, (xi0 + j as f64 * step) * tau);
        } else {
            phase *= rot;
        }
        acc += c * phase.re;
    }
    acc
}

pub fn kernel_eval(spec: &KernelSpec, t: f64, t_prime: f64) -> Complex64 {
    spec.evaluator().eval(t, t_prime)
}

/// `K_{jk} = K(t_j, t_k)`; Hermitian for the complex variants.
pub fn gram_matrix(spec: &KernelSpec, times: &[f64]) -> DMatrix<Complex64> {
    let ev = spec.evaluator();
    let n = times.len();
    match uniform_step(times) {
        Some(dt) => {
            // stationary: K(t_j, t_k) depends on (k - j)·dt only
            let lags: Vec<Complex64> = (0..n).map(|m| ev.lag(m as f64 * dt)).collect();
            DMatrix::from_fn(n, n, |j, k| if k >= j { lags[k - j] } else { lags[j - k].conj() })
        }
        None => DMatrix::from_fn(n, n, |j, k| ev.eval(times[j], times[k])),
    }
}

/// Real part of the Gram matrix, used for regression on real data.
pub fn gram_matrix_real(spec: &KernelSpec, times: &[f64]) -> DMatrix<f64> {
    gram_matrix(spec, times).map(|z| z.re)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GPPosterior {
    pub times: Vec<f64>,
    pub weights: Vec<f64>,
    pub kernel: KernelSpec,
    pub lambda: f64,
    /// Extra diagonal loading that was needed for the factorization.
    pub jitter: f64,
}

impl GPPosterior {
    pub fn new(times: Vec<f64>, weights: Vec<f64>, kernel: KernelSpec, lambda: f64) -> Result<Self> {
        ensure(times.len() == weights.len(), || {
            format!("{} times but {} weights", times.len(), weights.len())
        })?;
        kernel.validate()?;
        Ok(Self {
            times,
            weights,
            kernel,
            lambda,
            jitter: 0.0,
        })
    }
}

/// Solves `(K + λI) w = y` by Cholesky with escalating diagonal jitter
/// (`1e-12·tr(K)/N`, ×10 per attempt, up to `1e-6·tr(K)/N`). Jitter is tried
/// first when `λ = 0`, and otherwise only if the plain factorization fails.
pub fn fit_gp(ts: &TimeSeries, spec: &KernelSpec, lambda: f64) -> Result<GPPosterior> {
    spec.validate()?;
    ensure(lambda.is_finite() && lambda >= 0.0, || {
        format!("noise variance must be >= 0, got {lambda}")
    })?;
    let n = ts.len();
    if n > MAX_DIRECT_SOLVE {
        return Err(Error::TooLarge {
            n,
            limit: MAX_DIRECT_SOLVE,
        });
    }
    let times = ts.times();
    let k = gram_matrix_real(spec, &times);
    let (weights, jitter) = solve_jittered(&k, ts.values(), lambda)?;
    Ok(GPPosterior {
        times,
        weights,
        kernel: spec.clone(),
        lambda,
        jitter,
    })
}

pub(crate) fn solve_jittered(k: &DMatrix<f64>, y: &[f64], lambda: f64) -> Result<(Vec<f64>, f64)> {
    let n = k.nrows();
    let mean_diag = k.trace() / n as f64;
    let mut jitters = Vec::new();
    if lambda > 0.0 {
        jitters.push(0.0);
    }
    let mut j = 1e-12 * mean_diag;
    while j <= 1e-6 * mean_diag * (1.0 + 1e-9) {
        jitters.push(j);
        j *= 10.0;
    }
    let rhs = DVector::from_column_slice(y);
    let mut last = 0.0;
    for jitter in jitters {
        last = jitter;
        let mut a = k.clone();
        for i in 0..n {
            a[(i, i)] += lambda + jitter;
        }
        let Some(chol) = Cholesky::new(a.clone()) else {
            continue;
        };
        let mut w = chol.solve(&rhs);
        // two rounds of iterative refinement
        for _ in 0..2 {
            let r = &rhs - &a * &w;
            w += chol.solve(&r);
        }
        if w.iter().all(|v| v.is_finite()) {
            return Ok((w.as_slice().to_vec(), jitter));
        }
    }
    Err(Error::Conditioning { jitter: last })
}

/// `‖(K + (λ + jitter) I) w - y‖ / ‖y‖` for a fitted posterior.
pub fn solve_residual(post: &GPPosterior, y: &[f64]) -> f64 {
    let k = gram_matrix_real(&post.kernel, &post.times);
    let w = DVector::from_column_slice(&post.weights);
    let mut r = &k * &w;
    for i in 0..r.len() {
        r[i] += (post.lambda + post.jitter) * w[i] - y[i];
    }
    let ny = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    r.norm() / ny.max(f64::MIN_POSITIVE)
}

/// `m(t) = Σ_k w_k K(t, t_k)` (real part for the complex variants).
pub fn posterior_mean(post: &GPPosterior, t: f64) -> f64 {
    posterior_mean_with(&post.kernel.evaluator(), post, t)
}

pub fn posterior_mean_many(post: &GPPosterior, ts: &[f64]) -> Vec<f64> {
    let ev = post.kernel.evaluator();
    if let Some(m) = posterior_mean_fft(&ev, post, ts) {
        return m;
    }
    ts.iter().map(|t| posterior_mean_with(&ev, post, *t)).collect()
}

/// Learned kernel whose centers are the DFT grid of uniformly spaced sample
/// times: with `u = t - t_0`, the cosine sums at the lags `u - k·δt` are
/// `Re[e^{-iξ_0 kδt} FFT_k(c_j e^{iξ_j u})]`, one FFT per output time.
fn posterior_mean_fft(ev: &KernelEval, post: &GPPosterior, ts: &[f64]) -> Option<Vec<f64>> {
    let KernelEval::Bgf {
        prefactor,
        sigma,
        weights,
        centers,
        uniform_step: Some(step),
    } = ev
    else {
        return None;
    };
    let n = post.times.len();
    let dt = uniform_step(&post.times)?;
    if centers.len() != n || (step * dt * n as f64 - 2.0 * std::f64::consts::PI).abs() > 1e-9 {
        return None;
    }
    let fft = FftPlanner::new().plan_fft_forward(n);
    let xi0 = centers[0];
    let t0 = post.times[0];
    let shift: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(1.0, -xi0 * k as f64 * dt))
        .collect();
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let out = ts
        .iter()
        .map(|t| {
            let u = t - t0;
            for (b, (c, xi)) in buf.iter_mut().zip(weights.iter().zip(centers)) {
                *b = Complex64::from_polar(*c, xi * u);
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            (0..n)
                .map(|k| {
                    let tau = u - k as f64 * dt;
                    let env = (-0.5 * sigma * sigma * tau * tau).exp();
                    post.weights[k] * env * (shift[k] * buf[k]).re
                })
                .sum::<f64>()
                * prefactor
        })
        .collect();
    Some(out)
}

fn posterior_mean_with(ev: &KernelEval, post: &GPPosterior, t: f64) -> f64 {
    post.times
        .iter()
        .zip(&post.weights)
        .filter(|(_, w)| **w != 0.0)
        .map(|(tk, w)| w * ev.eval(t, *tk).re)
        .sum()
}
