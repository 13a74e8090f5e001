//! Closed-form integral transforms of a GP posterior mean.
//!
//! Because `m(t) = Σ_k w_k K(t, t_k)` is linear in the kernel, any linear
//! integral transform of `m` is `Σ_k w_k ∫ A(s,t) K(t, t_k) dt`. For a
//! stationary kernel the Fourier transform factorizes into the kernel's own
//! transform times a phase sum over the weights. All transforms use the
//! analog convention `(1/2π) ∫ e^{-iωt} · dt`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::convention::GAUSSIAN_FT;
use crate::dft::{phase_sum, phase_sum_at, ComplexSpectrum, Convention};
use crate::error::{ensure, Error, Result};
use crate::gpcore::{GPPosterior, KernelSpec};
use crate::signal::TimeSeries;

/// `Σ_k w_k e^{-iω t_k}`, using the phase recurrence on uniform grids.
pub fn weight_phase_sum(post: &GPPosterior, omega: f64) -> Complex64 {
    let t = &post.times;
    let n = t.len();
    if n >= 2 {
        let dt = (t[n - 1] - t[0]) / (n - 1) as f64;
        let uniform = t.windows(2).all(|w| ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs());
        if uniform && dt > 0.0 {
            return phase_sum(&post.weights, t[0], dt, omega);
        }
    }
    phase_sum_at(&post.weights, t, omega)
}

#[inline]
fn gauss(x: f64, scale: f64) -> f64 {
    let d = x / scale;
    (-0.5 * d * d).exp()
}

/// Analog Fourier transform of `K(τ)` for the stationary, real variants.
///
/// * learned: `A/√(2π) · Σ_j e^{h_j} ½[G(ω-ξ_j) + G(ω+ξ_j)]`, `G(x) = e^{-x²/(2σ²)}`
/// * SE: `β ν/√(2π) · e^{-ν²ω²/2}`
pub fn kernel_fourier(spec: &KernelSpec, omega: f64) -> Result<f64> {
    match spec {
        KernelSpec::Bgf { model, amplitude } => {
            let sigma = model.se_scale;
            let s: f64 = model
                .centers
                .iter()
                .zip(&model.log_weights)
                .map(|(xi, h)| {
                    let e = h.exp();
                    0.5 * e * (gauss(omega - xi, sigma) + gauss(omega + xi, sigma))
                })
                .sum();
            Ok(amplitude * GAUSSIAN_FT * s)
        }
        KernelSpec::Se { scale, amplitude } => {
            Ok(amplitude * scale * GAUSSIAN_FT * (-0.5 * (scale * omega).powi(2)).exp())
        }
        other => Err(Error::InvalidArgument(format!(
            "`{}` kernel is not handled by the stationary Fourier shortcut",
            other.name()
        ))),
    }
}

/// Fourier transform of the posterior mean under the learned kernel.
///
/// Evaluated as (Gaussian bumps over centers) × (phase sum over samples):
///
/// ```text
/// F[m](ω) = A/√(2π) · Σ_j e^{h_j} ½[G(ω-ξ_j) + G(ω+ξ_j)] · Σ_k w_k e^{-iωt_k}
/// ```
///
/// which for a ±ξ-symmetric model equals `A/√(2π) Σ_{k,j} w_k e^{h_j}
/// e^{-(ω-ξ_j)²/(2σ²) - iωt_k}`.
pub fn bgf_fourier(post: &GPPosterior, omega_grid: &[f64]) -> Result<ComplexSpectrum> {
    let KernelSpec::Bgf { model, amplitude } = &post.kernel else {
        return Err(Error::InvalidArgument(format!(
            "bgf_fourier needs the learned kernel, got `{}`",
            post.kernel.name()
        )));
    };
    let sigma = model.se_scale;
    let weights = model.weights();
    // bumps below this offset underflow to zero
    let reach = 38.7 * sigma;
    let constant = amplitude * GAUSSIAN_FT;
    let values = omega_grid
        .par_iter()
        .map(|&om| {
            let mut bumps = 0.0;
            for (xi, e) in model.centers.iter().zip(&weights) {
                if (om - xi).abs() < reach {
                    bumps += 0.5 * e * gauss(om - xi, sigma);
                }
                if (om + xi).abs() < reach {
                    bumps += 0.5 * e * gauss(om + xi, sigma);
                }
            }
            if bumps == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            weight_phase_sum(post, om) * (constant * bumps)
        })
        .collect();
    ComplexSpectrum::new(omega_grid.to_vec(), values, Convention::Analog)
}

/// Fourier shortcut for any stationary real kernel:
/// `F[K](ω) · Σ_k w_k e^{-iωt_k}`.
pub fn stationary_fourier(post: &GPPosterior, omega: f64) -> Result<Complex64> {
    let kf = kernel_fourier(&post.kernel, omega)?;
    Ok(weight_phase_sum(post, omega) * kf)
}

/// Fourier transform of the posterior mean under the (real part of the)
/// relaxed band-limited kernel:
///
/// ```text
/// F[m](ξ) = β ν / (N² √(2π)) · Σ_k ½[e^{-ν²(ξ-ω_k)²/2} + e^{-ν²(ξ+ω_k)²/2}] · Σ_j w_j e^{-iξt_j}
/// ```
pub fn rbl_fourier(post: &GPPosterior, omega_grid: &[f64]) -> Result<ComplexSpectrum> {
    let KernelSpec::Rbl {
        period,
        n,
        amplitude,
        scale,
    } = &post.kernel
    else {
        return Err(Error::InvalidArgument(format!(
            "rbl_fourier needs the rbl kernel, got `{}`",
            post.kernel.name()
        )));
    };
    let nn = *n as f64;
    let freqs: Vec<f64> = crate::dft::dft_indices(*n)
        .map(|k| 2.0 * PI * k as f64 / period)
        .collect();
    let constant = amplitude * scale * GAUSSIAN_FT / (nn * nn);
    let inv = 1.0 / scale;
    let values = omega_grid
        .par_iter()
        .map(|&xi| {
            let comb: f64 = freqs
                .iter()
                .map(|w| 0.5 * (gauss(xi - w, inv) + gauss(xi + w, inv)))
                .sum();
            weight_phase_sum(post, xi) * (constant * comb)
        })
        .collect();
    ComplexSpectrum::new(omega_grid.to_vec(), values, Convention::Analog)
}

/// Fourier transform of the posterior mean under the (real part of the)
/// band-limited kernel: a finite list of `(frequency, mass)` impulses.
///
/// The mass at `ω` multiplies a Dirac delta `δ(ξ - ω)`.
pub fn bl_fourier_masses(post: &GPPosterior) -> Result<Vec<(f64, Complex64)>> {
    let KernelSpec::Bl { period, n, amplitude } = &post.kernel else {
        return Err(Error::InvalidArgument(format!(
            "bl_fourier_masses needs the bl kernel, got `{}`",
            post.kernel.name()
        )));
    };
    let nn = *n as f64;
    let mut freqs: Vec<f64> = crate::dft::dft_indices(*n)
        .flat_map(|k| {
            let w = 2.0 * PI * k as f64 / period;
            [w, -w]
        })
        .collect();
    freqs.sort_by(|a, b| a.total_cmp(b));
    freqs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    let index: Vec<f64> = crate::dft::dft_indices(*n)
        .map(|k| 2.0 * PI * k as f64 / period)
        .collect();
    // Re K = β/(2N²) Σ_k (e^{iω_kτ} + e^{-iω_kτ}): half a unit at ±ω_k per k
    Ok(freqs
        .into_iter()
        .map(|w| {
            let count = index
                .iter()
                .filter(|x| (**x - w).abs() <= 1e-12 * w.abs().max(1.0))
                .count()
                + index
                    .iter()
                    .filter(|x| (**x + w).abs() <= 1e-12 * w.abs().max(1.0))
                    .count();
            let mass = weight_phase_sum(post, w) * (amplitude / (nn * nn) * 0.5 * count as f64);
            (w, mass)
        })
        .collect())
}

type TransformFn = dyn Fn(f64, f64) -> Complex64 + Send + Sync;

/// `(s, t_k) ↦ ∫ A(s,t) K(t, t_k) dt` for a specific kernel.
#[derive(Clone)]
pub struct KernelTransform {
    name: String,
    kernel: &'static str,
    f: Arc<TransformFn>,
}

impl fmt::Debug for KernelTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KernelTransform")
            .field("name", &self.name)
            .field("kernel", &self.kernel)
            .finish()
    }
}

impl KernelTransform {
    pub fn new(
        name: impl Into<String>,
        kernel: &'static str,
        f: impl Fn(f64, f64) -> Complex64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            kernel,
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Name of the kernel variant this transform was derived for.
    pub fn kernel(&self) -> &str {
        self.kernel
    }

    pub fn matches(&self, spec: &KernelSpec) -> bool {
        self.kernel == spec.name()
    }

    pub fn eval(&self, s: f64, t_k: f64) -> Complex64 {
        (self.f)(s, t_k)
    }

    /// Identically zero transform.
    pub fn zero(kernel: &'static str) -> Self {
        Self::new("zero", kernel, |_, _| Complex64::new(0.0, 0.0))
    }

    /// Fourier transform of `K(·, t_k)`: `F[K](ω) e^{-iωt_k}` for the
    /// stationary real kernels, the rBL product form otherwise.
    pub fn fourier(spec: &KernelSpec) -> Result<Self> {
        match spec {
            KernelSpec::Bgf { .. } | KernelSpec::Se { .. } => {
                let spec = spec.clone();
                Ok(Self::new("fourier", spec_name(&spec), move |om, tk| {
                    let kf = kernel_fourier(&spec, om).expect("stationary variant");
                    Complex64::from_polar(kf, -om * tk)
                }))
            }
            KernelSpec::Rbl { .. } => Self::rbl_fourier(spec),
            KernelSpec::Bl { .. } => Err(Error::InvalidArgument(
                "the band-limited kernel has a distribution-valued transform; use bl_fourier_masses".into(),
            )),
        }
    }

    pub fn rbl_fourier(spec: &KernelSpec) -> Result<Self> {
        let KernelSpec::Rbl {
            period,
            n,
            amplitude,
            scale,
        } = spec.clone()
        else {
            return Err(Error::InvalidArgument("rbl-fourier needs the rbl kernel".into()));
        };
        let nn = n as f64;
        let freqs: Vec<f64> = crate::dft::dft_indices(n)
            .map(|k| 2.0 * PI * k as f64 / period)
            .collect();
        let constant = amplitude * scale * GAUSSIAN_FT / (nn * nn);
        Ok(Self::new("rbl-fourier", "rbl", move |xi, tj| {
            let comb: f64 = freqs
                .iter()
                .map(|w| 0.5 * (gauss(xi - w, 1.0 / scale) + gauss(xi + w, 1.0 / scale)))
                .sum();
            Complex64::from_polar(constant * comb, -xi * tj)
        }))
    }

    /// Definite integral `∫_a^b K(t, t_k) dt`, ignoring `s`.
    ///
    /// Closed form (error function) for the SE kernel; composite
    /// Gauss-Legendre on the kernel for the other variants.
    pub fn quadrature(spec: &KernelSpec, a: f64, b: f64) -> Result<Self> {
        ensure(a < b, || format!("integration bounds need a < b, got [{a}, {b}]"))?;
        match spec.clone() {
            KernelSpec::Se { scale, amplitude } => Ok(Self::new("quadrature", "se", move |_, tk| {
                Complex64::new(se_integral(amplitude, scale, a - tk, b - tk), 0.0)
            })),
            other => {
                let ev = other.evaluator();
                let h = quadrature_panel(&other, b - a);
                let panels = ((b - a) / h).ceil().max(1.0) as usize;
                let rule = gauss_legendre(16);
                Ok(Self::new("quadrature", spec_name(&other), move |_, tk| {
                    let width = (b - a) / panels as f64;
                    let mut acc = 0.0;
                    for p in 0..panels {
                        let lo = a + p as f64 * width;
                        for (x, w) in &rule {
                            let t = lo + 0.5 * width * (x + 1.0);
                            acc += 0.5 * width * w * ev.eval(t, tk).re;
                        }
                    }
                    Complex64::new(acc, 0.0)
                }))
            }
        }
    }
}

fn spec_name(spec: &KernelSpec) -> &'static str {
    spec.name()
}

/// Panel width resolving the fastest oscillation and the envelope of `K`.
fn quadrature_panel(spec: &KernelSpec, span: f64) -> f64 {
    let (fastest, envelope) = match spec {
        KernelSpec::Bgf { model, .. } => (
            model.centers.iter().fold(0.0f64, |m, c| m.max(c.abs())),
            1.0 / model.se_scale,
        ),
        KernelSpec::Se { scale, .. } => (0.0, *scale),
        KernelSpec::Bl { period, n, .. } => (PI * *n as f64 / period, f64::INFINITY),
        KernelSpec::Rbl { period, n, scale, .. } => (PI * *n as f64 / period, *scale),
    };
    let osc = if fastest > 0.0 { PI / fastest } else { f64::INFINITY };
    osc.min(envelope).min(span)
}

/// `∫_{lo}^{hi} β e^{-u²/(2ν²)} du`.
fn se_integral(amplitude: f64, scale: f64, lo: f64, hi: f64) -> f64 {
    let c = scale * std::f64::consts::SQRT_2;
    amplitude * scale * (PI / 2.0).sqrt() * (libm::erf(hi / c) - libm::erf(lo / c))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` (Newton on `P_n`).
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `out[m] = Σ_k w_k · kt(s_m, t_k)`.
pub fn integral_transform(post: &GPPosterior, kt: &KernelTransform, s_grid: &[f64]) -> Vec<Complex64> {
    s_grid
        .par_iter()
        .map(|&s| {
            post.times
                .iter()
                .zip(&post.weights)
                .map(|(tk, w)| kt.eval(s, *tk) * *w)
                .sum()
        })
        .collect()
}

/// GP quadrature `∫_a^b m(t) dt` for the SE kernel, in closed form.
pub fn gp_quadrature(post: &GPPosterior, a: f64, b: f64) -> Result<f64> {
    ensure(a < b, || format!("integration bounds need a < b, got [{a}, {b}]"))?;
    let KernelSpec::Se { scale, amplitude } = post.kernel else {
        return Err(Error::InvalidArgument(format!(
            "gp_quadrature needs the SE kernel, got `{}`",
            post.kernel.name()
        )));
    };
    Ok(post
        .times
        .iter()
        .zip(&post.weights)
        .map(|(tk, w)| w * se_integral(amplitude, scale, a - tk, b - tk))
        .sum())
}

/// Output grid eight times denser than the DFT grid, spanning ±1.2× Nyquist.
pub fn default_omega_grid(ts: &TimeSeries) -> Vec<f64> {
    let step = 2.0 * PI / ts.duration() / 8.0;
    let limit = 1.2 * PI / ts.dt();
    let m = (limit / step).floor() as i64;
    (-m..=m).map(|i| i as f64 * step).collect()
}
