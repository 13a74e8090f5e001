//! Tapered DFT coefficients, periodograms and multitaper spectra.
//!
//! Coefficients follow the discrete convention of [`crate::convention`]:
//! `X(ω_j) = Σ_k w[k] y[k] e^{-iω_j t_k}` on the signed grid `ω_j = 2πj/T`.
//! The brute-force sum is the reference; [`tapered_dft`] uses an FFT and is
//! checked against it.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::signal::TimeSeries;
use crate::taper::TaperSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// Unnormalized tapered sum over samples.
    Discrete,
    /// `(1/2π) ∫ e^{-iωt} f(t) dt`.
    Analog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexSpectrum {
    pub freqs: Vec<f64>,
    pub values: Vec<Complex64>,
    pub convention: Convention,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerSpectrum {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl ComplexSpectrum {
    pub fn new(freqs: Vec<f64>, values: Vec<Complex64>, convention: Convention) -> Result<Self> {
        ensure(freqs.len() == values.len(), || {
            format!("{} frequencies but {} values", freqs.len(), values.len())
        })?;
        ensure(freqs.windows(2).all(|w| w[1] > w[0]), || {
            "frequency grid must be strictly increasing".into()
        })?;
        Ok(Self {
            freqs,
            values,
            convention,
        })
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn power(&self) -> PowerSpectrum {
        PowerSpectrum {
            freqs: self.freqs.clone(),
            power: self.values.iter().map(|v| v.norm_sqr()).collect(),
        }
    }

    /// `omega,real,imag` rows; with `hz` the first column is `ω/2π`.
    pub fn write_csv(&self, path: &Path, hz: bool) -> Result<()> {
        let mut out = Vec::new();
        write_units(&mut out, hz);
        writeln!(out, "{},real,imag", if hz { "freq" } else { "omega" }).unwrap();
        for (f, v) in self.freqs.iter().zip(&self.values) {
            writeln!(out, "{},{},{}", scale_freq(*f, hz), v.re, v.im).unwrap();
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

impl PowerSpectrum {
    pub fn new(freqs: Vec<f64>, power: Vec<f64>) -> Result<Self> {
        ensure(freqs.len() == power.len(), || {
            format!("{} frequencies but {} values", freqs.len(), power.len())
        })?;
        ensure(power.iter().all(|p| *p >= 0.0), || "power must be non-negative".into())?;
        Ok(Self { freqs, power })
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.power.iter().sum()
    }

    pub fn write_csv(&self, path: &Path, hz: bool) -> Result<()> {
        let mut out = Vec::new();
        write_units(&mut out, hz);
        writeln!(out, "{},power", if hz { "freq" } else { "omega" }).unwrap();
        for (f, p) in self.freqs.iter().zip(&self.power) {
            writeln!(out, "{},{}", scale_freq(*f, hz), p).unwrap();
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn write_units(out: &mut Vec<u8>, hz: bool) {
    let units = if hz { "cycles/time" } else { "rad/time" };
    writeln!(out, "# units={units}").unwrap();
}

fn scale_freq(f: f64, hz: bool) -> f64 {
    if hz {
        f / (2.0 * PI)
    } else {
        f
    }
}

/// Signed integer indices `-floor(N/2) ..= floor((N-1)/2)` of the DFT grid.
pub fn dft_indices(n: usize) -> impl Iterator<Item = i64> {
    let lo = -((n / 2) as i64);
    let hi = ((n - 1) / 2) as i64;
    lo..=hi
}

/// `ω_j = 2πj/T`, `T = N·δt`, over the full signed index range.
pub fn dft_frequencies(ts: &TimeSeries) -> Vec<f64> {
    grid_frequencies(ts.len(), ts.dt())
}

pub fn grid_frequencies(n: usize, dt: f64) -> Vec<f64> {
    let t = n as f64 * dt;
    dft_indices(n).map(|j| 2.0 * PI * j as f64 / t).collect()
}

/// `Σ_k c_k e^{-iω t_k}` on the uniform grid `t_k = t0 + k·dt`.
///
/// Uses a phase recurrence re-anchored every 128 samples.
pub fn phase_sum(coeffs: &[f64], t0: f64, dt: f64, omega: f64) -> Complex64 {
    let step = Complex64::from_polar(1.0, -omega * dt);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut phase = Complex64::new(0.0, 0.0);
    for (k, c) in coeffs.iter().enumerate() {
        if k % 128 == 0 {
            phase = Complex64::from_polar(1.0, -omega * (t0 + k as f64 * dt));
        } else {
            phase *= step;
        }
        acc += phase * *c;
    }
    acc
}

/// `Σ_k c_k e^{-iω t_k}` for arbitrary sample times.
pub fn phase_sum_at(coeffs: &[f64], times: &[f64], omega: f64) -> Complex64 {
    coeffs
        .iter()
        .zip(times)
        .map(|(c, t)| Complex64::from_polar(*c, -omega * t))
        .sum()
}

fn check_single(ts: &TimeSeries, taper: &TaperSet) -> Result<()> {
    ensure(taper.len() == ts.len(), || {
        format!("taper length {} does not match series length {}", taper.len(), ts.len())
    })?;
    ensure(taper.count() == 1, || {
        format!("expected a single taper, got {}", taper.count())
    })
}

/// Reference O(N²) tapered DFT.
pub fn tapered_dft_direct(ts: &TimeSeries, taper: &TaperSet) -> Result<ComplexSpectrum> {
    check_single(ts, taper)?;
    Ok(direct_with(ts, taper.taper(0)))
}

fn direct_with(ts: &TimeSeries, w: &[f64]) -> ComplexSpectrum {
    let x: Vec<f64> = w.iter().zip(ts.values()).map(|(a, b)| a * b).collect();
    let times = ts.times();
    let freqs = dft_frequencies(ts);
    let values = freqs.iter().map(|&om| phase_sum_at(&x, &times, om)).collect();
    ComplexSpectrum {
        freqs,
        values,
        convention: Convention::Discrete,
    }
}

/// FFT-based tapered DFT, identical to [`tapered_dft_direct`] up to rounding.
pub fn tapered_dft(ts: &TimeSeries, taper: &TaperSet) -> Result<ComplexSpectrum> {
    check_single(ts, taper)?;
    Ok(fft_with(ts, taper.taper(0)))
}

fn fft_with(ts: &TimeSeries, w: &[f64]) -> ComplexSpectrum {
    let n = ts.len();
    let mut buf: Vec<Complex64> = w
        .iter()
        .zip(ts.values())
        .map(|(a, b)| Complex64::new(a * b, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let freqs = dft_frequencies(ts);
    let values = dft_indices(n)
        .zip(&freqs)
        .map(|(j, om)| {
            let bin = j.rem_euclid(n as i64) as usize;
            buf[bin] * Complex64::from_polar(1.0, -om * ts.t0())
        })
        .collect();
    ComplexSpectrum {
        freqs,
        values,
        convention: Convention::Discrete,
    }
}

/// `(1/K) Σ_m |X_m(ω_j)|²` over the tapers of the set.
pub fn multitaper_spectrum(ts: &TimeSeries, tapers: &TaperSet) -> Result<PowerSpectrum> {
    ensure(tapers.len() == ts.len(), || {
        format!(
            "taper length {} does not match series length {}",
            tapers.len(),
            ts.len()
        )
    })?;
    let k = tapers.count() as f64;
    let freqs = dft_frequencies(ts);
    let mut power = vec![0.0; freqs.len()];
    for w in tapers.tapers() {
        let spec = fft_with(ts, w);
        power
            .iter_mut()
            .zip(&spec.values)
            .for_each(|(p, v)| *p += v.norm_sqr() / k);
    }
    Ok(PowerSpectrum { freqs, power })
}

/// Scales `est` so its total power equals that of `reference`.
pub fn normalize_energy(est: &PowerSpectrum, reference: &PowerSpectrum) -> Result<PowerSpectrum> {
    ensure(est.len() == reference.len(), || {
        "spectra must share a frequency grid".into()
    })?;
    let tol = 1e-9 * est.freqs.iter().fold(1.0f64, |m, f| m.max(f.abs()));
    ensure(
        est.freqs
            .iter()
            .zip(&reference.freqs)
            .all(|(a, b)| (a - b).abs() <= tol),
        || "spectra must share a frequency grid".into(),
    )?;
    let total = est.total();
    if !(total > 0.0) {
        return Err(Error::Degenerate("estimate has zero total power".into()));
    }
    let scale = reference.total() / total;
    Ok(PowerSpectrum {
        freqs: est.freqs.clone(),
        power: est.power.iter().map(|p| p * scale).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::taper::{dpss, hann, square};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn series(values: Vec<f64>, t0: f64, dt: f64) -> TimeSeries {
        TimeSeries::new(t0, dt, values, 0.0).unwrap()
    }

    #[test]
    fn frequency_grid() {
        let ts = series(vec![0.0; 4], 0.0, 1.0);
        let f = dft_frequencies(&ts);
        let expect = [-PI, -PI / 2.0, 0.0, PI / 2.0];
        for (a, b) in f.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        let ts = series(vec![0.0; 5001], -25.0, 0.01);
        let f = dft_frequencies(&ts);
        assert!(f.contains(&0.0));
        let max = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((max - 2.0 * PI * 50.0).abs() < 0.1);
    }

    #[test]
    fn constant_series_is_dc_only() {
        let ts = series(vec![1.0; 32], 3.0, 0.5);
        let spec = tapered_dft(&ts, &square(32).unwrap()).unwrap();
        for (f, v) in spec.freqs.iter().zip(&spec.values) {
            if *f != 0.0 {
                assert!(v.norm() < 1e-10);
            } else {
                assert!((v.norm() - 32.0f64.sqrt()).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cosine_gives_two_equal_peaks() {
        let n = 64;
        let dt = 0.1;
        let om1 = 2.0 * PI * 5.0 / (n as f64 * dt);
        let ts = series((0..n).map(|k| (om1 * k as f64 * dt).cos()).collect(), 0.0, dt);
        let spec = tapered_dft(&ts, &square(n).unwrap()).unwrap();
        let pos = spec.freqs.iter().position(|f| (f - om1).abs() < 1e-9).unwrap();
        let neg = spec.freqs.iter().position(|f| (f + om1).abs() < 1e-9).unwrap();
        // Σ cos·e^{-iωt}/√N = √N/2 at ±ω₁
        let peak = (n as f64).sqrt() / 2.0;
        assert!((spec.values[pos].norm() - peak).abs() < 1e-10);
        assert!((spec.values[neg].norm() - peak).abs() < 1e-10);
        for (i, v) in spec.values.iter().enumerate() {
            if i != pos && i != neg {
                assert!(v.norm() < 1e-10);
            }
        }
    }

    #[test]
    fn fft_matches_direct_and_is_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [8usize, 31, 64, 257] {
            let vals: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let ts = series(vals, -1.3, 0.07);
            let taper = hann(n).unwrap();
            let fast = tapered_dft(&ts, &taper).unwrap();
            let slow = tapered_dft_direct(&ts, &taper).unwrap();
            let scale = slow.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
            for (a, b) in fast.values.iter().zip(&slow.values) {
                assert!((a - b).norm() < 1e-9 * scale);
            }
            for (i, f) in fast.freqs.iter().enumerate() {
                if let Some(j) = fast.freqs.iter().position(|g| (g + f).abs() < 1e-12) {
                    assert!((fast.values[i] - fast.values[j].conj()).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn parseval_square_taper() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100;
        let vals: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let ts = series(vals.clone(), 0.0, 1.0);
        let taper = square(n).unwrap();
        let spec = tapered_dft(&ts, &taper).unwrap();
        let lhs: f64 = spec.values.iter().map(|v| v.norm_sqr()).sum();
        let rhs: f64 = vals.iter().map(|y| y * y / n as f64).sum::<f64>() * n as f64;
        assert!((lhs - rhs).abs() < 1e-8 * rhs);
    }

    #[test]
    fn linear_in_values() {
        let n = 40;
        let a: Vec<f64> = (0..n).map(|k| (k as f64 * 0.3).sin()).collect();
        let b: Vec<f64> = (0..n).map(|k| (k as f64 * 0.11).cos()).collect();
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - y).collect();
        let taper = hann(n).unwrap();
        let fa = tapered_dft(&series(a, 0.0, 1.0), &taper).unwrap();
        let fb = tapered_dft(&series(b, 0.0, 1.0), &taper).unwrap();
        let fs = tapered_dft(&series(sum, 0.0, 1.0), &taper).unwrap();
        for i in 0..n {
            assert!((fs.values[i] - (fa.values[i] * 2.0 - fb.values[i])).norm() < 1e-12);
        }
    }

    #[test]
    fn length_mismatch_is_error() {
        let ts = series(vec![0.0; 10], 0.0, 1.0);
        assert!(tapered_dft(&ts, &square(11).unwrap()).is_err());
        assert!(multitaper_spectrum(&ts, &square(11).unwrap()).is_err());
    }

    #[test]
    fn multitaper_single_square_is_periodogram() {
        let ts = series((0..50).map(|k| (k as f64).sqrt()).collect(), 0.0, 1.0);
        let taper = square(50).unwrap();
        let mt = multitaper_spectrum(&ts, &taper).unwrap();
        let pg = tapered_dft(&ts, &taper).unwrap().power();
        assert_eq!(mt.freqs, pg.freqs);
        for (a, b) in mt.power.iter().zip(&pg.power) {
            assert!((a - b).abs() < 1e-12 * b.max(1.0));
        }
        let zero = series(vec![0.0; 50], 0.0, 1.0);
        assert!(multitaper_spectrum(&zero, &taper)
            .unwrap()
            .power
            .iter()
            .all(|p| *p == 0.0));
    }

    #[test]
    fn multitaper_reduces_log_power_variance() {
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 512;
        let vals: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let ts = series(vals, 0.0, 1.0);
        let var_log = |p: &PowerSpectrum| {
            let logs: Vec<f64> = p.power.iter().map(|v| v.ln()).collect();
            let m = logs.iter().sum::<f64>() / logs.len() as f64;
            logs.iter().map(|l| (l - m).powi(2)).sum::<f64>() / logs.len() as f64
        };
        let one = multitaper_spectrum(&ts, &square(n).unwrap()).unwrap();
        let four = multitaper_spectrum(&ts, &dpss(n, 2.5, 4).unwrap()).unwrap();
        assert!(var_log(&four) < var_log(&one));
    }

    #[test]
    fn energy_normalization() {
        let f = vec![0.0, 1.0, 2.0];
        let r = PowerSpectrum::new(f.clone(), vec![1.0, 2.0, 3.0]).unwrap();
        let same = normalize_energy(&r, &r).unwrap();
        assert_eq!(same.power, r.power);
        let double = PowerSpectrum::new(f.clone(), vec![2.0, 4.0, 6.0]).unwrap();
        let back = normalize_energy(&double, &r).unwrap();
        for (a, b) in back.power.iter().zip(&r.power) {
            assert!((a - b).abs() < 1e-15);
        }
        let arb = PowerSpectrum::new(f.clone(), vec![0.3, 7.0, 1e-3]).unwrap();
        let out = normalize_energy(&arb, &r).unwrap();
        assert!((out.total() - r.total()).abs() < 1e-10 * r.total());
        let zero = PowerSpectrum::new(f, vec![0.0; 3]).unwrap();
        assert!(matches!(normalize_energy(&zero, &r), Err(Error::Degenerate(_))));
    }

    #[test]
    fn phase_sum_recurrence_matches_direct() {
        let coeffs: Vec<f64> = (0..1000).map(|k| ((k * 37 % 101) as f64 - 50.0) / 50.0).collect();
        let times: Vec<f64> = (0..1000).map(|k| -25.0 + k as f64 * 0.05).collect();
        for om in [0.0, 0.37, 3.1, 47.0] {
            let a = phase_sum(&coeffs, -25.0, 0.05, om);
            let b = phase_sum_at(&coeffs, &times, om);
            assert!((a - b).norm() < 1e-11 * coeffs.len() as f64);
        }
    }
}
