//! Uniformly sampled time series, synthetic test signals, noise and detrending.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};

/// Relative tolerance on the sample spacing of a uniform grid.
pub const SPACING_TOLERANCE: f64 = 1e-9;

/// Real-valued samples `y_k = f(t_k) + ε_k` on the grid `t_k = t0 + k·dt`,
/// with i.i.d. Gaussian observation noise of variance `noise_variance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    t0: f64,
    dt: f64,
    values: Vec<f64>,
    noise_variance: f64,
}

impl TimeSeries {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>, noise_variance: f64) -> Result<Self> {
        ensure(values.len() >= 2, || {
            format!("a time series needs at least 2 samples, got {}", values.len())
        })?;
        ensure(dt.is_finite() && dt > 0.0, || {
            format!("sample step must be positive, got {dt}")
        })?;
        ensure(t0.is_finite(), || "t0 must be finite".into())?;
        ensure(noise_variance.is_finite() && noise_variance >= 0.0, || {
            format!("noise variance must be >= 0, got {noise_variance}")
        })?;
        Ok(Self {
            t0,
            dt,
            values,
            noise_variance,
        })
    }

    /// Builds a series from explicit sample times, which must be strictly
    /// increasing and uniformly spaced.
    pub fn from_samples(times: &[f64], values: Vec<f64>) -> Result<Self> {
        ensure(times.len() == values.len(), || {
            format!("{} times but {} values", times.len(), values.len())
        })?;
        ensure(times.len() >= 2, || "a time series needs at least 2 samples".into())?;
        let dt = check_uniform(times)?;
        Self::new(times[0], dt, values, 0.0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Record length `T = N·δt`.
    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.dt
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn with_noise_variance(mut self, noise_variance: f64) -> Result<Self> {
        ensure(noise_variance.is_finite() && noise_variance >= 0.0, || {
            format!("noise variance must be >= 0, got {noise_variance}")
        })?;
        self.noise_variance = noise_variance;
        Ok(self)
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        ensure(values.len() == self.len(), || {
            format!("expected {} values, got {}", self.len(), values.len())
        })?;
        Ok(Self { values, ..self.clone() })
    }

    /// Subtracts the sample mean.
    pub fn centered(&self) -> Self {
        let mean = self.values.iter().sum::<f64>() / self.len() as f64;
        Self {
            values: self.values.iter().map(|v| v - mean).collect(),
            ..self.clone()
        }
    }

    /// True when both series share the same sample grid.
    pub fn same_grid(&self, other: &TimeSeries) -> bool {
        let tol = SPACING_TOLERANCE * self.dt;
        self.len() == other.len()
            && (self.dt - other.dt).abs() <= tol
            && (self.t0 - other.t0).abs() <= tol.max(SPACING_TOLERANCE * self.t0.abs())
    }

    /// Writes `time,value` rows preceded by a `# noise_variance=` comment.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        writeln!(out, "# noise_variance={}", self.noise_variance).unwrap();
        writeln!(out, "time,value").unwrap();
        for (k, v) in self.values.iter().enumerate() {
            writeln!(out, "{},{}", self.time(k), v).unwrap();
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Reads a file produced by [`TimeSeries::write_csv`], restoring the noise
    /// variance from its comment line.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let lambda = text
            .lines()
            .filter_map(|l| l.trim().strip_prefix("# noise_variance="))
            .next()
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad noise_variance comment `{v}`")))
            })
            .transpose()?
            .unwrap_or(0.0);
        parse_csv(text.as_bytes(), "time", "value")?.with_noise_variance(lambda)
    }
}

fn check_uniform(times: &[f64]) -> Result<f64> {
    let n = times.len();
    for (row, w) in times.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidArgument(format!(
                "times must be strictly increasing (row {})",
                row + 1
            )));
        }
    }
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    for (row, w) in times.windows(2).enumerate() {
        let step = w[1] - w[0];
        if (step - dt).abs() > SPACING_TOLERANCE * dt {
            return Err(Error::NonUniformSpacing {
                row: row + 1,
                expected: dt,
                found: step,
            });
        }
    }
    Ok(dt)
}

/// Parameters of `e^{-t²/2a²} cos³(ω₀t + φ₀)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnharmonicParams {
    /// Gaussian envelope scale (time units).
    pub a: f64,
    /// Angular frequency (rad per time unit).
    pub omega0: f64,
    /// Phase in `[0, 2π)`.
    pub phi0: f64,
}

impl AnharmonicParams {
    pub fn new(a: f64, omega0: f64, phi0: f64) -> Result<Self> {
        let p = Self { a, omega0, phi0 };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.a.is_finite() && self.a > 0.0, || {
            format!("envelope scale a must be > 0, got {}", self.a)
        })?;
        ensure(self.omega0.is_finite() && self.omega0 > 0.0, || {
            format!("omega0 must be > 0, got {}", self.omega0)
        })?;
        ensure((0.0..2.0 * PI).contains(&self.phi0), || {
            format!("phi0 must lie in [0, 2π), got {}", self.phi0)
        })
    }

    pub fn value(&self, t: f64) -> f64 {
        (-t * t / (2.0 * self.a * self.a)).exp() * (self.omega0 * t + self.phi0).cos().powi(3)
    }
}

/// Samples the windowed anharmonic oscillation on `t_k = t_min + k·dt`,
/// `t_k <= t_max` (with a half-step allowance for rounding).
pub fn generate_anharmonic(params: &AnharmonicParams, t_min: f64, t_max: f64, dt: f64) -> Result<TimeSeries> {
    params.validate()?;
    ensure(t_min.is_finite() && t_max.is_finite() && t_min < t_max, || {
        format!("need t_min < t_max, got [{t_min}, {t_max}]")
    })?;
    ensure(dt.is_finite() && dt > 0.0, || format!("dt must be > 0, got {dt}"))?;
    let n = ((t_max - t_min) / dt + 0.5).floor() as usize + 1;
    let values = (0..n).map(|k| params.value(t_min + k as f64 * dt)).collect();
    TimeSeries::new(t_min, dt, values, 0.0)
}

/// Adds seeded `N(0, sd²)` noise and records `sd²` as the noise variance.
pub fn add_white_noise(ts: &TimeSeries, sd: f64, seed: u64) -> Result<TimeSeries> {
    ensure(sd.is_finite() && sd >= 0.0, || {
        format!("noise sd must be >= 0, got {sd}")
    })?;
    if sd == 0.0 {
        return ts.clone().with_noise_variance(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sd).expect("sd validated");
    let values = ts.values.iter().map(|v| v + normal.sample(&mut rng)).collect();
    ts.with_values(values)?.with_noise_variance(sd * sd)
}

/// Removes the least-squares polynomial of degree `order`.
///
/// The basis is built from time rescaled to `[-1, 1]` and orthonormalized
/// with two passes of modified Gram-Schmidt, so the residual is orthogonal to
/// every basis column to working precision.
pub fn detrend_poly(ts: &TimeSeries, order: usize) -> Result<TimeSeries> {
    let n = ts.len();
    ensure(n > order, || {
        format!("rank-deficient design: {n} samples cannot fit a degree-{order} polynomial")
    })?;
    let half = 0.5 * (n - 1) as f64;
    let x: Vec<f64> = (0..n).map(|k| (k as f64 - half) / half).collect();

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(order + 1);
    for p in 0..=order {
        let mut col: Vec<f64> = x.iter().map(|xi| xi.powi(p as i32)).collect();
        for _ in 0..2 {
            for q in &basis {
                let proj = dot(q, &col);
                col.iter_mut().zip(q).for_each(|(c, qi)| *c -= proj * qi);
            }
        }
        let norm = dot(&col, &col).sqrt();
        if norm <= 1e-12 * (n as f64).sqrt() {
            return Err(Error::InvalidArgument(format!(
                "rank-deficient polynomial design at degree {p}"
            )));
        }
        col.iter_mut().for_each(|c| *c /= norm);
        basis.push(col);
    }

    let mut resid = ts.values.clone();
    for _ in 0..2 {
        for q in &basis {
            let proj = dot(q, &resid);
            resid.iter_mut().zip(q).for_each(|(r, qi)| *r -= proj * qi);
        }
    }
    ts.with_values(resid)
}

/// Reads a comma-separated file with a header row, selecting the time and
/// value columns by name. Lines starting with `#` are skipped.
pub fn load_csv(path: &Path, time_column: &str, value_column: &str) -> Result<TimeSeries> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_csv(bytes.as_slice(), time_column, value_column)
}

/// Like [`load_csv`], but accepts time stamps that deviate from the uniform
/// grid `t_0 + k·dt` (with `dt` from the end points) by up to
/// `tolerance·dt`, e.g. rounded decimal dates of monthly records. The
/// returned series lives on the exact grid.
pub fn load_csv_snapped(path: &Path, time_column: &str, value_column: &str, tolerance: f64) -> Result<TimeSeries> {
    ensure((0.0..0.5).contains(&tolerance), || {
        format!("snapping tolerance must be in [0, 0.5), got {tolerance}")
    })?;
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let (times, values) = read_columns(bytes.as_slice(), time_column, value_column)?;
    ensure(times.len() >= 2, || "a time series needs at least 2 samples".into())?;
    let n = times.len();
    let dt = (times[n - 1] - times[0]) / (n - 1) as f64;
    ensure(dt > 0.0, || "times must be increasing".into())?;
    for (k, t) in times.iter().enumerate() {
        let grid = times[0] + k as f64 * dt;
        if (t - grid).abs() > tolerance * dt {
            return Err(Error::NonUniformSpacing {
                row: k,
                expected: dt,
                found: if k == 0 { dt } else { t - times[k - 1] },
            });
        }
    }
    TimeSeries::new(times[0], dt, values, 0.0)
}

fn parse_csv(input: &[u8], time_column: &str, value_column: &str) -> Result<TimeSeries> {
    let (times, values) = read_columns(input, time_column, value_column)?;
    TimeSeries::from_samples(&times, values)
}

fn read_columns(input: &[u8], time_column: &str, value_column: &str) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let ti = find(time_column)?;
    let vi = find(value_column)?;

    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let cell = |idx: usize, column: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    row: row + 1,
                    column: column.to_string(),
                    cell: raw.to_string(),
                })
        };
        times.push(cell(ti, time_column)?);
        values.push(cell(vi, value_column)?);
    }
    Ok((times, values))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
