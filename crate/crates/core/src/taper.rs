//! Data tapers: square, Hann and discrete prolate spheroidal (Slepian) sequences.
//!
//! Every taper is scaled to unit energy, `Σ w[n]² = 1`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaperKind {
    Square,
    Hann,
    Dpss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaperSet {
    length: usize,
    kind: TaperKind,
    tapers: Vec<Vec<f64>>,
    /// Time-bandwidth product `NW`, DPSS only.
    bandwidth: Option<f64>,
    /// Eigenvalues of the Slepian tridiagonal matrix, descending. DPSS only.
    eigenvalues: Option<Vec<f64>>,
}

impl TaperSet {
    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn kind(&self) -> TaperKind {
        self.kind
    }

    pub fn count(&self) -> usize {
        self.tapers.len()
    }

    pub fn tapers(&self) -> &[Vec<f64>] {
        &self.tapers
    }

    pub fn taper(&self, m: usize) -> &[f64] {
        &self.tapers[m]
    }

    pub fn bandwidth(&self) -> Option<f64> {
        self.bandwidth
    }

    pub fn eigenvalues(&self) -> Option<&[f64]> {
        self.eigenvalues.as_deref()
    }
}

fn unit_energy(mut w: Vec<f64>) -> Vec<f64> {
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    w.iter_mut().for_each(|v| *v /= norm);
    w
}

/// Constant taper `1/√n`.
pub fn square(n: usize) -> Result<TaperSet> {
    ensure(n >= 1, || "taper length must be >= 1".into())?;
    Ok(TaperSet {
        length: n,
        kind: TaperKind::Square,
        tapers: vec![vec![1.0 / (n as f64).sqrt(); n]],
        bandwidth: None,
        eigenvalues: None,
    })
}

/// Un-normalized Hann shape `0.5·(1 - cos(2πk/(n-1)))`.
pub fn hann_shape(n: usize) -> Vec<f64> {
    let denom = (n - 1) as f64;
    (0..n)
        .map(|k| {
            // keep the endpoints exactly zero
            if k == 0 || k == n - 1 {
                0.0
            } else {
                0.5 * (1.0 - (2.0 * PI * k as f64 / denom).cos())
            }
        })
        .collect()
}

pub fn hann(n: usize) -> Result<TaperSet> {
    ensure(n >= 3, || format!("Hann taper needs n >= 3, got {n}"))?;
    Ok(TaperSet {
        length: n,
        kind: TaperKind::Hann,
        tapers: vec![unit_energy(hann_shape(n))],
        bandwidth: None,
        eigenvalues: None,
    })
}

/// The `k` leading discrete prolate spheroidal sequences of length `n` and
/// time-bandwidth product `nw`.
///
/// They are the top eigenvectors of the symmetric tridiagonal matrix with
/// diagonal `((n-1-2i)/2)² cos(2πW)` and off-diagonal `i(n-i)/2`, `W = nw/n`.
/// Signs are fixed so the first non-negligible entry of each sequence is
/// positive.
pub fn dpss(n: usize, nw: f64, k: usize) -> Result<TaperSet> {
    ensure(n >= 8, || format!("DPSS needs n >= 8, got {n}"))?;
    ensure(nw > 0.0 && nw < n as f64 / 2.0, || {
        format!("time-bandwidth product must lie in (0, n/2), got {nw}")
    })?;
    let max_k = (2.0 * nw).floor() as usize;
    ensure(k >= 1 && k <= max_k, || {
        format!("number of tapers must lie in [1, floor(2·NW) = {max_k}], got {k}")
    })?;

    let (diag, off) = slepian_tridiagonal(n, nw);
    let mut tapers: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for m in 0..k {
        // m-th largest eigenvalue = (n-1-m)-th smallest
        let lambda = tridiagonal_eigenvalue(&diag, &off, n - 1 - m);
        let mut v = inverse_iteration(&diag, &off, lambda, &tapers);
        let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-6 * scale) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        tapers.push(v);
        eigenvalues.push(lambda);
    }
    Ok(TaperSet {
        length: n,
        kind: TaperKind::Dpss,
        tapers,
        bandwidth: Some(nw),
        eigenvalues: Some(eigenvalues),
    })
}

/// Diagonal (length n) and off-diagonal (length n-1) of the Slepian matrix.
pub fn slepian_tridiagonal(n: usize, nw: f64) -> (Vec<f64>, Vec<f64>) {
    let w = nw / n as f64;
    let c = (2.0 * PI * w).cos();
    let diag = (0..n)
        .map(|i| {
            let h = ((n - 1) as f64 - 2.0 * i as f64) / 2.0;
            h * h * c
        })
        .collect();
    let off = (1..n).map(|i| (i * (n - i)) as f64 / 2.0).collect();
    (diag, off)
}

/// Number of eigenvalues strictly less than `x` (Sturm sequence count).
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        let prev = if q == 0.0 {
            f64::EPSILON * (off[i - 1].abs() + 1.0)
        } else {
            q
        };
        q = diag[i] - x - off[i - 1] * off[i - 1] / prev;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `index`-th smallest eigenvalue (0-based) by bisection.
fn tridiagonal_eigenvalue(diag: &[f64], off: &[f64], index: usize) -> f64 {
    let n = diag.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(T - shift·I) x = b` for tridiagonal `T` by Gaussian elimination
/// with partial pivoting (row interchanges create a second superdiagonal).
fn tridiagonal_solve(diag: &[f64], off: &[f64], shift: f64, b: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut d: Vec<f64> = diag.iter().map(|v| v - shift).collect();
    let mut du: Vec<f64> = off.to_vec();
    let mut du2 = vec![0.0; n];
    let dl = off;
    let mut rhs = b.to_vec();
    let tiny = f64::EPSILON * diag.iter().fold(1.0f64, |m, v| m.max(v.abs()));

    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            let pivot = if d[i] == 0.0 { tiny } else { d[i] };
            let fact = dl[i] / pivot;
            d[i + 1] -= fact * du[i];
            rhs[i + 1] -= fact * rhs[i];
        } else {
            let fact = d[i] / dl[i];
            d[i] = dl[i];
            let temp = d[i + 1];
            d[i + 1] = du[i] - fact * temp;
            if i + 1 < n - 1 {
                du2[i] = du[i + 1];
                du[i + 1] = -fact * du2[i];
            }
            du[i] = temp;
            let r = rhs[i];
            rhs[i] = rhs[i + 1];
            rhs[i + 1] = r - fact * rhs[i];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = rhs[i];
        if i + 1 < n {
            s -= du[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= du2[i] * x[i + 2];
        }
        x[i] = s / if d[i] == 0.0 { tiny } else { d[i] };
    }
    x
}

fn inverse_iteration(diag: &[f64], off: &[f64], lambda: f64, previous: &[Vec<f64>]) -> Vec<f64> {
    let n = diag.len();
    let scale = diag.iter().fold(1.0f64, |m, d| m.max(d.abs()));
    let shift = lambda + 1e-13 * scale;
    // deterministic start vector with components along every eigenvector
    let mut v: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.1 * ((i as f64 + 1.0) * 0.7548776662).fract())
        .collect();
    for _ in 0..4 {
        let mut x = tridiagonal_solve(diag, off, shift, &v);
        for p in previous {
            let d: f64 = p.iter().zip(&x).map(|(a, b)| a * b).sum();
            x.iter_mut().zip(p).for_each(|(xi, pi)| *xi -= d * pi);
        }
        v = unit_energy(x);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn energy(w: &[f64]) -> f64 {
        w.iter().map(|v| v * v).sum()
    }

    #[test]
    fn hann_shape_small() {
        let s = hann_shape(4);
        let expect = [0.0, 0.75, 0.75, 0.0];
        for (a, b) in s.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn hann_endpoints_symmetry_energy() {
        for n in [3, 4, 17, 256, 1001] {
            let t = hann(n).unwrap();
            let w = t.taper(0);
            assert_eq!(w[0], 0.0);
            assert_eq!(w[n - 1], 0.0);
            for k in 0..n {
                assert!((w[k] - w[n - 1 - k]).abs() < 1e-15);
            }
            assert!((energy(w) - 1.0).abs() < 1e-10);
        }
        assert!(hann(1).is_err());
    }

    #[test]
    fn square_unit_energy() {
        let t = square(10).unwrap();
        assert!((energy(t.taper(0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dpss_matches_dense_eigensolver() {
        let (n, nw) = (64, 3.0);
        let (d, e) = slepian_tridiagonal(n, nw);
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = d[i];
            if i + 1 < n {
                m[(i, i + 1)] = e[i];
                m[(i + 1, i)] = e[i];
            }
        }
        let eig = m.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

        let set = dpss(n, nw, 5).unwrap();
        for (m_idx, &col) in order.iter().take(5).enumerate() {
            let lam = set.eigenvalues().unwrap()[m_idx];
            assert!((lam - eig.eigenvalues[col]).abs() < 1e-9 * lam.abs().max(1.0));
            let v = eig.eigenvectors.column(col);
            let dotp: f64 = set.taper(m_idx).iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            assert!((dotp.abs() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dpss_orthonormal_and_signs() {
        let set = dpss(64, 3.0, 2).unwrap();
        let (a, b) = (set.taper(0), set.taper(1));
        assert!((energy(a) - 1.0).abs() < 1e-10);
        assert!((energy(b) - 1.0).abs() < 1e-10);
        let d: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        assert!(d.abs() < 1e-8);
        assert!(a.iter().all(|v| *v > 0.0), "zeroth sequence has no sign change");
        assert!(b[0] > 0.0);
        let ev = set.eigenvalues().unwrap();
        assert!(ev[0] > ev[1]);
    }

    #[test]
    fn dpss_spectral_concentration() {
        // ∫_{-W}^{W} |U(f)|² df with U(f) = Σ w[n] e^{-2πifn}; total energy is 1.
        let (n, nw) = (64, 3.0);
        let w_band = nw / n as f64;
        let set = dpss(n, nw, 1).unwrap();
        let taper = set.taper(0);
        let steps = 4000;
        let h = 2.0 * w_band / steps as f64;
        let power = |f: f64| {
            let (mut re, mut im) = (0.0, 0.0);
            for (k, w) in taper.iter().enumerate() {
                let ph = -2.0 * PI * f * k as f64;
                re += w * ph.cos();
                im += w * ph.sin();
            }
            re * re + im * im
        };
        let mut acc = power(-w_band) + power(w_band);
        for i in 1..steps {
            let f = -w_band + i as f64 * h;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * power(f);
        }
        let concentration = acc * h / 3.0;
        assert!(concentration > 0.99, "concentration {concentration}");
        assert!(concentration <= 1.0 + 1e-9);
    }

    #[test]
    fn dpss_argument_errors() {
        assert!(dpss(64, 3.0, 7).is_err());
        assert!(dpss(64, 3.0, 0).is_err());
        assert!(dpss(4, 1.0, 1).is_err());
        assert!(dpss(64, 40.0, 1).is_err());
    }

    #[test]
    fn dpss_large_n() {
        let set = dpss(1001, 2.5, 4).unwrap();
        for m in 0..4 {
            assert!((energy(set.taper(m)) - 1.0).abs() < 1e-10);
            for l in 0..m {
                let d: f64 = set.taper(m).iter().zip(set.taper(l)).map(|(a, b)| a * b).sum();
                assert!(d.abs() < 1e-8);
            }
        }
        let ev = set.eigenvalues().unwrap();
        assert!(ev.windows(2).all(|w| w[0] > w[1]));
    }
}
