//! Exact Gaussian-process regression with an RBF kernel.
//!
//! Targets are standardized to zero mean and unit variance before fitting;
//! [`GaussianProcess::predict`] answers on that standardized scale.

use crate::AgentError;

/// Jitter escalation: the noise term is multiplied by this factor per retry.
const JITTER_GROWTH: f64 = 10.0;
/// Jitter tried first when the configured noise is zero.
const MIN_JITTER: f64 = 1e-10;
const JITTER_RETRIES: usize = 3;

#[derive(Debug, Clone)]
pub struct GaussianProcess {
    x: Vec<Vec<f64>>,
    /// Lower Cholesky factor of K + σ_n² I, row-major.
    chol: Vec<f64>,
    alpha: Vec<f64>,
    length_scale: f64,
    signal_variance: f64,
    noise_variance: f64,
    y_mean: f64,
    y_std: f64,
}

pub fn rbf(a: &[f64], b: &[f64], length_scale: f64, signal_variance: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    signal_variance * (-d2 / (2.0 * length_scale * length_scale)).exp()
}

/// In-place lower Cholesky factorization of a row-major n×n matrix.
/// Returns false if the matrix is not numerically positive definite.
fn cholesky(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for i in 0..j {
            a[i * n + j] = 0.0;
        }
    }
    true
}

/// Solves L z = b for lower-triangular L.
fn forward(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        let row = &l[i * n..i * n + i];
        for (k, &lik) in row.iter().enumerate() {
            s -= lik * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves Lᵀ z = b for lower-triangular L.
fn backward(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

impl GaussianProcess {
    /// Fits the posterior. On a failed factorization the noise term grows
    /// ×10 (from 1e-10 if it was zero), up to three times, before giving up.
    pub fn fit(
        x: Vec<Vec<f64>>,
        y: &[f64],
        length_scale: f64,
        signal_variance: f64,
        noise_variance: f64,
    ) -> Result<Self, AgentError> {
        let n = x.len();
        if n == 0 || n != y.len() {
            return Err(AgentError::Invalid(format!("{n} inputs for {} targets", y.len())));
        }
        let y_mean = y.iter().sum::<f64>() / n as f64;
        let var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n as f64;
        let y_std = if var > 0.0 { var.sqrt() } else { 1.0 };
        let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();

        let mut kernel = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let k = rbf(&x[i], &x[j], length_scale, signal_variance);
                kernel[i * n + j] = k;
                kernel[j * n + i] = k;
            }
        }
        let mut noise = noise_variance;
        for attempt in 0..=JITTER_RETRIES {
            let mut a = kernel.clone();
            for i in 0..n {
                a[i * n + i] += noise;
            }
            if cholesky(&mut a, n) {
                let mut alpha = ys.clone();
                forward(&a, n, &mut alpha);
                backward(&a, n, &mut alpha);
                return Ok(GaussianProcess {
                    x,
                    chol: a,
                    alpha,
                    length_scale,
                    signal_variance,
                    noise_variance: noise,
                    y_mean,
                    y_std,
                });
            }
            if attempt < JITTER_RETRIES {
                noise = if noise > 0.0 { noise * JITTER_GROWTH } else { MIN_JITTER };
            }
        }
        Err(AgentError::SingularKernel(noise))
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Noise term actually used after any jitter escalation.
    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn standardize(&self, y: f64) -> f64 {
        (y - self.y_mean) / self.y_std
    }

    /// Posterior mean and variance at `x` on the standardized scale.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let n = self.x.len();
        let mut k: Vec<f64> = self
            .x
            .iter()
            .map(|xi| rbf(xi, x, self.length_scale, self.signal_variance))
            .collect();
        let mean = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        forward(&self.chol, n, &mut k);
        let var = self.signal_variance - k.iter().map(|v| v * v).sum::<f64>();
        (mean, var.max(0.0))
    }

    /// [`predict`](Self::predict) for many points at once, bit-for-bit equal
    /// to calling it per point. Every per-point sum runs in the same order;
    /// the loops are arranged so that the inner one runs across points.
    pub fn predict_batch(&self, xs: &[Vec<f64>]) -> Vec<(f64, f64)> {
        let (n, m) = (self.x.len(), xs.len());
        if m == 0 {
            return Vec::new();
        }
        let dim = xs[0].len();
        // feature-major candidates
        let mut cols = vec![0.0; dim * m];
        for (c, x) in xs.iter().enumerate() {
            for (f, &v) in x.iter().enumerate() {
                cols[f * m + c] = v;
            }
        }
        let scale = 2.0 * self.length_scale * self.length_scale;
        // row j: kernel between training point j and every candidate
        let mut k = vec![0.0; n * m];
        for (j, xj) in self.x.iter().enumerate() {
            let row = &mut k[j * m..(j + 1) * m];
            for (f, &a) in xj.iter().enumerate() {
                for (d2, &b) in row.iter_mut().zip(&cols[f * m..(f + 1) * m]) {
                    *d2 += (a - b) * (a - b);
                }
            }
            for v in row.iter_mut() {
                *v = self.signal_variance * (-*v / scale).exp();
            }
        }
        // -0.0 is the starting value of `Iterator::sum` for floats
        let mut mean = vec![-0.0; m];
        for (j, &a) in self.alpha.iter().enumerate() {
            for (acc, &kv) in mean.iter_mut().zip(&k[j * m..(j + 1) * m]) {
                *acc += kv * a;
            }
        }
        // forward substitution on all columns at once
        for i in 0..n {
            let (done, rest) = k.split_at_mut(i * m);
            let row = &mut rest[..m];
            for kk in 0..i {
                let l = self.chol[i * n + kk];
                for (r, &b) in row.iter_mut().zip(&done[kk * m..(kk + 1) * m]) {
                    *r -= l * b;
                }
            }
            let d = self.chol[i * n + i];
            for r in row.iter_mut() {
                *r /= d;
            }
        }
        let mut sq = vec![-0.0; m];
        for j in 0..n {
            for (acc, &v) in sq.iter_mut().zip(&k[j * m..(j + 1) * m]) {
                *acc += v * v;
            }
        }
        mean.into_iter()
            .zip(sq)
            .map(|(mu, s)| (mu, (self.signal_variance - s).max(0.0)))
            .collect()
    }
}
