//! Probability tables over all `2^n` configurations.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Largest `n` served by exact enumeration (`2^20` configurations).
pub const MAX_ENUMERATION_N: usize = 20;

const PAR_CHUNK: usize = 1 << 12;

pub(crate) fn check_enumerable(n: usize) -> Result<()> {
    if n > MAX_ENUMERATION_N {
        Err(Error::TooLarge {
            n,
            max: MAX_ENUMERATION_N,
        })
    } else {
        Ok(())
    }
}

/// Fills `x` with the ±1 values encoded by configuration index `k`.
#[inline]
pub(crate) fn fill_config(k: usize, x: &mut [f64]) {
    for (i, xi) in x.iter_mut().enumerate() {
        *xi = if (k >> i) & 1 == 1 { 1.0 } else { -1.0 };
    }
}

/// Evaluates `log_weight` on every configuration of `n` variables.
///
/// The closure receives the configuration as ±1.0 values. Index ranges are
/// split across the rayon pool.
pub(crate) fn enumerate_log_weights<F>(n: usize, log_weight: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    check_enumerable(n)?;
    let size = 1usize << n;
    let mut out = vec![0.0; size];
    out.par_chunks_mut(PAR_CHUNK)
        .enumerate()
        .for_each(|(chunk, slot)| {
            let mut x = vec![0.0; n];
            let base = chunk * PAR_CHUNK;
            for (offset, w) in slot.iter_mut().enumerate() {
                fill_config(base + offset, &mut x);
                *w = log_weight(&x);
            }
        });
    Ok(out)
}

/// Log-sum-exp with max subtraction. Empty input gives `-inf`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let sum: f64 = values.iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// An exhaustive probability table with its log normalizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    n: usize,
    probs: Vec<f64>,
    log_z: f64,
}

impl Pmf {
    /// Normalizes a table of unnormalized log-weights in log space.
    pub fn from_log_weights(n: usize, log_weights: Vec<f64>) -> Result<Self> {
        check_len("log-weight table", 1usize << n, log_weights.len())?;
        let log_z = log_sum_exp(&log_weights);
        if !log_z.is_finite() {
            return Err(Error::Numerical(format!(
                "log normalizer is {log_z} for an n = {n} table"
            )));
        }
        let mut probs = log_weights;
        for p in probs.iter_mut() {
            *p = (*p - log_z).exp();
        }
        Ok(Pmf { n, probs, log_z })
    }

    /// Wraps non-negative masses, normalizing them. `log_z` is the log of their total.
    pub fn from_masses(n: usize, masses: Vec<f64>) -> Result<Self> {
        check_len("mass table", 1usize << n, masses.len())?;
        if let Some(k) = masses.iter().position(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::Numerical(format!(
                "mass at configuration {k} is {}",
                masses[k]
            )));
        }
        let total: f64 = masses.iter().sum();
        if total <= 0.0 {
            return Err(Error::Numerical("total mass is zero".into()));
        }
        let probs = masses.into_iter().map(|m| m / total).collect();
        Ok(Pmf {
            n,
            probs,
            log_z: total.ln(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn prob(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// `E[x_i]` for every variable.
    pub fn means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.n];
        for (k, p) in self.probs.iter().enumerate() {
            for (i, m) in means.iter_mut().enumerate() {
                *m += if (k >> i) & 1 == 1 { *p } else { -*p };
            }
        }
        means
    }

    /// `Cov(x_i, x_j)` computed from the table.
    pub fn covariance(&self, i: usize, j: usize) -> f64 {
        let (mut ei, mut ej, mut eij) = (0.0, 0.0, 0.0);
        for (k, p) in self.probs.iter().enumerate() {
            let xi = if (k >> i) & 1 == 1 { 1.0 } else { -1.0 };
            let xj = if (k >> j) & 1 == 1 { 1.0 } else { -1.0 };
            ei += p * xi;
            ej += p * xj;
            eij += p * xi * xj;
        }
        eij - ei * ej
    }

    /// Pearson correlation of `x_i` and `x_j`; zero when either is degenerate.
    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        let vi = self.covariance(i, i);
        let vj = self.covariance(j, j);
        if vi <= 0.0 || vj <= 0.0 {
            return 0.0;
        }
        self.covariance(i, j) / (vi * vj).sqrt()
    }

    /// Reindexes the table so that new variable `i` is old variable `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Pmf> {
        check_len("permutation", self.n, perm.len())?;
        let mut probs = vec![0.0; self.probs.len()];
        for (old, p) in self.probs.iter().enumerate() {
            let mut new = 0usize;
            for (i, &src) in perm.iter().enumerate() {
                if (old >> src) & 1 == 1 {
                    new |= 1 << i;
                }
            }
            probs[new] = *p;
        }
        Ok(Pmf {
            n: self.n,
            probs,
            log_z: self.log_z,
        })
    }
}

/// Distances between two tables over the same variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmfDistance {
    pub tv: f64,
    pub max_abs: f64,
    pub kl: f64,
}

/// Total variation, largest entrywise gap, and `KL(a || b)` with `0 ln 0 = 0`.
pub fn pmf_distance(a: &Pmf, b: &Pmf) -> Result<PmfDistance> {
    check_len("pmf variable count", a.n, b.n)?;
    let mut l1 = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut kl = 0.0;
    for (&pa, &pb) in a.probs.iter().zip(&b.probs) {
        let d = (pa - pb).abs();
        l1 += d;
        max_abs = max_abs.max(d);
        if pa > 0.0 {
            kl += if pb > 0.0 {
                pa * (pa / pb).ln()
            } else {
                f64::INFINITY
            };
        }
    }
    Ok(PmfDistance {
        tv: 0.5 * l1,
        max_abs,
        kl,
    })
}
