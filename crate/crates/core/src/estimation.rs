//! Maximum pseudo-likelihood fitting of `delta` and the off-diagonal couplings.
//!
//! Parameters are ordered `delta_1..delta_n` followed by the strict upper
//! triangle of `sigma` in row order. The diagonal is fixed at zero.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::{BinaryConfig, ModelSpec};
use crate::pmf::Pmf;
use crate::sampling::SampleSet;

/// Largest `n` for the enumeration-based full-likelihood cross-check.
pub const MAX_FULL_LIKELIHOOD_N: usize = 12;

/// Distinct configurations with non-negative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedTable {
    n: usize,
    /// Row-major ±1.0 values.
    configs: Vec<f64>,
    weights: Vec<f64>,
    total: f64,
}

impl WeightedTable {
    pub fn new(n: usize, rows: Vec<(BinaryConfig, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<Vec<i8>, f64> = BTreeMap::new();
        for (k, (x, w)) in rows.into_iter().enumerate() {
            check_len("configuration", n, x.len())?;
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::invalid(format!("weight of row {}", k + 1), format!("{w} is not a finite non-negative number")));
            }
            *merged.entry(x.values().to_vec()).or_insert(0.0) += w;
        }
        let mut configs = Vec::with_capacity(merged.len() * n);
        let mut weights = Vec::with_capacity(merged.len());
        for (x, w) in merged {
            if w > 0.0 {
                configs.extend(x.iter().map(|v| f64::from(*v)));
                weights.push(w);
            }
        }
        let total: f64 = weights.iter().sum();
        if weights.is_empty() || total <= 0.0 {
            return Err(Error::EmptyData);
        }
        Ok(WeightedTable {
            n,
            configs,
            weights,
            total,
        })
    }

    /// Each draw counts once.
    pub fn from_samples(samples: &SampleSet) -> Result<Self> {
        let rows = samples
            .rows()
            .map(|r| (BinaryConfig::new(r.to_vec()), 1.0))
            .map(|(x, w)| x.map(|x| (x, w)))
            .collect::<Result<Vec<_>>>()?;
        WeightedTable::new(samples.n(), rows)
    }

    /// Population table: each configuration weighted by its probability.
    pub fn from_pmf(pmf: &Pmf) -> Result<Self> {
        let rows = pmf
            .probs()
            .iter()
            .enumerate()
            .map(|(k, p)| (BinaryConfig::from_index(pmf.n(), k), *p))
            .collect();
        WeightedTable::new(pmf.n(), rows)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of distinct configurations.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.total
    }

    fn rows(&self) -> impl IndexedParallelIterator<Item = (&[f64], f64)> {
        self.configs
            .par_chunks(self.n.max(1))
            .zip(self.weights.par_iter().copied())
    }
}

pub fn param_count(n: usize) -> usize {
    n + n * n.saturating_sub(1) / 2
}

pub fn to_params(spec: &ModelSpec) -> Vec<f64> {
    let mut p = spec.delta().to_vec();
    p.extend(spec.upper());
    p
}

pub fn from_params(n: usize, params: &[f64]) -> Result<ModelSpec> {
    check_len("parameter vector", param_count(n), params.len())?;
    ModelSpec::from_upper(params[..n].to_vec(), &params[n..])
}

/// `ln(logistic(t))` without overflow.
#[inline]
fn log_logistic(t: f64) -> f64 {
    if t >= 0.0 {
        -(-t).exp().ln_1p()
    } else {
        t - t.exp().ln_1p()
    }
}

#[inline]
fn local_fields(spec: &ModelSpec, x: &[f64], out: &mut [f64]) {
    let n = spec.n();
    for i in 0..n {
        let mut h = spec.delta()[i];
        for j in 0..n {
            if j != i {
                h += spec.sigma(i, j) * x[j];
            }
        }
        out[i] = h;
    }
}

/// Weighted mean of `sum_i ln P(x_i | x_rest)`.
pub fn pseudo_loglik(spec: &ModelSpec, data: &WeightedTable) -> Result<f64> {
    check_len("data columns", spec.n(), data.n)?;
    let n = spec.n();
    let sum: f64 = data
        .rows()
        .map_init(
            || vec![0.0; n],
            |h, (x, w)| {
                local_fields(spec, x, h);
                w * x.iter().zip(h.iter()).map(|(xi, hi)| log_logistic(2.0 * xi * hi)).sum::<f64>()
            },
        )
        .sum();
    Ok(sum / data.total)
}

/// Analytic gradient over `(delta, upper sigma)`.
///
/// With residual `r_i = x_i - tanh(h_i)`: `d/d delta_i = E[r_i]` and
/// `d/d sigma_ij = E[r_i x_j + r_j x_i]`.
pub fn pseudo_loglik_grad(spec: &ModelSpec, data: &WeightedTable) -> Result<Vec<f64>> {
    check_len("data columns", spec.n(), data.n)?;
    let n = spec.n();
    let p = param_count(n);
    let grad = data
        .rows()
        .fold(
            || (vec![0.0; p], vec![0.0; n]),
            |(mut g, mut h), (x, w)| {
                local_fields(spec, x, &mut h);
                for i in 0..n {
                    h[i] = x[i] - h[i].tanh();
                }
                let mut k = n;
                for i in 0..n {
                    g[i] += w * h[i];
                    for j in i + 1..n {
                        g[k] += w * (h[i] * x[j] + h[j] * x[i]);
                        k += 1;
                    }
                }
                (g, h)
            },
        )
        .map(|(g, _)| g)
        .reduce(
            || vec![0.0; p],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        );
    Ok(grad.into_iter().map(|g| g / data.total).collect())
}

/// Weighted mean exact log-likelihood via enumeration, for cross-checks.
pub fn full_log_likelihood(spec: &ModelSpec, data: &WeightedTable) -> Result<f64> {
    check_len("data columns", spec.n(), data.n)?;
    if spec.n() > MAX_FULL_LIKELIHOOD_N {
        return Err(Error::TooLarge {
            n: spec.n(),
            max: MAX_FULL_LIKELIHOOD_N,
        });
    }
    let pmf = crate::model::ising_pmf(spec)?;
    let sum: f64 = data
        .configs
        .chunks(data.n.max(1))
        .zip(&data.weights)
        .map(|(x, w)| {
            let k = x
                .iter()
                .enumerate()
                .filter(|(_, v)| **v > 0.0)
                .fold(0usize, |acc, (i, _)| acc | (1 << i));
            w * pmf.prob(k).ln()
        })
        .sum();
    Ok(sum / data.total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub grad_tol: f64,
    pub max_iter: usize,
    pub initial_step: f64,
    /// Armijo sufficient-increase factor.
    pub armijo: f64,
    pub max_halvings: u32,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            grad_tol: 1e-6,
            max_iter: 5_000,
            initial_step: 1.0,
            armijo: 1e-4,
            max_halvings: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec_hat: ModelSpec,
    /// Objective at the start of each iteration, then at the final point.
    pub objective_trace: Vec<f64>,
    pub grad_norm_final: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Gradient ascent with backtracking line search on the pseudo-likelihood.
pub fn fit_pseudo_likelihood(data: &WeightedTable, init: &ModelSpec, opts: &FitOptions) -> Result<FitResult> {
    let n = data.n();
    check_len("initial spec", n, init.n())?;
    let mut params = to_params(init);
    if let Some(k) = params.iter().position(|p| !p.is_finite()) {
        return Err(Error::invalid(format!("initial parameter {k}"), "not finite"));
    }
    let mut spec = from_params(n, &params)?;
    let mut value = pseudo_loglik(&spec, data)?;
    if !value.is_finite() {
        return Err(Error::NonFiniteObjective { halvings: 0 });
    }
    let mut trace = vec![value];
    let mut grad = pseudo_loglik_grad(&spec, data)?;
    let mut gnorm = norm(&grad);
    let mut iterations = 0;
    let mut converged = gnorm < opts.grad_tol;

    while !converged && iterations < opts.max_iter {
        let slope = gnorm * gnorm;
        let mut step = opts.initial_step;
        let mut accepted = None;
        let mut saw_finite = false;
        for _ in 0..=opts.max_halvings {
            let candidate: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p + step * g).collect();
            let cand_spec = from_params(n, &candidate)?;
            let cand_value = pseudo_loglik(&cand_spec, data)?;
            if cand_value.is_finite() {
                saw_finite = true;
                if cand_value >= value + opts.armijo * step * slope {
                    accepted = Some((candidate, cand_spec, cand_value));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((candidate, cand_spec, cand_value)) = accepted else {
            if !saw_finite {
                return Err(Error::NonFiniteObjective {
                    halvings: opts.max_halvings,
                });
            }
            // no step gives a measurable increase: stalled at round-off
            break;
        };
        iterations += 1;
        params = candidate;
        spec = cand_spec;
        value = cand_value;
        trace.push(value);
        grad = pseudo_loglik_grad(&spec, data)?;
        gnorm = norm(&grad);
        converged = gnorm < opts.grad_tol;
    }

    Ok(FitResult {
        spec_hat: spec,
        objective_trace: trace,
        grad_norm_final: gnorm,
        iterations,
        converged,
    })
}
