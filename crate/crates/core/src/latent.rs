//! Latent-variable (common cause) representation.
//!
//! Under the standard-normal convention `exp(S^2/2) = E[exp(S Z)]`, squared
//! sums become integrals over latent scores. The items are then conditionally
//! independent two-point logistic variables and the latent density is
//! `f(theta) ~ prod_i 2cosh(delta_i + alpha_i' theta) * phi(theta)`.

use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::model::BinaryConfig;
use crate::pmf::{check_enumerable, log_sum_exp, Pmf};
use crate::quadrature::QuadratureRule;
use crate::spectral::{SpectralForm, EIGEN_TOLERANCE};

/// Tensor quadrature is offered up to this many latent dimensions.
pub const MAX_LATENT_DIM: usize = 3;
/// Largest item count for the multidimensional marginal.
pub const MAX_MIRT_ITEMS: usize = 12;
/// Marginals whose mass bookkeeping is off by more than this are rejected.
pub const MASS_TOLERANCE: f64 = 1e-6;

/// Node tuples whose normalized latent mass is below `exp(-PRUNE_LOG_MASS)`
/// are skipped; item conditionals are at most 1, so the loss is bounded by it.
const PRUNE_LOG_MASS: f64 = 60.0;

/// `ln(2 cosh u)` without overflow.
#[inline]
pub(crate) fn log_2cosh(u: f64) -> f64 {
    let a = u.abs();
    a + (-2.0 * a).exp().ln_1p()
}

/// `P(x_i | eta) = exp(x_i eta) / (exp(eta) + exp(-eta))`.
#[inline]
pub(crate) fn item_prob(x: f64, eta: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * x * eta).exp())
}

/// Item parameters and discrimination loadings of a multidimensional IRT model.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentForm {
    delta: Vec<f64>,
    /// Row-major `n x r`.
    loadings: Vec<f64>,
    r: usize,
}

impl LatentForm {
    /// `loadings[i]` holds item `i`'s discriminations, one per latent dimension.
    pub fn new(delta: Vec<f64>, loadings: Vec<Vec<f64>>) -> Result<Self> {
        let n = delta.len();
        check_len("loading rows", n, loadings.len())?;
        let r = loadings.first().map_or(0, Vec::len);
        if r > n {
            return Err(Error::invalid(
                "loadings",
                format!("{r} latent dimensions for {n} items"),
            ));
        }
        let mut flat = Vec::with_capacity(n * r);
        for (i, row) in loadings.iter().enumerate() {
            check_len("loading row", r, row.len())?;
            if let Some(j) = row.iter().position(|a| !a.is_finite()) {
                return Err(Error::invalid(format!("loadings[{i}][{j}]"), "not finite"));
            }
            flat.extend_from_slice(row);
        }
        Ok(LatentForm {
            delta,
            loadings: flat,
            r,
        })
    }

    /// One latent dimension with unit discriminations.
    pub fn rasch(delta: Vec<f64>) -> Self {
        let n = delta.len();
        LatentForm {
            delta,
            loadings: vec![1.0; n],
            r: 1,
        }
    }

    /// Keeps the loading columns of strictly positive eigenvalues.
    pub fn from_spectral(sf: &SpectralForm, delta: &[f64]) -> Result<Self> {
        let n = sf.n();
        check_len("delta", n, delta.len())?;
        let keep: Vec<usize> = (0..n)
            .filter(|&r| sf.lambdas()[r] > EIGEN_TOLERANCE)
            .collect();
        let a = sf.loadings();
        let loadings = (0..n)
            .flat_map(|i| keep.iter().map(move |&r| a[(i, r)]))
            .collect();
        Ok(LatentForm {
            delta: delta.to_vec(),
            loadings,
            r: keep.len(),
        })
    }

    pub fn n(&self) -> usize {
        self.delta.len()
    }

    /// Number of latent dimensions.
    pub fn r(&self) -> usize {
        self.r
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn delta_mut(&mut self) -> &mut [f64] {
        &mut self.delta
    }

    pub fn loading(&self, i: usize, dim: usize) -> f64 {
        self.loadings[i * self.r + dim]
    }

    /// Item `i`'s linear predictor `delta_i + alpha_i' theta`.
    #[inline]
    pub fn predictor(&self, i: usize, theta: &[f64]) -> f64 {
        let row = &self.loadings[i * self.r..(i + 1) * self.r];
        self.delta[i] + row.iter().zip(theta).map(|(a, t)| a * t).sum::<f64>()
    }
}

/// Rasch conditional `P(x | theta) = prod_i exp(x_i[theta + delta_i]) / 2cosh(theta + delta_i)`.
pub fn rasch_conditional(delta: &[f64], theta: f64, x: &BinaryConfig) -> Result<f64> {
    check_len("configuration", delta.len(), x.len())?;
    Ok(x.values()
        .iter()
        .zip(delta)
        .map(|(&xi, d)| item_prob(f64::from(xi), theta + d))
        .product())
}

/// Multidimensional IRT conditional, one two-point logistic factor per item.
pub fn mirt_conditional(lf: &LatentForm, theta: &[f64], x: &BinaryConfig) -> Result<f64> {
    check_len("theta", lf.r, theta.len())?;
    check_len("configuration", lf.n(), x.len())?;
    Ok(x.values()
        .iter()
        .enumerate()
        .map(|(i, &xi)| item_prob(f64::from(xi), lf.predictor(i, theta)))
        .product())
}

/// The latent density induced by the Curie-Weiss model,
/// `f(theta) ~ prod_i 2cosh(theta + delta_i) * phi(theta)`, normalized under a rule.
#[derive(Debug, Clone)]
pub struct CwLatentDensity {
    delta: Vec<f64>,
    log_norm: f64,
}

impl CwLatentDensity {
    pub fn new(delta: &[f64], rule: &QuadratureRule) -> Self {
        let terms: Vec<f64> = rule
            .nodes()
            .iter()
            .zip(rule.weights())
            .map(|(z, w)| w.ln() + delta.iter().map(|d| log_2cosh(z + d)).sum::<f64>())
            .collect();
        CwLatentDensity {
            delta: delta.to_vec(),
            log_norm: log_sum_exp(&terms),
        }
    }

    /// Ratio `f(theta) / phi(theta)`.
    pub fn tilt(&self, theta: f64) -> f64 {
        (self.delta.iter().map(|d| log_2cosh(theta + d)).sum::<f64>() - self.log_norm).exp()
    }

    pub fn pdf(&self, theta: f64) -> f64 {
        const LOG_SQRT_2PI: f64 = 0.918_938_533_204_672_7;
        let log_phi = -0.5 * theta * theta - LOG_SQRT_2PI;
        (self.delta.iter().map(|d| log_2cosh(theta + d)).sum::<f64>() - self.log_norm + log_phi)
            .exp()
    }
}

/// Evaluates the induced Curie-Weiss latent density at `theta`.
pub fn latent_density_cw(delta: &[f64], theta: f64, rule: &QuadratureRule) -> f64 {
    CwLatentDensity::new(delta, rule).pdf(theta)
}

/// Fills `buf[..2^n]` with `prod_i P(x_i)` given per-item `P(x_i = +1)`.
#[inline]
fn conditional_table(p_plus: &[f64], buf: &mut [f64]) {
    buf[0] = 1.0;
    for (i, &pp) in p_plus.iter().enumerate() {
        let half = 1usize << i;
        let pm = 1.0 - pp;
        for k in 0..half {
            let v = buf[k];
            buf[k + half] = v * pp;
            buf[k] = v * pm;
        }
    }
}

/// Marginal `p(x) = int P(x | theta) f(theta) d theta` with `f` the induced
/// Curie-Weiss latent density.
pub fn rasch_marginal_pmf(delta: &[f64], rule: &QuadratureRule) -> Result<Pmf> {
    let n = delta.len();
    check_enumerable(n)?;
    let density = CwLatentDensity::new(delta, rule);
    let size = 1usize << n;
    let mut acc = vec![0.0; size];
    let mut buf = vec![0.0; size];
    let mut p_plus = vec![0.0; n];
    let mut edge = 0.0f64;
    let last = rule.m() - 1;
    for (k, (&theta, &w)) in rule.nodes().iter().zip(rule.weights()).enumerate() {
        let mass = w * density.tilt(theta);
        if k == 0 || k == last {
            edge = edge.max(mass);
        }
        for (p, d) in p_plus.iter_mut().zip(delta) {
            *p = item_prob(1.0, theta + d);
        }
        conditional_table(&p_plus, &mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += mass * b;
        }
    }
    finish_marginal(n, acc, edge)
}

fn finish_marginal(n: usize, acc: Vec<f64>, edge_mass: f64) -> Result<Pmf> {
    let total: f64 = acc.iter().sum();
    let deviation = (total - 1.0).abs().max(edge_mass);
    if !(deviation <= MASS_TOLERANCE) {
        return Err(Error::QuadratureUnderResolved { deviation });
    }
    Pmf::from_masses(n, acc)
}

/// Tensor-product nodes of a LatentForm together with their normalized
/// latent masses. Negligible nodes are dropped. The second value is the
/// largest mass found on the outer boundary of the grid.
pub(crate) fn latent_grid(lf: &LatentForm, rule: &QuadratureRule) -> Result<(Vec<(Vec<f64>, f64)>, f64)> {
    let r = lf.r;
    if r > MAX_LATENT_DIM {
        return Err(Error::UnsupportedDimension {
            r,
            max: MAX_LATENT_DIM,
        });
    }
    let m = rule.m();
    let count = m.pow(r as u32);
    let log_w: Vec<f64> = rule.weights().iter().map(|w| w.ln()).collect();
    let points: Vec<(Vec<f64>, f64, bool)> = (0..count)
        .into_par_iter()
        .map(|t| {
            let mut theta = vec![0.0; r];
            let mut lw = 0.0;
            let mut boundary = false;
            let mut rest = t;
            for th in theta.iter_mut() {
                let digit = rest % m;
                rest /= m;
                *th = rule.nodes()[digit];
                lw += log_w[digit];
                boundary |= digit == 0 || digit == m - 1;
            }
            let log_mass = lw + (0..lf.n()).map(|i| log_2cosh(lf.predictor(i, &theta))).sum::<f64>();
            (theta, log_mass, boundary)
        })
        .collect();
    let logs: Vec<f64> = points.iter().map(|p| p.1).collect();
    let log_norm = log_sum_exp(&logs);
    if !log_norm.is_finite() {
        return Err(Error::Numerical("latent density normalizer is not finite".into()));
    }
    let mut edge = 0.0f64;
    let mut kept = Vec::new();
    for (theta, log_mass, boundary) in points {
        let rel = log_mass - log_norm;
        if boundary {
            edge = edge.max(rel.exp());
        }
        if rel > -PRUNE_LOG_MASS {
            kept.push((theta, rel.exp()));
        }
    }
    Ok((kept, edge))
}

/// Marginal PMF of a multidimensional IRT model whose latent density is the
/// one induced by the eigenvalue representation.
pub fn mirt_marginal_pmf(lf: &LatentForm, rule: &QuadratureRule) -> Result<Pmf> {
    let n = lf.n();
    if n > MAX_MIRT_ITEMS {
        return Err(Error::TooLarge {
            n,
            max: MAX_MIRT_ITEMS,
        });
    }
    let (grid, edge) = latent_grid(lf, rule)?;
    let size = 1usize << n;
    let acc = grid
        .par_iter()
        .fold(
            || (vec![0.0; size], vec![0.0; size], vec![0.0; n]),
            |(mut acc, mut buf, mut p_plus), (theta, mass)| {
                for (i, p) in p_plus.iter_mut().enumerate() {
                    *p = item_prob(1.0, lf.predictor(i, theta));
                }
                conditional_table(&p_plus, &mut buf);
                for (a, b) in acc.iter_mut().zip(&buf) {
                    *a += mass * b;
                }
                (acc, buf, p_plus)
            },
        )
        .map(|(acc, _, _)| acc)
        .reduce(
            || vec![0.0; size],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
                a
            },
        );
    finish_marginal(n, acc, edge)
}
