//! Common-effect representation: independent causes, effects that occur with
//! a probability depending on the causes, and selection on all effects.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::BinaryConfig;
use crate::pmf::{enumerate_log_weights, Pmf};
use crate::spectral::{SpectralForm, EIGEN_TOLERANCE};

/// One effect variable: present with probability
/// `exp(lambda S^2 / 2 - log_sup)`, `S = sum_i q_i x_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    lambda: f64,
    q: Vec<f64>,
    log_sup: f64,
}

impl Effect {
    pub fn new(lambda: f64, q: Vec<f64>) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid("lambda", format!("{lambda} is not finite and non-negative")));
        }
        if let Some(i) = q.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("q[{i}]"), "not finite"));
        }
        // the square is largest at x_i = sign(q_i)
        let l1: f64 = q.iter().map(|v| v.abs()).sum();
        let log_sup = 0.5 * lambda * l1 * l1;
        Ok(Effect { lambda, q, log_sup })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    /// `sup_x lambda (sum_i q_i x_i)^2 / 2`.
    pub fn log_sup(&self) -> f64 {
        self.log_sup
    }

    /// The configuration attaining the supremum, with `sign(0) = +1`.
    pub fn sup_config(&self) -> BinaryConfig {
        BinaryConfig::new(self.q.iter().map(|v| if *v < 0.0 { -1 } else { 1 }).collect())
            .expect("signs are +-1")
    }

    #[inline]
    fn log_acceptance(&self, x: &[f64]) -> f64 {
        let s: f64 = self.q.iter().zip(x).map(|(a, b)| a * b).sum();
        // clamp round-off above the supremum
        (0.5 * self.lambda * s * s - self.log_sup).min(0.0)
    }
}

/// Cause predispositions plus the effect variables hanging off them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColliderForm {
    delta: Vec<f64>,
    effects: Vec<Effect>,
}

impl ColliderForm {
    pub fn new(delta: Vec<f64>, effects: Vec<Effect>) -> Result<Self> {
        for e in &effects {
            check_len("effect loading vector", delta.len(), e.q.len())?;
        }
        Ok(ColliderForm { delta, effects })
    }

    /// Every cause feeds one effect, accepted with probability
    /// `exp((sum_i x_i)^2 / 2) / exp(n^2 / 2)`.
    pub fn simple(delta: Vec<f64>) -> Self {
        let n = delta.len();
        let effects = if n == 0 {
            Vec::new()
        } else {
            let nf = n as f64;
            vec![Effect::new(nf, vec![1.0 / nf.sqrt(); n]).expect("finite")]
        };
        ColliderForm { delta, effects }
    }

    pub fn n(&self) -> usize {
        self.delta.len()
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn delta_mut(&mut self) -> &mut [f64] {
        &mut self.delta
    }

    pub fn effects(&self) -> &[Effect] {
        &self.effects
    }

    pub fn r(&self) -> usize {
        self.effects.len()
    }

    pub(crate) fn log_cause_prob(&self, x: &[f64]) -> f64 {
        self.delta
            .iter()
            .zip(x)
            .map(|(d, xi)| -(-2.0 * xi * d).exp().ln_1p())
            .sum()
    }

    /// `sum_r ln pi_r(x)`, the log-probability that every effect is present.
    pub(crate) fn log_all_present(&self, x: &[f64]) -> f64 {
        self.effects.iter().map(|e| e.log_acceptance(x)).sum()
    }
}

/// Effect indicator vector over `{0, 1}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectPattern(Vec<u8>);

impl EffectPattern {
    pub fn new(e: Vec<u8>) -> Result<Self> {
        if let Some(r) = e.iter().position(|v| *v > 1) {
            return Err(Error::invalid(format!("e[{r}]"), format!("{} is not 0 or 1", e[r])));
        }
        Ok(EffectPattern(e))
    }

    pub fn all_present(r: usize) -> Self {
        EffectPattern(vec![1; r])
    }

    /// Pattern `index` over `r` effects: bit `k` set means effect `k` present.
    pub fn from_index(r: usize, index: usize) -> Self {
        EffectPattern((0..r).map(|k| ((index >> k) & 1) as u8).collect())
    }

    pub fn values(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Independent causes: `prod_i exp(x_i delta_i) / 2cosh(delta_i)`.
pub fn cause_marginal_pmf(delta: &[f64]) -> Result<Pmf> {
    let n = delta.len();
    let w = enumerate_log_weights(n, |x| {
        x.iter()
            .zip(delta)
            .map(|(xi, d)| -(-2.0 * xi * d).exp().ln_1p())
            .sum()
    })?;
    Pmf::from_log_weights(n, w)
}

/// Probability that each effect is present given the causes.
pub fn effect_acceptance(cf: &ColliderForm, x: &BinaryConfig) -> Result<Vec<f64>> {
    check_len("configuration", cf.n(), x.len())?;
    let xs = x.as_f64();
    Ok(cf
        .effects
        .iter()
        .map(|e| e.log_acceptance(&xs).exp())
        .collect())
}

/// Joint probability of causes `x` and effect pattern `e`.
pub fn collider_joint(cf: &ColliderForm, x: &BinaryConfig, e: &EffectPattern) -> Result<f64> {
    check_len("effect pattern", cf.r(), e.len())?;
    let pi = effect_acceptance(cf, x)?;
    let causes = cf.log_cause_prob(&x.as_f64()).exp();
    let effects: f64 = pi
        .iter()
        .zip(e.values())
        .map(|(p, &present)| if present == 1 { *p } else { 1.0 - p })
        .product();
    Ok(causes * effects)
}

/// `p(x | e = 1)`: cause marginal times the all-present probability, renormalized.
pub fn conditioned_pmf(cf: &ColliderForm) -> Result<Pmf> {
    let n = cf.n();
    let w = enumerate_log_weights(n, |x| cf.log_cause_prob(x) + cf.log_all_present(x))?;
    Pmf::from_log_weights(n, w)
}

/// One effect per strictly positive eigenvalue, loaded by its eigenvector.
pub fn spectral_to_collider(sf: &SpectralForm, delta: &[f64]) -> Result<ColliderForm> {
    check_len("delta", sf.n(), delta.len())?;
    let effects = sf
        .lambdas()
        .iter()
        .enumerate()
        .filter(|(_, l)| **l > EIGEN_TOLERANCE)
        .map(|(r, l)| Effect::new(*l, sf.q().column(r).iter().copied().collect()))
        .collect::<Result<Vec<_>>>()?;
    ColliderForm::new(delta.to_vec(), effects)
}
