//! Gauss-Hermite rules for integrals against the standard normal density.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nodes per latent dimension unless configured otherwise.
pub const DEFAULT_NODES: usize = 64;

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;
/// pi^(-1/4)
const PI_M4: f64 = 0.751_125_544_464_942_5;

/// One-dimensional rule with `sum_k w_k f(z_k) ~ E[f(Z)]`, `Z ~ N(0, 1)`.
///
/// Multidimensional integrals use the tensor product of this rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureRule {
    /// `m`-point Gauss-Hermite rule, exact for polynomials of degree `2m - 1`.
    pub fn gauss_hermite(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("quadrature nodes", "need at least one node"));
        }
        let (x, w) = hermite_physicists(m)?;
        // weight exp(-x^2) -> standard normal: z = sqrt(2) x, w / sqrt(pi)
        let nodes = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        let weights = w.iter().map(|v| v * inv_sqrt_pi).collect();
        Ok(QuadratureRule { nodes, weights })
    }

    pub fn m(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes in ascending order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(z, w)| w * f(*z))
            .sum()
    }
}

impl Default for QuadratureRule {
    fn default() -> Self {
        QuadratureRule::gauss_hermite(DEFAULT_NODES).expect("default rule converges")
    }
}

/// Orthonormal Hermite recurrence at `z`. Returns `(p_m, p_{m-1}, log_scale)`
/// where the true values are the returned ones times `exp(log_scale)`.
fn hermite_recurrence(m: usize, z: f64) -> (f64, f64, f64) {
    let (mut p1, mut p2) = (PI_M4, 0.0);
    let mut log_scale = 0.0;
    for j in 0..m {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
        // far in the tails the polynomials outgrow f64
        if p1.abs() > 1e150 {
            p1 *= 1e-150;
            p2 *= 1e-150;
            log_scale += 150.0 * std::f64::consts::LN_10;
        }
    }
    (p1, p2, log_scale)
}

/// Nodes (ascending) and weights for the weight function `exp(-x^2)`.
///
/// Starting points come from the eigenvalues of the Jacobi matrix; each root
/// is then polished by Newton's method on the three-term recurrence.
fn hermite_physicists(m: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mf = m as f64;
    let jacobi = DMatrix::from_fn(m, m, |i, j| {
        if i + 1 == j || j + 1 == i {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut guesses: Vec<f64> = SymmetricEigen::new(jacobi).eigenvalues.iter().copied().collect();
    guesses.sort_by(|a, b| a.total_cmp(b));

    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    // roots come in +/- pairs; polish the non-negative half
    for i in m / 2..m {
        let mut z = guesses[i].abs();
        let mut converged = false;
        let mut log_derivative = 0.0;
        for _ in 0..NEWTON_MAX_ITER {
            let (p1, p2, log_scale) = hermite_recurrence(m, z);
            let derivative = (2.0 * mf).sqrt() * p2;
            let step = p1 / derivative;
            z -= step;
            log_derivative = derivative.abs().ln() + log_scale;
            if step.abs() <= NEWTON_TOL * z.abs().max(1.0) {
                converged = true;
                break;
            }
        }
        if !converged || !z.is_finite() {
            return Err(Error::Numerical(format!(
                "Hermite root {i} of a {m}-point rule did not converge"
            )));
        }
        x[i] = z;
        x[m - 1 - i] = -z;
        w[i] = (2f64.ln() - 2.0 * log_derivative).exp();
        w[m - 1 - i] = w[i];
    }
    if m % 2 == 1 {
        x[m / 2] = 0.0;
    }
    if x.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Numerical(format!(
            "{m}-point Hermite rule has coincident roots"
        )));
    }
    Ok((x, w))
}

/// `int exp(2 a t - t^2) / sqrt(pi) dt`, which equals `exp(a^2)`.
///
/// Accurate for `|a| <= 5` with 64 or more nodes.
pub fn kac_identity_check(a: f64, rule: &QuadratureRule) -> f64 {
    // t = z / sqrt(2) turns the integral into E[exp(sqrt(2) a Z)]
    let scale = std::f64::consts::SQRT_2 * a;
    rule.integrate(|z| (scale * z).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moments_of_the_standard_normal() {
        for m in [1, 2, 5, 16, 32, 64, 100, 128] {
            let rule = QuadratureRule::gauss_hermite(m).unwrap();
            assert!((rule.integrate(|_| 1.0) - 1.0).abs() < 1e-12, "m = {m}");
            assert!(rule.integrate(|z| z).abs() < 1e-12, "m = {m}");
            if m >= 2 {
                assert!((rule.integrate(|z| z * z) - 1.0).abs() < 1e-10, "m = {m}");
            }
            if m >= 3 {
                assert!((rule.integrate(|z| z.powi(4)) - 3.0).abs() < 1e-9, "m = {m}");
            }
            assert!(rule.nodes().windows(2).all(|p| p[0] < p[1]));
            assert!(rule.weights().iter().all(|w| *w > 0.0));
        }
    }

    #[test]
    fn small_rules_match_closed_forms() {
        let two = QuadratureRule::gauss_hermite(2).unwrap();
        assert!((two.nodes()[1] - 1.0).abs() < 1e-14);
        assert!((two.weights()[0] - 0.5).abs() < 1e-14);
        let three = QuadratureRule::gauss_hermite(3).unwrap();
        assert!((three.nodes()[2] - 3f64.sqrt()).abs() < 1e-14);
        assert!((three.weights()[1] - 2.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn zero_nodes_is_an_error() {
        assert!(QuadratureRule::gauss_hermite(0).is_err());
    }

    #[test]
    fn kac_identity_values() {
        let r32 = QuadratureRule::gauss_hermite(32).unwrap();
        let r64 = QuadratureRule::default();
        assert!((kac_identity_check(0.0, &r64) - 1.0).abs() < 1e-12);
        assert!((kac_identity_check(1.0, &r32) - std::f64::consts::E).abs() < 1e-8);
        assert!((kac_identity_check(2.0, &r64) - 4f64.exp()).abs() < 1e-6);
        for a in [-2.0, -0.5, 0.5, 3.0, 5.0] {
            let exact = (a * a as f64).exp();
            let got = kac_identity_check(a, &r64);
            assert!(((got - exact) / exact).abs() < 1e-10, "a = {a}: {got} vs {exact}");
        }
    }

    #[test]
    fn large_rules_keep_their_moments() {
        for m in [128, 200, 256, 600] {
            let r = QuadratureRule::gauss_hermite(m).unwrap();
            assert!(r.nodes().windows(2).all(|p| p[1] > p[0]));
            assert!((r.integrate(|_| 1.0) - 1.0).abs() < 1e-13, "m = {m}");
            assert!((r.integrate(|z| z * z) - 1.0).abs() < 1e-13, "m = {m}");
            assert!((r.integrate(|z| z.powi(4)) - 3.0).abs() < 1e-12, "m = {m}");
        }
    }
}
