//! Eigenvalue representation: shift the zero-diagonal coupling matrix to be
//! positive semidefinite, decompose it, and evaluate the resulting PMF.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{check_len, Error, Result};
use crate::model::{BinaryConfig, ModelSpec};
use crate::pmf::{enumerate_log_weights, Pmf};

/// Eigenvalues with magnitude below this are treated as exactly zero.
pub const EIGEN_TOLERANCE: f64 = 1e-10;

const MAX_EIGEN_SWEEPS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralForm {
    c: f64,
    lambdas: Vec<f64>,
    q: DMatrix<f64>,
    loadings: DMatrix<f64>,
}

impl SpectralForm {
    /// Assembles a form from eigenpairs. Eigenvalues are clamped, sorted
    /// descending, and each eigenvector gets its largest-magnitude entry positive.
    pub fn from_eigenpairs(c: f64, lambdas: &[f64], q: &DMatrix<f64>) -> Result<Self> {
        let n = lambdas.len();
        check_len("eigenvector rows", n, q.nrows())?;
        check_len("eigenvector columns", n, q.ncols())?;
        if let Some(r) = lambdas.iter().position(|l| *l < -EIGEN_TOLERANCE || !l.is_finite()) {
            return Err(Error::Numerical(format!(
                "eigenvalue {r} is {} after shifting by {c}",
                lambdas[r]
            )));
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| lambdas[b].total_cmp(&lambdas[a]));

        let mut sorted = Vec::with_capacity(n);
        let mut vectors = DMatrix::zeros(n, n);
        for (col, &src) in order.iter().enumerate() {
            let l = lambdas[src];
            sorted.push(if l.abs() < EIGEN_TOLERANCE { 0.0 } else { l });
            let v = q.column(src);
            // first entry of (near-)maximal magnitude decides the sign
            let peak = v.iter().fold(0.0f64, |m, e| m.max(e.abs()));
            let lead = v
                .iter()
                .find(|e| e.abs() >= peak - 1e-12)
                .copied()
                .unwrap_or(1.0);
            let sign = if lead < 0.0 { -1.0 } else { 1.0 };
            vectors.set_column(col, &(v * sign));
        }
        let loadings = DMatrix::from_fn(n, n, |i, r| sorted[r].sqrt() * vectors[(i, r)]);
        Ok(SpectralForm {
            c,
            lambdas: sorted,
            q: vectors,
            loadings,
        })
    }

    pub fn n(&self) -> usize {
        self.lambdas.len()
    }

    /// Diagonal shift applied to the zero-diagonal coupling matrix.
    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    /// `A = Q Lambda^{1/2}`.
    pub fn loadings(&self) -> &DMatrix<f64> {
        &self.loadings
    }

    /// Number of strictly positive eigenvalues.
    pub fn rank(&self) -> usize {
        self.lambdas.iter().filter(|l| **l > EIGEN_TOLERANCE).count()
    }

    /// `Q Lambda Q^T`.
    pub fn shifted_matrix(&self) -> DMatrix<f64> {
        &self.loadings * self.loadings.transpose()
    }

    /// Keeps the `k` largest eigenvalues and zeroes the rest. The result
    /// describes a different (lower-rank) model.
    pub fn truncated(&self, k: usize) -> SpectralForm {
        let n = self.n();
        let lambdas: Vec<f64> = self
            .lambdas
            .iter()
            .enumerate()
            .map(|(r, l)| if r < k { *l } else { 0.0 })
            .collect();
        let loadings = DMatrix::from_fn(n, n, |i, r| lambdas[r].sqrt() * self.q[(i, r)]);
        SpectralForm {
            c: self.c,
            lambdas,
            q: self.q.clone(),
            loadings,
        }
    }
}

/// Zeroes the diagonal, shifts by the smallest `c` that makes the matrix
/// positive semidefinite (plus `extra_shift`), and eigendecomposes.
pub fn to_spectral(spec: &ModelSpec, extra_shift: f64) -> Result<SpectralForm> {
    if !(extra_shift >= 0.0 && extra_shift.is_finite()) {
        return Err(Error::invalid(
            "extra_shift",
            format!("{extra_shift} is not a finite non-negative number"),
        ));
    }
    let n = spec.n();
    let coupling = spec.coupling_matrix();
    if n == 0 {
        return SpectralForm::from_eigenpairs(extra_shift, &[], &DMatrix::zeros(0, 0));
    }
    let eig = SymmetricEigen::try_new(coupling, f64::EPSILON, MAX_EIGEN_SWEEPS).ok_or_else(|| {
        Error::Numerical(format!(
            "symmetric eigensolver did not converge within {MAX_EIGEN_SWEEPS} sweeps"
        ))
    })?;
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let c = (-min).max(0.0) + extra_shift;
    let shifted: Vec<f64> = eig.eigenvalues.iter().map(|l| l + c).collect();
    SpectralForm::from_eigenpairs(c, &shifted, &eig.eigenvectors)
}

/// Per-component scores `sum_i q_ir x_i`.
#[inline]
pub(crate) fn component_scores(q: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    for (r, s) in out.iter_mut().enumerate() {
        *s = q.column(r).iter().zip(x).map(|(a, b)| a * b).sum();
    }
}

fn eigen_log_weight(sf: &SpectralForm, delta: &[f64], x: &[f64], scores: &mut [f64]) -> f64 {
    component_scores(&sf.q, x, scores);
    let field: f64 = x.iter().zip(delta).map(|(a, b)| a * b).sum();
    let quad: f64 = sf
        .lambdas
        .iter()
        .zip(scores.iter())
        .map(|(l, s)| 0.5 * l * s * s)
        .sum();
    field + quad
}

/// `sum_i x_i delta_i + sum_r lambda_r (sum_i q_ir x_i)^2 / 2`.
///
/// Exceeds the conventional exponent by the constant `c n / 2`.
pub fn spectral_log_weight(sf: &SpectralForm, delta: &[f64], x: &BinaryConfig) -> Result<f64> {
    check_len("delta", sf.n(), delta.len())?;
    check_len("configuration", sf.n(), x.len())?;
    let mut scores = vec![0.0; sf.n()];
    Ok(eigen_log_weight(sf, delta, &x.as_f64(), &mut scores))
}

pub fn spectral_pmf(sf: &SpectralForm, delta: &[f64]) -> Result<Pmf> {
    let n = sf.n();
    check_len("delta", n, delta.len())?;
    let w = enumerate_log_weights(n, |x| {
        let mut scores = vec![0.0; n];
        eigen_log_weight(sf, delta, x, &mut scores)
    })?;
    Pmf::from_log_weights(n, w)
}
