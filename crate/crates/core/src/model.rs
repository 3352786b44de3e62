//! Network-form parameters and the exact conventional and Curie-Weiss PMFs.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::io::ModelSpecFile;
use crate::pmf::{enumerate_log_weights, Pmf};

/// Entries of `sigma` may differ from their transposes by at most this much.
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Main effects `delta` and the symmetric coupling matrix `sigma`.
///
/// The diagonal of `sigma` is stored but never affects a probability.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelSpecFile", try_from = "ModelSpecFile")]
pub struct ModelSpec {
    delta: Vec<f64>,
    /// Row-major `n x n`.
    sigma: Vec<f64>,
}

impl ModelSpec {
    /// Validates dimensions, finiteness, and symmetry (to [`SYMMETRY_TOLERANCE`]).
    /// Near-symmetric input is averaged with its transpose.
    pub fn new(delta: Vec<f64>, sigma: Vec<Vec<f64>>) -> Result<Self> {
        let n = delta.len();
        check_len("sigma rows", n, sigma.len())?;
        for (i, row) in sigma.iter().enumerate() {
            if row.len() != n {
                return Err(Error::invalid(
                    format!("sigma[{i}]"),
                    format!("row has {} entries, expected {n}", row.len()),
                ));
            }
        }
        if let Some(i) = delta.iter().position(|d| !d.is_finite()) {
            return Err(Error::invalid(format!("delta[{i}]"), "not finite"));
        }
        let mut flat = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let (a, b) = (sigma[i][j], sigma[j][i]);
                if !a.is_finite() {
                    return Err(Error::invalid(format!("sigma[{i}][{j}]"), "not finite"));
                }
                if (a - b).abs() > SYMMETRY_TOLERANCE {
                    return Err(Error::invalid(
                        format!("sigma[{i}][{j}]"),
                        format!("asymmetric: sigma[{i}][{j}] = {a} but sigma[{j}][{i}] = {b}"),
                    ));
                }
                flat.push(if i == j { a } else { 0.5 * (a + b) });
            }
        }
        Ok(ModelSpec { delta, sigma: flat })
    }

    /// Builds a spec from `delta` and the strict upper triangle in row order
    /// `(0,1), (0,2), .., (1,2), ..`. The diagonal is zero.
    pub fn from_upper(delta: Vec<f64>, upper: &[f64]) -> Result<Self> {
        let n = delta.len();
        check_len("upper triangle", n * n.saturating_sub(1) / 2, upper.len())?;
        let mut sigma = vec![vec![0.0; n]; n];
        let mut it = upper.iter();
        for i in 0..n {
            for j in i + 1..n {
                let v = *it.next().expect("length checked");
                sigma[i][j] = v;
                sigma[j][i] = v;
            }
        }
        ModelSpec::new(delta, sigma)
    }

    /// Independent variables: no couplings.
    pub fn independent(delta: Vec<f64>) -> Self {
        let n = delta.len();
        ModelSpec {
            delta,
            sigma: vec![0.0; n * n],
        }
    }

    /// Every off-diagonal coupling equal to one.
    pub fn curie_weiss(delta: Vec<f64>) -> Self {
        let n = delta.len();
        let sigma = (0..n * n)
            .map(|k| if k / n == k % n { 0.0 } else { 1.0 })
            .collect();
        ModelSpec { delta, sigma }
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

    #[inline]
    pub fn sigma(&self, i: usize, j: usize) -> f64 {
        self.sigma[i * self.n() + j]
    }

    /// Sets `sigma[i][j]` and `sigma[j][i]`.
    pub fn set_sigma(&mut self, i: usize, j: usize, value: f64) {
        let n = self.n();
        self.sigma[i * n + j] = value;
        self.sigma[j * n + i] = value;
    }

    pub fn sigma_rows(&self) -> Vec<Vec<f64>> {
        self.sigma.chunks(self.n().max(1)).map(<[f64]>::to_vec).collect()
    }

    /// Strict upper triangle in the order used by [`ModelSpec::from_upper`].
    pub fn upper(&self) -> Vec<f64> {
        let n = self.n();
        let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                out.push(self.sigma(i, j));
            }
        }
        out
    }

    pub fn has_nonzero_diagonal(&self) -> bool {
        (0..self.n()).any(|i| self.sigma(i, i) != 0.0)
    }

    pub fn with_zero_diagonal(&self) -> ModelSpec {
        let mut out = self.clone();
        for i in 0..self.n() {
            out.sigma[i * self.n() + i] = 0.0;
        }
        out
    }

    /// Adds `shift[i]` to each diagonal entry.
    pub fn with_diagonal_shift(&self, shift: &[f64]) -> Result<ModelSpec> {
        check_len("diagonal shift", self.n(), shift.len())?;
        let mut out = self.clone();
        for (i, s) in shift.iter().enumerate() {
            out.sigma[i * self.n() + i] += s;
        }
        Ok(out)
    }

    /// Coupling matrix with a zeroed diagonal.
    pub fn coupling_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { self.sigma(i, j) })
    }

    /// Relabels variables so that new variable `i` is old variable `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<ModelSpec> {
        check_len("permutation", self.n(), perm.len())?;
        let n = self.n();
        let delta = perm.iter().map(|&p| self.delta[p]).collect();
        let sigma = (0..n * n)
            .map(|k| self.sigma(perm[k / n], perm[k % n]))
            .collect();
        Ok(ModelSpec { delta, sigma })
    }
}

/// A vector of ±1 values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BinaryConfig(Vec<i8>);

impl BinaryConfig {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| *v != 1 && *v != -1) {
            return Err(Error::invalid(
                format!("x[{i}]"),
                format!("{} is not +1 or -1", values[i]),
            ));
        }
        Ok(BinaryConfig(values))
    }

    /// Configuration `index` of `n` variables: bit `i` set means `x_i = +1`.
    pub fn from_index(n: usize, index: usize) -> Self {
        BinaryConfig(
            (0..n)
                .map(|i| if (index >> i) & 1 == 1 { 1 } else { -1 })
                .collect(),
        )
    }

    pub fn index(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, v)| **v == 1)
            .fold(0, |acc, (i, _)| acc | (1 << i))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&v| f64::from(v)).collect()
    }
}

/// `sum_i x_i delta_i + sum_{i<j} x_i x_j sigma_ij`, evaluated on ±1.0 values.
#[inline]
pub(crate) fn pairwise_log_weight(spec: &ModelSpec, x: &[f64]) -> f64 {
    let n = spec.n();
    let mut total = 0.0;
    for i in 0..n {
        total += x[i] * spec.delta[i];
        let row = &spec.sigma[i * n..(i + 1) * n];
        let mut field = 0.0;
        for j in i + 1..n {
            field += row[j] * x[j];
        }
        total += x[i] * field;
    }
    total
}

/// Unnormalized log-probability of `x` under the conventional Ising form.
pub fn ising_log_weight(spec: &ModelSpec, x: &BinaryConfig) -> Result<f64> {
    check_len("configuration", spec.n(), x.len())?;
    Ok(pairwise_log_weight(spec, &x.as_f64()))
}

/// The same exponent through `x'delta + x'Sx / 2` with the diagonal zeroed.
pub fn matrix_form_log_weight(spec: &ModelSpec, x: &BinaryConfig) -> Result<f64> {
    check_len("configuration", spec.n(), x.len())?;
    let xs = nalgebra::DVector::from_vec(x.as_f64());
    let delta = nalgebra::DVector::from_column_slice(spec.delta());
    let s = spec.coupling_matrix();
    Ok(xs.dot(&delta) + 0.5 * (xs.transpose() * s * &xs)[(0, 0)])
}

/// Exact conventional Ising PMF by enumeration.
pub fn ising_pmf(spec: &ModelSpec) -> Result<Pmf> {
    let n = spec.n();
    let w = enumerate_log_weights(n, |x| pairwise_log_weight(spec, x))?;
    Pmf::from_log_weights(n, w)
}

/// Exact Curie-Weiss PMF: weight `exp(sum_i x_i delta_i + (sum_i x_i)^2 / 2)`.
pub fn curie_weiss_pmf(n: usize, delta: &[f64]) -> Result<Pmf> {
    check_len("delta", n, delta.len())?;
    let w = enumerate_log_weights(n, |x| {
        let mut field = 0.0;
        let mut s = 0.0;
        for (xi, di) in x.iter().zip(delta) {
            field += xi * di;
            s += xi;
        }
        field + 0.5 * s * s
    })?;
    Pmf::from_log_weights(n, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pmf::pmf_distance;
    use proptest::prelude::*;

    fn two(delta: [f64; 2], s12: f64) -> ModelSpec {
        ModelSpec::from_upper(delta.to_vec(), &[s12]).unwrap()
    }

    fn cfg(v: &[i8]) -> BinaryConfig {
        BinaryConfig::new(v.to_vec()).unwrap()
    }

    #[test]
    fn log_weight_examples() {
        let ln2 = 2f64.ln();
        assert_eq!(ising_log_weight(&two([0.0, 0.0], 0.0), &cfg(&[1, 1])).unwrap(), 0.0);
        let w = ising_log_weight(&two([0.0, 0.0], ln2), &cfg(&[1, 1])).unwrap();
        assert!((w - ln2).abs() < 1e-15);
        assert_eq!(ising_log_weight(&two([1.0, -1.0], 0.0), &cfg(&[1, 1])).unwrap(), 0.0);
    }

    #[test]
    fn log_weight_rejects_wrong_length() {
        let err = ising_log_weight(&two([0.0, 0.0], 0.0), &cfg(&[1, 1, 1])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 2, found: 3, .. }));
    }

    #[test]
    fn binary_config_validation_and_indexing() {
        assert!(BinaryConfig::new(vec![1, 0]).is_err());
        let x = cfg(&[1, -1, 1]);
        assert_eq!(x.index(), 0b101);
        assert_eq!(BinaryConfig::from_index(3, 0b101), x);
    }

    #[test]
    fn asymmetric_sigma_is_rejected_with_indices() {
        let err = ModelSpec::new(vec![0.0, 0.0], vec![vec![0.0, 1.0], vec![0.5, 0.0]]).unwrap_err();
        assert!(err.to_string().contains("sigma[0][1]"), "{err}");
    }

    #[test]
    fn ising_pmf_examples() {
        let uniform = ising_pmf(&two([0.0, 0.0], 0.0)).unwrap();
        for p in uniform.probs() {
            assert!((p - 0.25).abs() < 1e-15);
        }

        let coupled = ising_pmf(&two([0.0, 0.0], 2f64.ln())).unwrap();
        let expected = [0.4, 0.1, 0.1, 0.4];
        for (p, e) in coupled.probs().iter().zip(expected) {
            assert!((p - e).abs() < 1e-15, "{p} vs {e}");
        }
        assert!((coupled.log_z() - 5f64.ln()).abs() < 1e-14);

        let single = ising_pmf(&ModelSpec::independent(vec![0.5 * 3f64.ln()])).unwrap();
        assert!((single.prob(1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn ising_pmf_rejects_oversized_models() {
        let spec = ModelSpec::independent(vec![0.0; 21]);
        assert!(matches!(ising_pmf(&spec), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn curie_weiss_examples() {
        let e2 = 2f64.exp();
        let pmf = curie_weiss_pmf(2, &[0.0, 0.0]).unwrap();
        let same = e2 / (2.0 * e2 + 2.0);
        let mixed = 1.0 / (2.0 * e2 + 2.0);
        for (p, e) in pmf.probs().iter().zip([same, mixed, mixed, same]) {
            assert!((p - e).abs() < 1e-15);
        }
        // the pair table rounds to 0.4404 / 0.0596
        assert!((same - 0.4404).abs() < 5e-5);
        assert!((mixed - 0.0596).abs() < 5e-5);

        assert!((curie_weiss_pmf(1, &[0.0]).unwrap().prob(1) - 0.5).abs() < 1e-15);

        let pmf = curie_weiss_pmf(3, &[0.0; 3]).unwrap();
        let z = 2.0 * 4.5f64.exp() + 6.0 * 0.5f64.exp();
        for k in 0..8 {
            let expected = if k == 0 || k == 7 { 4.5f64.exp() } else { 0.5f64.exp() } / z;
            assert!((pmf.prob(k) - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn curie_weiss_is_the_equal_coupling_ising_model() {
        let delta = vec![0.3, -0.7, 0.1, 0.9, -0.2];
        let cw = curie_weiss_pmf(5, &delta).unwrap();
        let ising = ising_pmf(&ModelSpec::curie_weiss(delta)).unwrap();
        assert!(pmf_distance(&cw, &ising).unwrap().max_abs < 1e-12);
    }

    fn arb_spec(max_n: usize) -> impl Strategy<Value = ModelSpec> {
        (1..=max_n).prop_flat_map(|n| {
            (
                prop::collection::vec(-1.0f64..1.0, n),
                prop::collection::vec(-1.0f64..1.0, n * (n - 1) / 2),
            )
                .prop_map(|(d, u)| ModelSpec::from_upper(d, &u).unwrap())
        })
    }

    proptest! {
        #[test]
        fn diagonal_never_matters(spec in arb_spec(7), shift in prop::collection::vec(-5.0f64..5.0, 7)) {
            let shifted = spec.with_diagonal_shift(&shift[..spec.n()]).unwrap();
            let a = ising_pmf(&spec).unwrap();
            let b = ising_pmf(&shifted).unwrap();
            prop_assert!(pmf_distance(&a, &b).unwrap().max_abs < 1e-12);
        }

        #[test]
        fn normalized_and_consistent_with_log_z(spec in arb_spec(8)) {
            let pmf = ising_pmf(&spec).unwrap();
            prop_assert!((pmf.total() - 1.0).abs() < 1e-12);
            for k in 0..pmf.len() {
                let w = ising_log_weight(&spec, &BinaryConfig::from_index(spec.n(), k)).unwrap();
                prop_assert!(pmf.prob(k) >= 0.0);
                prop_assert!((pmf.prob(k) - (w - pmf.log_z()).exp()).abs() < 1e-12);
            }
        }

        #[test]
        fn pair_sum_matches_matrix_form(spec in arb_spec(8), k in 0usize..256) {
            let x = BinaryConfig::from_index(spec.n(), k % (1 << spec.n()));
            let a = ising_log_weight(&spec, &x).unwrap();
            let b = matrix_form_log_weight(&spec, &x).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn relabelling_permutes_the_table(spec in arb_spec(6), seed in any::<u64>()) {
            let n = spec.n();
            let mut perm: Vec<usize> = (0..n).collect();
            // Fisher-Yates driven by the seed
            let mut s = seed;
            for i in (1..n).rev() {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                perm.swap(i, (s >> 33) as usize % (i + 1));
            }
            let direct = ising_pmf(&spec.permuted(&perm).unwrap()).unwrap();
            let reindexed = ising_pmf(&spec).unwrap().permuted(&perm).unwrap();
            prop_assert!(pmf_distance(&direct, &reindexed).unwrap().max_abs < 1e-12);
        }
    }
}
