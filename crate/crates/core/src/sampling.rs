//! Four ways to draw configurations: inverse-CDF on an exact table, Gibbs
//! sweeps on the network form, rejection through the collider's effects, and
//! latent score first then items.
//!
//! Every sampler owns a `ChaCha8Rng` seeded with `seed_from_u64(seed)`, so the
//! method, seed, and parameters fully determine the draws.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::collider::{cause_marginal_pmf, ColliderForm};
use crate::error::{Error, Result};
use crate::latent::{item_prob, latent_grid, LatentForm, MASS_TOLERANCE};
use crate::model::ModelSpec;
use crate::pmf::{check_enumerable, enumerate_log_weights, Pmf, MAX_ENUMERATION_N};
use crate::quadrature::QuadratureRule;

pub const DEFAULT_BURN_IN: u64 = 1_000;
pub const DEFAULT_THIN: u64 = 1;
/// The rejection sampler checks its acceptance rate every this many proposals.
pub const PROBE_WINDOW: u64 = 1_000_000;
/// Below this acceptance rate the rejection sampler gives up.
pub const MIN_ACCEPTANCE_RATE: f64 = 1e-6;
/// Rejection runs whose projected proposal count exceeds this are abandoned.
pub const MAX_PROPOSALS: f64 = 1e10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplingMethod {
    Exact,
    Gibbs,
    ColliderRejection,
    LatentFirst,
}

impl SamplingMethod {
    pub fn name(self) -> &'static str {
        match self {
            SamplingMethod::Exact => "exact",
            SamplingMethod::Gibbs => "gibbs",
            SamplingMethod::ColliderRejection => "collider-rejection",
            SamplingMethod::LatentFirst => "latent-first",
        }
    }
}

/// Method-specific counters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub burn_in: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thin: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub proposals: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accepted: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quad_nodes: Option<usize>,
}

/// Draws stored row-major, one row of ±1 values per draw.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    n: usize,
    draws: Vec<i8>,
    seed: u64,
    method: SamplingMethod,
    meta: SampleMeta,
}

/// JSON sidecar written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSidecar {
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub method: SamplingMethod,
    pub meta: SampleMeta,
}

impl SampleSet {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of draws.
    pub fn m(&self) -> usize {
        if self.n == 0 {
            0
        } else {
            self.draws.len() / self.n
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn method(&self) -> SamplingMethod {
        self.method
    }

    pub fn meta(&self) -> &SampleMeta {
        &self.meta
    }

    pub fn row(&self, k: usize) -> &[i8] {
        &self.draws[k * self.n..(k + 1) * self.n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.draws.chunks(self.n.max(1))
    }

    /// Configuration index of draw `k` (bit `i` set when `x_i = +1`).
    pub fn index(&self, k: usize) -> usize {
        row_index(self.row(k))
    }

    /// Draw counts per configuration index.
    pub fn counts(&self) -> Result<Vec<u64>> {
        check_enumerable(self.n)?;
        let mut counts = vec![0u64; 1 << self.n];
        for row in self.rows() {
            counts[row_index(row)] += 1;
        }
        Ok(counts)
    }

    /// Relative frequencies as a table; `log_z` is the log of the draw count.
    pub fn empirical_pmf(&self) -> Result<Pmf> {
        let counts = self.counts()?;
        Pmf::from_masses(self.n, counts.into_iter().map(|c| c as f64).collect())
    }

    pub fn sidecar(&self) -> SampleSidecar {
        SampleSidecar {
            n: self.n,
            m: self.m(),
            seed: self.seed,
            method: self.method,
            meta: self.meta.clone(),
        }
    }

    /// Header `x_1,..,x_n`, one `+1`/`-1` row per draw, LF endings.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let header: Vec<String> = (1..=self.n).map(|i| format!("x_{i}")).collect();
        writeln!(out, "{}", header.join(","))?;
        let mut line = String::with_capacity(3 * self.n);
        for row in self.rows() {
            line.clear();
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                line.push_str(if *v == 1 { "+1" } else { "-1" });
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn write_sidecar<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, &self.sidecar())?;
        writeln!(out)?;
        Ok(())
    }

    /// Reads draws back from CSV together with the sidecar that describes them.
    pub fn read_csv<R: Read>(input: R, sidecar: SampleSidecar) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().from_reader(input);
        let n = reader.headers()?.len();
        if n != sidecar.n {
            return Err(Error::DimensionMismatch {
                what: "sample columns",
                expected: sidecar.n,
                found: n,
            });
        }
        let mut draws = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record?;
            for (i, field) in record.iter().enumerate() {
                draws.push(parse_spin(field.trim()).ok_or_else(|| {
                    Error::invalid(format!("row {} column x_{}", line + 1, i + 1), format!("{field:?} is not +1 or -1"))
                })?);
            }
        }
        Ok(SampleSet {
            n,
            draws,
            seed: sidecar.seed,
            method: sidecar.method,
            meta: sidecar.meta,
        })
    }
}

pub(crate) fn parse_spin(field: &str) -> Option<i8> {
    match field {
        "+1" | "1" | "1.0" | "+1.0" => Some(1),
        "-1" | "-1.0" => Some(-1),
        _ => None,
    }
}

#[inline]
fn row_index(row: &[i8]) -> usize {
    row.iter()
        .enumerate()
        .filter(|(_, v)| **v == 1)
        .fold(0, |acc, (i, _)| acc | (1 << i))
}

fn check_count(m: usize) -> Result<()> {
    if m == 0 {
        Err(Error::invalid("m", "need at least one draw"))
    } else {
        Ok(())
    }
}

#[inline]
fn spin(p_plus: f64, rng: &mut ChaCha8Rng) -> i8 {
    if rng.random::<f64>() < p_plus {
        1
    } else {
        -1
    }
}

/// Inverse-CDF over index `k` of a cumulative table.
#[inline]
fn invert(cdf: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u = rng.random::<f64>() * cdf[cdf.len() - 1];
    cdf.partition_point(|c| *c <= u).min(cdf.len() - 1)
}

fn cumulative(probs: impl Iterator<Item = f64>) -> Vec<f64> {
    probs
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect()
}

/// I.i.d. draws from an enumerated table.
pub fn sample_exact(pmf: &Pmf, m: usize, seed: u64) -> Result<SampleSet> {
    check_count(m)?;
    let n = pmf.n();
    let cdf = cumulative(pmf.probs().iter().copied());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(m * n);
    for _ in 0..m {
        let k = invert(&cdf, &mut rng);
        draws.extend((0..n).map(|i| if (k >> i) & 1 == 1 { 1i8 } else { -1 }));
    }
    Ok(SampleSet {
        n,
        draws,
        seed,
        method: SamplingMethod::Exact,
        meta: SampleMeta::default(),
    })
}

/// `P(x_i = +1 | rest)` for a local field `delta_i + sum_{j != i} sigma_ij x_j`.
#[inline]
pub fn gibbs_conditional(field: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * field).exp())
}

/// Systematic-scan Gibbs sampler; one recorded draw every `thin` sweeps after
/// `burn_in` sweeps. The chain starts from fair coin flips.
pub fn sample_gibbs(spec: &ModelSpec, m: usize, burn_in: u64, thin: u64, seed: u64) -> Result<SampleSet> {
    check_count(m)?;
    if thin == 0 {
        return Err(Error::invalid("thin", "must be at least 1"));
    }
    let n = spec.n();
    let sigma: Vec<f64> = (0..n * n)
        .map(|k| if k / n == k % n { 0.0 } else { spec.sigma(k / n, k % n) })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state: Vec<f64> = (0..n).map(|_| f64::from(spin(0.5, &mut rng))).collect();
    let sweep = |state: &mut [f64], rng: &mut ChaCha8Rng| {
        for i in 0..n {
            let row = &sigma[i * n..(i + 1) * n];
            let field = spec.delta()[i] + row.iter().zip(state.iter()).map(|(s, x)| s * x).sum::<f64>();
            state[i] = f64::from(spin(gibbs_conditional(field), rng));
        }
    };
    for _ in 0..burn_in {
        sweep(&mut state, &mut rng);
    }
    let mut draws = Vec::with_capacity(m * n);
    for _ in 0..m {
        for _ in 0..thin {
            sweep(&mut state, &mut rng);
        }
        draws.extend(state.iter().map(|v| *v as i8));
    }
    Ok(SampleSet {
        n,
        draws,
        seed,
        method: SamplingMethod::Gibbs,
        meta: SampleMeta {
            burn_in: Some(burn_in),
            thin: Some(thin),
            ..SampleMeta::default()
        },
    })
}

/// Draws independent causes and keeps them when every effect turns out present.
/// Accepted draws are exact samples of the conditioned distribution.
pub fn sample_collider_rejection(cf: &ColliderForm, m: usize, seed: u64) -> Result<SampleSet> {
    check_count(m)?;
    let n = cf.n();
    let p_plus: Vec<f64> = cf.delta().iter().map(|d| gibbs_conditional(*d)).collect();
    // When the configurations fit in a table, a proposal is one inverse-CDF
    // draw from the independent causes and a lookup of its acceptance.
    let table = if n <= MAX_ENUMERATION_N {
        let accept: Vec<f64> = enumerate_log_weights(n, |x| cf.log_all_present(x))?
            .into_iter()
            .map(f64::exp)
            .collect();
        let cdf = cumulative(cause_marginal_pmf(cf.delta())?.probs().iter().copied());
        Some((cdf, accept))
    } else {
        None
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = vec![0i8; n];
    let mut xf = vec![0.0; n];
    let mut draws = Vec::with_capacity(m * n);
    let (mut proposals, mut accepted) = (0u64, 0u64);
    while (accepted as usize) < m {
        let accept = match &table {
            Some((cdf, accept)) => {
                let k = invert(cdf, &mut rng);
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi = if (k >> i) & 1 == 1 { 1 } else { -1 };
                }
                accept[k]
            }
            None => {
                for ((xi, v), p) in x.iter_mut().zip(xf.iter_mut()).zip(&p_plus) {
                    *xi = spin(*p, &mut rng);
                    *v = f64::from(*xi);
                }
                cf.log_all_present(&xf).exp()
            }
        };
        proposals += 1;
        if rng.random::<f64>() < accept {
            accepted += 1;
            draws.extend_from_slice(&x);
        }
        if proposals % PROBE_WINDOW == 0 {
            let rate = accepted as f64 / proposals as f64;
            if rate < MIN_ACCEPTANCE_RATE || m as f64 / rate > MAX_PROPOSALS {
                return Err(Error::ConditioningTooSevere {
                    proposals,
                    accepted,
                    rate,
                });
            }
        }
    }
    Ok(SampleSet {
        n,
        draws,
        seed,
        method: SamplingMethod::ColliderRejection,
        meta: SampleMeta {
            proposals: Some(proposals),
            accepted: Some(accepted),
            acceptance_rate: Some(accepted as f64 / proposals as f64),
            ..SampleMeta::default()
        },
    })
}

/// Draws a latent score from the induced density on the quadrature grid, then
/// items independently given it. Only one latent dimension is supported.
pub fn sample_latent_first(lf: &LatentForm, rule: &QuadratureRule, m: usize, seed: u64) -> Result<SampleSet> {
    check_count(m)?;
    if lf.r() > 1 {
        return Err(Error::UnsupportedDimension { r: lf.r(), max: 1 });
    }
    let n = lf.n();
    let (grid, edge) = latent_grid(lf, rule)?;
    if edge > MASS_TOLERANCE {
        return Err(Error::QuadratureUnderResolved { deviation: edge });
    }
    let cdf = cumulative(grid.iter().map(|(_, mass)| *mass));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(m * n);
    for _ in 0..m {
        let theta = &grid[invert(&cdf, &mut rng)].0;
        for i in 0..n {
            draws.push(spin(item_prob(1.0, lf.predictor(i, theta)), &mut rng));
        }
    }
    Ok(SampleSet {
        n,
        draws,
        seed,
        method: SamplingMethod::LatentFirst,
        meta: SampleMeta {
            quad_nodes: Some(rule.m()),
            ..SampleMeta::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collider::{conditioned_pmf, ColliderForm};
    use crate::model::ising_pmf;

    #[test]
    fn degenerate_table_repeats_one_configuration() {
        let mut masses = vec![0.0; 8];
        masses[5] = 1.0;
        let pmf = Pmf::from_masses(3, masses).unwrap();
        let s = sample_exact(&pmf, 500, 3).unwrap();
        assert!((0..s.m()).all(|k| s.index(k) == 5));
    }

    #[test]
    fn uniform_frequencies_within_binomial_bound() {
        let pmf = Pmf::from_masses(2, vec![1.0; 4]).unwrap();
        let s = sample_exact(&pmf, 40_000, 11).unwrap();
        let bound = 4.0 * (0.25f64 * 0.75 / 40_000.0).sqrt();
        for c in s.counts().unwrap() {
            assert!((c as f64 / 40_000.0 - 0.25).abs() < bound);
        }
    }

    #[test]
    fn same_seed_same_draws() {
        let pmf = ising_pmf(&ModelSpec::from_upper(vec![0.1, -0.2, 0.3], &[0.5, -0.4, 0.2]).unwrap()).unwrap();
        assert_eq!(sample_exact(&pmf, 1000, 42).unwrap(), sample_exact(&pmf, 1000, 42).unwrap());
        assert_ne!(sample_exact(&pmf, 1000, 42).unwrap(), sample_exact(&pmf, 1000, 43).unwrap());
    }

    #[test]
    fn zero_draws_rejected() {
        let spec = ModelSpec::independent(vec![0.0; 2]);
        assert!(sample_gibbs(&spec, 0, 10, 1, 1).is_err());
        assert!(sample_gibbs(&spec, 10, 10, 0, 1).is_err());
        assert!(sample_exact(&ising_pmf(&spec).unwrap(), 0, 1).is_err());
    }

    #[test]
    fn gibbs_full_conditional() {
        assert_eq!(gibbs_conditional(0.0), 0.5);
        assert!((gibbs_conditional(0.5 * 3f64.ln()) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn gibbs_coupled_pair() {
        let spec = ModelSpec::from_upper(vec![0.0, 0.0], &[2f64.ln()]).unwrap();
        let s = sample_gibbs(&spec, 50_000, 1_000, 1, 5).unwrap();
        let p = s.empirical_pmf().unwrap();
        assert!((p.prob(3) - 0.4).abs() < 0.01);
        assert_eq!(s.meta().burn_in, Some(1_000));
    }

    #[test]
    fn rejection_without_effects_accepts_everything() {
        let cf = ColliderForm::new(vec![0.3, -0.3], vec![]).unwrap();
        let s = sample_collider_rejection(&cf, 1000, 9).unwrap();
        assert_eq!(s.meta().proposals, Some(1000));
        assert_eq!(s.meta().acceptance_rate, Some(1.0));
    }

    #[test]
    fn simple_collider_acceptance_rate() {
        let cf = ColliderForm::simple(vec![0.0, 0.0]);
        let s = sample_collider_rejection(&cf, 50_000, 21).unwrap();
        let expected = 0.25 * (2.0 + 2.0 * (-2f64).exp());
        assert!((expected - 0.567668).abs() < 1e-6);
        assert!((s.meta().acceptance_rate.unwrap() - expected).abs() < 0.01);

        let target = conditioned_pmf(&cf).unwrap();
        let counts = s.counts().unwrap();
        for (c, p) in counts.iter().zip(target.probs()) {
            let sd = (p * (1.0 - p) / 50_000.0).sqrt();
            assert!((*c as f64 / 50_000.0 - p).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn severe_conditioning_is_reported() {
        // causes lean to -1, but the effect needs half of them at +1
        let q: Vec<f64> = (0..12).map(|i| if i < 6 { 0.5 } else { -0.5 }).collect();
        let cf = ColliderForm::new(
            vec![-3.0; 12],
            vec![crate::collider::Effect::new(40.0, q).unwrap()],
        )
        .unwrap();
        assert!(matches!(
            sample_collider_rejection(&cf, 10, 1),
            Err(Error::ConditioningTooSevere { .. })
        ));
    }

    #[test]
    fn latent_first_curie_weiss_pair() {
        let lf = LatentForm::rasch(vec![0.0, 0.0]);
        let rule = QuadratureRule::default();
        let s = sample_latent_first(&lf, &rule, 50_000, 8).unwrap();
        assert!((s.empirical_pmf().unwrap().prob(3) - (2f64.exp() / (2.0 * 2f64.exp() + 2.0))).abs() < 0.01);
        assert_eq!(s, sample_latent_first(&lf, &rule, 50_000, 8).unwrap());
    }

    #[test]
    fn latent_first_zero_loadings_are_coins() {
        let lf = LatentForm::new(vec![0.5 * 3f64.ln(), 0.0], vec![vec![0.0], vec![0.0]]).unwrap();
        let s = sample_latent_first(&lf, &QuadratureRule::default(), 40_000, 2).unwrap();
        let means = s.empirical_pmf().unwrap().means();
        assert!((means[0] - 0.5).abs() < 0.02);
        assert!(means[1].abs() < 0.02);
    }

    #[test]
    fn latent_first_rejects_two_dimensions() {
        let lf = LatentForm::new(vec![0.0; 2], vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert!(matches!(
            sample_latent_first(&lf, &QuadratureRule::default(), 10, 1),
            Err(Error::UnsupportedDimension { r: 2, max: 1 })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let pmf = ising_pmf(&ModelSpec::from_upper(vec![0.2, 0.0, -0.1], &[0.3, 0.3, 0.3]).unwrap()).unwrap();
        let s = sample_exact(&pmf, 25, 4).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x_1,x_2,x_3\n"));
        assert!(!text.contains('\r'));
        let back = SampleSet::read_csv(&buf[..], s.sidecar()).unwrap();
        assert_eq!(back, s);
    }
}
