//! Builds every representation of one model, computes each PMF along its own
//! route, and checks that they agree.
//!
//! The conventional table comes from pairwise couplings, the spectral one from
//! eigen-scores, the collider one from cause marginals times effect
//! acceptances, and the latent one from tensor quadrature over the induced
//! latent density. Routes without quadrature are compared by largest entrywise
//! gap; routes involving quadrature by total variation.

use std::fmt::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::collider::{conditioned_pmf, spectral_to_collider};
use crate::error::{Branch, Error, Result};
use crate::latent::{mirt_marginal_pmf, LatentForm, MAX_LATENT_DIM};
use crate::model::{ising_pmf, ModelSpec};
use crate::pmf::{pmf_distance, Pmf, PmfDistance};
use crate::quadrature::QuadratureRule;
use crate::spectral::{spectral_pmf, to_spectral, SpectralForm};

/// Largest model the verifier accepts.
pub const MAX_VERIFY_N: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Largest entrywise gap between enumeration-only routes.
    pub exact_max_abs: f64,
    /// Total variation allowed when one side uses quadrature.
    pub quadrature_tv: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            exact_max_abs: 1e-12,
            quadrature_tv: 1e-7,
        }
    }
}

/// Shifts the first main effect of one branch's private parameter copy.
/// Used to prove the comparisons are not vacuous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultInjection {
    pub branch: Branch,
    pub magnitude: f64,
}

impl FaultInjection {
    pub fn new(branch: Branch) -> Self {
        FaultInjection {
            branch,
            magnitude: 1e-6,
        }
    }

    fn apply(self, branch: Branch, delta: &mut [f64]) {
        if self.branch == branch {
            if let Some(d) = delta.first_mut() {
                *d += self.magnitude;
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub tolerances: Tolerances,
    pub extra_shift: f64,
    pub fault: Option<FaultInjection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchResult {
    pub branch: Branch,
    pub evaluated: bool,
    pub seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    pub a: Branch,
    pub b: Branch,
    pub distance: PmfDistance,
    /// `"max_abs"` or `"tv"`.
    pub metric: String,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub n: usize,
    pub rank: usize,
    pub quad_nodes: usize,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<FaultInjection>,
    pub branches: Vec<BranchResult>,
    pub pairs: Vec<PairResult>,
    pub passed: bool,
}

impl EquivalenceReport {
    pub fn pair(&self, a: Branch, b: Branch) -> Option<&PairResult> {
        self.pairs
            .iter()
            .find(|p| (p.a == a && p.b == b) || (p.a == b && p.b == a))
    }

    /// Plain-text summary, one line per pair.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "n = {}, spectral rank = {}, quadrature nodes = {}",
            self.n, self.rank, self.quad_nodes
        );
        for b in &self.branches {
            let status = if b.evaluated {
                format!("{:.3} ms", b.seconds * 1e3)
            } else {
                b.note.clone().unwrap_or_else(|| "not evaluated".into())
            };
            let _ = writeln!(out, "  branch {:<12} {status}", b.branch.name());
        }
        let _ = writeln!(
            out,
            "{:<27} {:>12} {:>12} {:>12} {:>10}  result",
            "pair", "tv", "max_abs", "kl", "tolerance"
        );
        for p in &self.pairs {
            let _ = writeln!(
                out,
                "{:<27} {:>12.3e} {:>12.3e} {:>12.3e} {:>10.0e}  {}",
                format!("{} vs {}", p.a.name(), p.b.name()),
                p.distance.tv,
                p.distance.max_abs,
                p.distance.kl,
                p.tolerance,
                if p.pass { "PASS" } else { "FAIL" }
            );
        }
        let _ = writeln!(out, "overall: {}", if self.passed { "PASS" } else { "FAIL" });
        out
    }
}

fn tag<T>(branch: Branch, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Branch {
        branch,
        source: Box::new(e),
    })
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> (Result<T>, f64) {
    let start = Instant::now();
    let r = f();
    (r, start.elapsed().as_secs_f64())
}

fn conventional_branch(spec: &ModelSpec, fault: Option<FaultInjection>) -> Result<Pmf> {
    let mut local = spec.clone();
    if let Some(f) = fault {
        f.apply(Branch::Conventional, local.delta_mut());
    }
    ising_pmf(&local)
}

fn spectral_branch(sf: &SpectralForm, delta: &[f64], fault: Option<FaultInjection>) -> Result<Pmf> {
    let mut local = delta.to_vec();
    if let Some(f) = fault {
        f.apply(Branch::Spectral, &mut local);
    }
    spectral_pmf(sf, &local)
}

fn collider_branch(sf: &SpectralForm, delta: &[f64], fault: Option<FaultInjection>) -> Result<Pmf> {
    let mut cf = spectral_to_collider(sf, delta)?;
    if let Some(f) = fault {
        f.apply(Branch::Collider, cf.delta_mut());
    }
    conditioned_pmf(&cf)
}

fn latent_branch(
    sf: &SpectralForm,
    delta: &[f64],
    rule: &QuadratureRule,
    fault: Option<FaultInjection>,
) -> Result<Pmf> {
    let mut lf = LatentForm::from_spectral(sf, delta)?;
    if let Some(f) = fault {
        f.apply(Branch::Latent, lf.delta_mut());
    }
    mirt_marginal_pmf(&lf, rule)
}

/// Computes all four PMFs of `spec` (the latent one only when the spectral
/// rank is at most three) and compares every pair.
pub fn verify_representations(
    spec: &ModelSpec,
    rule: &QuadratureRule,
    opts: &VerifyOptions,
) -> Result<EquivalenceReport> {
    let n = spec.n();
    if n > MAX_VERIFY_N {
        return Err(Error::TooLarge {
            n,
            max: MAX_VERIFY_N,
        });
    }
    let fault = opts.fault;
    let sf = tag(Branch::Spectral, to_spectral(spec, opts.extra_shift))?;
    let rank = sf.rank();
    let latent_on = rank <= MAX_LATENT_DIM;
    let delta = spec.delta();

    let ((conv, spec_pmf), (coll, latent)) = rayon::join(
        || {
            rayon::join(
                || timed(|| conventional_branch(spec, fault)),
                || timed(|| spectral_branch(&sf, delta, fault)),
            )
        },
        || {
            rayon::join(
                || timed(|| collider_branch(&sf, delta, fault)),
                || latent_on.then(|| timed(|| latent_branch(&sf, delta, rule, fault))),
            )
        },
    );

    let mut pmfs: Vec<(Branch, Pmf)> = Vec::with_capacity(4);
    let mut branches = Vec::with_capacity(4);
    for (branch, outcome) in [
        (Branch::Conventional, Some(conv)),
        (Branch::Spectral, Some(spec_pmf)),
        (Branch::Collider, Some(coll)),
        (Branch::Latent, latent),
    ] {
        match outcome {
            Some((r, seconds)) => {
                pmfs.push((branch, tag(branch, r)?));
                branches.push(BranchResult {
                    branch,
                    evaluated: true,
                    seconds,
                    note: None,
                });
            }
            None => branches.push(BranchResult {
                branch,
                evaluated: false,
                seconds: 0.0,
                note: Some(format!("not evaluated: rank {rank} exceeds {MAX_LATENT_DIM}")),
            }),
        }
    }

    let tol = opts.tolerances;
    let mut pairs = Vec::new();
    for (k, (a, pa)) in pmfs.iter().enumerate() {
        for (b, pb) in &pmfs[k + 1..] {
            let distance = pmf_distance(pa, pb)?;
            let quadrature = *a == Branch::Latent || *b == Branch::Latent;
            let (metric, value, tolerance) = if quadrature {
                ("tv", distance.tv, tol.quadrature_tv)
            } else {
                ("max_abs", distance.max_abs, tol.exact_max_abs)
            };
            pairs.push(PairResult {
                a: *a,
                b: *b,
                distance,
                metric: metric.into(),
                tolerance,
                pass: value <= tolerance,
            });
        }
    }
    let passed = pairs.iter().all(|p| p.pass);
    Ok(EquivalenceReport {
        n,
        rank,
        quad_nodes: rule.m(),
        tolerances: tol,
        fault,
        branches,
        pairs,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::curie_weiss_pmf;

    #[test]
    fn coupled_pair_passes_all_six() {
        let spec = ModelSpec::from_upper(vec![0.0, 0.0], &[1.0]).unwrap();
        let report = verify_representations(&spec, &QuadratureRule::default(), &VerifyOptions::default()).unwrap();
        assert_eq!(report.rank, 1);
        assert_eq!(report.pairs.len(), 6);
        assert!(report.passed, "{}", report.to_table());
        let cw = curie_weiss_pmf(2, &[0.0, 0.0]).unwrap();
        assert!((cw.prob(0) - (2f64.exp() / (2.0 * 2f64.exp() + 2.0))).abs() < 1e-6);
    }

    #[test]
    fn independent_model_agrees_exactly() {
        let spec = ModelSpec::independent(vec![0.0; 3]);
        let report = verify_representations(&spec, &QuadratureRule::default(), &VerifyOptions::default()).unwrap();
        assert_eq!(report.rank, 0);
        assert!(report.passed);
        for p in &report.pairs {
            assert!(p.distance.max_abs < 1e-15, "{p:?}");
        }
    }

    #[test]
    fn high_rank_skips_latent() {
        // alternating couplings on five variables leave four positive eigenvalues
        let mut upper = Vec::new();
        for i in 0..5 {
            for j in i + 1..5 {
                upper.push(if (i + j) % 2 == 0 { 0.6 } else { -0.35 } + 0.05 * (i * j) as f64);
            }
        }
        let spec = ModelSpec::from_upper(vec![0.1, 0.2, -0.1, 0.0, 0.3], &upper).unwrap();
        let report = verify_representations(&spec, &QuadratureRule::default(), &VerifyOptions::default()).unwrap();
        assert!(report.rank > 3);
        assert_eq!(report.pairs.len(), 3);
        assert!(report.passed);
        let latent = &report.branches[3];
        assert!(!latent.evaluated);
        assert!(latent.note.as_deref().unwrap().starts_with("not evaluated"));
    }

    #[test]
    fn injected_faults_are_caught() {
        let spec = ModelSpec::from_upper(vec![0.2, -0.1, 0.3], &[0.5, -0.4, 0.3]).unwrap();
        for branch in Branch::ALL {
            let opts = VerifyOptions {
                fault: Some(FaultInjection::new(branch)),
                ..VerifyOptions::default()
            };
            let report = verify_representations(&spec, &QuadratureRule::default(), &opts).unwrap();
            assert!(!report.passed, "fault in {branch} went unnoticed");
            for p in &report.pairs {
                let touched = p.a == branch || p.b == branch;
                assert_eq!(p.pass, !touched, "{branch}: {p:?}");
            }
        }
    }

    #[test]
    fn distances_are_symmetric() {
        let spec = ModelSpec::from_upper(vec![0.2, -0.1, 0.3], &[0.5, -0.4, 0.3]).unwrap();
        let a = ising_pmf(&spec).unwrap();
        let b = crate::collider::cause_marginal_pmf(spec.delta()).unwrap();
        let ab = pmf_distance(&a, &b).unwrap();
        let ba = pmf_distance(&b, &a).unwrap();
        assert_eq!(ab.tv, ba.tv);
        assert_eq!(ab.max_abs, ba.max_abs);
        assert_eq!(pmf_distance(&a, &a).unwrap().tv, 0.0);
    }

    #[test]
    fn oversized_model_rejected() {
        let spec = ModelSpec::independent(vec![0.0; 13]);
        let err = verify_representations(&spec, &QuadratureRule::default(), &VerifyOptions::default()).unwrap_err();
        assert!(err.is_limit());
    }
}
