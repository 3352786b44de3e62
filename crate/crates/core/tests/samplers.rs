mod common;

use ising_trinity::{
    conditioned_pmf, ising_pmf, pmf_distance, sample_collider_rejection, sample_exact,
    sample_gibbs, sample_latent_first, spectral_to_collider, to_spectral, ColliderForm,
    Error, LatentForm, QuadratureRule, SampleSet,
};

fn tv(a: &SampleSet, b: &SampleSet) -> f64 {
    pmf_distance(&a.empirical_pmf().unwrap(), &b.empirical_pmf().unwrap())
        .unwrap()
        .tv
}

#[test]
fn all_samplers_agree_on_a_rank_one_model() {
    let mut rng = common::rng(11);
    let spec = common::low_rank_spec(&mut rng, 5, 1, 0.7);
    let m = 60_000;
    let truth = ising_pmf(&spec).unwrap();
    let sf = to_spectral(&spec, 0.0).unwrap();
    let cf = spectral_to_collider(&sf, spec.delta()).unwrap();
    let lf = LatentForm::from_spectral(&sf, spec.delta()).unwrap();
    assert_eq!(lf.r(), 1);

    let sets = [
        sample_exact(&truth, m, 1).unwrap(),
        sample_gibbs(&spec, m, 1_000, 1, 2).unwrap(),
        sample_collider_rejection(&cf, m, 3).unwrap(),
        sample_latent_first(&lf, &QuadratureRule::default(), m, 4).unwrap(),
    ];
    for s in &sets {
        let d = pmf_distance(&s.empirical_pmf().unwrap(), &truth).unwrap().tv;
        assert!(d < 0.02, "{}: tv to truth {d}", s.method().name());
    }
    for i in 0..sets.len() {
        for j in i + 1..sets.len() {
            assert!(tv(&sets[i], &sets[j]) < 0.03);
        }
    }
}

#[test]
fn rejection_draws_pass_a_chi_square_test() {
    // n = 4, 16 cells, 15 degrees of freedom; 37.7 is the 0.999 quantile
    let delta = vec![0.3, -0.2, 0.0, 0.5];
    let cf = ColliderForm::simple(delta);
    let expected = conditioned_pmf(&cf).unwrap();
    let m = 40_000;
    let s = sample_collider_rejection(&cf, m, 99).unwrap();
    let counts = s.counts().unwrap();
    let chi2: f64 = counts
        .iter()
        .zip(expected.probs())
        .map(|(&c, &p)| {
            let e = p * m as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    assert!(chi2 < 37.7, "chi-square {chi2}");
}

#[test]
fn gibbs_thinning_and_seeds() {
    let spec = common::random_spec(&mut common::rng(5), 4, 0.5);
    let a = sample_gibbs(&spec, 500, 100, 3, 8).unwrap();
    let b = sample_gibbs(&spec, 500, 100, 3, 8).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.m(), 500);
    assert_eq!(a.meta().thin, Some(3));
    let c = sample_gibbs(&spec, 500, 100, 3, 9).unwrap();
    assert_ne!(a, c);
}

#[test]
fn samples_round_trip_through_csv() {
    let spec = common::random_spec(&mut common::rng(6), 3, 0.5);
    let s = sample_exact(&ising_pmf(&spec).unwrap(), 200, 12).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("draws.csv");
    s.write_csv(std::fs::File::create(&path).unwrap()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("x_1,x_2,x_3\n"));
    assert!(!text.contains('\r'));
    let back = SampleSet::read_csv(std::fs::File::open(&path).unwrap(), s.sidecar()).unwrap();
    assert_eq!(back, s);
}

#[test]
fn hopeless_rejection_runs_stop_early() {
    // five effects leave an acceptance rate near 7e-6: 1e5 draws would take
    // more than 1e10 proposals
    let spec = common::random_spec(&mut common::rng(8), 6, 0.5);
    let sf = to_spectral(&spec, 0.0).unwrap();
    let cf = spectral_to_collider(&sf, spec.delta()).unwrap();
    assert!(matches!(
        sample_collider_rejection(&cf, 100_000, 1),
        Err(Error::ConditioningTooSevere { proposals: 1_000_000, .. })
    ));
}
