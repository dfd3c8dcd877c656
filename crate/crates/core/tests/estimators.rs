mod common;

use common::*;
use geomatch::assignment::Matcher;
use geomatch::estimators::{
    aml_grid2d, aml_signflip, alternating_procrustes, alternating_run, degree_match, estimate,
    estimate_distance, grampa, grampa_similarity, qap_frobenius, qap_run, umeyama,
    AlternatingOptions, EstimatorConfig, EstimatorKind, Factors,
};
use geomatch::linalg::{haar_orthogonal, procrustes_rotation};
use geomatch::models::{gram, observe, Instance, ModelKind, Observation};
use geomatch::{overlap, Error, Matrix, Permutation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn distinct_eigenvalues(f: &Factors) -> bool {
    let ok = |v: &[f64]| v.windows(2).all(|w| (w[0] - w[1]).abs() > 1e-6 * w[0].abs());
    ok(&f.spectrum_a.values) && ok(&f.spectrum_b.values)
}

#[test]
fn noiseless_recovery_across_estimators() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for seed in 0..5 {
        for d in [2, 4] {
            let inst = Instance::from_seed(60, d, 0.0, None, 100 + seed).unwrap();
            let dot = observe(&inst, ModelKind::DotProduct);
            let f = Factors::from_observation(&dot, d).unwrap();
            assert!(distinct_eigenvalues(&f));
            let mut kinds = vec![EstimatorKind::AmlSignflip, EstimatorKind::Umeyama];
            if d == 2 {
                kinds.push(EstimatorKind::AmlGrid2d);
            }
            for &k in &kinds {
                let r = estimate(&dot, &EstimatorConfig::new(k), d, None, &mut rng).unwrap();
                assert_eq!(overlap(&r.permutation, &inst.pi_star).unwrap(), 1.0, "{k}, d = {d}");
                let dist = observe(&inst, ModelKind::Distance);
                let r = estimate_distance(&dist, &EstimatorConfig::new(k), d, &mut rng).unwrap();
                assert_eq!(overlap(&r.permutation, &inst.pi_star).unwrap(), 1.0, "{k} distance");
            }
            let la = observe(&inst, ModelKind::LinearAssignment);
            let r = estimate(&la, &EstimatorConfig::new(EstimatorKind::MleLinear), d, None, &mut rng)
                .unwrap();
            assert_eq!(overlap(&r.permutation, &inst.pi_star).unwrap(), 1.0);
        }
    }
}

#[test]
fn umeyama_returns_truth_at_d4() {
    for seed in 0..5 {
        let (inst, f) = dot_factors(50, 4, 0.0, 200 + seed);
        assert!(distinct_eigenvalues(&f));
        let r = umeyama(&f, Matcher::Exact).unwrap();
        assert_eq!(overlap(&r.permutation, &inst.pi_star).unwrap(), 1.0);
    }
}

#[test]
fn umeyama_d1_is_top_eigenvector_matching() {
    let (_, f) = dot_factors(20, 1, 0.2, 3);
    let r = umeyama(&f, Matcher::Exact).unwrap();
    let u = &f.spectrum_a.vectors;
    let v = &f.spectrum_b.vectors;
    let plus = geomatch::assignment::solve_lap_max(&(v * u.transpose())).unwrap();
    let minus = geomatch::assignment::solve_lap_max(&(-(v * u.transpose()))).unwrap();
    assert_eq!(r.objective, plus.objective.max(minus.objective));
}

#[test]
fn sign_flip_cap() {
    let a = Matrix::from_fn(25, 21, |i, j| ((i * 7 + j * 3) % 11) as f64);
    let f = Factors::from_matrices(a.clone(), a).unwrap();
    assert!(matches!(aml_signflip(&f, Matcher::Exact), Err(Error::Capacity(_))));
    assert!(matches!(umeyama(&f, Matcher::Exact), Err(Error::Capacity(_))));
}

#[test]
fn alternating_from_truth_and_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for seed in 0..5 {
        let (inst, f) = dot_factors(40, 2, 0.0, 300 + seed);
        let q = procrustes_rotation(&f.cross(&inst.pi_star)).unwrap();
        let r = alternating_run(&f, &q, 100, Matcher::Exact).unwrap();
        assert_eq!((r.iterations, overlap(&r.permutation, &inst.pi_star).unwrap()), (1, 1.0));
        let opts = AlternatingOptions { restarts: 1, ..Default::default() };
        let r = alternating_procrustes(&f, Some(&q), &opts, &mut rng).unwrap();
        assert_eq!(r.permutation, inst.pi_star);
    }
    for seed in 0..10 {
        let (_, f) = dot_factors(40, 3, 0.3, 400 + seed);
        for matcher in [Matcher::Exact, Matcher::Greedy] {
            let q = haar_orthogonal(3, &mut rng);
            let r = alternating_run(&f, &q, 100, matcher).unwrap();
            assert!(r.history.windows(2).all(|w| w[1] >= w[0]));
            let m = Matrix::from_fn(3, 3, |_, _| rng.sample(StandardNormal));
            let r = qap_run(&f, &m, 100, matcher).unwrap();
            assert!(r.history.windows(2).all(|w| w[1] >= w[0]));
        }
    }
}

#[test]
fn qap_from_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..5 {
        let (inst, f) = dot_factors(30, 2, 0.0, 500 + seed);
        let m = f.cross(&inst.pi_star);
        let r = qap_frobenius(&f, Some(&m), &AlternatingOptions::default(), &mut rng).unwrap();
        assert_eq!(overlap(&r.permutation, &inst.pi_star).unwrap(), 1.0);
    }
}

#[test]
fn alternating_worse_than_grid_near_threshold() {
    // Random starts, n = 30, d = 2: compare overlap distributions well
    // below and at σ = n^{-2/d}.
    let n = 30;
    for sigma in [0.1 / n as f64, 1.0 / n as f64] {
        let (mut alt, mut grid) = (Vec::new(), Vec::new());
        for seed in 0..30 {
            let (inst, f) = dot_factors(n, 2, sigma, 600 + seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let opts = AlternatingOptions { restarts: 20, ..Default::default() };
            let a = alternating_procrustes(&f, None, &opts, &mut rng).unwrap();
            let g = aml_grid2d(&f, 100, Matcher::Exact).unwrap();
            alt.push(overlap(&a.permutation, &inst.pi_star).unwrap());
            grid.push(overlap(&g.permutation, &inst.pi_star).unwrap());
        }
        assert!(mean(&alt) < mean(&grid), "sigma {sigma}: {} vs {}", mean(&alt), mean(&grid));
        let perfect = |v: &[f64]| v.iter().filter(|&&o| o == 1.0).count();
        assert!(perfect(&alt) < perfect(&grid));
    }
}

#[test]
fn grampa_large_eta_is_degree_matching() {
    for seed in 0..10 {
        let inst = Instance::from_seed(40, 2, 0.3, None, 700 + seed).unwrap();
        let obs = observe(&inst, ModelKind::DotProduct);
        let g = grampa(&obs, 1e4, Matcher::Exact).unwrap();
        let d = degree_match(&obs).unwrap();
        assert_eq!(g.permutation, d.permutation, "seed {seed}");
    }
}

#[test]
fn grampa_finite_with_eigenvalue_collisions() {
    let inst = Instance::from_seed(15, 2, 0.0, None, 8).unwrap();
    let a = gram(&inst.x);
    let obs = Observation::new(ModelKind::DotProduct, a.clone(), a).unwrap();
    for eta in [1e-8, 1e-3, 0.2, 10.0] {
        assert!(grampa_similarity(&obs, eta).unwrap().iter().all(|v| v.is_finite()));
    }
}

#[test]
fn grampa_identity_fixed_point() {
    for seed in 0..5 {
        let inst = Instance::from_seed(30, 3, 0.0, None, 900 + seed).unwrap();
        let a = gram(&inst.x);
        let obs = Observation::new(ModelKind::DotProduct, a.clone(), a).unwrap();
        let r = grampa(&obs, 0.2, Matcher::Exact).unwrap();
        assert_eq!(r.permutation, Permutation::identity(30));
    }
}

#[test]
fn degree_matching_falls_behind_grid() {
    let n = 30;
    let sigma = 1.0 / n as f64;
    let (mut deg, mut grid) = (Vec::new(), Vec::new());
    for seed in 0..30 {
        let inst = Instance::from_seed(n, 2, sigma, None, 1000 + seed).unwrap();
        let obs = observe(&inst, ModelKind::DotProduct);
        let f = Factors::from_observation(&obs, 2).unwrap();
        deg.push(overlap(&degree_match(&obs).unwrap().permutation, &inst.pi_star).unwrap());
        grid.push(overlap(&aml_grid2d(&f, 100, Matcher::Exact).unwrap().permutation, &inst.pi_star).unwrap());
    }
    assert!(mean(&deg) + 0.2 < mean(&grid), "{} vs {}", mean(&deg), mean(&grid));
}

#[test]
fn estimator_results_are_deterministic() {
    let inst = Instance::from_seed(25, 2, 0.05, None, 11).unwrap();
    let obs = observe(&inst, ModelKind::DotProduct);
    for k in [
        EstimatorKind::AmlGrid2d,
        EstimatorKind::Alternating,
        EstimatorKind::QapFrobenius,
        EstimatorKind::Grampa,
        EstimatorKind::Degree,
    ] {
        let cfg = EstimatorConfig::new(k);
        let run = || estimate(&obs, &cfg, 2, None, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let a = run();
        assert_eq!(a, run());
        assert_eq!(a, geomatch::par::with_workers(1, run));
    }
}

#[test]
fn haar_needs_sigma_through_dispatch() {
    let inst = Instance::from_seed(5, 2, 0.05, None, 12).unwrap();
    let obs = observe(&inst, ModelKind::DotProduct);
    let cfg = EstimatorConfig::new(EstimatorKind::HaarMle);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(matches!(estimate(&obs, &cfg, 2, None, &mut rng), Err(Error::Parameter(_))));
    assert!(estimate(&obs, &cfg, 2, Some(0.05), &mut rng).is_ok());
}
