use std::sync::Arc;

use mmimo::detectors::{build_bank, m_mmse, mf, Scheme, SingleCellOptions};
use mmimo::estimation::{
    build_estimate_set, estimate_all, estimate_directions, estimate_directions_explicit, estimator_coefficients, pilot_observation,
    sample_channels, EstimationStatistics,
};
use mmimo::geometry::UserDrop;
use mmimo::linalg::{relative_difference_mat, C64};
use mmimo::performance::{instantaneous_sinr, monte_carlo_se, McSettings, Sampling, Scenario, SeReport};
use mmimo::pilots::{dft_pilot_book, PilotAllocation, PowerAllocation};
use mmimo::rng::substream;
use mmimo::validate::{
    collinearity_error, optimality, random_estimates, random_scenario, scale_invariance_error, Shape,
};
use proptest::prelude::*;

/// Two cells, one user each, sharing pilot 0 of a length-2 book.
fn contaminated_pair() -> (UserDrop, PilotAllocation, PowerAllocation) {
    let drop = UserDrop::from_fading(2, 1, vec![1.0, 0.2, 0.3, 0.8]).unwrap();
    let alloc = PilotAllocation::from_indices(2, 1, 2, vec![0, 0]).unwrap();
    (drop, alloc, PowerAllocation::uniform(2, 1.5, 1.0))
}

#[test]
fn mmse_error_is_orthogonal_to_the_estimate() {
    let (drop, alloc, powers) = contaminated_pair();
    let sigma2 = 0.4;
    let book = dft_pilot_book(2).unwrap();
    let state = estimator_coefficients(&alloc, &powers, &drop, sigma2).unwrap();
    let m = 4;
    let trials = 4000;
    let mut rng = substream(11, &[]);
    let (mut cross, mut second) = (C64::new(0.0, 0.0), 0.0);
    for _ in 0..trials {
        let h = sample_channels(&drop, m, &mut rng).unwrap();
        let y = pilot_observation(&h, &alloc, &book, &powers, sigma2, 0, &mut rng).unwrap();
        let dirs = estimate_directions(&y, &state, 0, &book).unwrap();
        let est = build_estimate_set(vec![dirs.clone(), dirs], &alloc, &powers, &drop, &state)
            .unwrap();
        let hat = est.estimate(0, 0);
        let err = h.channel(0, 0) - &hat;
        cross += hat.dotc(&err);
        second += hat.norm_squared();
    }
    let n = (trials * m) as f64;
    let stats = EstimationStatistics::new(&alloc, &powers, &drop, &state).unwrap();
    let (est_cov, err_cov) = (stats.est_cov(0, 0), stats.err_cov(0, 0));
    assert!((second / n - est_cov).abs() < 0.05 * est_cov, "{} vs {est_cov}", second / n);
    assert!((cross / n).norm() < 5.0 * (est_cov * err_cov).sqrt() / n.sqrt());
    assert!((est_cov + err_cov - 1.0).abs() < 1e-12);
}

#[test]
fn fast_and_explicit_estimators_agree() {
    let (drop, alloc, powers) = contaminated_pair();
    let sigma2 = 0.7;
    let book = dft_pilot_book(2).unwrap();
    let state = estimator_coefficients(&alloc, &powers, &drop, sigma2).unwrap();
    let mut rng = substream(12, &[]);
    let h = sample_channels(&drop, 6, &mut rng).unwrap();
    for j in 0..2 {
        let y = pilot_observation(&h, &alloc, &book, &powers, sigma2, j, &mut rng).unwrap();
        let fast = estimate_directions(&y, &state, j, &book).unwrap();
        let slow = estimate_directions_explicit(&y, &alloc, &powers, &drop, sigma2, j, &book).unwrap();
        assert!(relative_difference_mat(&fast, &slow) < 1e-10);
    }
}

#[test]
fn estimation_chain_gives_collinear_contaminated_estimates() {
    let (drop, alloc, powers) = contaminated_pair();
    let book = dft_pilot_book(2).unwrap();
    let state = estimator_coefficients(&alloc, &powers, &drop, 0.3).unwrap();
    let mut rng = substream(13, &[]);
    let h = sample_channels(&drop, 8, &mut rng).unwrap();
    let dirs = estimate_all(&h, &alloc, &book, &powers, &state, &mut rng).unwrap();
    let est = build_estimate_set(dirs, &alloc, &powers, &drop, &state).unwrap();
    assert!(collinearity_error(&est) < 1e-12);
}

#[test]
fn bank_matches_single_detectors() {
    let mut rng = substream(14, &[]);
    let shape = Shape {
        cells: 3,
        users_per_cell: 2,
        beta: 1,
        antennas: 10,
    };
    let sc = random_scenario(&mut rng, shape).unwrap();
    let est = random_estimates(&sc, &mut rng).unwrap();
    let bank = |s| {
        build_bank(
            s,
            &est,
            sc.detector_state(),
            sc.powers(),
            sc.drop(),
            sc.sigma2(),
            SingleCellOptions::default(),
        )
        .unwrap()
    };
    let mmse = bank(Scheme::MultiCellMmse);
    let matched = bank(Scheme::MatchedFilter);
    for j in 0..3 {
        for k in 0..2 {
            let g = m_mmse(&est, sc.detector_state(), sc.sigma2(), j, k).unwrap();
            assert!((mmse.vector(j, k) - &g).norm() <= 1e-10 * g.norm());
            assert_eq!(matched.vector(j, k), &mf(&est, j, k));
        }
    }
}

#[test]
fn channel_and_estimate_sampling_agree() {
    let drop = Arc::new(UserDrop::from_fading(2, 2, vec![1.0, 0.8, 0.1, 0.2, 0.15, 0.05, 0.9, 1.1]).unwrap());
    let alloc = PilotAllocation::from_indices(2, 2, 2, vec![0, 1, 0, 1]).unwrap();
    let sc = Scenario::new(
        drop,
        alloc,
        PowerAllocation::uniform(4, 1.0, 1.0),
        0.5,
        16,
        20,
        SingleCellOptions::default(),
    )
    .unwrap();
    let mut settings = McSettings::new(400, 5);
    let fast = monte_carlo_se(&sc, &[Scheme::MultiCellMmse], &settings).remove(0).1.unwrap();
    settings.sampling = Sampling::Channels;
    let slow = monte_carlo_se(&sc, &[Scheme::MultiCellMmse], &settings).remove(0).1.unwrap();
    let tol = 4.0 * fast.sum_se_stderr.hypot(slow.sum_se_stderr);
    assert!((fast.sum_se_per_cell - slow.sum_se_per_cell).abs() < tol);
}

#[test]
fn monte_carlo_is_reproducible_and_ordered() {
    let mut rng = substream(15, &[]);
    let shape = Shape {
        cells: 4,
        users_per_cell: 3,
        beta: 2,
        antennas: 24,
    };
    let sc = random_scenario(&mut rng, shape).unwrap();
    let settings = McSettings::new(60, 77);
    let run = |settings: &McSettings| -> Vec<SeReport> {
        monte_carlo_se(&sc, &Scheme::ALL, settings).into_iter().map(|(_, r)| r.unwrap()).collect()
    };
    let a = run(&settings);
    assert_eq!(a, run(&settings));
    let se = |s: Scheme| a.iter().find(|r| r.scheme == s).unwrap().sum_se_per_cell;
    assert!(se(Scheme::MultiCellMmse) >= se(Scheme::MultiCellZf));
    assert!(se(Scheme::MultiCellMmse) >= se(Scheme::SingleCellMmse));
    assert!(se(Scheme::MultiCellMmse) >= se(Scheme::MatchedFilter));
    assert_ne!(a, run(&McSettings::new(60, 78)));
}

#[test]
fn zero_trials_is_an_error() {
    let mut rng = substream(16, &[]);
    let shape = Shape {
        cells: 2,
        users_per_cell: 1,
        beta: 1,
        antennas: 4,
    };
    let sc = random_scenario(&mut rng, shape).unwrap();
    let out = monte_carlo_se(&sc, &[Scheme::MatchedFilter], &McSettings::new(0, 1));
    assert!(out[0].1.is_err());
}

fn shapes() -> impl Strategy<Value = (u64, Shape)> {
    (any::<u64>(), 1usize..4, 1usize..4, 1usize..3, 1usize..20).prop_map(|(seed, cells, k, beta, extra)| {
        (
            seed,
            Shape {
                cells,
                users_per_cell: k,
                beta,
                antennas: beta * k + extra,
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mmse_beats_random_combiners((seed, shape) in shapes()) {
        let mut rng = substream(seed, &[1]);
        let sc = random_scenario(&mut rng, shape).unwrap();
        let est = random_estimates(&sc, &mut rng).unwrap();
        let rep = optimality(&sc, &est, 10, &mut rng).unwrap();
        prop_assert!(rep.optimum_gap < 1e-8, "gap {}", rep.optimum_gap);
        prop_assert!(rep.worst_excess < 1e-8, "excess {}", rep.worst_excess);
    }

    #[test]
    fn sinr_ignores_combiner_scale((seed, shape) in shapes()) {
        let mut rng = substream(seed, &[2]);
        let sc = random_scenario(&mut rng, shape).unwrap();
        let est = random_estimates(&sc, &mut rng).unwrap();
        prop_assert!(scale_invariance_error(&sc, &est, &mut rng).unwrap() < 1e-12);
    }

    #[test]
    fn sinr_is_non_negative_and_falls_with_noise((seed, shape) in shapes(), extra in 0.01f64..3.0) {
        let mut rng = substream(seed, &[3]);
        let sc = random_scenario(&mut rng, shape).unwrap();
        let est = random_estimates(&sc, &mut rng).unwrap();
        for j in 0..shape.cells {
            for k in 0..shape.users_per_cell {
                let g = mf(&est, j, k);
                let low = instantaneous_sinr(&g, &est, sc.powers(), sc.sigma2(), j, k).unwrap();
                let high = instantaneous_sinr(&g, &est, sc.powers(), sc.sigma2() + extra, j, k).unwrap();
                prop_assert!(low >= 0.0 && high >= 0.0);
                prop_assert!(high <= low);
            }
        }
    }

    #[test]
    fn contaminated_estimates_are_collinear((seed, shape) in shapes()) {
        let mut rng = substream(seed, &[4]);
        let sc = random_scenario(&mut rng, shape).unwrap();
        let est = random_estimates(&sc, &mut rng).unwrap();
        prop_assert!(collinearity_error(&est) < 1e-12);
    }
}
