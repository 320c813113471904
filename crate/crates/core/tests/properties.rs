use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use zit_tweedie::data::Dataset;
use zit_tweedie::em::{e_step, fit, EmConfig};
use zit_tweedie::gbdt::{fit_ensemble, init_constant, BinnedDataset, BoostConfig};
use zit_tweedie::io::undersample_rows;
use zit_tweedie::losses::{
    loss_init_positive, loss_mu, loss_phi, loss_pi, InitPositiveLoss, Loss, LossObservation, MuLoss, PhiLoss, PiLoss,
};
use zit_tweedie::metrics::{ordered_lorenz_gini, point_metrics};
use zit_tweedie::profile::{fit_profile, ZetaGrid};
use zit_tweedie::simulation::{cpg_to_tweedie, make_dataset, sample_zit, tweedie_to_cpg, ExposureLaw, TruthFunctions};
use zit_tweedie::tweedie::{
    log_density_positive_tweedie, log_density_tweedie, prob_zero, unit_deviance, zit_log_likelihood, LinkScores,
    PowerParam, TweedieParams, ZitParams,
};

fn zeta() -> impl Strategy<Value = PowerParam> {
    (1.05f64..1.95).prop_map(|z| PowerParam::new(z).unwrap())
}

fn positive() -> impl Strategy<Value = f64> {
    (-3.0f64..3.0).prop_map(f64::exp)
}

proptest! {
    #[test]
    fn power_outside_open_interval_is_rejected(z in prop_oneof![-5.0f64..=1.0, 2.0f64..5.0]) {
        prop_assert!(PowerParam::new(z).is_err());
    }

    #[test]
    fn deviance_is_nonnegative_and_vanishes_only_at_the_mean(
        y in prop_oneof![Just(0.0), positive()],
        mu in positive(),
        z in zeta(),
    ) {
        let d = unit_deviance(y, mu, z);
        prop_assert!(d >= 0.0);
        if y > 0.0 {
            prop_assert!(unit_deviance(y, y, z).abs() < 1e-12 * y.max(1.0));
        }
        if (y - mu).abs() > 1e-3 * mu {
            prop_assert!(d > 0.0);
        }
    }

    #[test]
    fn prob_zero_falls_with_mean_and_rises_with_dispersion(
        mu in positive(),
        phi in positive(),
        z in zeta(),
        bump in 1.01f64..3.0,
    ) {
        let p = prob_zero(mu, phi, z);
        prop_assume!(p > 1e-300 && p < 1.0);
        prop_assert!(prob_zero(mu * bump, phi, z) < p);
        prop_assert!(prob_zero(mu, phi * bump, z) > p);
    }

    #[test]
    fn positive_part_rescales_to_full_density(
        y in positive(),
        mu in positive(),
        phi in positive(),
        w in 0.5f64..2.0,
        z in zeta(),
    ) {
        let params = TweedieParams::new(mu, phi, z).unwrap();
        let full = log_density_tweedie(y, &params, w).unwrap().exp();
        let trunc = log_density_positive_tweedie(y, &params, w).unwrap().exp();
        let p0 = prob_zero(mu, phi / w, z);
        prop_assert!((trunc * (1.0 - p0) - full).abs() <= 1e-12 * full.max(1.0));
    }

    #[test]
    fn loss_hessians_are_nonnegative(
        t in 0.0f64..=1.0,
        y in prop_oneof![Just(0.0), positive()],
        yp in positive(),
        omega in 0.0f64..5.0,
        f in -5.0f64..5.0,
        z in zeta(),
    ) {
        prop_assert!(loss_pi(t, f).1.hess > 0.0);
        let mu = loss_mu(y, omega, f, z).1.hess;
        prop_assert!(mu >= 0.0);
        if omega > 0.0 && y > 0.0 {
            prop_assert!(mu > 0.0);
        }
        prop_assert!(loss_phi(yp, omega, f).1.hess >= 0.0);
        prop_assert!(loss_init_positive(yp, omega, f, z).1.hess > 0.0);
    }

    #[test]
    fn losses_scale_with_weight(
        t in 0.0f64..=1.0,
        y in positive(),
        omega in 0.1f64..5.0,
        f in -3.0f64..3.0,
        z in zeta(),
        k in prop_oneof![Just(0.25), Just(2.0), Just(8.0)],
    ) {
        let losses: Vec<Box<dyn Loss>> = vec![
            Box::new(PiLoss),
            Box::new(MuLoss { zeta: z }),
            Box::new(PhiLoss),
            Box::new(InitPositiveLoss { zeta: z, phi0: 1.3 }),
        ];
        for (i, loss) in losses.iter().enumerate() {
            let target = if i == 0 { t } else { y };
            let (v1, g1) = loss.evaluate(&LossObservation::new(target, omega), f);
            let (vk, gk) = loss.evaluate(&LossObservation::new(target, k * omega), f);
            prop_assert_eq!(vk, k * v1);
            prop_assert_eq!(gk.grad, k * g1.grad);
            prop_assert_eq!(gk.hess, k * g1.hess);
        }
    }

    #[test]
    fn mean_loss_is_weighted_deviance(
        y in prop_oneof![Just(0.0), positive()],
        omega in 0.0f64..5.0,
        f in -3.0f64..3.0,
        z in zeta(),
    ) {
        let v = loss_mu(y, omega, f, z).0;
        let d = omega * unit_deviance(y, f.exp(), z);
        prop_assert!((v - d).abs() <= 1e-12 * d.abs().max(1.0));
    }

    #[test]
    fn cpg_round_trip(mu in positive(), phi in positive(), z in zeta()) {
        let p = TweedieParams::new(mu, phi, z).unwrap();
        let back = cpg_to_tweedie(&tweedie_to_cpg(&p)).unwrap();
        prop_assert!((back.mu - mu).abs() <= 1e-12 * mu);
        prop_assert!((back.phi - phi).abs() <= 1e-12 * phi);
        prop_assert!((back.zeta.value() - z.value()).abs() <= 1e-12);
    }

    #[test]
    fn samples_are_nonnegative(pi in 0.0f64..0.99, mu in positive(), phi in positive(), z in zeta(), seed in any::<u64>()) {
        let params = ZitParams::new(pi, TweedieParams::new(mu, phi, z).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let y = sample_zit(&params, 1.0, &mut rng);
            prop_assert!(y >= 0.0 && y.is_finite());
        }
    }

    #[test]
    fn gini_is_bounded_and_lorenz_is_monotone(
        rows in prop::collection::vec((0.01f64..10.0, prop_oneof![Just(0.0), 0.0f64..20.0], 0.1f64..2.0), 2..60),
    ) {
        let prem: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let loss: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let w: Vec<f64> = rows.iter().map(|r| r.2).collect();
        prop_assume!(loss.iter().any(|&l| l > 0.0));
        let base = vec![1.0; rows.len()];
        let curve = ordered_lorenz_gini(&prem, &loss, &base, &w).unwrap();
        prop_assert!((-1.0..=1.0).contains(&curve.gini));
        for pair in curve.points.windows(2) {
            prop_assert!(pair[1].premium_share >= pair[0].premium_share);
            prop_assert!(pair[1].loss_share >= pair[0].loss_share);
        }
        for p in &curve.points {
            prop_assert!((0.0..=1.0).contains(&p.premium_share) && (0.0..=1.0).contains(&p.loss_share));
        }

        let flat = ordered_lorenz_gini(&vec![3.0; rows.len()], &loss, &base, &w).unwrap();
        prop_assert_eq!(flat.gini, 0.0);
        let scaled: Vec<f64> = prem.iter().map(|p| 4.0 * p).collect();
        let again = ordered_lorenz_gini(&scaled, &loss, &base, &w).unwrap();
        prop_assert!((again.gini - curve.gini).abs() < 1e-12);
    }

    #[test]
    fn point_metrics_ignore_row_order(
        rows in prop::collection::vec((0.01f64..10.0, prop_oneof![Just(0.0), 0.0f64..20.0], 0.1f64..2.0), 1..60),
        z in zeta(),
    ) {
        let split = |r: &[(f64, f64, f64)]| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
            (r.iter().map(|x| x.0).collect(), r.iter().map(|x| x.1).collect(), r.iter().map(|x| x.2).collect())
        };
        let (p, y, w) = split(&rows);
        let mut rev = rows.clone();
        rev.reverse();
        let (pr, yr, wr) = split(&rev);
        let a = point_metrics(&p, &y, &w, z).unwrap();
        let b = point_metrics(&pr, &yr, &wr, z).unwrap();
        for (u, v) in [(a.mse, b.mse), (a.mad, b.mad), (a.mean_deviance, b.mean_deviance)] {
            prop_assert!((u - v).abs() <= 1e-12 * u.abs().max(1.0));
        }
    }

    #[test]
    fn undersampling_keeps_zeros_without_duplicates(
        y in prop::collection::vec(prop_oneof![Just(0.0), 0.1f64..5.0], 1..300),
        keep in 0.01f64..=1.0,
        seed in any::<u64>(),
    ) {
        let rows = undersample_rows(&y, keep, seed).unwrap();
        prop_assert!(rows.windows(2).all(|p| p[0] < p[1]));
        let zeros = y.iter().filter(|&&v| v == 0.0).count();
        prop_assert_eq!(rows.iter().filter(|&&i| y[i] == 0.0).count(), zeros);
        let positives = y.len() - zeros;
        prop_assert_eq!(rows.len() - zeros, (keep * positives as f64).round() as usize);
    }
}

fn small_dataset(n: usize, seed: u64) -> Dataset {
    let zeta = PowerParam::new(1.5).unwrap();
    let truth = TruthFunctions::constant(2, 1.5, 1.0, 0.25).unwrap();
    make_dataset(n, &truth, zeta, ExposureLaw::uniform_default(), seed).unwrap().0
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn zit_dominates_plain_tweedie_when_zeros_are_inflated(seed in 0u64..1_000) {
        let zeta = PowerParam::new(1.5).unwrap();
        let data = small_dataset(2_000, seed);
        let model = fit(&data, zeta, &EmConfig { max_em_iterations: 5, ..EmConfig::constant_only() }).unwrap();
        let scores = model.score_matrix(&data.features).unwrap();
        let zit = zit_log_likelihood(&data.target, &data.exposure, &scores, zeta).unwrap();
        let tweedie_only: Vec<LinkScores> = scores.iter().map(|s| LinkScores { f_pi: -1e3, ..*s }).collect();
        let plain = zit_log_likelihood(&data.target, &data.exposure, &tweedie_only, zeta).unwrap();
        prop_assert!(zit >= plain);
    }

    #[test]
    fn responsibilities_are_probabilities_and_vanish_on_claims(seed in 0u64..1_000) {
        let zeta = PowerParam::new(1.5).unwrap();
        let data = small_dataset(800, seed);
        let model = fit(&data, zeta, &EmConfig { max_em_iterations: 2, trees_per_m_step: 3, ..EmConfig::default() }).unwrap();
        let post = e_step(&data, &model).unwrap();
        for (r, &y) in post.responsibilities.iter().zip(&data.target) {
            prop_assert!((0.0..=1.0).contains(r));
            prop_assert_eq!(*r == 0.0, y > 0.0);
        }
        prop_assert_eq!(e_step(&data, &model).unwrap(), post);
    }

    #[test]
    fn duplicating_a_row_equals_doubling_its_weight(seed in 0u64..1_000, dup in 0usize..40) {
        let z = PowerParam::new(1.5).unwrap();
        let data = small_dataset(40, seed);
        let mut rows: Vec<usize> = (0..data.len()).collect();
        rows.push(dup);
        let twice = data.select(&rows);
        let config = BoostConfig { num_trees: 5, max_leaves: 4, min_leaf_count: 1, min_leaf_hessian: 0.0, ..BoostConfig::default() };
        let losses: Vec<Box<dyn Loss>> = vec![
            Box::new(PiLoss),
            Box::new(MuLoss { zeta: z }),
            Box::new(PhiLoss),
            Box::new(InitPositiveLoss { zeta: z, phi0: 1.0 }),
        ];
        for (i, loss) in losses.iter().enumerate() {
            // distinct per-row targets, so no two different partitions tie exactly
            let target = |r: usize| {
                let y = data.target[r];
                let jitter = 1e-3 * (0.618_033_988_75 * (r + 1) as f64).fract();
                match i {
                    0 => if y == 0.0 { 0.7 - jitter } else { jitter },
                    3 => y + 0.5 + jitter,
                    _ => y + 0.1 * (i as f64 - 1.0) + jitter,
                }
            };
            let weighted: Vec<LossObservation> = (0..data.len())
                .map(|r| LossObservation::new(target(r), if r == dup { 2.0 } else { 1.0 }))
                .collect();
            let doubled: Vec<LossObservation> = rows.iter().map(|&r| LossObservation::new(target(r), 1.0)).collect();
            let a = fit_ensemble(loss.as_ref(), &BinnedDataset::new(&data.features, 255), &(0..data.len()).collect::<Vec<_>>(), &weighted, &vec![0.0; data.len()], &config).unwrap();
            let b = fit_ensemble(loss.as_ref(), &BinnedDataset::new(&twice.features, 255), &(0..twice.len()).collect::<Vec<_>>(), &doubled, &vec![0.0; twice.len()], &config).unwrap();
            let pa = a.ensemble.predict_matrix(&data.features).unwrap();
            let pb = b.ensemble.predict_matrix(&data.features).unwrap();
            for (u, v) in pa.iter().zip(&pb) {
                prop_assert!((u - v).abs() < 1e-10, "{} loss: {} vs {}", loss.name(), u, v);
            }
        }
    }

    #[test]
    fn one_unit_stump_equals_constant_fit(seed in 0u64..1_000) {
        let data = small_dataset(200, seed);
        let obs: Vec<LossObservation> = data.target.iter().map(|&y| LossObservation::new(y, 1.0)).collect();
        let offsets = vec![0.1; data.len()];
        let loss = MuLoss { zeta: PowerParam::new(1.5).unwrap() };
        let config = BoostConfig { num_trees: 1, learning_rate: 1.0, ..BoostConfig::constant_only() };
        let out = fit_ensemble(&loss, &BinnedDataset::new(&data.features, 255), &(0..data.len()).collect::<Vec<_>>(), &obs, &offsets, &config).unwrap();
        prop_assert_eq!(out.ensemble.base_score, init_constant(&loss, &obs, &offsets).unwrap());
        prop_assert_eq!(out.ensemble.n_trees(), 0);
    }
}

#[test]
fn seeds_reproduce_datasets_bitwise() {
    assert_eq!(small_dataset(500, 4), small_dataset(500, 4));
    assert_ne!(small_dataset(500, 4), small_dataset(500, 5));
}

#[test]
fn profile_loglik_matches_recomputation() {
    let data = small_dataset(3_000, 8);
    let grid = ZetaGrid::new(vec![1.4, 1.5, 1.6]).unwrap();
    let result = fit_profile(&data, &grid, &EmConfig { max_em_iterations: 4, ..EmConfig::constant_only() }).unwrap();
    assert_eq!(result.table.len(), 3);
    assert_eq!(result.training.len(), 3);
    let best = result.table.iter().map(|r| r.loglik).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(result.best_loglik(), best);
    let again = result.best_model.log_likelihood(&data).unwrap();
    assert!((again - result.best_loglik()).abs() <= 1e-10 * again.abs().max(1.0));

    let single = fit_profile(&data, &ZetaGrid::new(vec![1.5]).unwrap(), &EmConfig { max_em_iterations: 4, ..EmConfig::constant_only() }).unwrap();
    assert_eq!(single.best_zeta.value(), 1.5);
    let again = fit_profile(&data, &grid, &EmConfig { max_em_iterations: 4, ..EmConfig::constant_only() }).unwrap();
    assert_eq!(again.table, result.table);
}

#[test]
fn positive_only_data_has_no_zero_state_mass() {
    let zeta = PowerParam::new(1.5).unwrap();
    let mut data = small_dataset(600, 12);
    for y in &mut data.target {
        if *y == 0.0 {
            *y = 0.05;
        }
    }
    let model = fit(&data, zeta, &EmConfig { max_em_iterations: 3, trees_per_m_step: 3, ..EmConfig::default() }).unwrap();
    assert!(e_step(&data, &model).unwrap().responsibilities.iter().all(|&r| r == 0.0));
}
