#[path = "../examples/boosting.rs"]
mod boosting;
#[path = "../examples/em_step.rs"]
mod em_step;
#[path = "../examples/lorenz_gini.rs"]
mod lorenz_gini;
#[path = "../examples/losses.rs"]
mod losses;
#[path = "../examples/profile_power.rs"]
mod profile_power;
#[path = "../examples/simulate_dataset.rs"]
mod simulate_dataset;
#[path = "../examples/tweedie_density.rs"]
mod tweedie_density;

use approx::assert_relative_eq;

#[test]
fn density_example() {
    let s = tweedie_density::run_example().unwrap();
    assert_relative_eq!(s.deviance, 12.0 - 8.0 * 2f64.sqrt(), epsilon = 1e-14);
    assert_relative_eq!(s.prob_zero, (-2f64.sqrt() * 2.0).exp(), epsilon = 1e-15);
    assert!((s.normalizer - s.saddle_point).abs() < 0.05);
    assert!(s.log_density_at_one.is_finite());
}

#[test]
fn losses_example() {
    let rows = losses::run_example().unwrap();
    assert_eq!(rows.len(), 4);
    assert_relative_eq!(rows[0].2.grad, 0.468_524_783_5, epsilon = 1e-9);
    assert!(rows.iter().all(|(_, _, gh)| gh.hess > 0.0));
}

#[test]
fn boosting_example() {
    let out = boosting::run_example().unwrap();
    assert!(out.ensemble.n_trees() > 10);
    assert!(out.train_loss.windows(2).all(|p| p[1] < p[0]));
}

#[test]
fn simulation_example() {
    let (data, table) = simulate_dataset::run_example().unwrap();
    assert_eq!(data.len(), table.len());
    assert!((data.zero_fraction() - 0.6).abs() < 0.03);
}

#[test]
fn em_step_example() {
    let (before, after) = em_step::run_example().unwrap();
    assert!(after > before);
}

#[test]
fn profile_example() {
    let r = profile_power::run_example().unwrap();
    assert_eq!(r.table.len(), 5);
    assert!((r.best_zeta.value() - 1.5).abs() <= 0.1 + 1e-9);
}

#[test]
fn lorenz_example() {
    let (sharp, poor) = lorenz_gini::run_example().unwrap();
    assert!(sharp.gini > 0.5);
    assert_relative_eq!(poor.gini, -sharp.gini, epsilon = 1e-12);
}
