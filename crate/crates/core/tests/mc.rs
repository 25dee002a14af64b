use num_bigint::BigInt;
use num_rational::BigRational;

use conewalk::dp::{survival_sequence, DpConfig};
use conewalk::laplace::{analyze, MinimizeOptions};
use conewalk::mc::{derive_seed, estimate_escape, simulate_survival, simulate_tilted, McConfig};
use conewalk::model::{ConeSpec, StepDistribution, WalkModel};
use conewalk::oned::{escape_prob_1d, OneDimModel};
use conewalk::rational::to_f64;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn orthant(d: usize, table: &[(&[i64], &str)], start: &[i64]) -> WalkModel {
    let dist = StepDistribution::from_table(d, table).unwrap();
    WalkModel::new(dist, ConeSpec::orthant(d), start.to_vec()).unwrap()
}

fn five_step() -> WalkModel {
    orthant(
        2,
        &[(&[1, 0], "1/5"), (&[0, -1], "1/5"), (&[-1, 0], "1/5"), (&[0, 1], "1/5"), (&[1, 1], "1/5")],
        &[0, 0],
    )
}

fn skewed() -> WalkModel {
    orthant(
        2,
        &[(&[1, 0], "1/6"), (&[0, 1], "1/6"), (&[-1, 0], "1/3"), (&[0, -1], "1/3")],
        &[0, 0],
    )
}

fn exact(model: &WalkModel, n: usize) -> f64 {
    let seq = survival_sequence(model, n, &DpConfig::default()).unwrap();
    to_f64(&seq.terms[n])
}

#[test]
fn five_step_survival_matches_exact() {
    let model = five_step();
    let est = simulate_survival(&model, 20, &McConfig::new(1_000_000, 7)).unwrap();
    let a20 = exact(&model, 20);
    assert!(est.within(a20, 4.0), "{} vs {a20} (se {})", est.mean, est.std_error);
}

#[test]
fn symmetric_line_at_nine_steps() {
    let model = OneDimModel::simple(q(1, 2), 0).unwrap().to_walk_model().unwrap();
    let est = simulate_survival(&model, 9, &McConfig::new(200_000, 3)).unwrap();
    assert!(est.within(63.0 / 256.0, 4.0), "{}", est.mean);
}

#[test]
fn tilting_beats_plain_on_exterior_drift() {
    let model = skewed();
    let analysis = analyze(model.dist(), model.cone(), MinimizeOptions::default()).unwrap();
    let cfg = McConfig::new(100_000, 11);
    let a50 = exact(&model, 50);
    let plain = simulate_survival(&model, 50, &cfg).unwrap();
    let tilted = simulate_tilted(&model, &analysis, 50, &cfg).unwrap();
    assert!(tilted.within(a50, 4.0), "{} vs {a50}", tilted.mean);
    // Plain sampling may see no survivor at all; compare against its
    // theoretical standard error in that case.
    let plain_rel = (a50 * (1.0 - a50) / cfg.samples as f64).sqrt() / a50;
    assert!(tilted.relative_std_error() < plain_rel);
    assert!(plain.hits == 0 || tilted.relative_std_error() < plain.relative_std_error());
}

#[test]
fn tilted_estimator_is_unbiased() {
    let model = skewed();
    let analysis = analyze(model.dist(), model.cone(), MinimizeOptions::default()).unwrap();
    let n = 30;
    let a = exact(&model, n);
    let means: Vec<f64> = (0..200)
        .map(|i| simulate_tilted(&model, &analysis, n, &McConfig::new(500, derive_seed(99, i))).unwrap().mean)
        .collect();
    let m = means.iter().sum::<f64>() / means.len() as f64;
    let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
    let se = (var / means.len() as f64).sqrt();
    assert!((m - a).abs() <= 4.0 * se, "{m} vs {a} (se {se})");
}

#[test]
fn line_escape_two_thirds() {
    let line = OneDimModel::simple(q(3, 4), 0).unwrap();
    assert_eq!(escape_prob_1d(&line).unwrap(), q(2, 3));
    let model = line.to_walk_model().unwrap();
    let est = estimate_escape(&model, 200, &McConfig::new(1_000_000, 5)).unwrap();
    assert!(est.within(2.0 / 3.0, 4.0), "{} ± {}", est.mean, est.std_error);
    let bounds = est.escape_bounds.unwrap();
    assert!(bounds.best_lo_float <= 2.0 / 3.0 + 1e-12 && 2.0 / 3.0 <= bounds.best_hi_float + 1e-12);
}

#[test]
fn five_step_escape_consistent_with_bounds() {
    let model = five_step();
    let horizon = 100;
    let est = estimate_escape(&model, horizon, &McConfig::new(200_000, 13)).unwrap();
    let bounds = est.escape_bounds.clone().unwrap();
    assert!(bounds.best_lo_float <= bounds.best_hi_float);
    // The proxy estimates a_horizon, which dominates the escape probability.
    let a = exact(&model, horizon);
    assert!(bounds.best_hi_float <= a + 1e-15);
    assert!(est.within(a, 4.0), "{} vs {a}", est.mean);
    assert!(est.mean >= bounds.best_lo_float - 4.0 * est.std_error);
}
