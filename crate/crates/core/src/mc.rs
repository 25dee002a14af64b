//! Monte Carlo estimates of survival probabilities, plain and under the
//! exponential tilt.
//!
//! Samples are drawn in fixed-size batches. Batch `b` always uses the
//! ChaCha stream `b` of the run seed, and batch results are merged in batch
//! order, so an estimate depends only on the seed and the sample count,
//! never on the number of worker threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::dp::{escape_probability_bounds, DpConfig, EscapeBoundsSummary};
use crate::laplace::{classify_drift, tilt_distribution, DriftClass, LaplaceAnalysis, LaplaceError};
use crate::model::WalkModel;
use crate::sum::Neumaier;

/// Paths per RNG stream.
pub const BATCH_SIZE: u64 = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("at least one sample is required")]
    NoSamples,
    #[error("escape estimation needs a drift interior to the cone")]
    DriftNotInterior,
    #[error(transparent)]
    Laplace(#[from] LaplaceError),
}

impl McError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::NoSamples => "NoSamples",
            Self::DriftNotInterior => "DriftNotInterior",
            Self::Laplace(e) => e.code(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct McConfig {
    pub samples: u64,
    pub seed: u64,
    /// Worker threads; 0 lets rayon decide.
    pub workers: usize,
}

impl McConfig {
    pub fn new(samples: u64, seed: u64) -> Self {
        Self {
            samples,
            seed,
            workers: 0,
        }
    }

    pub fn with_workers(self, workers: usize) -> Self {
        Self { workers, ..self }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum McTarget {
    Survival { n: usize },
    Escape { horizon: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type")]
pub enum McMethod {
    Plain,
    Tilted { t0: Vec<f64>, rho: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct McEstimate {
    pub target: McTarget,
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
    pub method: McMethod,
    pub seed: u64,
    /// Sampled paths still in the cone at the horizon.
    pub hits: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escape_bounds: Option<EscapeBoundsSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl McEstimate {
    pub fn relative_std_error(&self) -> f64 {
        if self.mean == 0.0 {
            f64::INFINITY
        } else {
            self.std_error / self.mean
        }
    }

    /// `|mean - exact| <= k * std_error`.
    pub fn within(&self, exact: f64, k: f64) -> bool {
        (self.mean - exact).abs() <= k * self.std_error
    }
}

#[derive(Default)]
struct Batch {
    hits: u64,
    sum: Neumaier,
    sum_sq: Neumaier,
}

/// Step sampler over a fixed list of increments.
struct Stepper<'a> {
    vectors: &'a [Vec<i64>],
    alias: WeightedAliasIndex<f64>,
}

impl<'a> Stepper<'a> {
    fn new(vectors: &'a [Vec<i64>], weights: &[f64]) -> Self {
        let alias = WeightedAliasIndex::new(weights.to_vec()).expect("positive finite weights");
        Self { vectors, alias }
    }

    /// Walks `n` steps from `start`; returns the number of steps survived
    /// (`n` if the path stays in the cone) and the final position.
    fn walk(&self, model: &WalkModel, start: &[i64], n: usize, rng: &mut ChaCha8Rng, pos: &mut Vec<i64>) -> usize {
        pos.clear();
        pos.extend_from_slice(start);
        for k in 0..n {
            let v = &self.vectors[self.alias.sample(rng)];
            for (p, s) in pos.iter_mut().zip(v) {
                *p += s;
            }
            if !model.cone().contains(pos) {
                return k;
            }
        }
        n
    }
}

fn pool(workers: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool")
}

/// Runs `sample` once per path with per-batch streams and merges in order.
fn run_batches<F>(config: &McConfig, sample: F) -> Batch
where
    F: Fn(&mut ChaCha8Rng, &mut Vec<i64>) -> Option<f64> + Sync,
{
    let batches = config.samples.div_ceil(BATCH_SIZE);
    let results: Vec<Batch> = pool(config.workers).install(|| {
        (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(b);
                let size = BATCH_SIZE.min(config.samples - b * BATCH_SIZE);
                let mut batch = Batch::default();
                let mut pos = Vec::new();
                for _ in 0..size {
                    if let Some(x) = sample(&mut rng, &mut pos) {
                        batch.hits += 1;
                        batch.sum.add(x);
                        batch.sum_sq.add(x * x);
                    }
                }
                batch
            })
            .collect()
    });
    results.into_iter().fold(Batch::default(), |mut acc, b| {
        acc.hits += b.hits;
        acc.sum.merge(&b.sum);
        acc.sum_sq.merge(&b.sum_sq);
        acc
    })
}

fn plain_weights(model: &WalkModel) -> (Vec<Vec<i64>>, Vec<f64>) {
    let vectors = model.dist().vectors().map(<[i64]>::to_vec).collect();
    (vectors, model.dist().weights_f64())
}

/// Fraction of sampled paths confined through step `n`.
pub fn simulate_survival(model: &WalkModel, n: usize, config: &McConfig) -> Result<McEstimate, McError> {
    if config.samples == 0 {
        return Err(McError::NoSamples);
    }
    let (vectors, weights) = plain_weights(model);
    let stepper = Stepper::new(&vectors, &weights);
    let start = model.start();
    let batch = run_batches(config, |rng, pos| (stepper.walk(model, start, n, rng, pos) == n).then_some(1.0));
    let p = batch.hits as f64 / config.samples as f64;
    Ok(McEstimate {
        target: McTarget::Survival { n },
        mean: p,
        std_error: (p * (1.0 - p) / config.samples as f64).sqrt(),
        samples: config.samples,
        method: McMethod::Plain,
        seed: config.seed,
        hits: batch.hits,
        escape_bounds: None,
        note: None,
    })
}

/// Plain estimates of `a_0, ..., a_n` from the same paths, so the sequence
/// is non-increasing by construction.
pub fn simulate_survival_profile(model: &WalkModel, n: usize, config: &McConfig) -> Result<Vec<f64>, McError> {
    if config.samples == 0 {
        return Err(McError::NoSamples);
    }
    let (vectors, weights) = plain_weights(model);
    let stepper = Stepper::new(&vectors, &weights);
    let batches = config.samples.div_ceil(BATCH_SIZE);
    let counts: Vec<Vec<u64>> = pool(config.workers).install(|| {
        (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(b);
                let size = BATCH_SIZE.min(config.samples - b * BATCH_SIZE);
                let mut survived = vec![0u64; n + 1];
                let mut pos = Vec::new();
                for _ in 0..size {
                    let k = stepper.walk(model, model.start(), n, &mut rng, &mut pos);
                    survived[k] += 1;
                }
                survived
            })
            .collect()
    });
    // survived[k] counts paths whose first k steps stayed inside.
    let mut totals = vec![0u64; n + 1];
    for c in counts {
        for (t, v) in totals.iter_mut().zip(c) {
            *t += v;
        }
    }
    let mut alive = config.samples;
    let mut out = Vec::with_capacity(n + 1);
    for lost in totals {
        out.push(alive as f64 / config.samples as f64);
        alive -= lost;
    }
    Ok(out)
}

/// Importance-sampling estimate of `a_n` under the tilt of the analysis.
pub fn simulate_tilted(
    model: &WalkModel,
    analysis: &LaplaceAnalysis,
    n: usize,
    config: &McConfig,
) -> Result<McEstimate, McError> {
    simulate_tilted_with(model, &analysis.t0, n, config)
}

/// Importance sampling under an arbitrary tilt `t`: paths follow
/// `w_v exp(<t, v>) / L(t)` and carry the weight
/// `L(t)^n exp(<t, x - S_n>)`, which is unbiased for `a_n` for every `t`.
pub fn simulate_tilted_with(model: &WalkModel, t: &[f64], n: usize, config: &McConfig) -> Result<McEstimate, McError> {
    if config.samples == 0 {
        return Err(McError::NoSamples);
    }
    let tilted = tilt_distribution(model.dist(), t)?;
    let method = McMethod::Tilted {
        t0: t.to_vec(),
        rho: tilted.rho,
    };
    if t.iter().all(|&v| v == 0.0) {
        return Ok(McEstimate {
            method,
            ..simulate_survival(model, n, config)?
        });
    }
    let stepper = Stepper::new(&tilted.vectors, &tilted.weights);
    let start = model.start();
    let log_scale = n as f64 * tilted.rho.ln();
    let batch = run_batches(config, |rng, pos| {
        (stepper.walk(model, start, n, rng, pos) == n).then(|| {
            let shift: f64 = t.iter().zip(start.iter().zip(pos.iter())).map(|(ti, (x, s))| ti * (x - s) as f64).sum();
            (log_scale + shift).exp()
        })
    });
    let count = config.samples as f64;
    let mean = batch.sum.value() / count;
    let variance = if config.samples > 1 {
        ((batch.sum_sq.value() - count * mean * mean) / (count - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        target: McTarget::Survival { n },
        mean,
        std_error: (variance / count).sqrt(),
        samples: config.samples,
        method,
        seed: config.seed,
        hits: batch.hits,
        escape_bounds: None,
        note: None,
    })
}

/// Horizon-truncated proxy for `P(tau = infinity)`: plain survival to
/// `horizon`, biased upwards. Small-step orthant models also carry the
/// exact escape interval.
pub fn estimate_escape(model: &WalkModel, horizon: usize, config: &McConfig) -> Result<McEstimate, McError> {
    if classify_drift(&model.dist().drift(), model.cone()) != DriftClass::InteriorDrift {
        return Err(McError::DriftNotInterior);
    }
    let mut estimate = simulate_survival(model, horizon, config)?;
    estimate.target = McTarget::Escape { horizon };
    if model.dist().is_small_step() {
        match escape_probability_bounds(model, horizon, &DpConfig::from_env()) {
            Ok(bounds) => estimate.escape_bounds = Some(bounds.summary()),
            Err(e) => estimate.note = Some(format!("escape bounds unavailable: {e}")),
        }
    }
    Ok(estimate)
}

/// Uniform draw used by callers that need a seed per repetition.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - index);
    rng.random()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laplace::{analyze, MinimizeOptions};
    use crate::model::{ConeSpec, StepDistribution};
    use crate::oned::OneDimModel;
    use num_rational::BigRational;

    fn line(p: i64, q: i64, start: u64) -> WalkModel {
        let d = p + q;
        OneDimModel::new(
            BigRational::new(p.into(), d.into()),
            BigRational::from_integer(0.into()),
            BigRational::new(q.into(), d.into()),
            start,
        )
        .unwrap()
        .to_walk_model()
        .unwrap()
    }

    fn trapped() -> WalkModel {
        let dist = StepDistribution::from_table(2, &[(&[1, 0], "1/2"), (&[0, 1], "1/2")]).unwrap();
        WalkModel::new(dist, ConeSpec::orthant(2), vec![0, 0]).unwrap()
    }

    #[test]
    fn trapped_walk_always_survives() {
        let est = simulate_survival(&trapped(), 50, &McConfig::new(5000, 3)).unwrap();
        assert_eq!((est.mean, est.std_error, est.hits), (1.0, 0.0, 5000));
        let esc = estimate_escape(&trapped(), 50, &McConfig::new(100, 3)).unwrap();
        assert_eq!((esc.mean, esc.std_error), (1.0, 0.0));
        assert!(esc.note.is_some());
    }

    #[test]
    fn symmetric_line_binomial() {
        let est = simulate_survival(&line(1, 1, 0), 9, &McConfig::new(1_000_000, 17)).unwrap();
        assert!(est.within(63.0 / 256.0, 4.0), "{est:?}");
    }

    #[test]
    fn worker_count_does_not_matter() {
        let m = line(1, 3, 0);
        let analysis = analyze(m.dist(), m.cone(), MinimizeOptions::default()).unwrap();
        let one = McConfig::new(20_000, 99).with_workers(1);
        let eight = one.with_workers(8);
        assert_eq!(simulate_survival(&m, 30, &one), simulate_survival(&m, 30, &eight));
        let a = simulate_tilted(&m, &analysis, 30, &one).unwrap();
        let b = simulate_tilted(&m, &analysis, 30, &eight).unwrap();
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.hits, b.hits);
    }

    #[test]
    fn zero_tilt_is_plain_sampling() {
        let m = line(3, 1, 1);
        let config = McConfig::new(10_000, 5);
        let plain = simulate_survival(&m, 40, &config).unwrap();
        let tilted = simulate_tilted_with(&m, &[0.0], 40, &config).unwrap();
        assert_eq!((plain.mean, plain.std_error, plain.hits), (tilted.mean, tilted.std_error, tilted.hits));
        assert!(matches!(tilted.method, McMethod::Tilted { rho, .. } if rho == 1.0));
    }

    #[test]
    fn escape_increases_with_start() {
        let mut previous = 0.0;
        for x in [0u64, 2, 5, 10] {
            let est = estimate_escape(&line(3, 1, x), 200, &McConfig::new(100_000, 40 + x)).unwrap();
            let exact = 1.0 - (1.0f64 / 3.0).powi(x as i32 + 1);
            // Near 1 the plug-in error can vanish; compare with the true one.
            let sigma = (exact * (1.0 - exact) / est.samples as f64).sqrt();
            assert!((est.mean - exact).abs() <= 4.0 * sigma, "x={x}: {est:?}");
            assert!(est.mean >= previous);
            previous = est.mean;
            assert!(est.escape_bounds.is_some());
        }
    }

    #[test]
    fn negative_drift_escape_is_rejected() {
        assert_eq!(
            estimate_escape(&line(1, 3, 0), 10, &McConfig::new(10, 0)),
            Err(McError::DriftNotInterior)
        );
        assert_eq!(simulate_survival(&line(1, 3, 0), 10, &McConfig::new(0, 0)), Err(McError::NoSamples));
    }

    #[test]
    fn profile_is_monotone() {
        let m = line(1, 1, 2);
        let profile = simulate_survival_profile(&m, 60, &McConfig::new(20_000, 8)).unwrap();
        assert_eq!(profile[0], 1.0);
        assert!(profile.windows(2).all(|w| w[1] <= w[0]));
        let single = simulate_survival(&m, 60, &McConfig::new(20_000, 8)).unwrap();
        assert_eq!(profile[60], single.mean);
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::BTreeSet<u64> = (0..100).map(|i| derive_seed(7, i)).collect();
        assert_eq!(seeds.len(), 100);
    }
}
