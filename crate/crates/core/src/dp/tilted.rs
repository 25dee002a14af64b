//! Floating-point recursion under the exponentially tilted law.

use rayon::prelude::*;
use serde::Serialize;

use super::layer::{Grid, Reach};
use super::{survival_sequence, DpConfig, DpError};
use crate::laplace::tilt_distribution;
use crate::model::WalkModel;
use crate::sum::Neumaier;

/// `E*^x(exp(-<t0, S_k>); tau > k)` for `k = 0..=horizon`, where `E*` is
/// the expectation under the law tilted by `t0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TiltedFunctional {
    pub t0: Vec<f64>,
    pub rho: f64,
    /// `exp(<t0, x>)`.
    pub start_factor: f64,
    pub values: Vec<f64>,
}

impl TiltedFunctional {
    /// `rho^k exp(<t0, x>) E*^x(exp(-<t0, S_k>); tau > k)`, which equals `a_k`.
    pub fn reconstruct(&self, k: usize) -> f64 {
        self.rho.powi(k as i32) * self.start_factor * self.values[k]
    }

    pub fn reconstructed(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| self.reconstruct(k)).collect()
    }
}

pub fn tilted_survival_functional(
    model: &WalkModel,
    t0: &[f64],
    horizon: usize,
    config: &DpConfig,
) -> Result<TiltedFunctional, DpError> {
    if !model.cone().is_orthant() {
        return Err(DpError::UnsupportedCone);
    }
    let dot = |y: &[i64]| -> f64 { t0.iter().zip(y).map(|(t, &c)| t * c as f64).sum() };
    let start_factor = dot(model.start()).exp();

    if t0.iter().all(|&t| t == 0.0) {
        // The tilt is the identity; the functional is the survival sequence.
        let exact = survival_sequence(model, horizon, config)?;
        return Ok(TiltedFunctional {
            t0: t0.to_vec(),
            rho: 1.0,
            start_factor,
            values: exact.floats(),
        });
    }

    let tilted = tilt_distribution(model.dist(), t0)?;
    let reach = Reach::of(model);
    let x = model.start();
    let widest = (0..=horizon)
        .filter_map(|k| reach.layer_box(x, k, horizon, None))
        .map(|g| g.cells() as u128)
        .max()
        .unwrap_or(0);
    let estimated = 2 * widest * std::mem::size_of::<f64>() as u128;
    if estimated > config.memory_budget as u128 {
        let mut suggested = horizon;
        while suggested > 0 {
            suggested = suggested * 3 / 4;
            let cells = reach.layer_box(x, suggested, suggested, None).map_or(0, |g| g.cells() as u128);
            if 2 * cells * 8 <= config.memory_budget as u128 {
                break;
            }
        }
        return Err(DpError::MemoryBudgetExceeded {
            estimated,
            budget: config.memory_budget,
            suggested_horizon: suggested,
        });
    }

    let steps: Vec<(&[i64], f64)> = tilted
        .vectors
        .iter()
        .map(Vec::as_slice)
        .zip(tilted.weights.iter().copied())
        .collect();
    let mut grid = reach.layer_box(x, 0, horizon, None).expect("start box");
    let mut mass = vec![0.0; grid.cells()];
    mass[grid.index_of(x).expect("start in box")] = 1.0;

    let functional = |grid: &Grid, mass: &[f64]| -> f64 {
        let mut acc = Neumaier::new();
        for (i, &m) in mass.iter().enumerate() {
            if m != 0.0 {
                acc.add(m * (-dot(&grid.point_of(i))).exp());
            }
        }
        acc.value()
    };

    let mut values = Vec::with_capacity(horizon + 1);
    values.push(functional(&grid, &mass));
    for k in 1..=horizon {
        let next_grid = reach.layer_box(x, k, horizon, None).expect("survival boxes are never empty");
        let next: Vec<f64> = (0..next_grid.cells())
            .into_par_iter()
            .map(|index| {
                let y = next_grid.point_of(index);
                let mut from = vec![0i64; y.len()];
                let mut acc = Neumaier::new();
                for (v, w) in &steps {
                    for i in 0..y.len() {
                        from[i] = y[i] - v[i];
                    }
                    if let Some(j) = grid.index_of(&from) {
                        acc.add(mass[j] * w);
                    }
                }
                acc.value()
            })
            .collect();
        grid = next_grid;
        mass = next;
        values.push(functional(&grid, &mass));
    }
    Ok(TiltedFunctional {
        t0: t0.to_vec(),
        rho: tilted.rho,
        start_factor,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConeSpec, StepDistribution};
    use crate::rational::to_f64;

    fn model(d: usize, table: &[(&[i64], &str)], start: &[i64]) -> WalkModel {
        let dist = StepDistribution::from_table(d, table).unwrap();
        WalkModel::new(dist, ConeSpec::orthant(d), start.to_vec()).unwrap()
    }

    fn max_relative_error(m: &WalkModel, t0: &[f64], n: usize) -> f64 {
        let cfg = DpConfig::default();
        let exact = survival_sequence(m, n, &cfg).unwrap();
        let tilted = tilted_survival_functional(m, t0, n, &cfg).unwrap();
        exact
            .terms
            .iter()
            .enumerate()
            .map(|(k, a)| {
                let a = to_f64(a);
                (tilted.reconstruct(k) - a).abs() / a
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn identity_tilt_is_the_survival_sequence() {
        let m = model(1, &[(&[1], "1/2"), (&[-1], "1/2")], &[0]);
        let f = tilted_survival_functional(&m, &[0.0], 8, &DpConfig::default()).unwrap();
        let exact = survival_sequence(&m, 8, &DpConfig::default()).unwrap();
        assert_eq!(f.values, exact.floats());
    }

    #[test]
    fn negative_drift_line() {
        let m = model(1, &[(&[1], "1/4"), (&[-1], "3/4")], &[0]);
        assert!(max_relative_error(&m, &[3f64.ln() / 2.0], 60) <= 1e-12);
        let m = m.with_start(vec![3]).unwrap();
        assert!(max_relative_error(&m, &[3f64.ln() / 2.0], 60) <= 1e-12);
    }

    #[test]
    fn lopsided_plane() {
        let m = model(
            2,
            &[(&[1, 0], "1/6"), (&[0, 1], "1/6"), (&[-1, 0], "1/3"), (&[0, -1], "1/3")],
            &[0, 0],
        );
        assert!(max_relative_error(&m, &[2f64.ln() / 2.0; 2], 10) <= 1e-10);
    }
}
