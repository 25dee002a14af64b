//! Two-sided bounds on the escape probability of small-step walks with
//! interior drift.
//!
//! Coordinate `i` alone is a one-dimensional walk with up-probability
//! `p_i` and down-probability `q_i`; it leaves `[0, inf)` from `y_i` with
//! probability `gamma_i^(y_i + 1)`, `gamma_i = q_i / p_i`. Summing over the
//! coordinates that can decrease gives `g(y)`, and
//! `g(y) / d <= P^y(tau < inf) <= g(y)`. Applied at time `n` via the Markov
//! property this traps `P^x(tau = inf)` in `[a_n - g_n, a_n - g_n / d]` with
//! `g_n = E^x(g(S_n); tau > n)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use super::{sweep, DpConfig, DpError, ExactSequence, SequenceKind, StateLayer};
use crate::laplace::{classify_drift, DriftClass};
use crate::model::WalkModel;
use crate::rational::{format_rational, to_f64};

/// `gamma_i = q_i / p_i` as `(q_i, p_i)` numerator pairs for every
/// coordinate that can decrease.
struct ExitRatios {
    coordinates: Vec<(usize, BigInt, BigInt)>,
}

impl ExitRatios {
    fn of(model: &WalkModel) -> Result<Self, DpError> {
        let dist = model.dist();
        if !dist.is_small_step() {
            return Err(DpError::NotSmallStep);
        }
        if !model.cone().is_orthant() {
            return Err(DpError::UnsupportedCone);
        }
        if classify_drift(&dist.drift(), model.cone()) != DriftClass::InteriorDrift {
            return Err(DpError::DriftNotInterior);
        }
        let mut coordinates = Vec::new();
        for i in 0..dist.dimension() {
            let down = dist.coordinate_probability(i, -1);
            if down.is_zero() {
                continue;
            }
            let up = dist.coordinate_probability(i, 1);
            debug_assert!(up.is_positive(), "interior drift forces p_i > q_i");
            let gamma = down / up;
            coordinates.push((i, gamma.numer().clone(), gamma.denom().clone()));
        }
        if coordinates.is_empty() {
            return Err(DpError::Trapped);
        }
        Ok(Self { coordinates })
    }

    fn gamma(&self, k: usize) -> BigRational {
        let (_, a, b) = &self.coordinates[k];
        BigRational::new(a.clone(), b.clone())
    }

    /// `sum_y layer[y] g(y)` using per-coordinate marginals, each summed
    /// over a common power of the ratio denominator.
    fn against(&self, layer: &StateLayer) -> BigRational {
        let (lower, extent) = layer.bounds();
        if extent.contains(&0) {
            return BigRational::zero();
        }
        let marginals = layer.marginal_numerators();
        let mut total = BigRational::zero();
        for (i, a, b) in &self.coordinates {
            let m = &marginals[*i];
            let first = lower[*i] as usize + 1;
            let last = first + m.len() - 1;
            let a_pows = powers(a, last);
            let b_pows = powers(b, last - first);
            let mut numerator = BigInt::zero();
            for (j, c) in m.iter().enumerate() {
                if !c.is_zero() {
                    numerator += c * &a_pows[first + j] * &b_pows[last - first - j];
                }
            }
            let denominator = layer.denominator() * num_traits::pow(b.clone(), last);
            total += BigRational::new(numerator, denominator);
        }
        total
    }
}

fn powers(base: &BigInt, up_to: usize) -> Vec<BigInt> {
    let mut out = Vec::with_capacity(up_to + 1);
    out.push(BigInt::one());
    for k in 1..=up_to {
        out.push(&out[k - 1] * base);
    }
    out
}

/// `g(y) = sum_{i in I} gamma_i^(y_i + 1)` over coordinates with
/// `P(X_i = -1) > 0`.
pub fn boundary_exit_g(model: &WalkModel, y: &[i64]) -> Result<BigRational, DpError> {
    let ratios = ExitRatios::of(model)?;
    if y.len() != model.dimension() || !model.cone().contains(y) {
        return Err(DpError::PointOutsideCone(y.to_vec()));
    }
    Ok((0..ratios.coordinates.len()).fold(BigRational::zero(), |acc, k| {
        let i = ratios.coordinates[k].0;
        acc + num_traits::pow(ratios.gamma(k), y[i] as usize + 1)
    }))
}

/// `g_k = E^x(g(S_k); tau > k)` for `k = 0..=horizon`.
pub fn g_functional(model: &WalkModel, horizon: usize, config: &DpConfig) -> Result<ExactSequence, DpError> {
    let ratios = ExitRatios::of(model)?;
    let mut terms = Vec::with_capacity(horizon + 1);
    sweep(model, horizon, None, config, |layer| terms.push(ratios.against(layer)))?;
    Ok(ExactSequence {
        kind: SequenceKind::GFunctional,
        terms,
        model_hash: model.hash(),
        horizon,
    })
}

/// `[a_n - g_n, a_n - g_n / d]` at one horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct EscapeInterval {
    pub n: usize,
    pub survival: BigRational,
    pub g: BigRational,
    pub lo: BigRational,
    pub hi: BigRational,
}

impl EscapeInterval {
    pub fn width(&self) -> BigRational {
        &self.hi - &self.lo
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EscapeBounds {
    pub dimension: usize,
    pub intervals: Vec<EscapeInterval>,
    /// Largest lower end and the index attaining it.
    pub best_lo: (usize, BigRational),
    /// Smallest upper end and the index attaining it.
    pub best_hi: (usize, BigRational),
}

impl EscapeBounds {
    pub fn best_width(&self) -> BigRational {
        &self.best_hi.1 - &self.best_lo.1
    }

    pub fn best_midpoint(&self) -> f64 {
        (to_f64(&self.best_lo.1) + to_f64(&self.best_hi.1)) / 2.0
    }

    /// Every pair of intervals intersects; for intervals this is the same
    /// as the largest lower end not exceeding the smallest upper end.
    pub fn pairwise_intersect(&self) -> bool {
        self.best_lo.1 <= self.best_hi.1
    }

    pub fn summary(&self) -> EscapeBoundsSummary {
        EscapeBoundsSummary {
            dimension: self.dimension,
            horizon: self.intervals.len().saturating_sub(1),
            best_lo: format_rational(&self.best_lo.1),
            best_hi: format_rational(&self.best_hi.1),
            best_lo_float: to_f64(&self.best_lo.1),
            best_hi_float: to_f64(&self.best_hi.1),
            best_lo_index: self.best_lo.0,
            best_hi_index: self.best_hi.0,
            best_width: to_f64(&self.best_width()),
        }
    }
}

/// Serializable view of the tightest interval.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EscapeBoundsSummary {
    pub dimension: usize,
    pub horizon: usize,
    pub best_lo: String,
    pub best_hi: String,
    pub best_lo_float: f64,
    pub best_hi_float: f64,
    pub best_lo_index: usize,
    pub best_hi_index: usize,
    pub best_width: f64,
}

pub fn escape_probability_bounds(model: &WalkModel, horizon: usize, config: &DpConfig) -> Result<EscapeBounds, DpError> {
    let ratios = ExitRatios::of(model)?;
    let d = BigRational::from_integer(BigInt::from(model.dimension()));
    let mut intervals = Vec::with_capacity(horizon + 1);
    sweep(model, horizon, None, config, |layer| {
        let survival = layer.mass();
        let g = ratios.against(layer);
        intervals.push(EscapeInterval {
            n: layer.step(),
            lo: &survival - &g,
            hi: &survival - &g / &d,
            survival,
            g,
        });
    })?;
    let best_lo = intervals
        .iter()
        .map(|iv| (iv.n, iv.lo.clone()))
        .reduce(|best, next| if next.1 > best.1 { next } else { best })
        .expect("at least one layer");
    let best_hi = intervals
        .iter()
        .map(|iv| (iv.n, iv.hi.clone()))
        .reduce(|best, next| if next.1 < best.1 { next } else { best })
        .expect("at least one layer");
    if best_lo.1 > best_hi.1 {
        return Err(DpError::EmptyIntersection {
            lo: format_rational(&best_lo.1),
            hi: format_rational(&best_hi.1),
        });
    }
    Ok(EscapeBounds {
        dimension: model.dimension(),
        intervals,
        best_lo,
        best_hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConeSpec, StepDistribution};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn model(d: usize, table: &[(&[i64], &str)], start: &[i64]) -> WalkModel {
        let dist = StepDistribution::from_table(d, table).unwrap();
        WalkModel::new(dist, ConeSpec::orthant(d), start.to_vec()).unwrap()
    }

    fn five_step() -> WalkModel {
        model(
            2,
            &[(&[1, 0], "1/5"), (&[0, -1], "1/5"), (&[-1, 0], "1/5"), (&[0, 1], "1/5"), (&[1, 1], "1/5")],
            &[0, 0],
        )
    }

    #[test]
    fn g_values() {
        assert_eq!(boundary_exit_g(&five_step(), &[0, 0]).unwrap(), q(1, 1));
        assert_eq!(boundary_exit_g(&five_step(), &[2, 0]).unwrap(), q(5, 8));
        let line = model(1, &[(&[1], "3/4"), (&[-1], "1/4")], &[0]);
        assert_eq!(boundary_exit_g(&line, &[2]).unwrap(), q(1, 27));
    }

    #[test]
    fn g_preconditions() {
        let negative = model(1, &[(&[1], "1/4"), (&[-1], "3/4")], &[0]);
        assert_eq!(boundary_exit_g(&negative, &[0]), Err(DpError::DriftNotInterior));
        let big = model(1, &[(&[2], "1/2"), (&[-1], "1/2")], &[0]);
        assert_eq!(boundary_exit_g(&big, &[0]), Err(DpError::NotSmallStep));
        let trapped = model(2, &[(&[1, 0], "1/2"), (&[0, 1], "1/2")], &[0, 0]);
        assert_eq!(boundary_exit_g(&trapped, &[0, 0]), Err(DpError::Trapped));
        assert!(matches!(
            boundary_exit_g(&five_step(), &[-1, 0]),
            Err(DpError::PointOutsideCone(_))
        ));
    }

    #[test]
    fn g_functional_matches_pointwise_sum() {
        let m = five_step();
        let g = g_functional(&m, 6, &DpConfig::default()).unwrap();
        sweep(&m, 6, None, &DpConfig::default(), |layer| {
            let direct = layer.iter().fold(BigRational::zero(), |acc, (y, c)| {
                acc + BigRational::new(c.clone(), layer.denominator().clone()) * boundary_exit_g(&m, &y).unwrap()
            });
            assert_eq!(direct, g.terms[layer.step()]);
        })
        .unwrap();
    }

    #[test]
    fn one_dimensional_bounds_are_exact() {
        for x in 0..3 {
            let m = model(1, &[(&[1], "3/4"), (&[-1], "1/4")], &[x]);
            let b = escape_probability_bounds(&m, 40, &DpConfig::default()).unwrap();
            let exact = BigRational::one() - num_traits::pow(q(1, 3), x as usize + 1);
            for iv in &b.intervals {
                assert_eq!(iv.lo, exact);
                assert_eq!(iv.hi, exact);
            }
            if x == 0 {
                assert_eq!(exact, q(2, 3));
            }
        }
    }

    #[test]
    fn five_step_intervals_shrink() {
        let b = escape_probability_bounds(&five_step(), 30, &DpConfig::default()).unwrap();
        assert_eq!(b.intervals[0].lo, q(0, 1));
        assert_eq!(b.intervals[0].hi, q(1, 2));
        for pair in b.intervals.windows(2) {
            assert_eq!(pair[0].width(), &pair[0].g / BigInt::from(2));
            assert!(pair[1].width() < pair[0].width());
        }
        assert!(b.pairwise_intersect());
    }
}
