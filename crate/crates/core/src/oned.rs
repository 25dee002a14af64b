//! Closed forms for the nearest-neighbour walk on `{0, 1, 2, ...}`.
//!
//! With `p = P(+1)`, `r = P(0)`, `q = P(-1)`, the exit time from the
//! half-line is the first passage to `-1`, whose generating function is
//! `phi(t) = (1 - sqrt(1 - 4 p q t^2)) / (2 p t)` when `r = 0`. Starting
//! from `x` the walk must make `x + 1` independent such passages, so
//! `sum_n P^x(tau > n) t^n = (1 - phi(t)^(x+1)) / (1 - t)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::model::{ConeSpec, ModelError, Step, StepDistribution, WalkModel};
use crate::rational::{format_rational, to_f64};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OneDimError {
    #[error("the closed form covers only r = 0 (got r = {0})")]
    UnsupportedLazyStep(String),
    #[error("escape needs p > q")]
    DriftNotPositive,
    #[error("p, r, q must be non-negative and sum to 1")]
    InvalidWeights,
}

impl OneDimError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnsupportedLazyStep(_) => "UnsupportedLazyStep",
            Self::DriftNotPositive => "DriftNotPositive",
            Self::InvalidWeights => "InvalidWeights",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OneDimModel {
    pub p: BigRational,
    pub r: BigRational,
    pub q: BigRational,
    pub start: u64,
}

impl OneDimModel {
    pub fn new(p: BigRational, r: BigRational, q: BigRational, start: u64) -> Result<Self, OneDimError> {
        if p.is_negative() || r.is_negative() || q.is_negative() || !(&p + &r + &q).is_one() {
            return Err(OneDimError::InvalidWeights);
        }
        Ok(Self { p, r, q, start })
    }

    /// The `r = 0` walk with `P(+1) = p`.
    pub fn simple(p: BigRational, start: u64) -> Result<Self, OneDimError> {
        let q = BigRational::one() - &p;
        Self::new(p, BigRational::zero(), q, start)
    }

    pub fn drift(&self) -> BigRational {
        &self.p - &self.q
    }

    /// Same walk as a general model on the orthant `[0, inf)`.
    pub fn to_walk_model(&self) -> Result<WalkModel, ModelError> {
        let steps = [(1, &self.p), (0, &self.r), (-1, &self.q)]
            .into_iter()
            .filter(|(_, w)| w.is_positive())
            .map(|(v, w)| Step::new(vec![v], w.clone()))
            .collect();
        let dist = StepDistribution::new(1, steps)?;
        WalkModel::new(dist, ConeSpec::orthant(1), vec![self.start as i64])
    }

    /// Reads a nearest-neighbour walk on the half-line back from a general
    /// model; `None` for anything else.
    pub fn from_walk_model(model: &WalkModel) -> Option<Self> {
        if model.dimension() != 1 || !model.cone().is_orthant() || !model.dist().is_small_step() {
            return None;
        }
        let weight = |v: i64| {
            model
                .dist()
                .steps()
                .iter()
                .filter(|s| s.vector[0] == v)
                .fold(BigRational::zero(), |acc, s| acc + &s.weight)
        };
        Self::new(weight(1), weight(0), weight(-1), model.start()[0] as u64).ok()
    }

    fn require_simple(&self) -> Result<(), OneDimError> {
        if self.r.is_zero() {
            Ok(())
        } else {
            Err(OneDimError::UnsupportedLazyStep(format_rational(&self.r)))
        }
    }
}

/// Truncated product of two power series.
fn series_mul(a: &[BigRational], b: &[BigRational], len: usize) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); len];
    for (i, ai) in a.iter().enumerate().take(len) {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate().take(len - i) {
            if !bj.is_zero() {
                out[i + j] += ai * bj;
            }
        }
    }
    out
}

/// Coefficients of `phi(t)` up to `t^n`.
///
/// `phi(t) = sum_{k >= 1} c_k t^(2k-1)` with
/// `c_k = -binom(1/2, k) (-4q)^k p^(k-1) / 2`, which stays valid at `p = 0`.
fn phi_series(p: &BigRational, q: &BigRational, n: usize) -> Vec<BigRational> {
    let mut phi = vec![BigRational::zero(); n + 1];
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    let mut binom = BigRational::one();
    let mut minus_four_q = BigRational::one();
    let mut p_pow = BigRational::one();
    for k in 1.. {
        let power = 2 * k - 1;
        if power > n {
            break;
        }
        binom = binom * (&half - BigInt::from(k - 1)) / BigInt::from(k);
        minus_four_q *= q * BigInt::from(-4);
        if k > 1 {
            p_pow *= p;
        }
        phi[power] = -(&binom * &minus_four_q * &p_pow) / BigInt::from(2);
    }
    phi
}

/// `P^x(tau > k)` for `k = 0..=n` from the series expansion of
/// `(1 - phi(t)^(x+1)) / (1 - t)`.
pub fn closed_form_coefficients(model: &OneDimModel, n: usize) -> Result<Vec<BigRational>, OneDimError> {
    model.require_simple()?;
    let len = n + 1;
    let phi = phi_series(&model.p, &model.q, n);
    let mut power = vec![BigRational::zero(); len];
    power[0] = BigRational::one();
    for _ in 0..=model.start {
        power = series_mul(&power, &phi, len);
    }
    let mut out = Vec::with_capacity(len);
    let mut partial = BigRational::zero();
    for (k, c) in power.iter().enumerate() {
        if k == 0 {
            partial += BigRational::one();
        }
        partial -= c;
        out.push(partial.clone());
    }
    Ok(out)
}

/// `P^x(tau = inf) = 1 - (q/p)^(x+1)` for positive drift.
pub fn escape_prob_1d(model: &OneDimModel) -> Result<BigRational, OneDimError> {
    if model.p <= model.q {
        return Err(OneDimError::DriftNotPositive);
    }
    let gamma = &model.q / &model.p;
    Ok(BigRational::one() - num_traits::pow(gamma, model.start as usize + 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Regime {
    ZeroDrift,
    NegativeDrift,
    PositiveDrift,
}

/// Leading-order prediction of `P^x(tau > n)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AsymptoticReference {
    pub regime: Regime,
    pub n: usize,
    /// Exponential rate of `a_n` (of `a_n - a_inf` under positive drift it
    /// is `secondary_rate`).
    pub rho: f64,
    pub secondary_rate: Option<f64>,
    /// `lim a_n`, exact.
    pub constant_term: String,
    pub predicted: f64,
    pub note: Option<String>,
}

/// Oscillating `n^(-3/2)` correction shared by the two non-zero drift
/// regimes.
fn drift_correction(p: f64, q: f64, x: u64, n: usize) -> f64 {
    let s = 2.0 * (p * q).sqrt();
    let sign = if (x as usize + n).is_multiple_of(2) { 1.0 } else { -1.0 };
    let bracket = 1.0 / (1.0 / s - 1.0) + sign / (1.0 / s + 1.0);
    let n = n as f64;
    (x + 1) as f64 * (q / p).powf((x + 1) as f64 / 2.0) * bracket * s.powf(n)
        / ((2.0 * std::f64::consts::PI).sqrt() * n.powf(1.5))
}

pub fn asymptotic_reference(model: &OneDimModel, n: usize) -> Result<AsymptoticReference, OneDimError> {
    model.require_simple()?;
    let p = to_f64(&model.p);
    let q = to_f64(&model.q);
    let x = model.start;
    let rate = 2.0 * (p * q).sqrt();
    let reference = match model.p.cmp(&model.q) {
        std::cmp::Ordering::Equal => AsymptoticReference {
            regime: Regime::ZeroDrift,
            n,
            rho: 1.0,
            secondary_rate: None,
            constant_term: "0".into(),
            predicted: (x + 1) as f64 * (2.0 / (std::f64::consts::PI * n as f64)).sqrt(),
            note: Some(
                "n^(-1/2) decay, matching the exact values C(n, n/2)/2^n; a 1/n form is inconsistent with them".into(),
            ),
        },
        std::cmp::Ordering::Less => {
            let predicted = if model.p.is_zero() {
                // Deterministic descent: survives exactly the first x steps.
                if n as u64 <= x {
                    1.0
                } else {
                    0.0
                }
            } else {
                drift_correction(p, q, x, n)
            };
            AsymptoticReference {
                regime: Regime::NegativeDrift,
                n,
                rho: rate,
                secondary_rate: None,
                constant_term: "0".into(),
                predicted,
                note: None,
            }
        }
        std::cmp::Ordering::Greater => {
            let limit = escape_prob_1d(model)?;
            AsymptoticReference {
                regime: Regime::PositiveDrift,
                n,
                rho: 1.0,
                secondary_rate: Some(rate),
                predicted: to_f64(&limit) + drift_correction(p, q, x, n),
                constant_term: format_rational(&limit),
                note: None,
            }
        }
    };
    Ok(reference)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dp::{survival_sequence, DpConfig};
    use crate::laplace::LaplaceTransform;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn simple(p: BigRational, x: u64) -> OneDimModel {
        OneDimModel::simple(p, x).unwrap()
    }

    #[test]
    fn symmetric_coefficients() {
        let a = closed_form_coefficients(&simple(q(1, 2), 0), 4).unwrap();
        assert_eq!(a, vec![q(1, 1), q(1, 2), q(1, 2), q(3, 8), q(3, 8)]);
    }

    #[test]
    fn deterministic_walks() {
        let a = closed_form_coefficients(&simple(q(1, 1), 0), 10).unwrap();
        assert!(a.iter().all(One::is_one));
        let a = closed_form_coefficients(&simple(q(0, 1), 2), 5).unwrap();
        assert_eq!(a, vec![q(1, 1), q(1, 1), q(1, 1), q(0, 1), q(0, 1), q(0, 1)]);
    }

    #[test]
    fn lazy_walk_rejected() {
        let m = OneDimModel::new(q(1, 3), q(1, 3), q(1, 3), 0).unwrap();
        assert!(matches!(closed_form_coefficients(&m, 3), Err(OneDimError::UnsupportedLazyStep(_))));
        assert!(matches!(asymptotic_reference(&m, 3), Err(OneDimError::UnsupportedLazyStep(_))));
        assert_eq!(OneDimModel::new(q(1, 2), q(0, 1), q(1, 3), 0), Err(OneDimError::InvalidWeights));
    }

    #[test]
    fn agrees_with_exact_dp() {
        for p in [q(1, 2), q(1, 4), q(3, 4), q(2, 3), q(1, 5)] {
            for x in 0..3 {
                let m = simple(p.clone(), x);
                let closed = closed_form_coefficients(&m, 40).unwrap();
                let dp = survival_sequence(&m.to_walk_model().unwrap(), 40, &DpConfig::default()).unwrap();
                assert_eq!(closed, dp.terms, "p = {p}, x = {x}");
            }
        }
    }

    #[test]
    fn escape_probabilities() {
        assert_eq!(escape_prob_1d(&simple(q(3, 4), 0)).unwrap(), q(2, 3));
        assert_eq!(escape_prob_1d(&simple(q(2, 3), 1)).unwrap(), q(3, 4));
        assert_eq!(escape_prob_1d(&simple(q(1, 1), 4)).unwrap(), q(1, 1));
        assert_eq!(escape_prob_1d(&simple(q(1, 2), 0)), Err(OneDimError::DriftNotPositive));
        let lazy = OneDimModel::new(q(1, 2), q(1, 4), q(1, 4), 0).unwrap();
        assert_eq!(escape_prob_1d(&lazy).unwrap(), q(1, 2));
    }

    #[test]
    fn escape_probability_is_harmonic() {
        for (p, r, qq) in [(q(3, 4), q(0, 1), q(1, 4)), (q(1, 2), q(1, 3), q(1, 6)), (q(2, 3), q(0, 1), q(1, 3))] {
            let h = |x: u64| escape_prob_1d(&OneDimModel::new(p.clone(), r.clone(), qq.clone(), x).unwrap()).unwrap();
            for x in 1..8 {
                assert_eq!(h(x), &qq * h(x - 1) + &r * h(x) + &p * h(x + 1));
            }
        }
    }

    #[test]
    fn inverted_drift_exponent() {
        for (p, qq) in [(0.75f64, 0.25f64), (2.0 / 3.0, 1.0 / 3.0), (0.6, 0.4)] {
            let s: f64 = (p / qq).ln();
            let lt = LaplaceTransform::from_weights(1, &[vec![1], vec![-1]], &[p, qq]);
            let ev = lt.eval(&[-s]).unwrap();
            assert!((ev.value - 1.0).abs() <= 1e-12);
            assert!((ev.gradient[0] - (qq - p)).abs() <= 1e-12);
        }
    }

    #[test]
    fn survival_increases_with_start() {
        for p in [q(1, 2), q(1, 4), q(3, 4)] {
            let rows: Vec<Vec<BigRational>> =
                (0..5).map(|x| closed_form_coefficients(&simple(p.clone(), x), 30).unwrap()).collect();
            for pair in rows.windows(2) {
                assert!(pair[0].iter().zip(&pair[1]).all(|(a, b)| a <= b));
            }
        }
    }

    #[test]
    fn regimes() {
        let zero = asymptotic_reference(&simple(q(1, 2), 0), 400).unwrap();
        assert_eq!(zero.regime, Regime::ZeroDrift);
        assert_eq!(zero.rho, 1.0);
        let neg = asymptotic_reference(&simple(q(1, 4), 0), 400).unwrap();
        assert_eq!(neg.regime, Regime::NegativeDrift);
        assert!((neg.rho - 3f64.sqrt() / 2.0).abs() < 1e-15);
        let pos = asymptotic_reference(&simple(q(3, 4), 0), 400).unwrap();
        assert_eq!(pos.constant_term, "2/3");
        assert!((pos.secondary_rate.unwrap() - 3f64.sqrt() / 2.0).abs() < 1e-15);
    }

    #[test]
    fn predictions_track_exact_values() {
        let n = 400;
        for (p, tol) in [(q(1, 2), 0.01), (q(1, 4), 0.05)] {
            let m = simple(p, 0);
            let exact = to_f64(&closed_form_coefficients(&m, n).unwrap()[n]);
            let predicted = asymptotic_reference(&m, n).unwrap().predicted;
            assert!((predicted / exact - 1.0).abs() < tol, "{predicted} vs {exact}");
        }
        let m = simple(q(3, 4), 0);
        let exact = closed_form_coefficients(&m, 400).unwrap();
        let limit = escape_prob_1d(&m).unwrap();
        let gap = |n: usize| {
            let excess = to_f64(&(&exact[n] - &limit));
            (drift_correction(0.75, 0.25, 0, n) / excess - 1.0).abs()
        };
        assert!(gap(400) < gap(100));
        assert!(gap(400) < 0.05);
    }
}
