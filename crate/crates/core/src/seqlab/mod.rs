//! Sequence laboratory: rationality tests for generating functions and
//! growth diagnostics for their coefficients.
//!
//! A power series is rational exactly when its coefficients satisfy a
//! linear recurrence, in which case they are exponential polynomials
//! `sum_j P_j(n) beta_j^n`. [`guess_recurrence`] fits the shortest
//! recurrence on a window of exact terms and checks it on the rest, so a
//! positive answer is certified on every supplied term and a negative one
//! rules out every recurrence up to the order cap.

mod recurrence;
mod roots;

use std::ops::RangeInclusive;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::rational::{ln_rational, serialize_rationals, to_f64};

pub use recurrence::{berlekamp_massey, extend, first_violation};
pub use roots::{aberth_roots, square_free_factorization, Poly};

/// Minimum number of terms for [`estimate_rho`].
pub const MIN_RATE_TERMS: usize = 32;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeqError {
    #[error("need at least {needed} terms, got {got}")]
    InsufficientTerms { needed: usize, got: usize },
    #[error("term {index} is not positive")]
    NonpositiveTerm { index: usize },
    #[error("rate {0} is outside (0, 1]")]
    RateOutOfRange(f64),
    #[error("no positive term on the fitting window")]
    AllZeroOnWindow,
}

impl SeqError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::InsufficientTerms { .. } => "InsufficientTerms",
            Self::NonpositiveTerm { .. } => "NonpositiveTerm",
            Self::RateOutOfRange(_) => "RateOutOfRange",
            Self::AllZeroOnWindow => "AllZeroOnWindow",
        }
    }
}

/// Terms whose logarithm can be taken without overflow.
pub trait LogTerm {
    /// `ln(a)`, or `None` unless `a > 0`.
    fn ln_term(&self) -> Option<f64>;
    /// `ln(a - a_inf)`, or `None` unless `a > a_inf`.
    fn ln_excess(&self, a_inf: f64) -> Option<f64>;
}

impl LogTerm for f64 {
    fn ln_term(&self) -> Option<f64> {
        (*self > 0.0).then(|| self.ln())
    }

    fn ln_excess(&self, a_inf: f64) -> Option<f64> {
        (self - a_inf).ln_term()
    }
}

impl LogTerm for BigRational {
    fn ln_term(&self) -> Option<f64> {
        ln_rational(self)
    }

    fn ln_excess(&self, a_inf: f64) -> Option<f64> {
        let limit = BigRational::from_f64(a_inf)?;
        ln_rational(&(self - limit))
    }
}

/// One term `P(n) beta^n` of an exponential polynomial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExpPolyComponent {
    /// Characteristic root `beta`, as `[re, im]`.
    pub root: [f64; 2],
    /// `alpha = 1 / beta`, the matching pole of the generating function.
    pub pole: [f64; 2],
    pub multiplicity: usize,
    /// Coefficients of `P` in the basis `n^k`, as `[re, im]`.
    pub polynomial: Vec<[f64; 2]>,
}

/// `a_n = sum_j P_j(n) beta_j^n` for `n >= start`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExpPolyDecomposition {
    pub start: usize,
    pub components: Vec<ExpPolyComponent>,
    /// Largest deviation over up to 20 terms from `start`, relative to the
    /// largest of those terms.
    pub resynthesis_error: f64,
}

impl ExpPolyDecomposition {
    pub fn evaluate(&self, n: usize) -> Complex64 {
        let nf = n as f64;
        self.components
            .iter()
            .map(|c| {
                let beta = Complex64::new(c.root[0], c.root[1]);
                let poly: Complex64 = c
                    .polynomial
                    .iter()
                    .enumerate()
                    .map(|(k, p)| Complex64::new(p[0], p[1]) * nf.powi(k as i32))
                    .sum();
                poly * beta.powu(n as u32)
            })
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RecurrenceModel {
    pub order: usize,
    /// `a_n = sum_i c_i a_{n-i}` for `n >= start_index`.
    #[serde(serialize_with = "serialize_rationals")]
    pub coefficients: Vec<BigRational>,
    pub start_index: usize,
    pub decomposition: ExpPolyDecomposition,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "camelCase")]
pub enum RecurrenceOutcome {
    RecurrenceFound(RecurrenceModel),
    #[serde(rename_all = "camelCase")]
    NoRecurrenceUpTo { k_max: usize, terms_used: usize },
}

impl RecurrenceOutcome {
    pub fn order(&self) -> Option<usize> {
        match self {
            Self::RecurrenceFound(m) => Some(m.order),
            Self::NoRecurrenceUpTo { .. } => None,
        }
    }
}

/// Fits the shortest recurrence on the first `2 k_max` terms and verifies
/// it exactly on the rest.
///
/// If the window's shortest recurrence fails later, no recurrence of order
/// at most `k_max` generates the whole prefix: its linear complexity jumps
/// to at least `2 k_max + 1 - k_max`.
pub fn guess_recurrence(terms: &[BigRational], k_max: usize) -> Result<RecurrenceOutcome, SeqError> {
    let needed = 2 * k_max + 8;
    if terms.len() < needed {
        return Err(SeqError::InsufficientTerms {
            needed,
            got: terms.len(),
        });
    }
    let none = RecurrenceOutcome::NoRecurrenceUpTo {
        k_max,
        terms_used: terms.len(),
    };
    let (order, coefficients) = berlekamp_massey(&terms[..2 * k_max]);
    if order > k_max || first_violation(terms, &coefficients).is_some() {
        return Ok(none);
    }
    let floats: Vec<f64> = terms.iter().map(to_f64).collect();
    let decomposition = decompose(&coefficients, &floats);
    Ok(RecurrenceOutcome::RecurrenceFound(RecurrenceModel {
        order,
        coefficients,
        start_index: order,
        decomposition,
    }))
}

/// Exponential-polynomial form of a sequence obeying `coefficients`.
pub fn decompose(coefficients: &[BigRational], terms: &[f64]) -> ExpPolyDecomposition {
    // Characteristic polynomial z^L - c_1 z^(L-1) - ... - c_L; its zero
    // roots only delay the start of the exponential-polynomial regime.
    let order = coefficients.len();
    let zero_roots = coefficients.iter().rev().take_while(|c| c.is_zero()).count();
    let effective = order - zero_roots;
    let mut chi = vec![BigRational::zero(); effective + 1];
    chi[effective] = BigRational::from_integer(1.into());
    for (i, c) in coefficients.iter().take(effective).enumerate() {
        chi[effective - 1 - i] = -c;
    }
    let start = zero_roots;
    let mut roots: Vec<(Complex64, usize)> = Vec::new();
    for (factor, multiplicity) in square_free_factorization(&Poly::new(chi)) {
        for root in aberth_roots(&factor.to_complex()) {
            roots.push((root, multiplicity));
        }
    }
    roots.sort_by(|a, b| b.0.norm().total_cmp(&a.0.norm()).then(a.0.arg().total_cmp(&b.0.arg())));

    let unknowns: usize = roots.iter().map(|r| r.1).sum();
    let available = terms.len().saturating_sub(start);
    let rows = available.min(unknowns + 20);
    let mut components: Vec<ExpPolyComponent> = Vec::new();
    if unknowns > 0 && rows >= unknowns {
        let basis = |n: usize, root: Complex64, k: usize| root.powu(n as u32) * (n as f64).powi(k as i32);
        let columns: Vec<(Complex64, usize)> = roots
            .iter()
            .flat_map(|&(root, m)| (0..m).map(move |k| (root, k)))
            .collect();
        let mut matrix = DMatrix::<Complex64>::from_fn(rows, unknowns, |r, c| basis(start + r, columns[c].0, columns[c].1));
        let scales: Vec<f64> = (0..unknowns)
            .map(|c| matrix.column(c).iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE))
            .collect();
        for (c, s) in scales.iter().enumerate() {
            matrix.column_mut(c).scale_mut(1.0 / s);
        }
        let rhs = DVector::<Complex64>::from_fn(rows, |r, _| Complex64::new(terms[start + r], 0.0));
        if let Ok(solution) = matrix.svd(true, true).solve(&rhs, 1e-14) {
            let mut col = 0;
            for &(root, m) in &roots {
                let polynomial = (0..m)
                    .map(|k| {
                        let v = solution[col + k] / scales[col + k];
                        [v.re, v.im]
                    })
                    .collect();
                col += m;
                let pole = Complex64::new(1.0, 0.0) / root;
                components.push(ExpPolyComponent {
                    root: [root.re, root.im],
                    pole: [pole.re, pole.im],
                    multiplicity: m,
                    polynomial,
                });
            }
        }
    }
    let mut decomposition = ExpPolyDecomposition {
        start,
        components,
        resynthesis_error: f64::INFINITY,
    };
    let checked: Vec<usize> = (start..terms.len()).take(20).collect();
    let scale = checked.iter().map(|&n| terms[n].abs()).fold(0.0, f64::max);
    decomposition.resynthesis_error = if checked.is_empty() {
        0.0
    } else if scale == 0.0 {
        checked.iter().map(|&n| decomposition.evaluate(n).norm()).fold(0.0, f64::max)
    } else {
        checked
            .iter()
            .map(|&n| (decomposition.evaluate(n) - Complex64::new(terms[n], 0.0)).norm() / scale)
            .fold(0.0, f64::max)
    };
    decomposition
}

/// Least-squares line `y = intercept + slope * x`, with the RMS residual.
fn fit_line(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rms)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RhoEstimate {
    /// `exp(slope)` of the least-squares fit of `ln a_n` against `n` over
    /// the last half of the terms.
    pub rho_hat: f64,
    /// `a_N^(1/N)` at the last index.
    pub nth_root_last: f64,
    pub fit_from: usize,
    pub fit_to: usize,
    pub residual: f64,
}

pub fn estimate_rho<T: LogTerm>(terms: &[T]) -> Result<RhoEstimate, SeqError> {
    if terms.len() < MIN_RATE_TERMS {
        return Err(SeqError::InsufficientTerms {
            needed: MIN_RATE_TERMS,
            got: terms.len(),
        });
    }
    let logs = terms
        .iter()
        .enumerate()
        .map(|(index, t)| t.ln_term().ok_or(SeqError::NonpositiveTerm { index }))
        .collect::<Result<Vec<f64>, _>>()?;
    let last = logs.len() - 1;
    let from = logs.len() / 2;
    let points: Vec<(f64, f64)> = (from..=last).map(|n| (n as f64, logs[n])).collect();
    let (slope, _, residual) = fit_line(&points);
    Ok(RhoEstimate {
        rho_hat: slope.exp(),
        nth_root_last: (logs[last] / last as f64).exp(),
        fit_from: from,
        fit_to: last,
        residual,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Trend {
    Decreasing,
    Increasing,
    Flat,
    Mixed,
}

fn trend_of(values: &[f64]) -> Trend {
    if values.len() < 2 {
        return Trend::Flat;
    }
    let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let tol = 1e-12 * scale;
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    if diffs.iter().all(|d| d.abs() <= tol) {
        Trend::Flat
    } else if diffs.iter().all(|&d| d <= tol) {
        Trend::Decreasing
    } else if diffs.iter().all(|&d| d >= -tol) {
        Trend::Increasing
    } else {
        Trend::Mixed
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct BranchTrend {
    /// Residue of `n` modulo the period.
    pub residue: usize,
    pub trend: Trend,
}

/// `B_n = (a_n - a_inf) / rho^n` with diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SubexponentialProfile {
    pub rho: f64,
    pub a_inf: Option<f64>,
    pub period: usize,
    /// `ln B_n`, `None` where `a_n <= a_inf`.
    pub log_b: Vec<Option<f64>>,
    /// `max |B_n^(1/n) - 1|` over the last quarter of the indices.
    pub nth_root_deviation: f64,
    /// `B_N^(1/N)` at the last defined index.
    pub nth_root_last: Option<f64>,
    /// Direction of `B_n` over the second half of the indices.
    pub trend: Trend,
    /// Per residue class when the period exceeds one.
    pub branches: Vec<BranchTrend>,
}

impl SubexponentialProfile {
    pub fn b_series(&self) -> Vec<Option<f64>> {
        self.log_b.iter().map(|l| l.map(f64::exp)).collect()
    }

    /// Slope of `ln B_n` against `ln n` over `window`, optionally restricted
    /// to `n = residue (mod period)`.
    pub fn log_log_slope(&self, window: RangeInclusive<usize>, residue: Option<usize>) -> Option<f64> {
        let points: Vec<(f64, f64)> = window
            .filter(|&n| n >= 1 && n < self.log_b.len())
            .filter(|&n| residue.is_none_or(|r| n % self.period == r))
            .filter_map(|n| self.log_b[n].map(|l| ((n as f64).ln(), l)))
            .collect();
        (points.len() >= 2).then(|| fit_line(&points).0)
    }
}

pub fn subexponential_profile<T: LogTerm>(
    terms: &[T],
    rho: f64,
    a_inf: Option<f64>,
    period: usize,
) -> Result<SubexponentialProfile, SeqError> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(SeqError::RateOutOfRange(rho));
    }
    let period = period.max(1);
    let ln_rho = rho.ln();
    let log_b: Vec<Option<f64>> = terms
        .iter()
        .enumerate()
        .map(|(n, t)| {
            let ln_a = match a_inf {
                Some(limit) if limit != 0.0 => t.ln_excess(limit),
                _ => t.ln_term(),
            };
            ln_a.map(|l| l - n as f64 * ln_rho)
        })
        .collect();
    let len = log_b.len();
    let nth_root = |n: usize| log_b[n].map(|l| (l / n as f64).exp());
    let nth_root_deviation = ((3 * len / 4).max(1)..len)
        .filter_map(nth_root)
        .map(|r| (r - 1.0).abs())
        .fold(0.0, f64::max);
    let nth_root_last = (1..len).rev().find_map(nth_root);
    let tail = |residue: Option<usize>| -> Vec<f64> {
        (len / 2..len)
            .filter(|&n| residue.is_none_or(|r| n % period == r))
            .filter_map(|n| log_b[n])
            .collect()
    };
    let branches = if period > 1 {
        (0..period)
            .map(|residue| BranchTrend {
                residue,
                trend: trend_of(&tail(Some(residue))),
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(SubexponentialProfile {
        rho,
        a_inf,
        period,
        nth_root_deviation,
        nth_root_last,
        trend: trend_of(&tail(None)),
        branches,
        log_b,
    })
}

/// Fitted polynomial exponent of excursion probabilities.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ExponentFit {
    /// `kappa` in `e_n ~ C tilde_rho^n n^(-kappa)`.
    pub kappa: f64,
    pub intercept: f64,
    pub residual: f64,
    /// Period of the indices carrying nonzero terms.
    pub period: usize,
    pub residue: usize,
    pub points: usize,
}

/// gcd of the gaps between indices of nonzero terms, with the residue they
/// share.
pub fn support_period<T: LogTerm>(terms: &[T]) -> (usize, usize) {
    let live: Vec<usize> = terms
        .iter()
        .enumerate()
        .filter(|(_, t)| t.ln_term().is_some())
        .map(|(n, _)| n)
        .collect();
    let Some(&first) = live.first() else {
        return (1, 0);
    };
    let period = live
        .iter()
        .fold(0usize, |g, &n| num_integer::gcd(g, n - first))
        .max(1);
    (period, first % period)
}

pub fn excursion_exponent_fit<T: LogTerm>(
    terms: &[T],
    tilde_rho: f64,
    window: RangeInclusive<usize>,
) -> Result<ExponentFit, SeqError> {
    if !(tilde_rho > 0.0 && tilde_rho <= 1.0) {
        return Err(SeqError::RateOutOfRange(tilde_rho));
    }
    let (period, residue) = support_period(terms);
    let ln_rho = tilde_rho.ln();
    let points: Vec<(f64, f64)> = window
        .filter(|&n| n >= 1 && n < terms.len() && n % period == residue)
        .filter_map(|n| terms[n].ln_term().map(|l| ((n as f64).ln(), l - n as f64 * ln_rho)))
        .collect();
    if points.is_empty() {
        return Err(SeqError::AllZeroOnWindow);
    }
    if points.len() < 2 {
        return Err(SeqError::InsufficientTerms { needed: 2, got: 1 });
    }
    let (slope, intercept, residual) = fit_line(&points);
    Ok(ExponentFit {
        kappa: -slope,
        intercept,
        residual,
        period,
        residue,
        points: points.len(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RhoSource {
    FromLaplace,
    FromSequence,
}

/// Everything known about one exact sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SequenceVerdict {
    pub outcome: RecurrenceOutcome,
    pub rho_hat: Option<f64>,
    pub rho_source: RhoSource,
    pub rho_estimate: Option<RhoEstimate>,
    pub profile: Option<SubexponentialProfile>,
    /// Reasons a diagnostic was skipped.
    pub notes: Vec<String>,
}

/// Recurrence test plus growth diagnostics. The rate comes from the
/// Laplace analysis when given, else from the terms themselves.
pub fn sequence_verdict(
    terms: &[BigRational],
    k_max: usize,
    laplace_rho: Option<f64>,
    a_inf: Option<f64>,
    period: usize,
) -> Result<SequenceVerdict, SeqError> {
    let outcome = guess_recurrence(terms, k_max)?;
    let mut notes = Vec::new();
    let rho_estimate = match estimate_rho(terms) {
        Ok(e) => Some(e),
        Err(e) => {
            notes.push(format!("rate estimate skipped: {e}"));
            None
        }
    };
    let (rho_hat, rho_source) = match laplace_rho {
        Some(r) => (Some(r), RhoSource::FromLaplace),
        None => (rho_estimate.as_ref().map(|e| e.rho_hat), RhoSource::FromSequence),
    };
    let profile = match rho_hat.map(|r| subexponential_profile(terms, r, a_inf, period)) {
        Some(Ok(p)) => Some(p),
        Some(Err(e)) => {
            notes.push(format!("profile skipped: {e}"));
            None
        }
        None => None,
    };
    Ok(SequenceVerdict {
        outcome,
        rho_hat,
        rho_source,
        rho_estimate,
        profile,
        notes,
    })
}
