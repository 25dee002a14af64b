//! Exact dynamic programming over confined lattice states.
//!
//! Survival and excursion sequences are computed with integer numerators
//! over a common power of the weight denominator, so every term is an
//! exact rational. The tilted functional runs the same recursion in
//! floating point with the tilted weights, and the escape bounds combine
//! the exact layers with the harmonic-type majorant `g`.

mod bounds;
mod layer;
mod tilted;

use std::fmt::Write as _;

use num_rational::BigRational;
use serde::Serialize;
use thiserror::Error;

use crate::laplace::LaplaceError;
use crate::model::WalkModel;
use crate::rational::{format_rational, to_f64};

pub use bounds::{
    boundary_exit_g, escape_probability_bounds, g_functional, EscapeBounds, EscapeBoundsSummary, EscapeInterval,
};
pub use layer::{estimate_memory, sweep, StateLayer};
pub use tilted::{tilted_survival_functional, TiltedFunctional};

/// Environment variable overriding the memory budget, in bytes.
pub const MEMORY_BUDGET_ENV: &str = "CONEWALK_MEM_BUDGET";

pub const DEFAULT_MEMORY_BUDGET: u64 = 2 << 30;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DpError {
    #[error("exact enumeration is only implemented for the orthant")]
    UnsupportedCone,
    #[error("estimated {estimated} bytes exceeds the budget of {budget} bytes; try --horizon {suggested_horizon}")]
    MemoryBudgetExceeded {
        estimated: u128,
        budget: u64,
        suggested_horizon: usize,
    },
    #[error("point {0:?} is outside the cone")]
    PointOutsideCone(Vec<i64>),
    #[error("escape bounds need a small-step walk")]
    NotSmallStep,
    #[error("escape bounds need a drift interior to the cone")]
    DriftNotInterior,
    #[error("no coordinate can decrease; the walk is trapped and g vanishes")]
    Trapped,
    #[error("escape intervals do not intersect (lo {lo} > hi {hi})")]
    EmptyIntersection { lo: String, hi: String },
    #[error(transparent)]
    Laplace(#[from] LaplaceError),
}

impl DpError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::UnsupportedCone => "UnsupportedCone",
            Self::MemoryBudgetExceeded { .. } => "MemoryBudgetExceeded",
            Self::PointOutsideCone(_) => "PointOutsideCone",
            Self::NotSmallStep => "NotSmallStep",
            Self::DriftNotInterior => "DriftNotInterior",
            Self::Trapped => "Trapped",
            Self::EmptyIntersection { .. } => "EmptyIntersection",
            Self::Laplace(e) => e.code(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DpConfig {
    pub memory_budget: u64,
}

impl Default for DpConfig {
    fn default() -> Self {
        Self {
            memory_budget: DEFAULT_MEMORY_BUDGET,
        }
    }
}

impl DpConfig {
    /// Default budget, overridden by `CONEWALK_MEM_BUDGET` when it parses.
    pub fn from_env() -> Self {
        let memory_budget = std::env::var(MEMORY_BUDGET_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_MEMORY_BUDGET);
        Self { memory_budget }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "type")]
pub enum SequenceKind {
    Survival,
    Excursion { target: Vec<i64> },
    GFunctional,
}

/// Exact terms indexed from 0 with their provenance.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactSequence {
    pub kind: SequenceKind,
    pub terms: Vec<BigRational>,
    pub model_hash: String,
    pub horizon: usize,
}

impl ExactSequence {
    pub fn floats(&self) -> Vec<f64> {
        self.terms.iter().map(to_f64).collect()
    }

    /// `n,numerator,denominator,value` rows with exact integers.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,numerator,denominator,value\n");
        for (n, term) in self.terms.iter().enumerate() {
            writeln!(out, "{n},{},{},{:e}", term.numer(), term.denom(), to_f64(term)).expect("string write");
        }
        out
    }

    pub fn term_strings(&self) -> Vec<String> {
        self.terms.iter().map(format_rational).collect()
    }
}

/// `a_k = P^x(tau > k)` for `k = 0..=horizon`.
pub fn survival_sequence(model: &WalkModel, horizon: usize, config: &DpConfig) -> Result<ExactSequence, DpError> {
    let mut terms = Vec::with_capacity(horizon + 1);
    sweep(model, horizon, None, config, |layer| terms.push(layer.mass()))?;
    Ok(ExactSequence {
        kind: SequenceKind::Survival,
        terms,
        model_hash: model.hash(),
        horizon,
    })
}

/// `e_k = P^x(tau > k, S_k = y)` for `k = 0..=horizon`.
pub fn excursion_sequence(
    model: &WalkModel,
    target: &[i64],
    horizon: usize,
    config: &DpConfig,
) -> Result<ExactSequence, DpError> {
    let mut terms = Vec::with_capacity(horizon + 1);
    sweep(model, horizon, Some(target), config, |layer| terms.push(layer.get(target)))?;
    Ok(ExactSequence {
        kind: SequenceKind::Excursion {
            target: target.to_vec(),
        },
        terms,
        model_hash: model.hash(),
        horizon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{brute_force_excursion, brute_force_survival, ConeSpec, StepDistribution};
    use num_traits::{One, Zero};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    pub(crate) fn model(d: usize, table: &[(&[i64], &str)], start: &[i64]) -> WalkModel {
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

    fn simple_2d() -> WalkModel {
        model(
            2,
            &[(&[1, 0], "1/4"), (&[0, -1], "1/4"), (&[-1, 0], "1/4"), (&[0, 1], "1/4")],
            &[0, 0],
        )
    }

    fn survival(m: &WalkModel, n: usize) -> Vec<BigRational> {
        survival_sequence(m, n, &DpConfig::default()).unwrap().terms
    }

    #[test]
    fn symmetric_line() {
        let m = model(1, &[(&[1], "1/2"), (&[-1], "1/2")], &[0]);
        assert_eq!(
            survival(&m, 6),
            vec![q(1, 1), q(1, 2), q(1, 2), q(3, 8), q(3, 8), q(5, 16), q(5, 16)]
        );
    }

    #[test]
    fn trapped_walk_never_exits() {
        let m = model(2, &[(&[1, 0], "1/2"), (&[0, 1], "1/2")], &[0, 0]);
        assert!(survival(&m, 30).iter().all(One::is_one));
    }

    #[test]
    fn five_step_walk() {
        assert_eq!(survival(&five_step(), 2), vec![q(1, 1), q(3, 5), q(13, 25)]);
        let e = excursion_sequence(&five_step(), &[0, 0], 2, &DpConfig::default()).unwrap();
        assert_eq!(e.terms, vec![q(1, 1), q(0, 1), q(2, 25)]);
        let e = excursion_sequence(&five_step(), &[0, 0], 0, &DpConfig::default()).unwrap();
        assert_eq!(e.terms, vec![q(1, 1)]);
    }

    #[test]
    fn simple_walk_excursion() {
        let e = excursion_sequence(&simple_2d(), &[0, 0], 2, &DpConfig::default()).unwrap();
        assert_eq!(e.terms[2], q(1, 8));
    }

    #[test]
    fn unreachable_target_gives_zeros() {
        let e = excursion_sequence(&five_step(), &[7, 7], 3, &DpConfig::default()).unwrap();
        assert!(e.terms.iter().all(Zero::is_zero));
    }

    #[test]
    fn matches_enumeration() {
        let models = [
            five_step(),
            simple_2d(),
            model(1, &[(&[1], "1/4"), (&[-1], "3/4")], &[2]),
            model(2, &[(&[1, 1], "1/3"), (&[-1, 0], "1/3"), (&[0, -1], "1/3")], &[1, 0]),
        ];
        for m in &models {
            let n = 9;
            assert_eq!(survival(m, n), brute_force_survival(m, n).unwrap());
            let y = m.start().to_vec();
            let e = excursion_sequence(m, &y, n, &DpConfig::default()).unwrap();
            assert_eq!(e.terms, brute_force_excursion(m, &y, n).unwrap());
        }
    }

    #[test]
    fn layer_mass_and_support() {
        let m = five_step();
        let mut checked = 0;
        sweep(&m, 6, None, &DpConfig::default(), |layer| {
            let from_points = layer
                .iter()
                .fold(BigRational::zero(), |acc, (_, c)| acc + BigRational::new(c.clone(), layer.denominator().clone()));
            assert_eq!(from_points, layer.mass());
            assert!(layer.iter().all(|(y, _)| m.cone().contains(&y)));
            checked += 1;
        })
        .unwrap();
        assert_eq!(checked, 7);
    }

    #[test]
    fn rejects_polyhedral_cones_and_outside_targets() {
        let dist = StepDistribution::uniform(2, &[vec![1, 0], vec![-1, 0], vec![0, 1], vec![0, -1]]).unwrap();
        let cone = ConeSpec::polyhedral(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let m = WalkModel::new(dist, cone, vec![0, 0]).unwrap();
        assert_eq!(survival_sequence(&m, 3, &DpConfig::default()), Err(DpError::UnsupportedCone));
        assert!(matches!(
            excursion_sequence(&five_step(), &[-1, 0], 3, &DpConfig::default()),
            Err(DpError::PointOutsideCone(_))
        ));
    }

    #[test]
    fn memory_budget() {
        let tiny = DpConfig { memory_budget: 10_000 };
        match survival_sequence(&five_step(), 200, &tiny) {
            Err(DpError::MemoryBudgetExceeded { suggested_horizon, .. }) => {
                assert!(suggested_horizon < 200);
                assert!(estimate_memory(&five_step(), suggested_horizon, None) <= 10_000);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_export() {
        let seq = survival_sequence(&five_step(), 2, &DpConfig::default()).unwrap();
        assert_eq!(
            seq.to_csv(),
            "n,numerator,denominator,value\n0,1,1,1e0\n1,3,5,6e-1\n2,13,25,5.2e-1\n"
        );
    }
}
