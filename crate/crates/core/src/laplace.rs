//! Laplace transform of the increment law and its minimization over the
//! dual cone.
//!
//! For a finitely supported law, `L(t) = sum_v w_v exp(<t, v>)` is smooth
//! and strictly convex when the support spans `R^d`. The minimum of `L`
//! over the dual cone `K*` gives the exponential decay rate of the
//! survival probabilities, and tilting the law by the minimizer yields a
//! walk whose drift lies in `K` and is orthogonal to the minimizer.

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::geometry::positively_spans;
use crate::model::{ConeSpec, StepDistribution};

/// Largest exponent for which `exp` stays finite.
const MAX_EXPONENT: f64 = 709.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LaplaceError {
    #[error("Laplace transform overflows at t = {0:?}")]
    Overflow(Vec<f64>),
    #[error("L decreases without bound on the dual cone (|t| exceeded {radius})")]
    Unbounded { radius: f64 },
    #[error("minimization did not converge in {max_iter} iterations (residual {residual:.3e})")]
    NotConverged { max_iter: usize, residual: f64 },
    #[error("support lies in a closed half-space; L has no global minimum")]
    NoGlobalMinimum,
}

impl LaplaceError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::Overflow(_) => "Overflow",
            Self::Unbounded { .. } => "Unbounded",
            Self::NotConverged { .. } => "NotConverged",
            Self::NoGlobalMinimum => "NoGlobalMinimum",
        }
    }
}

/// `L(t)`, `grad L(t)` and the Hessian at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplaceEval {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<Vec<f64>>,
}

/// Anything with a finitely supported lattice increment law.
pub trait StepLaw {
    fn laplace(&self) -> LaplaceTransform;
}

impl StepLaw for StepDistribution {
    fn laplace(&self) -> LaplaceTransform {
        let vectors: Vec<Vec<i64>> = self.vectors().map(<[i64]>::to_vec).collect();
        LaplaceTransform::from_weights(self.dimension(), &vectors, &self.weights_f64())
    }
}

impl StepLaw for TiltedDistribution {
    fn laplace(&self) -> LaplaceTransform {
        LaplaceTransform::from_weights(self.vectors.first().map_or(0, Vec::len), &self.vectors, &self.weights)
    }
}

/// Evaluator for `L(t) = sum_v w_v exp(<t, v>)`.
#[derive(Clone, Debug)]
pub struct LaplaceTransform {
    dimension: usize,
    vectors: Vec<Vec<i64>>,
    ln_weights: Vec<f64>,
}

impl LaplaceTransform {
    pub fn from_weights(dimension: usize, vectors: &[Vec<i64>], weights: &[f64]) -> Self {
        Self {
            dimension,
            vectors: vectors.to_vec(),
            ln_weights: weights.iter().map(|w| w.ln()).collect(),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vectors(&self) -> &[Vec<i64>] {
        &self.vectors
    }

    fn exponents(&self, t: &[f64]) -> (Vec<f64>, f64) {
        let e: Vec<f64> = self
            .vectors
            .iter()
            .zip(&self.ln_weights)
            .map(|(v, lw)| lw + v.iter().zip(t).map(|(&a, b)| a as f64 * b).sum::<f64>())
            .collect();
        let max = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (e, max)
    }

    /// `ln L(t)`, finite for every finite `t`.
    pub fn ln_value(&self, t: &[f64]) -> f64 {
        let (e, max) = self.exponents(t);
        max + e.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
    }

    /// Value, gradient and Hessian, factoring out the largest exponent
    /// before summation.
    pub fn eval(&self, t: &[f64]) -> Result<LaplaceEval, LaplaceError> {
        assert_eq!(t.len(), self.dimension, "t has the wrong dimension");
        let d = self.dimension;
        let (e, max) = self.exponents(t);
        let mut value = 0.0;
        let mut gradient = vec![0.0; d];
        let mut hessian = vec![vec![0.0; d]; d];
        for (v, x) in self.vectors.iter().zip(&e) {
            let w = (x - max).exp();
            value += w;
            for i in 0..d {
                let wi = w * v[i] as f64;
                gradient[i] += wi;
                for j in 0..d {
                    hessian[i][j] += wi * v[j] as f64;
                }
            }
        }
        if max + value.ln() > MAX_EXPONENT {
            return Err(LaplaceError::Overflow(t.to_vec()));
        }
        let scale = max.exp();
        value *= scale;
        gradient.iter_mut().for_each(|g| *g *= scale);
        hessian.iter_mut().flatten().for_each(|h| *h *= scale);
        Ok(LaplaceEval {
            value,
            gradient,
            hessian,
        })
    }
}

/// Evaluates `L`, `grad L`, `Hess L` of the law at `t`.
pub fn laplace_eval(law: &impl StepLaw, t: &[f64]) -> Result<LaplaceEval, LaplaceError> {
    law.laplace().eval(t)
}

/// Position of the drift relative to the cone.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum DriftClass {
    InteriorDrift,
    BoundaryDrift,
    ExteriorDrift,
}

impl DriftClass {
    /// Drift in the closed cone.
    pub fn in_cone(self) -> bool {
        !matches!(self, Self::ExteriorDrift)
    }
}

/// Classifies an exactly computed drift; exact for the orthant, with
/// tolerance `1e-12` against float normals otherwise.
pub fn classify_drift(drift: &[BigRational], cone: &ConeSpec) -> DriftClass {
    if cone.is_orthant() {
        if drift.iter().any(Signed::is_negative) {
            DriftClass::ExteriorDrift
        } else if drift.iter().all(Signed::is_positive) {
            DriftClass::InteriorDrift
        } else {
            DriftClass::BoundaryDrift
        }
    } else {
        let m: Vec<f64> = drift.iter().map(crate::rational::to_f64).collect();
        let pairings: Vec<f64> = cone
            .normals()
            .iter()
            .map(|a| a.iter().zip(&m).map(|(p, q)| p * q).sum())
            .collect();
        const TOL: f64 = 1e-12;
        if pairings.iter().any(|&s| s < -TOL) {
            DriftClass::ExteriorDrift
        } else if pairings.iter().all(|&s| s > TOL) {
            DriftClass::InteriorDrift
        } else {
            DriftClass::BoundaryDrift
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MinimizeOptions {
    /// Target KKT residual.
    pub tol: f64,
    pub max_iter: usize,
    /// `|t|` beyond which the problem is declared unbounded.
    pub radius: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 200,
            radius: 50.0,
        }
    }
}

/// Minimizer of `L` on the dual cone.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DualMinimum {
    pub t0: Vec<f64>,
    pub rho: f64,
    /// Complementarity residual `max_j |min(lambda_j, <g_j, grad L>)|`
    /// combined with `|<t0, grad L(t0)>|`.
    pub kkt_residual: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
}

/// Minimizes `L` over `K*` by projected Newton in generator coordinates
/// `t = sum_j lambda_j g_j`, `lambda >= 0`.
///
/// For the orthant the generators are the standard basis, so this is
/// projected Newton on `t >= 0` directly. Steps that fail to descend fall
/// back to a projected gradient step with Armijo backtracking.
pub fn minimize_over_dual(
    law: &impl StepLaw,
    cone: &ConeSpec,
    options: MinimizeOptions,
) -> Result<DualMinimum, LaplaceError> {
    let lt = law.laplace();
    let d = lt.dimension();
    let generators = DMatrix::from_fn(cone.dual_generators().len(), d, |j, i| cone.dual_generators()[j][i]);
    let j_count = generators.nrows();

    let to_t = |lambda: &DVector<f64>| -> Vec<f64> { (generators.transpose() * lambda).iter().copied().collect() };
    let reduced = |lambda: &DVector<f64>| -> Result<(f64, DVector<f64>, DMatrix<f64>), LaplaceError> {
        let ev = lt.eval(&to_t(lambda))?;
        let g = DVector::from_vec(ev.gradient);
        let h = DMatrix::from_fn(d, d, |i, k| ev.hessian[i][k]);
        Ok((ev.value, &generators * g, &generators * h * generators.transpose()))
    };
    // Complementarity plus |<t, grad L>| = |<lambda, G grad L>|; the second
    // term keeps minimizing sequences escaping to infinity from stopping.
    let residual_of = |lambda: &DVector<f64>, grad: &DVector<f64>| -> f64 {
        let complementarity = lambda
            .iter()
            .zip(grad.iter())
            .map(|(l, g)| l.min(*g).abs())
            .fold(0.0, f64::max);
        complementarity.max(lambda.dot(grad).abs())
    };

    let mut lambda = DVector::<f64>::zeros(j_count);
    let (mut value, mut grad, mut hess) = reduced(&lambda)?;
    let mut residual = residual_of(&lambda, &grad);

    for iteration in 0..=options.max_iter {
        let t_norm = to_t(&lambda).iter().map(|v| v * v).sum::<f64>().sqrt();
        if t_norm > options.radius {
            return Err(LaplaceError::Unbounded {
                radius: options.radius,
            });
        }
        let eps = residual.min(1e-3);
        let active: Vec<bool> = (0..j_count).map(|j| lambda[j] <= eps && grad[j] > 0.0).collect();
        let direction = newton_direction(&grad, &hess, &active)
            .filter(|dir| dir.dot(&grad) < 0.0)
            .unwrap_or_else(|| -grad.clone());
        // A vanishing gradient alone is not enough: along a direction where
        // L flattens out at infinity the curvature vanishes with it and the
        // Newton step stays long.
        let projected_step = (&lambda + &direction).map(|v| v.max(0.0)) - &lambda;
        let settled = projected_step.amax() <= 1e-6 * (1.0 + lambda.amax());
        if residual <= options.tol && settled {
            return Ok(finish_dual(&lt, to_t(&lambda), &lambda, &grad, residual, iteration));
        }
        if iteration == options.max_iter {
            break;
        }

        let mut accepted = false;
        for use_gradient in [false, true] {
            let dir = if use_gradient { -grad.clone() } else { direction.clone() };
            let mut alpha = 1.0;
            for _ in 0..80 {
                let candidate = (&lambda + &dir * alpha).map(|v| v.max(0.0));
                let t_candidate = to_t(&candidate);
                let Ok((new_value, new_grad, new_hess)) = reduced(&candidate) else {
                    alpha *= 0.5;
                    continue;
                };
                let predicted: f64 = (0..j_count)
                    .map(|j| {
                        if active[j] && !use_gradient {
                            grad[j] * (lambda[j] - candidate[j])
                        } else {
                            -alpha * grad[j] * dir[j]
                        }
                    })
                    .sum();
                let new_residual = residual_of(&candidate, &new_grad);
                let armijo = new_value <= value - 1e-4 * predicted && new_value < value;
                let flat = new_value <= value + 4.0 * f64::EPSILON * value.abs() && new_residual < residual;
                if armijo || flat {
                    lambda = candidate;
                    value = new_value;
                    grad = new_grad;
                    hess = new_hess;
                    residual = new_residual;
                    accepted = true;
                    let _ = t_candidate;
                    break;
                }
                alpha *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            return Err(LaplaceError::NotConverged {
                max_iter: options.max_iter,
                residual,
            });
        }
    }
    Err(LaplaceError::NotConverged {
        max_iter: options.max_iter,
        residual,
    })
}

/// Newton step on the free block, scaled gradient on the active block.
fn newton_direction(grad: &DVector<f64>, hess: &DMatrix<f64>, active: &[bool]) -> Option<DVector<f64>> {
    let n = grad.len();
    let free: Vec<usize> = (0..n).filter(|&j| !active[j]).collect();
    let mut dir = DVector::<f64>::zeros(n);
    for j in (0..n).filter(|&j| active[j]) {
        let h = hess[(j, j)];
        dir[j] = -grad[j] / if h > 0.0 { h } else { 1.0 };
    }
    if free.is_empty() {
        return Some(dir);
    }
    let hf = DMatrix::from_fn(free.len(), free.len(), |a, b| hess[(free[a], free[b])]);
    let gf = DVector::from_fn(free.len(), |a, _| grad[free[a]]);
    let diag_max = hf.diagonal().iter().copied().fold(0.0, f64::max);
    let mut shift = 0.0;
    for _ in 0..12 {
        let shifted = &hf + DMatrix::identity(free.len(), free.len()) * shift;
        if let Some(ch) = shifted.cholesky() {
            let step = ch.solve(&(-&gf));
            for (a, &j) in free.iter().enumerate() {
                dir[j] = step[a];
            }
            return Some(dir);
        }
        shift = if shift == 0.0 { 1e-12 * diag_max.max(1e-300) } else { shift * 100.0 };
    }
    None
}

fn finish_dual(
    lt: &LaplaceTransform,
    t0: Vec<f64>,
    lambda: &DVector<f64>,
    grad_lambda: &DVector<f64>,
    residual: f64,
    iterations: usize,
) -> DualMinimum {
    let at_origin = lambda.iter().all(|&l| l == 0.0);
    let ev = lt.eval(&t0).expect("finite at the minimizer");
    let orthogonality: f64 = t0.iter().zip(&ev.gradient).map(|(a, b)| a * b).sum::<f64>().abs();
    let _ = grad_lambda;
    DualMinimum {
        rho: if at_origin { 1.0 } else { ev.value },
        kkt_residual: residual.max(orthogonality),
        gradient: ev.gradient,
        t0,
        iterations,
    }
}

/// Unconstrained minimizer of `L`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GlobalMinimum {
    pub t: Vec<f64>,
    pub rho: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
}

/// Damped Newton from the origin. Requires the support to positively span
/// `R^d`; otherwise no minimum exists.
pub fn minimize_global(law: &impl StepLaw, options: MinimizeOptions) -> Result<GlobalMinimum, LaplaceError> {
    let lt = law.laplace();
    let d = lt.dimension();
    if !positively_spans(lt.vectors(), d) {
        return Err(LaplaceError::NoGlobalMinimum);
    }
    let mut t = vec![0.0; d];
    let mut ev = lt.eval(&t)?;
    let inf_norm = |g: &[f64]| g.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    for iteration in 0..=options.max_iter {
        let gnorm = inf_norm(&ev.gradient);
        if gnorm <= options.tol {
            let at_origin = t.iter().all(|&v| v == 0.0);
            return Ok(GlobalMinimum {
                rho: if at_origin { 1.0 } else { ev.value },
                t,
                gradient_norm: gnorm,
                iterations: iteration,
            });
        }
        if iteration == options.max_iter {
            break;
        }
        let g = DVector::from_vec(ev.gradient.clone());
        let h = DMatrix::from_fn(d, d, |i, k| ev.hessian[i][k]);
        let dir = h
            .cholesky()
            .map(|ch| ch.solve(&(-&g)))
            .filter(|dir| dir.dot(&g) < 0.0)
            .unwrap_or_else(|| -g.clone());
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..80 {
            let candidate: Vec<f64> = t.iter().zip(dir.iter()).map(|(a, b)| a + alpha * b).collect();
            if let Ok(next) = lt.eval(&candidate) {
                let armijo = next.value <= ev.value + 1e-4 * alpha * dir.dot(&g) && next.value < ev.value;
                let flat = next.value <= ev.value + 4.0 * f64::EPSILON * ev.value
                    && inf_norm(&next.gradient) < gnorm;
                if armijo || flat {
                    t = candidate;
                    ev = next;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(LaplaceError::NotConverged {
                max_iter: options.max_iter,
                residual: gnorm,
            });
        }
        if t.iter().map(|v| v * v).sum::<f64>().sqrt() > options.radius {
            return Err(LaplaceError::Unbounded {
                radius: options.radius,
            });
        }
    }
    Err(LaplaceError::NotConverged {
        max_iter: options.max_iter,
        residual: inf_norm(&ev.gradient),
    })
}

/// Exponentially tilted law `w_v exp(<t, v>) / L(t)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TiltedDistribution {
    pub vectors: Vec<Vec<i64>>,
    pub weights: Vec<f64>,
    pub tilt: Vec<f64>,
    /// `L(t)`.
    pub rho: f64,
    /// Mean of the tilted law, `grad L(t) / L(t)`.
    pub drift: Vec<f64>,
}

pub fn tilt_distribution(dist: &StepDistribution, t: &[f64]) -> Result<TiltedDistribution, LaplaceError> {
    let lt = dist.laplace();
    let ev = lt.eval(t)?;
    let vectors: Vec<Vec<i64>> = dist.vectors().map(<[i64]>::to_vec).collect();
    let weights = if t.iter().all(|&v| v == 0.0) {
        dist.weights_f64()
    } else {
        let (e, max) = lt.exponents(t);
        let raw: Vec<f64> = e.iter().map(|x| (x - max).exp()).collect();
        let total: f64 = raw.iter().sum();
        raw.iter().map(|w| w / total).collect()
    };
    let d = dist.dimension();
    let drift = (0..d)
        .map(|i| vectors.iter().zip(&weights).map(|(v, w)| w * v[i] as f64).sum())
        .collect();
    Ok(TiltedDistribution {
        vectors,
        weights,
        tilt: t.to_vec(),
        rho: ev.value,
        drift,
    })
}

/// Everything the downstream stages need from the transform.
#[derive(Clone, Debug, PartialEq)]
pub struct LaplaceAnalysis {
    pub t0: Vec<f64>,
    pub rho: f64,
    pub drift: Vec<BigRational>,
    pub classification: DriftClass,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Unconstrained minimum, when it exists.
    pub global: Option<GlobalMinimum>,
    pub global_error: Option<LaplaceError>,
    pub tilted: TiltedDistribution,
}

impl LaplaceAnalysis {
    pub fn tilde_rho(&self) -> Option<f64> {
        self.global.as_ref().map(|g| g.rho)
    }
}

pub fn analyze(dist: &StepDistribution, cone: &ConeSpec, options: MinimizeOptions) -> Result<LaplaceAnalysis, LaplaceError> {
    let drift = dist.drift();
    let classification = classify_drift(&drift, cone);
    let min = minimize_over_dual(dist, cone, options)?;
    let (global, global_error) = match minimize_global(dist, options) {
        Ok(g) => (Some(g), None),
        Err(e) => (None, Some(e)),
    };
    let tilted = tilt_distribution(dist, &min.t0)?;
    Ok(LaplaceAnalysis {
        t0: min.t0,
        rho: min.rho,
        drift,
        classification,
        kkt_residual: min.kkt_residual,
        iterations: min.iterations,
        global,
        global_error,
        tilted,
    })
}

/// `true` when every entry of the exact drift is zero.
pub fn is_centered(drift: &[BigRational]) -> bool {
    drift.iter().all(Zero::is_zero)
}
