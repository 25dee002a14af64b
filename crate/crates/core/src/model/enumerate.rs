//! Exhaustive path enumeration. Used as an oracle for the layered DP:
//! every confined step sequence is visited individually and its weight
//! product accumulated, with no merging of paths that share an endpoint.

use std::ops::{AddAssign, Mul};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use super::{ModelError, WalkModel};

pub const MAX_BRUTE_FORCE_HORIZON: usize = 14;
pub const MAX_BRUTE_FORCE_PATHS: f64 = 1e8;

/// `P^x(tau > k)` for `k = 0..=horizon` by visiting every confined path.
pub fn brute_force_survival(model: &WalkModel, horizon: usize) -> Result<Vec<BigRational>, ModelError> {
    let sums = enumerate(model, horizon, None)?;
    Ok(finish(model, sums))
}

/// `P^x(tau > k, S_k = target)` for `k = 0..=horizon` by path enumeration.
pub fn brute_force_excursion(
    model: &WalkModel,
    target: &[i64],
    horizon: usize,
) -> Result<Vec<BigRational>, ModelError> {
    if target.len() != model.dimension() || !model.cone().contains(target) {
        return Err(ModelError::PointOutsideCone(target.to_vec()));
    }
    let sums = enumerate(model, horizon, Some(target))?;
    Ok(finish(model, sums))
}

fn finish(model: &WalkModel, sums: Vec<BigInt>) -> Vec<BigRational> {
    let (den, _) = model.dist().scaled_weights();
    let mut scale = BigInt::one();
    sums.into_iter()
        .map(|s| {
            let term = BigRational::new(s, scale.clone());
            scale *= &den;
            term
        })
        .collect()
}

fn check_budget(model: &WalkModel, horizon: usize) -> Result<(), ModelError> {
    let paths = (model.dist().len() as f64).powi(horizon as i32);
    if horizon > MAX_BRUTE_FORCE_HORIZON || paths > MAX_BRUTE_FORCE_PATHS {
        return Err(ModelError::HorizonTooLarge {
            horizon,
            paths,
            max_horizon: MAX_BRUTE_FORCE_HORIZON,
            max_paths: MAX_BRUTE_FORCE_PATHS,
        });
    }
    Ok(())
}

/// Path weights. Exact either way; `u128` is used whenever the largest
/// path weight, `D^horizon`, fits.
trait Weight: Clone + Send + Sync + Zero + One + for<'a> AddAssign<&'a Self> + for<'a> Mul<&'a Self, Output = Self> {}
impl<T> Weight for T where T: Clone + Send + Sync + Zero + One + for<'a> AddAssign<&'a T> + for<'a> Mul<&'a T, Output = T> {}

/// Per-depth sums of scaled path weights. With `target` set only paths
/// ending there are counted.
fn enumerate(model: &WalkModel, horizon: usize, target: Option<&[i64]>) -> Result<Vec<BigInt>, ModelError> {
    check_budget(model, horizon)?;
    let (den, numerators) = model.dist().scaled_weights();
    let fits = den.bits() as usize * horizon < 127;
    if fits {
        let small: Vec<u128> = numerators.iter().map(|c| c.to_u128().expect("numerator below denominator")).collect();
        Ok(enumerate_with(model, horizon, target, &small).into_iter().map(BigInt::from).collect())
    } else {
        Ok(enumerate_with(model, horizon, target, &numerators))
    }
}

fn enumerate_with<W: Weight>(model: &WalkModel, horizon: usize, target: Option<&[i64]>, numerators: &[W]) -> Vec<W> {
    let steps: Vec<(&[i64], &W)> = model.dist().vectors().zip(numerators.iter()).collect();
    let start = model.start().to_vec();

    let mut sums = vec![W::zero(); horizon + 1];
    if target.is_none_or(|t| t == start.as_slice()) {
        sums[0] = W::one();
    }
    if horizon == 0 {
        return sums;
    }

    // Partition the path space by first step; exact sums merge in any order.
    let partials: Vec<Vec<W>> = steps
        .par_iter()
        .map(|(v, c)| {
            let mut acc = vec![W::zero(); horizon + 1];
            let mut pos: Vec<i64> = start.iter().zip(v.iter()).map(|(a, b)| a + b).collect();
            if model.cone().contains(&pos) {
                let walker = Walker {
                    model,
                    steps: &steps,
                    horizon,
                    target,
                };
                walker.visit(&mut pos, (*c).clone(), 1, &mut acc);
            }
            acc
        })
        .collect();
    for partial in partials {
        for (s, p) in sums.iter_mut().zip(&partial) {
            *s += p;
        }
    }
    sums
}

struct Walker<'a, W> {
    model: &'a WalkModel,
    steps: &'a [(&'a [i64], &'a W)],
    horizon: usize,
    target: Option<&'a [i64]>,
}

impl<W: Weight> Walker<'_, W> {
    fn visit(&self, pos: &mut Vec<i64>, weight: W, depth: usize, acc: &mut [W]) {
        if self.target.is_none_or(|t| t == pos.as_slice()) {
            acc[depth] += &weight;
        }
        if depth == self.horizon {
            return;
        }
        for (v, c) in self.steps {
            pos.iter_mut().zip(v.iter()).for_each(|(p, d)| *p += d);
            if self.model.cone().contains(pos) {
                self.visit(pos, weight.clone() * *c, depth + 1, acc);
            }
            pos.iter_mut().zip(v.iter()).for_each(|(p, d)| *p -= d);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConeSpec, StepDistribution};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn five_step() -> WalkModel {
        let dist = StepDistribution::uniform(2, &[vec![1, 0], vec![0, -1], vec![-1, 0], vec![0, 1], vec![1, 1]])
            .unwrap();
        WalkModel::new(dist, ConeSpec::orthant(2), vec![0, 0]).unwrap()
    }

    fn symmetric_line() -> WalkModel {
        let dist = StepDistribution::uniform(1, &[vec![1], vec![-1]]).unwrap();
        WalkModel::new(dist, ConeSpec::orthant(1), vec![0]).unwrap()
    }

    #[test]
    fn symmetric_line_survival() {
        let a = brute_force_survival(&symmetric_line(), 3).unwrap();
        assert_eq!(a, vec![q(1, 1), q(1, 2), q(1, 2), q(3, 8)]);
    }

    #[test]
    fn trapped_never_exits() {
        let dist = StepDistribution::uniform(2, &[vec![1, 0], vec![0, 1]]).unwrap();
        let m = WalkModel::new(dist, ConeSpec::orthant(2), vec![0, 0]).unwrap();
        assert_eq!(brute_force_survival(&m, 5).unwrap(), vec![q(1, 1); 6]);
    }

    #[test]
    fn five_step_two_steps() {
        assert_eq!(
            brute_force_survival(&five_step(), 2).unwrap(),
            vec![q(1, 1), q(3, 5), q(13, 25)]
        );
    }

    #[test]
    fn excursions() {
        let e = brute_force_excursion(&five_step(), &[0, 0], 0).unwrap();
        assert_eq!(e, vec![q(1, 1)]);
        let e = brute_force_excursion(&five_step(), &[0, 0], 2).unwrap();
        assert_eq!(e[2], q(2, 25));
        let e = brute_force_excursion(&symmetric_line(), &[0], 2).unwrap();
        assert_eq!(e[2], q(1, 4));
        assert!(matches!(
            brute_force_excursion(&five_step(), &[-1, 0], 2),
            Err(ModelError::PointOutsideCone(_))
        ));
    }

    #[test]
    fn excursions_sum_to_survival() {
        let m = five_step();
        let n = 4;
        let a = brute_force_survival(&m, n).unwrap();
        let mut total = BigRational::zero();
        for x in 0..=n as i64 {
            for y in 0..=n as i64 {
                total += &brute_force_excursion(&m, &[x, y], n).unwrap()[n];
            }
        }
        assert_eq!(total, a[n]);
    }

    #[test]
    fn horizon_guard() {
        assert!(matches!(
            brute_force_survival(&five_step(), 15),
            Err(ModelError::HorizonTooLarge { .. })
        ));
        assert!(matches!(
            brute_force_survival(&five_step(), 12),
            Err(ModelError::HorizonTooLarge { .. })
        ));
    }
}
