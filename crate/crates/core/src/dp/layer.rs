//! Layer-by-layer propagation of confined path weights over a dense box.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;

use super::{DpConfig, DpError};
use crate::model::WalkModel;

/// Weights `P^x(tau > k, S_k = y)` for one `k`, stored as integer
/// numerators over the common denominator `D^k`.
#[derive(Clone, Debug)]
pub struct StateLayer {
    step: usize,
    grid: Grid,
    numerators: Vec<BigInt>,
    denominator: BigInt,
}

/// Row-major indexing of an axis-aligned lattice box.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Grid {
    pub lower: Vec<i64>,
    pub extent: Vec<usize>,
}

impl Grid {
    pub fn cells(&self) -> usize {
        self.extent.iter().product()
    }

    pub fn index_of(&self, y: &[i64]) -> Option<usize> {
        let mut index = 0;
        for ((&c, &lo), &ext) in y.iter().zip(&self.lower).zip(&self.extent) {
            let offset = c - lo;
            if offset < 0 || offset as usize >= ext {
                return None;
            }
            index = index * ext + offset as usize;
        }
        Some(index)
    }

    pub fn point_of(&self, mut index: usize) -> Vec<i64> {
        let mut y = vec![0; self.extent.len()];
        for i in (0..self.extent.len()).rev() {
            y[i] = self.lower[i] + (index % self.extent[i]) as i64;
            index /= self.extent[i];
        }
        y
    }
}

impl StateLayer {
    /// Number of steps taken.
    pub fn step(&self) -> usize {
        self.step
    }

    /// `D^k`.
    pub fn denominator(&self) -> &BigInt {
        &self.denominator
    }

    /// Bounding box of the stored points as `(lower corner, extent)`.
    pub fn bounds(&self) -> (&[i64], &[usize]) {
        (&self.grid.lower, &self.grid.extent)
    }

    /// Numerator over `D^k` at `y` (zero outside the box).
    pub fn numerator_at(&self, y: &[i64]) -> BigInt {
        self.grid.index_of(y)
            .map(|i| self.numerators[i].clone())
            .unwrap_or_default()
    }

    pub fn get(&self, y: &[i64]) -> BigRational {
        BigRational::new(self.numerator_at(y), self.denominator.clone())
    }

    /// Points carrying positive mass with their numerators.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<i64>, &BigInt)> + '_ {
        self.numerators
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| (self.grid.point_of(i), c))
    }

    /// Number of points carrying positive mass.
    pub fn support_size(&self) -> usize {
        self.numerators.iter().filter(|c| !c.is_zero()).count()
    }

    /// Sum of numerators, i.e. `D^k * a_k`.
    pub fn total_numerator(&self) -> BigInt {
        self.numerators.iter().sum()
    }

    /// `a_k = sum_y P^x(tau > k, S_k = y)`.
    pub fn mass(&self) -> BigRational {
        BigRational::new(self.total_numerator(), self.denominator.clone())
    }

    /// Per-coordinate marginals: `out[i][j]` is the numerator of the mass
    /// on points with `y_i = lower_i + j`.
    pub fn marginal_numerators(&self) -> Vec<Vec<BigInt>> {
        let extent = &self.grid.extent;
        let d = extent.len();
        let mut out: Vec<Vec<BigInt>> = extent.iter().map(|&e| vec![BigInt::zero(); e]).collect();
        for (index, c) in self.numerators.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let mut rest = index;
            for i in (0..d).rev() {
                out[i][rest % extent[i]] += c;
                rest /= extent[i];
            }
        }
        out
    }
}

/// Per-coordinate reach of the step set.
pub(crate) struct Reach {
    up: Vec<i64>,
    down: Vec<i64>,
}

impl Reach {
    pub fn of(model: &WalkModel) -> Self {
        let d = model.dimension();
        let mut up = vec![0; d];
        let mut down = vec![0; d];
        for v in model.dist().vectors() {
            for i in 0..d {
                up[i] = up[i].max(v[i]);
                down[i] = down[i].max(-v[i]);
            }
        }
        Self { up, down }
    }

    /// Box of points reachable in `k` steps from `x` that can still reach
    /// `target` in the remaining `horizon - k` steps. `None` if empty.
    pub fn layer_box(&self, x: &[i64], k: usize, horizon: usize, target: Option<&[i64]>) -> Option<Grid> {
        let k = k as i64;
        let rest = horizon as i64 - k;
        let mut lower = Vec::with_capacity(x.len());
        let mut extent = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let mut lo = 0.max(x[i] - k * self.down[i]);
            let mut hi = x[i] + k * self.up[i];
            if let Some(y) = target {
                lo = lo.max(y[i] - rest * self.up[i]);
                hi = hi.min(y[i] + rest * self.down[i]);
            }
            if hi < lo {
                return None;
            }
            lower.push(lo);
            extent.push((hi - lo + 1) as usize);
        }
        Some(Grid { lower, extent })
    }
}

fn volume(extent: &[usize]) -> u128 {
    extent.iter().map(|&e| e as u128).product()
}

/// Bytes needed to hold one layer of `cells` numerators with `bits` bits.
fn layer_bytes(cells: u128, bits: u64) -> u128 {
    let limbs = bits.div_ceil(64) as u128;
    cells * (std::mem::size_of::<BigInt>() as u128 + 8 * limbs)
}

/// Peak memory of a sweep to `horizon`: two live layers at the widest step.
pub fn estimate_memory(model: &WalkModel, horizon: usize, target: Option<&[i64]>) -> u128 {
    let reach = Reach::of(model);
    let (den, _) = model.dist().scaled_weights();
    let den_bits = den.bits().max(1);
    (0..=horizon)
        .filter_map(|k| {
            reach
                .layer_box(model.start(), k, horizon, target)
                .map(|grid| 2 * layer_bytes(volume(&grid.extent), k as u64 * den_bits + 1))
        })
        .max()
        .unwrap_or(0)
}

pub(crate) fn check_budget(model: &WalkModel, horizon: usize, target: Option<&[i64]>, config: &DpConfig) -> Result<(), DpError> {
    let estimated = estimate_memory(model, horizon, target);
    if estimated <= config.memory_budget as u128 {
        return Ok(());
    }
    let mut suggested = horizon;
    while suggested > 0 && estimate_memory(model, suggested, target) > config.memory_budget as u128 {
        suggested = suggested * 3 / 4;
    }
    Err(DpError::MemoryBudgetExceeded {
        estimated,
        budget: config.memory_budget,
        suggested_horizon: suggested,
    })
}

/// Runs the exact recursion from `layer_0 = {x -> 1}` to `horizon`, calling
/// `visit` on every layer in order. With `target` set, the box is pruned to
/// points that can still reach it.
pub fn sweep(
    model: &WalkModel,
    horizon: usize,
    target: Option<&[i64]>,
    config: &DpConfig,
    mut visit: impl FnMut(&StateLayer),
) -> Result<(), DpError> {
    if !model.cone().is_orthant() {
        return Err(DpError::UnsupportedCone);
    }
    if let Some(y) = target {
        if y.len() != model.dimension() || !model.cone().contains(y) {
            return Err(DpError::PointOutsideCone(y.to_vec()));
        }
    }
    check_budget(model, horizon, target, config)?;

    let reach = Reach::of(model);
    let (den, numerators) = model.dist().scaled_weights();
    let steps: Vec<(Vec<i64>, BigInt)> = model
        .dist()
        .vectors()
        .map(<[i64]>::to_vec)
        .zip(numerators)
        .collect();
    let x = model.start();

    let empty = |k: usize, denominator: BigInt| StateLayer {
        step: k,
        grid: Grid {
            lower: x.to_vec(),
            extent: vec![0; x.len()],
        },
        numerators: Vec::new(),
        denominator,
    };

    let mut layer = match reach.layer_box(x, 0, horizon, target) {
        Some(grid) => {
            let mut layer = StateLayer {
                step: 0,
                numerators: vec![BigInt::zero(); grid.cells()],
                grid,
                denominator: BigInt::one(),
            };
            let i = layer.grid.index_of(x).expect("start lies in its own box");
            layer.numerators[i] = BigInt::one();
            layer
        }
        None => empty(0, BigInt::one()),
    };
    visit(&layer);

    for k in 1..=horizon {
        let denominator = &layer.denominator * &den;
        let next = match reach.layer_box(x, k, horizon, target) {
            Some(grid) if !layer.numerators.is_empty() => {
                let prev = &layer;
                let numerators = (0..grid.cells())
                    .into_par_iter()
                    .map(|index| {
                        let y = grid.point_of(index);
                        let mut acc = BigInt::zero();
                        let mut from = vec![0i64; y.len()];
                        for (v, c) in &steps {
                            for i in 0..y.len() {
                                from[i] = y[i] - v[i];
                            }
                            if let Some(j) = prev.grid.index_of(&from) {
                                let w = &prev.numerators[j];
                                if !w.is_zero() {
                                    acc += w * c;
                                }
                            }
                        }
                        acc
                    })
                    .collect();
                StateLayer {
                    step: k,
                    grid,
                    numerators,
                    denominator,
                }
            }
            _ => empty(k, denominator),
        };
        layer = next;
        visit(&layer);
    }
    Ok(())
}
