//! Small dense geometry kernels: exact rank of lattice vectors, non-negative
//! least squares, and the two feasibility questions built on top of it
//! (does a cone `{x : <a_j, x> >= 0}` have interior, and do lattice
//! vectors positively span the whole space).

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

/// Rank of a family of integer vectors, computed exactly.
pub fn rank_exact(vectors: &[Vec<i64>], dimension: usize) -> usize {
    let mut rows: Vec<Vec<BigRational>> = vectors
        .iter()
        .map(|v| {
            v.iter()
                .map(|&c| BigRational::from_integer(BigInt::from(c)))
                .collect()
        })
        .collect();
    let mut rank = 0;
    for col in 0..dimension {
        let Some(pivot) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot);
        let pivot_row = rows[rank].clone();
        for row in rows.iter_mut().skip(rank + 1) {
            if row[col].is_zero() {
                continue;
            }
            let factor = &row[col] / &pivot_row[col];
            for c in col..dimension {
                let delta = &factor * &pivot_row[c];
                row[c] -= delta;
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Lawson–Hanson active-set solver for `min ||m x - b||` subject to `x >= 0`.
///
/// Returns the minimizer and the residual norm.
pub fn nnls(m: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let n = m.ncols();
    let scale = m.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let tol = 1e-10 * scale * (m.nrows().max(n) as f64);
    let mut x = DVector::<f64>::zeros(n);
    let mut passive = vec![false; n];
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = m.transpose() * (b - m * &x);
        let candidate = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&a, &c| w[a].total_cmp(&w[c]));
        let Some(j) = candidate else { break };
        passive[j] = true;

        for _ in 0..(2 * n + 10) {
            let z = restricted_least_squares(m, b, &passive);
            let infeasible: Vec<usize> = (0..n).filter(|&i| passive[i] && z[i] <= tol).collect();
            if infeasible.is_empty() {
                x = z;
                break;
            }
            let alpha = infeasible
                .iter()
                .map(|&i| {
                    let denom = x[i] - z[i];
                    if denom > 0.0 {
                        x[i] / denom
                    } else {
                        0.0
                    }
                })
                .fold(f64::INFINITY, f64::min)
                .clamp(0.0, 1.0);
            x += (z - &x) * alpha;
            for i in 0..n {
                if passive[i] && x[i] <= tol {
                    passive[i] = false;
                    x[i] = 0.0;
                }
            }
        }
    }
    let residual = (b - m * &x).norm();
    (x, residual)
}

fn restricted_least_squares(m: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..m.ncols()).filter(|&j| passive[j]).collect();
    let mut sub = DMatrix::<f64>::zeros(m.nrows(), cols.len());
    for (k, &j) in cols.iter().enumerate() {
        sub.set_column(k, &m.column(j));
    }
    let sol = sub
        .svd(true, true)
        .solve(b, 1e-12)
        .unwrap_or_else(|_| DVector::zeros(cols.len()));
    let mut z = DVector::<f64>::zeros(m.ncols());
    for (k, &j) in cols.iter().enumerate() {
        z[j] = sol[k];
    }
    z
}

/// True when the cone generated by `vectors` is all of `R^d`, i.e. the
/// vectors are not contained in any closed half-space through the origin.
///
/// Equivalent to: full rank, and `-(sum of vectors)` lies in the cone they
/// generate (then a strictly positive combination vanishes).
pub fn positively_spans(vectors: &[Vec<i64>], dimension: usize) -> bool {
    if rank_exact(vectors, dimension) < dimension {
        return false;
    }
    let mut m = DMatrix::<f64>::zeros(dimension, vectors.len());
    let mut target = DVector::<f64>::zeros(dimension);
    for (j, v) in vectors.iter().enumerate() {
        for i in 0..dimension {
            m[(i, j)] = v[i] as f64;
            target[i] -= v[i] as f64;
        }
    }
    let (_, residual) = nnls(&m, &target);
    residual <= 1e-9 * (1.0 + target.norm())
}

/// A point `x` with `<a_j, x> > 0` for every normal, if one exists.
///
/// Solves `min ||[A^T; 1^T] l - e||` over `l >= 0`; a positive residual
/// means the origin is outside the convex hull of the normals, and the
/// optimal `A^T l` then separates strictly.
pub fn cone_interior_witness(normals: &[Vec<f64>], dimension: usize) -> Option<Vec<f64>> {
    if normals.is_empty() {
        return Some(vec![0.0; dimension]);
    }
    let j = normals.len();
    let mut m = DMatrix::<f64>::zeros(dimension + 1, j);
    for (col, a) in normals.iter().enumerate() {
        let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        for i in 0..dimension {
            m[(i, col)] = a[i] / norm;
        }
        m[(dimension, col)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(dimension + 1);
    b[dimension] = 1.0;
    let (lambda, residual) = nnls(&m, &b);
    if residual * residual <= 1e-12 {
        return None;
    }
    let mut x = vec![0.0; dimension];
    for col in 0..j {
        for i in 0..dimension {
            x[i] += m[(i, col)] * lambda[col];
        }
    }
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return None;
    }
    x.iter_mut().for_each(|v| *v /= norm);
    let strictly_inside = normals.iter().all(|a| {
        let an = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() > 1e-12 * an
    });
    strictly_inside.then_some(x)
}
