//! Minimal linear recurrences over the rationals.

use num_rational::BigRational;
use num_traits::{One, Zero};

/// Shortest linear recurrence generating `terms`, as found by the
/// Berlekamp–Massey algorithm over `Q`.
///
/// Returns `(order, c)` with `terms[n] = sum_{i=1}^{order} c[i-1] terms[n-i]`
/// for every `order <= n < terms.len()`. Trailing entries of `c` may be zero
/// when the first terms are not generated by the recurrence.
pub fn berlekamp_massey(terms: &[BigRational]) -> (usize, Vec<BigRational>) {
    // Connection polynomials C (current) and B (before the last length change).
    let mut c = vec![BigRational::one()];
    let mut b = vec![BigRational::one()];
    let mut length = 0usize;
    let mut shift = 1usize;
    let mut last_discrepancy = BigRational::one();

    for n in 0..terms.len() {
        let mut discrepancy = terms[n].clone();
        for i in 1..=length.min(c.len() - 1) {
            if !c[i].is_zero() {
                discrepancy += &c[i] * &terms[n - i];
            }
        }
        if discrepancy.is_zero() {
            shift += 1;
            continue;
        }
        let factor = &discrepancy / &last_discrepancy;
        let previous = c.clone();
        if c.len() < b.len() + shift {
            c.resize(b.len() + shift, BigRational::zero());
        }
        for (i, bi) in b.iter().enumerate() {
            if !bi.is_zero() {
                c[i + shift] -= &factor * bi;
            }
        }
        if 2 * length <= n {
            length = n + 1 - length;
            b = previous;
            last_discrepancy = discrepancy;
            shift = 1;
        } else {
            shift += 1;
        }
    }
    c.resize(length + 1, BigRational::zero());
    let coefficients = c[1..].iter().map(|v| -v).collect();
    (length, coefficients)
}

/// Index of the first term not reproduced by the recurrence, if any.
pub fn first_violation(terms: &[BigRational], coefficients: &[BigRational]) -> Option<usize> {
    let order = coefficients.len();
    (order..terms.len()).find(|&n| {
        let predicted = coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .fold(BigRational::zero(), |acc, (i, c)| acc + c * &terms[n - 1 - i]);
        predicted != terms[n]
    })
}

/// Extends a sequence by its recurrence.
pub fn extend(initial: &[BigRational], coefficients: &[BigRational], len: usize) -> Vec<BigRational> {
    let mut out = initial.to_vec();
    while out.len() < len {
        let n = out.len();
        let next = coefficients
            .iter()
            .enumerate()
            .fold(BigRational::zero(), |acc, (i, c)| acc + c * &out[n - 1 - i]);
        out.push(next);
    }
    out.truncate(len);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    fn ints(values: &[i64]) -> Vec<BigRational> {
        values.iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect()
    }

    #[test]
    fn fibonacci() {
        let fib = ints(&[1, 1, 2, 3, 5, 8, 13, 21, 34, 55]);
        let (order, c) = berlekamp_massey(&fib);
        assert_eq!(order, 2);
        assert_eq!(c, ints(&[1, 1]));
        assert_eq!(first_violation(&fib, &c), None);
    }

    #[test]
    fn constant_and_zero_sequences() {
        assert_eq!(berlekamp_massey(&ints(&[1; 8])), (1, ints(&[1])));
        assert_eq!(berlekamp_massey(&ints(&[0; 8])), (0, vec![]));
    }

    #[test]
    fn late_start() {
        // 0, 0, 0, 1, 1, 1, ...: order 4 with a zero tail coefficient.
        let seq = ints(&[0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1]);
        let (order, c) = berlekamp_massey(&seq);
        assert_eq!(order, 4);
        assert_eq!(first_violation(&seq, &c), None);
        assert!(c[3].is_zero());
    }

    #[test]
    fn rational_geometric() {
        let r = BigRational::new(BigInt::from(3), BigInt::from(7));
        let seq: Vec<BigRational> = (0..10).map(|n| num_traits::pow(r.clone(), n)).collect();
        assert_eq!(berlekamp_massey(&seq), (1, vec![r]));
    }

    #[test]
    fn violation_index() {
        let mut seq = ints(&[1, 1, 2, 3, 5, 8, 13]);
        seq.push(BigRational::from_integer(BigInt::from(22)));
        assert_eq!(first_violation(&seq, &ints(&[1, 1])), Some(7));
        assert_eq!(extend(&ints(&[1, 1]), &ints(&[1, 1]), 6), ints(&[1, 1, 2, 3, 5, 8]));
    }
}
