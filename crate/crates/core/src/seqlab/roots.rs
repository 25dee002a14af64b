//! Roots of characteristic polynomials: exact square-free factorization
//! over `Q` for multiplicities, then simultaneous floating-point root
//! finding on each square-free factor.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::rational::to_f64;

/// Dense polynomial over `Q`, lowest degree first, no trailing zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly(pub Vec<BigRational>);

impl Poly {
    pub fn new(mut coefficients: Vec<BigRational>) -> Self {
        while coefficients.last().is_some_and(Zero::is_zero) {
            coefficients.pop();
        }
        Self(coefficients)
    }

    pub fn degree(&self) -> Option<usize> {
        self.0.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    fn leading(&self) -> &BigRational {
        self.0.last().expect("nonzero polynomial")
    }

    pub fn monic(&self) -> Self {
        let lead = self.leading().clone();
        Self(self.0.iter().map(|c| c / &lead).collect())
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigInt::from(i))
                .collect(),
        )
    }

    /// Quotient and remainder.
    pub fn div_rem(&self, divisor: &Self) -> (Self, Self) {
        let dd = divisor.degree().expect("division by zero polynomial");
        let mut rem = self.0.clone();
        if rem.len() <= dd {
            return (Self(Vec::new()), self.clone());
        }
        let mut quot = vec![BigRational::zero(); rem.len() - dd];
        let lead = divisor.leading();
        for k in (0..quot.len()).rev() {
            let factor = &rem[k + dd] / lead;
            if factor.is_zero() {
                continue;
            }
            for (i, c) in divisor.0.iter().enumerate() {
                rem[k + i] -= &factor * c;
            }
            quot[k] = factor;
        }
        rem.truncate(dd);
        (Self::new(quot), Self::new(rem))
    }

    pub fn gcd(&self, other: &Self) -> Self {
        let (mut a, mut b) = (self.clone(), other.clone());
        while !b.is_zero() {
            let (_, r) = a.div_rem(&b);
            a = b;
            b = if r.is_zero() { r } else { r.monic() };
        }
        if a.is_zero() {
            a
        } else {
            a.monic()
        }
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.0.iter().map(|c| Complex64::new(to_f64(c), 0.0)).collect()
    }
}

/// Yun's algorithm: `p = prod_i f_i^i` with square-free, pairwise coprime
/// `f_i`. Returns `(f_i, i)` for the non-constant factors.
pub fn square_free_factorization(p: &Poly) -> Vec<(Poly, usize)> {
    let mut out = Vec::new();
    if p.degree().is_none_or(|d| d == 0) {
        return out;
    }
    let p = p.monic();
    let dp = p.derivative();
    let a0 = p.gcd(&dp);
    let mut b = p.div_rem(&a0).0;
    let mut c = dp.div_rem(&a0).0;
    let mut d = subtract(&c, &b.derivative());
    let mut multiplicity = 1;
    while b.degree().is_some_and(|deg| deg > 0) {
        let a = b.gcd(&d);
        if a.degree().is_some_and(|deg| deg > 0) {
            out.push((a.clone(), multiplicity));
        }
        b = b.div_rem(&a).0;
        c = d.div_rem(&a).0;
        d = subtract(&c, &b.derivative());
        multiplicity += 1;
    }
    out
}

fn subtract(a: &Poly, b: &Poly) -> Poly {
    let len = a.0.len().max(b.0.len());
    Poly::new(
        (0..len)
            .map(|i| {
                let x = a.0.get(i).cloned().unwrap_or_else(BigRational::zero);
                let y = b.0.get(i).cloned().unwrap_or_else(BigRational::zero);
                x - y
            })
            .collect(),
    )
}

fn horner(coefficients: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    let mut value = Complex64::zero();
    let mut derivative = Complex64::zero();
    for c in coefficients.iter().rev() {
        derivative = derivative * z + value;
        value = value * z + c;
    }
    (value, derivative)
}

/// All complex roots of a polynomial with (approximately) simple roots, by
/// Aberth–Ehrlich iteration followed by Newton polishing.
pub fn aberth_roots(coefficients: &[Complex64]) -> Vec<Complex64> {
    let n = coefficients.len().saturating_sub(1);
    if n == 0 {
        return Vec::new();
    }
    let lead = coefficients[n];
    let monic: Vec<Complex64> = coefficients.iter().map(|c| c / lead).collect();
    if n == 1 {
        return vec![-monic[0]];
    }
    // Cauchy bound on the root moduli.
    let radius = 1.0 + monic[..n].iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * (k as f64 + 0.25) / n as f64 + 0.4;
            Complex64::from_polar(radius.clamp(1e-3, 1e3) * 0.5, angle)
        })
        .collect();
    for _ in 0..2000 {
        let mut largest = 0.0f64;
        for k in 0..n {
            let (value, derivative) = horner(&monic, z[k]);
            if value == Complex64::zero() {
                continue;
            }
            let ratio = value / derivative;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != k)
                .map(|j| Complex64::one() / (z[k] - z[j]))
                .sum();
            let step = ratio / (Complex64::one() - ratio * repulsion);
            if step.is_finite() {
                z[k] -= step;
                largest = largest.max(step.norm() / (1.0 + z[k].norm()));
            }
        }
        if largest < 1e-16 {
            break;
        }
    }
    for root in &mut z {
        for _ in 0..3 {
            let (value, derivative) = horner(&monic, *root);
            if derivative.norm() == 0.0 {
                break;
            }
            let step = value / derivative;
            if step.is_finite() {
                *root -= step;
            }
        }
        if root.im.abs() <= 1e-14 * (1.0 + root.re.abs()) {
            root.im = 0.0;
        }
    }
    z.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(a.arg().total_cmp(&b.arg())));
    z
}
