//! Sums of scaled exponentials `Σ cᵢ·e^{eᵢ}` kept in unevaluated form, so
//! that ratios of large exponentials can be taken after pulling out a
//! common factor.

use arrayvec::ArrayVec;

use crate::Scalar;

const CAP: usize = 16;

#[derive(Debug, Clone, Default)]
pub struct ExpSum<T> {
    terms: ArrayVec<(T, T), CAP>,
}

impl<T: Scalar> ExpSum<T> {
    pub fn new() -> Self {
        Self { terms: ArrayVec::new() }
    }

    /// Adds `coef·e^{exponent}`. Zero coefficients are dropped.
    pub fn push(&mut self, coef: T, exponent: T) {
        if coef != T::zero() {
            self.terms.push((coef, exponent));
        }
    }

    pub fn max_exponent(&self) -> Option<T> {
        self.terms.iter().map(|t| t.1).reduce(T::max)
    }

    /// `e^{-shift}·Σ cᵢ e^{eᵢ}`.
    pub fn eval_shifted(&self, shift: T) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |acc, &(c, e)| acc + c * (e - shift).exp())
    }

    pub fn eval(&self) -> T {
        self.eval_shifted(T::zero())
    }

    pub fn product(&self, other: &Self) -> Self {
        let mut out = Self::new();
        for &(c1, e1) in &self.terms {
            for &(c2, e2) in &other.terms {
                out.push(c1 * c2, e1 + e2);
            }
        }
        out
    }

    pub fn difference(mut self, other: &Self) -> Self {
        for &(c, e) in &other.terms {
            self.push(-c, e);
        }
        self
    }

    pub fn scaled(mut self, k: T) -> Self {
        for t in self.terms.iter_mut() {
            t.0 = t.0 * k;
        }
        self.terms.retain(|t| t.0 != T::zero());
        self
    }

    /// Ratio of two sums, both evaluated relative to the largest exponent
    /// appearing in either.
    pub fn ratio(num: &Self, den: &Self) -> T {
        let shift = match (num.max_exponent(), den.max_exponent()) {
            (Some(a), Some(b)) => a.max(b),
            (None, _) => return T::zero() / den.eval(),
            (Some(a), None) => a,
        };
        num.eval_shifted(shift) / den.eval_shifted(shift)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratio_survives_huge_exponents() {
        let mut n = ExpSum::new();
        n.push(2.0_f64, 900.0);
        n.push(1.0, 10.0);
        let mut d = ExpSum::new();
        d.push(4.0_f64, 900.0);
        let r = ExpSum::ratio(&n, &d);
        assert!((r - 0.5).abs() < 1e-15);
        assert!(n.eval().is_infinite());
    }

    #[test]
    fn product_and_difference() {
        let mut a = ExpSum::new();
        a.push(1.0_f64, 1.0);
        a.push(2.0, 0.0);
        let p = a.product(&a);
        assert!((p.eval() - (1f64.exp() + 2.0).powi(2)).abs() < 1e-12);
        let z = p.clone().difference(&p);
        assert!(z.eval().abs() < 1e-12);
    }
}
