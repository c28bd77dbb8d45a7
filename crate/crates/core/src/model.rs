//! Model parameters, characteristic roots and the fundamental solutions of
//! `½g″ + μ(x)g′ − qg = 0` glued at the skew level `a`.

use serde::{Deserialize, Serialize};

use crate::expsum::ExpSum;
use crate::{Error, Result, Scalar};

/// Parameters `(β, μ₋, μ₊, a, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub beta: T,
    pub mu_minus: T,
    pub mu_plus: T,
    pub a: T,
    pub q: T,
}

impl<T: Scalar> ModelParams<T> {
    pub fn new(beta: T, mu_minus: T, mu_plus: T, a: T, q: T) -> Result<Self> {
        let p = Self {
            beta,
            mu_minus,
            mu_plus,
            a,
            q,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > -T::one() && self.beta < T::one()) {
            return Err(Error::BetaOutOfRange(self.beta.as_f64()));
        }
        if !(self.q > T::zero()) || !self.q.is_finite() {
            return Err(Error::NonPositiveDiscount(self.q.as_f64()));
        }
        if !(self.a > T::zero()) || !self.a.is_finite() {
            return Err(Error::NonPositiveSkewLevel(self.a.as_f64()));
        }
        for (name, value) in [("mu_minus", self.mu_minus), ("mu_plus", self.mu_plus)] {
            if !value.is_finite() {
                return Err(Error::NonFiniteDrift {
                    name,
                    value: value.as_f64(),
                });
            }
        }
        Ok(())
    }

    /// Drift on the open half-line containing `x`; at `a` the side decides.
    pub fn drift(&self, x: T, side: Side) -> T {
        if is_above(x, self.a, side) {
            self.mu_plus
        } else {
            self.mu_minus
        }
    }
}

/// Roots of `½ρ² + μρ − q = 0` on each side of `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CharRoots<T> {
    pub rho1_minus: T,
    pub rho2_minus: T,
    pub rho1_plus: T,
    pub rho2_plus: T,
}

/// Returns `(ρ₁, ρ₂)` with `ρ₁ < 0 < ρ₂`. The root of smaller magnitude is
/// recovered from the product `ρ₁ρ₂ = −2q` to avoid cancellation.
pub fn quadratic_roots<T: Scalar>(mu: T, q: T) -> (T, T) {
    let two = T::lit(2.0);
    let d = (mu * mu + two * q).sqrt();
    if mu >= T::zero() {
        let r1 = -(mu + d);
        (r1, -two * q / r1)
    } else {
        let r2 = d - mu;
        (-two * q / r2, r2)
    }
}

impl<T: Scalar> CharRoots<T> {
    pub fn new(p: &ModelParams<T>) -> Self {
        let (rho1_minus, rho2_minus) = quadratic_roots(p.mu_minus, p.q);
        let (rho1_plus, rho2_plus) = quadratic_roots(p.mu_plus, p.q);
        Self {
            rho1_minus,
            rho2_minus,
            rho1_plus,
            rho2_plus,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewCoefficients<T> {
    pub c1: T,
    pub c2: T,
}

impl<T: Scalar> SkewCoefficients<T> {
    pub fn new(p: &ModelParams<T>, r: &CharRoots<T>) -> Self {
        let one = T::one();
        let (bp, bm) = (one + p.beta, one - p.beta);
        let c1 = (bp * r.rho1_plus - bm * r.rho1_minus) / (bm * (r.rho2_minus - r.rho1_minus));
        let c2 = (bp * r.rho2_plus - bm * r.rho2_minus) / (bp * (r.rho2_plus - r.rho1_plus));
        Self { c1, c2 }
    }
}

/// Which fundamental solution: `G1` decays at +∞, `G2` vanishes at −∞.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fundamental {
    G1,
    G2,
}

/// One-sided evaluation at the skew level. Ignored away from `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[inline]
pub(crate) fn is_above<T: Scalar>(x: T, a: T, side: Side) -> bool {
    x > a || (x == a && side == Side::Right)
}

/// Everything needed to evaluate `g₁`, `g₂`, `w` and `W` for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SkewModel<T> {
    pub params: ModelParams<T>,
    pub roots: CharRoots<T>,
    pub coeffs: SkewCoefficients<T>,
}

impl<T: Scalar> SkewModel<T> {
    pub fn new(params: ModelParams<T>) -> Result<Self> {
        params.validate()?;
        let roots = CharRoots::new(&params);
        let coeffs = SkewCoefficients::new(&params, &roots);
        Ok(Self { params, roots, coeffs })
    }

    pub fn a(&self) -> T {
        self.params.a
    }

    /// The `order`-th derivative of `g₁` or `g₂` as a sum of exponentials.
    pub fn g_terms(&self, which: Fundamental, order: u32, x: T, side: Side) -> ExpSum<T> {
        let r = &self.roots;
        let c = &self.coeffs;
        let d = x - self.params.a;
        let one = T::one();
        let mut s = ExpSum::new();
        let mut term = |coef: T, rho: T| s.push(coef * rho.powi(order as i32), rho * d);
        match (which, is_above(x, self.params.a, side)) {
            (Fundamental::G1, true) => term(one, r.rho1_plus),
            (Fundamental::G1, false) => {
                term(c.c1, r.rho2_minus);
                term(one - c.c1, r.rho1_minus);
            }
            (Fundamental::G2, true) => {
                term(one - c.c2, r.rho2_plus);
                term(c.c2, r.rho1_plus);
            }
            (Fundamental::G2, false) => term(one, r.rho2_minus),
        }
        s
    }

    pub fn g(&self, which: Fundamental, order: u32, x: T, side: Side) -> T {
        self.g_terms(which, order, x, side).eval()
    }

    /// `∂ᵏˣ∂ᵏʸ w(x, y)` with `w(x, y) = g₂(x)g₁(y) − g₁(x)g₂(y)`.
    pub fn w_terms(&self, kx: u32, x: T, sx: Side, ky: u32, y: T, sy: Side) -> ExpSum<T> {
        use Fundamental::*;
        if kx == ky && x == y && (sx == sy || x != self.params.a) {
            return ExpSum::new();
        }
        let p = self.g_terms(G2, kx, x, sx).product(&self.g_terms(G1, ky, y, sy));
        let m = self.g_terms(G1, kx, x, sx).product(&self.g_terms(G2, ky, y, sy));
        p.difference(&m)
    }

    pub fn w(&self, x: T, y: T) -> T {
        self.w_terms(0, x, Side::Left, 0, y, Side::Left).eval()
    }

    /// `∂ₓw(x, y)`; `side` selects the one-sided derivative when `x = a`.
    pub fn w_x(&self, x: T, y: T, side: Side) -> T {
        self.w_terms(1, x, side, 0, y, side).eval()
    }

    /// `∂ₓw(x, y)` evaluated on the diagonal `y = x`.
    pub fn w_x_diag(&self, x: T, side: Side) -> T {
        self.w_x(x, x, side)
    }

    /// `W(x) = w(x, 0)`.
    pub fn scale(&self, x: T) -> T {
        self.w(x, T::zero())
    }

    pub fn scale_terms(&self, order: u32, x: T, side: Side) -> ExpSum<T> {
        self.w_terms(order, x, side, 0, T::zero(), Side::Left)
    }

    pub fn scale_prime(&self, x: T, side: Side) -> T {
        self.scale_terms(1, x, side).eval()
    }

    pub fn scale_second(&self, x: T, side: Side) -> T {
        self.scale_terms(2, x, side).eval()
    }
}
