//! Barrier strategies: value functions, the critical levels `b₋`/`b₊`, and
//! the sufficient conditions for each barrier type to be optimal.

use serde::{Deserialize, Serialize};

use crate::expsum::ExpSum;
use crate::model::{Side, SkewModel};
use crate::value::{scale_piece, Level, Piece, PieceKind, ValueFunction};
use crate::{Error, Result, Scalar};

/// The five barrier types a candidate can take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BarrierKind {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "b-")]
    BMinus,
    #[serde(rename = "a-")]
    AMinus,
    #[serde(rename = "a+")]
    APlus,
    #[serde(rename = "b+")]
    BPlus,
}

impl BarrierKind {
    pub const ALL: [BarrierKind; 5] = [
        BarrierKind::Zero,
        BarrierKind::BMinus,
        BarrierKind::AMinus,
        BarrierKind::APlus,
        BarrierKind::BPlus,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            BarrierKind::Zero => "0",
            BarrierKind::BMinus => "b-",
            BarrierKind::AMinus => "a-",
            BarrierKind::APlus => "a+",
            BarrierKind::BPlus => "b+",
        }
    }

    /// The level this kind stands for, if it exists for the model.
    pub fn level<T: Scalar>(&self, m: &SkewModel<T>) -> Option<Level<T>> {
        match self {
            BarrierKind::Zero => Some(Level::At(T::zero())),
            BarrierKind::BMinus => {
                let b = b_minus(m);
                (b > T::zero() && b < m.a()).then_some(Level::At(b))
            }
            BarrierKind::AMinus => Some(Level::AMinus),
            BarrierKind::APlus => Some(Level::APlus),
            BarrierKind::BPlus => b_plus(m).filter(|&b| b > m.a()).map(Level::At),
        }
    }
}

/// Stationary point of `W′` below `a` (may be ≤ 0 or ≥ a).
pub fn b_minus<T: Scalar>(m: &SkewModel<T>) -> T {
    // 2/(ρ₂−ρ₁)·ln(−ρ₁/ρ₂) rewritten so the sign follows μ₋ exactly
    let p = &m.params;
    let d = (p.mu_minus * p.mu_minus + T::lit(2.0) * p.q).sqrt();
    T::lit(2.0) * (p.mu_minus / d).atanh() / d
}

/// `K(β)`; `W′` has an interior minimum above `a` iff `K > 1`.
pub fn k_beta<T: Scalar>(m: &SkewModel<T>) -> T {
    let r = &m.roots;
    let (c1, c2) = (m.coeffs.c1, m.coeffs.c2);
    let one = T::one();
    // common factor e^{−ρ₁⁻a} removed from numerator and denominator
    let e = ((r.rho1_minus - r.rho2_minus) * m.a()).exp();
    let num = (one - c1 * c2) * e - c2 * (one - c1);
    let den = (one - c2) * (c1 * e + (one - c1));
    r.rho1_plus.powi(2) * num / (r.rho2_plus.powi(2) * den)
}

/// Stationary point of `W′` above `a`, or `None` when `K(β) ≤ 0` and no
/// stationary point exists on that side.
pub fn b_plus<T: Scalar>(m: &SkewModel<T>) -> Option<T> {
    let k = k_beta(m);
    let r = &m.roots;
    (k > T::zero()).then(|| m.a() + k.ln() / (r.rho2_plus - r.rho1_plus))
}

/// `inf W′` over `[0, a)`, located from where `b₋` falls.
pub fn inf_scale_prime_below<T: Scalar>(m: &SkewModel<T>) -> T {
    let b = b_minus(m);
    if b <= T::zero() {
        m.scale_prime(T::zero(), Side::Left)
    } else if b < m.a() {
        m.scale_prime(b, Side::Left)
    } else {
        m.scale_prime(m.a(), Side::Left)
    }
}

pub(crate) fn check_barrier_level<T: Scalar>(m: &SkewModel<T>, level: &Level<T>) -> Result<()> {
    match *level {
        Level::A => Err(Error::InvalidLevel("a barrier at a must be given as a- or a+".into())),
        Level::At(v) if !(v >= T::zero()) || !v.is_finite() => {
            Err(Error::InvalidLevel(format!("barrier {v} must be a finite level >= 0")))
        }
        Level::At(v) if v == m.a() => Err(Error::InvalidLevel("a barrier at a must be given as a- or a+".into())),
        _ => Ok(()),
    }
}

/// `V_b` as a piecewise function.
pub fn barrier_value_function<T: Scalar>(m: &SkewModel<T>, level: Level<T>) -> Result<ValueFunction<T>> {
    check_barrier_level(m, &level)?;
    let b = level.resolve(m.a());
    if b == T::zero() {
        return Ok(ValueFunction::new(
            *m,
            vec![Piece {
                start: T::zero(),
                kind: PieceKind::Linear { offset: T::zero() },
            }],
        ));
    }
    let den = m.scale_terms(1, b, level.side());
    let vb = ExpSum::ratio(&m.scale_terms(0, b, Side::Left), &den);
    Ok(ValueFunction::new(
        *m,
        vec![
            scale_piece(m, T::zero(), &den),
            Piece {
                start: b,
                kind: PieceKind::Linear { offset: vb - b },
            },
        ],
    ))
}

pub fn barrier_value<T: Scalar>(m: &SkewModel<T>, x: T, level: Level<T>) -> Result<T> {
    if !(x >= T::zero()) {
        return Err(Error::PreconditionViolated(format!("x = {x} must be >= 0")));
    }
    Ok(barrier_value_function(m, level)?.value(x))
}

/// Discounted dividends under a barrier at `b` from `b` until the surplus
/// first reaches `a0`.
pub fn barrier_value_at_barrier<T: Scalar>(m: &SkewModel<T>, b: T, a0: T) -> Result<T> {
    if !(a0 >= T::zero() && a0 < b) {
        return Err(Error::OrderingViolation(format!(
            "need 0 <= a0 < b, got a0 = {a0}, b = {b}"
        )));
    }
    if b == m.a() {
        return Err(Error::InvalidLevel("barrier at the skew level".into()));
    }
    let num = m.w_terms(0, b, Side::Left, 0, a0, Side::Left);
    let den = m.w_terms(1, b, Side::Left, 0, a0, Side::Left);
    Ok(ExpSum::ratio(&num, &den))
}

/// `E_b[e^{−qτ}]` for the surplus reflected at `b` to first reach `target ≤ b`.
pub fn reflected_exit_transform<T: Scalar>(m: &SkewModel<T>, b: T, target: T) -> Result<T> {
    if !(target <= b) {
        return Err(Error::OrderingViolation(format!(
            "need target <= b, got target = {target}, b = {b}"
        )));
    }
    if b == m.a() {
        return Err(Error::InvalidLevel("barrier at the skew level".into()));
    }
    let num = m.w_terms(1, b, Side::Left, 0, b, Side::Left);
    let den = m.w_terms(1, b, Side::Left, 0, target, Side::Left);
    Ok(ExpSum::ratio(&num, &den))
}

/// Which set of sufficient conditions a report covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    ZeroBarrier,
    LowerBarrier,
    LeftLimitBarrier,
    RightLimitBarrier,
    UpperBarrier,
    InteriorBand,
    RightLimitBand,
    SkewLevelBand,
}

/// One inequality `lhs ≤ rhs` written as `slack = lhs − rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub slack: f64,
    pub strict: bool,
    pub holds: bool,
}

impl Condition {
    pub fn weak(name: &str, slack: f64) -> Self {
        Self {
            name: name.into(),
            slack,
            strict: false,
            holds: slack <= 0.0,
        }
    }

    pub fn strict(name: &str, slack: f64) -> Self {
        Self {
            name: name.into(),
            slack,
            strict: true,
            holds: slack < 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub criterion: Criterion,
    pub conditions: Vec<Condition>,
    /// Set when the value is attained only in the limit by a sequence of strategies.
    pub asymptotically_optimal: bool,
    pub note: Option<String>,
}

impl ConditionReport {
    pub fn holds(&self) -> bool {
        self.note.is_none() && self.conditions.iter().all(|c| c.holds)
    }
}

pub fn barrier_optimality_check<T: Scalar>(m: &SkewModel<T>, kind: BarrierKind) -> ConditionReport {
    let p = &m.params;
    let a = m.a();
    let f = |v: T| v.as_f64();
    let beta_nonpos = Condition::weak("beta <= 0", f(p.beta));
    let bm = b_minus(m);
    let (conditions, criterion) = match kind {
        BarrierKind::Zero => (
            vec![
                Condition::weak("mu_minus <= 0", f(p.mu_minus)),
                Condition::weak("mu_plus <= q a", f(p.mu_plus - p.q * a)),
                beta_nonpos,
            ],
            Criterion::ZeroBarrier,
        ),
        BarrierKind::BMinus => {
            let w1 = m.scale_prime(bm, Side::Left);
            let w0 = m.scale(bm);
            (
                vec![
                    Condition::strict("b- > 0", f(-bm)),
                    Condition::strict("b- < a", f(bm - a)),
                    Condition::weak(
                        "(mu_plus - q (a - b-)) W'(b-) <= q W(b-)",
                        f((p.mu_plus - p.q * (a - bm)) * w1 - p.q * w0),
                    ),
                    beta_nonpos,
                ],
                Criterion::LowerBarrier,
            )
        }
        BarrierKind::AMinus => (
            vec![
                Condition::weak("b- >= a", f(a - bm)),
                Condition::weak(
                    "mu_plus W'(a-) <= q W(a)",
                    f(p.mu_plus * m.scale_prime(a, Side::Left) - p.q * m.scale(a)),
                ),
                beta_nonpos,
            ],
            Criterion::LeftLimitBarrier,
        ),
        BarrierKind::APlus => {
            let wp = m.scale_prime(a, Side::Right);
            (
                vec![
                    Condition::weak("inf W' on [0, a) >= W'(a+)", f(wp - inf_scale_prime_below(m))),
                    Condition::weak("mu_plus W'(a+) <= q W(a)", f(p.mu_plus * wp - p.q * m.scale(a))),
                ],
                Criterion::RightLimitBarrier,
            )
        }
        BarrierKind::BPlus => {
            let bp = b_plus(m);
            let gap = bp.map(|b| f(a - b)).unwrap_or(f64::INFINITY);
            let min_gap = match bp {
                Some(b) if b > a => f(m.scale_prime(b, Side::Right) - inf_scale_prime_below(m)),
                _ => f64::INFINITY,
            };
            (
                vec![
                    Condition::strict("b+ > a", gap),
                    Condition::weak("W'(b+) <= inf W' on [0, a)", min_gap),
                ],
                Criterion::UpperBarrier,
            )
        }
    };
    ConditionReport {
        criterion,
        conditions,
        asymptotically_optimal: kind == BarrierKind::AMinus,
        note: None,
    }
}
