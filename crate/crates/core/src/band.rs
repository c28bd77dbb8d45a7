//! Band strategies `(b₁, a₁, b₂)`: value functions, the smooth-fit system
//! `V′(a₁) = 1`, `V″(b₂) = 0`, its solver, and the optimality checks.

use serde::{Deserialize, Serialize};

use crate::barrier::{b_minus, Condition, ConditionReport, Criterion};
use crate::expsum::ExpSum;
use crate::model::{Fundamental, Side, SkewModel};
use crate::value::{scale_piece, Level, Piece, PieceKind, ValueFunction};
use crate::{Error, Result, Scalar};

/// Pay down to `b₁` when at or below `a₁`; cap at `b₂` above `a₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct BandSpec<T> {
    pub b1: Level<T>,
    pub a1: Level<T>,
    pub b2: Level<T>,
}

impl<T: Scalar> BandSpec<T> {
    pub fn new(b1: Level<T>, a1: Level<T>, b2: Level<T>) -> Self {
        Self { b1, a1, b2 }
    }

    pub fn validate(&self, m: &SkewModel<T>) -> Result<()> {
        let a = m.a();
        let bad = |msg: String| Err(Error::InvalidBand(msg));
        match self.b1 {
            Level::At(v) if !(v >= T::zero() && v < a) => return bad(format!("b1 = {v} must lie in [0, a)")),
            Level::A | Level::APlus => return bad("b1 must be a number or a-".into()),
            _ => {}
        }
        if matches!(self.a1, Level::AMinus | Level::APlus) {
            return bad("a1 must be a number or a".into());
        }
        match self.b2 {
            Level::At(v) if !(v > a) || !v.is_finite() => return bad(format!("b2 = {v} must exceed a")),
            Level::AMinus | Level::A => return bad("b2 must be a number or a+".into()),
            _ => {}
        }
        let (b1, a1, b2) = self.resolved(a);
        if !(b1 <= a1 && a1 < b2) {
            return bad(format!("need b1 <= a1 < b2, got ({b1}, {a1}, {b2})"));
        }
        if self.b1 == Level::AMinus && self.a1 != Level::A {
            return bad("b1 = a- requires a1 = a".into());
        }
        Ok(())
    }

    pub fn resolved(&self, a: T) -> (T, T, T) {
        (self.b1.resolve(a), self.a1.resolve(a), self.b2.resolve(a))
    }

    fn a1_side(&self, a: T) -> Side {
        if self.a1.resolve(a) == a {
            Side::Right
        } else {
            Side::Left
        }
    }

    /// Maps a numeric `a₁ = a` onto the marker so both spellings behave alike.
    fn normalized(mut self, a: T) -> Self {
        if self.a1 == Level::At(a) {
            self.a1 = Level::A;
        }
        self
    }
}

/// Value at `b₁` under a barrier at `b₁`.
fn value_at_b1<T: Scalar>(m: &SkewModel<T>, b1: Level<T>) -> T {
    let b = b1.resolve(m.a());
    if b == T::zero() {
        return T::zero();
    }
    ExpSum::ratio(&m.scale_terms(0, b, Side::Left), &m.scale_terms(1, b, b1.side()))
}

/// Closed form of `V` on `[a₁, b₂)` as `e^{−shift}(c2·g₂ + c1·g₁)`.
#[derive(Debug, Clone, Copy)]
struct UpperPiece<T> {
    v_b1: T,
    c2: T,
    c1: T,
    shift: T,
}

fn upper_piece<T: Scalar>(m: &SkewModel<T>, spec: &BandSpec<T>) -> UpperPiece<T> {
    use Fundamental::*;
    let a = m.a();
    let (b1, a1, b2) = spec.resolved(a);
    let (sa, sb) = (spec.a1_side(a), spec.b2.side());
    let v_b1 = value_at_b1(m, spec.b1);
    let v_a1 = a1 - b1 + v_b1;
    let den = m.w_terms(1, b2, sb, 0, a1, sa);
    let shift = den.max_exponent().unwrap_or_else(T::zero);
    let d = den.eval_shifted(shift);
    let c2 = (m.g(G1, 0, a1, sa) - v_a1 * m.g(G1, 1, b2, sb)) / d;
    let c1 = (v_a1 * m.g(G2, 1, b2, sb) - m.g(G2, 0, a1, sa)) / d;
    UpperPiece { v_b1, c2, c1, shift }
}

impl<T: Scalar> UpperPiece<T> {
    fn eval(&self, m: &SkewModel<T>, order: u32, x: T, side: Side) -> T {
        let g2 = m.g_terms(Fundamental::G2, order, x, side).eval_shifted(self.shift);
        let g1 = m.g_terms(Fundamental::G1, order, x, side).eval_shifted(self.shift);
        self.c2 * g2 + self.c1 * g1
    }
}

pub fn band_value_function<T: Scalar>(m: &SkewModel<T>, spec: &BandSpec<T>) -> Result<ValueFunction<T>> {
    let spec = spec.normalized(m.a());
    spec.validate(m)?;
    let a = m.a();
    let (b1, a1, b2) = spec.resolved(a);
    let up = upper_piece(m, &spec);
    let mut pieces = Vec::with_capacity(4);
    if b1 > T::zero() {
        pieces.push(scale_piece(m, T::zero(), &m.scale_terms(1, b1, spec.b1.side())));
    }
    if a1 > b1 {
        pieces.push(Piece {
            start: b1,
            kind: PieceKind::Linear { offset: up.v_b1 - b1 },
        });
    }
    pieces.push(Piece {
        start: a1,
        kind: PieceKind::Fundamental {
            c2: up.c2,
            c1: up.c1,
            shift: up.shift,
        },
    });
    let v_b2 = up.eval(m, 0, b2, Side::Left);
    pieces.push(Piece {
        start: b2,
        kind: PieceKind::Linear { offset: v_b2 - b2 },
    });
    Ok(ValueFunction::new(*m, pieces))
}

pub fn band_value<T: Scalar>(m: &SkewModel<T>, x: T, spec: &BandSpec<T>) -> Result<T> {
    if !(x >= T::zero()) {
        return Err(Error::PreconditionViolated(format!("x = {x} must be >= 0")));
    }
    Ok(band_value_function(m, spec)?.value(x))
}

/// `V′(a₁+)`.
pub fn band_first_derivative_at_a1<T: Scalar>(m: &SkewModel<T>, spec: &BandSpec<T>) -> Result<T> {
    let spec = spec.normalized(m.a());
    spec.validate(m)?;
    let a1 = spec.a1.resolve(m.a());
    Ok(upper_piece(m, &spec).eval(m, 1, a1, Side::Right))
}

/// `V″(b₂−)`.
pub fn band_second_derivative_at_b2<T: Scalar>(m: &SkewModel<T>, spec: &BandSpec<T>) -> Result<T> {
    let spec = spec.normalized(m.a());
    spec.validate(m)?;
    let b2 = spec.b2.resolve(m.a());
    let side = if spec.b2 == Level::APlus {
        Side::Right
    } else {
        Side::Left
    };
    Ok(upper_piece(m, &spec).eval(m, 2, b2, side))
}

/// `β*` at which `(1 + β)V′(a+) = 1 − β` for a `(b₁, a, b₂)` band.
pub fn beta_star<T: Scalar>(m: &SkewModel<T>, spec: &BandSpec<T>) -> Result<T> {
    let spec = spec.normalized(m.a());
    spec.validate(m)?;
    if spec.a1 != Level::A {
        return Err(Error::PreconditionViolated("beta* is defined for a1 = a".into()));
    }
    let d = upper_piece(m, &spec).eval(m, 1, m.a(), Side::Right);
    beta_star_from_slope(d)
}

pub fn beta_star_from_slope<T: Scalar>(slope_right_of_a: T) -> Result<T> {
    let d = slope_right_of_a;
    if !(d > T::one()) {
        return Err(Error::PreconditionViolated(format!("V'(a+) = {d} must exceed 1")));
    }
    Ok((T::one() - d) / (T::one() + d))
}

/// Which solution family a solve produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandShape {
    /// `a₁ < a < b₂`, both smooth-fit equations.
    Interior,
    /// `b₂ = a+`, smooth fit at `a₁` only.
    RightLimit,
    /// `a₁ = a`, smooth fit at `b₂` only.
    SkewLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Scalar + Serialize", deserialize = "T: Scalar + Deserialize<'de>"))]
pub struct BandSolveResult<T> {
    pub spec: BandSpec<T>,
    pub shape: BandShape,
    /// `V′(a₁) − 1`; zero by construction for [`BandShape::SkewLevel`].
    pub residual_a1: T,
    /// `V″(b₂)`; zero by construction for [`BandShape::RightLimit`].
    pub residual_b2: T,
    pub iterations: usize,
    /// Whether the shape's extra optimality premise holds.
    pub side_condition: bool,
}

const SCAN_POINTS: usize = 160;
const EXPANSIONS: usize = 3;

/// Bisection on a sign change, run to the resolution of `T`.
fn bisect<T: Scalar>(mut f: impl FnMut(T) -> Option<T>, mut lo: T, mut hi: T, iters: &mut usize) -> Option<T> {
    let mut flo = f(lo)?;
    let fhi = f(hi)?;
    if flo == T::zero() {
        return Some(lo);
    }
    if fhi == T::zero() {
        return Some(hi);
    }
    if flo.signum() == fhi.signum() {
        return None;
    }
    let half = T::lit(0.5);
    for _ in 0..300 {
        let mid = lo + (hi - lo) * half;
        if mid <= lo || mid >= hi {
            break;
        }
        *iters += 1;
        let fm = f(mid)?;
        if fm == T::zero() {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(lo + (hi - lo) * half)
}

/// Scans `(a, a + L]` with log-spaced points crowding toward `a`, then the
/// doubled extensions, and bisects the first sign change that refines to a
/// genuine root.
fn scan_b2<T: Scalar>(m: &SkewModel<T>, mut g: impl FnMut(T) -> Option<T>, iters: &mut usize) -> Option<T> {
    let a = m.a();
    let span = T::lit(60.0) / m.roots.rho2_plus;
    let ten = T::lit(10.0);
    let n = T::lit(SCAN_POINTS as f64);
    let mut grid: Vec<T> = (0..=SCAN_POINTS)
        .map(|i| a + span * ten.powf(T::lit(-7.0) + T::lit(7.0) * T::lit(i as f64) / n))
        .collect();
    for k in 1..=EXPANSIONS {
        let (lo, hi) = (
            span * T::lit((1u32 << (k - 1)) as f64),
            span * T::lit((1u32 << k) as f64),
        );
        for i in 1..=SCAN_POINTS {
            grid.push(a + lo + (hi - lo) * T::lit(i as f64) / n);
        }
    }
    let mut prev: Option<(T, T)> = None;
    for &x in &grid {
        if !x.is_finite() || x <= a {
            continue;
        }
        let v = g(x);
        if let (Some((px, pv)), Some(v)) = (prev, v) {
            if pv.signum() != v.signum() || v == T::zero() {
                if let Some(root) = bisect(&mut g, px, x, iters) {
                    return Some(root);
                }
            }
        }
        prev = v.map(|v| (x, v));
    }
    None
}

fn residual_a1<T: Scalar>(m: &SkewModel<T>, spec: &BandSpec<T>) -> T {
    let a1 = spec.a1.resolve(m.a());
    upper_piece(m, spec).eval(m, 1, a1, Side::Right) - T::one()
}

fn residual_b2<T: Scalar>(m: &SkewModel<T>, spec: &BandSpec<T>) -> T {
    let b2 = spec.b2.resolve(m.a());
    upper_piece(m, spec).eval(m, 2, b2, Side::Left)
}

/// Root in `a₁ ∈ [b₁, a)` of `V′(a₁) = 1` for fixed `b₂`.
fn solve_a1<T: Scalar>(m: &SkewModel<T>, b1: Level<T>, b2: Level<T>, iters: &mut usize) -> Option<T> {
    let a = m.a();
    let lo = b1.resolve(a);
    let hi = a - a * T::epsilon() * T::lit(4.0);
    if !(hi > lo) {
        return None;
    }
    let f = |a1: T| {
        let r = residual_a1(m, &BandSpec::new(b1, Level::At(a1), b2));
        r.is_finite().then_some(r)
    };
    bisect(f, lo, hi, iters)
}

fn solve_interior<T: Scalar>(m: &SkewModel<T>, b1: Level<T>) -> Option<BandSolveResult<T>> {
    let mut iters = 0;
    let mut inner = 0;
    let g = |b2: T| {
        let a1 = solve_a1(m, b1, Level::At(b2), &mut inner)?;
        let r = residual_b2(m, &BandSpec::new(b1, Level::At(a1), Level::At(b2)));
        r.is_finite().then_some(r)
    };
    let b2 = scan_b2(m, g, &mut iters)?;
    let a1 = solve_a1(m, b1, Level::At(b2), &mut iters)?;
    let spec = BandSpec::new(b1, Level::At(a1), Level::At(b2));
    Some(BandSolveResult {
        residual_a1: residual_a1(m, &spec),
        residual_b2: residual_b2(m, &spec),
        spec,
        shape: BandShape::Interior,
        iterations: iters + inner,
        side_condition: true,
    })
}

fn solve_right_limit<T: Scalar>(m: &SkewModel<T>, b1: Level<T>) -> Option<BandSolveResult<T>> {
    let mut iters = 0;
    let a1 = solve_a1(m, b1, Level::APlus, &mut iters)?;
    let spec = BandSpec::new(b1, Level::At(a1), Level::APlus);
    let v_a = band_value(m, m.a(), &spec).ok()?;
    let p = &m.params;
    Some(BandSolveResult {
        residual_a1: residual_a1(m, &spec),
        residual_b2: T::zero(),
        spec,
        shape: BandShape::RightLimit,
        iterations: iters,
        side_condition: p.mu_plus - p.q * v_a <= T::zero(),
    })
}

fn solve_skew_level<T: Scalar>(m: &SkewModel<T>, b1: Level<T>) -> Option<BandSolveResult<T>> {
    let mut iters = 0;
    let g = |b2: T| {
        let r = residual_b2(m, &BandSpec::new(b1, Level::A, Level::At(b2)));
        r.is_finite().then_some(r)
    };
    let b2 = scan_b2(m, g, &mut iters)?;
    let spec = BandSpec::new(b1, Level::A, Level::At(b2));
    let side_condition = match beta_star(m, &spec) {
        Ok(bs) => m.params.beta <= bs,
        Err(_) => false,
    };
    Some(BandSolveResult {
        residual_a1: T::zero(),
        residual_b2: residual_b2(m, &spec),
        spec,
        shape: BandShape::SkewLevel,
        iterations: iters,
        side_condition,
    })
}

/// Every shape that has a root for this `b₁`, in the order interior,
/// right-limit, skew-level.
pub fn solve_band_shapes<T: Scalar>(m: &SkewModel<T>, b1: Level<T>) -> Result<Vec<BandSolveResult<T>>> {
    match b1 {
        Level::At(v) if v >= T::zero() && v < m.a() => {}
        Level::AMinus => {}
        _ => return Err(Error::InvalidBand(format!("b1 = {b1} must lie in [0, a) or be a-"))),
    }
    let mut out = Vec::new();
    if b1 != Level::AMinus {
        out.extend(solve_interior(m, b1));
        out.extend(solve_right_limit(m, b1));
    }
    out.extend(solve_skew_level(m, b1));
    Ok(out)
}

/// First shape whose root exists and whose side condition holds.
pub fn solve_band<T: Scalar>(m: &SkewModel<T>, b1: Level<T>) -> Result<BandSolveResult<T>> {
    let all = solve_band_shapes(m, b1)?;
    let tried: Vec<String> = all.iter().map(|r| format!("{:?}", r.shape)).collect();
    all.into_iter().find(|r| r.side_condition).ok_or_else(|| {
        Error::NoSolution(format!(
            "b1 = {b1}: no shape with a root and its side condition (roots found: {})",
            if tried.is_empty() {
                "none".to_string()
            } else {
                tried.join(", ")
            }
        ))
    })
}

/// The left anchor `b₁` implied by where `b₋` falls.
pub fn anchor_b1<T: Scalar>(m: &SkewModel<T>) -> Level<T> {
    let b = b_minus(m);
    if b <= T::zero() {
        Level::At(T::zero())
    } else if b < m.a() {
        Level::At(b)
    } else {
        Level::AMinus
    }
}

/// Residual tolerance used by [`band_optimality_check`].
pub const RESIDUAL_TOL: f64 = 1e-8;

pub fn band_optimality_check<T: Scalar>(m: &SkewModel<T>, spec: &BandSpec<T>) -> ConditionReport {
    let a = m.a();
    let spec = spec.normalized(a);
    let f = |v: T| v.as_f64();
    let mut report = ConditionReport {
        criterion: Criterion::InteriorBand,
        conditions: Vec::new(),
        asymptotically_optimal: false,
        note: None,
    };
    if let Err(e) = spec.validate(m) {
        report.note = Some(e.to_string());
        return report;
    }
    let (b1, a1, _) = spec.resolved(a);
    if spec.a1 != Level::A && a1 > a {
        report.note = Some("a1 above the skew level cannot satisfy the HJB inequalities".into());
        return report;
    }
    if b1 == T::zero() && a1 == T::zero() {
        report.note = Some("degenerates to a barrier at b2; see the barrier checks".into());
        return report;
    }
    let anchor = anchor_b1(m);
    let anchor_gap = match (anchor, spec.b1) {
        (Level::At(x), Level::At(y)) => f((x - y).abs()) - 1e-8,
        (Level::AMinus, Level::AMinus) => -1.0,
        _ => 1.0,
    };
    report
        .conditions
        .push(Condition::weak("b1 matches the location of b-", anchor_gap));
    let res = |v: T| f(v.abs()) - RESIDUAL_TOL;
    match (spec.a1, spec.b2) {
        (Level::At(_), Level::At(_)) => {
            report.conditions.push(Condition::strict("a1 > 0", f(-a1)));
            report.conditions.push(Condition::strict("a1 < a", f(a1 - a)));
            report
                .conditions
                .push(Condition::weak("|V'(a1) - 1| ~ 0", res(residual_a1(m, &spec))));
            report
                .conditions
                .push(Condition::weak("|V''(b2)| ~ 0", res(residual_b2(m, &spec))));
        }
        (Level::At(_), Level::APlus) => {
            report.criterion = Criterion::RightLimitBand;
            let p = &m.params;
            let v_a = band_value(m, a, &spec).unwrap_or_else(|_| T::nan());
            report.conditions.push(Condition::strict("a1 > 0", f(-a1)));
            report
                .conditions
                .push(Condition::weak("|V'(a1) - 1| ~ 0", res(residual_a1(m, &spec))));
            report
                .conditions
                .push(Condition::weak("mu_plus - q V(a) <= 0", f(p.mu_plus - p.q * v_a)));
        }
        _ => {
            report.criterion = Criterion::SkewLevelBand;
            report
                .conditions
                .push(Condition::weak("|V''(b2)| ~ 0", res(residual_b2(m, &spec))));
            let slack = match beta_star(m, &spec) {
                Ok(bs) => f(m.params.beta - bs),
                Err(_) => f64::INFINITY,
            };
            report.conditions.push(Condition::weak("beta <= beta*", slack));
        }
    }
    report
}
