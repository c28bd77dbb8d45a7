//! Piecewise-analytic value functions and the level type shared by barrier
//! and band strategies.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::expsum::ExpSum;
use crate::model::{Fundamental, Side, SkewModel};
use crate::Scalar;

/// A strategy level: a number, or one of the markers `a-`, `a`, `a+`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Level<T> {
    At(T),
    /// Limit from the left of the skew level.
    AMinus,
    /// The skew level itself.
    A,
    /// Limit from the right of the skew level.
    APlus,
}

impl<T: Scalar> Level<T> {
    /// Numeric location, with markers mapped to `a`.
    pub fn resolve(&self, a: T) -> T {
        match *self {
            Level::At(v) => v,
            _ => a,
        }
    }

    /// Side used for one-sided derivatives at the resolved location.
    pub fn side(&self) -> Side {
        match self {
            Level::AMinus => Side::Left,
            _ => Side::Right,
        }
    }

    pub fn is_marker(&self) -> bool {
        !matches!(self, Level::At(_))
    }

    pub fn cast<U: Scalar>(&self) -> Level<U> {
        match *self {
            Level::At(v) => Level::At(U::lit(v.as_f64())),
            Level::AMinus => Level::AMinus,
            Level::A => Level::A,
            Level::APlus => Level::APlus,
        }
    }
}

impl<T: Scalar> fmt::Display for Level<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Level::At(v) => write!(f, "{v}"),
            Level::AMinus => f.write_str("a-"),
            Level::A => f.write_str("a"),
            Level::APlus => f.write_str("a+"),
        }
    }
}

impl<T: Scalar + Serialize> Serialize for Level<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Level::At(v) => v.serialize(s),
            Level::AMinus => s.serialize_str("a-"),
            Level::A => s.serialize_str("a"),
            Level::APlus => s.serialize_str("a+"),
        }
    }
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for Level<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw<T> {
            Num(T),
            Tag(String),
        }
        match Raw::<T>::deserialize(d)? {
            Raw::Num(v) => Ok(Level::At(v)),
            Raw::Tag(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

impl<T: Scalar> std::str::FromStr for Level<T> {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "a-" => Ok(Level::AMinus),
            "a" => Ok(Level::A),
            "a+" => Ok(Level::APlus),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(|v| Level::At(T::lit(v)))
                .ok_or_else(|| format!("expected a number, \"a-\", \"a\" or \"a+\", got {other:?}")),
        }
    }
}

/// Shape of `V` on one piece.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PieceKind<T> {
    /// `V(x) = x + offset`.
    Linear { offset: T },
    /// `V(x) = e^{−shift}(c2·g₂(x) + c1·g₁(x))`.
    Fundamental { c2: T, c1: T, shift: T },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece<T> {
    pub start: T,
    pub kind: PieceKind<T>,
}

/// `V` on `[0, ∞)` as consecutive pieces; piece `i` covers `[startᵢ, startᵢ₊₁)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction<T> {
    model: SkewModel<T>,
    pieces: Vec<Piece<T>>,
}

impl<T: Scalar> ValueFunction<T> {
    /// Pieces must be sorted by start with the first starting at 0.
    pub(crate) fn new(model: SkewModel<T>, pieces: Vec<Piece<T>>) -> Self {
        debug_assert!(!pieces.is_empty() && pieces[0].start == T::zero());
        debug_assert!(pieces.windows(2).all(|w| w[0].start < w[1].start));
        Self { model, pieces }
    }

    pub fn model(&self) -> &SkewModel<T> {
        &self.model
    }

    pub fn pieces(&self) -> &[Piece<T>] {
        &self.pieces
    }

    /// Interior piece boundaries, i.e. the points where `V` may fail to be C².
    pub fn breakpoints(&self) -> Vec<T> {
        self.pieces.iter().skip(1).map(|p| p.start).collect()
    }

    /// Start of the last piece; `V` is linear beyond it for every strategy here.
    pub fn top(&self) -> T {
        self.pieces.last().map(|p| p.start).unwrap_or_else(T::zero)
    }

    fn piece_at(&self, x: T, side: Side) -> &Piece<T> {
        let idx = self.pieces.partition_point(|p| match side {
            Side::Right => p.start <= x,
            Side::Left => p.start < x,
        });
        &self.pieces[idx.saturating_sub(1)]
    }

    /// `order`-th derivative of `V` at `x`. At a breakpoint or at `a`, `side`
    /// picks the one-sided limit.
    pub fn derivative(&self, order: u32, x: T, side: Side) -> T {
        let piece = self.piece_at(x, side);
        match piece.kind {
            PieceKind::Linear { offset } => match order {
                0 => x + offset,
                1 => T::one(),
                _ => T::zero(),
            },
            PieceKind::Fundamental { c2, c1, shift } => {
                let m = &self.model;
                let g2 = m.g_terms(Fundamental::G2, order, x, side).eval_shifted(shift);
                let g1 = m.g_terms(Fundamental::G1, order, x, side).eval_shifted(shift);
                c2 * g2 + c1 * g1
            }
        }
    }

    pub fn value(&self, x: T) -> T {
        self.derivative(0, x, Side::Right)
    }

    pub fn first(&self, x: T, side: Side) -> T {
        self.derivative(1, x, side)
    }

    pub fn second(&self, x: T, side: Side) -> T {
        self.derivative(2, x, side)
    }

    pub fn cast<U: Scalar>(&self) -> ValueFunction<U> {
        let c = |v: T| U::lit(v.as_f64());
        let p = self.model.params;
        let params = crate::ModelParams {
            beta: c(p.beta),
            mu_minus: c(p.mu_minus),
            mu_plus: c(p.mu_plus),
            a: c(p.a),
            q: c(p.q),
        };
        let model = SkewModel::new(params).expect("cast of a valid model");
        let pieces = self
            .pieces
            .iter()
            .map(|pc| Piece {
                start: c(pc.start),
                kind: match pc.kind {
                    PieceKind::Linear { offset } => PieceKind::Linear { offset: c(offset) },
                    PieceKind::Fundamental { c2, c1, shift } => PieceKind::Fundamental {
                        c2: c(c2),
                        c1: c(c1),
                        shift: c(shift),
                    },
                },
            })
            .collect();
        ValueFunction { model, pieces }
    }
}

/// Piece equal to `W(x)/den` where `den` is given as an exponential sum,
/// with the common factor pulled out.
pub(crate) fn scale_piece<T: Scalar>(m: &SkewModel<T>, start: T, den: &ExpSum<T>) -> Piece<T> {
    let shift = den.max_exponent().unwrap_or_else(T::zero);
    let d = den.eval_shifted(shift);
    let g1_0 = m.g(Fundamental::G1, 0, T::zero(), Side::Left);
    let g2_0 = m.g(Fundamental::G2, 0, T::zero(), Side::Left);
    Piece {
        start,
        kind: PieceKind::Fundamental {
            c2: g1_0 / d,
            c1: -g2_0 / d,
            shift,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_round_trip() {
        for l in [Level::At(1.25_f64), Level::AMinus, Level::A, Level::APlus] {
            let s = serde_json::to_string(&l).unwrap();
            let back: Level<f64> = serde_json::from_str(&s).unwrap();
            assert_eq!(back, l);
        }
        assert_eq!(serde_json::to_string(&Level::<f64>::AMinus).unwrap(), "\"a-\"");
        assert!("b".parse::<Level<f64>>().is_err());
    }
}
