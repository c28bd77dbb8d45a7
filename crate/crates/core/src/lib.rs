//! Optimal dividend strategies for a skew Brownian motion with a two-valued
//! drift: closed-form value functions, optimality checks, an HJB verifier and
//! a lattice Monte Carlo simulator.
//!
//! The analytic core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the classifier and simulator
//! use.

// `!(x > y)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod band;
pub mod barrier;
pub mod checks;
pub mod classify;
mod error;
pub mod exit;
pub mod expsum;
pub mod hjb;
pub mod model;
mod scalar;
pub mod sim;
pub mod value;

pub use band::{BandShape, BandSolveResult, BandSpec};
pub use barrier::{BarrierKind, Condition, ConditionReport, Criterion};
pub use classify::{
    classify, reproduce_table, Candidate, ClassifiedResult, Strategy, StrategyKind, TableBlock, TableConfig, TableRow,
};
pub use error::{Error, Result};
pub use exit::ExitQuery;
pub use hjb::{GridSpec, HjbReport, Inequality, KinkSet};
pub use model::{CharRoots, Fundamental, ModelParams, Side, SkewCoefficients, SkewModel};
pub use scalar::Scalar;
pub use sim::{ExitTarget, LatticeConfig, SimEstimate};
pub use value::{Level, Piece, PieceKind, ValueFunction};

pub type Params = ModelParams<f64>;
pub type Model = SkewModel<f64>;
pub type ValueFn = ValueFunction<f64>;
