//! Picks the optimal strategy for a parameter set: every barrier type and
//! every band shape is built, screened by its sufficient conditions, and
//! the HJB verifier has the final word.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::band::{anchor_b1, band_optimality_check, band_value_function, solve_band_shapes, BandShape, BandSpec};
use crate::barrier::{
    b_minus, b_plus, barrier_optimality_check, barrier_value_function, k_beta, BarrierKind, ConditionReport,
};
use crate::hjb::{verify_hjb, GridSpec, HjbReport, KinkSet, HJB_TOL};
use crate::value::{Level, ValueFunction};
use crate::{Error, Model, Params, Result};

/// Either a barrier or a band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Strategy {
    Barrier {
        level: Level<f64>,
    },
    Band {
        #[serde(flatten)]
        spec: BandSpec<f64>,
    },
}

impl Strategy {
    pub fn value_function(&self, m: &Model) -> Result<ValueFunction<f64>> {
        match self {
            Strategy::Barrier { level } => barrier_value_function(m, *level),
            Strategy::Band { spec } => band_value_function(m, spec),
        }
    }
}

/// Strategy tag as printed in the tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
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
    #[serde(rename = "band")]
    Band,
}

impl StrategyKind {
    pub fn tag(&self) -> &'static str {
        match self {
            StrategyKind::Zero => "0",
            StrategyKind::BMinus => "b-",
            StrategyKind::AMinus => "a-",
            StrategyKind::APlus => "a+",
            StrategyKind::BPlus => "b+",
            StrategyKind::Band => "band",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Some(match tag {
            "0" => StrategyKind::Zero,
            "b-" => StrategyKind::BMinus,
            "a-" => StrategyKind::AMinus,
            "a+" => StrategyKind::APlus,
            "b+" => StrategyKind::BPlus,
            "band" => StrategyKind::Band,
            _ => return None,
        })
    }
}

impl From<BarrierKind> for StrategyKind {
    fn from(k: BarrierKind) -> Self {
        match k {
            BarrierKind::Zero => StrategyKind::Zero,
            BarrierKind::BMinus => StrategyKind::BMinus,
            BarrierKind::AMinus => StrategyKind::AMinus,
            BarrierKind::APlus => StrategyKind::APlus,
            BarrierKind::BPlus => StrategyKind::BPlus,
        }
    }
}

/// One strategy that was considered, with everything learned about it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub kind: StrategyKind,
    pub strategy: Strategy,
    pub band_shape: Option<BandShape>,
    pub conditions: ConditionReport,
    pub hjb: Option<HjbReport>,
    /// Why the verifier could not run, if it did not.
    pub error: Option<String>,
}

impl Candidate {
    pub fn verified(&self) -> bool {
        self.hjb.as_ref().is_some_and(|h| h.passed())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClassifiedResult {
    pub params: Params,
    pub kind: StrategyKind,
    pub strategy: Strategy,
    pub hjb: HjbReport,
    /// Every candidate in the order tried, including the winner.
    pub candidates: Vec<Candidate>,
    pub b_minus: f64,
    pub k_beta: f64,
    pub b_plus: Option<f64>,
    #[serde(skip)]
    value_function: Option<ValueFunction<f64>>,
}

impl ClassifiedResult {
    pub fn value_function(&self) -> ValueFunction<f64> {
        match &self.value_function {
            Some(vf) => vf.clone(),
            None => {
                let m = Model::new(self.params).expect("validated params");
                self.strategy
                    .value_function(&m)
                    .expect("classified strategy is well formed")
            }
        }
    }

    /// Other candidates that also pass the verifier.
    pub fn alternatives(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates
            .iter()
            .filter(move |c| c.verified() && c.strategy != self.strategy)
    }
}

/// Runs the verifier with the default grid, refined around close kinks.
pub fn verify_strategy(vf: &ValueFunction<f64>) -> Result<HjbReport> {
    let kinks = KinkSet::of(vf);
    verify_hjb(vf, &kinks, GridSpec::fitted(vf, &kinks), HJB_TOL)
}

fn evaluate(
    m: &Model,
    kind: StrategyKind,
    strategy: Strategy,
    band_shape: Option<BandShape>,
    conditions: ConditionReport,
) -> Candidate {
    let (hjb, error) = match strategy.value_function(m).and_then(|vf| verify_strategy(&vf)) {
        Ok(h) => (Some(h), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Candidate {
        kind,
        strategy,
        band_shape,
        conditions,
        hjb,
        error,
    }
}

/// All candidates in tie-break order: `0, b₋, a₋, a₊, b₊`, then bands.
pub fn candidates(m: &Model) -> Vec<Candidate> {
    let mut out = Vec::new();
    for kind in BarrierKind::ALL {
        if let Some(level) = kind.level(m) {
            let cond = barrier_optimality_check(m, kind);
            out.push(evaluate(m, kind.into(), Strategy::Barrier { level }, None, cond));
        }
    }
    let b1 = anchor_b1(m);
    for r in solve_band_shapes(m, b1).unwrap_or_default() {
        let (b1v, a1v, _) = r.spec.resolved(m.a());
        if b1v == 0.0 && a1v == 0.0 {
            // a (0, 0, b2) band is the barrier at b2, already covered
            continue;
        }
        let cond = band_optimality_check(m, &r.spec);
        out.push(evaluate(
            m,
            StrategyKind::Band,
            Strategy::Band { spec: r.spec },
            Some(r.shape),
            cond,
        ));
    }
    out
}

pub fn classify(params: &Params) -> Result<ClassifiedResult> {
    let m = Model::new(*params)?;
    let cands = candidates(&m);
    let Some(win) = cands.iter().find(|c| c.verified()) else {
        let summary: Vec<String> = cands
            .iter()
            .map(|c| match (&c.hjb, &c.error) {
                (Some(h), _) => format!("{}: fails {:?}", describe(&c.strategy), h.failed_inequalities()),
                (None, Some(e)) => format!("{}: {e}", describe(&c.strategy)),
                _ => describe(&c.strategy),
            })
            .collect();
        return Err(Error::Unclassified(summary.join("; ")));
    };
    let vf = win.strategy.value_function(&m)?;
    Ok(ClassifiedResult {
        params: *params,
        kind: win.kind,
        strategy: win.strategy,
        hjb: win.hjb.clone().expect("verified candidate has a report"),
        b_minus: b_minus(&m),
        k_beta: k_beta(&m),
        b_plus: b_plus(&m),
        value_function: Some(vf),
        candidates: cands,
    })
}

pub fn describe(s: &Strategy) -> String {
    match s {
        Strategy::Barrier { level } => format!("barrier {level}"),
        Strategy::Band { spec } => format!("band ({}, {}, {})", spec.b1, spec.a1, spec.b2),
    }
}

/// One `β` row of a table and its `(μ₋, μ₊)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableBlock {
    pub beta: f64,
    pub mu_minus: Vec<f64>,
    pub mu_plus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableConfig {
    pub a: f64,
    pub q: f64,
    #[serde(default)]
    pub blocks: Vec<TableBlock>,
}

#[derive(Debug, Clone)]
pub struct TableRow {
    pub beta: f64,
    pub mu_minus: f64,
    pub mu_plus: f64,
    pub result: Result<ClassifiedResult>,
}

/// Classifies every cell; rows come back in block, `μ₋`, `μ₊` order.
pub fn reproduce_table(cfg: &TableConfig) -> Vec<TableRow> {
    let cells: Vec<(f64, f64, f64)> = cfg
        .blocks
        .iter()
        .flat_map(|b| {
            b.mu_minus
                .iter()
                .flat_map(move |&mm| b.mu_plus.iter().map(move |&mp| (b.beta, mm, mp)))
        })
        .collect();
    cells
        .par_iter()
        .map(|&(beta, mm, mp)| TableRow {
            beta,
            mu_minus: mm,
            mu_plus: mp,
            result: Params::new(beta, mm, mp, cfg.a, cfg.q).and_then(|p| classify(&p)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(beta: f64, mm: f64, mp: f64) -> ClassifiedResult {
        classify(&Params::new(beta, mm, mp, 1.0, 0.1).unwrap()).unwrap()
    }

    #[test]
    fn upper_barrier_cell() {
        let r = run(-0.9, 0.0, 5.0);
        assert_eq!(r.kind, StrategyKind::BPlus);
        match r.strategy {
            Strategy::Barrier { level: Level::At(b) } => assert!((b - 2.199).abs() < 5e-4),
            s => panic!("{s:?}"),
        }
        assert!(r.candidates.iter().any(|c| !c.verified()));
    }

    #[test]
    fn skew_level_band_cell() {
        let r = run(-0.9, -5.0, 1.0);
        assert_eq!(r.kind, StrategyKind::Band);
        let Strategy::Band { spec } = r.strategy else { panic!() };
        assert_eq!(spec.b1, Level::At(0.0));
        assert_eq!(spec.a1, Level::A);
        assert!((spec.b2.resolve(1.0) - 3.756).abs() < 2e-3);
    }

    #[test]
    fn right_limit_barrier_cell() {
        assert_eq!(run(0.9, 2.0, 9.0).kind, StrategyKind::APlus);
    }

    #[test]
    fn single_cell_table_equals_classify() {
        let cfg = TableConfig {
            a: 1.0,
            q: 0.1,
            blocks: vec![TableBlock {
                beta: -0.3,
                mu_minus: vec![0.0],
                mu_plus: vec![5.0],
            }],
        };
        let rows = reproduce_table(&cfg);
        assert_eq!(rows.len(), 1);
        let t = rows[0].result.as_ref().unwrap();
        let c = run(-0.3, 0.0, 5.0);
        assert_eq!(t.strategy, c.strategy);
        assert_eq!(t.kind, c.kind);
    }

    #[test]
    fn strategy_serialization() {
        let s = Strategy::Band {
            spec: BandSpec::new(Level::AMinus, Level::A, Level::At(3.626)),
        };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"type":"band","b1":"a-","a1":"a","b2":3.626}"#);
        let back: Strategy = serde_json::from_str(&j).unwrap();
        assert_eq!(back, s);
    }
}
