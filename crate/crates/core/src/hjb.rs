//! Numerical check of the HJB inequalities for a candidate value function.

use serde::{Deserialize, Serialize};

use crate::model::Side;
use crate::value::{PieceKind, ValueFunction};
use crate::{Error, Result, Scalar};

/// Default tolerance on normalized slacks.
pub const HJB_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    /// `½V″ + μV′ − qV ≤ 0` off the kinks.
    Generator,
    /// `V′ ≥ 1` off the kinks.
    MarginalValue,
    /// `(1+β)V′(a+) ≤ (1−β)V′(a−)`.
    SkewPasting,
    /// `V′(p+) ≤ V′(p−)` at each kink.
    KinkConcavity,
}

impl Inequality {
    pub const ALL: [Inequality; 4] = [
        Inequality::Generator,
        Inequality::MarginalValue,
        Inequality::SkewPasting,
        Inequality::KinkConcavity,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub inequality: Inequality,
    pub x: f64,
    /// Positive means violated (beyond tolerance if above `tolerance`).
    pub slack: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_max: f64,
    pub step: f64,
}

impl GridSpec {
    /// `step = a/2000`, `x_max = max(3a, 2·top + 10/ρ₂⁺)`.
    pub fn default_for<T: Scalar>(vf: &ValueFunction<T>) -> Self {
        let m = vf.model();
        let a = m.a().as_f64();
        let top = vf.top().as_f64();
        let x_max = (3.0 * a).max(2.0 * top + 10.0 / m.roots.rho2_plus.as_f64());
        Self {
            x_max,
            step: a / 2000.0,
        }
    }

    /// Default grid, refined so the step is at most a quarter of the
    /// smallest kink spacing.
    pub fn fitted<T: Scalar>(vf: &ValueFunction<T>, kinks: &KinkSet) -> Self {
        let mut g = Self::default_for(vf);
        if let Some(s) = kinks.min_spacing() {
            g.step = g.step.min(s / 4.0);
        }
        g
    }
}

/// Sorted, de-duplicated locations of `𝒫 ∪ {a}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinkSet {
    pub points: Vec<f64>,
}

impl KinkSet {
    pub fn new(mut points: Vec<f64>) -> Self {
        points.retain(|p| p.is_finite());
        points.sort_by(f64::total_cmp);
        points.dedup();
        Self { points }
    }

    /// Breakpoints of `vf` together with `a`.
    pub fn of<T: Scalar>(vf: &ValueFunction<T>) -> Self {
        let mut pts: Vec<f64> = vf.breakpoints().into_iter().map(|p| p.as_f64()).collect();
        pts.push(vf.model().a().as_f64());
        Self::new(pts)
    }

    pub fn min_spacing(&self) -> Option<f64> {
        self.points.windows(2).map(|w| w[1] - w[0]).reduce(f64::min)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HjbReport {
    pub generator: bool,
    pub marginal_value: bool,
    pub skew_pasting: bool,
    pub kink_concavity: bool,
    /// Largest slack found over all inequalities.
    pub worst_violation: Violation,
    /// Largest slack per inequality, in [`Inequality::ALL`] order.
    pub worst_by_inequality: Vec<Violation>,
    pub grid: GridSpec,
    pub tolerance: f64,
    pub points_checked: usize,
}

impl HjbReport {
    pub fn passed(&self) -> bool {
        self.generator && self.marginal_value && self.skew_pasting && self.kink_concavity
    }

    pub fn failed_inequalities(&self) -> Vec<Inequality> {
        self.worst_by_inequality
            .iter()
            .filter(|v| !(v.slack <= self.tolerance))
            .map(|v| v.inequality)
            .collect()
    }
}

struct Worst([Violation; 4]);

impl Worst {
    fn new() -> Self {
        Self(Inequality::ALL.map(|inequality| Violation {
            inequality,
            x: f64::NAN,
            slack: f64::NEG_INFINITY,
        }))
    }

    fn record(&mut self, inequality: Inequality, x: f64, slack: f64) {
        // a NaN slack counts as a violation
        let slack = if slack.is_nan() { f64::MAX } else { slack };
        let slot = &mut self.0[inequality as usize];
        if slack > slot.slack {
            *slot = Violation { inequality, x, slack };
        }
    }

    /// Replaces the sentinels of never-evaluated entries with finite numbers.
    fn finish(mut self) -> [Violation; 4] {
        for v in self.0.iter_mut() {
            if v.slack == f64::NEG_INFINITY {
                v.slack = 0.0;
                v.x = 0.0;
            }
            v.slack = v.slack.min(f64::MAX);
        }
        self.0
    }
}

/// Checks the four inequalities on the grid `x_i = (i + ½)·step < x_max`.
///
/// Grid points in linear pieces are not sampled: there `V′ = 1`, `V″ = 0`
/// and `μ − qV` decreases in `x`, so the generator inequality is checked at
/// the left end of each drift segment instead, which is exact.
pub fn verify_hjb<T: Scalar>(vf: &ValueFunction<T>, kinks: &KinkSet, grid: GridSpec, tol: f64) -> Result<HjbReport> {
    if !(grid.step > 0.0 && grid.x_max > 0.0) {
        return Err(Error::PreconditionViolated(format!("bad grid {grid:?}")));
    }
    if let Some(s) = kinks.min_spacing() {
        if grid.step > s / 4.0 {
            return Err(Error::GridTooCoarse {
                step: grid.step,
                spacing: s,
            });
        }
    }
    let m = vf.model();
    let p = m.params;
    let a = p.a.as_f64();
    let q = p.q.as_f64();
    let (mu_m, mu_p) = (p.mu_minus.as_f64(), p.mu_plus.as_f64());
    let beta = p.beta.as_f64();
    let t = |x: f64| T::lit(x);
    let mut worst = Worst::new();
    let mut checked = 0usize;

    let pieces = vf.pieces();
    let n = (grid.x_max / grid.step).floor() as usize;
    let mut k = 0usize;
    for (idx, piece) in pieces.iter().enumerate() {
        let lo = piece.start.as_f64();
        let hi = pieces.get(idx + 1).map(|p| p.start.as_f64()).unwrap_or(f64::INFINITY);
        match piece.kind {
            PieceKind::Linear { .. } => {
                let mut starts = vec![(lo, if lo < a { mu_m } else { mu_p })];
                if lo < a && a < hi {
                    starts.push((a, mu_p));
                }
                for (x, mu) in starts {
                    let v = vf.derivative(0, t(x), Side::Right).as_f64();
                    let g = (mu - q * v) / 1f64.max(q * v);
                    worst.record(Inequality::Generator, x, g);
                    worst.record(Inequality::MarginalValue, x, 0.0);
                    checked += 1;
                }
            }
            PieceKind::Fundamental { .. } => {
                while k < n {
                    let x = (k as f64 + 0.5) * grid.step;
                    if x >= hi {
                        break;
                    }
                    k += 1;
                    if x < lo || kinks.points.binary_search_by(|p| p.total_cmp(&x)).is_ok() {
                        continue;
                    }
                    let xt = t(x);
                    let v = vf.derivative(0, xt, Side::Right).as_f64();
                    let d1 = vf.derivative(1, xt, Side::Right).as_f64();
                    let d2 = vf.derivative(2, xt, Side::Right).as_f64();
                    let mu = if x > a { mu_p } else { mu_m };
                    let g = (0.5 * d2 + mu * d1 - q * v) / 1f64.max(q * v);
                    worst.record(Inequality::Generator, x, g);
                    worst.record(Inequality::MarginalValue, x, 1.0 - d1);
                    checked += 1;
                }
            }
        }
        // skip grid points that fall in linear pieces
        while k < n && (k as f64 + 0.5) * grid.step < hi {
            k += 1;
        }
    }

    // tail certificate: beyond the top breakpoint V is linear
    let v_max = vf.value(t(grid.x_max)).as_f64();
    worst.record(
        Inequality::Generator,
        grid.x_max,
        (mu_p - q * v_max) / 1f64.max(q * v_max),
    );

    let at = t(p.a.as_f64());
    let d_plus = vf.first(at, Side::Right).as_f64();
    let d_minus = vf.first(at, Side::Left).as_f64();
    worst.record(
        Inequality::SkewPasting,
        a,
        (1.0 + beta) * d_plus - (1.0 - beta) * d_minus,
    );

    for &pk in &kinks.points {
        if pk == a || pk <= 0.0 {
            continue;
        }
        let s = vf.first(t(pk), Side::Right).as_f64() - vf.first(t(pk), Side::Left).as_f64();
        worst.record(Inequality::KinkConcavity, pk, s);
    }

    let w = worst.finish();
    let ok = |i: Inequality| w[i as usize].slack <= tol;
    let worst_violation = *w
        .iter()
        .max_by(|x, y| x.slack.total_cmp(&y.slack))
        .expect("four entries");
    Ok(HjbReport {
        generator: ok(Inequality::Generator),
        marginal_value: ok(Inequality::MarginalValue),
        skew_pasting: ok(Inequality::SkewPasting),
        kink_concavity: ok(Inequality::KinkConcavity),
        worst_violation,
        worst_by_inequality: w.to_vec(),
        grid,
        tolerance: tol,
        points_checked: checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::barrier::{b_plus, barrier_value_function};
    use crate::model::{ModelParams, SkewModel};
    use crate::value::Level;

    fn model(beta: f64, mm: f64, mp: f64, a: f64, q: f64) -> SkewModel<f64> {
        SkewModel::new(ModelParams::new(beta, mm, mp, a, q).unwrap()).unwrap()
    }

    fn check(vf: &ValueFunction<f64>) -> HjbReport {
        let k = KinkSet::of(vf);
        verify_hjb(vf, &k, GridSpec::fitted(vf, &k), HJB_TOL).unwrap()
    }

    #[test]
    fn zero_barrier_passes_when_conditions_hold() {
        let m = model(-0.3, -5.0, 0.05, 1.0, 0.1);
        let vf = barrier_value_function(&m, Level::At(0.0)).unwrap();
        assert!(check(&vf).passed());
    }

    #[test]
    fn zero_barrier_fails_generator_with_large_upper_drift() {
        // mu_plus = 2qa: mu_plus - q x > 0 on (a, 2a)
        let m = model(-0.3, -5.0, 0.2, 1.0, 0.1);
        let vf = barrier_value_function(&m, Level::At(0.0)).unwrap();
        let r = check(&vf);
        assert!(!r.generator && r.marginal_value && r.skew_pasting && r.kink_concavity);
        let g = r.worst_by_inequality[Inequality::Generator as usize];
        assert!((g.x - 1.0).abs() < 1e-12 && (g.slack - 0.1).abs() < 1e-12, "{g:?}");
    }

    #[test]
    fn upper_barrier_cell() {
        let m = model(-0.9, 0.0, 5.0, 1.0, 0.1);
        let bp = b_plus(&m).unwrap();
        let vf = barrier_value_function(&m, Level::At(bp)).unwrap();
        assert!(check(&vf).passed());
        let vf = barrier_value_function(&m, Level::At(0.0)).unwrap();
        assert!(!check(&vf).passed());
        let vf = barrier_value_function(&m, Level::At(bp + 0.5)).unwrap();
        let r = check(&vf);
        assert_eq!(r.failed_inequalities(), vec![Inequality::MarginalValue]);
    }

    #[test]
    fn monotone_in_tolerance_and_coarse_grid_rejected() {
        let m = model(0.3, -1.0, 2.0, 1.0, 0.1);
        let vf = barrier_value_function(&m, Level::At(1.4)).unwrap();
        let k = KinkSet::of(&vf);
        let g = GridSpec::fitted(&vf, &k);
        let mut prev = false;
        for tol in [1e-9, 1e-7, 1e-4, 1e-2, 1.0, 100.0] {
            let r = verify_hjb(&vf, &k, g, tol).unwrap();
            assert!(!prev || r.passed());
            prev = r.passed();
        }
        let bad = GridSpec { x_max: 5.0, step: 0.2 };
        assert!(matches!(
            verify_hjb(&vf, &k, bad, 1e-7),
            Err(Error::GridTooCoarse { .. })
        ));
    }
}
