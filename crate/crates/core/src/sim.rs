//! Lattice Monte Carlo for the skew walk with two-valued drift.
//!
//! The walk lives on `dx·ℤ` with `Δt = dx²`: it goes up with probability
//! `(1+β)/2` at the skew site and `(1+μ·dx)/2` elsewhere. Discounting is
//! done by killing: each step survives with probability `e^{−q·dx²}`, so a
//! payoff collected at step `k` carries weight `e^{−q·k·dx²}` in expectation.
//!
//! Long stretches away from the special sites are crossed in one draw using
//! exact exit laws of the walk on symmetric dyadic intervals, and time
//! spent reflecting at a dividend barrier is replaced by its expected
//! discounted payout (the exit law is still sampled).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::Strategy;
use crate::exit::ExitQuery;
use crate::value::Level;
use crate::{BandSpec, Error, Params, Result};

/// Paths per aggregation chunk; fixed so results do not depend on threads.
const CHUNK: u64 = 4096;
/// Largest macro-step radius is `2^MAX_LEVEL` sites.
const MAX_LEVEL: u32 = 14;
/// Fraction of censored paths above which the horizon flag is raised.
pub const CENSOR_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatticeConfig {
    pub dx: f64,
    pub seed: u64,
    pub n_paths: u64,
    /// Horizon in model time; `None` means `25/q`.
    pub t_max: Option<f64>,
}

impl LatticeConfig {
    pub fn new(dx: f64, seed: u64, n_paths: u64) -> Self {
        Self {
            dx,
            seed,
            n_paths,
            t_max: None,
        }
    }

    pub fn with_horizon(mut self, t_max: f64) -> Self {
        self.t_max = Some(t_max);
        self
    }

    pub fn horizon(&self, p: &Params) -> f64 {
        self.t_max.unwrap_or(25.0 / p.q)
    }

    pub fn validate(&self, p: &Params) -> Result<()> {
        p.validate()?;
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return Err(Error::InvalidConfig(format!("dx = {} must be positive", self.dx)));
        }
        if self.n_paths == 0 {
            return Err(Error::InvalidConfig("n_paths must be positive".into()));
        }
        if let Some(t) = self.t_max {
            if !(t > 0.0) {
                return Err(Error::InvalidConfig(format!("t_max = {t} must be positive")));
            }
        }
        for mu in [p.mu_minus, p.mu_plus] {
            if mu.abs() * self.dx >= 1.0 {
                return Err(Error::StepTooCoarse(format!(
                    "|mu|·dx = {} must be below 1",
                    mu.abs() * self.dx
                )));
            }
        }
        site_of(p.a, self.dx)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: u64,
    /// Paths stopped by the horizon before finishing.
    pub censored: u64,
    /// Set when more than 0.1% of paths were censored.
    pub horizon_too_short: bool,
    pub config: LatticeConfig,
}

fn site_of(x: f64, dx: f64) -> Result<i64> {
    let r = x / dx;
    let k = r.round();
    if (r - k).abs() > 1e-12 * r.abs().max(1.0) {
        return Err(Error::OffLattice { value: x, dx });
    }
    Ok(k as i64)
}

/// Up-probability at lattice `site` (site `k` sits at `k·dx`).
pub fn step_probability(site: i64, cfg: &LatticeConfig, p: &Params) -> Result<f64> {
    cfg.validate(p)?;
    Ok(Walk::new(p, cfg)?.p(site))
}

#[derive(Debug, Clone, Copy)]
enum Node {
    Absorb(f64),
    /// `up_pays`: an up-step pays `dx` and leaves the walk in place.
    Move {
        p: f64,
        up_pays: bool,
    },
}

/// Expected discounted reward on a finite chain of sites: absorbing nodes
/// pay their value, reflecting nodes pay `pay` per up-step, and every step
/// taken earns `per_step`. The end nodes must not step off the chain.
fn solve_chain(nodes: &[Node], s: f64, pay: f64, per_step: f64) -> Vec<f64> {
    let n = nodes.len();
    let (mut sub, mut diag, mut sup, mut rhs) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for (i, node) in nodes.iter().enumerate() {
        match *node {
            Node::Absorb(v) => {
                diag[i] = 1.0;
                rhs[i] = v;
            }
            Node::Move { p, up_pays } => {
                sub[i] = -s * (1.0 - p);
                rhs[i] = per_step;
                if up_pays {
                    diag[i] = 1.0 - s * p;
                    rhs[i] += s * p * pay;
                } else {
                    diag[i] = 1.0;
                    sup[i] = -s * p;
                }
            }
        }
    }
    // Thomas algorithm
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut x = vec![0.0; n];
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Region {
    Below,
    Above,
}

/// Law of one macro step: `(up, down)` probabilities for free moves or
/// `(exit, dividends)` for a reflected stretch, plus the expected number
/// of single steps it stands for.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Law {
    first: f64,
    second: f64,
    steps: f64,
}

#[derive(Debug, Clone, Default)]
struct Tables {
    below: Vec<Law>,
    above: Vec<Law>,
    skew: Vec<Law>,
    reflect_below: Vec<Law>,
    reflect_above: Vec<Law>,
    /// Reflected at the skew site itself.
    reflect_skew: Vec<Law>,
}

#[derive(Debug, Clone)]
struct Walk {
    dx: f64,
    ka: i64,
    p_below: f64,
    p_above: f64,
    p_skew: f64,
    s: f64,
    tables: Tables,
}

impl Walk {
    fn new(p: &Params, cfg: &LatticeConfig) -> Result<Self> {
        cfg.validate(p)?;
        let dx = cfg.dx;
        Ok(Self {
            dx,
            ka: site_of(p.a, dx)?,
            p_below: 0.5 * (1.0 + p.mu_minus * dx),
            p_above: 0.5 * (1.0 + p.mu_plus * dx),
            p_skew: 0.5 * (1.0 + p.beta),
            s: (-p.q * dx * dx).exp(),
            tables: Tables::default(),
        })
    }

    fn p(&self, k: i64) -> f64 {
        match k.cmp(&self.ka) {
            std::cmp::Ordering::Less => self.p_below,
            std::cmp::Ordering::Equal => self.p_skew,
            std::cmp::Ordering::Greater => self.p_above,
        }
    }

    fn region(&self, k: i64) -> Region {
        if k < self.ka {
            Region::Below
        } else {
            Region::Above
        }
    }

    /// Exit law of the interval of radius `d` around `center`.
    fn symmetric_exit(&self, center: i64, d: i64) -> Law {
        let nodes = |up: f64| -> Vec<Node> {
            (0..=2 * d)
                .map(|i| match i {
                    0 => Node::Absorb(1.0 - up),
                    i if i == 2 * d => Node::Absorb(up),
                    i => Node::Move {
                        p: self.p(center - d + i),
                        up_pays: false,
                    },
                })
                .collect()
        };
        let c = d as usize;
        let up = solve_chain(&nodes(1.0), self.s, 0.0, 0.0)[c];
        let down = solve_chain(&nodes(0.0), self.s, 0.0, 0.0)[c];
        let mut quiet = nodes(0.0);
        quiet[0] = Node::Absorb(0.0);
        let steps = solve_chain(&quiet, self.s, 0.0, 1.0)[c];
        Law {
            first: up,
            second: down,
            steps,
        }
    }

    /// Walk reflected at `top` until it reaches `top − d`.
    fn reflected_exit(&self, top: i64, d: i64) -> Law {
        let nodes = |hit: f64| -> Vec<Node> {
            (0..=d)
                .map(|i| match i {
                    0 => Node::Absorb(hit),
                    i => Node::Move {
                        p: self.p(top - d + i),
                        up_pays: i == d,
                    },
                })
                .collect()
        };
        let c = d as usize;
        let exit = solve_chain(&nodes(1.0), self.s, 0.0, 0.0)[c];
        let paid = solve_chain(&nodes(0.0), self.s, self.dx, 0.0)[c];
        let steps = solve_chain(&nodes(0.0), self.s, 0.0, 1.0)[c];
        Law {
            first: exit,
            second: paid,
            steps,
        }
    }

    /// Fills the tables up to radius `2^levels`. Reference sites are far
    /// enough from the skew site that the region drift applies throughout.
    fn build(&mut self, levels: u32) {
        let far = 1i64 << (levels + 1);
        let lo = self.ka - 2 * far;
        let hi = self.ka + 2 * far;
        let mut t = Tables::default();
        for j in 0..=levels {
            let d = 1i64 << j;
            t.below.push(self.symmetric_exit(lo, d));
            t.above.push(self.symmetric_exit(hi, d));
            t.skew.push(self.symmetric_exit(self.ka, d));
            t.reflect_below.push(self.reflected_exit(lo, d));
            t.reflect_above.push(self.reflected_exit(hi, d));
            t.reflect_skew.push(self.reflected_exit(self.ka, d));
        }
        self.tables = t;
    }

    fn levels(&self) -> u32 {
        self.tables.skew.len() as u32 - 1
    }

    /// Largest dyadic level whose radius does not exceed `dist`.
    fn level_for(&self, dist: i64) -> u32 {
        debug_assert!(dist >= 1);
        (63 - (dist as u64).leading_zeros()).min(self.levels())
    }
}

fn levels_for_span(span: i64) -> u32 {
    let span = span.max(1) as u64;
    (63 - span.leading_zeros()).min(MAX_LEVEL)
}

/// What happens to a walker, given by its special sites.
#[derive(Debug, Clone, Copy, Default)]
struct Plan {
    /// Absorbing sites and the reward collected on arrival.
    absorb: [Option<(i64, f64)>; 2],
    /// Ruin at site 0.
    ruin: bool,
    reflect: Option<i64>,
    /// Arriving at `from` pays `(from − to)·dx` and moves to `to`, after
    /// which `then_reflect` takes over.
    drop: Option<(i64, i64, Option<i64>)>,
}

impl Plan {
    fn absorbed(&self, k: i64) -> Option<f64> {
        if self.ruin && k == 0 {
            return Some(0.0);
        }
        self.absorb.iter().flatten().find(|(s, _)| *s == k).map(|(_, v)| *v)
    }

    /// Distances to the nearest special site strictly below and above `k`.
    fn gaps(&self, k: i64, ka: i64) -> (i64, i64) {
        let mut below = i64::MAX;
        let mut above = i64::MAX;
        let mut see = |s: i64| {
            if s < k {
                below = below.min(k - s);
            } else if s > k {
                above = above.min(s - k);
            }
        };
        see(ka);
        if self.ruin {
            see(0);
        }
        for (s, _) in self.absorb.iter().flatten() {
            see(*s);
        }
        if let Some(r) = self.reflect {
            see(r);
        }
        if let Some((from, _, _)) = self.drop {
            see(from);
        }
        (below, above)
    }
}

#[derive(Debug, Clone, Copy)]
struct PathOutcome {
    reward: f64,
    censored: bool,
}

fn run_path(walk: &Walk, plan0: &Plan, start: i64, budget: f64, rng: &mut ChaCha8Rng) -> PathOutcome {
    let mut plan = *plan0;
    let mut k = start;
    let mut reward = 0.0;
    let mut steps = 0.0;
    loop {
        if let Some(v) = plan.absorbed(k) {
            return PathOutcome {
                reward: reward + v,
                censored: false,
            };
        }
        if let Some((from, to, then)) = plan.drop {
            if k == from {
                reward += (from - to) as f64 * walk.dx;
                k = to;
                plan.reflect = then;
                plan.drop = None;
                continue;
            }
        }
        if steps >= budget {
            return PathOutcome { reward, censored: true };
        }
        let (below, above) = plan.gaps(k, walk.ka);
        let u: f64 = rng.gen();
        if plan.reflect == Some(k) {
            let j = walk.level_for(below);
            let law = match walk.region(k) {
                _ if k == walk.ka => walk.tables.reflect_skew[j as usize],
                Region::Below => walk.tables.reflect_below[j as usize],
                Region::Above => walk.tables.reflect_above[j as usize],
            };
            reward += law.second;
            steps += law.steps;
            if u >= law.first {
                return PathOutcome {
                    reward,
                    censored: false,
                };
            }
            k -= 1i64 << j;
            continue;
        }
        let j = walk.level_for(below.min(above));
        let law = if k == walk.ka {
            walk.tables.skew[j as usize]
        } else {
            match walk.region(k) {
                Region::Below => walk.tables.below[j as usize],
                Region::Above => walk.tables.above[j as usize],
            }
        };
        let (up, down) = (law.first, law.second);
        let d = 1i64 << j;
        steps += law.steps;
        if u < up {
            k += d;
        } else if u < up + down {
            k -= d;
        } else {
            return PathOutcome {
                reward,
                censored: false,
            };
        }
    }
}

/// Runs `n_paths` independent walkers; path `i` uses stream `i` of the
/// seeded generator, and chunk sums are combined in a fixed order.
fn estimate(walk: &Walk, plan: &Plan, start: i64, initial: f64, cfg: &LatticeConfig, p: &Params) -> SimEstimate {
    let budget = cfg.horizon(p) / (cfg.dx * cfg.dx);
    let n = cfg.n_paths;
    let chunks: Vec<(f64, f64, u64)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let (mut sum, mut sq, mut cens) = (0.0, 0.0, 0u64);
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                rng.set_stream(i);
                rng.set_word_pos(0);
                let out = run_path(walk, plan, start, budget, &mut rng);
                sum += out.reward;
                sq += out.reward * out.reward;
                cens += out.censored as u64;
            }
            (sum, sq, cens)
        })
        .collect();
    let (sum, sq, censored) = chunks
        .iter()
        .fold((0.0, 0.0, 0u64), |acc, c| (acc.0 + c.0, acc.1 + c.1, acc.2 + c.2));
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 {
        ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    SimEstimate {
        mean: initial + mean,
        std_error: (var / nf).sqrt(),
        n_paths: n,
        censored,
        horizon_too_short: censored as f64 > CENSOR_LIMIT * nf,
        config: *cfg,
    }
}

/// Which exit functional to estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExitTarget {
    /// `E[e^{−qτ}; exit at z]` from `[y, z]`.
    Up(ExitQuery<f64>),
    /// `E[e^{−qτ}; exit at y]` from `[y, z]`.
    Down(ExitQuery<f64>),
    /// `E[e^{−qτ}]` for the exit from `[y, z]` at either end.
    Interval(ExitQuery<f64>),
    /// First passage down to `r` from `x ≥ r`.
    OneSidedDown { x: f64, r: f64 },
    /// First passage up to `r` from `x ≤ r`.
    OneSidedUp { x: f64, r: f64 },
}

struct ExitSetup {
    start: i64,
    plan: Plan,
    span: i64,
}

fn exit_setup(target: &ExitTarget, dx: f64) -> Result<ExitSetup> {
    let mut plan = Plan::default();
    let two_sided = |q: &ExitQuery<f64>, up: f64, down: f64, plan: &mut Plan| -> Result<(i64, i64)> {
        q.validate()?;
        let (ky, kz) = (site_of(q.y, dx)?, site_of(q.z, dx)?);
        plan.absorb = [Some((ky, down)), Some((kz, up))];
        Ok((site_of(q.x, dx)?, kz - ky))
    };
    let (start, span) = match target {
        ExitTarget::Up(q) => two_sided(q, 1.0, 0.0, &mut plan)?,
        ExitTarget::Down(q) => two_sided(q, 0.0, 1.0, &mut plan)?,
        ExitTarget::Interval(q) => two_sided(q, 1.0, 1.0, &mut plan)?,
        ExitTarget::OneSidedDown { x, r } | ExitTarget::OneSidedUp { x, r } => {
            let down = matches!(target, ExitTarget::OneSidedDown { .. });
            if (down && x < r) || (!down && x > r) || !x.is_finite() || !r.is_finite() {
                return Err(Error::PreconditionViolated(format!(
                    "x = {x} is on the wrong side of r = {r}"
                )));
            }
            plan.absorb = [Some((site_of(*r, dx)?, 1.0)), None];
            (site_of(*x, dx)?, i64::MAX)
        }
    };
    Ok(ExitSetup { start, plan, span })
}

pub fn estimate_exit_transform(target: &ExitTarget, cfg: &LatticeConfig, p: &Params) -> Result<SimEstimate> {
    let mut walk = Walk::new(p, cfg)?;
    let setup = exit_setup(target, cfg.dx)?;
    walk.build(levels_for_span(setup.span));
    Ok(estimate(&walk, &setup.plan, setup.start, 0.0, cfg, p))
}

/// Lattice sites of a strategy. A reflecting site `k` that pays on its
/// up-steps acts like a continuous barrier at `(k + ½)·dx`, so barriers go
/// to the site just below them. A walk reflected at the skew site itself
/// never feels the upper drift, so it is closest to the barrier `a₊`; the
/// leftover bias is of order `q·dx`. The drop level `a₁` is hit exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Sites {
    Barrier(i64),
    Band { b1: i64, a1: i64, b2: i64 },
}

fn reflecting_site(level: Level<f64>, a: f64, dx: f64, ka: i64) -> Result<i64> {
    Ok(match level {
        Level::AMinus => ka - 1,
        Level::APlus => ka,
        Level::A => return Err(Error::InvalidLevel("a barrier cannot sit at the marker a".into())),
        Level::At(0.0) => 0,
        Level::At(x) => {
            let k = ((x / dx) - 0.5).round().max(0.0) as i64;
            if x > a {
                k.max(ka)
            } else {
                k.min(ka - 1)
            }
        }
    })
}

fn lattice_sites(strategy: &Strategy, cfg: &LatticeConfig, p: &Params) -> Result<Sites> {
    cfg.validate(p)?;
    let dx = cfg.dx;
    let ka = site_of(p.a, dx)?;
    match strategy {
        Strategy::Barrier { level } => {
            if let Level::At(x) = level {
                if !(*x >= 0.0 && x.is_finite()) {
                    return Err(Error::InvalidLevel(format!(
                        "barrier {x} must be finite and non-negative"
                    )));
                }
            }
            Ok(Sites::Barrier(reflecting_site(*level, p.a, dx, ka)?))
        }
        Strategy::Band { spec } => {
            spec.validate(&crate::Model::new(*p)?)?;
            let b1 = reflecting_site(spec.b1, p.a, dx, ka)?;
            let a1 = match spec.a1 {
                Level::At(x) => ((x / dx).round() as i64).min(ka),
                _ => ka,
            }
            .max(b1);
            let b2 = reflecting_site(spec.b2, p.a, dx, ka)?.max(a1 + 1);
            Ok(Sites::Band { b1, a1, b2 })
        }
    }
}

/// The strategy the lattice actually runs, with reflecting levels at the
/// levels they act at. Its closed-form value is the comparator for
/// simulated values; `a₋` becomes `a − dx/2` and `a₊` stays put.
pub fn realized_strategy(strategy: &Strategy, cfg: &LatticeConfig, p: &Params) -> Result<Strategy> {
    let dx = cfg.dx;
    let ka = site_of(p.a, dx)?;
    let barrier = |k: i64| match k {
        0 => Level::At(0.0),
        k if k == ka => Level::APlus,
        k => Level::At((k as f64 + 0.5) * dx),
    };
    Ok(match lattice_sites(strategy, cfg, p)? {
        Sites::Barrier(k) => Strategy::Barrier { level: barrier(k) },
        Sites::Band { b1, a1, b2 } => {
            let a1 = if a1 == ka { Level::A } else { Level::At(a1 as f64 * dx) };
            Strategy::Band {
                spec: BandSpec::new(barrier(b1), a1, barrier(b2)),
            }
        }
    })
}

struct StrategySetup {
    start: i64,
    initial: f64,
    plan: Plan,
    top: i64,
}

fn strategy_setup(x0: f64, strategy: &Strategy, cfg: &LatticeConfig, p: &Params) -> Result<StrategySetup> {
    if !(x0 >= 0.0) {
        return Err(Error::PreconditionViolated(format!("x0 = {x0} must be non-negative")));
    }
    let dx = cfg.dx;
    let k0 = site_of(x0, dx)?;
    let mut plan = Plan {
        ruin: true,
        ..Plan::default()
    };
    match lattice_sites(strategy, cfg, p)? {
        Sites::Barrier(kb) => {
            plan.reflect = (kb > 0).then_some(kb);
            let (start, initial) = if k0 > kb {
                (kb, (k0 - kb) as f64 * dx)
            } else {
                (k0, 0.0)
            };
            Ok(StrategySetup {
                start,
                initial,
                plan,
                top: kb,
            })
        }
        Sites::Band {
            b1: kb1,
            a1: ka1,
            b2: kb2,
        } => {
            let lower = (kb1 > 0).then_some(kb1);
            let (start, initial) = if k0 <= kb1 {
                (k0, 0.0)
            } else if k0 <= ka1 {
                (kb1, (k0 - kb1) as f64 * dx)
            } else if k0 <= kb2 {
                (k0, 0.0)
            } else {
                (kb2, (k0 - kb2) as f64 * dx)
            };
            if start <= ka1 {
                plan.reflect = lower;
            } else {
                plan.reflect = Some(kb2);
                plan.drop = Some((ka1, kb1, lower));
            }
            Ok(StrategySetup {
                start,
                initial,
                plan,
                top: kb2,
            })
        }
    }
}

/// Discounted dividends from `x0` under `strategy`, ruin at 0.
pub fn estimate_strategy_value(x0: f64, strategy: &Strategy, cfg: &LatticeConfig, p: &Params) -> Result<SimEstimate> {
    let mut walk = Walk::new(p, cfg)?;
    let setup = strategy_setup(x0, strategy, cfg, p)?;
    walk.build(levels_for_span(setup.top.max(walk.ka + 1)));
    Ok(estimate(&walk, &setup.plan, setup.start, setup.initial, cfg, p))
}

/// Sites needed on each side of a one-sided passage so that the truncated
/// chain differs from the infinite one by less than `e^{−40}`.
fn one_sided_reach(p: &Params, dx: f64, upward: bool) -> i64 {
    let rate = |mu: f64| {
        let (r1, r2) = crate::model::quadratic_roots(mu, p.q);
        if upward {
            r2
        } else {
            -r1
        }
    };
    let slow = rate(p.mu_minus).min(rate(p.mu_plus));
    ((40.0 / slow / dx).ceil() as i64).clamp(16, 4_000_000)
}

/// Expected value of the lattice walk itself, from a tridiagonal solve.
/// This is what the Monte Carlo estimates converge to as `n_paths` grows.
pub fn lattice_exit_transform(target: &ExitTarget, cfg: &LatticeConfig, p: &Params) -> Result<f64> {
    let walk = Walk::new(p, cfg)?;
    let setup = exit_setup(target, cfg.dx)?;
    let [first, second] = setup.plan.absorb;
    let (lo, hi, lo_val, hi_val) = match (first, second) {
        (Some((ky, vy)), Some((kz, vz))) => (ky, kz, vy, vz),
        (Some((kr, _)), None) => match target {
            ExitTarget::OneSidedDown { .. } => (kr, setup.start + one_sided_reach(p, cfg.dx, false), 1.0, 0.0),
            _ => (setup.start - one_sided_reach(p, cfg.dx, true), kr, 0.0, 1.0),
        },
        _ => unreachable!("exit plans have at least one absorbing site"),
    };
    let nodes: Vec<Node> = (lo..=hi)
        .map(|k| match k {
            k if k == lo => Node::Absorb(lo_val),
            k if k == hi => Node::Absorb(hi_val),
            k => Node::Move {
                p: walk.p(k),
                up_pays: false,
            },
        })
        .collect();
    Ok(solve_chain(&nodes, walk.s, 0.0, 0.0)[(setup.start - lo) as usize])
}

/// Values on sites `0..=top` of the walk reflected at `top` and ruined at 0.
fn reflected_values(walk: &Walk, top: i64) -> Vec<f64> {
    let nodes: Vec<Node> = (0..=top)
        .map(|k| {
            if k == 0 {
                Node::Absorb(0.0)
            } else {
                Node::Move {
                    p: walk.p(k),
                    up_pays: k == top,
                }
            }
        })
        .collect();
    solve_chain(&nodes, walk.s, walk.dx, 0.0)
}

pub fn lattice_strategy_value(x0: f64, strategy: &Strategy, cfg: &LatticeConfig, p: &Params) -> Result<f64> {
    let walk = Walk::new(p, cfg)?;
    let setup = strategy_setup(x0, strategy, cfg, p)?;
    let dx = cfg.dx;
    let (k, init) = (setup.start, setup.initial);
    let lower_at = |kb1: i64, k: i64| {
        if kb1 == 0 {
            0.0
        } else {
            reflected_values(&walk, kb1)[k as usize]
        }
    };
    let v = match (setup.plan.reflect, setup.plan.drop) {
        (None, None) => 0.0,
        (Some(kb), None) => reflected_values(&walk, kb)[k as usize],
        (Some(kb2), Some((ka1, kb1, _))) => {
            let exit_value = (ka1 - kb1) as f64 * dx + lower_at(kb1, kb1);
            let nodes: Vec<Node> = (ka1..=kb2)
                .map(|j| {
                    if j == ka1 {
                        Node::Absorb(exit_value)
                    } else {
                        Node::Move {
                            p: walk.p(j),
                            up_pays: j == kb2,
                        }
                    }
                })
                .collect();
            solve_chain(&nodes, walk.s, dx, 0.0)[(k - ka1) as usize]
        }
        (None, Some(_)) => unreachable!("a band's upper part always reflects"),
    };
    Ok(init + v)
}

/// Mean fraction of `[0, horizon]` spent strictly above `a`, without
/// discounting or ruin, from single steps.
pub fn estimate_occupation_above(x0: f64, horizon: f64, cfg: &LatticeConfig, p: &Params) -> Result<SimEstimate> {
    let walk = Walk::new(p, cfg)?;
    let k0 = site_of(x0, cfg.dx)?;
    let steps = (horizon / (cfg.dx * cfg.dx)).ceil() as u64;
    if steps == 0 {
        return Err(Error::InvalidConfig("horizon shorter than one step".into()));
    }
    let n = cfg.n_paths;
    let chunks: Vec<(f64, f64)> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let (mut sum, mut sq) = (0.0, 0.0);
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                rng.set_stream(i);
                rng.set_word_pos(0);
                let mut k = k0;
                let mut above = 0u64;
                for _ in 0..steps {
                    above += (k > walk.ka) as u64;
                    k += if rng.gen::<f64>() < walk.p(k) { 1 } else { -1 };
                }
                let f = above as f64 / steps as f64;
                sum += f;
                sq += f * f;
            }
            (sum, sq)
        })
        .collect();
    let (sum, sq) = chunks.iter().fold((0.0, 0.0), |a, c| (a.0 + c.0, a.1 + c.1));
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 {
        ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(SimEstimate {
        mean,
        std_error: (var / nf).sqrt(),
        n_paths: n,
        censored: 0,
        horizon_too_short: false,
        config: *cfg,
    })
}
