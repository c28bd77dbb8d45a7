//! Structural identities the closed forms must satisfy. Each check returns
//! `Err` with a description of the first violation found; the property
//! tests and the acceptance harness drive them over random parameters.

use crate::band::{band_value_function, beta_star_from_slope, BandSpec};
use crate::barrier::{b_minus, b_plus, k_beta};
use crate::exit::{downcross_before_up, exit_interval_transform, upcross_before_down};
use crate::model::{Fundamental, Side};
use crate::value::Level;
use crate::{ExitQuery, Model, Params};

pub type Check = std::result::Result<(), String>;

fn rel_close(x: f64, y: f64, scale: f64, tol: f64) -> bool {
    (x - y).abs() <= tol * scale.max(f64::MIN_POSITIVE)
}

fn fail<T>(msg: String) -> std::result::Result<T, String> {
    Err(msg)
}

/// `c₁ < 1`, `c₂ < 1` and `1 − c₁c₂ > 0`.
pub fn coefficient_bounds(m: &Model) -> Check {
    let (c1, c2) = (m.coeffs.c1, m.coeffs.c2);
    if !(c1 < 1.0 && c2 < 1.0 && 1.0 - c1 * c2 > 0.0) {
        return fail(format!("c1 = {c1}, c2 = {c2}"));
    }
    Ok(())
}

/// `½g″ + μg′ − qg = 0` for both fundamental solutions at each `x ≠ a`.
pub fn ode_residuals(m: &Model, xs: &[f64]) -> Check {
    let p = &m.params;
    for &x in xs.iter().filter(|&&x| x != p.a) {
        let mu = p.drift(x, Side::Left);
        for which in [Fundamental::G1, Fundamental::G2] {
            let terms = [
                0.5 * m.g(which, 2, x, Side::Left),
                mu * m.g(which, 1, x, Side::Left),
                -p.q * m.g(which, 0, x, Side::Left),
            ];
            let scale = terms.iter().fold(0.0f64, |s, t| s.max(t.abs()));
            let r: f64 = terms.iter().sum();
            if !(r.abs() <= 1e-8 * scale) {
                return fail(format!("{which:?} residual {r:e} at x = {x} (scale {scale:e})"));
            }
        }
    }
    Ok(())
}

/// Continuity at `a` and `(1+β)f′(a+) = (1−β)f′(a−)` for `g₁`, `g₂` and `W`.
pub fn pasting(m: &Model) -> Check {
    let a = m.a();
    let beta = m.params.beta;
    let f = |name: &str, k: u32, s: Side| match name {
        "g1" => m.g(Fundamental::G1, k, a, s),
        "g2" => m.g(Fundamental::G2, k, a, s),
        _ => m.scale_terms(k, a, s).eval(),
    };
    for name in ["g1", "g2", "W"] {
        let f = |k, s| f(name, k, s);
        let (l, r) = (f(0, Side::Left), f(0, Side::Right));
        if !rel_close(l, r, l.abs().max(r.abs()), 1e-10) {
            return fail(format!("{name} jumps at a: {l} vs {r}"));
        }
        let lhs = (1.0 + beta) * f(1, Side::Right);
        let rhs = (1.0 - beta) * f(1, Side::Left);
        if !rel_close(lhs, rhs, lhs.abs().max(rhs.abs()), 1e-10) {
            return fail(format!("{name} pasting: (1+b)f'(a+) = {lhs}, (1-b)f'(a-) = {rhs}"));
        }
    }
    Ok(())
}

/// Five-point central difference of `f` at `x`.
fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// Analytic `W′`, `W″` against finite differences, at points at least
/// `4h` away from `a`.
pub fn scale_derivatives(m: &Model, xs: &[f64]) -> Check {
    let r = &m.roots;
    let rmax = [r.rho1_minus, r.rho2_minus, r.rho1_plus, r.rho2_plus]
        .iter()
        .fold(0.0f64, |s, v| s.max(v.abs()));
    let h = 1e-3 / rmax;
    let a = m.a();
    for &x in xs.iter().filter(|&&x| x - 2.0 * h >= 0.0 && (x - a).abs() > 4.0 * h) {
        let d1 = m.scale_prime(x, Side::Left);
        let fd1 = central(|t| m.scale(t), x, h);
        if !rel_close(d1, fd1, d1.abs(), 1e-6) {
            return fail(format!("W'({x}) = {d1}, difference {fd1}"));
        }
        let d2 = m.scale_second(x, Side::Left);
        let fd2 = central(|t| m.scale_prime(t, Side::Left), x, h);
        if !rel_close(d2, fd2, d2.abs().max(rmax * d1.abs()), 1e-6) {
            return fail(format!("W''({x}) = {d2}, difference {fd2}"));
        }
    }
    Ok(())
}

/// `W′ > 0` and `W` strictly increasing on `n` grid steps over `[0, x_max]`.
pub fn scale_increasing(m: &Model, x_max: f64, n: usize) -> Check {
    let mut prev = m.scale(0.0);
    for i in 1..=n {
        let x = x_max * i as f64 / n as f64;
        let w = m.scale(x);
        let d = m.scale_prime(x, Side::Left);
        if !(w > prev && d > 0.0) {
            return fail(format!(
                "W not increasing at x = {x}: W = {w}, previous {prev}, W' = {d}"
            ));
        }
        prev = w;
    }
    Ok(())
}

/// `W′` falls then rises around `b₋` on `[0, a)` and around `b₊` above `a`
/// (when `K(β) > 1`), and rises throughout otherwise. Checked through the
/// sign of `W″` on `n` grid points per side, skipping a small window
/// around the stationary point.
pub fn convexity_taxonomy(m: &Model, n: usize) -> Check {
    let a = m.a();
    let bm = b_minus(m);
    let bp = b_plus(m).filter(|_| k_beta(m) > 1.0);
    let top = bp.map_or(a + 5.0, |b| b.max(a) + 5.0);
    let window = 1e-6 * top;
    let probe = |x: f64, side: Side, centre: Option<f64>| -> Check {
        let want = match centre {
            Some(c) if (x - c).abs() <= window => return Ok(()),
            Some(c) => (x - c).signum(),
            None => 1.0,
        };
        let d2 = m.scale_second(x, side);
        if !(d2 * want > 0.0) {
            return fail(format!(
                "W''({x}) = {d2:e}, expected sign {want} (b- = {bm}, b+ = {bp:?})"
            ));
        }
        Ok(())
    };
    for i in 1..n {
        let x = a * i as f64 / n as f64;
        probe(x, Side::Left, Some(bm))?;
    }
    for i in 1..=n {
        let x = a + (top - a) * i as f64 / n as f64;
        probe(x, Side::Right, bp)?;
    }
    Ok(())
}

/// `sign(b₋) = sign(μ₋)`, `K(β) > 1 ⟺ b₊ > a`, and `K(β) > 1 ⟹ μ₊ > 0`.
pub fn sign_equivalences(m: &Model) -> Check {
    let p = &m.params;
    let bm = b_minus(m);
    let sign = |v: f64| {
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    if sign(bm) != sign(p.mu_minus) {
        return fail(format!("b- = {bm} but mu- = {}", p.mu_minus));
    }
    let k = k_beta(m);
    let above = b_plus(m).is_some_and(|b| b > p.a);
    if (k > 1.0) != above {
        return fail(format!("K = {k} but b+ = {:?} with a = {}", b_plus(m), p.a));
    }
    if k > 1.0 && !(p.mu_plus > 0.0) {
        return fail(format!("K = {k} with mu+ = {}", p.mu_plus));
    }
    Ok(())
}

/// For `β₁ < β₂`: `W′_{β₁} < W′_{β₂}` on `[0, a)`, `W′_β(a+)` decreasing in
/// `β`, and `W′_β(a−) < W′_β(a+)` exactly when `β < 0`.
pub fn beta_monotonicity(p: &Params, beta1: f64, beta2: f64, xs: &[f64]) -> Check {
    assert!(beta1 < beta2);
    let with = |b: f64| Model::new(Params { beta: b, ..*p }).map_err(|e| e.to_string());
    let (m1, m2) = (with(beta1)?, with(beta2)?);
    for &x in xs.iter().filter(|&&x| x >= 0.0 && x < p.a) {
        let (d1, d2) = (m1.scale_prime(x, Side::Left), m2.scale_prime(x, Side::Left));
        if !(d1 < d2) {
            return fail(format!("W'({x}): {d1} at beta {beta1}, {d2} at beta {beta2}"));
        }
    }
    let (r1, r2) = (m1.scale_prime(p.a, Side::Right), m2.scale_prime(p.a, Side::Right));
    if !(r1 > r2) {
        return fail(format!("W'(a+): {r1} at beta {beta1}, {r2} at beta {beta2}"));
    }
    for m in [&m1, &m2] {
        let (l, r) = (m.scale_prime(p.a, Side::Left), m.scale_prime(p.a, Side::Right));
        let beta = m.params.beta;
        if (l < r) != (beta < 0.0) {
            return fail(format!("beta = {beta}: W'(a-) = {l}, W'(a+) = {r}"));
        }
    }
    Ok(())
}

/// `∂ₓw(b₂, a₁) > 0` for `0 ≤ a₁ ≤ b₂` with `b₂ > a`.
pub fn band_positivity(m: &Model, a1: f64, b2: f64) -> Check {
    assert!(0.0 <= a1 && a1 <= b2 && b2 > m.a());
    let v = m.w_x(b2, a1, Side::Right);
    if !(v > 0.0) {
        return fail(format!("w_x({b2}, {a1}) = {v}"));
    }
    Ok(())
}

/// For a band with `a₁ = a`: `β* ∈ (−1, 0)` and
/// `S(β*) = (1+β*)V′(a+) − (1−β*) = 0`.
pub fn beta_star_root(m: &Model, spec: &BandSpec<f64>) -> Check {
    if spec.a1 != Level::A {
        return fail(format!("a1 = {} is not the skew level", spec.a1));
    }
    let vf = band_value_function(m, spec).map_err(|e| e.to_string())?;
    let slope = vf.first(m.a(), Side::Right);
    let bs = beta_star_from_slope(slope).map_err(|e| e.to_string())?;
    if !(bs > -1.0 && bs < 0.0) {
        return fail(format!("beta* = {bs}"));
    }
    let s = (1.0 + bs) * slope - (1.0 - bs);
    if !(s.abs() <= 1e-10 * slope) {
        return fail(format!("S(beta*) = {s:e} with V'(a+) = {slope}"));
    }
    Ok(())
}

/// Range, monotonicity in the start point, the split of the exit transform
/// into its two exits, and the martingale identity
/// `gᵢ(x) = gᵢ(y)·down + gᵢ(z)·up`, for starts `x1 < x2` inside `[y, z]`.
pub fn exit_transforms(m: &Model, y: f64, x1: f64, x2: f64, z: f64) -> Check {
    assert!(y <= x1 && x1 < x2 && x2 <= z);
    let q = |x| ExitQuery::new(x, y, z).map_err(|e| e.to_string());
    let (q1, q2) = (q(x1)?, q(x2)?);
    let eval = |q: &ExitQuery<f64>| -> std::result::Result<[f64; 3], String> {
        let e = |r: crate::Result<f64>| r.map_err(|e| e.to_string());
        Ok([
            e(upcross_before_down(m, q))?,
            e(downcross_before_up(m, q))?,
            e(exit_interval_transform(m, q))?,
        ])
    };
    let (t1, t2) = (eval(&q1)?, eval(&q2)?);
    for (x, [up, down, both]) in [(x1, t1), (x2, t2)] {
        if [up, down, both].iter().any(|v| !(0.0..=1.0).contains(v)) {
            return fail(format!("x = {x}: transforms {up}, {down}, {both} outside [0, 1]"));
        }
        if !((up + down - both).abs() <= 1e-12) {
            return fail(format!("x = {x}: up + down = {} but exit = {both}", up + down));
        }
        for which in [Fundamental::G1, Fundamental::G2] {
            let g = |v| m.g(which, 0, v, Side::Left);
            let lhs = g(x);
            let rhs = g(y) * down + g(z) * up;
            if !rel_close(lhs, rhs, g(y).abs().max(g(z).abs()), 1e-10) {
                return fail(format!("x = {x}: {which:?}(x) = {lhs} but decomposition gives {rhs}"));
            }
        }
    }
    if !(t1[0] <= t2[0] && t1[1] >= t2[1]) {
        return fail(format!(
            "not monotone: up {} -> {}, down {} -> {} for x {x1} -> {x2}",
            t1[0], t2[0], t1[1], t2[1]
        ));
    }
    Ok(())
}
