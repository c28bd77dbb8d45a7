//! Laplace transforms of first-passage and two-sided exit times.

use serde::{Deserialize, Serialize};

use crate::expsum::ExpSum;
use crate::model::{Fundamental, Side, SkewModel};
use crate::{Error, Result, Scalar};

/// Start `x` inside the interval `[y, z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitQuery<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Scalar> ExitQuery<T> {
    pub fn new(x: T, y: T, z: T) -> Result<Self> {
        let q = Self { x, y, z };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.y < self.z && self.y <= self.x && self.x <= self.z;
        if !ok || !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) {
            return Err(Error::OrderingViolation(format!(
                "need y < z and y <= x <= z, got y = {}, x = {}, z = {}",
                self.y, self.x, self.z
            )));
        }
        Ok(())
    }
}

fn w0<T: Scalar>(m: &SkewModel<T>, x: T, y: T) -> ExpSum<T> {
    m.w_terms(0, x, Side::Left, 0, y, Side::Left)
}

/// `E_x[e^{−qτ_z}; τ_z < τ_y]`.
pub fn upcross_before_down<T: Scalar>(m: &SkewModel<T>, q: &ExitQuery<T>) -> Result<T> {
    q.validate()?;
    Ok(ExpSum::ratio(&w0(m, q.x, q.y), &w0(m, q.z, q.y)))
}

/// `E_x[e^{−qτ_y}; τ_y < τ_z]`.
pub fn downcross_before_up<T: Scalar>(m: &SkewModel<T>, q: &ExitQuery<T>) -> Result<T> {
    q.validate()?;
    Ok(ExpSum::ratio(&w0(m, q.x, q.z), &w0(m, q.y, q.z)))
}

/// `E_x[e^{−qτ_{y,z}}]` for the first exit from `(y, z)`.
pub fn exit_interval_transform<T: Scalar>(m: &SkewModel<T>, q: &ExitQuery<T>) -> Result<T> {
    q.validate()?;
    let num = w0(m, q.x, q.y).difference(&w0(m, q.x, q.z));
    Ok(ExpSum::ratio(&num, &w0(m, q.z, q.y)))
}

/// `E_x[e^{−qτ_r}]` for `x ≥ r`.
pub fn one_sided_down<T: Scalar>(m: &SkewModel<T>, x: T, r: T) -> Result<T> {
    if !(x >= r) {
        return Err(Error::OrderingViolation(format!(
            "downward passage needs x >= r, got x = {x}, r = {r}"
        )));
    }
    let num = m.g_terms(Fundamental::G1, 0, x, Side::Left);
    let den = m.g_terms(Fundamental::G1, 0, r, Side::Left);
    Ok(ExpSum::ratio(&num, &den))
}

/// `E_x[e^{−qτ_r}]` for `x ≤ r`.
pub fn one_sided_up<T: Scalar>(m: &SkewModel<T>, x: T, r: T) -> Result<T> {
    if !(x <= r) {
        return Err(Error::OrderingViolation(format!(
            "upward passage needs x <= r, got x = {x}, r = {r}"
        )));
    }
    let num = m.g_terms(Fundamental::G2, 0, x, Side::Left);
    let den = m.g_terms(Fundamental::G2, 0, r, Side::Left);
    Ok(ExpSum::ratio(&num, &den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use approx::assert_relative_eq;

    fn model(beta: f64, mm: f64, mp: f64, a: f64, q: f64) -> SkewModel<f64> {
        SkewModel::new(ModelParams::new(beta, mm, mp, a, q).unwrap()).unwrap()
    }

    #[test]
    fn boundary_values() {
        let m = model(-0.5, 1.0, -1.0, 1.0, 0.2);
        let at_z = ExitQuery::new(2.0, 0.0, 2.0).unwrap();
        let at_y = ExitQuery::new(0.0, 0.0, 2.0).unwrap();
        assert_relative_eq!(upcross_before_down(&m, &at_z).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(upcross_before_down(&m, &at_y).unwrap(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(downcross_before_up(&m, &at_y).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(downcross_before_up(&m, &at_z).unwrap(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(exit_interval_transform(&m, &at_y).unwrap(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(exit_interval_transform(&m, &at_z).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ordering_rejected() {
        assert!(ExitQuery::new(1.0, 1.0, 1.0).is_err());
        assert!(ExitQuery::new(3.0, 0.0, 2.0).is_err());
        let m = model(0.0, 0.0, 0.0, 1.0, 0.5);
        assert!(one_sided_down(&m, 0.0, 1.0).is_err());
        assert!(one_sided_up(&m, 2.0, 1.0).is_err());
    }

    #[test]
    fn brownian_one_sided() {
        let m = model(0.0, 0.0, 0.0, 1.0, 0.5);
        assert_relative_eq!(one_sided_up(&m, 0.5, 1.5).unwrap(), (-1.0_f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(one_sided_down(&m, 2.0, 1.0).unwrap(), (-1.0_f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn interval_is_sum_of_sides() {
        let m = model(0.35, -2.0, 1.5, 1.0, 0.15);
        let q = ExitQuery::new(0.8, 0.1, 2.4).unwrap();
        let s = upcross_before_down(&m, &q).unwrap() + downcross_before_up(&m, &q).unwrap();
        assert_relative_eq!(exit_interval_transform(&m, &q).unwrap(), s, max_relative = 1e-13);
    }

    #[test]
    fn far_levels_do_not_overflow() {
        let m = model(0.2, 0.5, 0.5, 1.0, 0.1);
        let r2 = m.roots.rho2_plus;
        let q = ExitQuery::new(400.0 / r2, 1.0, 500.0 / r2).unwrap();
        let v = upcross_before_down(&m, &q).unwrap();
        assert!(v.is_finite() && v > 0.0 && v < 1.0, "{v}");
        let d = one_sided_down(&m, 500.0 / r2, 0.5).unwrap();
        assert!((0.0..1.0).contains(&d));
    }
}
