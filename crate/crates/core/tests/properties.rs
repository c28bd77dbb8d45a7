use proptest::prelude::*;
use skewdiv::band::{anchor_b1, solve_band_shapes};
use skewdiv::checks;
use skewdiv::hjb::verify_hjb;
use skewdiv::{BandShape, BarrierKind, GridSpec, KinkSet, Level, Model, Params};

fn params() -> impl Strategy<Value = Params> {
    (-0.95..0.95f64, -8.0..8.0f64, -8.0..8.0f64, 0.2..3.0f64, 0.02..1.0f64)
        .prop_map(|(beta, mm, mp, a, q)| Params::new(beta, mm, mp, a, q).unwrap())
}

/// Parameters where bands with `a₁ = a` are common.
fn band_params() -> impl Strategy<Value = Params> {
    (-0.95..-0.05f64, -8.0..0.5f64, 0.0..8.0f64, 0.5..2.0f64, 0.05..0.5f64)
        .prop_map(|(beta, mm, mp, a, q)| Params::new(beta, mm, mp, a, q).unwrap())
}

fn model(p: Params) -> Model {
    Model::new(p).unwrap()
}

fn check(r: checks::Check) -> Result<(), TestCaseError> {
    r.map_err(TestCaseError::fail)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn coefficients_and_pasting(p in params()) {
        let m = model(p);
        check(checks::coefficient_bounds(&m))?;
        check(checks::pasting(&m))?;
    }

    #[test]
    fn fundamental_solutions_solve_the_ode(p in params(), u in prop::collection::vec(0.0..1.0f64, 100)) {
        let m = model(p);
        let xs: Vec<f64> = u.iter().map(|t| t * (p.a + 5.0)).collect();
        check(checks::ode_residuals(&m, &xs))?;
    }

    #[test]
    fn scale_derivatives_match_differences(p in params(), u in prop::collection::vec(0.0..1.0f64, 20)) {
        let m = model(p);
        let xs: Vec<f64> = u.iter().map(|t| t * (p.a + 3.0)).collect();
        check(checks::scale_derivatives(&m, &xs))?;
    }

    #[test]
    fn scale_is_increasing(p in params()) {
        check(checks::scale_increasing(&model(p), p.a + 5.0, 500))?;
    }

    #[test]
    fn scale_convexity_follows_critical_levels(p in params()) {
        check(checks::convexity_taxonomy(&model(p), 400))?;
    }

    #[test]
    fn critical_level_signs(p in params()) {
        check(checks::sign_equivalences(&model(p)))?;
    }

    #[test]
    fn scale_slope_monotone_in_skewness(
        p in params(),
        b in (-0.95..0.95f64, -0.95..0.95f64).prop_filter("distinct", |(x, y)| (x - y).abs() > 1e-3),
        u in prop::collection::vec(0.0..1.0f64, 20),
    ) {
        let (b1, b2) = if b.0 < b.1 { b } else { (b.1, b.0) };
        let xs: Vec<f64> = u.iter().map(|t| t * p.a).collect();
        check(checks::beta_monotonicity(&p, b1, b2, &xs))?;
    }

    #[test]
    fn band_slope_positive(p in params(), s in 0.0..1.0f64, t in 0.001..5.0f64) {
        let b2 = p.a + t;
        check(checks::band_positivity(&model(p), s * b2, b2))?;
    }

    #[test]
    fn skew_level_bands_have_beta_star(p in band_params()) {
        let m = model(p);
        for r in solve_band_shapes(&m, anchor_b1(&m)).unwrap() {
            if r.shape == BandShape::SkewLevel {
                check(checks::beta_star_root(&m, &r.spec))?;
            }
        }
    }

    #[test]
    fn exit_transform_identities(p in params(), y in 0.0..3.0f64, w in 0.01..4.0f64, s in 0.0..1.0f64, t in 0.0..1.0f64) {
        let z = y + w;
        let (lo, hi) = if s < t { (s, t) } else { (t, s) };
        prop_assume!(hi - lo > 1e-9);
        check(checks::exit_transforms(&model(p), y, y + lo * w, y + hi * w, z))?;
    }

    #[test]
    fn looser_tolerance_never_fails_more(p in params(), k in 0usize..5) {
        let m = model(p);
        let kind = BarrierKind::ALL[k];
        prop_assume!(kind.level(&m).is_some());
        let vf = skewdiv::barrier::barrier_value_function(&m, kind.level(&m).unwrap()).unwrap();
        let kinks = KinkSet::of(&vf);
        let grid = GridSpec::default_for(&vf);
        let tight = verify_hjb(&vf, &kinks, grid, 1e-9).unwrap();
        let loose = verify_hjb(&vf, &kinks, grid, 1e-5).unwrap();
        prop_assert!(!tight.passed() || loose.passed());
        for i in loose.failed_inequalities() {
            prop_assert!(tight.failed_inequalities().contains(&i));
        }
    }
}

#[test]
fn skew_level_table_cell_has_beta_star() {
    let m = model(Params::new(-0.9, -5.0, 1.0, 1.0, 0.1).unwrap());
    let shapes = solve_band_shapes(&m, anchor_b1(&m)).unwrap();
    let skew = shapes.iter().find(|r| r.shape == BandShape::SkewLevel).unwrap();
    assert_eq!(skew.spec.a1, Level::A);
    checks::beta_star_root(&m, &skew.spec).unwrap();
}
