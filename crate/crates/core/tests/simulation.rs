use skewdiv::exit::{one_sided_down, upcross_before_down};
use skewdiv::sim::{
    estimate_exit_transform, estimate_occupation_above, lattice_exit_transform, lattice_strategy_value,
    realized_strategy,
};
use skewdiv::{classify, ExitQuery, ExitTarget, LatticeConfig, Model, Params};

fn validation_sets() -> Vec<Params> {
    [
        (-0.5, 1.0, -1.0, 0.2),
        (-0.9, 0.0, 5.0, 0.1),
        (-0.3, -5.0, 5.0, 0.1),
        (0.3, -5.0, -8.0, 0.1),
        (0.9, 0.0, 10.0, 0.1),
    ]
    .iter()
    .map(|&(b, mm, mp, q)| Params::new(b, mm, mp, 1.0, q).unwrap())
    .collect()
}

/// Exact lattice expectation minus the closed form, for the three
/// validation quantities.
fn biases(p: &Params, dx: f64) -> [f64; 3] {
    let m = Model::new(*p).unwrap();
    let cfg = LatticeConfig::new(dx, 0, 1);
    let q = ExitQuery::new(1.3, 0.0, 2.0).unwrap();
    let up = lattice_exit_transform(&ExitTarget::Up(q), &cfg, p).unwrap() - upcross_before_down(&m, &q).unwrap();
    let down = lattice_exit_transform(&ExitTarget::OneSidedDown { x: 1.5, r: 0.5 }, &cfg, p).unwrap()
        - one_sided_down(&m, 1.5, 0.5).unwrap();
    let s = classify(p).unwrap().strategy;
    let closed = realized_strategy(&s, &cfg, p)
        .unwrap()
        .value_function(&m)
        .unwrap()
        .value(1.5);
    let value = lattice_strategy_value(1.5, &s, &cfg, p).unwrap() - closed;
    [up, down, value]
}

#[test]
fn lattice_bias_shrinks_with_step() {
    for p in validation_sets() {
        let (coarse, fine) = (biases(&p, 1.0 / 100.0), biases(&p, 1.0 / 200.0));
        for (i, (c, f)) in coarse.iter().zip(fine).enumerate() {
            assert!(
                f.abs() < c.abs() || f.abs() < 1e-12,
                "{p:?} quantity {i}: bias {c:e} at dx, {f:e} at dx/2"
            );
        }
    }
}

#[test]
fn estimates_do_not_depend_on_thread_count() {
    let p = validation_sets()[1];
    let cfg = LatticeConfig::new(0.02, 7, 20_000);
    let t = ExitTarget::Up(ExitQuery::new(1.3, 0.0, 2.0).unwrap());
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| estimate_exit_transform(&t, &cfg, &p).unwrap())
    };
    let (one, four) = (run(1), run(4));
    assert_eq!(one.mean.to_bits(), four.mean.to_bits());
    assert_eq!(one.std_error.to_bits(), four.std_error.to_bits());
}

#[test]
fn strong_positive_skew_keeps_walk_above_skew_level() {
    let p = Params::new(0.9, 0.0, 0.0, 1.0, 0.1).unwrap();
    let cfg = LatticeConfig::new(0.05, 11, 2_000);
    let e = estimate_occupation_above(1.0, 20.0, &cfg, &p).unwrap();
    assert!(e.mean > 0.9, "{e:?}");
}
