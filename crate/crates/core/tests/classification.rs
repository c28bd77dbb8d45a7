use skewdiv::{classify, BandSpec, Level, Model, Params, Strategy, StrategyKind};

fn params(beta: f64, mm: f64, mp: f64) -> Params {
    Params::new(beta, mm, mp, 1.0, 0.1).unwrap()
}

#[test]
fn identical_params_classify_identically() {
    for (b, mm, mp) in [(-0.9, 0.0, 5.0), (-0.3, 0.0, 0.3), (0.3, 7.0, -5.0), (0.9, 2.0, 9.0)] {
        let p = params(b, mm, mp);
        let (r1, r2) = (classify(&p).unwrap(), classify(&p).unwrap());
        assert_eq!(serde_json::to_string(&r1).unwrap(), serde_json::to_string(&r2).unwrap());
    }
}

#[derive(Debug, PartialEq, Clone, Copy)]
enum Phase {
    BelowA,
    Band,
    AboveA,
}

#[test]
fn strategy_moves_from_low_barrier_through_band_to_upper_barrier() {
    let mut phases: Vec<Phase> = Vec::new();
    for i in 0..=60 {
        let mp = -1.0 + 0.05 * i as f64;
        let r = classify(&params(-0.3, 0.0, mp)).unwrap();
        let phase = match r.kind {
            StrategyKind::Zero | StrategyKind::BMinus | StrategyKind::AMinus => Phase::BelowA,
            StrategyKind::Band => Phase::Band,
            StrategyKind::APlus | StrategyKind::BPlus => Phase::AboveA,
        };
        if phases.last() != Some(&phase) {
            phases.push(phase);
        }
    }
    assert_eq!(phases, [Phase::BelowA, Phase::Band, Phase::AboveA]);
}

#[test]
fn upper_barrier_falls_as_upper_drift_grows() {
    let mut prev = f64::INFINITY;
    for mp in [10.0, 20.0, 40.0, 80.0, 171.2] {
        let r = classify(&params(-0.3, 0.0, mp)).unwrap();
        assert_eq!(r.kind, StrategyKind::BPlus);
        let Strategy::Barrier { level: Level::At(b) } = r.strategy else {
            panic!("{:?}", r.strategy)
        };
        assert!(b < prev, "b+ = {b} at mu+ = {mp}, previous {prev}");
        prev = b;
    }
}

#[test]
fn band_from_zero_equals_barrier() {
    let m = Model::new(params(-0.9, 0.0, 5.0)).unwrap();
    let b2 = 2.198635672642482;
    let band = Strategy::Band {
        spec: BandSpec::new(Level::At(0.0), Level::At(0.0), Level::At(b2)),
    };
    let barrier = Strategy::Barrier { level: Level::At(b2) };
    let (v1, v2) = (band.value_function(&m).unwrap(), barrier.value_function(&m).unwrap());
    for i in 0..=400 {
        let x = i as f64 * 0.01;
        let (a, b) = (v1.value(x), v2.value(x));
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "x = {x}: {a} vs {b}");
    }
}
