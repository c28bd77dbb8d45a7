use std::io::Write;
use std::process::{Command, Output};

use proptest::prelude::*;
use skewdiv::{Level, StrategyKind};
use skewdiv_cli::OutputRow;

fn skewdiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skewdiv")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const CELL: [&str; 10] = [
    "--beta",
    "-0.9",
    "--mu-minus",
    "0",
    "--mu-plus",
    "5",
    "--a",
    "1",
    "--q",
    "0.1",
];

fn with_cell(cmd: &str, extra: &[&str]) -> Vec<String> {
    std::iter::once(cmd)
        .chain(CELL)
        .chain(extra.iter().copied())
        .map(String::from)
        .collect()
}

fn run(cmd: &str, extra: &[&str]) -> Output {
    let args = with_cell(cmd, extra);
    skewdiv(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn missing_discount_is_an_input_error() {
    let o = skewdiv(&[
        "classify",
        "--beta",
        "0",
        "--mu-minus",
        "0",
        "--mu-plus",
        "0",
        "--a",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn skewness_out_of_range_is_an_input_error() {
    let o = skewdiv(&[
        "classify",
        "--beta",
        "1.5",
        "--mu-minus",
        "0",
        "--mu-plus",
        "0",
        "--a",
        "1",
        "--q",
        "0.1",
    ]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("beta") && err.contains("1.5"), "{err}");
}

#[test]
fn classify_reports_upper_barrier() {
    let o = run("classify", &["--x0", "1.5"]);
    assert_eq!(o.status.code(), Some(0));
    let row: OutputRow = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(row.strategy, StrategyKind::BPlus);
    let Some(Level::At(b)) = row.level else {
        panic!("{row:?}")
    };
    assert!((b - 2.199).abs() < 5e-4);
    assert!(row.verified);
}

#[test]
fn empty_grid_gives_header_only() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write!(f, r#"{{"a": 1.0, "q": 0.1, "blocks": []}}"#).unwrap();
    let o = skewdiv(&["table", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "beta,mu_minus,mu_plus,strategy,b1,a1,b2,level,verified\n");
}

#[test]
fn zero_barrier_value_is_identity() {
    let o = run(
        "value",
        &["--strategy", "0", "--from", "0", "--to", "4", "--points", "9"],
    );
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut rows = csv::Reader::from_reader(text.as_bytes());
    let mut n = 0;
    for r in rows.records() {
        let r = r.unwrap();
        let (x, v): (f64, f64) = (r[0].parse().unwrap(), r[1].parse().unwrap());
        assert!((x - v).abs() < 1e-12, "{x} {v}");
        n += 1;
    }
    assert_eq!(n, 9);
}

#[test]
fn simulate_is_reproducible() {
    let args = ["--x0", "1.5", "--dx", "0.02", "--paths", "5000", "--seed", "9"];
    let (a, b) = (run("simulate", &args), run("simulate", &args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_accepts_optimum_and_flags_perturbed_barrier() {
    assert_eq!(run("verify", &[]).status.code(), Some(0));
    let o = run("verify", &["--strategy", "b+", "--level", "2.699"]);
    assert_eq!(o.status.code(), Some(3));
    let out = stdout(&o);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(
        out.contains("marginal_value") || err.contains("MarginalValue"),
        "{out}\n{err}"
    );
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["hjb"]["marginal_value"], serde_json::Value::Bool(false));
}

#[test]
fn unknown_strategy_tag_is_an_input_error() {
    assert_eq!(run("verify", &["--strategy", "c"]).status.code(), Some(1));
}

#[test]
fn table_output_uses_plain_decimals() {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    write!(
        f,
        r#"{{"a": 1, "q": 0.1, "blocks": [{{"beta": -0.9, "mu_minus": [0, -5], "mu_plus": [1, 5]}}]}}"#
    )
    .unwrap();
    let o = skewdiv(&["table", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 5);
    for field in text.lines().skip(1).flat_map(|l| l.split(',')) {
        assert!(
            field.chars().all(|c| c.is_ascii_digit() || ".-+abe".contains(c))
                || ["band", "true", "false"].contains(&field),
            "unexpected field {field:?}"
        );
    }
}

fn level() -> impl Strategy<Value = Level<f64>> {
    prop_oneof![
        (0.0..10.0f64).prop_map(Level::At),
        Just(Level::AMinus),
        Just(Level::A),
        Just(Level::APlus)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn output_rows_round_trip(
        beta in -0.99..0.99f64,
        mm in -50.0..50.0f64,
        mp in -50.0..50.0f64,
        kind in prop::sample::select(vec![StrategyKind::Zero, StrategyKind::BMinus, StrategyKind::AMinus, StrategyKind::APlus, StrategyKind::BPlus, StrategyKind::Band]),
        levels in (level(), level(), level(), level()),
        x0 in prop::option::of(0.0..10.0f64),
        b_plus in prop::option::of(-5.0..5.0f64),
    ) {
        let band = kind == StrategyKind::Band;
        let row = OutputRow {
            beta, mu_minus: mm, mu_plus: mp, a: 1.0, q: 0.1, strategy: kind,
            level: (!band).then_some(levels.0),
            b1: band.then_some(levels.1),
            a1: band.then_some(levels.2),
            b2: band.then_some(levels.3),
            x0,
            value: x0.map(|x| x + 1.0),
            verified: true,
            alternatives: vec!["barrier a+".into()],
            b_minus: mm / 10.0,
            k_beta: 1.0 + beta,
            b_plus,
        };
        let text = serde_json::to_string(&row).unwrap();
        let back: OutputRow = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, row);
    }
}
