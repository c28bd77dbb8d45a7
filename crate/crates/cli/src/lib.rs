//! Command-line front end: argument parsing, output rows, CSV and JSON
//! formatting. `main.rs` only forwards to [`run`].

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use skewdiv::band::{anchor_b1, solve_band};
use skewdiv::classify::{describe, verify_strategy};
use skewdiv::exit::{downcross_before_up, exit_interval_transform, one_sided_down, one_sided_up, upcross_before_down};
use skewdiv::sim::{estimate_exit_transform, estimate_strategy_value, realized_strategy};
use skewdiv::{
    classify, reproduce_table, BandSpec, BarrierKind, ClassifiedResult, Error, ExitQuery, ExitTarget, HjbReport,
    LatticeConfig, Level, Model, Params, SimEstimate, Strategy, StrategyKind, TableConfig, TableRow,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_UNCLASSIFIED: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "skewdiv",
    version,
    about = "Optimal dividend strategies for skew Brownian motion with two-valued drift"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the optimal strategy for one parameter set (JSON).
    Classify {
        #[command(flatten)]
        params: ParamArgs,
        /// Also report the optimal value at this surplus.
        #[arg(long)]
        x0: Option<f64>,
    },
    /// Classify every cell of a table config (CSV).
    Table {
        /// JSON file with `a`, `q` and `blocks` of `beta`, `mu_minus`, `mu_plus`.
        config: PathBuf,
    },
    /// Sample `x, V(x), V'(x)` for a strategy (CSV).
    Value {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 5.0)]
        to: f64,
        /// Number of sample points.
        #[arg(long, default_value_t = 101)]
        points: usize,
    },
    /// Monte Carlo estimate of a strategy value or exit transform (JSON).
    Simulate {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[arg(long, value_enum, default_value_t = Quantity::Value)]
        quantity: Quantity,
        /// Starting surplus.
        #[arg(long)]
        x0: f64,
        /// Lower level for two-sided exits.
        #[arg(long)]
        y: Option<f64>,
        /// Upper level for two-sided exits.
        #[arg(long)]
        z: Option<f64>,
        /// Target level for one-sided passages.
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, default_value_t = 0.005)]
        dx: f64,
        #[arg(long, default_value_t = 200_000)]
        paths: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Horizon in model time (default 25/q).
        #[arg(long)]
        t_max: Option<f64>,
    },
    /// Run the HJB verifier on a strategy (JSON); exit 3 if it fails.
    Verify {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
    },
}

#[derive(Debug, Clone, Copy, Args)]
pub struct ParamArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub mu_minus: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub mu_plus: f64,
    #[arg(long)]
    pub a: f64,
    #[arg(long)]
    pub q: f64,
}

impl ParamArgs {
    pub fn params(&self) -> skewdiv::Result<Params> {
        Params::new(self.beta, self.mu_minus, self.mu_plus, self.a, self.q)
    }
}

#[derive(Debug, Clone, Args)]
pub struct StrategyArgs {
    /// One of 0, b-, a-, a+, b+, band; the classified optimum if omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub strategy: Option<String>,
    /// Barrier level overriding the one implied by the tag.
    #[arg(long, allow_hyphen_values = true)]
    pub level: Option<String>,
    /// Band levels; any omitted ones come from the band solver.
    #[arg(long, allow_hyphen_values = true)]
    pub b1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub a1: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub b2: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Quantity {
    Value,
    Up,
    Down,
    Interval,
    OneSidedDown,
    OneSidedUp,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Model(#[from] Error),
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("verification failed: {failed:?}")]
    VerificationFailed {
        failed: Vec<skewdiv::Inequality>,
        /// The full report, still printed to stdout.
        report: String,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Model(Error::Unclassified(_)) => EXIT_UNCLASSIFIED,
            CliError::VerificationFailed { .. } => EXIT_VERIFY_FAILED,
            _ => EXIT_INPUT,
        }
    }
}

/// One classified parameter set, as printed by `classify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputRow {
    pub beta: f64,
    pub mu_minus: f64,
    pub mu_plus: f64,
    pub a: f64,
    pub q: f64,
    /// One of `0`, `b-`, `a-`, `a+`, `b+`, `band`.
    pub strategy: StrategyKind,
    /// Barrier level, for barrier strategies.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<Level<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b1: Option<Level<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a1: Option<Level<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub b2: Option<Level<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    pub verified: bool,
    /// Other candidates that also pass the verifier.
    pub alternatives: Vec<String>,
    pub b_minus: f64,
    pub k_beta: f64,
    pub b_plus: Option<f64>,
}

impl OutputRow {
    pub fn from_result(r: &ClassifiedResult, x0: Option<f64>) -> Self {
        let p = r.params;
        let (level, b1, a1, b2) = match r.strategy {
            Strategy::Barrier { level } => (Some(level), None, None, None),
            Strategy::Band { spec } => (None, Some(spec.b1), Some(spec.a1), Some(spec.b2)),
        };
        Self {
            beta: p.beta,
            mu_minus: p.mu_minus,
            mu_plus: p.mu_plus,
            a: p.a,
            q: p.q,
            strategy: r.kind,
            level,
            b1,
            a1,
            b2,
            x0,
            value: x0.map(|x| r.value_function().value(x)),
            verified: r.hjb.passed(),
            alternatives: r.alternatives().map(|c| describe(&c.strategy)).collect(),
            b_minus: r.b_minus,
            k_beta: r.k_beta,
            b_plus: r.b_plus,
        }
    }
}

/// `%g`-style: 6 significant digits, trailing zeros dropped.
pub fn fmt_g(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    let s = if (-5..6).contains(&exp) {
        format!("{:.*}", (5 - exp).max(0) as usize, v)
    } else {
        format!("{:.5e}", v)
    };
    trim_zeros(&s)
}

fn trim_zeros(s: &str) -> String {
    let (mant, exp) = match s.find('e') {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    };
    let mant = if mant.contains('.') {
        mant.trim_end_matches('0').trim_end_matches('.')
    } else {
        mant
    };
    let mant = if mant == "-0" { "0" } else { mant };
    format!("{mant}{exp}")
}

pub fn fmt_level(l: &Level<f64>) -> String {
    match l {
        Level::At(v) => fmt_g(*v),
        other => other.to_string(),
    }
}

pub const TABLE_HEADER: [&str; 9] = [
    "beta", "mu_minus", "mu_plus", "strategy", "b1", "a1", "b2", "level", "verified",
];

/// CSV fields of one table row. Unclassified cells get strategy `-`.
pub fn table_fields(row: &TableRow) -> [String; 9] {
    let dash = || "-".to_string();
    let (strategy, b1, a1, b2, level, verified) = match &row.result {
        Ok(r) => {
            let v = r.hjb.passed().to_string();
            match r.strategy {
                Strategy::Barrier { level } => (r.kind.tag().to_string(), dash(), dash(), dash(), fmt_level(&level), v),
                Strategy::Band { spec } => (
                    "band".to_string(),
                    fmt_level(&spec.b1),
                    fmt_level(&spec.a1),
                    fmt_level(&spec.b2),
                    dash(),
                    v,
                ),
            }
        }
        Err(_) => (dash(), dash(), dash(), dash(), dash(), "false".to_string()),
    };
    [
        fmt_g(row.beta),
        fmt_g(row.mu_minus),
        fmt_g(row.mu_plus),
        strategy,
        b1,
        a1,
        b2,
        level,
        verified,
    ]
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(TABLE_HEADER).expect("in-memory write");
    for r in rows {
        w.write_record(table_fields(r)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

pub fn load_table_config(path: &PathBuf) -> Result<TableConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    let cfg: TableConfig = serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.clone(),
        source,
    })?;
    Params::new(0.0, 0.0, 0.0, cfg.a, cfg.q)?;
    Ok(cfg)
}

fn parse_level(name: &str, s: &Option<String>) -> Result<Option<Level<f64>>, CliError> {
    s.as_deref()
        .map(|t| {
            t.parse::<Level<f64>>()
                .map_err(|e| CliError::Usage(format!("--{name}: {e}")))
        })
        .transpose()
}

/// The strategy selected by the flags, or the classified optimum.
pub fn resolve_strategy(params: &Params, args: &StrategyArgs) -> Result<Strategy, CliError> {
    let m = Model::new(*params)?;
    let Some(tag) = args.strategy.as_deref() else {
        if args.level.is_some() || args.b1.is_some() || args.a1.is_some() || args.b2.is_some() {
            return Err(CliError::Usage("levels given without --strategy".into()));
        }
        return Ok(classify(params)?.strategy);
    };
    let kind = StrategyKind::from_tag(tag).ok_or_else(|| {
        CliError::Usage(format!(
            "--strategy must be one of 0, b-, a-, a+, b+, band; got {tag:?}"
        ))
    })?;
    if kind == StrategyKind::Band {
        if args.level.is_some() {
            return Err(CliError::Usage(
                "--level applies to barriers; use --b1/--a1/--b2".into(),
            ));
        }
        let (b1, a1, b2) = (
            parse_level("b1", &args.b1)?,
            parse_level("a1", &args.a1)?,
            parse_level("b2", &args.b2)?,
        );
        let spec = match (b1, a1, b2) {
            (Some(b1), Some(a1), Some(b2)) => BandSpec::new(b1, a1, b2),
            (b1, None, None) => solve_band(&m, b1.unwrap_or_else(|| anchor_b1(&m)))?.spec,
            _ => return Err(CliError::Usage("give all of --b1 --a1 --b2, or only --b1".into())),
        };
        spec.validate(&m)?;
        return Ok(Strategy::Band { spec });
    }
    if args.b1.is_some() || args.a1.is_some() || args.b2.is_some() {
        return Err(CliError::Usage("--b1/--a1/--b2 apply to bands".into()));
    }
    let level = match parse_level("level", &args.level)? {
        Some(l) => l,
        None => {
            let bk = match kind {
                StrategyKind::Zero => BarrierKind::Zero,
                StrategyKind::BMinus => BarrierKind::BMinus,
                StrategyKind::AMinus => BarrierKind::AMinus,
                StrategyKind::APlus => BarrierKind::APlus,
                StrategyKind::BPlus => BarrierKind::BPlus,
                StrategyKind::Band => unreachable!(),
            };
            bk.level(&m)
                .ok_or_else(|| CliError::Usage(format!("no {tag} level exists for these parameters; pass --level")))?
        }
    };
    Ok(Strategy::Barrier { level })
}

/// Report printed by `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub estimate: SimEstimate,
    /// Closed form of the simulated quantity; for strategies it is taken
    /// at the lattice-realized levels.
    pub closed_form: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub realized_strategy: Option<Strategy>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub strategy: Strategy,
    pub hjb: HjbReport,
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable output") + "\n"
}

/// Runs one command; returns the text for stdout.
pub fn execute(cmd: &Command) -> Result<String, CliError> {
    match cmd {
        Command::Classify { params, x0 } => {
            let p = params.params()?;
            if let Some(x) = x0 {
                if !(*x >= 0.0 && x.is_finite()) {
                    return Err(CliError::Usage(format!("--x0 = {x} must be a finite level >= 0")));
                }
            }
            let r = classify(&p)?;
            Ok(to_json(&OutputRow::from_result(&r, *x0)))
        }
        Command::Table { config } => {
            let cfg = load_table_config(config)?;
            Ok(table_csv(&reproduce_table(&cfg)))
        }
        Command::Value {
            params,
            strategy,
            from,
            to,
            points,
        } => {
            let p = params.params()?;
            if !(*from >= 0.0 && to >= from && from.is_finite() && to.is_finite()) || *points == 0 {
                return Err(CliError::Usage("need 0 <= --from <= --to and --points >= 1".into()));
            }
            let s = resolve_strategy(&p, strategy)?;
            let vf = s.value_function(&Model::new(p)?)?;
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_writer(Vec::new());
            w.write_record(["x", "value", "derivative"]).expect("in-memory write");
            for i in 0..*points {
                let x = if *points == 1 {
                    *from
                } else {
                    from + (to - from) * i as f64 / (*points - 1) as f64
                };
                let row = [fmt_g(x), fmt_g(vf.value(x)), fmt_g(vf.first(x, skewdiv::Side::Right))];
                w.write_record(row).expect("in-memory write");
            }
            Ok(String::from_utf8(w.into_inner().expect("flush")).expect("ascii"))
        }
        Command::Simulate {
            params,
            strategy,
            quantity,
            x0,
            y,
            z,
            r,
            dx,
            paths,
            seed,
            t_max,
        } => {
            let p = params.params()?;
            let m = Model::new(p)?;
            let mut cfg = LatticeConfig::new(*dx, *seed, *paths);
            cfg.t_max = *t_max;
            let need = |v: &Option<f64>, name: &str| {
                v.ok_or_else(|| CliError::Usage(format!("--{name} is required for this quantity")))
            };
            let report = if *quantity == Quantity::Value {
                let s = resolve_strategy(&p, strategy)?;
                let est = estimate_strategy_value(*x0, &s, &cfg, &p)?;
                let real = realized_strategy(&s, &cfg, &p)?;
                let closed = real.value_function(&m)?.value(*x0);
                SimulationReport {
                    estimate: est,
                    closed_form: closed,
                    strategy: Some(s),
                    realized_strategy: Some(real),
                }
            } else {
                let (target, closed) = match quantity {
                    Quantity::OneSidedDown | Quantity::OneSidedUp => {
                        let r = need(r, "r")?;
                        if *quantity == Quantity::OneSidedDown {
                            (ExitTarget::OneSidedDown { x: *x0, r }, one_sided_down(&m, *x0, r)?)
                        } else {
                            (ExitTarget::OneSidedUp { x: *x0, r }, one_sided_up(&m, *x0, r)?)
                        }
                    }
                    _ => {
                        let eq = ExitQuery::new(*x0, need(y, "y")?, need(z, "z")?)?;
                        match quantity {
                            Quantity::Up => (ExitTarget::Up(eq), upcross_before_down(&m, &eq)?),
                            Quantity::Down => (ExitTarget::Down(eq), downcross_before_up(&m, &eq)?),
                            _ => (ExitTarget::Interval(eq), exit_interval_transform(&m, &eq)?),
                        }
                    }
                };
                let est = estimate_exit_transform(&target, &cfg, &p)?;
                SimulationReport {
                    estimate: est,
                    closed_form: closed,
                    strategy: None,
                    realized_strategy: None,
                }
            };
            Ok(to_json(&report))
        }
        Command::Verify { params, strategy } => {
            let p = params.params()?;
            let s = resolve_strategy(&p, strategy)?;
            let vf = s.value_function(&Model::new(p)?)?;
            let hjb = verify_strategy(&vf)?;
            let failed = hjb.failed_inequalities();
            let report = to_json(&VerifyReport { strategy: s, hjb });
            if failed.is_empty() {
                Ok(report)
            } else {
                Err(CliError::VerificationFailed { failed, report })
            }
        }
    }
}

/// Caps the rayon pool at `SKEWDIV_THREADS` workers when set.
pub fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("SKEWDIV_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| CliError::Usage(format!("SKEWDIV_THREADS must be a positive integer, got {v:?}")))?;
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        let _ = writeln!(err, "error: {e}");
        return e.exit_code();
    }
    match execute(&cli.command) {
        Ok(text) => {
            let _ = out.write_all(text.as_bytes());
            EXIT_OK
        }
        Err(e) => {
            if let CliError::VerificationFailed { report, .. } = &e {
                let _ = out.write_all(report.as_bytes());
            }
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_format() {
        assert_eq!(fmt_g(2.19939123), "2.19939");
        assert_eq!(fmt_g(-0.9), "-0.9");
        assert_eq!(fmt_g(171.2), "171.2");
        assert_eq!(fmt_g(0.0), "0");
        assert_eq!(fmt_g(0.02498), "0.02498");
        assert_eq!(fmt_g(1234567.0), "1.23457e6");
        assert_eq!(fmt_g(1e-7), "1e-7");
        assert_eq!(fmt_g(0.0000012345678), "1.23457e-6");
    }
}
