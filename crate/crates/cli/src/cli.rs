//! Command-line parsing and the commands themselves.
//!
//! Every command produces a [`Report`]; exit status is 0 when all assertions
//! pass, 1 when one fails, 2 when the input cannot be used.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use subrand_core::diagonal::{build_xi, verify_trace, Battery};
use subrand_core::kraft_chaitin::{
    build_machine_from_test, kc_assign, replay_mismatches, stratum_clock, KcError, KcResult, RequestSet,
};
use subrand_core::machines::{kolmogorov_margin, rb_set, verify_measure_computable, MachineTable, Time};
use subrand_core::martingales::{fairness_violation, success_report, Martingale};
use subrand_core::ml_tests::{martingale_to_test, test_to_martingale, verify_family, ConversionError, ToTestError};
use subrand_core::{BitString, Dyadic};

use crate::formats::{
    self, BatterySpec, BuiltMartingale, EntrySpec, FamilySpec, FormatError, MartingaleSpec, OrderOut, OrderSpec,
    RequestSpec, SequenceSpec, TraceSpec,
};
use crate::report::{Report, Table};
use crate::suite;

#[derive(Debug, Parser)]
#[command(name = "subrand", version, about = "Exact martingales, tests, machines and diagonal sequences")]
pub struct Cli {
    /// Seed for the randomized suites; recorded in every report.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Depth bound; each command documents its default.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub depth: Option<u64>,
    /// Length bound for sequences and traces; each command documents its default.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub horizon: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    /// Only for commands with per-index output.
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check d(x0) + d(x1) = 2d(x) below `--depth` (default 12).
    FairnessCheck {
        #[arg(long)]
        martingale: PathBuf,
    },
    /// Prefix-free codes from length requests.
    #[command(subcommand)]
    Kc(KcCommand),
    /// Between staged tests and martingales.
    #[command(subcommand)]
    Convert(ConvertCommand),
    /// Queries on a prefix-free machine table.
    #[command(subcommand)]
    Machine(MachineCommand),
    /// Build the diagonal sequence against a battery up to `--horizon` (default 256).
    Diagonalize {
        #[arg(long)]
        battery: PathBuf,
    },
    /// Run a battery against sequence sources.
    #[command(subcommand)]
    Battery(BatteryCommand),
    /// Check a staged test or a diagonal trace.
    #[command(subcommand)]
    Verify(VerifyCommand),
    /// Run the randomized property suites from `--seed`.
    Suite {
        /// Run one suite only.
        #[arg(long)]
        name: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
pub enum KcCommand {
    /// Assign codewords to a request list, or to the requests of a test.
    Build {
        #[arg(long, conflicts_with = "family", required_unless_present = "family")]
        requests: Option<PathBuf>,
        #[arg(long)]
        family: Option<PathBuf>,
        /// Also write the machine table here.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum ConvertCommand {
    /// Build B, its approximations and its rounding; tabulated to `--depth` (default 6).
    TestToMart {
        #[arg(long)]
        family: PathBuf,
    },
    /// Collect the strings where d reaches 2^{n+g(|x|)}, up to `--horizon` (default 12).
    MartToTest {
        #[arg(long)]
        martingale: PathBuf,
        #[arg(long)]
        order: PathBuf,
        /// Enumeration cost f; defaults to j + 1.
        #[arg(long)]
        cost: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum MachineCommand {
    /// Ω and Ω_t; with `--control g`, check Ω − Ω_{g(i)} ≤ 2^-i for i ≤ `--depth` (default 8).
    Omega {
        #[arg(long)]
        machine: PathBuf,
        #[arg(long)]
        at: Option<u64>,
        #[arg(long)]
        control: Option<PathBuf>,
    },
    /// K(x), unbounded or at a stage.
    K {
        #[arg(long)]
        machine: PathBuf,
        #[arg(long)]
        x: String,
        #[arg(long)]
        at: Option<u64>,
    },
    /// Strings with K(x) ≤ |x| − b.
    Rb {
        #[arg(long)]
        machine: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        b: i64,
        #[arg(long, default_value_t = 10)]
        maxlen: usize,
        /// Also compute the staged set under this control.
        #[arg(long)]
        control: Option<PathBuf>,
    },
}

#[derive(Debug, Subcommand)]
pub enum BatteryCommand {
    /// Success of every battery entry against every source, to `--horizon` (default 64).
    Run {
        #[arg(long)]
        battery: PathBuf,
        /// A sequence descriptor or a list of them.
        #[arg(long)]
        sequence: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
pub enum VerifyCommand {
    /// Prefix-freeness, measure bounds and the control inequality.
    Family {
        #[arg(long)]
        family: PathBuf,
        /// Require μ(X_n) ≤ 2^-2n instead of 2^-n.
        #[arg(long)]
        strict: bool,
    },
    /// Replay a trace against its battery and check every bound.
    Trace {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long)]
        battery: PathBuf,
    },
}

/// Input that cannot be used; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct InputError(pub String);

impl From<FormatError> for InputError {
    fn from(e: FormatError) -> Self {
        InputError(e.to_string())
    }
}

fn input(e: impl std::fmt::Display) -> InputError {
    InputError(e.to_string())
}

/// The result of a command: a report and, for per-index commands, a table.
#[derive(Debug)]
pub struct Outcome {
    pub report: Report,
    pub table: Option<Table>,
}

impl From<Report> for Outcome {
    fn from(report: Report) -> Self {
        Self { report, table: None }
    }
}

/// Reads a JSON file, keeping the raw value for the report.
fn load<T: DeserializeOwned>(path: &Path) -> Result<(T, Value), InputError> {
    let raw: Value = formats::read_json(path)?;
    let parsed = serde_json::from_value(raw.clone())
        .map_err(|e| input(format!("`{}` does not match the expected schema: {e}", path.display())))?;
    Ok((parsed, raw))
}

fn load_machine(path: &Path) -> Result<(MachineTable, Value), InputError> {
    let (entries, raw): (Vec<EntrySpec>, Value) = load(path)?;
    Ok((formats::build_machine(&entries)?, raw))
}

fn load_order(path: &Path) -> Result<(subrand_core::OrderFn, Value), InputError> {
    let (spec, raw): (OrderSpec, Value) = load(path)?;
    Ok((spec.build()?, raw))
}

fn load_battery(path: &Path) -> Result<(Battery, Value), InputError> {
    let (spec, raw): (BatterySpec, Value) = load(path)?;
    Ok((spec.build()?, raw))
}

fn text(d: &Dyadic) -> String {
    d.to_string()
}

pub fn run(cli: &Cli) -> Result<Outcome, InputError> {
    let seed = cli.seed;
    match &cli.command {
        Command::FairnessCheck { martingale } => {
            let depth = cli.depth.unwrap_or(12) as usize;
            let (spec, raw): (MartingaleSpec, Value) = load(martingale)?;
            let d = spec.build()?;
            let violation = match &d {
                BuiltMartingale::Dyadic(d) => fairness_violation(d.as_ref(), depth),
                BuiltMartingale::Savings(s) => fairness_violation(s.as_ref(), depth),
            }
            .map_err(input)?;
            let mut r = Report::new("fairness-check", seed, json!({ "martingale": raw, "depth": depth }));
            r.check(
                "fairness",
                violation.is_none(),
                match &violation {
                    None => format!("d(x0) + d(x1) = 2d(x) for all |x| < {depth}"),
                    Some(x) if x.is_empty() => "fails at the root".to_string(),
                    Some(x) => format!("fails at `{x}`"),
                },
            );
            r.output = json!({
                "kind": d.kind(),
                "depth": depth,
                "violation": violation.map(|x| x.to_string()),
            });
            Ok(r.into())
        }
        Command::Kc(KcCommand::Build { requests, family, emit }) => kc_build(cli, requests, family, emit),
        Command::Convert(ConvertCommand::TestToMart { family }) => {
            let depth = cli.depth.unwrap_or(6) as usize;
            let (spec, raw): (FamilySpec, Value) = load(family)?;
            let x = spec.build()?;
            let bundle = match test_to_martingale(&x) {
                Ok(b) => b,
                Err(ConversionError::InvalidFamily(report)) => {
                    return Err(input(format!("not a valid test: {:?}", report.violations)))
                }
                Err(e) => return Err(input(e)),
            };
            let mut r = Report::new("convert test-to-mart", seed, json!({ "family": raw, "depth": depth }));
            let a = &bundle.approximant;
            let mut rows = Vec::new();
            let mut sandwich_bad = Vec::new();
            let mut rounding_bad = Vec::new();
            for s in BitString::all_up_to(depth) {
                let b = a.b_exact(&s);
                let d = bundle.rounded.eval(&s).map_err(input)?;
                if d < b || d > &b + &Dyadic::from_int(2) {
                    rounding_bad.push(s.to_string());
                }
                for i in 0..=depth as u64 {
                    let f = a.f_approx(&s, i).map_err(input)?;
                    let (b1, b2) = (a.b1(&s, i), a.b2(&s, i));
                    let eps = |e: i64| Dyadic::pow2(-(i as i64) - e);
                    let ok = b >= b1
                        && b1 >= b2
                        && b2 >= f
                        && &b - &b1 <= eps(2)
                        && &b1 - &b2 <= eps(2)
                        && &b2 - &f <= eps(1);
                    if !ok {
                        sandwich_bad.push(format!("({s}, {i})"));
                    }
                }
                rows.push(json!({ "x": s.to_string(), "b": text(&b), "rounded": text(&d) }));
            }
            r.check(
                "approximation-sandwich",
                sandwich_bad.is_empty(),
                if sandwich_bad.is_empty() {
                    format!("B − F(x, i) ≤ 2^-i with all three truncation bounds, |x| ≤ {depth}, i ≤ {depth}")
                } else {
                    format!("fails at {}", sandwich_bad.join(" "))
                },
            );
            r.check(
                "rounding-bounds",
                rounding_bad.is_empty(),
                if rounding_bad.is_empty() {
                    format!("B ≤ d ≤ B + 2 for |x| ≤ {depth}")
                } else {
                    format!("fails at {}", rounding_bad.join(" "))
                },
            );
            let unfair = fairness_violation(bundle.rounded.as_ref(), depth).map_err(input)?;
            r.check(
                "fairness",
                unfair.is_none(),
                match unfair {
                    None => format!("rounded martingale fair below depth {depth}"),
                    Some(x) => format!("rounded martingale unfair at `{x}`"),
                },
            );
            r.output = json!({
                "reindexed": bundle.family.reindexed(),
                "g": OrderOut::new(&bundle.g),
                "h": OrderOut::new(&bundle.h),
                "k_cut": bundle.k_cut,
                "values": rows,
            });
            Ok(r.into())
        }
        Command::Convert(ConvertCommand::MartToTest { martingale, order, cost }) => {
            let horizon = cli.horizon.unwrap_or(12) as usize;
            let (spec, raw_d): (MartingaleSpec, Value) = load(martingale)?;
            let (g, raw_g) = load_order(order)?;
            let (f, raw_f) = match cost {
                Some(p) => {
                    let (f, raw) = load_order(p)?;
                    (Some(f), raw)
                }
                None => (None, Value::Null),
            };
            let built = spec.build()?;
            let y = match &built {
                BuiltMartingale::Dyadic(d) => martingale_to_test(d.as_ref(), &g, f.as_ref(), horizon),
                BuiltMartingale::Savings(s) => martingale_to_test(s.as_ref(), &g, f.as_ref(), horizon),
            };
            let y = match y {
                Ok(y) => y,
                Err(e @ (ToTestError::InitialCapitalTooLarge(_) | ToTestError::CostNotStrict)) => return Err(input(e)),
                Err(e) => return Err(input(e)),
            };
            let mut r = Report::new(
                "convert mart-to-test",
                seed,
                json!({ "martingale": raw_d, "order": raw_g, "cost": raw_f, "horizon": horizon }),
            );
            let check = verify_family(&y, false).map_err(input)?;
            r.check(
                "test-validity",
                check.passed(),
                if check.passed() {
                    format!("prefix-free, μ(Y_n) ≤ 2^-n, controlled; {} pairs checked", check.checked_pairs)
                } else {
                    format!("{:?}", check.violations)
                },
            );
            r.output = serde_json::to_value(FamilySpec::from_family(&y)).expect("serializes");
            Ok(r.into())
        }
        Command::Machine(cmd) => machine(cli, cmd),
        Command::Diagonalize { battery } => {
            let horizon = cli.horizon.unwrap_or(256) as usize;
            let (b, raw) = load_battery(battery)?;
            let trace = build_xi(&b, horizon).map_err(input)?;
            let check = verify_trace(&trace, &b).map_err(input)?;
            let mut r = Report::new("diagonalize", seed, json!({ "battery": raw, "horizon": horizon }));
            trace_assertions(&mut r, &check);
            let mut table = Table::new(&["s", "bit", "f", "t", "case1", "capped", "delta"]);
            for s in 0..=trace.horizon() {
                table.push(vec![
                    s.to_string(),
                    if s == 0 { String::new() } else { (trace.bits.bit(s - 1) as u8).to_string() },
                    trace.f_values[s].to_string(),
                    trace.t_values[s].to_string(),
                    if s == 0 { String::new() } else { trace.case1[s - 1].to_string() },
                    if s == 0 { String::new() } else { trace.capped[s - 1].to_string() },
                    trace.delta[s].to_string(),
                ]);
            }
            r.output = json!({
                "case1_count": check.case1_count,
                "thresholds": check.thresholds,
                "gap_from": check.gap_from,
                "trace": TraceSpec::from_trace(&trace),
            });
            Ok(Outcome { report: r, table: Some(table) })
        }
        Command::Battery(BatteryCommand::Run { battery, sequence }) => {
            let horizon = cli.horizon.unwrap_or(64) as usize;
            let (b, raw_b) = load_battery(battery)?;
            let raw_s: Value = formats::read_json(sequence)?;
            let specs: Vec<SequenceSpec> = match &raw_s {
                Value::Array(_) => serde_json::from_value(raw_s.clone()),
                _ => serde_json::from_value(raw_s.clone()).map(|s| vec![s]),
            }
            .map_err(|e| input(format!("`{}` is not a sequence descriptor: {e}", sequence.display())))?;
            let base = sequence.parent();
            let mut r =
                Report::new("battery run", seed, json!({ "battery": raw_b, "sequence": raw_s, "horizon": horizon }));
            let mut table = Table::new(&["entry", "source", "i", "hit"]);
            let mut matrix = Vec::new();
            for (j, spec) in specs.iter().enumerate() {
                let source = spec.build(base)?;
                let prefix = source.prefix(horizon).map_err(input)?;
                for (e, entry) in b.entries().iter().enumerate() {
                    let report = success_report(entry.d.as_ref(), &entry.h, &prefix).map_err(input)?;
                    let consistent = report.hit_indices.iter().all(|&i| i <= horizon as u64)
                        && report.verdict_io == !report.hit_indices.is_empty();
                    r.check_at(
                        "success-report",
                        (j * b.len() + e) as u64,
                        consistent,
                        format!("entry {e}, source {j}"),
                    );
                    let mut hits = report.hit_indices.iter().peekable();
                    for i in 0..=horizon as u64 {
                        let hit = hits.next_if(|&&h| h == i).is_some();
                        table.push(vec![e.to_string(), j.to_string(), i.to_string(), hit.to_string()]);
                    }
                    matrix.push(json!({
                        "entry": e,
                        "source": j,
                        "source_kind": source.kind(),
                        "hit_indices": report.hit_indices,
                        "verdict_io": report.verdict_io,
                        "verdict_ae_tail": report.verdict_ae_tail,
                    }));
                }
            }
            r.output = json!({ "horizon": horizon, "results": matrix });
            Ok(Outcome { report: r, table: Some(table) })
        }
        Command::Verify(VerifyCommand::Family { family, strict }) => {
            let (spec, raw): (FamilySpec, Value) = load(family)?;
            let x = spec.build()?;
            let check = verify_family(&x, *strict).map_err(input)?;
            let mut r = Report::new("verify family", seed, json!({ "family": raw, "strict": strict }));
            r.check(
                "test-validity",
                check.passed(),
                if check.passed() {
                    format!("{} (n, i) pairs checked", check.checked_pairs)
                } else {
                    format!("{:?}", check.violations)
                },
            );
            r.output = json!({
                "levels": x.len(),
                "t_max": x.t_max(),
                "measures": (0..x.len() as u64).map(|n| x.limit(n).measure().to_string()).collect::<Vec<_>>(),
            });
            Ok(r.into())
        }
        Command::Verify(VerifyCommand::Trace { trace, battery }) => {
            let (spec, raw_t): (TraceSpec, Value) = load(trace)?;
            let t = spec.build()?;
            let (b, raw_b) = load_battery(battery)?;
            let check = verify_trace(&t, &b).map_err(input)?;
            let mut r = Report::new("verify trace", seed, json!({ "trace": raw_t, "battery": raw_b }));
            trace_assertions(&mut r, &check);
            r.output = json!({
                "horizon": check.horizon,
                "case1_count": check.case1_count,
                "thresholds": check.thresholds,
                "gap_from": check.gap_from,
            });
            Ok(r.into())
        }
        Command::Suite { name } => {
            let chosen: Vec<(&str, suite::Suite)> = match name {
                None => suite::SUITES.to_vec(),
                Some(n) => vec![(
                    suite::SUITES
                        .iter()
                        .find(|(k, _)| k == n)
                        .map(|(k, _)| *k)
                        .ok_or_else(|| input(format!("unknown suite `{n}`")))?,
                    suite::by_name(n).expect("found above"),
                )],
            };
            let mut r =
                Report::new("suite", seed, json!({ "suites": chosen.iter().map(|(n, _)| n).collect::<Vec<_>>() }));
            for (_, s) in chosen {
                let o = s(seed);
                r.check(o.name, o.passed, o.detail);
            }
            Ok(r.into())
        }
    }
}

fn trace_assertions(r: &mut Report, check: &subrand_core::diagonal::TraceReport) {
    use subrand_core::diagonal::TraceViolation as V;
    type Group = (&'static str, fn(&V) -> bool, &'static str);
    let groups: [Group; 5] = [
        (
            "trace-updates",
            |v| matches!(v, V::BadStart | V::Update { .. } | V::TExceedsLength { .. }),
            "F doubles and T steps exactly at case-1 levels",
        ),
        ("delta-bound", |v| matches!(v, V::DeltaBound { .. }), "δ(ξ↾s) < 2^{T+2} at every s"),
        ("sandwich", |v| matches!(v, V::Sandwich { .. } | V::Domination { .. }), "Φ ≤ δ ≤ Φ + 2 and d_e ≤ 2^e Φ"),
        ("order-gap", |v| matches!(v, V::Gap { .. }), "e + T + 2 < h_e(s) from each entry's first visible level"),
        ("replay", |v| matches!(v, V::Replay { .. }), "bits and δ agree with a fresh evaluation"),
    ];
    for (tag, pick, ok) in groups {
        let bad: Vec<String> = check.violations.iter().filter(|v| pick(v)).map(|v| format!("{v:?}")).collect();
        let detail =
            if bad.is_empty() { ok.to_string() } else { format!("{} violation(s), first {}", bad.len(), bad[0]) };
        r.check(tag, bad.is_empty(), detail);
    }
    let missing: Vec<usize> =
        check.thresholds.iter().enumerate().filter(|(_, t)| t.is_none()).map(|(e, _)| e).collect();
    r.check(
        "entry-thresholds",
        missing.is_empty(),
        if missing.is_empty() {
            "every entry stays below 2^{h_e(s)} from some s on".to_string()
        } else {
            format!("no threshold within the horizon for entries {missing:?}")
        },
    );
}

fn kc_steps(result: &KcResult) -> Value {
    Value::Array(
        result
            .steps
            .iter()
            .map(|s| {
                json!({
                    "index": s.request.index,
                    "length": s.request.length,
                    "payload": s.request.payload.to_string(),
                    "codeword": s.codeword.to_string(),
                    "consumed": s.consumed.to_string(),
                    "residual": s.residual.iter().map(ToString::to_string).collect::<Vec<_>>(),
                })
            })
            .collect(),
    )
}

fn kc_build(
    cli: &Cli,
    requests: &Option<PathBuf>,
    family: &Option<PathBuf>,
    emit: &Option<PathBuf>,
) -> Result<Outcome, InputError> {
    let seed = cli.seed;
    let (mut r, result, weight) = match (requests, family) {
        (Some(path), _) => {
            let (specs, raw): (Vec<RequestSpec>, Value) = load(path)?;
            let set = RequestSet::generic(formats::build_requests(&specs)?);
            let mut r = Report::new("kc build", seed, json!({ "requests": raw }));
            let result = match kc_assign(&set) {
                Ok(res) => res,
                Err(e @ (KcError::WeightExceeded { .. } | KcError::ZeroLength(_))) => return Err(input(e)),
                Err(e) => {
                    r.check("kc-feasible", false, e.to_string());
                    return Ok(r.into());
                }
            };
            r.check("kc-feasible", true, format!("{} requests served", set.len()));
            (r, result, set.weight())
        }
        (None, Some(path)) => {
            let depth = cli.depth.unwrap_or(8);
            let (spec, raw): (FamilySpec, Value) = load(path)?;
            let x = spec.build()?;
            let built = build_machine_from_test(&x).map_err(input)?;
            let mut r = Report::new("kc build", seed, json!({ "family": raw, "depth": depth }));
            let bad = replay_mismatches(&x, &built).map_err(input)?;
            r.check(
                "stratum-replay",
                bad.is_empty(),
                if bad.is_empty() {
                    format!("{} codewords recovered from the strata", built.assignment.steps.len())
                } else {
                    format!("replay disagrees on {}", bad.iter().map(ToString::to_string).collect::<Vec<_>>().join(" "))
                },
            );
            let h = stratum_clock(&x, depth).map_err(input)?;
            let control = verify_measure_computable(&built.table, &h, depth);
            r.check(
                "staged-omega-control",
                control.is_ok(),
                match &control {
                    Ok(_) => format!("Ω − Ω_(h(r)) ≤ 2^-r for r ≤ {depth}"),
                    Err(e) => e.to_string(),
                },
            );
            let weight = built.requests.weight();
            let mut result = built.assignment;
            result.table = built.table;
            (r, result, weight)
        }
        (None, None) => return Err(input("one of --requests or --family is required")),
    };
    let omega = result.table.omega();
    let lengths_ok = result.steps.iter().all(|s| s.codeword.len() as u64 == s.request.length);
    r.check("codeword-lengths", lengths_ok, "every codeword has its requested length");
    r.check("omega-equals-weight", omega == weight, format!("Ω = {omega}, requested weight = {weight}"));
    r.output = json!({
        "codewords": result.codewords().map(ToString::to_string).collect::<Vec<_>>(),
        "omega": omega.to_string(),
        "steps": kc_steps(&result),
        "machine": formats::machine_spec(&result.table),
    });
    if let Some(p) = emit {
        let body = serde_json::to_string_pretty(&formats::machine_spec(&result.table)).expect("serializes");
        std::fs::write(p, body + "\n").map_err(|e| input(format!("cannot write `{}`: {e}", p.display())))?;
    }
    Ok(r.into())
}

fn machine(cli: &Cli, cmd: &MachineCommand) -> Result<Outcome, InputError> {
    let seed = cli.seed;
    match cmd {
        MachineCommand::Omega { machine, at, control } => {
            let (m, raw) = load_machine(machine)?;
            let imax = cli.depth.unwrap_or(8);
            let mut inputs = json!({ "machine": raw, "at": at });
            let mut out = json!({
                "omega": m.omega().to_string(),
                "max_halt_time": m.max_halt_time(),
            });
            if let Some(t) = at {
                out["omega_at"] = json!(m.omega_at(Time::At(*t)).to_string());
            }
            let mut checks = Vec::new();
            if let Some(p) = control {
                let (g, raw_g) = load_order(p)?;
                inputs["control"] = raw_g;
                inputs["depth"] = json!(imax);
                match verify_measure_computable(&m, &g, imax) {
                    Ok(w) => {
                        out["residuals"] = json!(w.residuals.iter().map(ToString::to_string).collect::<Vec<_>>());
                        checks.push((true, format!("Ω − Ω_(g(i)) ≤ 2^-i for i ≤ {imax}")));
                    }
                    Err(e) => checks.push((false, e.to_string())),
                }
            }
            let mut r = Report::new("machine omega", seed, inputs);
            for (ok, detail) in checks {
                r.check("omega-control", ok, detail);
            }
            r.output = out;
            Ok(r.into())
        }
        MachineCommand::K { machine, x, at } => {
            let (m, raw) = load_machine(machine)?;
            let xs = formats::bits(x)?;
            let t = at.map_or(Time::Unbounded, Time::At);
            let mut r = Report::new("machine k", seed, json!({ "machine": raw, "x": x, "at": at }));
            r.output = json!({
                "complexity": m.complexity(&xs, t).to_string(),
                "margin": kolmogorov_margin(&m, &xs),
            });
            Ok(r.into())
        }
        MachineCommand::Rb { machine, b, maxlen, control } => {
            let (m, raw) = load_machine(machine)?;
            let plain = rb_set(&m, *b, *maxlen, None).map_err(input)?;
            let mut inputs = json!({ "machine": raw, "b": b, "maxlen": maxlen });
            let mut out = json!({
                "strings": plain.iter().map(ToString::to_string).collect::<Vec<_>>(),
                "measure": plain.measure().to_string(),
            });
            let staged = match control {
                Some(p) => {
                    let (g, raw_g) = load_order(p)?;
                    inputs["control"] = raw_g;
                    Some(rb_set(&m, *b, *maxlen, Some(&g)))
                }
                None => None,
            };
            let mut r = Report::new("machine rb", seed, inputs);
            let bound = Dyadic::pow2(-b);
            r.check(
                "rb-measure",
                plain.measure() <= bound,
                format!("μ(R_b) = {} against 2^-b = {bound}", plain.measure()),
            );
            match staged {
                Some(Ok(s)) => {
                    out["staged"] = json!(s.iter().map(ToString::to_string).collect::<Vec<_>>());
                    let missing = suite::set_difference(&plain, &s);
                    let extra = suite::set_difference(&s, &plain);
                    r.check(
                        "staged-agrees",
                        missing.is_empty() && extra.is_empty(),
                        if missing.is_empty() && extra.is_empty() {
                            "staged and unstaged sets coincide".to_string()
                        } else {
                            format!("only unstaged: {missing:?}; only staged: {extra:?}")
                        },
                    );
                }
                Some(Err(e)) => r.check("staged-agrees", false, e.to_string()),
                None => {}
            }
            r.output = out;
            Ok(r.into())
        }
    }
}

/// Renders an outcome in the requested format.
pub fn render(outcome: &Outcome, format: Format) -> Result<String, InputError> {
    match format {
        Format::Json => Ok(outcome.report.to_json()),
        Format::Csv => match &outcome.table {
            Some(t) => t.to_csv().map_err(input),
            None => Err(input(format!("`{}` has no per-index output; use --format json", outcome.report.command))),
        },
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match run(&cli).and_then(|o| render(&o, cli.format).map(|s| (o, s))) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let (outcome, body) = outcome;
    match &cli.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &body) {
                eprintln!("error: cannot write `{}`: {e}", p.display());
                return ExitCode::from(2);
            }
        }
        None => print!("{body}"),
    }
    let mut failed = false;
    for a in outcome.report.failures() {
        failed = true;
        eprintln!("assertion failed [{}]: {}", a.tag, a.detail);
    }
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
