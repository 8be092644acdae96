//! One line per acceptance criterion; exits non-zero if any fails.
//!
//! Runtime budgets are wall-clock limits on the suite in the test profile.

use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use subrand::suite;

const SEED: u64 = 20_261_015;

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> (bool, String),
}

fn from_suite(f: suite::Suite) -> (bool, String) {
    let o = f(SEED);
    (o.passed, o.detail)
}

/// Every command twice with the same inputs and seed; reports must match byte for byte.
fn determinism() -> (bool, String) {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let seed = SEED.to_string();
    let runs: Vec<Vec<&str>> = vec![
        vec!["fairness-check", "--martingale", "rounded_savings.json", "--depth", "8"],
        vec!["kc", "build", "--requests", "requests.json"],
        vec!["kc", "build", "--family", "family.json"],
        vec!["convert", "test-to-mart", "--family", "family.json"],
        vec!["convert", "mart-to-test", "--martingale", "lln_half.json", "--order", "half_floor.json"],
        vec!["machine", "omega", "--machine", "machine.json", "--at", "3"],
        vec!["machine", "k", "--machine", "machine.json", "--x", "0101"],
        vec!["machine", "rb", "--machine", "machine.json", "--b", "1"],
        vec!["diagonalize", "--battery", "battery_two.json", "--horizon", "128"],
        vec!["diagonalize", "--battery", "battery_two.json", "--horizon", "128", "--format", "csv"],
        vec!["battery", "run", "--battery", "battery_two.json", "--sequence", "sources.json"],
        vec!["battery", "run", "--battery", "battery_two.json", "--sequence", "sources.json", "--format", "csv"],
        vec!["verify", "family", "--family", "family.json", "--strict"],
        vec!["suite", "--name", "kraft-chaitin"],
        vec!["suite", "--name", "round-trip"],
    ];
    let mut differing = Vec::new();
    for args in &runs {
        let once = || {
            Command::new(env!("CARGO_BIN_EXE_subrand"))
                .args(args)
                .args(["--seed", &seed])
                .current_dir(&data)
                .output()
                .expect("binary runs")
        };
        let (a, b) = (once(), once());
        if a.status.code() != Some(0) || a.stdout.is_empty() || a.stdout != b.stdout || a.status != b.status {
            differing.push(args.join(" "));
        }
    }
    if differing.is_empty() {
        (true, format!("{} commands byte-identical across two runs", runs.len()))
    } else {
        (false, format!("differing or failing: {}", differing.join("; ")))
    }
}

const CRITERIA: &[Criterion] = &[
    Criterion { name: "fairness", budget: Some(Duration::from_secs(10)), run: || from_suite(suite::fairness) },
    Criterion { name: "ville", budget: Some(Duration::from_secs(30)), run: || from_suite(suite::ville) },
    Criterion {
        name: "kraft-chaitin",
        budget: Some(Duration::from_secs(20)),
        run: || from_suite(suite::kraft_chaitin),
    },
    Criterion { name: "staged-omega", budget: None, run: || from_suite(suite::staged_omega) },
    Criterion {
        name: "approximation-sandwich",
        budget: Some(Duration::from_secs(60)),
        run: || from_suite(suite::approximation_sandwich),
    },
    Criterion { name: "round-trip", budget: None, run: || from_suite(suite::round_trip) },
    Criterion { name: "staged-complexity", budget: None, run: || from_suite(suite::staged_complexity) },
    Criterion { name: "diagonal", budget: Some(Duration::from_secs(120)), run: || from_suite(suite::diagonal) },
    Criterion { name: "lln-separation", budget: None, run: || from_suite(suite::lln_separation) },
    Criterion { name: "determinism", budget: None, run: determinism },
];

fn main() -> ExitCode {
    println!("acceptance (seed {SEED})");
    let mut failed = 0;
    for c in CRITERIA {
        let start = Instant::now();
        let (ok, detail) = (c.run)();
        let elapsed = start.elapsed();
        let in_time = c.budget.is_none_or(|b| elapsed < b);
        let pass = ok && in_time;
        if !pass {
            failed += 1;
        }
        let timing = match c.budget {
            Some(b) => format!("{:.2}s < {}s", elapsed.as_secs_f64(), b.as_secs()),
            None => format!("{:.2}s", elapsed.as_secs_f64()),
        };
        println!("{} {} [{timing}] {detail}", if pass { "PASS" } else { "FAIL" }, c.name);
    }
    println!("{} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
