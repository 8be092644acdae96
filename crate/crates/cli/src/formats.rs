//! JSON file formats and their conversion to core values.
//!
//! Bit strings are ASCII `0`/`1`, dyadics are `m/2^n` text, sets of strings
//! are JSON arrays.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use subrand_core::diagonal::{Battery, BatteryEntry, DiagonalTrace};
use subrand_core::machines::{Entry, MachineTable};
use subrand_core::martingales::{
    conditional_martingale, lln_martingale, round_to_dyadic, savings_transform, weighted_sum, Approximant,
    DyadicMartingale, Savings,
};
use subrand_core::ml_tests::StagedTestFamily;
use subrand_core::orders::{Extension, OrderExpr};
use subrand_core::sequences::SequenceSource;
use subrand_core::{BitString, ClopenSet, Dyadic, OrderFn};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("cannot read `{path}`: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed JSON in `{path}`: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{0}")]
    Invalid(String),
}

fn invalid(e: impl std::fmt::Display) -> FormatError {
    FormatError::Invalid(e.to_string())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, FormatError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| FormatError::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|source| FormatError::Json { path: path.display().to_string(), source })
}

pub fn bits(s: &str) -> Result<BitString, FormatError> {
    s.parse().map_err(|e| invalid(format!("bit string `{s}`: {e}")))
}

pub fn dyadic(s: &str) -> Result<Dyadic, FormatError> {
    s.parse().map_err(invalid)
}

// ---- orders ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExtensionSpec {
    Constant,
    Affine { slope: u64 },
}

/// An order as an expression tree; `flags` is written on output and ignored on input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrderSpec {
    Identity,
    Constant {
        value: u64,
    },
    Linear {
        mul: u64,
        #[serde(default = "one")]
        div: u64,
        #[serde(default)]
        add: u64,
        #[serde(default)]
        ceil: bool,
    },
    Power {
        coef: u64,
        exp: u32,
        #[serde(default)]
        add: u64,
    },
    Table {
        values: Vec<u64>,
        #[serde(default = "constant_extension")]
        extension: ExtensionSpec,
    },
    Strictify {
        of: Box<OrderSpec>,
    },
    Inverse {
        of: Box<OrderSpec>,
    },
    TruncSub {
        of: Box<OrderSpec>,
        c: u64,
    },
    Compose {
        outer: Box<OrderSpec>,
        inner: Box<OrderSpec>,
    },
    Sum {
        left: Box<OrderSpec>,
        right: Box<OrderSpec>,
    },
    Shift {
        of: Box<OrderSpec>,
        k: u64,
    },
}

fn one() -> u64 {
    1
}

fn constant_extension() -> ExtensionSpec {
    ExtensionSpec::Constant
}

impl OrderSpec {
    pub fn build(&self) -> Result<OrderFn, FormatError> {
        Ok(match self {
            OrderSpec::Identity => OrderFn::identity(),
            OrderSpec::Constant { value } => OrderFn::constant(*value),
            OrderSpec::Linear { mul, div, add, ceil } => {
                if *div == 0 {
                    return Err(invalid("linear order with div = 0"));
                }
                if *ceil {
                    OrderFn::linear_ceil(*mul, *div, *add)
                } else {
                    OrderFn::linear(*mul, *div, *add)
                }
            }
            OrderSpec::Power { coef, exp, add } => OrderFn::power(*coef, *exp, *add),
            OrderSpec::Table { values, extension } => {
                if values.is_empty() {
                    return Err(invalid("table order with no values"));
                }
                let ext = match extension {
                    ExtensionSpec::Constant => Extension::Constant,
                    ExtensionSpec::Affine { slope } => Extension::Affine { slope: *slope },
                };
                OrderFn::table(values.clone(), ext)
            }
            OrderSpec::Strictify { of } => of.build()?.strictify(),
            OrderSpec::Inverse { of } => of.build()?.inverse_order(),
            OrderSpec::TruncSub { of, c } => of.build()?.trunc_sub(*c),
            OrderSpec::Compose { outer, inner } => outer.build()?.compose(&inner.build()?),
            OrderSpec::Sum { left, right } => left.build()?.sum(&right.build()?),
            OrderSpec::Shift { of, k } => of.build()?.shift(*k),
        })
    }

    pub fn from_order(f: &OrderFn) -> Self {
        let b = |g: &OrderFn| Box::new(OrderSpec::from_order(g));
        match f.expr() {
            OrderExpr::Linear { mul: 1, div: 1, add: 0, ceil: false } => OrderSpec::Identity,
            OrderExpr::Linear { mul: 0, div: 1, add, ceil: false } => OrderSpec::Constant { value: *add },
            OrderExpr::Linear { mul, div, add, ceil } => {
                OrderSpec::Linear { mul: *mul, div: *div, add: *add, ceil: *ceil }
            }
            OrderExpr::Power { coef, exp, add } => OrderSpec::Power { coef: *coef, exp: *exp, add: *add },
            OrderExpr::Table { values, extension } => OrderSpec::Table {
                values: values.clone(),
                extension: match extension {
                    Extension::Constant => ExtensionSpec::Constant,
                    Extension::Affine { slope } => ExtensionSpec::Affine { slope: *slope },
                },
            },
            OrderExpr::Strictify(g) => OrderSpec::Strictify { of: b(g) },
            OrderExpr::Inverse(g) => OrderSpec::Inverse { of: b(g) },
            OrderExpr::TruncSub(g, c) => OrderSpec::TruncSub { of: b(g), c: *c },
            OrderExpr::Compose { outer, inner } => OrderSpec::Compose { outer: b(outer), inner: b(inner) },
            OrderExpr::Sum(l, r) => OrderSpec::Sum { left: b(l), right: b(r) },
            OrderExpr::Shift(g, k) => OrderSpec::Shift { of: b(g), k: *k },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderFlags {
    pub nondecreasing: bool,
    pub strictly_increasing: bool,
}

/// An order with its structural flags, for output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderOut {
    #[serde(flatten)]
    pub spec: OrderSpec,
    pub flags: OrderFlags,
}

impl OrderOut {
    pub fn new(f: &OrderFn) -> Self {
        Self {
            spec: OrderSpec::from_order(f),
            flags: OrderFlags { nondecreasing: f.is_nondecreasing(), strictly_increasing: f.is_strictly_increasing() },
        }
    }
}

// ---- martingales ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MartingaleSpec {
    Constant {
        value: String,
    },
    Conditional {
        set: Vec<String>,
    },
    Lln {
        q: String,
    },
    /// Values keyed by string; unlisted strings inherit their longest listed prefix.
    Table {
        values: BTreeMap<String, String>,
    },
    WeightedSum {
        parts: Vec<MartingaleSpec>,
    },
    Sum {
        parts: Vec<MartingaleSpec>,
    },
    Scaled {
        inner: Box<MartingaleSpec>,
        shift: i64,
    },
    Savings {
        inner: Box<MartingaleSpec>,
        checkpoints: OrderSpec,
        n0: u64,
    },
    Rounded {
        of: Box<MartingaleSpec>,
    },
}

/// A built martingale: dyadic-valued, or the rational-valued savings account.
#[derive(Debug, Clone)]
pub enum BuiltMartingale {
    Dyadic(Arc<DyadicMartingale>),
    Savings(Arc<Savings>),
}

impl BuiltMartingale {
    pub fn kind(&self) -> &'static str {
        match self {
            BuiltMartingale::Dyadic(d) => d.kind(),
            BuiltMartingale::Savings(_) => "savings",
        }
    }

    pub fn dyadic(self) -> Result<Arc<DyadicMartingale>, FormatError> {
        match self {
            BuiltMartingale::Dyadic(d) => Ok(d),
            BuiltMartingale::Savings(_) => Err(invalid("a dyadic martingale is required; wrap savings in `rounded`")),
        }
    }
}

impl MartingaleSpec {
    pub fn build(&self) -> Result<BuiltMartingale, FormatError> {
        let dy = |d: DyadicMartingale| Ok(BuiltMartingale::Dyadic(Arc::new(d)));
        match self {
            MartingaleSpec::Constant { value } => dy(DyadicMartingale::constant(dyadic(value)?)),
            MartingaleSpec::Conditional { set } => {
                let set: ClopenSet = set.iter().map(|s| bits(s)).collect::<Result<_, _>>()?;
                dy(conditional_martingale(set))
            }
            MartingaleSpec::Lln { q } => dy(lln_martingale(dyadic(q)?).map_err(invalid)?),
            MartingaleSpec::Table { values } => {
                let values = values
                    .iter()
                    .map(|(k, v)| Ok((bits(k)?, dyadic(v)?)))
                    .collect::<Result<BTreeMap<_, _>, FormatError>>()?;
                dy(DyadicMartingale::table(values).map_err(invalid)?)
            }
            MartingaleSpec::WeightedSum { parts } => {
                let parts = parts.iter().map(|p| p.build()?.dyadic()).collect::<Result<_, _>>()?;
                dy(weighted_sum(parts).map_err(invalid)?)
            }
            MartingaleSpec::Sum { parts } => {
                let parts = parts.iter().map(|p| p.build()?.dyadic()).collect::<Result<_, _>>()?;
                dy(DyadicMartingale::Sum(parts))
            }
            MartingaleSpec::Scaled { inner, shift } => dy(DyadicMartingale::scaled(inner.build()?.dyadic()?, *shift)),
            MartingaleSpec::Savings { inner, checkpoints, n0 } => {
                let s = savings_transform(inner.build()?.dyadic()?, checkpoints.build()?, *n0).map_err(invalid)?;
                Ok(BuiltMartingale::Savings(Arc::new(s)))
            }
            MartingaleSpec::Rounded { of } => {
                let approximant = match of.build()? {
                    BuiltMartingale::Dyadic(d) => Approximant::Exact(d),
                    BuiltMartingale::Savings(s) => Approximant::Floor(s),
                };
                dy(round_to_dyadic(approximant))
            }
        }
    }
}

// ---- staged tests ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSpec {
    pub t: u64,
    pub add: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSpec {
    pub n: u64,
    pub stages: Vec<StageSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilySpec {
    pub f: OrderSpec,
    pub families: Vec<LevelSpec>,
}

impl FamilySpec {
    pub fn build(&self) -> Result<StagedTestFamily, FormatError> {
        let len = self.families.iter().map(|l| l.n + 1).max().unwrap_or(0);
        let mut levels: Vec<Vec<(u64, BitString)>> = vec![Vec::new(); len as usize];
        for level in &self.families {
            for stage in &level.stages {
                for s in &stage.add {
                    levels[level.n as usize].push((stage.t, bits(s)?));
                }
            }
        }
        StagedTestFamily::new(levels, self.f.build()?).map_err(invalid)
    }

    pub fn from_family(x: &StagedTestFamily) -> Self {
        let families = (0..x.len() as u64)
            .map(|n| {
                let mut by_stage: BTreeMap<u64, Vec<String>> = BTreeMap::new();
                for (s, t) in x.entries(n) {
                    by_stage.entry(t).or_default().push(s.to_string());
                }
                let stages = by_stage.into_iter().map(|(t, add)| StageSpec { t, add }).collect();
                LevelSpec { n, stages }
            })
            .collect();
        FamilySpec { f: OrderSpec::from_order(x.f()), families }
    }
}

// ---- machines and requests ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntrySpec {
    pub code: String,
    pub out: String,
    pub t: u64,
}

pub fn build_machine(entries: &[EntrySpec]) -> Result<MachineTable, FormatError> {
    let entries = entries
        .iter()
        .map(|e| Ok(Entry { code: bits(&e.code)?, out: bits(&e.out)?, halt_time: e.t }))
        .collect::<Result<Vec<_>, FormatError>>()?;
    MachineTable::new(entries).map_err(invalid)
}

pub fn machine_spec(m: &MachineTable) -> Vec<EntrySpec> {
    m.entries().iter().map(|e| EntrySpec { code: e.code.to_string(), out: e.out.to_string(), t: e.halt_time }).collect()
}

/// A bare length, or a length with the string it describes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RequestSpec {
    Length(u64),
    Full {
        length: u64,
        #[serde(default)]
        payload: String,
    },
}

pub fn build_requests(specs: &[RequestSpec]) -> Result<Vec<(u64, BitString)>, FormatError> {
    specs
        .iter()
        .map(|r| match r {
            RequestSpec::Length(l) => Ok((*l, BitString::empty())),
            RequestSpec::Full { length, payload } => Ok((*length, bits(payload)?)),
        })
        .collect()
}

// ---- batteries and traces ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatteryEntrySpec {
    pub martingale: MartingaleSpec,
    pub order: OrderSpec,
    /// Defaults to `τ_e(m) = e + m`.
    #[serde(default)]
    pub tau: Option<OrderSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatterySpec {
    pub entries: Vec<BatteryEntrySpec>,
    /// Depth of the fairness check run on every entry.
    #[serde(default = "default_depth")]
    pub depth: usize,
}

fn default_depth() -> usize {
    8
}

impl BatterySpec {
    pub fn build(&self) -> Result<Battery, FormatError> {
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(e, spec)| {
                Ok(BatteryEntry {
                    d: spec.martingale.build()?.dyadic()?,
                    h: spec.order.build()?,
                    tau: match &spec.tau {
                        Some(t) => t.build()?,
                        None => subrand_core::diagonal::default_schedule(e),
                    },
                })
            })
            .collect::<Result<Vec<_>, FormatError>>()?;
        Battery::new(entries, self.depth).map_err(invalid)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSpec {
    pub bits: String,
    pub f: Vec<String>,
    pub t: Vec<u64>,
    pub case1: Vec<bool>,
    pub capped: Vec<bool>,
    pub delta: Vec<String>,
}

impl TraceSpec {
    pub fn from_trace(trace: &DiagonalTrace) -> Self {
        Self {
            bits: trace.bits.to_string(),
            f: trace.f_values.iter().map(ToString::to_string).collect(),
            t: trace.t_values.clone(),
            case1: trace.case1.clone(),
            capped: trace.capped.clone(),
            delta: trace.delta.iter().map(ToString::to_string).collect(),
        }
    }

    pub fn build(&self) -> Result<DiagonalTrace, FormatError> {
        let trace = DiagonalTrace {
            bits: bits(&self.bits)?,
            f_values: self.f.iter().map(|s| dyadic(s)).collect::<Result<_, _>>()?,
            t_values: self.t.clone(),
            case1: self.case1.clone(),
            capped: self.capped.clone(),
            delta: self.delta.iter().map(|s| dyadic(s)).collect::<Result<_, _>>()?,
        };
        let h = trace.bits.len();
        if trace.f_values.len() != h + 1
            || trace.t_values.len() != h + 1
            || trace.delta.len() != h + 1
            || trace.case1.len() != h
            || trace.capped.len() != h
        {
            return Err(invalid("trace columns do not match the number of bits"));
        }
        Ok(trace)
    }
}

// ---- sequences ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SequenceSpec {
    Constant {
        bit: u8,
    },
    Periodic {
        word: String,
    },
    Champernowne,
    Rational {
        num: u64,
        den: u64,
    },
    Explicit {
        bits: String,
    },
    /// ASCII `0`/`1` read from a file, whitespace ignored; relative to the descriptor.
    File {
        path: String,
    },
}

impl SequenceSpec {
    pub fn build(&self, base: Option<&Path>) -> Result<SequenceSource, FormatError> {
        match self {
            SequenceSpec::Constant { bit } => match bit {
                0 => Ok(SequenceSource::Constant(false)),
                1 => Ok(SequenceSource::Constant(true)),
                _ => Err(invalid(format!("constant bit must be 0 or 1, got {bit}"))),
            },
            SequenceSpec::Periodic { word } => SequenceSource::periodic(bits(word)?).map_err(invalid),
            SequenceSpec::Champernowne => Ok(SequenceSource::Champernowne),
            SequenceSpec::Rational { num, den } => SequenceSource::rational(*num, *den).map_err(invalid),
            SequenceSpec::Explicit { bits } => SequenceSource::parse_stream(bits).map_err(invalid),
            SequenceSpec::File { path } => {
                let p = match base {
                    Some(dir) => dir.join(path),
                    None => Path::new(path).to_path_buf(),
                };
                let text = std::fs::read_to_string(&p)
                    .map_err(|source| FormatError::Io { path: p.display().to_string(), source })?;
                SequenceSource::parse_stream(&text).map_err(invalid)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_round_trip() {
        let json = r#"{"kind": "compose", "outer": {"kind": "linear", "mul": 1, "add": 3},
                       "inner": {"kind": "linear", "mul": 5}}"#;
        let spec: OrderSpec = serde_json::from_str(json).unwrap();
        let f = spec.build().unwrap();
        assert_eq!(f.eval(2), 13);
        assert_eq!(OrderSpec::from_order(&f).build().unwrap(), f);
        let bad: OrderSpec = serde_json::from_str(r#"{"kind": "linear", "mul": 1, "div": 0}"#).unwrap();
        assert!(bad.build().is_err());
    }

    #[test]
    fn family_round_trip() {
        let json = r#"{"f": {"kind": "linear", "mul": 1, "add": 3},
                       "families": [{"n": 0, "stages": [{"t": 1, "add": ["0"]}]},
                                    {"n": 1, "stages": [{"t": 4, "add": ["00"]}]}]}"#;
        let spec: FamilySpec = serde_json::from_str(json).unwrap();
        let x = spec.build().unwrap();
        assert_eq!(x.stage_of(1, &bits("00").unwrap()), Some(4));
        assert_eq!(FamilySpec::from_family(&x), spec);
    }

    #[test]
    fn martingales_build() {
        let json = r#"{"kind": "rounded", "of": {"kind": "savings",
                        "inner": {"kind": "lln", "q": "1/2"},
                        "checkpoints": {"kind": "linear", "mul": 4}, "n0": 1}}"#;
        let spec: MartingaleSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.build().unwrap().kind(), "rounded");
        let savings: MartingaleSpec = serde_json::from_str(
            r#"{"kind": "savings", "inner": {"kind": "lln", "q": "1/2"}, "checkpoints": {"kind": "identity"}, "n0": 0}"#,
        )
        .unwrap();
        assert!(savings.build().unwrap().dyadic().is_err());
    }

    #[test]
    fn requests_accept_both_forms() {
        let specs: Vec<RequestSpec> = serde_json::from_str(r#"[1, {"length": 2, "payload": "01"}]"#).unwrap();
        let rs = build_requests(&specs).unwrap();
        assert_eq!(rs[1], (2, bits("01").unwrap()));
    }
}
