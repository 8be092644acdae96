//! A sequence on which every martingale of a finite battery stays below its
//! order, while the doubling strategy `F` goes to infinity along it.
//!
//! Level `s` is in case 1 when every entry `e ≤ T(x)` has revealed some value
//! `h_e(m) > e + T(x) + 3` with `m ≤ |x|`. Case 1 forces the next bit to 0 and
//! doubles `F`; otherwise the next bit is the one on which the rounded
//! combination `δ` of the battery does not grow.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::martingales::{
    check_fairness, round_to_dyadic, weighted_sum, Approximant, Cursor, DyadicMartingale, EvalError, MartingaleError,
};
use crate::numeric::{BitString, Dyadic};
use crate::orders::{OrderError, OrderFn};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BatteryError {
    #[error("entry {0} is not fair at the working depth")]
    Unfair(usize),
    #[error("entry {0} has an order that is not nondecreasing")]
    OrderNotMonotone(usize),
    #[error("entry {0} has a revelation schedule that is not nondecreasing")]
    ScheduleNotMonotone(usize),
    #[error(transparent)]
    Martingale(#[from] MartingaleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone)]
pub struct BatteryEntry {
    pub d: Arc<DyadicMartingale>,
    pub h: OrderFn,
    /// `h(m)` is visible at time `s` iff `τ(m) ≤ s`.
    pub tau: OrderFn,
}

#[derive(Debug, Clone)]
pub struct Battery {
    entries: Vec<BatteryEntry>,
    /// `Φ = Σ_e 2^{-e} d_e`.
    phi: Arc<DyadicMartingale>,
    /// The rounding of `Φ`, with `Φ ≤ δ ≤ Φ + 2`.
    delta: Arc<DyadicMartingale>,
}

/// `τ_e(m) = e + m`.
pub fn default_schedule(e: usize) -> OrderFn {
    OrderFn::linear(1, 1, e as u64)
}

impl Battery {
    /// Checks each entry: `d_e(ε) ≤ 1`, fairness to `depth`, monotone `h_e` and `τ_e`.
    pub fn new(entries: Vec<BatteryEntry>, depth: usize) -> Result<Self, BatteryError> {
        for (e, entry) in entries.iter().enumerate() {
            if !check_fairness(entry.d.as_ref(), depth)? {
                return Err(BatteryError::Unfair(e));
            }
            if !entry.h.is_nondecreasing() {
                return Err(BatteryError::OrderNotMonotone(e));
            }
            if !entry.tau.is_nondecreasing() {
                return Err(BatteryError::ScheduleNotMonotone(e));
            }
        }
        let phi = Arc::new(weighted_sum(entries.iter().map(|e| e.d.clone()).collect())?);
        let delta = Arc::new(round_to_dyadic(Approximant::Exact(phi.clone())));
        Ok(Self { entries, phi, delta })
    }

    /// Entries `(d_e, h_e)` revealed on the default schedule.
    pub fn with_default_schedules(
        pairs: Vec<(Arc<DyadicMartingale>, OrderFn)>,
        depth: usize,
    ) -> Result<Self, BatteryError> {
        let entries =
            pairs.into_iter().enumerate().map(|(e, (d, h))| BatteryEntry { d, h, tau: default_schedule(e) }).collect();
        Self::new(entries, depth)
    }

    pub fn entries(&self) -> &[BatteryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn phi(&self) -> &Arc<DyadicMartingale> {
        &self.phi
    }

    pub fn delta(&self) -> &Arc<DyadicMartingale> {
        &self.delta
    }
}

/// Largest `m ≤ len` whose value is visible by time `len + 1`.
fn largest_visible(tau: &OrderFn, len: u64) -> Result<Option<u64>, OrderError> {
    if tau.try_eval(0)? > len + 1 {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0u64, len);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if tau.try_eval(mid)? <= len + 1 {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(Some(lo))
}

/// Whether a string of length `len` with `T(x) = t` is in case 1.
///
/// Entries past the end of the battery impose nothing. As `h_e` and `τ_e`
/// are nondecreasing, the best witness `m_e` is the largest visible one.
pub fn case1_holds(len: u64, t: u64, battery: &Battery) -> Result<bool, OrderError> {
    for (e, entry) in battery.entries.iter().enumerate().take(t.saturating_add(1).min(usize::MAX as u64) as usize) {
        let Some(m) = largest_visible(&entry.tau, len)? else { return Ok(false) };
        if entry.h.try_eval(m)? <= e as u64 + t + 3 {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiagonalTrace {
    pub bits: BitString,
    /// `F(ξ↾s)` for `s ∈ [0, horizon]`.
    pub f_values: Vec<Dyadic>,
    pub t_values: Vec<u64>,
    /// Whether `ξ↾s` is in case 1, for `s < horizon`.
    pub case1: Vec<bool>,
    /// Whether the case-1 test at `s` ran out of battery entries before `T(ξ↾s)`.
    pub capped: Vec<bool>,
    /// `δ(ξ↾s)` for `s ∈ [0, horizon]`.
    pub delta: Vec<Dyadic>,
}

impl DiagonalTrace {
    pub fn horizon(&self) -> usize {
        self.bits.len()
    }

    pub fn case1_count(&self) -> usize {
        self.case1.iter().filter(|&&c| c).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DiagonalError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Order(#[from] OrderError),
}

/// The first `horizon` bits of the diagonal sequence; ties go to 0.
pub fn build_xi(battery: &Battery, horizon: usize) -> Result<DiagonalTrace, DiagonalError> {
    let mut cursor = Cursor::new(battery.delta.as_ref())?;
    let mut f = Dyadic::one();
    let mut t = 0u64;
    let mut trace = DiagonalTrace {
        bits: BitString::empty(),
        f_values: Vec::with_capacity(horizon + 1),
        t_values: Vec::with_capacity(horizon + 1),
        case1: Vec::with_capacity(horizon),
        capped: Vec::with_capacity(horizon),
        delta: Vec::with_capacity(horizon + 1),
    };
    for s in 0..horizon {
        trace.f_values.push(f.clone());
        trace.t_values.push(t);
        trace.delta.push(cursor.value());
        let case1 = case1_holds(s as u64, t, battery)?;
        trace.case1.push(case1);
        trace.capped.push(t >= battery.len() as u64);
        let bit = if case1 {
            f = f.double();
            t += 1;
            false
        } else {
            let (zero, one) = cursor.children()?;
            one < zero
        };
        cursor.descend(bit)?;
        trace.bits.push(bit);
    }
    trace.f_values.push(f);
    trace.t_values.push(t);
    trace.delta.push(cursor.value());
    Ok(trace)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TraceViolation {
    /// `F(ε) ≠ 1` or `T(ε) ≠ 0`.
    BadStart,
    /// `F` or `T` moved other than by doubling/incrementing at case 1.
    Update {
        s: usize,
    },
    TExceedsLength {
        s: usize,
    },
    /// `δ(ξ↾s) ≥ 2^{T(ξ↾s)+2}`.
    DeltaBound {
        s: usize,
    },
    /// `Φ ≤ δ ≤ Φ + 2` fails.
    Sandwich {
        s: usize,
    },
    /// `d_e ≤ 2^e Φ` fails.
    Domination {
        e: usize,
        s: usize,
    },
    /// `e + T(ξ↾s) + 2 < h_e(s)` fails after the entry's first case-1 level.
    Gap {
        e: usize,
        s: usize,
    },
    /// The recorded bits or `δ` values disagree with a fresh evaluation.
    Replay {
        s: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceReport {
    pub horizon: usize,
    pub case1_count: usize,
    /// Least `s_e` with `d_e(ξ↾s) < 2^{h_e(s)}` for all `s ∈ [s_e, horizon]`.
    pub thresholds: Vec<Option<usize>>,
    /// First `s` from which the gap `e + T + 2 < h_e(s)` is asserted.
    pub gap_from: Vec<Option<usize>>,
    pub violations: Vec<TraceViolation>,
}

impl TraceReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Re-evaluates every martingale along the trace and checks its bounds.
pub fn verify_trace(trace: &DiagonalTrace, battery: &Battery) -> Result<TraceReport, DiagonalError> {
    let horizon = trace.horizon();
    let mut violations = Vec::new();
    if trace.f_values.first() != Some(&Dyadic::one()) || trace.t_values.first() != Some(&0) {
        violations.push(TraceViolation::BadStart);
    }
    for s in 0..horizon {
        let (f0, f1) = (&trace.f_values[s], &trace.f_values[s + 1]);
        let (t0, t1) = (trace.t_values[s], trace.t_values[s + 1]);
        let ok = if trace.case1[s] {
            *f1 == f0.double() && t1 == t0 + 1 && !trace.bits.bit(s)
        } else {
            f1 == f0 && t1 == t0
        };
        if !ok {
            violations.push(TraceViolation::Update { s });
        }
    }
    for (s, &t) in trace.t_values.iter().enumerate() {
        if t > s as u64 {
            violations.push(TraceViolation::TExceedsLength { s });
        }
    }

    let mut delta = Cursor::new(battery.delta.as_ref())?;
    let mut phi = Cursor::new(battery.phi.as_ref())?;
    let mut ds = battery.entries.iter().map(|e| Cursor::new(e.d.as_ref())).collect::<Result<Vec<_>, _>>()?;
    let mut last_bad: Vec<Option<usize>> = alloc::vec![None; battery.len()];
    let two = Dyadic::from_int(2);
    for s in 0..=horizon {
        if s > 0 {
            let bit = trace.bits.bit(s - 1);
            delta.descend(bit)?;
            phi.descend(bit)?;
            for c in &mut ds {
                c.descend(bit)?;
            }
        }
        let dv = delta.value();
        let pv = phi.value();
        if trace.delta.get(s) != Some(&dv) {
            violations.push(TraceViolation::Replay { s });
        }
        let t = trace.t_values[s];
        if dv.ge_pow2(t as i64 + 2) {
            violations.push(TraceViolation::DeltaBound { s });
        }
        if dv < pv || dv > &pv + &two {
            violations.push(TraceViolation::Sandwich { s });
        }
        for (e, c) in ds.iter().enumerate() {
            let v = c.value();
            if v > pv.scale_pow2(e as i64) {
                violations.push(TraceViolation::Domination { e, s });
            }
            let h = battery.entries[e].h.try_eval(s as u64)?;
            if v.ge_pow2(i64::try_from(h).unwrap_or(i64::MAX)) {
                last_bad[e] = Some(s);
            }
        }
    }
    // Once case 1 occurs at s₁ with T(ξ↾s₁) ≥ e, the gap holds from s₁ + 1 on.
    let mut gap_from = Vec::with_capacity(battery.len());
    for (e, entry) in battery.entries.iter().enumerate() {
        let start = (0..horizon).find(|&s| trace.case1[s] && trace.t_values[s] >= e as u64).map(|s| s + 1);
        if let Some(start) = start {
            for s in start..=horizon {
                if e as u64 + trace.t_values[s] + 2 >= entry.h.try_eval(s as u64)? {
                    violations.push(TraceViolation::Gap { e, s });
                }
            }
        }
        gap_from.push(start);
    }
    let thresholds = last_bad
        .iter()
        .map(|bad| match bad {
            None => Some(0),
            Some(s) if *s < horizon => Some(s + 1),
            Some(_) => None,
        })
        .collect();
    Ok(TraceReport { horizon, case1_count: trace.case1_count(), thresholds, gap_from, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::martingales::lln_martingale;
    use alloc::vec;

    fn half_up() -> OrderFn {
        OrderFn::linear_ceil(1, 2, 0)
    }

    fn immediate(d: DyadicMartingale, h: OrderFn) -> Battery {
        Battery::new(vec![BatteryEntry { d: Arc::new(d), h, tau: OrderFn::constant(0) }], 6).unwrap()
    }

    fn lln_half() -> DyadicMartingale {
        lln_martingale("1/2".parse().unwrap()).unwrap()
    }

    #[test]
    fn case1_examples() {
        let battery = immediate(lln_half(), half_up());
        assert!(case1_holds(7, 0, &battery).unwrap());
        assert!(!case1_holds(6, 0, &battery).unwrap());
        let empty = Battery::new(vec![], 6).unwrap();
        assert!(case1_holds(0, 0, &empty).unwrap());
        assert!(case1_holds(3, 9, &empty).unwrap());
    }

    #[test]
    fn hidden_values_block_case1() {
        let b =
            Battery::new(vec![BatteryEntry { d: Arc::new(lln_half()), h: half_up(), tau: OrderFn::constant(1000) }], 4)
                .unwrap();
        assert!(!case1_holds(50, 0, &b).unwrap());
        let trace = build_xi(&b, 32).unwrap();
        assert_eq!(trace.case1_count(), 0);
    }

    #[test]
    fn single_lln_trace() {
        let battery = immediate(lln_half(), half_up());
        let trace = build_xi(&battery, 16).unwrap();
        assert_eq!(trace.case1.iter().position(|&c| c), Some(7));
        assert_eq!(trace.f_values[8], Dyadic::from_int(2));
        assert_eq!(trace.t_values[8], 1);
        let report = verify_trace(&trace, &battery).unwrap();
        assert!(report.passed(), "{report:?}");
        assert!(report.thresholds[0].is_some());
    }

    #[test]
    fn empty_battery_always_doubles() {
        let battery = Battery::new(vec![], 6).unwrap();
        let trace = build_xi(&battery, 8).unwrap();
        assert_eq!(trace.bits, BitString::repeat(false, 8));
        assert_eq!(trace.f_values[8], Dyadic::pow2(8));
        assert!(trace.capped.iter().all(|&c| c));
        assert!(verify_trace(&trace, &battery).unwrap().passed());
    }

    #[test]
    fn identity_order_fires_at_four() {
        let battery = immediate(lln_half(), OrderFn::identity());
        let trace = build_xi(&battery, 8).unwrap();
        assert_eq!(trace.case1.iter().position(|&c| c), Some(4));
    }

    #[test]
    fn two_lln_entries() {
        let battery = Battery::with_default_schedules(
            vec![
                (Arc::new(lln_half()), half_up()),
                (Arc::new(lln_martingale("3/4".parse().unwrap()).unwrap()), half_up()),
            ],
            6,
        )
        .unwrap();
        let trace = build_xi(&battery, 256).unwrap();
        let report = verify_trace(&trace, &battery).unwrap();
        assert!(report.passed(), "{:?}", report.violations);
        assert!(report.thresholds.iter().all(Option::is_some));
        assert!(report.case1_count >= 1);
    }

    #[test]
    fn unfair_entry_is_rejected() {
        let mut values = alloc::collections::BTreeMap::new();
        values.insert(BitString::empty(), Dyadic::one());
        values.insert("0".parse().unwrap(), Dyadic::from_int(2));
        let bad = DyadicMartingale::table(values).unwrap();
        let err = Battery::new(vec![BatteryEntry { d: Arc::new(bad), h: half_up(), tau: OrderFn::constant(0) }], 3);
        assert_eq!(err.unwrap_err(), BatteryError::Unfair(0));
    }
}
