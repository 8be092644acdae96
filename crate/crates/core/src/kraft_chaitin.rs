//! Codeword assignment for bounded request sets, and machines built from
//! staged tests.
//!
//! Requests are served in order. The residual set `R` starts as `{ε}`; a
//! request of length `r` consumes the longest `z ∈ R` with `|z| ≤ r`, takes the
//! codeword `z0^{r−|z|}` and returns the siblings `z0^i1` (`i < r − |z|`) to
//! `R`. All strings in `R` keep distinct lengths, which is what makes every
//! request with total weight `≤ 1` satisfiable.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::machines::{Entry, MachineError, MachineTable};
use crate::ml_tests::StagedTestFamily;
use crate::numeric::{sqsubseteq_cmp, BitString, ClopenSet, Dyadic};
use crate::orders::{Extension, OrderError, OrderFn};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KcError {
    #[error("request weight {0} exceeds 1")]
    WeightExceeded(Dyadic),
    #[error("request {0} asks for a codeword of length 0")]
    ZeroLength(usize),
    #[error("request ({m}, `{x}`) has |x| − m + 1 < 1")]
    IndexTooLarge { m: u64, x: BitString },
    #[error("no residual string of length ≤ {length} at step {step}")]
    Infeasible { step: usize, length: u64 },
    #[error("residual strings share a length at step {step}")]
    ResidualLengthsCollide { step: usize },
    #[error("μ([X_{n}]) = {measure} exceeds 2^-{bound}", bound = 2 * n)]
    MeasureBoundViolated { n: u64, measure: Dyadic },
    #[error("no stratum up to {0} contains a request")]
    StratumSearchExhausted(u64),
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Order(#[from] OrderError),
}

/// A request for a codeword of `length` bits describing `payload`.
///
/// Requests drawn from a test carry the level `index = m` and ask for
/// `|x| − m + 1` bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Request {
    pub index: Option<u64>,
    pub payload: BitString,
    pub length: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RequestSet {
    requests: Vec<Request>,
}

impl RequestSet {
    /// Requests served in the given order.
    pub fn generic(requests: impl IntoIterator<Item = (u64, BitString)>) -> Self {
        let requests = requests.into_iter().map(|(length, payload)| Request { index: None, payload, length }).collect();
        Self { requests }
    }

    /// Requests `(|x| − m + 1, x)` sorted by the well-ordering on `(m, x)`.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u64, BitString)>) -> Result<Self, KcError> {
        let mut pairs: Vec<(u64, BitString)> = pairs.into_iter().collect();
        pairs.sort_by(|a, b| sqsubseteq_cmp((a.0, &a.1), (b.0, &b.1)));
        pairs.dedup();
        let requests = pairs
            .into_iter()
            .map(|(m, x)| {
                let length = (x.len() as u64 + 1)
                    .checked_sub(m)
                    .filter(|&r| r >= 1)
                    .ok_or_else(|| KcError::IndexTooLarge { m, x: x.clone() })?;
                Ok(Request { index: Some(m), payload: x, length })
            })
            .collect::<Result<_, KcError>>()?;
        Ok(Self { requests })
    }

    pub fn requests(&self) -> &[Request] {
        &self.requests
    }

    pub fn len(&self) -> usize {
        self.requests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.requests.is_empty()
    }

    /// `γ_L = Σ 2^{-length}`.
    pub fn weight(&self) -> Dyadic {
        self.requests.iter().map(|r| Dyadic::pow2(-(r.length as i64))).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KcStep {
    pub request: Request,
    pub codeword: BitString,
    pub consumed: BitString,
    /// `R` after the step, shortest first.
    pub residual: Vec<BitString>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KcResult {
    pub steps: Vec<KcStep>,
    pub table: MachineTable,
}

impl KcResult {
    pub fn codewords(&self) -> impl Iterator<Item = &BitString> {
        self.steps.iter().map(|s| &s.codeword)
    }
}

/// Serves every request in order; halt times are the 1-based step indices.
pub fn kc_assign(l: &RequestSet) -> Result<KcResult, KcError> {
    let weight = l.weight();
    if weight > Dyadic::one() {
        return Err(KcError::WeightExceeded(weight));
    }
    // Keyed by length; the distinct-lengths invariant makes this a set of strings.
    let mut residual: BTreeMap<u64, BitString> = BTreeMap::from([(0, BitString::empty())]);
    let mut steps = Vec::with_capacity(l.len());
    let mut entries = Vec::with_capacity(l.len());
    for (step, request) in l.requests.iter().enumerate() {
        let r = request.length;
        if r == 0 {
            return Err(KcError::ZeroLength(step));
        }
        let (&zlen, _) = residual.range(..=r).next_back().ok_or(KcError::Infeasible { step, length: r })?;
        let z = residual.remove(&zlen).expect("key just found");
        let mut codeword = z.clone();
        for i in 0..r - zlen {
            let mut sibling = codeword.clone();
            sibling.push(true);
            if residual.insert(zlen + i + 1, sibling).is_some() {
                return Err(KcError::ResidualLengthsCollide { step });
            }
            codeword.push(false);
        }
        entries.push(Entry { code: codeword.clone(), out: request.payload.clone(), halt_time: step as u64 + 1 });
        steps.push(KcStep {
            request: request.clone(),
            codeword,
            consumed: z,
            residual: residual.values().cloned().collect(),
        });
    }
    Ok(KcResult { steps, table: MachineTable::new(entries)? })
}

/// `X(r) = {(m, x) : x ∈ X_{m, f(3r+1)}, |x| ≤ 2r, m ≤ r}`, sorted by `⊑`.
pub fn stratum(x: &StagedTestFamily, r: u64) -> Result<Vec<(u64, BitString)>, OrderError> {
    let t = x.f().try_eval(r.saturating_mul(3).saturating_add(1))?;
    let mut out: Vec<(u64, BitString)> = (0..=r.min(x.len() as u64))
        .flat_map(|m| {
            x.entries(m)
                .filter(move |&(s, stage)| stage <= t && s.len() as u64 <= 2 * r)
                .map(move |(s, _)| (m, s.clone()))
        })
        .collect();
    out.sort_by(|a, b| sqsubseteq_cmp((a.0, &a.1), (b.0, &b.1)));
    Ok(out)
}

/// A machine built from a test, with halt times taken from the strata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestMachine {
    pub requests: RequestSet,
    pub assignment: KcResult,
    /// Same codewords as `assignment.table`; a request halts at
    /// `|X(r)|` for the first `r` whose stratum contains it.
    pub table: MachineTable,
}

/// Largest `r` searched when locating the first stratum of a request.
const STRATUM_SEARCH_LIMIT: u64 = 1 << 12;

/// Assigns codewords to `{(|x| − m + 1, x) : x ∈ X_m}` in `⊑` order.
pub fn build_machine_from_test(x: &StagedTestFamily) -> Result<TestMachine, KcError> {
    for n in 0..x.len() as u64 {
        let measure = x.limit(n).measure();
        if measure > Dyadic::pow2(-2 * n as i64) {
            return Err(KcError::MeasureBoundViolated { n, measure });
        }
    }
    let pairs = (0..x.len() as u64).flat_map(|m| x.entries(m).map(move |(s, _)| (m, s.clone())));
    let requests = RequestSet::from_pairs(pairs)?;
    let assignment = kc_assign(&requests)?;

    let mut sizes: BTreeMap<u64, u64> = BTreeMap::new();
    let mut entries = Vec::with_capacity(assignment.steps.len());
    for step in &assignment.steps {
        let m = step.request.index.expect("test requests carry their level");
        let s = &step.request.payload;
        let stage = x.stage_of(m, s).expect("request drawn from the family");
        let r = first_stratum(x, m, s.len() as u64, stage)?;
        let size = match sizes.get(&r) {
            Some(&size) => size,
            None => {
                let size = stratum(x, r)?.len() as u64;
                sizes.insert(r, size);
                size
            }
        };
        entries.push(Entry { code: step.codeword.clone(), out: s.clone(), halt_time: size });
    }
    let table = MachineTable::new(entries)?;
    Ok(TestMachine { requests, assignment, table })
}

fn first_stratum(x: &StagedTestFamily, m: u64, len: u64, stage: u64) -> Result<u64, KcError> {
    let mut r = m.max(len.div_ceil(2));
    while x.f().try_eval(3 * r + 1)? < stage {
        r += 1;
        if r > STRATUM_SEARCH_LIMIT {
            return Err(KcError::StratumSearchExhausted(STRATUM_SEARCH_LIMIT));
        }
    }
    Ok(r)
}

/// `h(r) = |X(f(3r+1) + 1)|` for `r ≤ rmax`, extended as a constant.
///
/// Every request `(m, x)` with `m ≤ r` and `x ∈ X_{m,f(3r+1)}` has
/// `|x| − m + 1 ≤ f(3r+1) + 1`, so it lies in that stratum and has halted by
/// `h(r)`.
pub fn stratum_clock(x: &StagedTestFamily, rmax: u64) -> Result<OrderFn, OrderError> {
    let values = (0..=rmax)
        .map(|r| {
            let big_r = x.f().try_eval(3 * r + 1)? + 1;
            Ok(stratum(x, big_r)?.len() as u64)
        })
        .collect::<Result<Vec<_>, OrderError>>()?;
    Ok(OrderFn::table(values, Extension::Constant))
}

/// Output of the machine on input `w`, computed by serving only the requests
/// of `X(|w|)` in `⊑` order.
pub fn replay_codeword(x: &StagedTestFamily, w: &BitString) -> Result<Option<(u64, BitString)>, KcError> {
    let pairs = stratum(x, w.len() as u64)?;
    let requests = RequestSet::from_pairs(pairs)?;
    let result = kc_assign(&requests)?;
    Ok(result
        .steps
        .into_iter()
        .find(|s| &s.codeword == w)
        .map(|s| (s.request.index.expect("test request"), s.request.payload)))
}

/// Codewords whose replayed output disagrees with the assignment.
pub fn replay_mismatches(x: &StagedTestFamily, built: &TestMachine) -> Result<Vec<BitString>, KcError> {
    let mut by_length: BTreeMap<u64, KcResult> = BTreeMap::new();
    let mut bad = Vec::new();
    for step in &built.assignment.steps {
        let r = step.codeword.len() as u64;
        if let alloc::collections::btree_map::Entry::Vacant(slot) = by_length.entry(r) {
            slot.insert(kc_assign(&RequestSet::from_pairs(stratum(x, r)?)?)?);
        }
        let replayed = by_length[&r].steps.iter().find(|s| s.codeword == step.codeword);
        let agrees = replayed.is_some_and(|s| s.request == step.request);
        if !agrees {
            bad.push(step.codeword.clone());
        }
    }
    Ok(bad)
}

/// The prefix-free rewriting of one level of a test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixFreeStages {
    /// `Y_n`; each `y` becomes available at stage `|y|`.
    pub y: ClopenSet,
    /// `[X_{n,s}] ⊆ [Y_n ∩ {|y| ≤ s}]` for all `s ≤ tmax`.
    pub inclusion_holds: bool,
    /// Stages `t ≤ tmax` where `[X_{n,t}]` and `[Y_n ∩ {|y| ≤ t}]` differ.
    pub slice_mismatches: Vec<u64>,
    /// `[X_n] = [Y_n]`, when all of `X_n` appears by `tmax`.
    pub same_open_set: Option<bool>,
}

/// `y ∈ Y_n` iff no prefix of `y` lies in `X_{n,|y|−1}` and some prefix lies
/// in `X_{n,|y|}`.
pub fn prefix_free_stages(x: &StagedTestFamily, n: u64, tmax: u64) -> PrefixFreeStages {
    let stage_of = |s: &BitString| x.stage_of(n, s);
    let earliest_prefix_stage = |y: &BitString| y.prefixes().filter_map(|p| stage_of(&p)).min();
    let mut ys = BTreeSet::new();
    for (g, stage) in x.entries(n) {
        if stage > tmax {
            continue;
        }
        let extra = (stage - g.len() as u64) as usize;
        for tail in BitString::all_of_length(extra) {
            let y = g.concat(&tail);
            // A prefix of y is in X_{n,t} iff its stage is ≤ t.
            if earliest_prefix_stage(&y) == Some(y.len() as u64) {
                ys.insert(y);
            }
        }
    }
    let y = ClopenSet::new(ys);
    let upto = |t: u64| -> ClopenSet { y.iter().filter(|s| s.len() as u64 <= t).cloned().collect() };
    let mut inclusion_holds = true;
    let mut slice_mismatches = Vec::new();
    for t in 0..=tmax {
        let xs = x.stage_set(n, t);
        let ys_t = upto(t);
        if !covers_all(&ys_t, &xs) {
            inclusion_holds = false;
        }
        if !(covers_all(&ys_t, &xs) && covers_all(&xs, &ys_t)) {
            slice_mismatches.push(t);
        }
    }
    let same_open_set = (x.entries(n).all(|(_, s)| s <= tmax)).then(|| {
        let limit = x.limit(n);
        covers_all(&y, &limit) && covers_all(&limit, &y)
    });
    PrefixFreeStages { y, inclusion_holds, slice_mismatches, same_open_set }
}

/// `[small] ⊆ [big]`.
fn covers_all(big: &ClopenSet, small: &ClopenSet) -> bool {
    small.iter().all(|s| {
        big.covers(s) || {
            // [s] ⊆ [big] also when every extension of s at the depth of big is covered.
            let depth = big.iter().map(BitString::len).max().unwrap_or(0);
            depth > s.len() && BitString::all_of_length(depth - s.len()).all(|t| big.covers(&s.concat(&t)))
        }
    })
}

/// Orders requests the way [`RequestSet::from_pairs`] serves them.
pub fn request_cmp(a: &Request, b: &Request) -> Ordering {
    sqsubseteq_cmp((a.index.unwrap_or(0), &a.payload), (b.index.unwrap_or(0), &b.payload))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machines::{verify_measure_computable, Time};
    use crate::ml_tests::StagedTestFamily;
    use alloc::vec;
    use proptest::prelude::*;

    fn b(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn lengths(ls: &[u64]) -> RequestSet {
        RequestSet::generic(ls.iter().map(|&l| (l, BitString::empty())))
    }

    fn codewords(r: &KcResult) -> Vec<String> {
        use alloc::string::{String, ToString};
        let v: Vec<String> = r.codewords().map(|c| c.to_string()).collect();
        v
    }

    use alloc::string::String;

    #[test]
    fn assignment_examples() {
        assert_eq!(codewords(&kc_assign(&lengths(&[1, 2, 3])).unwrap()), ["0", "10", "110"]);
        let r = kc_assign(&lengths(&[2, 1, 3])).unwrap();
        assert_eq!(codewords(&r), ["00", "1", "010"]);
        assert_eq!(r.table.omega(), "7/8".parse().unwrap());
        assert!(matches!(kc_assign(&lengths(&[1, 1, 1])), Err(KcError::WeightExceeded(_))));
    }

    fn two_stage() -> StagedTestFamily {
        StagedTestFamily::new(vec![vec![(1, b("0"))], vec![(4, b("00"))]], OrderFn::linear(1, 1, 3)).unwrap()
    }

    #[test]
    fn stratum_examples() {
        let x = two_stage();
        assert_eq!(stratum(&x, 2).unwrap(), vec![(0, b("0")), (1, b("00"))]);
        assert!(stratum(&x, 0).unwrap().is_empty());
        let empty = StagedTestFamily::new(vec![], OrderFn::identity()).unwrap();
        assert!((0..5).all(|r| stratum(&empty, r).unwrap().is_empty()));
    }

    #[test]
    fn machine_from_two_stage_test() {
        let x = two_stage();
        let built = build_machine_from_test(&x).unwrap();
        let lens: Vec<u64> = built.requests.requests().iter().map(|r| r.length).collect();
        assert_eq!(lens, [2, 2]);
        assert_eq!(codewords(&built.assignment), ["00", "01"]);
        assert_eq!(built.table.omega(), "1/2".parse().unwrap());
        assert_eq!(built.table.omega(), built.requests.weight());
        assert!(replay_mismatches(&x, &built).unwrap().is_empty());
        assert_eq!(replay_codeword(&x, &b("01")).unwrap(), Some((1, b("00"))));
    }

    #[test]
    fn single_request_and_bound_violation() {
        let one = StagedTestFamily::new(vec![vec![], vec![(2, b("00"))]], OrderFn::linear(1, 1, 3)).unwrap();
        let built = build_machine_from_test(&one).unwrap();
        assert_eq!(codewords(&built.assignment), ["00"]);
        assert_eq!(built.table.omega(), "1/4".parse().unwrap());
        let heavy = StagedTestFamily::new(vec![vec![], vec![(1, b("1"))]], OrderFn::linear(1, 1, 3)).unwrap();
        assert!(matches!(build_machine_from_test(&heavy), Err(KcError::MeasureBoundViolated { n: 1, .. })));
    }

    #[test]
    fn staged_omega_is_controlled() {
        let x = two_stage();
        let built = build_machine_from_test(&x).unwrap();
        let h = stratum_clock(&x, 8).unwrap();
        verify_measure_computable(&built.table, &h, 8).unwrap();
        assert_eq!(built.table.omega_at(Time::At(h.eval(0))), built.table.omega());
    }

    #[test]
    fn prefix_free_stage_examples() {
        let early = StagedTestFamily::new(vec![vec![(1, b("0"))]], OrderFn::identity()).unwrap();
        let p = prefix_free_stages(&early, 0, 4);
        assert_eq!(p.y, ClopenSet::new([b("0")]));
        let late = StagedTestFamily::new(vec![vec![(2, b("0"))]], OrderFn::identity()).unwrap();
        let p = prefix_free_stages(&late, 0, 4);
        assert_eq!(p.y, ClopenSet::new([b("00"), b("01")]));
        assert_eq!(p.same_open_set, Some(true));
        assert!(p.inclusion_holds && p.slice_mismatches.is_empty());
        let empty = StagedTestFamily::new(vec![vec![]], OrderFn::identity()).unwrap();
        assert!(prefix_free_stages(&empty, 0, 4).y.is_empty());
    }

    /// Brute-force check that the lengths admit some prefix-free code.
    fn kraft_feasible(ls: &[u64]) -> bool {
        ls.iter().map(|&l| Dyadic::pow2(-(l as i64))).sum::<Dyadic>() <= Dyadic::one()
    }

    proptest! {
        #[test]
        fn feasible_requests_are_served_exactly(ls in proptest::collection::vec(1u64..8, 0..24)) {
            let set = lengths(&ls);
            prop_assume!(kraft_feasible(&ls));
            let r = kc_assign(&set).unwrap();
            prop_assert_eq!(r.table.omega(), set.weight());
            let max_r = ls.iter().copied().max().unwrap_or(0);
            for (step, &l) in r.steps.iter().zip(&ls) {
                prop_assert_eq!(step.codeword.len() as u64, l);
                let lens: BTreeSet<usize> = step.residual.iter().map(BitString::len).collect();
                prop_assert_eq!(lens.len(), step.residual.len());
                prop_assert!(step.residual.iter().all(|z| z.len() as u64 <= max_r + 1));
            }
        }
    }
}
