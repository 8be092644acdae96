use alloc::collections::BTreeSet;
use alloc::vec::Vec;

use super::{BitString, Dyadic};

/// A clopen subset of Cantor space, given by finitely many cylinder generators.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct ClopenSet {
    generators: BTreeSet<BitString>,
    prefix_free: bool,
}

impl ClopenSet {
    pub fn empty() -> Self {
        Self { generators: BTreeSet::new(), prefix_free: true }
    }

    pub fn full() -> Self {
        Self::new([BitString::empty()])
    }

    pub fn new(generators: impl IntoIterator<Item = BitString>) -> Self {
        let generators: BTreeSet<BitString> = generators.into_iter().collect();
        let prefix_free = is_prefix_free(&generators);
        Self { generators, prefix_free }
    }

    pub fn generators(&self) -> &BTreeSet<BitString> {
        &self.generators
    }

    pub fn is_prefix_free(&self) -> bool {
        self.prefix_free
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    /// The minimal presentation of the same open set.
    pub fn minimal(&self) -> ClopenSet {
        if self.prefix_free {
            return self.clone();
        }
        minimal_prefix_free(self.generators.iter().cloned())
    }

    /// `μ([X])`, summed over the minimal presentation.
    pub fn measure(&self) -> Dyadic {
        let minimal = self.minimal();
        minimal.generators.iter().map(|g| Dyadic::pow2(-(g.len() as i64))).sum()
    }

    /// True iff the sequence space point extending `x` lies in `[X]` for
    /// every extension, i.e. some generator is a prefix of `x`.
    pub fn covers(&self, x: &BitString) -> bool {
        if self.generators.len() <= x.len() {
            self.generators.iter().any(|g| g.is_prefix_of(x))
        } else {
            x.prefixes().any(|p| self.generators.contains(&p))
        }
    }

    /// `2^{|x|} · μ([X] ∩ [x])`.
    pub fn conditional_measure(&self, x: &BitString) -> Dyadic {
        if self.covers(x) {
            return Dyadic::one();
        }
        // No generator is a prefix of x, so minimality can be decided among
        // the extensions of x alone.
        let inside = self.generators.iter().filter(|g| x.is_proper_prefix_of(g)).cloned();
        let inside = if self.prefix_free { ClopenSet::new(inside) } else { minimal_prefix_free(inside) };
        inside.generators.iter().map(|g| Dyadic::pow2(-((g.len() - x.len()) as i64))).sum()
    }

    /// Generator-wise difference `X ∖ Y`.
    pub fn difference(&self, other: &ClopenSet) -> ClopenSet {
        ClopenSet::new(self.generators.difference(&other.generators).cloned())
    }

    pub fn union(&self, other: &ClopenSet) -> ClopenSet {
        ClopenSet::new(self.generators.union(&other.generators).cloned())
    }

    pub fn contains(&self, x: &BitString) -> bool {
        self.generators.contains(x)
    }

    pub fn iter(&self) -> impl Iterator<Item = &BitString> {
        self.generators.iter()
    }

    pub fn to_vec(&self) -> Vec<BitString> {
        self.generators.iter().cloned().collect()
    }
}

impl FromIterator<BitString> for ClopenSet {
    fn from_iter<I: IntoIterator<Item = BitString>>(iter: I) -> Self {
        ClopenSet::new(iter)
    }
}

fn is_prefix_free(set: &BTreeSet<BitString>) -> bool {
    set.iter().all(|x| (0..x.len()).all(|i| !set.contains(&x.restrict(i))))
}

/// The `≼`-minimal elements of `xs`.
pub fn minimal_prefix_free(xs: impl IntoIterator<Item = BitString>) -> ClopenSet {
    let sorted: BTreeSet<BitString> = xs.into_iter().collect();
    let mut kept = BTreeSet::new();
    // llex order visits every prefix before its extensions.
    for x in sorted {
        if !(0..x.len()).any(|i| kept.contains(&x.restrict(i))) {
            kept.insert(x);
        }
    }
    ClopenSet { generators: kept, prefix_free: true }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(xs: &[&str]) -> ClopenSet {
        xs.iter().map(|s| s.parse().unwrap()).collect()
    }

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    #[test]
    fn measure_examples() {
        assert_eq!(set(&["0", "1"]).measure(), Dyadic::one());
        assert_eq!(set(&["0", "00"]).measure(), d("1/2"));
        assert_eq!(set(&["01", "1"]).measure(), d("3/4"));
        assert_eq!(ClopenSet::full().measure(), Dyadic::one());
        assert_eq!(ClopenSet::empty().measure(), Dyadic::zero());
    }

    #[test]
    fn conditional_examples() {
        let a = set(&["0"]);
        assert_eq!(a.conditional_measure(&"".parse().unwrap()), d("1/2"));
        assert_eq!(a.conditional_measure(&"00".parse().unwrap()), Dyadic::one());
        assert_eq!(set(&["1"]).conditional_measure(&"00".parse().unwrap()), Dyadic::zero());
    }

    #[test]
    fn minimal_examples() {
        assert_eq!(minimal_prefix_free(set(&["0", "01", "11"]).to_vec()), set(&["0", "11"]));
        assert_eq!(minimal_prefix_free(Vec::new()), ClopenSet::empty());
        assert_eq!(minimal_prefix_free(set(&["10", "100", "101"]).to_vec()), set(&["10"]));
        assert!(!set(&["0", "01"]).is_prefix_free());
    }

    /// Every prefix-free set over strings of length ≤ 3 (exhaustive), and
    /// a sample at length ≤ 5, has measure `Σ 2^{-|x|}`.
    #[test]
    fn additivity_on_prefix_free_sets() {
        let universe: Vec<BitString> = BitString::all_up_to(3).collect();
        for mask in 0u64..1 << universe.len() {
            let chosen: Vec<_> =
                universe.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, x)| x.clone()).collect();
            let x = ClopenSet::new(chosen.clone());
            if !x.is_prefix_free() {
                continue;
            }
            let direct: Dyadic = chosen.iter().map(|g| Dyadic::pow2(-(g.len() as i64))).sum();
            assert_eq!(x.measure(), direct);
        }
    }

    fn arb_set(max_len: usize) -> impl Strategy<Value = ClopenSet> {
        let s = proptest::collection::vec(any::<bool>(), 0..=max_len).prop_map(BitString::from_bits);
        proptest::collection::vec(s, 0..8).prop_map(ClopenSet::new)
    }

    /// Measure computed by counting covered strings at a fixed depth.
    fn measure_by_counting(x: &ClopenSet, depth: usize) -> Dyadic {
        let covered = BitString::all_of_length(depth).filter(|y| x.covers(y)).count();
        Dyadic::new(covered as i64, depth as u64)
    }

    proptest! {
        #[test]
        fn measure_is_presentation_independent(x in arb_set(5)) {
            prop_assert_eq!(x.measure(), x.minimal().measure());
            prop_assert_eq!(x.measure(), measure_by_counting(&x, 5));
            prop_assert!(x.minimal().is_prefix_free());
        }

        #[test]
        fn conditional_matches_counting(a in arb_set(6), x in proptest::collection::vec(any::<bool>(), 0..=6)) {
            let x = BitString::from_bits(x);
            let depth = 6;
            let below = BitString::all_of_length(depth - x.len())
                .filter(|tail| a.covers(&x.concat(tail)))
                .count();
            let expected = Dyadic::new(below as i64, (depth - x.len()) as u64);
            prop_assert_eq!(a.conditional_measure(&x), expected);
        }
    }
}
