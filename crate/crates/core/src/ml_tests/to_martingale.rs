//! From a staged test to a martingale that succeeds on everything it covers.
//!
//! With `g(k) = f(5k)` and `C^k_n = X_n ∖ X_{n,g(k)}`, the martingale is
//! `B(x) = Σ_{n,k} 2^k μ(C^k_n | x)`. It is approximated by cutting the sums at
//! `n ≤ r+i+2k+3` and `k ≤ r+i+4` and replacing `X_n` by `X_{n,f(9r+9i+32)}`,
//! where `r = |x|`; each cut costs at most `2^{-i-2}`, `2^{-i-2}` and
//! `2^{-i-1}`.

use alloc::sync::Arc;
use alloc::vec::Vec;

use super::family::{verify_family, FamilyReport, StagedTestFamily};
use crate::martingales::{
    conditional_martingale, round_to_dyadic, Approximant, DyadicMartingale, EvalError, Martingale, PointApproximant,
};
use crate::numeric::{BitString, ClopenSet, Dyadic, Rational};
use crate::orders::{OrderError, OrderFn};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConversionError {
    #[error("family fails verification: {0:?}")]
    InvalidFamily(FamilyReport),
    #[error(transparent)]
    Order(#[from] OrderError),
}

#[derive(Debug, Clone)]
struct Member {
    n: u64,
    z: BitString,
    stage: u64,
    /// Least `k` with `g(k) ≥ stage`; `z ∈ C^k_n` exactly for `k < k_z`.
    k_z: u64,
}

/// The approximations `F(x, i)` together with the intermediate sums `B1`, `B2`
/// and the exact `B`.
#[derive(Debug, Clone)]
pub struct BundleApproximant {
    members: Vec<Member>,
    f: OrderFn,
}

/// `μ([z] | x)` for a single cylinder.
fn cylinder_given(z: &BitString, x: &BitString) -> Dyadic {
    if z.is_prefix_of(x) {
        Dyadic::one()
    } else if x.is_prefix_of(z) {
        Dyadic::pow2(x.len() as i64 - z.len() as i64)
    } else {
        Dyadic::zero()
    }
}

/// `Σ_{k=lo}^{hi} 2^k`, zero when the range is empty.
fn geometric(lo: u64, hi: Option<u64>) -> Dyadic {
    match hi {
        Some(hi) if hi >= lo => Dyadic::pow2(hi as i64 + 1) - Dyadic::pow2(lo as i64),
        _ => Dyadic::zero(),
    }
}

#[derive(Clone, Copy)]
enum Cut {
    None,
    Levels,
    LevelsAndWeights,
    Full,
}

impl BundleApproximant {
    /// The members of `X` are pairwise incomparable within a level, so the
    /// conditional measure of any subset of a level is a sum over cylinders.
    fn total(&self, x: &BitString, precision: u64, cut: Cut) -> Result<Dyadic, EvalError> {
        let r = x.len() as u64;
        let i = precision;
        let weight_cap = r + i + 4;
        let stage_cap = match cut {
            Cut::Full => Some(self.f.try_eval(9 * r + 9 * i + 32)?),
            _ => None,
        };
        let mut total = Dyadic::zero();
        for m in &self.members {
            if stage_cap.is_some_and(|cap| m.stage > cap) {
                continue;
            }
            let c = cylinder_given(&m.z, x);
            if c.is_zero() {
                continue;
            }
            // n ≤ r+i+2k+3 iff k ≥ ⌈(n − r − i − 3)/2⌉.
            let lo = match cut {
                Cut::None => 0,
                _ => m.n.saturating_sub(r + i + 3).div_ceil(2),
            };
            let hi = m.k_z.checked_sub(1);
            let hi = match cut {
                Cut::LevelsAndWeights | Cut::Full => hi.map(|h| h.min(weight_cap)),
                _ => hi,
            };
            total += &(&c * &geometric(lo, hi));
        }
        Ok(total)
    }

    /// `B(x)`.
    pub fn b_exact(&self, x: &BitString) -> Dyadic {
        self.total(x, 0, Cut::None).expect("uncut sums evaluate no order")
    }

    /// `B1(x, i)`: levels `n ≤ N(|x|, i, k)`.
    pub fn b1(&self, x: &BitString, i: u64) -> Dyadic {
        self.total(x, i, Cut::Levels).expect("level cut evaluates no order")
    }

    /// `B2(x, i)`: also weights `k ≤ |x| + i + 4`.
    pub fn b2(&self, x: &BitString, i: u64) -> Dyadic {
        self.total(x, i, Cut::LevelsAndWeights).expect("weight cut evaluates no order")
    }

    /// `F(x, i)`: also only strings enumerated by stage `f(9|x| + 9i + 32)`.
    pub fn f_approx(&self, x: &BitString, i: u64) -> Result<Dyadic, EvalError> {
        self.total(x, i, Cut::Full)
    }
}

impl PointApproximant for BundleApproximant {
    fn approx(&self, x: &BitString, precision: u64) -> Result<Dyadic, EvalError> {
        self.f_approx(x, precision)
    }

    fn exact(&self, x: &BitString) -> Option<Result<Rational, EvalError>> {
        Some(Ok(Rational::from(self.b_exact(x))))
    }
}

/// Everything produced from one test.
#[derive(Debug, Clone)]
pub struct ConversionBundle {
    /// The test actually used, after any reindexing.
    pub family: StagedTestFamily,
    /// `g(k) = f(5k)`.
    pub g: OrderFn,
    /// `h = Inv_g ∸ 1`; `B(ξ↾i) ≥ 2^{h(i)}` along covered prefixes.
    pub h: OrderFn,
    /// Least `k` with `g(k) ≥ t_max`; every `C^k_n` with `k ≥ k_cut` is empty.
    pub k_cut: u64,
    /// `B` as a sum of scaled conditional martingales.
    pub b: Arc<DyadicMartingale>,
    pub approximant: Arc<BundleApproximant>,
    /// A dyadic martingale `d` with `B ≤ d ≤ B + 2`.
    pub rounded: Arc<DyadicMartingale>,
}

/// Builds `B`, its approximations and its rounding.
///
/// The test must satisfy the strict bound `μ([X_n]) ≤ 2^{-2n}`; a test that
/// misses only that bound is reindexed (`X_n ↦ X_{2n}`) until it holds.
pub fn test_to_martingale(x: &StagedTestFamily) -> Result<ConversionBundle, ConversionError> {
    let mut family = x.clone();
    loop {
        let report = verify_family(&family, true)?;
        if report.passed() {
            break;
        }
        if report.fails_only_strict_bound() && family.len() > 1 {
            family = family.reindex();
            continue;
        }
        return Err(ConversionError::InvalidFamily(report));
    }
    let g = family.f().compose(&OrderFn::linear(5, 1, 0));
    let h = g.inverse_order().trunc_sub(1);
    let k_cut = g.inverse(family.t_max())?;

    let mut members = Vec::new();
    for n in 0..family.len() as u64 {
        for (z, stage) in family.entries(n) {
            members.push(Member { n, z: z.clone(), stage, k_z: g.inverse(stage)? });
        }
    }
    let mut parts = Vec::new();
    for n in 0..family.len() as u64 {
        for k in 0..k_cut {
            let gk = g.try_eval(k)?;
            let c: ClopenSet = family.entries(n).filter(|&(_, s)| s > gk).map(|(z, _)| z.clone()).collect();
            if !c.is_empty() {
                parts.push(Arc::new(DyadicMartingale::scaled(Arc::new(conditional_martingale(c)), k as i64)));
            }
        }
    }
    let approximant = Arc::new(BundleApproximant { members, f: family.f().clone() });
    let rounded = Arc::new(round_to_dyadic(Approximant::Point(approximant.clone())));
    Ok(ConversionBundle { family, g, h, k_cut, b: Arc::new(DyadicMartingale::Sum(parts)), approximant, rounded })
}

/// What happens at the first prefix of `ξ` lying in `X_n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HitWitness {
    pub n: u64,
    /// Least `i` with `ξ↾i ∈ X_n`.
    pub i_n: u64,
    /// `k_n = h(i_n)`.
    pub k_n: u64,
    /// The bound is only guaranteed for `n > g(0)`.
    pub asserted: bool,
    /// `ξ↾i_n ∈ C^{k_n}_n`.
    pub covered: bool,
    pub capital: Dyadic,
    /// `B(ξ↾i_n) ≥ 2^{k_n}`.
    pub holds: bool,
}

/// One witness per level hit by `prefix`.
pub fn hitting_witness(bundle: &ConversionBundle, prefix: &BitString) -> Result<Vec<HitWitness>, EvalError> {
    let g0 = bundle.g.try_eval(0)?;
    let mut out = Vec::new();
    for n in 0..bundle.family.len() as u64 {
        let Some(i) = bundle.family.first_hit(n, prefix) else { continue };
        let x = prefix.restrict(i);
        let i_n = i as u64;
        let k_n = bundle.h.try_eval(i_n)?;
        let stage = bundle.family.stage_of(n, &x).expect("first hit lies in the level");
        let covered = stage > bundle.g.try_eval(k_n)?;
        let capital = bundle.b.eval(&x)?;
        let holds = capital.ge_pow2(k_n as i64);
        out.push(HitWitness { n, i_n, k_n, asserted: n > g0, covered, capital, holds });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::martingales::{check_fairness, Martingale};
    use crate::ml_tests::family::tests::{b, two_stage};
    use alloc::vec;

    /// `Σ_{n,k} 2^k μ(S^k_n | x)` straight from the definition, with the level
    /// sets `S^k_n` supplied by `set`.
    fn definitional(
        x: &StagedTestFamily,
        s: &BitString,
        keep: impl Fn(u64, u64) -> bool,
        set: impl Fn(u64, u64) -> ClopenSet,
    ) -> Dyadic {
        let mut total = Dyadic::zero();
        for n in 0..x.len() as u64 {
            for k in 0..64 {
                if keep(n, k) {
                    total += &set(n, k).conditional_measure(s).scale_pow2(k as i64);
                }
            }
        }
        total
    }

    fn sample() -> StagedTestFamily {
        StagedTestFamily::new(
            vec![
                vec![(1, b("0")), (5, b("10")), (6, b("110")), (12, b("11100000"))],
                vec![(3, b("000")), (8, b("0100")), (13, b("01010000"))],
                vec![(5, b("00000")), (13, b("0010000"))],
            ],
            OrderFn::linear(1, 1, 3),
        )
        .unwrap()
    }

    #[test]
    fn closed_forms_match_definitions() {
        let bundle = test_to_martingale(&sample()).unwrap();
        let x = &bundle.family;
        let g = &bundle.g;
        let c = |n: u64, k: u64| {
            let all = x.limit(n);
            let early = x.stage_set(n, g.eval(k));
            all.difference(&early)
        };
        for s in BitString::all_up_to(8) {
            assert_eq!(bundle.approximant.b_exact(&s), definitional(x, &s, |_, _| true, c));
            assert_eq!(bundle.b.eval(&s).unwrap(), bundle.approximant.b_exact(&s));
            for i in 0..4u64 {
                let r = s.len() as u64;
                let b1 = definitional(x, &s, |n, k| n <= r + i + 2 * k + 3, c);
                let b2 = definitional(x, &s, |n, k| n <= r + i + 2 * k + 3 && k <= r + i + 4, c);
                let gbar = x.f().eval(9 * r + 9 * i + 32);
                let d = |n: u64, k: u64| x.stage_set(n, gbar).difference(&x.stage_set(n, g.eval(k)));
                let f = definitional(x, &s, |n, k| n <= r + i + 2 * k + 3 && k <= r + i + 4, d);
                assert_eq!(bundle.approximant.b1(&s, i), b1);
                assert_eq!(bundle.approximant.b2(&s, i), b2);
                assert_eq!(bundle.approximant.f_approx(&s, i).unwrap(), f);
                let exact = bundle.approximant.b_exact(&s);
                assert!(&exact - &b1 <= Dyadic::pow2(-(i as i64) - 2));
                assert!(&b1 - &b2 <= Dyadic::pow2(-(i as i64) - 2));
                assert!(&b2 - &f <= Dyadic::pow2(-(i as i64) - 1));
            }
        }
    }

    #[test]
    fn b_is_a_martingale_and_rounding_dominates() {
        let bundle = test_to_martingale(&sample()).unwrap();
        assert!(check_fairness(bundle.b.as_ref(), 8).unwrap());
        assert!(check_fairness(bundle.rounded.as_ref(), 8).unwrap());
        for s in BitString::all_up_to(8) {
            let exact = bundle.b.eval(&s).unwrap();
            let d = bundle.rounded.eval(&s).unwrap();
            assert!(exact <= d && d <= &exact + &Dyadic::from_int(2), "{s}");
        }
        assert!(bundle.b.initial_capital().unwrap() <= Dyadic::from_int(6));
    }

    #[test]
    fn hits_reach_their_thresholds() {
        let bundle = test_to_martingale(&sample()).unwrap();
        for xi in BitString::all_of_length(8) {
            for w in hitting_witness(&bundle, &xi).unwrap() {
                if w.asserted {
                    assert!(w.covered && w.holds, "{w:?}");
                }
            }
        }
    }

    #[test]
    fn two_stage_needs_no_reindexing() {
        let bundle = test_to_martingale(&two_stage()).unwrap();
        assert_eq!(bundle.family.reindexed(), 0);
        assert_eq!(bundle.g.eval(1), 8);
        assert_eq!(bundle.k_cut, 1);
    }

    #[test]
    fn loose_family_is_reindexed() {
        let x = StagedTestFamily::new(
            vec![vec![(1, b("0"))], vec![(1, b("1"))], vec![(5, b("11110"))]],
            OrderFn::linear(1, 1, 3),
        )
        .unwrap();
        let bundle = test_to_martingale(&x).unwrap();
        assert_eq!(bundle.family.reindexed(), 1);
        let bad = StagedTestFamily::new(vec![vec![(1, b("0")), (2, b("01"))]], OrderFn::identity()).unwrap();
        assert!(matches!(test_to_martingale(&bad), Err(ConversionError::InvalidFamily(_))));
    }
}
