use alloc::sync::Arc;

use super::builtin::{DState, DyadicMartingale};
use super::{EvalError, Martingale, MartingaleError};
use crate::numeric::{BitString, Rational};
use crate::orders::OrderFn;

/// The savings-account transform of a dyadic martingale.
///
/// With checkpoints `f(n0) < f(n0+1) < …`, `δ` copies `d` up to length
/// `f(n0)`; past it, half of the capital held at the last checkpoint is set
/// aside and the rest follows the bets of `d`:
/// `δ(xi) = δ(x↾f(n))/2 + (δ(x) − δ(x↾f(n))/2) · d(xi)/d(x)`.
#[derive(Debug, Clone)]
pub struct Savings {
    inner: Arc<DyadicMartingale>,
    checkpoints: OrderFn,
    n0: u64,
}

#[derive(Debug, Clone)]
pub struct SavingsState {
    inner: DState,
    delta: Rational,
    /// `δ` at the most recent checkpoint at or above `f(n0)`.
    anchor: Option<Rational>,
    /// Index of the next checkpoint not yet passed.
    next: u64,
    next_len: u64,
}

impl SavingsState {
    pub fn delta(&self) -> &Rational {
        &self.delta
    }
}

pub fn savings_transform(
    inner: Arc<DyadicMartingale>,
    checkpoints: OrderFn,
    n0: u64,
) -> Result<Savings, MartingaleError> {
    if !checkpoints.is_strictly_increasing() {
        return Err(MartingaleError::CheckpointsNotStrict);
    }
    Ok(Savings { inner, checkpoints, n0 })
}

impl Savings {
    pub fn inner(&self) -> &Arc<DyadicMartingale> {
        &self.inner
    }

    pub fn checkpoints(&self) -> &OrderFn {
        &self.checkpoints
    }

    pub fn n0(&self) -> u64 {
        self.n0
    }

    /// Records `δ` as the anchor when `len` is a checkpoint.
    fn mark(&self, mut state: SavingsState, len: u64) -> Result<SavingsState, EvalError> {
        if len == state.next_len {
            state.anchor = Some(state.delta.clone());
            state.next += 1;
            state.next_len = self.checkpoints.try_eval(state.next)?;
        }
        Ok(state)
    }
}

impl Martingale for Savings {
    type Value = Rational;
    type State = SavingsState;

    fn root(&self) -> Result<SavingsState, EvalError> {
        let inner = self.inner.root()?;
        let delta = Rational::from(inner.value());
        let next_len = self.checkpoints.try_eval(self.n0)?;
        let state = SavingsState { inner, delta, anchor: None, next: self.n0, next_len };
        self.mark(state, 0)
    }

    fn child(&self, x: &BitString, state: &SavingsState, bit: bool) -> Result<SavingsState, EvalError> {
        let inner = self.inner.child(x, &state.inner, bit)?;
        let delta = match &state.anchor {
            None => Rational::from(inner.value()),
            Some(anchor) => {
                let ratio = Rational::from(inner.value())
                    .checked_div(&Rational::from(state.inner.value()))
                    .ok_or_else(|| EvalError::DivisionByZero(x.clone()))?;
                let kept = anchor.half();
                let at_risk = &state.delta - &kept;
                &kept + &(&at_risk * &ratio)
            }
        };
        let next = SavingsState { inner, delta, anchor: state.anchor.clone(), ..state.clone() };
        self.mark(next, x.len() as u64 + 1)
    }

    fn value_of(&self, state: &SavingsState) -> Rational {
        state.delta.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::martingales::{check_fairness, lln_martingale, round_to_dyadic, Approximant, Cursor};
    use crate::numeric::Dyadic;

    fn d(s: &str) -> Dyadic {
        s.parse().unwrap()
    }

    /// Direct transcription of the recurrence, walking from the root.
    fn delta_by_recurrence(inner: &DyadicMartingale, f: &OrderFn, n0: u64, x: &BitString) -> Rational {
        let r = |y: &BitString| Rational::from(inner.eval(y).unwrap());
        let start = f.eval(n0) as usize;
        if x.len() <= start {
            return r(x);
        }
        let mut delta = r(&x.restrict(start));
        let mut anchor = delta.clone();
        for len in start..x.len() {
            let (y, yi) = (x.restrict(len), x.restrict(len + 1));
            delta = &anchor.half() + &(&(&delta - &anchor.half()) * &(&r(&yi) / &r(&y)));
            if (0..=len as u64 + 1).any(|n| n >= n0 && f.eval(n) == len as u64 + 1) {
                anchor = delta.clone();
            }
        }
        delta
    }

    #[test]
    fn constant_input_is_unchanged() {
        let c = Arc::new(DyadicMartingale::constant(d("3/4")));
        let s = savings_transform(c, OrderFn::linear(2, 1, 1), 0).unwrap();
        for x in BitString::all_up_to(6) {
            assert_eq!(s.eval(&x).unwrap(), Rational::new(3, 4));
        }
    }

    #[test]
    fn matches_the_recurrence_and_stays_fair() {
        let lln = Arc::new(lln_martingale(d("1/2")).unwrap());
        let f = OrderFn::linear(2, 1, 0);
        let s = savings_transform(lln.clone(), f.clone(), 0).unwrap();
        for x in BitString::all_up_to(8) {
            assert_eq!(s.eval(&x).unwrap(), delta_by_recurrence(&lln, &f, 0, &x), "x = {x}");
        }
        assert!(check_fairness(&s, 10).unwrap());
        let (a, b) = Cursor::new(&s)
            .map(|mut c| {
                c.descend(true).unwrap();
                c.children().unwrap()
            })
            .unwrap();
        assert_eq!(&a + &b, s.eval(&"1".parse().unwrap()).unwrap().double());
    }

    #[test]
    fn growth_at_checkpoints_becomes_guaranteed_capital() {
        let lln = Arc::new(lln_martingale(d("3/4")).unwrap());
        let f = OrderFn::linear(4, 1, 0);
        let ones = BitString::repeat(true, 64);
        // lln(3/4) on ones reaches (7/4)^{4n} ≥ 2^{2n+1} from n0 = 1 on.
        let n0 = 1;
        for n in n0..=16 {
            let cap = lln.eval(&ones.restrict(f.eval(n) as usize)).unwrap();
            assert!(cap.ge_pow2(2 * n as i64 + 1));
        }
        let s = savings_transform(lln, f.clone(), n0).unwrap();
        let h = f.inverse_order().trunc_sub(1);
        for m in f.eval(n0) + 1..=f.eval(16) {
            let v = s.eval(&ones.restrict(m as usize)).unwrap();
            assert!(v.ge_pow2(h.eval(m) as i64), "m = {m}");
        }
    }

    #[test]
    fn vanishing_capital_is_reported() {
        let c = Arc::new(DyadicMartingale::constant(Dyadic::zero()));
        let s = savings_transform(c, OrderFn::identity(), 0).unwrap();
        assert!(matches!(s.eval(&"01".parse().unwrap()), Err(EvalError::DivisionByZero(_))));
    }

    #[test]
    fn rounded_savings_keeps_bounds() {
        let lln = Arc::new(lln_martingale(d("1/4")).unwrap());
        let s = Arc::new(savings_transform(lln, OrderFn::linear(3, 1, 1), 1).unwrap());
        let r = round_to_dyadic(Approximant::Floor(s.clone()));
        assert!(check_fairness(&r, 9).unwrap());
        for x in BitString::all_up_to(9) {
            let v = s.eval(&x).unwrap();
            let rv = Rational::from(r.eval(&x).unwrap());
            assert!(v <= rv && rv <= &v + &Rational::from_int(2));
        }
    }

    #[test]
    fn rejects_non_strict_checkpoints() {
        let c = Arc::new(DyadicMartingale::constant(Dyadic::one()));
        assert!(savings_transform(c, OrderFn::linear(1, 2, 0), 0).is_err());
    }
}
