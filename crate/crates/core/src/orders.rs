//! Orders `N → N`: closed forms, tables, inverses and the derived orders used
//! by the conversions.
//!
//! Arithmetic saturates at `u64::MAX`. Unboundedness is never assumed: an
//! inverse searches only up to the order's witness horizon and reports
//! [`OrderError::HorizonExhausted`] past it.

use alloc::boxed::Box;
use alloc::vec::Vec;

/// Default bound on the search performed by an inverse.
pub const DEFAULT_WITNESS_HORIZON: u64 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OrderError {
    #[error("no k ≤ {horizon} with f(k) ≥ {target}")]
    HorizonExhausted { target: u64, horizon: u64 },
}

/// How a table continues past its last entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Extension {
    /// Repeat the last value.
    Constant,
    /// Add `slope` per step after the last value.
    Affine { slope: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OrderExpr {
    /// `(mul·n + add) / div`, rounded down or up.
    Linear {
        mul: u64,
        div: u64,
        add: u64,
        ceil: bool,
    },
    /// `coef·n^exp + add`.
    Power {
        coef: u64,
        exp: u32,
        add: u64,
    },
    Table {
        values: Vec<u64>,
        extension: Extension,
    },
    /// `g(0) = f(0)`, `g(n+1) = max{g(n)+1, f(n+1)}`.
    Strictify(Box<OrderFn>),
    /// Least `k` with `f(k) ≥ n`.
    Inverse(Box<OrderFn>),
    /// `f(n) ∸ c`.
    TruncSub(Box<OrderFn>, u64),
    /// `outer(inner(n))`.
    Compose {
        outer: Box<OrderFn>,
        inner: Box<OrderFn>,
    },
    Sum(Box<OrderFn>, Box<OrderFn>),
    /// `f(n + k)`.
    Shift(Box<OrderFn>, u64),
}

/// A total function `N → N` with structurally derived monotonicity flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderFn {
    expr: OrderExpr,
    witness_horizon: u64,
}

impl OrderFn {
    pub fn from_expr(expr: OrderExpr) -> Self {
        Self { expr, witness_horizon: DEFAULT_WITNESS_HORIZON }
    }

    pub fn with_witness_horizon(mut self, horizon: u64) -> Self {
        self.witness_horizon = horizon;
        self
    }

    pub fn expr(&self) -> &OrderExpr {
        &self.expr
    }

    pub fn witness_horizon(&self) -> u64 {
        self.witness_horizon
    }

    pub fn identity() -> Self {
        Self::linear(1, 1, 0)
    }

    pub fn constant(c: u64) -> Self {
        Self::linear(0, 1, c)
    }

    /// `⌊(mul·n + add)/div⌋`.
    pub fn linear(mul: u64, div: u64, add: u64) -> Self {
        assert!(div > 0, "linear order with zero divisor");
        Self::from_expr(OrderExpr::Linear { mul, div, add, ceil: false })
    }

    /// `⌈(mul·n + add)/div⌉`.
    pub fn linear_ceil(mul: u64, div: u64, add: u64) -> Self {
        assert!(div > 0, "linear order with zero divisor");
        Self::from_expr(OrderExpr::Linear { mul, div, add, ceil: true })
    }

    pub fn power(coef: u64, exp: u32, add: u64) -> Self {
        Self::from_expr(OrderExpr::Power { coef, exp, add })
    }

    pub fn table(values: Vec<u64>, extension: Extension) -> Self {
        Self::from_expr(OrderExpr::Table { values, extension })
    }

    pub fn strictify(&self) -> Self {
        Self::from_expr(OrderExpr::Strictify(Box::new(self.clone())))
    }

    pub fn inverse_order(&self) -> Self {
        Self::from_expr(OrderExpr::Inverse(Box::new(self.clone()))).with_witness_horizon(self.witness_horizon)
    }

    pub fn trunc_sub(&self, c: u64) -> Self {
        Self::from_expr(OrderExpr::TruncSub(Box::new(self.clone()), c)).with_witness_horizon(self.witness_horizon)
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &OrderFn) -> Self {
        Self::from_expr(OrderExpr::Compose { outer: Box::new(self.clone()), inner: Box::new(inner.clone()) })
    }

    pub fn sum(&self, other: &OrderFn) -> Self {
        Self::from_expr(OrderExpr::Sum(Box::new(self.clone()), Box::new(other.clone())))
    }

    pub fn shift(&self, k: u64) -> Self {
        Self::from_expr(OrderExpr::Shift(Box::new(self.clone()), k))
    }

    /// Evaluates `f(n)`, failing only when an inner inverse runs out of horizon.
    pub fn try_eval(&self, n: u64) -> Result<u64, OrderError> {
        match &self.expr {
            OrderExpr::Linear { mul, div, add, ceil } => {
                let num = (*mul as u128) * (n as u128) + (*add as u128);
                let div = *div as u128;
                let q = if *ceil { num.div_ceil(div) } else { num / div };
                Ok(saturate(q))
            }
            OrderExpr::Power { coef, exp, add } => {
                let p = (n as u128).checked_pow(*exp).unwrap_or(u128::MAX);
                let v = p.saturating_mul(*coef as u128).saturating_add(*add as u128);
                Ok(saturate(v))
            }
            OrderExpr::Table { values, extension } => Ok(table_eval(values, extension, n)),
            OrderExpr::Strictify(f) => {
                let mut g = f.try_eval(0)?;
                for k in 1..=n {
                    g = g.saturating_add(1).max(f.try_eval(k)?);
                }
                Ok(g)
            }
            OrderExpr::Inverse(f) => f.inverse(n),
            OrderExpr::TruncSub(f, c) => Ok(f.try_eval(n)?.saturating_sub(*c)),
            OrderExpr::Compose { outer, inner } => outer.try_eval(inner.try_eval(n)?),
            OrderExpr::Sum(a, b) => Ok(a.try_eval(n)?.saturating_add(b.try_eval(n)?)),
            OrderExpr::Shift(f, k) => f.try_eval(n.saturating_add(*k)),
        }
    }

    /// Evaluates `f(n)`. Panics when an inner inverse runs out of horizon.
    pub fn eval(&self, n: u64) -> u64 {
        match self.try_eval(n) {
            Ok(v) => v,
            Err(e) => panic!("order evaluation failed: {e}"),
        }
    }

    /// `Inv_f(n)`: least `k` with `f(k) ≥ n`, searched up to the witness horizon.
    pub fn inverse(&self, n: u64) -> Result<u64, OrderError> {
        if n == 0 {
            return Ok(0);
        }
        let horizon = self.witness_horizon;
        let exhausted = OrderError::HorizonExhausted { target: n, horizon };
        if !self.is_nondecreasing() {
            for k in 0..=horizon {
                if self.try_eval(k)? >= n {
                    return Ok(k);
                }
            }
            return Err(exhausted);
        }
        // A strictly increasing f has f(n) ≥ n.
        let cap = if self.is_strictly_increasing() { horizon.min(n) } else { horizon };
        let mut hi = 1u64.min(cap);
        while self.try_eval(hi)? < n {
            if hi == cap {
                return Err(exhausted);
            }
            hi = hi.saturating_mul(2).min(cap);
        }
        let mut lo = 0u64;
        if self.try_eval(0)? >= n {
            return Ok(0);
        }
        // Invariant: f(lo) < n ≤ f(hi).
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.try_eval(mid)? >= n {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    pub fn is_nondecreasing(&self) -> bool {
        match &self.expr {
            OrderExpr::Linear { .. } | OrderExpr::Power { .. } => true,
            OrderExpr::Table { values, .. } => values.windows(2).all(|w| w[0] <= w[1]),
            OrderExpr::Strictify(_) => true,
            OrderExpr::Inverse(f) => f.is_nondecreasing(),
            OrderExpr::TruncSub(f, _) | OrderExpr::Shift(f, _) => f.is_nondecreasing(),
            OrderExpr::Compose { outer, inner } => outer.is_nondecreasing() && inner.is_nondecreasing(),
            OrderExpr::Sum(a, b) => a.is_nondecreasing() && b.is_nondecreasing(),
        }
    }

    pub fn is_strictly_increasing(&self) -> bool {
        match &self.expr {
            OrderExpr::Linear { mul, div, .. } => *mul > 0 && mul >= div,
            OrderExpr::Power { coef, exp, .. } => *coef > 0 && *exp > 0,
            OrderExpr::Table { values, extension } => {
                values.windows(2).all(|w| w[0] < w[1]) && matches!(extension, Extension::Affine { slope } if *slope > 0)
            }
            OrderExpr::Strictify(_) => true,
            OrderExpr::Inverse(_) | OrderExpr::TruncSub(..) => false,
            OrderExpr::Shift(f, _) => f.is_strictly_increasing(),
            OrderExpr::Compose { outer, inner } => outer.is_strictly_increasing() && inner.is_strictly_increasing(),
            OrderExpr::Sum(a, b) => {
                a.is_nondecreasing()
                    && b.is_nondecreasing()
                    && (a.is_strictly_increasing() || b.is_strictly_increasing())
            }
        }
    }

    /// Checks the monotonicity flags numerically on `[0, horizon]`.
    pub fn check_flags(&self, horizon: u64) -> Result<bool, OrderError> {
        let mut prev = self.try_eval(0)?;
        for n in 1..=horizon {
            let v = self.try_eval(n)?;
            if self.is_nondecreasing() && v < prev {
                return Ok(false);
            }
            if self.is_strictly_increasing() && v <= prev {
                return Ok(false);
            }
            prev = v;
        }
        Ok(true)
    }

    /// Values `f(0), …, f(n)`.
    pub fn values_up_to(&self, n: u64) -> Result<Vec<u64>, OrderError> {
        (0..=n).map(|k| self.try_eval(k)).collect()
    }
}

fn saturate(v: u128) -> u64 {
    u64::try_from(v).unwrap_or(u64::MAX)
}

fn table_eval(values: &[u64], extension: &Extension, n: u64) -> u64 {
    let Some(&last) = values.last() else {
        return 0;
    };
    match usize::try_from(n).ok().and_then(|i| values.get(i)) {
        Some(&v) => v,
        None => match extension {
            Extension::Constant => last,
            Extension::Affine { slope } => {
                let past = n - (values.len() as u64 - 1);
                saturate(last as u128 + (*slope as u128) * (past as u128))
            }
        },
    }
}

/// `(Inv_{Inv_f}(i), f(i−1)+1)`, two values that agree for every order `f`.
pub fn double_inverse_check(f: &OrderFn, i: u64) -> Result<(u64, u64), OrderError> {
    assert!(i >= 1, "double inverse is compared from i = 1");
    let inv = f.inverse_order();
    Ok((inv.inverse(i)?, f.try_eval(i - 1)?.saturating_add(1)))
}

/// A strictly increasing `g` with `Inv_g(i) ≤ f(i)` for all `i ≥ i₀`.
///
/// Built as `g = strictify(Inv_{f'})` with `f'(i) = f(i+1) ∸ 1`; `i₀` is the
/// least `i ≥ 1` with `f(i) > 0`.
pub fn true_order_lower(f: &OrderFn) -> Result<(OrderFn, u64), OrderError> {
    let f_prime = f.shift(1).trunc_sub(1);
    let g = f_prime.inverse_order().strictify();
    let horizon = f.witness_horizon();
    let mut i0 = None;
    for i in 1..=horizon {
        if f.try_eval(i)? > 0 {
            i0 = Some(i);
            break;
        }
    }
    let i0 = i0.ok_or(OrderError::HorizonExhausted { target: 1, horizon })?;
    Ok((g, i0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn scan_inverse(f: impl Fn(u64) -> u64, n: u64) -> u64 {
        (0..).find(|&k| f(k) >= n).unwrap()
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(OrderFn::linear(2, 1, 0).inverse(5), Ok(3));
        assert_eq!(OrderFn::identity().inverse(7), Ok(7));
        assert_eq!(OrderFn::power(1, 2, 0).inverse(0), Ok(0));
        assert_eq!(
            OrderFn::constant(3).with_witness_horizon(100).inverse(4),
            Err(OrderError::HorizonExhausted { target: 4, horizon: 100 })
        );
    }

    #[test]
    fn double_inverse_examples() {
        assert_eq!(double_inverse_check(&OrderFn::linear(2, 1, 0), 3), Ok((5, 5)));
        assert_eq!(double_inverse_check(&OrderFn::identity(), 4), Ok((4, 4)));
        assert_eq!(double_inverse_check(&OrderFn::power(1, 2, 0), 2), Ok((2, 2)));
    }

    #[test]
    fn strictify_examples() {
        let g = OrderFn::constant(3).strictify();
        assert_eq!(g.values_up_to(3).unwrap(), vec![3, 4, 5, 6]);
        assert_eq!(OrderFn::identity().strictify().values_up_to(5).unwrap(), vec![0, 1, 2, 3, 4, 5]);
        let t = OrderFn::table(vec![0, 5, 1], Extension::Constant).strictify();
        assert_eq!(t.values_up_to(2).unwrap(), vec![0, 5, 6]);
    }

    #[test]
    fn true_order_lower_examples() {
        let (g, i0) = true_order_lower(&OrderFn::identity()).unwrap();
        assert_eq!(g.values_up_to(10).unwrap(), (0..=10).collect::<Vec<_>>());
        assert_eq!(i0, 1);

        for (f, expected_i0) in [(OrderFn::linear(2, 1, 0), 1), (OrderFn::linear_ceil(1, 2, 0), 1)] {
            let (g, i0) = true_order_lower(&f).unwrap();
            assert_eq!(i0, expected_i0);
            assert!(g.check_flags(64).unwrap());
            for i in i0..=64 {
                assert!(g.inverse(i).unwrap() <= f.eval(i), "i = {i}");
            }
        }
    }

    #[test]
    fn table_extensions() {
        let c = OrderFn::table(vec![1, 2], Extension::Constant);
        assert_eq!(c.eval(10), 2);
        let a = OrderFn::table(vec![1, 2], Extension::Affine { slope: 3 });
        assert_eq!(a.eval(3), 8);
        assert!(a.is_strictly_increasing());
        assert!(!c.is_strictly_increasing());
    }

    fn arb_order() -> impl Strategy<Value = OrderFn> {
        prop_oneof![
            (1u64..4, 1u64..4, 0u64..4).prop_map(|(m, d, a)| OrderFn::linear(m, d, a)),
            (1u64..4, 1u64..4, 0u64..4).prop_map(|(m, d, a)| OrderFn::linear_ceil(m, d, a)),
            (1u64..3, 1u32..3, 0u64..3).prop_map(|(c, e, a)| OrderFn::power(c, e, a)),
            (proptest::collection::vec(0u64..4, 1..6), 1u64..3).prop_map(|(steps, slope)| {
                let values = steps
                    .iter()
                    .scan(0, |acc, s| {
                        *acc += s;
                        Some(*acc)
                    })
                    .collect();
                OrderFn::table(values, Extension::Affine { slope })
            }),
        ]
    }

    proptest! {
        #[test]
        fn inverse_matches_linear_scan(f in arb_order(), n in 0u64..200) {
            prop_assert_eq!(f.inverse(n).unwrap(), scan_inverse(|k| f.eval(k), n));
        }

        #[test]
        fn inverse_is_an_order(f in arb_order()) {
            let inv = f.inverse_order();
            prop_assert!(inv.check_flags(256).unwrap());
            prop_assert!(inv.eval(256) > inv.eval(0) || f.eval(0) >= 256);
        }

        #[test]
        fn double_inverse_agrees(f in arb_order(), i in 1u64..=64) {
            let (a, b) = double_inverse_check(&f, i).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn strict_orders_dominate_identity(f in arb_order(), n in 0u64..200) {
            let s = f.strictify();
            prop_assert!(s.eval(n) >= n);
            prop_assert!(s.inverse(n).unwrap() <= n);
            prop_assert!(s.eval(n) >= f.eval(n));
        }

        #[test]
        fn strictify_is_idempotent_on_strict_orders(f in arb_order(), n in 0u64..100) {
            let s = f.strictify();
            prop_assert_eq!(s.strictify().eval(n), s.eval(n));
        }
    }
}
