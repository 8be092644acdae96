//! Martingales over binary strings, evaluated by walking the prefix tree.
//!
//! A [`Martingale`] exposes a root state and a child transition; a [`Cursor`]
//! keeps the states along the current path, so evaluating a string and its
//! children costs one transition per step rather than a walk from the root.

mod builtin;
mod savings;

pub use builtin::{
    conditional_martingale, lln_martingale, round_to_dyadic, weighted_sum, Approximant, DState, DyadicMartingale,
    PointApproximant,
};
pub use savings::{savings_transform, Savings, SavingsState};

use alloc::vec::Vec;
use core::fmt::Debug;

use crate::numeric::{BitString, ClopenSet, Dyadic, Rational};
use crate::orders::{OrderError, OrderFn};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("martingale vanishes at `{0}`, savings ratio undefined")]
    DivisionByZero(BitString),
    #[error(transparent)]
    Order(#[from] OrderError),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MartingaleError {
    #[error("betting fraction {0} is not in (0, 1)")]
    FractionOutOfRange(Dyadic),
    #[error("component {index} starts with capital {capital} > 1")]
    InitialCapitalTooLarge { index: usize, capital: Dyadic },
    #[error("table has no value for the empty string")]
    MissingRoot,
    #[error("savings checkpoints must be strictly increasing")]
    CheckpointsNotStrict,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Exact capital values.
pub trait Capital: Clone + Ord + Debug + Send + Sync {
    fn double(&self) -> Self;
    fn plus(&self, other: &Self) -> Self;
    /// `self ≥ 2^k`.
    fn ge_pow2(&self, k: i64) -> bool;
    fn is_negative(&self) -> bool;
    fn to_rational(&self) -> Rational;
}

impl Capital for Dyadic {
    fn double(&self) -> Self {
        Dyadic::double(self)
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn ge_pow2(&self, k: i64) -> bool {
        Dyadic::ge_pow2(self, k)
    }
    fn is_negative(&self) -> bool {
        Dyadic::is_negative(self)
    }
    fn to_rational(&self) -> Rational {
        Rational::from(self)
    }
}

impl Capital for Rational {
    fn double(&self) -> Self {
        Rational::double(self)
    }
    fn plus(&self, other: &Self) -> Self {
        self + other
    }
    fn ge_pow2(&self, k: i64) -> bool {
        Rational::ge_pow2(self, k)
    }
    fn is_negative(&self) -> bool {
        Rational::is_negative(self)
    }
    fn to_rational(&self) -> Rational {
        self.clone()
    }
}

/// A capital function walked down the prefix tree.
pub trait Martingale: Send + Sync {
    type Value: Capital;
    type State: Clone;

    fn root(&self) -> Result<Self::State, EvalError>;

    /// State at `x·bit`, given the state at `x`.
    fn child(&self, x: &BitString, state: &Self::State, bit: bool) -> Result<Self::State, EvalError>;

    fn value_of(&self, state: &Self::State) -> Self::Value;

    fn eval(&self, x: &BitString) -> Result<Self::Value, EvalError> {
        let mut state = self.root()?;
        let mut prefix = BitString::empty();
        for &bit in x.bits() {
            state = self.child(&prefix, &state, bit)?;
            prefix.push(bit);
        }
        Ok(self.value_of(&state))
    }

    fn cursor(&self) -> Result<Cursor<'_, Self>, EvalError>
    where
        Self: Sized,
    {
        Cursor::new(self)
    }
}

/// A position in the prefix tree with the states of every prefix kept.
pub struct Cursor<'a, M: Martingale> {
    martingale: &'a M,
    path: BitString,
    stack: Vec<M::State>,
}

impl<'a, M: Martingale> Cursor<'a, M> {
    pub fn new(martingale: &'a M) -> Result<Self, EvalError> {
        let root = martingale.root()?;
        Ok(Self { martingale, path: BitString::empty(), stack: alloc::vec![root] })
    }

    pub fn position(&self) -> &BitString {
        &self.path
    }

    pub fn value(&self) -> M::Value {
        self.martingale.value_of(self.state())
    }

    pub fn state(&self) -> &M::State {
        self.stack.last().expect("cursor stack holds the root")
    }

    pub fn descend(&mut self, bit: bool) -> Result<(), EvalError> {
        let next = self.martingale.child(&self.path, self.state(), bit)?;
        self.stack.push(next);
        self.path.push(bit);
        Ok(())
    }

    /// Moves to the parent; `None` at the root.
    pub fn ascend(&mut self) -> Option<bool> {
        let bit = self.path.pop()?;
        self.stack.pop();
        Some(bit)
    }

    /// Values at `x0` and `x1` without moving.
    pub fn children(&self) -> Result<(M::Value, M::Value), EvalError> {
        let m = self.martingale;
        let zero = m.child(&self.path, self.state(), false)?;
        let one = m.child(&self.path, self.state(), true)?;
        Ok((m.value_of(&zero), m.value_of(&one)))
    }
}

/// First string `x` with `|x| < depth` where `d(x0) + d(x1) ≠ 2d(x)`, in
/// depth-first order.
pub fn fairness_violation<M: Martingale>(d: &M, depth: usize) -> Result<Option<BitString>, EvalError> {
    fn walk<M: Martingale>(c: &mut Cursor<'_, M>, depth: usize) -> Result<Option<BitString>, EvalError> {
        if c.position().len() >= depth {
            return Ok(None);
        }
        let (a, b) = c.children()?;
        if a.plus(&b) != c.value().double() {
            return Ok(Some(c.position().clone()));
        }
        for bit in [false, true] {
            c.descend(bit)?;
            let found = walk(c, depth)?;
            c.ascend();
            if found.is_some() {
                return Ok(found);
            }
        }
        Ok(None)
    }
    walk(&mut Cursor::new(d)?, depth)
}

/// True iff fairness holds exactly at every `x` with `|x| < depth`.
pub fn check_fairness<M: Martingale>(d: &M, depth: usize) -> Result<bool, EvalError> {
    Ok(fairness_violation(d, depth)?.is_none())
}

/// Minimal strings of length `≤ max_len` on which `d` reaches `2^k`.
pub fn hitting_set<M: Martingale>(d: &M, k: i64, max_len: usize) -> Result<ClopenSet, EvalError> {
    fn walk<M: Martingale>(
        c: &mut Cursor<'_, M>,
        k: i64,
        max_len: usize,
        out: &mut Vec<BitString>,
    ) -> Result<(), EvalError> {
        if c.value().ge_pow2(k) {
            out.push(c.position().clone());
            return Ok(());
        }
        if c.position().len() == max_len {
            return Ok(());
        }
        for bit in [false, true] {
            c.descend(bit)?;
            walk(c, k, max_len, out)?;
            c.ascend();
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(&mut Cursor::new(d)?, k, max_len, &mut out)?;
    Ok(ClopenSet::new(out))
}

/// Hits of `d` against the threshold `2^{h(i)}` along a prefix of a sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuccessReport {
    pub hit_indices: Vec<u64>,
    pub horizon: u64,
    pub verdict_io: bool,
    /// Least `t` with every `i ∈ [t, horizon]` a hit.
    pub verdict_ae_tail: Option<u64>,
}

impl SuccessReport {
    pub fn from_hits(hit_indices: Vec<u64>, horizon: u64) -> Self {
        let verdict_io = !hit_indices.is_empty();
        let mut tail = None;
        let mut expected = horizon;
        for &i in hit_indices.iter().rev() {
            if i != expected {
                break;
            }
            tail = Some(i);
            if i == 0 {
                break;
            }
            expected = i - 1;
        }
        Self { hit_indices, horizon, verdict_io, verdict_ae_tail: tail }
    }
}

/// Evaluates `d(ξ↾i) ≥ 2^{h(i)}` for every `i ≤ |prefix|`.
pub fn success_report<M: Martingale>(d: &M, h: &OrderFn, prefix: &BitString) -> Result<SuccessReport, EvalError> {
    let mut cursor = Cursor::new(d)?;
    let mut hits = Vec::new();
    for i in 0..=prefix.len() {
        if i > 0 {
            cursor.descend(prefix.bit(i - 1))?;
        }
        let threshold = h.try_eval(i as u64)?;
        if cursor.value().ge_pow2(i64::try_from(threshold).unwrap_or(i64::MAX)) {
            hits.push(i as u64);
        }
    }
    Ok(SuccessReport::from_hits(hits, prefix.len() as u64))
}
