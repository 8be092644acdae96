use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt::Debug;

use super::savings::{Savings, SavingsState};
use super::{EvalError, Martingale, MartingaleError};
use crate::numeric::{BitString, ClopenSet, Dyadic, Rational};

/// Dyadic-valued martingales built from the fixed set of constructions.
#[derive(Debug, Clone)]
pub enum DyadicMartingale {
    Constant(Dyadic),
    /// Explicit values; a string without an entry inherits the value of its
    /// longest listed prefix.
    Table(BTreeMap<BitString, Dyadic>),
    /// `x ↦ μ(A | x)`.
    Conditional(ClopenSet),
    /// Bets the fraction `q` of current capital on the next bit being 1.
    Lln(Dyadic),
    /// `Σ_e 2^{-e} d_e`.
    WeightedSum(Vec<Arc<DyadicMartingale>>),
    /// `Σ_e d_e`.
    Sum(Vec<Arc<DyadicMartingale>>),
    /// `2^shift · d`.
    Scaled {
        inner: Arc<DyadicMartingale>,
        shift: i64,
    },
    /// A dyadic martingale tracking an approximable one from above.
    Rounded(Approximant),
}

/// Source of approximations `F(x, i)` for the rounding construction.
#[derive(Debug, Clone)]
pub enum Approximant {
    /// A dyadic martingale approximates itself exactly.
    Exact(Arc<DyadicMartingale>),
    /// Rational capital rounded down to the grid `2^{-i}`.
    Floor(Arc<Savings>),
    /// Pointwise approximations supplied by another construction.
    Point(Arc<dyn PointApproximant>),
}

/// Approximations computed directly from the string.
pub trait PointApproximant: Debug + Send + Sync {
    /// `F(x, i)` with `|V(x) − F(x, i)| ≤ 2^{-i}`.
    fn approx(&self, x: &BitString, precision: u64) -> Result<Dyadic, EvalError>;

    /// The exact value `V(x)`, when it can be computed.
    fn exact(&self, _x: &BitString) -> Option<Result<Rational, EvalError>> {
        None
    }
}

/// Per-node state of a [`DyadicMartingale`].
#[derive(Debug, Clone)]
pub struct DState {
    value: Dyadic,
    sub: Sub,
}

#[derive(Debug, Clone)]
enum Sub {
    Leaf,
    One(Box<DState>),
    Many(Vec<DState>),
    Round(ApproxState),
}

#[derive(Debug, Clone)]
enum ApproxState {
    Exact(Box<DState>),
    Floor(Box<SavingsState>),
    Point,
}

impl DState {
    pub fn value(&self) -> &Dyadic {
        &self.value
    }

    fn leaf(value: Dyadic) -> Self {
        Self { value, sub: Sub::Leaf }
    }
}

/// Extra precision of the rounding increments beyond the string length.
const ROUND_PRECISION_OFFSET: u64 = 5;

impl Approximant {
    fn root(&self) -> Result<ApproxState, EvalError> {
        Ok(match self {
            Approximant::Exact(d) => ApproxState::Exact(Box::new(d.root()?)),
            Approximant::Floor(s) => ApproxState::Floor(Box::new(s.root()?)),
            Approximant::Point(_) => ApproxState::Point,
        })
    }

    fn child(&self, x: &BitString, state: &ApproxState, bit: bool) -> Result<ApproxState, EvalError> {
        Ok(match (self, state) {
            (Approximant::Exact(d), ApproxState::Exact(s)) => ApproxState::Exact(Box::new(d.child(x, s, bit)?)),
            (Approximant::Floor(d), ApproxState::Floor(s)) => ApproxState::Floor(Box::new(d.child(x, s, bit)?)),
            (Approximant::Point(_), ApproxState::Point) => ApproxState::Point,
            _ => unreachable!("approximant state does not match its approximant"),
        })
    }

    fn approx_at(&self, x: &BitString, state: &ApproxState, precision: u64) -> Result<Dyadic, EvalError> {
        match (self, state) {
            (Approximant::Exact(_), ApproxState::Exact(s)) => Ok(s.value.clone()),
            (Approximant::Floor(_), ApproxState::Floor(s)) => Ok(s.delta().floor_dyadic(precision)),
            (Approximant::Point(p), ApproxState::Point) => p.approx(x, precision),
            _ => unreachable!("approximant state does not match its approximant"),
        }
    }

    /// `F(x, i)` evaluated from the root.
    pub fn approx(&self, x: &BitString, precision: u64) -> Result<Dyadic, EvalError> {
        let mut state = self.root()?;
        let mut prefix = BitString::empty();
        for &bit in x.bits() {
            state = self.child(&prefix, &state, bit)?;
            prefix.push(bit);
        }
        self.approx_at(x, &state, precision)
    }

    /// The approximated value `V(x)`, if known exactly.
    pub fn exact(&self, x: &BitString) -> Option<Result<Rational, EvalError>> {
        match self {
            Approximant::Exact(d) => Some(d.eval(x).map(Rational::from)),
            Approximant::Floor(s) => Some(s.eval(x)),
            Approximant::Point(p) => p.exact(x),
        }
    }
}

impl DyadicMartingale {
    pub fn constant(c: Dyadic) -> Self {
        DyadicMartingale::Constant(c)
    }

    pub fn table(values: BTreeMap<BitString, Dyadic>) -> Result<Self, MartingaleError> {
        if !values.contains_key(&BitString::empty()) {
            return Err(MartingaleError::MissingRoot);
        }
        Ok(DyadicMartingale::Table(values))
    }

    pub fn scaled(inner: Arc<DyadicMartingale>, shift: i64) -> Self {
        DyadicMartingale::Scaled { inner, shift }
    }

    /// Short construction name used in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            DyadicMartingale::Constant(_) => "constant",
            DyadicMartingale::Table(_) => "table",
            DyadicMartingale::Conditional(_) => "conditional",
            DyadicMartingale::Lln(_) => "lln",
            DyadicMartingale::WeightedSum(_) => "weighted_sum",
            DyadicMartingale::Sum(_) => "sum",
            DyadicMartingale::Scaled { .. } => "scaled",
            DyadicMartingale::Rounded(_) => "rounded",
        }
    }

    /// `d(ε)`.
    pub fn initial_capital(&self) -> Result<Dyadic, EvalError> {
        Ok(self.root()?.value)
    }
}

impl Martingale for DyadicMartingale {
    type Value = Dyadic;
    type State = DState;

    fn root(&self) -> Result<DState, EvalError> {
        let root = BitString::empty();
        Ok(match self {
            DyadicMartingale::Constant(c) => DState::leaf(c.clone()),
            DyadicMartingale::Table(values) => DState::leaf(values[&root].clone()),
            DyadicMartingale::Conditional(a) => DState::leaf(a.conditional_measure(&root)),
            DyadicMartingale::Lln(_) => DState::leaf(Dyadic::one()),
            DyadicMartingale::WeightedSum(parts) => {
                let states = parts.iter().map(|d| d.root()).collect::<Result<Vec<_>, _>>()?;
                DState { value: weigh(&states), sub: Sub::Many(states) }
            }
            DyadicMartingale::Sum(parts) => {
                let states = parts.iter().map(|d| d.root()).collect::<Result<Vec<_>, _>>()?;
                DState { value: states.iter().map(|s| s.value.clone()).sum(), sub: Sub::Many(states) }
            }
            DyadicMartingale::Scaled { inner, shift } => {
                let s = inner.root()?;
                DState { value: s.value.scale_pow2(*shift), sub: Sub::One(Box::new(s)) }
            }
            DyadicMartingale::Rounded(approx) => {
                let a = approx.root()?;
                let seed = approx.approx_at(&root, &a, ROUND_PRECISION_OFFSET)? + Dyadic::pow2(-2);
                DState { value: seed, sub: Sub::Round(a) }
            }
        })
    }

    fn child(&self, x: &BitString, state: &DState, bit: bool) -> Result<DState, EvalError> {
        Ok(match (self, &state.sub) {
            (DyadicMartingale::Constant(_), _) => state.clone(),
            (DyadicMartingale::Table(values), _) => {
                let y = x.child(bit);
                DState::leaf(values.get(&y).cloned().unwrap_or_else(|| state.value.clone()))
            }
            (DyadicMartingale::Conditional(a), _) => DState::leaf(a.conditional_measure(&x.child(bit))),
            (DyadicMartingale::Lln(q), _) => {
                let factor = if bit { Dyadic::one() + q.clone() } else { Dyadic::one() - q.clone() };
                DState::leaf(&state.value * &factor)
            }
            (DyadicMartingale::WeightedSum(parts), Sub::Many(states)) => {
                let next = parts.iter().zip(states).map(|(d, s)| d.child(x, s, bit)).collect::<Result<Vec<_>, _>>()?;
                DState { value: weigh(&next), sub: Sub::Many(next) }
            }
            (DyadicMartingale::Sum(parts), Sub::Many(states)) => {
                let next = parts.iter().zip(states).map(|(d, s)| d.child(x, s, bit)).collect::<Result<Vec<_>, _>>()?;
                DState { value: next.iter().map(|s| s.value.clone()).sum(), sub: Sub::Many(next) }
            }
            (DyadicMartingale::Scaled { inner, shift }, Sub::One(s)) => {
                let next = inner.child(x, s, bit)?;
                DState { value: next.value.scale_pow2(*shift), sub: Sub::One(Box::new(next)) }
            }
            (DyadicMartingale::Rounded(approx), Sub::Round(a)) => {
                // d(x0) = d(x) + G and d(x1) = d(x) − G, where
                // G = F(x0, |x|+5) − F(x, |x|+5).
                let precision = x.len() as u64 + ROUND_PRECISION_OFFSET;
                let here = approx.approx_at(x, a, precision)?;
                let x0 = x.child(false);
                let a0 = approx.child(x, a, false)?;
                let gain = &approx.approx_at(&x0, &a0, precision)? - &here;
                if bit {
                    let a1 = approx.child(x, a, true)?;
                    DState { value: &state.value - &gain, sub: Sub::Round(a1) }
                } else {
                    DState { value: &state.value + &gain, sub: Sub::Round(a0) }
                }
            }
            _ => unreachable!("state does not match its martingale"),
        })
    }

    fn value_of(&self, state: &DState) -> Dyadic {
        state.value.clone()
    }
}

fn weigh(states: &[DState]) -> Dyadic {
    states.iter().enumerate().map(|(e, s)| s.value.scale_pow2(-(e as i64))).sum()
}

/// `x ↦ μ(A | x)`.
pub fn conditional_martingale(a: ClopenSet) -> DyadicMartingale {
    DyadicMartingale::Conditional(a)
}

/// `F(ε) = 1`, `F(x1) = (1+q)F(x)`, `F(x0) = (1−q)F(x)`.
pub fn lln_martingale(q: Dyadic) -> Result<DyadicMartingale, MartingaleError> {
    if !q.is_positive() || q >= Dyadic::one() {
        return Err(MartingaleError::FractionOutOfRange(q));
    }
    Ok(DyadicMartingale::Lln(q))
}

/// `Φ = Σ_e 2^{-e} d_e`; every component must start with capital at most 1.
pub fn weighted_sum(battery: Vec<Arc<DyadicMartingale>>) -> Result<DyadicMartingale, MartingaleError> {
    for (index, d) in battery.iter().enumerate() {
        let capital = d.initial_capital()?;
        if capital > Dyadic::one() {
            return Err(MartingaleError::InitialCapitalTooLarge { index, capital });
        }
    }
    Ok(DyadicMartingale::WeightedSum(battery))
}

/// A dyadic martingale `d` with `V ≤ d ≤ V + 2` for the approximated `V`.
///
/// Seeded at `F(ε, 5) + 1/4`; each step moves by the approximated increment
/// so fairness is exact while the slack `d − V` drifts by less than `1/8` in
/// total.
pub fn round_to_dyadic(approximant: Approximant) -> DyadicMartingale {
    DyadicMartingale::Rounded(approximant)
}
