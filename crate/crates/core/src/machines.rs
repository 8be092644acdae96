//! Finite prefix-free machines given as tables of `(codeword, output, halt time)`.

use alloc::vec::Vec;
use core::fmt;

use crate::numeric::{BitString, ClopenSet, Dyadic};
use crate::orders::{OrderError, OrderFn};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub code: BitString,
    pub out: BitString,
    pub halt_time: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MachineError {
    #[error("codewords `{0}` and `{1}` are not prefix-incomparable")]
    NotPrefixFree(BitString, BitString),
    #[error("codeword `{0}` has halt time 0; halt times start at 1")]
    ZeroHaltTime(BitString),
    #[error("Ω − Ω_{{g({index})}} = {residual} exceeds 2^-{index}")]
    ControlViolated { index: u64, residual: Dyadic },
    #[error("staged evaluation needs a valid control: {0}")]
    PreconditionViolated(alloc::boxed::Box<MachineError>),
    #[error(transparent)]
    Order(#[from] OrderError),
}

/// A point in time for staged evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Time {
    At(u64),
    Unbounded,
}

impl Time {
    fn admits(self, halt_time: u64) -> bool {
        match self {
            Time::At(t) => halt_time <= t,
            Time::Unbounded => true,
        }
    }
}

/// `K_M(x)`; strings with no description have infinite complexity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Complexity {
    Finite(u64),
    Infinite,
}

impl fmt::Display for Complexity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Complexity::Finite(k) => write!(f, "{k}"),
            Complexity::Infinite => f.write_str("inf"),
        }
    }
}

/// A prefix-free machine with a finite domain.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MachineTable {
    entries: Vec<Entry>,
}

impl MachineTable {
    pub fn new(entries: Vec<Entry>) -> Result<Self, MachineError> {
        for (i, a) in entries.iter().enumerate() {
            if a.halt_time == 0 {
                return Err(MachineError::ZeroHaltTime(a.code.clone()));
            }
            if let Some(b) = entries[i + 1..].iter().find(|b| !a.code.incomparable(&b.code)) {
                return Err(MachineError::NotPrefixFree(a.code.clone(), b.code.clone()));
            }
        }
        Ok(Self { entries })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn max_halt_time(&self) -> u64 {
        self.entries.iter().map(|e| e.halt_time).max().unwrap_or(0)
    }

    /// `Ω_{M_t}`: measure of the codewords halted by time `t`.
    pub fn omega_at(&self, t: Time) -> Dyadic {
        self.entries.iter().filter(|e| t.admits(e.halt_time)).map(|e| Dyadic::pow2(-(e.code.len() as i64))).sum()
    }

    pub fn omega(&self) -> Dyadic {
        self.omega_at(Time::Unbounded)
    }

    /// Shortest codeword producing `x` by time `t`.
    pub fn complexity(&self, x: &BitString, t: Time) -> Complexity {
        self.entries
            .iter()
            .filter(|e| &e.out == x && t.admits(e.halt_time))
            .map(|e| Complexity::Finite(e.code.len() as u64))
            .min()
            .unwrap_or(Complexity::Infinite)
    }
}

/// Residuals `Ω_M − Ω_{M_{g(i)}}` for `i ∈ [0, imax]`, each at most `2^{-i}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlWitness {
    pub g: OrderFn,
    pub imax: u64,
    pub residuals: Vec<Dyadic>,
}

/// Checks `Ω_M − Ω_{M_{g(i)}} ≤ 2^{-i}` for every `i ≤ imax`.
pub fn verify_measure_computable(m: &MachineTable, g: &OrderFn, imax: u64) -> Result<ControlWitness, MachineError> {
    let omega = m.omega();
    let mut residuals = Vec::new();
    for i in 0..=imax {
        let residual = &omega - &m.omega_at(Time::At(g.try_eval(i)?));
        if residual > Dyadic::pow2(-(i as i64)) {
            return Err(MachineError::ControlViolated { index: i, residual });
        }
        residuals.push(residual);
    }
    Ok(ControlWitness { g: g.clone(), imax, residuals })
}

/// Strings `x` with `|x| ≤ maxlen` and `K(x) ≤ |x| − b`.
///
/// With `staged_with = Some(g)`, complexity is read from `M_{g(|x|)}` after
/// checking that `g` controls `M` on `[0, maxlen]`.
pub fn rb_set(
    m: &MachineTable,
    b: i64,
    maxlen: usize,
    staged_with: Option<&OrderFn>,
) -> Result<ClopenSet, MachineError> {
    if let Some(g) = staged_with {
        verify_measure_computable(m, g, maxlen as u64)
            .map_err(|e| MachineError::PreconditionViolated(alloc::boxed::Box::new(e)))?;
    }
    let mut out = Vec::new();
    for e in &m.entries {
        let x = &e.out;
        if x.len() > maxlen {
            continue;
        }
        let t = match staged_with {
            Some(g) => Time::At(g.try_eval(x.len() as u64)?),
            None => Time::Unbounded,
        };
        let bound = x.len() as i64 - b;
        if let Complexity::Finite(k) = m.complexity(x, t) {
            if k as i64 <= bound {
                out.push(x.clone());
            }
        }
    }
    Ok(ClopenSet::new(out))
}

/// `max_{n ≤ |ξ|} (n − K_M(ξ↾n))`, or `None` when no prefix is described.
pub fn kolmogorov_margin(m: &MachineTable, prefix: &BitString) -> Option<i64> {
    (0..=prefix.len())
        .filter_map(|n| match m.complexity(&prefix.restrict(n), Time::Unbounded) {
            Complexity::Finite(k) => Some(n as i64 - k as i64),
            Complexity::Infinite => None,
        })
        .max()
}
