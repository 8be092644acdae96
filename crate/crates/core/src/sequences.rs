//! Deterministic sources of infinite binary sequences, read one index at a time.

use alloc::sync::Arc;

use num_bigint::BigInt;
use num_traits::{One, Pow};

use crate::numeric::{BitString, Dyadic, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SequenceError {
    #[error("periodic source needs a nonempty word")]
    EmptyPeriod,
    #[error("expansion of {num}/{den} needs 0 ≤ num < den")]
    NotAFraction { num: u64, den: u64 },
    #[error("source has {len} bits; index {index} requested")]
    BeyondEnd { len: usize, index: usize },
    #[error("statistic needs n ≥ 1")]
    EmptyPrefix,
    #[error("no k₀ ≤ {0} works; the LLN martingale gains nothing at this density")]
    NoRate(u64),
}

/// An index-to-bit map; the same index always gives the same bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SequenceSource {
    Constant(bool),
    /// The word repeated forever.
    Periodic(BitString),
    /// All nonempty strings in length-lexicographic order: `0 1 00 01 10 11 …`.
    Champernowne,
    /// Binary digits of `num/den` after the point.
    RationalExpansion {
        num: u64,
        den: u64,
    },
    /// A finite stream, read from a file or given inline.
    Explicit(Arc<BitString>),
    /// The bits of a diagonal construction.
    Trace(Arc<BitString>),
}

impl SequenceSource {
    pub fn periodic(word: BitString) -> Result<Self, SequenceError> {
        if word.is_empty() {
            return Err(SequenceError::EmptyPeriod);
        }
        Ok(SequenceSource::Periodic(word))
    }

    pub fn rational(num: u64, den: u64) -> Result<Self, SequenceError> {
        if num >= den {
            return Err(SequenceError::NotAFraction { num, den });
        }
        Ok(SequenceSource::RationalExpansion { num, den })
    }

    /// Parses ASCII `0`/`1`, ignoring whitespace.
    pub fn parse_stream(text: &str) -> Result<Self, crate::numeric::ParseBitsError> {
        let cleaned: alloc::string::String = text.chars().filter(|c| !c.is_whitespace()).collect();
        Ok(SequenceSource::Explicit(Arc::new(cleaned.parse()?)))
    }

    /// Short kind name used in reports.
    pub fn kind(&self) -> &'static str {
        match self {
            SequenceSource::Constant(_) => "constant",
            SequenceSource::Periodic(_) => "periodic",
            SequenceSource::Champernowne => "champernowne",
            SequenceSource::RationalExpansion { .. } => "rational",
            SequenceSource::Explicit(_) => "explicit",
            SequenceSource::Trace(_) => "trace",
        }
    }

    /// `ξ(n)`.
    pub fn bit(&self, n: usize) -> Result<bool, SequenceError> {
        Ok(match self {
            SequenceSource::Constant(b) => *b,
            SequenceSource::Periodic(w) => w.bit(n % w.len()),
            SequenceSource::Champernowne => champernowne_bit(n as u64),
            SequenceSource::RationalExpansion { num, den } => {
                // Digit n is 1 iff the remainder num·2^n mod den is at least den/2.
                let r = mul_pow2_mod(*num, n as u64, *den);
                2 * r as u128 >= *den as u128
            }
            SequenceSource::Explicit(bits) | SequenceSource::Trace(bits) => {
                if n >= bits.len() {
                    return Err(SequenceError::BeyondEnd { len: bits.len(), index: n });
                }
                bits.bit(n)
            }
        })
    }

    /// `ξ↾n`.
    pub fn prefix(&self, n: usize) -> Result<BitString, SequenceError> {
        (0..n).map(|i| self.bit(i)).collect()
    }
}

fn mul_pow2_mod(num: u64, n: u64, den: u64) -> u64 {
    let m = den as u128;
    let (mut base, mut exp, mut acc) = (2u128 % m, n, 1u128 % m);
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        exp >>= 1;
    }
    (acc * (num as u128 % m) % m) as u64
}

fn champernowne_bit(mut n: u64) -> bool {
    let mut len = 1u32;
    loop {
        let block = (len as u64) << len;
        if n < block {
            let index = n / len as u64;
            let pos = (n % len as u64) as u32;
            return (index >> (len - 1 - pos)) & 1 == 1;
        }
        n -= block;
        len += 1;
    }
}

/// `s_n(ξ)/n`, the frequency of ones in `ξ↾n`.
pub fn lln_statistic(source: &SequenceSource, n: usize) -> Result<Rational, SequenceError> {
    if n == 0 {
        return Err(SequenceError::EmptyPrefix);
    }
    let ones = source.prefix(n)?.count_ones();
    Ok(Rational::new(ones as i64, n as i64))
}

/// The betting fraction `q` and rate `k₀` against a sequence whose ones have
/// upper density `1/2 + a`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LlnParameters {
    pub q: Dyadic,
    pub excess: Rational,
    /// Least `k₀` with `1/k₀ ≤ c/2`, where
    /// `c = ½ log((1+q)(1−q)) + a log((1+q)/(1−q))`.
    pub k0: u64,
}

/// Largest `k₀` searched.
const RATE_SEARCH_LIMIT: u64 = 1 << 12;

/// Exact `k₀` for a given `q`.
///
/// With `a = α/β`, the condition `2/k₀ ≤ c` becomes
/// `2^{4β} ≤ ((1+q)(1−q))^{βk₀} · ((1+q)/(1−q))^{2αk₀}`, compared in integers.
pub fn lln_parameters(density: &Rational, q: &Dyadic) -> Result<LlnParameters, SequenceError> {
    let excess = density - &Rational::new(1, 2);
    let alpha = excess.numerator().clone();
    let beta = excess.denominator().clone();
    let (Ok(alpha), Ok(beta)) = (u32::try_from(alpha), u32::try_from(beta)) else {
        return Err(SequenceError::NoRate(0));
    };
    if alpha == 0 {
        return Err(SequenceError::NoRate(0));
    }
    // q = u/2^w, so 1 ± q = (2^w ± u)/2^w.
    let w = q.exponent();
    let scale = BigInt::one() << w;
    let u = q.numerator().clone();
    let up = &scale + &u;
    let down = &scale - &u;
    let lhs_pow = |k: u64| -> Option<(BigInt, BigInt)> {
        let p = u32::try_from(beta as u64 * k).ok()?;
        let r = u32::try_from(2 * alpha as u64 * k).ok()?;
        // ((up·down)/4^w)^p · (up/down)^r = num/den
        let num = Pow::pow(&up * &down, p) * Pow::pow(up.clone(), r);
        let den = (BigInt::one() << (2 * w as usize * p as usize)) * Pow::pow(down.clone(), r);
        Some((num, den))
    };
    let target = BigInt::one() << (4 * beta as usize);
    let fits = |k: u64| -> Result<bool, SequenceError> {
        let (num, den) = lhs_pow(k).ok_or(SequenceError::NoRate(k))?;
        Ok(&target * &den <= num)
    };
    // c > 0 iff the k = 1 product exceeds 1; then the condition is monotone in k.
    let (num, den) = lhs_pow(1).ok_or(SequenceError::NoRate(1))?;
    if num <= den {
        return Err(SequenceError::NoRate(0));
    }
    let mut hi = 1u64;
    while !fits(hi)? {
        hi *= 2;
        if hi > RATE_SEARCH_LIMIT {
            return Err(SequenceError::NoRate(RATE_SEARCH_LIMIT));
        }
    }
    let mut lo = hi / 2 + 1;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if fits(mid)? {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(LlnParameters { q: q.clone(), excess, k0: hi })
}

/// The `q = j/16` with the smallest `k₀`; ties go to the coarser `q`, then
/// the smaller.
pub fn suitable_lln_parameters(density: &Rational) -> Result<LlnParameters, SequenceError> {
    (1..16i64)
        .filter_map(|j| lln_parameters(density, &Dyadic::new(j, 4)).ok())
        .min_by_key(|p| (p.k0, p.q.exponent(), p.q.clone()))
        .ok_or(SequenceError::NoRate(RATE_SEARCH_LIMIT))
}
