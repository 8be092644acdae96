//! Seeded random instances for the property suites.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use subrand_core::machines::{Entry, MachineTable};
use subrand_core::martingales::{conditional_martingale, lln_martingale, weighted_sum, DyadicMartingale};
use subrand_core::ml_tests::StagedTestFamily;
use subrand_core::orders::Extension;
use subrand_core::{BitString, ClopenSet, Dyadic, OrderFn};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

pub fn bitstring(rng: &mut ChaCha8Rng, len: usize) -> BitString {
    (0..len).map(|_| rng.gen::<bool>()).collect()
}

/// Up to `count` random strings of length `1..=max_len`, not necessarily prefix-free.
pub fn clopen(rng: &mut ChaCha8Rng, count: usize, max_len: usize) -> ClopenSet {
    let n = rng.gen_range(0..=count);
    (0..n)
        .map(|_| {
            let l = rng.gen_range(1..=max_len);
            bitstring(rng, l)
        })
        .collect()
}

/// A fair table martingale to `depth`, constant below it.
///
/// Each node moves a multiple of a quarter of its capital, so the values stay
/// dyadic and nonnegative.
pub fn table_martingale(rng: &mut ChaCha8Rng, depth: usize) -> DyadicMartingale {
    let root = Dyadic::new(rng.gen_range(0..=16i64), 4);
    let mut values = BTreeMap::new();
    let mut frontier = vec![(BitString::empty(), root.clone())];
    values.insert(BitString::empty(), root);
    for _ in 0..depth {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for (x, v) in frontier {
            let beta = Dyadic::new(rng.gen_range(-4..=4i64), 2);
            let up = &v * &(Dyadic::one() + beta.clone());
            let down = &v * &(Dyadic::one() - beta);
            let (x0, x1) = (x.child(false), x.child(true));
            values.insert(x0.clone(), up.clone());
            values.insert(x1.clone(), down.clone());
            next.push((x0, up));
            next.push((x1, down));
        }
        frontier = next;
    }
    DyadicMartingale::table(values).expect("root present")
}

/// One of the built-in kinds, always with `d(ε) ≤ 1`.
pub fn martingale(rng: &mut ChaCha8Rng, depth: usize) -> DyadicMartingale {
    match rng.gen_range(0..4) {
        0 => table_martingale(rng, depth.min(8)),
        1 => conditional_martingale(clopen(rng, 6, depth.max(1))),
        2 => lln_martingale(Dyadic::new(rng.gen_range(1..8i64), 3)).expect("q in (0,1)"),
        _ => {
            let parts = (0..rng.gen_range(1..4)).map(|_| Arc::new(table_martingale(rng, depth.min(6)))).collect();
            // Φ(ε) may reach 2; halve it to keep d(ε) ≤ 1.
            DyadicMartingale::scaled(Arc::new(weighted_sum(parts).expect("parts start at most 1")), -1)
        }
    }
}

/// Requests of length `1..=max_len` with total weight at most 1.
pub fn requests(rng: &mut ChaCha8Rng, max_count: usize, max_len: u64) -> Vec<(u64, BitString)> {
    let mut weight = Dyadic::zero();
    let mut out = Vec::new();
    for _ in 0..rng.gen_range(0..=max_count) {
        let l = rng.gen_range(1..=max_len);
        let w = Dyadic::pow2(-(l as i64));
        if &weight + &w > Dyadic::one() {
            continue;
        }
        weight += &w;
        let payload_len = rng.gen_range(0..6);
        out.push((l, bitstring(rng, payload_len)));
    }
    // Fill to exactly 1 now and then, where the construction is tightest.
    if rng.gen_bool(0.25) {
        let mut gap = Dyadic::one() - weight;
        let mut l = 1u64;
        while !gap.is_zero() && l <= max_len + 8 {
            let w = Dyadic::pow2(-(l as i64));
            if gap >= w {
                gap -= &w;
                out.push((l, BitString::empty()));
            } else {
                l += 1;
            }
        }
        out.shuffle(rng);
    }
    out
}

/// A test `X_0, …, X_{levels−1}` with `μ([X_n]) ≤ 2^{-2n}`, controlled by
/// `f(j) = j + c`.
///
/// Level `n` has strings of length `2n+2 ..= 2n+5` (at most two at level 0,
/// four above) appearing within `c` stages of their length. A string still
/// missing at stage `f(n+i)` then has length above `n + i`, which keeps every
/// residual under `2^{-i}`. When `path` is given, each level holds one of its
/// prefixes.
pub fn strict_family(rng: &mut ChaCha8Rng, levels: usize, path: Option<&BitString>) -> StagedTestFamily {
    let c = rng.gen_range(3..=6u64);
    strict_family_with_cost(rng, levels, path, c)
}

/// As [`strict_family`] with a fixed `c ≥ 3`.
pub fn strict_family_with_cost(
    rng: &mut ChaCha8Rng,
    levels: usize,
    path: Option<&BitString>,
    c: u64,
) -> StagedTestFamily {
    assert!(c >= 3, "the residual bound needs c ≥ 3");
    let mut out = Vec::with_capacity(levels);
    for n in 0..levels {
        let cap = if n == 0 { 2 } else { 4 };
        let mut chosen: Vec<BitString> = Vec::new();
        if let Some(p) = path {
            let l = rng.gen_range(2 * n + 2..=2 * n + 5).min(p.len());
            chosen.push(p.restrict(l));
        }
        for _ in 0..rng.gen_range(0..=cap) {
            if chosen.len() >= cap {
                break;
            }
            let l = rng.gen_range(2 * n + 2..=2 * n + 5);
            let s = bitstring(rng, l);
            if chosen.iter().all(|z| z.incomparable(&s)) {
                chosen.push(s);
            }
        }
        let level = chosen
            .into_iter()
            .map(|s| {
                let stage = s.len() as u64 + rng.gen_range(0..=c);
                (stage, s)
            })
            .collect();
        out.push(level);
    }
    StagedTestFamily::new(out, OrderFn::linear(1, 1, c)).expect("stages are at least the lengths")
}

/// A prefix-free table with random halt times, and the least strictly
/// increasing `g` with `Ω − Ω_{g(i)} ≤ 2^{-i}` on `[0, imax]`.
pub fn measured_machine(rng: &mut ChaCha8Rng, imax: u64) -> (MachineTable, OrderFn) {
    let mut entries: Vec<Entry> = Vec::new();
    for _ in 0..rng.gen_range(0..12) {
        let len = rng.gen_range(1..=8);
        let code = bitstring(rng, len);
        if entries.iter().all(|e| e.code.incomparable(&code)) {
            let out_len = rng.gen_range(0..=10);
            entries.push(Entry { code, out: bitstring(rng, out_len), halt_time: rng.gen_range(1..=20) });
        }
    }
    let m = MachineTable::new(entries).expect("codes chosen incomparable");
    let omega = m.omega();
    let mut values = Vec::new();
    let mut prev: Option<u64> = None;
    for i in 0..=imax {
        let bound = Dyadic::pow2(-(i as i64));
        let mut t = prev.map_or(0, |p| p + 1);
        while &omega - &m.omega_at(subrand_core::machines::Time::At(t)) > bound {
            t += 1;
        }
        values.push(t);
        prev = Some(t);
    }
    (m, OrderFn::table(values, Extension::Affine { slope: 1 }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use subrand_core::martingales::check_fairness;
    use subrand_core::ml_tests::verify_family;

    #[test]
    fn generated_families_are_strict() {
        let mut r = rng(7);
        for _ in 0..40 {
            let path = bitstring(&mut r, 16);
            let x = strict_family(&mut r, 5, Some(&path));
            let report = verify_family(&x, true).unwrap();
            assert!(report.passed(), "{report:?}");
            for n in 0..5 {
                assert!(x.first_hit(n, &path).is_some());
            }
        }
    }

    #[test]
    fn generated_martingales_are_fair() {
        let mut r = rng(3);
        for _ in 0..20 {
            let d = martingale(&mut r, 6);
            assert!(d.initial_capital().unwrap() <= Dyadic::one());
            assert!(check_fairness(&d, 7).unwrap());
        }
    }

    #[test]
    fn request_weights_are_bounded() {
        let mut r = rng(11);
        for _ in 0..50 {
            let rs = requests(&mut r, 30, 10);
            let w: Dyadic = rs.iter().map(|(l, _)| Dyadic::pow2(-(*l as i64))).sum();
            assert!(w <= Dyadic::one());
        }
    }

    #[test]
    fn same_seed_same_instances() {
        let a = table_martingale(&mut rng(5), 4);
        let b = table_martingale(&mut rng(5), 4);
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }
}
