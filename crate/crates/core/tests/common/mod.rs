//! Reference implementations used to cross-check the library. They share
//! only data types with it: values, demand and optima are recomputed from
//! scratch by exhaustive enumeration.

#![allow(dead_code)]

use posted_pricing::cost::CurveShape;
use posted_pricing::{Bundle, Closure, CostCurve, Money, Price, PriceVector, Valuation};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn m(v: i128) -> Money {
    Money::from_int(v)
}

pub fn fin(v: Money) -> Price {
    Price::Finite(v)
}

/// `v(S)` straight from the definition of each valuation kind.
pub fn value_ref(v: &Valuation, mask: u64) -> Money {
    let has = |i: usize| mask >> i & 1 == 1;
    match v {
        Valuation::Additive { values } => {
            let mut total = Money::ZERO;
            for (i, x) in values.iter().enumerate() {
                if has(i) {
                    total += *x;
                }
            }
            total
        }
        Valuation::UnitDemand { values } => {
            let mut best = Money::ZERO;
            for (i, x) in values.iter().enumerate() {
                if has(i) && *x > best {
                    best = *x;
                }
            }
            best
        }
        Valuation::SingleMinded { bundle, value, .. } => {
            if bundle.mask() & !mask == 0 {
                *value
            } else {
                Money::ZERO
            }
        }
        Valuation::Table { closure, entries, .. } => {
            let mut best = Money::ZERO;
            for (b, x) in entries {
                let hit = match closure {
                    Closure::Exact => b.mask() == mask,
                    Closure::Monotone => b.mask() & !mask == 0,
                };
                if hit && *x > best {
                    best = *x;
                }
            }
            best
        }
    }
}

fn sorted_items(mask: u64) -> Vec<usize> {
    (0..64).filter(|i| mask >> i & 1 == 1).collect()
}

/// Exhaustive argmax over all `2^n` bundles: maximize utility, then fewest
/// items, then the lexicographically smallest sorted item list.
pub fn demand_ref(v: &Valuation, prices: &[Price]) -> u64 {
    let n = prices.len();
    let mut best: Option<(Money, u64)> = None;
    'outer: for mask in 0..1u64 << n {
        let mut paid = Money::ZERO;
        for i in sorted_items(mask) {
            match prices[i] {
                Price::Finite(p) => paid += p,
                Price::Infinite => continue 'outer,
            }
        }
        let u = value_ref(v, mask) - paid;
        let better = match best {
            None => true,
            Some((bu, bm)) => {
                u > bu
                    || (u == bu
                        && (mask.count_ones(), sorted_items(mask)) < (bm.count_ones(), sorted_items(bm)))
            }
        };
        if better {
            best = Some((u, mask));
        }
    }
    best.expect("the empty bundle is always available").1
}

/// Optimal welfare by an odometer over every buyer's bundle, with costs
/// summed copy by copy. `None` only when no buyers exist is impossible, so
/// this always returns a value (the empty allocation is feasible).
pub fn opt_welfare_ref(curves: &[CostCurve], buyers: &[Valuation]) -> Money {
    let n = curves.len();
    let mut index = vec![0u64; buyers.len()];
    let mut best = Money::ZERO;
    loop {
        let mut copies = vec![0u64; n];
        let mut value = Money::ZERO;
        for (b, mask) in buyers.iter().zip(&index) {
            value += value_ref(b, *mask);
            for i in sorted_items(*mask) {
                copies[i] += 1;
            }
        }
        let mut cost = Some(Money::ZERO);
        for (i, x) in copies.iter().enumerate() {
            for k in 1..=*x {
                cost = match (cost, curves[i].marginal_cost(k).unwrap()) {
                    (Some(c), Price::Finite(p)) => Some(c + p),
                    _ => None,
                };
            }
        }
        if let Some(c) = cost {
            if value - c > best {
                best = value - c;
            }
        }
        let Some(pos) = index.iter().position(|x| *x + 1 < 1 << n) else { break };
        index[pos] += 1;
        index[..pos].iter_mut().for_each(|x| *x = 0);
    }
    best
}

/// A valuation of the given kind over `n` items with small integer values,
/// so that ties are frequent.
pub fn random_valuation<R: Rng>(kind: &str, n: usize, rng: &mut R) -> Valuation {
    let value = |rng: &mut R| m(rng.gen_range(0..=6));
    let nonempty = |rng: &mut R| Bundle::from_mask(rng.gen_range(1..1u64 << n));
    match kind {
        "additive" => Valuation::additive((0..n).map(|_| value(rng)).collect()),
        "unit_demand" => Valuation::unit_demand((0..n).map(|_| value(rng)).collect()),
        "single_minded" => {
            let b = nonempty(rng);
            Valuation::single_minded(n, b, m(rng.gen_range(0..=3 * n as i128)))
        }
        "table" => {
            let closure = if rng.gen_bool(0.5) { Closure::Exact } else { Closure::Monotone };
            let count = rng.gen_range(1..=6);
            let entries: Vec<(Bundle, Money)> =
                (0..count).map(|_| (nonempty(rng), m(rng.gen_range(0..=3 * n as i128)))).collect();
            Valuation::table(n, closure, entries)
        }
        other => panic!("unknown kind {other}"),
    }
    .unwrap()
}

pub const KINDS: [&str; 4] = ["additive", "unit_demand", "single_minded", "table"];

/// Prices in halves from 0 to 4, with the occasional `+∞`.
pub fn random_prices<R: Rng>(n: usize, rng: &mut R) -> Vec<Price> {
    (0..n)
        .map(|_| if rng.gen_bool(0.1) { Price::Infinite } else { fin(Money::new(rng.gen_range(0..=8), 2)) })
        .collect()
}

pub fn price_vector(prices: &[Price]) -> PriceVector {
    PriceVector::new(prices.to_vec()).unwrap()
}

/// A random curve of any shape.
pub fn random_curve<R: Rng>(rng: &mut R) -> CostCurve {
    let shape = match rng.gen_range(0..5) {
        0 => CurveShape::Linear { a: Money::new(rng.gen_range(1..=6), rng.gen_range(1..=3)) },
        1 => CurveShape::Polynomial { a: Money::new(rng.gen_range(1..=4), rng.gen_range(1..=4)), degree: rng.gen_range(1..=4) },
        2 => CurveShape::Logarithmic { a: Money::new(rng.gen_range(1..=6), rng.gen_range(1..=2)) },
        3 => CurveShape::LimitedSupply {
            free_copies: rng.gen_range(0..=10),
            cap: if rng.gen_bool(0.5) { Price::Infinite } else { fin(m(rng.gen_range(0..=20))) },
        },
        _ => {
            let mut level = m(rng.gen_range(0..=3));
            let values = (0..rng.gen_range(1..=12))
                .map(|_| {
                    let v = level;
                    level += Money::new(rng.gen_range(0..=6), 2);
                    v
                })
                .collect();
            CurveShape::Table { values }
        }
    };
    let finite_supply = matches!(shape, CurveShape::LimitedSupply { cap: Price::Finite(_), .. });
    let limit = if finite_supply || rng.gen_bool(0.2) { Some(rng.gen_range(1..=40)) } else { None };
    CostCurve::new(shape, limit).unwrap()
}

/// A random linear or polynomial curve.
pub fn random_convex_curve<R: Rng>(rng: &mut R) -> CostCurve {
    let a = Money::new(rng.gen_range(1..=6), rng.gen_range(1..=3));
    if rng.gen_bool(0.5) {
        CostCurve::linear(a).unwrap()
    } else {
        CostCurve::polynomial(a, rng.gen_range(1..=3)).unwrap()
    }
}

pub fn pick<'a, R: Rng>(items: &'a [&'a str], rng: &mut R) -> &'a str {
    items.choose(rng).unwrap()
}
