//! Offline benchmarks on small instances.
//!
//! Exact welfare optimum by exhaustive enumeration (with a hard budget), an
//! exact greedy for additive buyers, the profit benchmarks, and the per-item
//! structural quantities of a finished run.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::CostCurve;
use crate::market::Transcript;
use crate::money::{Money, Price};
use crate::valuation::{Bundle, PriceVector, Valuation, MAX_TABLE_ITEMS};

/// Default enumeration budget: `(2^4)^6` allocations.
pub const DEFAULT_OPT_BUDGET: u64 = 1 << 24;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("enumeration needs {required} steps, budget is {budget}")]
    BudgetExceeded { required: u64, budget: u64 },
    #[error("buyer {0} is not additive")]
    NotAdditive(usize),
    #[error("buyer {buyer} is defined over {got} items, instance has {expected}")]
    UniverseMismatch { buyer: usize, got: usize, expected: usize },
}

/// An offline assignment of one bundle per buyer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub bundles: Vec<Bundle>,
    /// `λ_i`, copies of each item handed out.
    pub copies: Vec<u64>,
    pub value: Money,
    pub cost: Money,
    pub welfare: Money,
}

impl Allocation {
    /// Score `bundles`, or `None` if some item is allocated past its supply.
    pub fn evaluate(curves: &[CostCurve], buyers: &[Valuation], bundles: Vec<Bundle>) -> Option<Allocation> {
        let mut copies = vec![0u64; curves.len()];
        for b in &bundles {
            for i in b.items() {
                copies[i] += 1;
            }
        }
        let cost = curves
            .iter()
            .zip(&copies)
            .try_fold(Money::ZERO, |acc, (c, k)| c.cumulative_cost(*k).finite().map(|x| acc + x))?;
        let value = buyers.iter().zip(&bundles).map(|(v, b)| v.value_of(*b)).sum();
        Some(Allocation { bundles, copies, value, cost, welfare: value - cost })
    }
}

fn check_universe(curves: &[CostCurve], buyers: &[Valuation]) -> Result<(), OracleError> {
    match buyers.iter().position(|v| v.universe_size() != curves.len()) {
        Some(buyer) => Err(OracleError::UniverseMismatch {
            buyer,
            got: buyers[buyer].universe_size(),
            expected: curves.len(),
        }),
        None => Ok(()),
    }
}

/// Number of allocations the brute force enumerates, `2^(n·m)`, saturating.
pub fn enumeration_size(items: usize, buyers: usize) -> u64 {
    let bits = items.saturating_mul(buyers);
    if bits >= 64 {
        u64::MAX
    } else {
        1u64 << bits
    }
}

struct Search<'a> {
    values: Vec<Vec<Money>>,
    costs: &'a [Vec<Price>],
    copies: Vec<usize>,
    chosen: Vec<u64>,
    best: Option<(Money, Vec<u64>)>,
}

impl Search<'_> {
    fn visit(&mut self, buyer: usize, welfare: Money) {
        if buyer == self.values.len() {
            if self.best.as_ref().is_none_or(|(w, _)| welfare > *w) {
                self.best = Some((welfare, self.chosen.clone()));
            }
            return;
        }
        'masks: for mask in 0..self.values[buyer].len() as u64 {
            let mut gain = self.values[buyer][mask as usize];
            for item in Bundle::from_mask(mask).items() {
                match self.costs[item][self.copies[item]] {
                    Price::Finite(c) => gain -= c,
                    Price::Infinite => continue 'masks,
                }
            }
            for item in Bundle::from_mask(mask).items() {
                self.copies[item] += 1;
            }
            self.chosen.push(mask);
            self.visit(buyer + 1, welfare + gain);
            self.chosen.pop();
            for item in Bundle::from_mask(mask).items() {
                self.copies[item] -= 1;
            }
        }
    }
}

/// Welfare-maximizing allocation by exhaustive search over every buyer's
/// bundle. Among optimal allocations the lexicographically smallest sequence
/// of bundle bitmasks (in buyer order) is returned.
pub fn opt_welfare_bruteforce(
    curves: &[CostCurve],
    buyers: &[Valuation],
    budget: u64,
) -> Result<Allocation, OracleError> {
    check_universe(curves, buyers)?;
    let n = curves.len();
    let required = enumeration_size(n, buyers.len());
    if required > budget {
        return Err(OracleError::BudgetExceeded { required, budget });
    }
    let m = buyers.len();
    let costs: Vec<Vec<Price>> = curves.iter().map(|c| (1..=m as u64 + 1).map(|k| c.marginal(k)).collect()).collect();
    let values = buyers
        .iter()
        .map(|v| (0..1u64 << n).map(|mask| v.value_of(Bundle::from_mask(mask))).collect())
        .collect();
    let mut search = Search { values, costs: &costs, copies: vec![0; n], chosen: Vec::with_capacity(m), best: None };
    search.visit(0, Money::ZERO);
    let (_, masks) = search.best.expect("the all-empty allocation is always feasible");
    let bundles = masks.into_iter().map(Bundle::from_mask).collect();
    Ok(Allocation::evaluate(curves, buyers, bundles).expect("search only visits feasible allocations"))
}

/// Exact optimum when every buyer is additive: items separate, so each item
/// goes to its highest-value buyers while the `k`-th value covers `c(k)`.
pub fn opt_welfare_additive(curves: &[CostCurve], buyers: &[Valuation]) -> Result<Allocation, OracleError> {
    check_universe(curves, buyers)?;
    let mut per_buyer = Vec::with_capacity(buyers.len());
    for (index, v) in buyers.iter().enumerate() {
        match v {
            Valuation::Additive { values } => per_buyer.push(values),
            _ => return Err(OracleError::NotAdditive(index)),
        }
    }
    let mut bundles = vec![Bundle::EMPTY; buyers.len()];
    for (item, curve) in curves.iter().enumerate() {
        let mut order: Vec<usize> = (0..buyers.len()).collect();
        order.sort_by(|a, b| per_buyer[*b][item].cmp(&per_buyer[*a][item]).then(a.cmp(b)));
        for (k, buyer) in order.into_iter().enumerate() {
            if Price::Finite(per_buyer[buyer][item]) >= curve.marginal(k as u64 + 1) {
                bundles[buyer].insert(item);
            } else {
                break;
            }
        }
    }
    Ok(Allocation::evaluate(curves, buyers, bundles).expect("greedy never allocates an infinite-cost copy"))
}

/// Exact optimum, using the additive greedy when it applies.
pub fn opt_welfare(curves: &[CostCurve], buyers: &[Valuation], budget: u64) -> Result<(Allocation, OptMethod), OracleError> {
    if buyers.iter().all(Valuation::is_additive) {
        opt_welfare_additive(curves, buyers).map(|a| (a, OptMethod::Additive))
    } else {
        opt_welfare_bruteforce(curves, buyers, budget).map(|a| (a, OptMethod::BruteForce))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptMethod {
    Additive,
    BruteForce,
}

/// Profit benchmarks for one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfitBenchmark {
    /// `SW(OPT)`, an upper bound on any seller's profit.
    pub welfare_bound: Money,
    /// Best profit from one fixed price per item held for the whole run.
    pub best_fixed_price_profit: Money,
    pub best_fixed_prices: Vec<Price>,
}

/// Candidate fixed prices for `item`: every positive marginal value some
/// buyer has for it, plus `+∞` (never sell).
pub fn candidate_prices(item: usize, items: usize, buyers: &[Valuation]) -> Vec<Price> {
    let mut out: Vec<Price> = Vec::new();
    for v in buyers {
        for mask in 0..1u64 << items {
            let without = Bundle::from_mask(mask);
            if without.contains(item) {
                continue;
            }
            let mut with = without;
            with.insert(item);
            let marginal = v.value_of(with) - v.value_of(without);
            if marginal.is_positive() {
                out.push(Price::Finite(marginal));
            }
        }
    }
    out.push(Price::Infinite);
    out.sort();
    out.dedup();
    out
}

/// Seller profit when each item is offered at a fixed price for the whole
/// run. Prices are read as limits from below: a buyer indifferent between
/// buying a positively priced item or not buys it, which makes the value the
/// supremum over nearby prices.
pub fn fixed_price_profit(curves: &[CostCurve], buyers: &[Valuation], prices: &[Price]) -> Money {
    let n = curves.len();
    let mut sold = vec![0u64; n];
    let mut profit = Money::ZERO;
    for v in buyers {
        let posted: Vec<Price> = (0..n)
            .map(|i| if curves[i].marginal(sold[i] + 1).is_finite() { prices[i] } else { Price::Infinite })
            .collect();
        let posted = PriceVector::new(posted).expect("fixed prices are non-negative");
        let bundle = seller_favoring_demand(v, &posted);
        for i in bundle.items() {
            sold[i] += 1;
            let price = posted.get(i).finite().expect("demand avoids infinite prices");
            let cost = curves[i].marginal(sold[i]).finite().expect("available copies have finite cost");
            profit += price - cost;
        }
    }
    profit
}

fn seller_favoring_demand(v: &Valuation, prices: &PriceVector) -> Bundle {
    let n = v.universe_size();
    let unavailable = prices.unavailable();
    let positive = Bundle::from_items((0..n).filter(|i| prices.get(*i).finite().is_some_and(|p| p.is_positive())));
    let mut best = (Money::ZERO, 0usize, Bundle::EMPTY);
    for mask in 1..1u64 << n {
        let bundle = Bundle::from_mask(mask);
        if mask & unavailable.mask() != 0 {
            continue;
        }
        let u = v.value_of(bundle) - prices.bundle_price(bundle).finite().expect("available bundle");
        let paid = (mask & positive.mask()).count_ones() as usize;
        let better = match u.cmp(&best.0) {
            Ordering::Greater => true,
            Ordering::Less => false,
            Ordering::Equal => match paid.cmp(&best.1) {
                Ordering::Greater => true,
                Ordering::Less => false,
                Ordering::Equal => bundle.tie_order(&best.2) == Ordering::Less,
            },
        };
        if better {
            best = (u, paid, bundle);
        }
    }
    best.2
}

/// Optimal-profit benchmarks: the `SW(OPT)` upper bound and the best fixed
/// item prices over the grid of [`candidate_prices`].
pub fn opt_profit_bruteforce(
    curves: &[CostCurve],
    buyers: &[Valuation],
    budget: u64,
) -> Result<ProfitBenchmark, OracleError> {
    let (opt, _) = opt_welfare(curves, buyers, budget)?;
    let n = curves.len();
    if n > MAX_TABLE_ITEMS {
        return Err(OracleError::BudgetExceeded { required: u64::MAX, budget });
    }
    let grid: Vec<Vec<Price>> = (0..n).map(|i| candidate_prices(i, n, buyers)).collect();
    let cells = grid.iter().try_fold(1u64, |acc, g| acc.checked_mul(g.len() as u64)).unwrap_or(u64::MAX);
    let required = cells.saturating_mul(buyers.len().max(1) as u64).saturating_mul(1 << n);
    if required > budget {
        return Err(OracleError::BudgetExceeded { required, budget });
    }
    let mut best = (Money::ZERO, vec![Price::Infinite; n]);
    let mut index = vec![0usize; n];
    loop {
        let prices: Vec<Price> = index.iter().enumerate().map(|(i, j)| grid[i][*j]).collect();
        let profit = fixed_price_profit(curves, buyers, &prices);
        if profit > best.0 {
            best = (profit, prices);
        }
        // odometer over the grid
        let Some(pos) = (0..n).find(|i| index[*i] + 1 < grid[*i].len()) else { break };
        index[pos] += 1;
        index[..pos].iter_mut().for_each(|j| *j = 0);
    }
    Ok(ProfitBenchmark { welfare_bound: opt.welfare, best_fixed_price_profit: best.0, best_fixed_prices: best.1 })
}

/// Structural quantities for one item after a run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralEntry {
    pub item: usize,
    pub sold: u64,
    /// `π_i`
    pub profit: Money,
    /// `P^f_i`
    pub first_unsold_price: Price,
    /// Area between the cost curve and the horizontal line at `P^f_i`;
    /// `+∞` when `P^f_i` is, or when the area is too large to hold exactly.
    pub area: Price,
    /// `π_i / area`; `+∞` for zero area, 0 for infinite area.
    pub ratio: Price,
}

/// Per item: realized profit against the area under the first-unsold price.
pub fn structural_report(transcript: &Transcript, curves: &[CostCurve]) -> Vec<StructuralEntry> {
    transcript
        .items
        .iter()
        .map(|outcome| {
            let curve = &curves[outcome.item];
            let area = match outcome.first_unsold_price {
                Price::Finite(p) => curve.checked_area_under_price(p).map_or(Price::Infinite, Price::Finite),
                Price::Infinite => Price::Infinite,
            };
            let ratio = match area {
                Price::Infinite => Price::ZERO,
                Price::Finite(a) if a.is_zero() => Price::Infinite,
                Price::Finite(a) => Price::Finite(outcome.profit / a),
            };
            StructuralEntry {
                item: outcome.item,
                sold: outcome.sold,
                profit: outcome.profit,
                first_unsold_price: outcome.first_unsold_price,
                area,
                ratio,
            }
        })
        .collect()
}
