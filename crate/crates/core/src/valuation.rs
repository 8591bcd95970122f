//! Buyer valuations and the demand oracle.
//!
//! A buyer facing posted prices takes the bundle maximizing
//! `v(S) − Σ_{i∈S} p_i`. Ties go to the smaller bundle, then to the
//! lexicographically smallest sorted item list, so transcripts are
//! reproducible.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::money::{Money, Price};

/// Largest universe a bundle bitmask can address.
pub const MAX_ITEMS: usize = 64;
/// Largest universe an explicit valuation table may span.
pub const MAX_TABLE_ITEMS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValuationError {
    #[error("item {item} outside universe of {items} items")]
    ItemOutOfRange { item: usize, items: usize },
    #[error("universe of {0} items exceeds the supported maximum")]
    TooManyItems(usize),
    #[error("valuation values must be non-negative")]
    NegativeValue,
    #[error("the empty bundle must be worth 0")]
    NonZeroEmptyBundle,
    #[error("price vector has {got} entries, expected {expected}")]
    PriceLength { got: usize, expected: usize },
    #[error("posted prices must be non-negative")]
    NegativePrice,
}

/// A set of items, stored as a bitmask over item indices `0..64`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Bundle(u64);

impl Bundle {
    pub const EMPTY: Bundle = Bundle(0);

    pub fn from_mask(mask: u64) -> Self {
        Bundle(mask)
    }

    pub fn mask(&self) -> u64 {
        self.0
    }

    pub fn from_items<I: IntoIterator<Item = usize>>(items: I) -> Self {
        Bundle(items.into_iter().fold(0u64, |acc, i| {
            assert!(i < MAX_ITEMS, "item index {i} exceeds bundle capacity");
            acc | (1 << i)
        }))
    }

    pub fn singleton(item: usize) -> Self {
        Self::from_items([item])
    }

    pub fn contains(&self, item: usize) -> bool {
        item < MAX_ITEMS && self.0 & (1 << item) != 0
    }

    pub fn insert(&mut self, item: usize) {
        self.0 |= 1 << item;
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(&self, other: Bundle) -> bool {
        self.0 & !other.0 == 0
    }

    /// Member items in increasing order.
    pub fn items(&self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                None
            } else {
                let i = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(i)
            }
        })
    }

    /// Highest item index + 1, or 0 for the empty bundle.
    pub fn span(&self) -> usize {
        (u64::BITS - self.0.leading_zeros()) as usize
    }

    /// The demand tie-break order: fewer items first, then the smaller sorted
    /// item list.
    pub fn tie_order(&self, other: &Bundle) -> Ordering {
        self.len().cmp(&other.len()).then_with(|| {
            if self.0 == other.0 {
                Ordering::Equal
            } else {
                let first_difference = (self.0 ^ other.0).trailing_zeros();
                if self.0 & (1 << first_difference) != 0 {
                    Ordering::Less
                } else {
                    Ordering::Greater
                }
            }
        })
    }
}

impl fmt::Debug for Bundle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.items()).finish()
    }
}

impl Serialize for Bundle {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.items())
    }
}

impl<'de> Deserialize<'de> for Bundle {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let items = Vec::<usize>::deserialize(deserializer)?;
        if let Some(bad) = items.iter().find(|i| **i >= MAX_ITEMS) {
            return Err(serde::de::Error::custom(format!("item index {bad} exceeds bundle capacity")));
        }
        if items.windows(2).any(|w| w[0] >= w[1]) {
            return Err(serde::de::Error::custom("bundle items must be strictly increasing"));
        }
        Ok(Bundle::from_items(items))
    }
}

/// How an explicit table values bundles it does not list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Closure {
    /// Unlisted bundles are worth 0.
    Exact,
    /// A bundle is worth the best listed subset of it.
    Monotone,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TableEntry {
    bundle: Bundle,
    value: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum RawValuation {
    Additive { values: Vec<Money> },
    UnitDemand { values: Vec<Money> },
    SingleMinded { items: usize, bundle: Bundle, value: Money },
    Table { items: usize, closure: Closure, entries: Vec<TableEntry> },
}

/// A buyer's set function over bundles of `universe_size()` items.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawValuation", into = "RawValuation")]
pub enum Valuation {
    Additive { values: Vec<Money> },
    UnitDemand { values: Vec<Money> },
    SingleMinded { items: usize, bundle: Bundle, value: Money },
    Table { items: usize, closure: Closure, entries: BTreeMap<Bundle, Money> },
}

impl TryFrom<RawValuation> for Valuation {
    type Error = ValuationError;
    fn try_from(raw: RawValuation) -> Result<Self, ValuationError> {
        match raw {
            RawValuation::Additive { values } => Valuation::additive(values),
            RawValuation::UnitDemand { values } => Valuation::unit_demand(values),
            RawValuation::SingleMinded { items, bundle, value } => Valuation::single_minded(items, bundle, value),
            RawValuation::Table { items, closure, entries } => {
                Valuation::table(items, closure, entries.into_iter().map(|e| (e.bundle, e.value)))
            }
        }
    }
}

impl From<Valuation> for RawValuation {
    fn from(v: Valuation) -> Self {
        match v {
            Valuation::Additive { values } => RawValuation::Additive { values },
            Valuation::UnitDemand { values } => RawValuation::UnitDemand { values },
            Valuation::SingleMinded { items, bundle, value } => RawValuation::SingleMinded { items, bundle, value },
            Valuation::Table { items, closure, entries } => RawValuation::Table {
                items,
                closure,
                entries: entries.into_iter().map(|(bundle, value)| TableEntry { bundle, value }).collect(),
            },
        }
    }
}

fn check_values(values: &[Money]) -> Result<(), ValuationError> {
    if values.len() > MAX_ITEMS {
        return Err(ValuationError::TooManyItems(values.len()));
    }
    if values.iter().any(Money::is_negative) {
        return Err(ValuationError::NegativeValue);
    }
    Ok(())
}

fn check_bundle(bundle: Bundle, items: usize) -> Result<(), ValuationError> {
    if bundle.span() > items {
        Err(ValuationError::ItemOutOfRange { item: bundle.span() - 1, items })
    } else {
        Ok(())
    }
}

impl Valuation {
    pub fn additive(values: Vec<Money>) -> Result<Self, ValuationError> {
        check_values(&values)?;
        Ok(Valuation::Additive { values })
    }

    pub fn unit_demand(values: Vec<Money>) -> Result<Self, ValuationError> {
        check_values(&values)?;
        Ok(Valuation::UnitDemand { values })
    }

    pub fn single_minded(items: usize, bundle: Bundle, value: Money) -> Result<Self, ValuationError> {
        if items > MAX_ITEMS {
            return Err(ValuationError::TooManyItems(items));
        }
        check_bundle(bundle, items)?;
        if value.is_negative() {
            return Err(ValuationError::NegativeValue);
        }
        if bundle.is_empty() && value.is_positive() {
            return Err(ValuationError::NonZeroEmptyBundle);
        }
        Ok(Valuation::SingleMinded { items, bundle, value })
    }

    /// Explicit table. Later duplicates of a bundle overwrite earlier ones.
    pub fn table<I>(items: usize, closure: Closure, entries: I) -> Result<Self, ValuationError>
    where
        I: IntoIterator<Item = (Bundle, Money)>,
    {
        if items > MAX_TABLE_ITEMS {
            return Err(ValuationError::TooManyItems(items));
        }
        let mut map = BTreeMap::new();
        for (bundle, value) in entries {
            check_bundle(bundle, items)?;
            if value.is_negative() {
                return Err(ValuationError::NegativeValue);
            }
            if bundle.is_empty() && !value.is_zero() {
                return Err(ValuationError::NonZeroEmptyBundle);
            }
            map.insert(bundle, value);
        }
        Ok(Valuation::Table { items, closure, entries: map })
    }

    pub fn universe_size(&self) -> usize {
        match self {
            Valuation::Additive { values } | Valuation::UnitDemand { values } => values.len(),
            Valuation::SingleMinded { items, .. } | Valuation::Table { items, .. } => *items,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Valuation::Additive { .. } => "additive",
            Valuation::UnitDemand { .. } => "unit_demand",
            Valuation::SingleMinded { .. } => "single_minded",
            Valuation::Table { .. } => "table",
        }
    }

    pub fn is_additive(&self) -> bool {
        matches!(self, Valuation::Additive { .. })
    }

    /// `v(S)`.
    pub fn value(&self, bundle: Bundle) -> Result<Money, ValuationError> {
        check_bundle(bundle, self.universe_size())?;
        Ok(self.value_of(bundle))
    }

    /// `v(S)` for a bundle already known to lie in the universe.
    pub(crate) fn value_of(&self, bundle: Bundle) -> Money {
        match self {
            Valuation::Additive { values } => bundle.items().map(|i| values[i]).sum(),
            Valuation::UnitDemand { values } => bundle.items().map(|i| values[i]).max().unwrap_or(Money::ZERO),
            Valuation::SingleMinded { bundle: wanted, value, .. } => {
                if wanted.is_subset_of(bundle) {
                    *value
                } else {
                    Money::ZERO
                }
            }
            Valuation::Table { closure: Closure::Exact, entries, .. } => {
                entries.get(&bundle).copied().unwrap_or(Money::ZERO)
            }
            Valuation::Table { closure: Closure::Monotone, entries, .. } => entries
                .iter()
                .filter(|(listed, _)| listed.is_subset_of(bundle))
                .map(|(_, v)| *v)
                .max()
                .unwrap_or(Money::ZERO),
        }
    }
}

/// The posted price of each item's next copy, as one buyer sees it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PriceVector(Vec<Price>);

impl PriceVector {
    pub fn new(prices: Vec<Price>) -> Result<Self, ValuationError> {
        if prices.iter().any(|p| p.finite().is_some_and(|m| m.is_negative())) {
            return Err(ValuationError::NegativePrice);
        }
        Ok(PriceVector(prices))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, item: usize) -> Price {
        self.0[item]
    }

    pub fn as_slice(&self) -> &[Price] {
        &self.0
    }

    /// `Σ_{i∈S} p_i`, `+∞` if any member is unpriceable.
    pub fn bundle_price(&self, bundle: Bundle) -> Price {
        bundle.items().fold(Price::ZERO, |acc, i| acc.saturating_add(self.0[i]))
    }

    /// Items whose posted price is `+∞`.
    pub fn unavailable(&self) -> Bundle {
        Bundle::from_items(self.0.iter().enumerate().filter(|(_, p)| p.is_infinite()).map(|(i, _)| i))
    }
}

/// Buyer utility `v(S) − p(S)`, or `None` when `S` contains an unpriceable item.
pub fn utility(valuation: &Valuation, prices: &PriceVector, bundle: Bundle) -> Option<Money> {
    prices.bundle_price(bundle).finite().map(|p| valuation.value_of(bundle) - p)
}

/// The utility-maximizing bundle at `prices`, under the tie-break of
/// [`Bundle::tie_order`].
pub fn demand_bundle(valuation: &Valuation, prices: &PriceVector) -> Result<Bundle, ValuationError> {
    let n = valuation.universe_size();
    if prices.len() != n {
        return Err(ValuationError::PriceLength { got: prices.len(), expected: n });
    }
    let margin = |i: usize, v: Money| prices.get(i).finite().map(|p| v - p);
    Ok(match valuation {
        Valuation::Additive { values } => Bundle::from_items(
            values
                .iter()
                .enumerate()
                .filter(|(i, v)| margin(*i, **v).is_some_and(|m| m.is_positive()))
                .map(|(i, _)| i),
        ),
        Valuation::UnitDemand { values } => {
            // utility(S) ≤ v_j − p_j for the best member j, so only singletons matter
            let mut best: Option<(Money, usize)> = None;
            for (i, v) in values.iter().enumerate() {
                if let Some(m) = margin(i, *v) {
                    if m.is_positive() && best.is_none_or(|(b, _)| m > b) {
                        best = Some((m, i));
                    }
                }
            }
            best.map_or(Bundle::EMPTY, |(_, i)| Bundle::singleton(i))
        }
        Valuation::SingleMinded { bundle, value, .. } => match prices.bundle_price(*bundle) {
            Price::Finite(p) if *value > p => *bundle,
            _ => Bundle::EMPTY,
        },
        Valuation::Table { entries, .. } => {
            // Any unlisted bundle is beaten, or tied by a strictly smaller one,
            // so the listed bundles and ∅ are the only candidates.
            let mut best = (Money::ZERO, Bundle::EMPTY);
            for bundle in entries.keys() {
                if let Some(u) = utility(valuation, prices, *bundle) {
                    if u > best.0 || (u == best.0 && bundle.tie_order(&best.1) == Ordering::Less) {
                        best = (u, *bundle);
                    }
                }
            }
            best.1
        }
    })
}
