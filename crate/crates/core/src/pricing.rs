//! Posted-pricing schemes.
//!
//! Every scheme prices the `k`-th copy of an item as a function of the item's
//! cost curve and `k` alone. A [`PostedPriceScheme`] tracks how many copies
//! of each item have been sold and quotes the next one. The profit wrapper
//! optionally multiplies every quote by a power of two chosen once per run.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::CostCurve;
use crate::money::{Money, Price};

/// Longest chunk accepted; the doubling ladder divides by `2^(ℓ-1)`.
pub const MAX_CHUNK: u64 = 96;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PricingError {
    #[error("unknown scheme {0:?}")]
    UnknownScheme(String),
    #[error("chunk size must be between 1 and {MAX_CHUNK}, got {0}")]
    ChunkSize(u64),
    #[error("a v_max bound is required for this scheme")]
    MissingVmax,
    #[error("v_max bound must be at least 1, got {0}")]
    VmaxTooSmall(Money),
    #[error("mixing weights rho and mu must be positive")]
    NonPositiveWeight,
    #[error("smoothing needs convex cost curves; item {item} is not convex")]
    NonConvexCurve { item: usize },
    #[error("item {item} out of range for {items} items")]
    ItemOutOfRange { item: usize, items: usize },
    #[error("copy {copy} of item {item} is priced at +inf and cannot be sold")]
    InfiniteSale { item: usize, copy: u64 },
}

/// The welfare pricing rule, i.e. how copy `k` is priced from the curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WelfareRule {
    /// `p(k) = c(k)`
    AtCost,
    /// `p(k) = c(2k)`
    TwiceIndex,
    /// Doubling ladder per chunk of `ℓ` copies, floored at `c(k)`.
    Chunked,
    /// `p(k) = (C(k+ℓ) − C(k)) / ℓ`
    Smoothing,
    /// `p(k) = c(k+1)`
    NextCost,
    /// `p(k) = 2·c(k)`
    DoubleCost,
}

impl WelfareRule {
    pub const ALL: [WelfareRule; 6] = [
        WelfareRule::AtCost,
        WelfareRule::TwiceIndex,
        WelfareRule::Chunked,
        WelfareRule::Smoothing,
        WelfareRule::NextCost,
        WelfareRule::DoubleCost,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            WelfareRule::AtCost => "at_cost",
            WelfareRule::TwiceIndex => "twice_index",
            WelfareRule::Chunked => "chunked",
            WelfareRule::Smoothing => "smoothing",
            WelfareRule::NextCost => "next_cost",
            WelfareRule::DoubleCost => "double_cost",
        }
    }

    fn uses_chunk(&self) -> bool {
        matches!(self, WelfareRule::Chunked | WelfareRule::Smoothing)
    }
}

impl FromStr for WelfareRule {
    type Err = PricingError;
    fn from_str(s: &str) -> Result<Self, PricingError> {
        WelfareRule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| PricingError::UnknownScheme(s.to_string()))
    }
}

impl fmt::Display for WelfareRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub fn price_at_cost(curve: &CostCurve, k: u64) -> Price {
    curve.marginal(k)
}

/// Price copy `k` at the production cost of copy `2k`.
pub fn price_twice_index(curve: &CostCurve, k: u64) -> Price {
    curve.marginal(2 * k)
}

pub fn price_next_cost(curve: &CostCurve, k: u64) -> Price {
    curve.marginal(k + 1)
}

pub fn price_double_cost(curve: &CostCurve, k: u64) -> Price {
    curve.marginal(k).scale(Money::from_int(2))
}

/// The raw doubling ladder for copy `k` with chunks of `chunk` copies.
///
/// Copy `k` sits at position `j ∈ 1..=ℓ` of chunk `t = ⌈k/ℓ⌉`. The ladder
/// ends at `q = c(tℓ + 1)`, the cost just past the chunk, and halves going
/// back: `q / 2^(ℓ−j)`. When `q` is `+∞` the ladder is anchored at `vmax`.
pub fn chunk_ladder(curve: &CostCurve, k: u64, chunk: u64, vmax: Option<Money>) -> Result<Price, PricingError> {
    debug_assert!(k >= 1 && chunk >= 1);
    let t = k.div_ceil(chunk);
    let j = k - (t - 1) * chunk;
    let anchor = match curve.marginal(t * chunk + 1) {
        Price::Finite(q) => q,
        Price::Infinite => vmax.ok_or(PricingError::MissingVmax)?,
    };
    Ok(Price::Finite(anchor.scale_pow2(-((chunk - j) as i32))))
}

/// Chunked price: the ladder, never below the copy's own marginal cost.
pub fn price_chunked(curve: &CostCurve, k: u64, chunk: u64, vmax: Option<Money>) -> Result<Price, PricingError> {
    let cost = curve.marginal(k);
    Ok(chunk_ladder(curve, k, chunk, vmax)?.max(cost))
}

/// Average marginal cost of the `chunk` copies after copy `k`.
pub fn price_smoothing(curve: &CostCurve, k: u64, chunk: u64) -> Price {
    let window = (k + 1..=k + chunk).fold(Price::ZERO, |acc, j| acc.saturating_add(curve.marginal(j)));
    match window {
        Price::Finite(sum) => Price::Finite(sum / Money::from(chunk)),
        Price::Infinite => Price::Infinite,
    }
}

/// `⌈log₂(n·vmax + 2)⌉`.
pub fn default_chunk_size(items: usize, vmax: Money) -> u64 {
    (Money::from(items as u64) * vmax + Money::from_int(2)).ceil_log2() as u64
}

/// Outcome of the profit wrapper's once-per-run coin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "branch", rename_all = "snake_case")]
pub enum WrapperBranch {
    /// Quote the welfare prices unchanged.
    Welfare,
    /// Quote the welfare prices times `2^exponent`.
    Surcharge { exponent: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfitWrapper {
    pub rho: Money,
    pub mu: Money,
    #[serde(flatten)]
    pub branch: WrapperBranch,
}

impl ProfitWrapper {
    /// Draw the coin: welfare with probability `ρ/(ρ+μ)`, otherwise a
    /// surcharge exponent uniform on `0..=⌈log₂ vmax⌉`.
    pub fn draw<R: Rng + ?Sized>(rho: Money, mu: Money, vmax: Money, rng: &mut R) -> Result<Self, PricingError> {
        if !rho.is_positive() || !mu.is_positive() {
            return Err(PricingError::NonPositiveWeight);
        }
        if vmax < Money::ONE {
            return Err(PricingError::VmaxTooSmall(vmax));
        }
        let welfare_probability = rho / (rho + mu);
        let draw = rng.gen_range(0..welfare_probability.denom());
        let branch = if draw < welfare_probability.numer() {
            WrapperBranch::Welfare
        } else {
            WrapperBranch::Surcharge { exponent: rng.gen_range(0..=vmax.ceil_log2()) }
        };
        Ok(ProfitWrapper { rho, mu, branch })
    }

    pub fn factor(&self) -> Money {
        match self.branch {
            WrapperBranch::Welfare => Money::ONE,
            WrapperBranch::Surcharge { exponent } => Money::ONE.scale_pow2(exponent as i32),
        }
    }
}

/// Everything needed to rebuild a scheme's price ladders, including the
/// realized wrapper coin. Stored in transcripts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeDescriptor {
    pub rule: WelfareRule,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chunk_size: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vmax_bound: Option<Money>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wrapper: Option<ProfitWrapper>,
}

impl SchemeDescriptor {
    /// `rule` or `profit_wrap:rule`.
    pub fn name(&self) -> String {
        match self.wrapper {
            Some(_) => format!("profit_wrap:{}", self.rule),
            None => self.rule.to_string(),
        }
    }
}

/// Per-item sale state: copies sold `x_i` and profit `π_i`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemSaleState {
    pub sold: u64,
    pub profit: Money,
}

/// One recorded sale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sale {
    pub copy: u64,
    pub price: Money,
    pub cost: Money,
}

/// A running posted-price scheme over a fixed set of items.
#[derive(Debug, Clone)]
pub struct PostedPriceScheme {
    descriptor: SchemeDescriptor,
    curves: Vec<CostCurve>,
    states: Vec<ItemSaleState>,
}

impl PostedPriceScheme {
    /// A welfare scheme. `chunk_size` defaults to [`default_chunk_size`] for
    /// the chunked and smoothing rules.
    pub fn welfare(
        rule: WelfareRule,
        curves: Vec<CostCurve>,
        chunk_size: Option<u64>,
        vmax_bound: Option<Money>,
    ) -> Result<Self, PricingError> {
        if let Some(v) = vmax_bound {
            if v < Money::ONE {
                return Err(PricingError::VmaxTooSmall(v));
            }
        }
        let chunk_size = if rule.uses_chunk() {
            Some(match chunk_size {
                Some(l) => l,
                None => default_chunk_size(curves.len(), vmax_bound.ok_or(PricingError::MissingVmax)?),
            })
        } else {
            None
        };
        Self::from_descriptor(SchemeDescriptor { rule, chunk_size, vmax_bound, wrapper: None }, curves)
    }

    /// Rebuild a scheme from a stored descriptor; the wrapper coin is taken
    /// as recorded rather than redrawn.
    pub fn from_descriptor(descriptor: SchemeDescriptor, curves: Vec<CostCurve>) -> Result<Self, PricingError> {
        if let Some(l) = descriptor.chunk_size {
            if !(1..=MAX_CHUNK).contains(&l) {
                return Err(PricingError::ChunkSize(l));
            }
        } else if descriptor.rule.uses_chunk() {
            return Err(PricingError::ChunkSize(0));
        }
        if descriptor.rule == WelfareRule::Smoothing {
            if let Some(item) = curves.iter().position(|c| !c.is_convex()) {
                return Err(PricingError::NonConvexCurve { item });
            }
        }
        if let Some(w) = &descriptor.wrapper {
            if !w.rho.is_positive() || !w.mu.is_positive() {
                return Err(PricingError::NonPositiveWeight);
            }
            let vmax = descriptor.vmax_bound.ok_or(PricingError::MissingVmax)?;
            if let WrapperBranch::Surcharge { exponent } = w.branch {
                if exponent > vmax.ceil_log2() {
                    return Err(PricingError::VmaxTooSmall(vmax));
                }
            }
        }
        let states = vec![ItemSaleState::default(); curves.len()];
        Ok(PostedPriceScheme { descriptor, curves, states })
    }

    /// Wrap a fresh welfare scheme for profit, drawing the run's coin.
    pub fn wrap_for_profit<R: Rng + ?Sized>(
        self,
        rho: Money,
        mu: Money,
        rng: &mut R,
    ) -> Result<Self, PricingError> {
        let vmax = self.descriptor.vmax_bound.ok_or(PricingError::MissingVmax)?;
        let wrapper = ProfitWrapper::draw(rho, mu, vmax, rng)?;
        Ok(self.with_wrapper(wrapper))
    }

    /// Wrap with an already decided coin.
    pub fn with_wrapper(mut self, wrapper: ProfitWrapper) -> Self {
        self.descriptor.wrapper = Some(wrapper);
        self
    }

    pub fn descriptor(&self) -> &SchemeDescriptor {
        &self.descriptor
    }

    pub fn curves(&self) -> &[CostCurve] {
        &self.curves
    }

    pub fn items(&self) -> usize {
        self.curves.len()
    }

    pub fn state(&self, item: usize) -> &ItemSaleState {
        &self.states[item]
    }

    pub fn states(&self) -> &[ItemSaleState] {
        &self.states
    }

    fn check_item(&self, item: usize) -> Result<(), PricingError> {
        if item >= self.curves.len() {
            Err(PricingError::ItemOutOfRange { item, items: self.curves.len() })
        } else {
            Ok(())
        }
    }

    /// The welfare rule's price for copy `k` of `item`, before any surcharge.
    pub fn welfare_price(&self, item: usize, k: u64) -> Result<Price, PricingError> {
        self.check_item(item)?;
        let curve = &self.curves[item];
        let chunk = self.descriptor.chunk_size.unwrap_or(1);
        Ok(match self.descriptor.rule {
            WelfareRule::AtCost => price_at_cost(curve, k),
            WelfareRule::TwiceIndex => price_twice_index(curve, k),
            WelfareRule::Chunked => price_chunked(curve, k, chunk, self.descriptor.vmax_bound)?,
            WelfareRule::Smoothing => price_smoothing(curve, k, chunk),
            WelfareRule::NextCost => price_next_cost(curve, k),
            WelfareRule::DoubleCost => price_double_cost(curve, k),
        })
    }

    /// The posted price `p_i(k)` of copy `k ≥ 1`.
    pub fn price_of_copy(&self, item: usize, k: u64) -> Result<Price, PricingError> {
        let base = self.welfare_price(item, k)?;
        Ok(match &self.descriptor.wrapper {
            Some(w) => base.scale(w.factor()),
            None => base,
        })
    }

    /// `p_i(x_i + 1)`, the price of the first unsold copy.
    pub fn quote(&self, item: usize) -> Result<Price, PricingError> {
        self.check_item(item)?;
        self.price_of_copy(item, self.states[item].sold + 1)
    }

    /// Sell the next copy of `item` at its current quote.
    pub fn record_sale(&mut self, item: usize) -> Result<Sale, PricingError> {
        let copy = self.states.get(item).map(|s| s.sold + 1).unwrap_or(1);
        let price = self.quote(item)?.finite().ok_or(PricingError::InfiniteSale { item, copy })?;
        let cost = self.curves[item]
            .marginal(copy)
            .finite()
            .expect("a finitely priced copy under a mark-up rule has finite cost");
        let state = &mut self.states[item];
        state.sold = copy;
        state.profit += price - cost;
        Ok(Sale { copy, price, cost })
    }
}

/// Scheme selection as given on the command line: a rule name, optionally
/// prefixed with `profit_wrap:`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub rule: WelfareRule,
    pub profit_wrap: bool,
    pub chunk_size: Option<u64>,
    pub vmax_bound: Option<Money>,
    pub rho: Money,
    pub mu: Money,
}

impl SchemeConfig {
    pub fn new(rule: WelfareRule) -> Self {
        SchemeConfig { rule, profit_wrap: false, chunk_size: None, vmax_bound: None, rho: Money::ONE, mu: Money::ONE }
    }

    pub fn parse(name: &str) -> Result<Self, PricingError> {
        match name.strip_prefix("profit_wrap:") {
            Some(inner) => Ok(SchemeConfig { profit_wrap: true, ..SchemeConfig::new(inner.parse()?) }),
            None => Ok(SchemeConfig::new(name.parse()?)),
        }
    }

    pub fn name(&self) -> String {
        if self.profit_wrap {
            format!("profit_wrap:{}", self.rule)
        } else {
            self.rule.to_string()
        }
    }

    /// Build a fresh scheme over `curves`. `fallback_vmax` is used when the
    /// config carries no bound of its own; `rng` is only consulted by the
    /// profit wrapper.
    pub fn instantiate<R: Rng + ?Sized>(
        &self,
        curves: Vec<CostCurve>,
        fallback_vmax: Option<Money>,
        rng: &mut R,
    ) -> Result<PostedPriceScheme, PricingError> {
        let vmax = self.vmax_bound.or(fallback_vmax);
        let scheme = PostedPriceScheme::welfare(self.rule, curves, self.chunk_size, vmax)?;
        if self.profit_wrap {
            scheme.wrap_for_profit(self.rho, self.mu, rng)
        } else {
            Ok(scheme)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(v: i128) -> Money {
        Money::from_int(v)
    }

    fn fin(v: Money) -> Price {
        Price::Finite(v)
    }

    fn linear() -> CostCurve {
        CostCurve::linear(m(1)).unwrap()
    }

    #[test]
    fn twice_index_examples() {
        assert_eq!(price_twice_index(&linear(), 3), fin(m(6)));
        assert_eq!(price_twice_index(&CostCurve::polynomial(m(1), 2).unwrap(), 2), fin(m(16)));
        let zero_inf = CostCurve::limited_supply(4, Price::Infinite).unwrap();
        assert_eq!(price_twice_index(&zero_inf, 2), fin(m(0)));
        assert_eq!(price_twice_index(&zero_inf, 3), Price::Infinite);
    }

    #[test]
    fn chunk_ladder_examples() {
        assert_eq!(chunk_ladder(&linear(), 3, 2, None).unwrap(), fin(Money::new(5, 2)));
        // floored at c(3) = 3
        assert_eq!(price_chunked(&linear(), 3, 2, None).unwrap(), fin(m(3)));
        let zero_inf = CostCurve::limited_supply(4, Price::Infinite).unwrap();
        // chunk 1 ends before c(3) = 0; chunk 2 ends at c(5) = +inf, so it anchors at vmax
        assert_eq!(price_chunked(&zero_inf, 1, 2, Some(m(8))).unwrap(), fin(m(0)));
        assert_eq!(price_chunked(&zero_inf, 3, 2, Some(m(8))).unwrap(), fin(m(4)));
        assert_eq!(price_chunked(&zero_inf, 4, 2, Some(m(8))).unwrap(), fin(m(8)));
        // copies 1..2 sit before c(3) = 0
        assert_eq!(price_chunked(&zero_inf, 2, 2, Some(m(8))), Ok(fin(m(0))));
        assert_eq!(price_chunked(&zero_inf, 3, 2, None), Err(PricingError::MissingVmax));
        for k in 1..20 {
            assert_eq!(price_chunked(&linear(), k, 1, None).unwrap(), linear().marginal(k + 1));
        }
    }

    #[test]
    fn smoothing_examples() {
        assert_eq!(price_smoothing(&linear(), 3, 2), fin(Money::new(9, 2)));
        assert_eq!(price_smoothing(&CostCurve::polynomial(m(1), 2).unwrap(), 1, 3), fin(Money::new(29, 3)));
        let quad = CostCurve::polynomial(m(1), 2).unwrap();
        for k in 1..10 {
            assert_eq!(price_smoothing(&quad, k, 1), quad.marginal(k + 1));
        }
    }

    #[test]
    fn record_sale_accumulates_profit() {
        let mut scheme = PostedPriceScheme::welfare(WelfareRule::TwiceIndex, vec![linear()], None, None).unwrap();
        for _ in 0..3 {
            scheme.record_sale(0).unwrap();
        }
        assert_eq!(scheme.state(0).sold, 3);
        assert_eq!(scheme.state(0).profit, m(6));
        assert_eq!(scheme.quote(0).unwrap(), fin(m(8)));

        let mut at_cost = PostedPriceScheme::welfare(WelfareRule::AtCost, vec![linear()], None, None).unwrap();
        for _ in 0..5 {
            at_cost.record_sale(0).unwrap();
        }
        assert_eq!(at_cost.state(0).profit, m(0));
    }

    #[test]
    fn selling_an_infinite_copy_fails() {
        let zero_inf = CostCurve::limited_supply(2, Price::Infinite).unwrap();
        let mut scheme = PostedPriceScheme::welfare(WelfareRule::TwiceIndex, vec![zero_inf], None, None).unwrap();
        scheme.record_sale(0).unwrap();
        assert_eq!(scheme.record_sale(0), Err(PricingError::InfiniteSale { item: 0, copy: 2 }));
        assert_eq!(scheme.state(0).sold, 1);
    }

    #[test]
    fn construction_checks() {
        assert_eq!(
            PostedPriceScheme::welfare(WelfareRule::Chunked, vec![linear()], None, None).unwrap_err(),
            PricingError::MissingVmax
        );
        assert_eq!(
            PostedPriceScheme::welfare(WelfareRule::Smoothing, vec![linear(), CostCurve::logarithmic(m(1)).unwrap()], Some(2), None)
                .unwrap_err(),
            PricingError::NonConvexCurve { item: 1 }
        );
        assert_eq!(
            PostedPriceScheme::welfare(WelfareRule::Chunked, vec![linear()], Some(0), None).unwrap_err(),
            PricingError::ChunkSize(0)
        );
        let chunked = PostedPriceScheme::welfare(WelfareRule::Chunked, vec![linear(); 2], None, Some(m(100))).unwrap();
        // ⌈log₂(2·100 + 2)⌉
        assert_eq!(chunked.descriptor().chunk_size, Some(8));
    }

    #[test]
    fn scheme_names_parse() {
        let cfg = SchemeConfig::parse("profit_wrap:chunked").unwrap();
        assert!(cfg.profit_wrap);
        assert_eq!(cfg.rule, WelfareRule::Chunked);
        assert_eq!(cfg.name(), "profit_wrap:chunked");
        assert!(SchemeConfig::parse("vcg").is_err());
        assert_eq!(SchemeConfig::parse("at_cost").unwrap().rule, WelfareRule::AtCost);
    }

    #[test]
    fn wrapper_factor_and_branches() {
        let base = PostedPriceScheme::welfare(WelfareRule::TwiceIndex, vec![linear()], None, Some(m(64))).unwrap();
        let welfare = base.clone().with_wrapper(ProfitWrapper { rho: m(1), mu: m(1), branch: WrapperBranch::Welfare });
        let unit = base.clone().with_wrapper(ProfitWrapper {
            rho: m(1),
            mu: m(1),
            branch: WrapperBranch::Surcharge { exponent: 0 },
        });
        let eight = base.clone().with_wrapper(ProfitWrapper {
            rho: m(1),
            mu: m(1),
            branch: WrapperBranch::Surcharge { exponent: 3 },
        });
        for k in 1..10 {
            let p = base.price_of_copy(0, k).unwrap();
            assert_eq!(welfare.price_of_copy(0, k).unwrap(), p);
            assert_eq!(unit.price_of_copy(0, k).unwrap(), p);
            assert_eq!(eight.price_of_copy(0, k).unwrap(), p.scale(m(8)));
        }
    }

    #[test]
    fn wrapper_coin_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (mut welfare, mut top) = (0, 0);
        for _ in 0..4000 {
            match ProfitWrapper::draw(m(1), m(3), m(64), &mut rng).unwrap().branch {
                WrapperBranch::Welfare => welfare += 1,
                WrapperBranch::Surcharge { exponent } => {
                    assert!(exponent <= 6);
                    if exponent == 6 {
                        top += 1;
                    }
                }
            }
        }
        // expected 1000 welfare draws and 3000/7 ≈ 429 top exponents
        assert!((850..1150).contains(&welfare), "{welfare}");
        assert!((330..530).contains(&top), "{top}");
        assert!(ProfitWrapper::draw(m(0), m(1), m(64), &mut rng).is_err());
    }
}
