//! Adversarial instance families.
//!
//! Each family is indexed by a size parameter `s ≥ 1` and is built so the
//! targeted scheme's welfare (or profit) gap widens as `s` grows. All
//! families use a single buyer order: the buyers that should be turned away
//! arrive first.

use std::fmt;
use std::str::FromStr;

use super::instance::{Instance, InstanceMeta};
use super::HarnessError;
use crate::cost::{CostCurve, CurveShape};
use crate::money::{Money, Price};
use crate::valuation::Valuation;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    /// Cheap copies sold at cost go to low-value buyers first.
    AtCostFails,
    /// A 0-∞ curve on which doubling the index runs off the supply.
    TwiceIndexFailsZeroInf,
    /// A free-then-flat curve separating twice-the-index from `c(k+1)` and `2·c(k)`.
    RelatedAlgosFail,
    /// High-value buyers facing low welfare prices.
    WrapperBeatsWelfare,
}

impl Fixture {
    pub const ALL: [Fixture; 4] = [
        Fixture::AtCostFails,
        Fixture::TwiceIndexFailsZeroInf,
        Fixture::RelatedAlgosFail,
        Fixture::WrapperBeatsWelfare,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Fixture::AtCostFails => "at_cost_fails",
            Fixture::TwiceIndexFailsZeroInf => "twice_index_fails_zero_inf",
            Fixture::RelatedAlgosFail => "related_algos_fail",
            Fixture::WrapperBeatsWelfare => "wrapper_beats_welfare",
        }
    }
}

impl fmt::Display for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Fixture {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Fixture::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| HarnessError::UnknownFixture(s.to_string()))
    }
}

fn one_item_buyers(groups: &[(u64, Money)]) -> Vec<Valuation> {
    groups
        .iter()
        .flat_map(|(count, value)| (0..*count).map(move |_| Valuation::additive(vec![*value]).expect("non-negative")))
        .collect()
}

fn int(v: u64) -> Money {
    Money::from(v)
}

/// Build fixture `fixture` at size `size`.
pub fn gen_fixture(fixture: Fixture, size: u64) -> Result<Instance, HarnessError> {
    if size == 0 {
        return Err(HarnessError::InvalidArgument("fixture size must be at least 1".into()));
    }
    let s = size;
    let (curves, buyers) = match fixture {
        // One item with s free copies and cap s². s buyers of value 1 take
        // every free copy at price 0; s buyers of value s² then face price s²
        // and walk away. SW(at_cost) = s, SW(OPT) = s³.
        Fixture::AtCostFails => {
            let curve = CostCurve::new(
                CurveShape::LimitedSupply { free_copies: s, cap: Price::Finite(int(s * s)) },
                Some(4 * s),
            )?;
            (vec![curve], one_item_buyers(&[(s, Money::ONE), (s, int(s * s))]))
        }
        // One item with F = s + 1 free copies and nothing after, H = 2^s.
        // F buyers of value 1, then F buyers of value H. Twice-the-index gives
        // ⌊F/2⌋ copies to the first group and then quotes +∞. The chunked
        // ladder with ℓ = ⌈log₂(H + 2)⌉ = F starts at H/2^(F−1) = 1.
        Fixture::TwiceIndexFailsZeroInf => {
            let free = s + 1;
            let high = Money::ONE.scale_pow2(s as i32);
            (vec![CostCurve::limited_supply(free, Price::Infinite)?], one_item_buyers(&[(free, Money::ONE), (free, high)]))
        }
        // One item with F = 2s free copies, then cost H = F² each.
        // F buyers of value 1, then F buyers of value H + 1.
        Fixture::RelatedAlgosFail => {
            let free = 2 * s;
            let cap = int(free * free);
            let curve =
                CostCurve::new(CurveShape::LimitedSupply { free_copies: free, cap: Price::Finite(cap) }, Some(4 * free))?;
            (vec![curve], one_item_buyers(&[(free, Money::ONE), (free, cap + Money::ONE)]))
        }
        // Two items with c(k) = k/4 and three additive buyers valuing each
        // item at 16·2^s, 12·2^s and 10·2^s.
        Fixture::WrapperBeatsWelfare => {
            let curve = CostCurve::linear(Money::new(1, 4))?;
            let scale = Money::ONE.scale_pow2(s as i32);
            let buyers = [16, 12, 10]
                .into_iter()
                .map(|v| Valuation::additive(vec![Money::from_int(v) * scale; 2]).expect("non-negative"))
                .collect();
            (vec![curve.clone(), curve], buyers)
        }
    };
    let mut instance = Instance::new(
        InstanceMeta {
            generator: "fixture".into(),
            seed: None,
            fixture: Some(fixture.name().to_string()),
            size: Some(size),
            vmax: Money::ONE,
        },
        curves,
        buyers,
    )?;
    instance.meta.vmax = instance.value_bound().max(Money::ONE);
    Ok(instance)
}

/// Default size used when a fixture is requested without one.
pub const DEFAULT_FIXTURE_SIZE: u64 = 2;
