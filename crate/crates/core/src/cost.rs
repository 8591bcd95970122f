//! Production-cost curves.
//!
//! A [`CostCurve`] gives the seller's marginal cost `c(k)` of producing the
//! `k`-th copy of one item. All supported shapes are non-decreasing in `k`.
//! Queries are exact; copies that can never be produced cost [`Price::Infinite`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::money::{Money, Price};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurveError {
    #[error("copy index must be at least 1")]
    ZeroCopyIndex,
    #[error("curve coefficient must be non-negative, got {0}")]
    NegativeCoefficient(Money),
    #[error("polynomial degree must be at least 1")]
    ZeroDegree,
    #[error("table entry {index} is negative")]
    NegativeEntry { index: usize },
    #[error("table is decreasing at copy {copy}")]
    Decreasing { copy: usize },
    #[error("curve never exceeds a finite cost; a copy limit is required")]
    UnboundedSupply,
}

/// The closed form (or table) behind a curve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum CurveShape {
    /// `c(k) = a·k`
    #[serde(rename = "linear")]
    Linear { a: Money },
    /// `c(k) = a·k^degree`
    #[serde(rename = "poly")]
    Polynomial { a: Money, degree: u32 },
    /// `c(k) = a·⌈log₂(k+1)⌉`
    #[serde(rename = "log")]
    Logarithmic { a: Money },
    /// Free up to `free_copies`, then `cap` per copy (`+∞` is the 0-∞ curve).
    #[serde(rename = "limited")]
    LimitedSupply { free_copies: u64, cap: Price },
    /// `c(k) = values[k-1]`; copies past the end cost `+∞`.
    #[serde(rename = "table")]
    Table { values: Vec<Money> },
}

#[derive(Serialize, Deserialize)]
struct RawCurve {
    #[serde(flatten)]
    shape: CurveShape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    copy_limit: Option<u64>,
}

/// An immutable, validated marginal-cost curve.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawCurve", into = "RawCurve")]
pub struct CostCurve {
    shape: CurveShape,
    copy_limit: Option<u64>,
}

impl TryFrom<RawCurve> for CostCurve {
    type Error = CurveError;
    fn try_from(raw: RawCurve) -> Result<Self, CurveError> {
        CostCurve::new(raw.shape, raw.copy_limit)
    }
}

impl From<CostCurve> for RawCurve {
    fn from(c: CostCurve) -> Self {
        RawCurve { shape: c.shape, copy_limit: c.copy_limit }
    }
}

fn non_negative(a: Money) -> Result<(), CurveError> {
    if a.is_negative() {
        Err(CurveError::NegativeCoefficient(a))
    } else {
        Ok(())
    }
}

impl CostCurve {
    /// Validate a shape. Monotonicity is checked here for tables and holds by
    /// construction for the closed forms.
    pub fn new(shape: CurveShape, copy_limit: Option<u64>) -> Result<Self, CurveError> {
        let bounded = copy_limit.is_some();
        match &shape {
            CurveShape::Linear { a } | CurveShape::Logarithmic { a } => {
                non_negative(*a)?;
                if a.is_zero() && !bounded {
                    return Err(CurveError::UnboundedSupply);
                }
            }
            CurveShape::Polynomial { a, degree } => {
                non_negative(*a)?;
                if *degree == 0 {
                    return Err(CurveError::ZeroDegree);
                }
                if a.is_zero() && !bounded {
                    return Err(CurveError::UnboundedSupply);
                }
            }
            CurveShape::LimitedSupply { cap, .. } => match cap {
                Price::Finite(c) => {
                    non_negative(*c)?;
                    if !bounded {
                        return Err(CurveError::UnboundedSupply);
                    }
                }
                Price::Infinite => {}
            },
            CurveShape::Table { values } => {
                for (index, v) in values.iter().enumerate() {
                    if v.is_negative() {
                        return Err(CurveError::NegativeEntry { index });
                    }
                    if index > 0 && values[index - 1] > *v {
                        return Err(CurveError::Decreasing { copy: index + 1 });
                    }
                }
            }
        }
        Ok(CostCurve { shape, copy_limit })
    }

    pub fn linear(a: Money) -> Result<Self, CurveError> {
        Self::new(CurveShape::Linear { a }, None)
    }

    pub fn polynomial(a: Money, degree: u32) -> Result<Self, CurveError> {
        Self::new(CurveShape::Polynomial { a, degree }, None)
    }

    pub fn logarithmic(a: Money) -> Result<Self, CurveError> {
        Self::new(CurveShape::Logarithmic { a }, None)
    }

    pub fn limited_supply(free_copies: u64, cap: Price) -> Result<Self, CurveError> {
        Self::new(CurveShape::LimitedSupply { free_copies, cap }, None)
    }

    pub fn table(values: Vec<Money>) -> Result<Self, CurveError> {
        Self::new(CurveShape::Table { values }, None)
    }

    /// The same curve with copies past `limit` priced at `+∞`.
    pub fn with_copy_limit(self, limit: u64) -> Result<Self, CurveError> {
        Self::new(self.shape, Some(limit))
    }

    pub fn shape(&self) -> &CurveShape {
        &self.shape
    }

    pub fn copy_limit(&self) -> Option<u64> {
        self.copy_limit
    }

    /// `c(k)`, the cost of the `k`-th copy.
    pub fn marginal_cost(&self, k: u64) -> Result<Price, CurveError> {
        if k == 0 {
            return Err(CurveError::ZeroCopyIndex);
        }
        Ok(self.marginal(k))
    }

    /// Unchecked `c(k)` for `k ≥ 1`.
    pub(crate) fn marginal(&self, k: u64) -> Price {
        debug_assert!(k >= 1);
        if self.copy_limit.is_some_and(|limit| k > limit) {
            return Price::Infinite;
        }
        self.shape_marginal(k)
    }

    fn shape_marginal(&self, k: u64) -> Price {
        match &self.shape {
            CurveShape::Linear { a } => Price::Finite(*a * Money::from(k)),
            CurveShape::Polynomial { a, degree } => {
                let kk = Money::from(k);
                let power = (0..*degree).fold(Money::ONE, |acc, _| acc * kk);
                Price::Finite(*a * power)
            }
            CurveShape::Logarithmic { a } => Price::Finite(*a * Money::from(ceil_log2_plus_one(k))),
            CurveShape::LimitedSupply { free_copies, cap } => {
                if k <= *free_copies {
                    Price::ZERO
                } else {
                    *cap
                }
            }
            CurveShape::Table { values } => match values.get((k - 1) as usize) {
                Some(v) => Price::Finite(*v),
                None => Price::Infinite,
            },
        }
    }

    /// `C(k) = Σ_{j≤k} c(j)`, with `C(0) = 0`.
    pub fn cumulative_cost(&self, k: u64) -> Price {
        self.checked_cumulative_cost(k).expect("money overflow in cumulative cost")
    }

    /// [`cumulative_cost`](Self::cumulative_cost), or `None` if the exact
    /// sum overflows.
    pub fn checked_cumulative_cost(&self, k: u64) -> Option<Price> {
        if k == 0 {
            return Some(Price::ZERO);
        }
        if self.copy_limit.is_some_and(|limit| k > limit) {
            return Some(Price::Infinite);
        }
        let finite = |m: Option<Money>| m.map(Price::Finite);
        match &self.shape {
            CurveShape::Linear { a } => {
                // k(k+1)/2 halves an even factor first; below 2^127 for any u64 k
                let (k, k1) = (k as u128, k as u128 + 1);
                let triangle = if k % 2 == 0 { (k / 2) * k1 } else { k * (k1 / 2) } as i128;
                finite(a.checked_mul(Money::from_int(triangle)))
            }
            CurveShape::Logarithmic { a } => finite(a.checked_mul(log_curve_prefix_sum(k)?)),
            CurveShape::LimitedSupply { free_copies, cap } => {
                if k <= *free_copies {
                    Some(Price::ZERO)
                } else {
                    match cap {
                        Price::Finite(c) => finite(c.checked_mul(Money::from(k - free_copies))),
                        Price::Infinite => Some(Price::Infinite),
                    }
                }
            }
            CurveShape::Table { values } => {
                if k as usize > values.len() {
                    Some(Price::Infinite)
                } else {
                    finite(values[..k as usize].iter().try_fold(Money::ZERO, |acc, v| acc.checked_add(*v)))
                }
            }
            CurveShape::Polynomial { a, degree } => {
                let mut total = Money::ZERO;
                for j in 1..=k {
                    let jj = Money::from(j);
                    let power = (0..*degree).try_fold(Money::ONE, |acc, _| acc.checked_mul(jj))?;
                    total = total.checked_add(a.checked_mul(power)?)?;
                }
                Some(Price::Finite(total))
            }
        }
    }

    /// The largest `k` with `c(k) ≤ p`, or 0 when even the first copy costs more.
    /// Saturates at `u64::MAX`.
    pub fn copies_below_price(&self, p: Money) -> u64 {
        let bound = |k: u64| self.copy_limit.map_or(k, |limit| k.min(limit));
        match &self.shape {
            CurveShape::LimitedSupply { free_copies, cap } => {
                if p.is_negative() {
                    return 0;
                }
                match cap {
                    Price::Finite(c) if *c <= p => {
                        self.copy_limit.expect("finite-cap curves always carry a copy limit")
                    }
                    _ => bound(*free_copies),
                }
            }
            CurveShape::Table { values } => {
                let within = values.iter().take_while(|v| **v <= p).count() as u64;
                bound(within)
            }
            _ => {
                let fits = |k: u64| self.shape_marginal(k) <= Price::Finite(p);
                if !fits(1) {
                    return 0;
                }
                if let Some(limit) = self.copy_limit {
                    if fits(limit) {
                        return limit;
                    }
                }
                // gallop to a failing index, then bisect on [lo, hi)
                let mut lo = 1u64;
                let mut hi = 2u64;
                while fits(hi) {
                    lo = hi;
                    hi = match hi.checked_mul(2) {
                        Some(h) => h,
                        // logarithmic curves can stay below p for more than
                        // u64::MAX copies; saturate
                        None if fits(u64::MAX) => return bound(u64::MAX),
                        None => u64::MAX,
                    };
                }
                while hi - lo > 1 {
                    let mid = lo + (hi - lo) / 2;
                    if fits(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                bound(lo)
            }
        }
    }

    /// `Σ_{k ≤ K} (p − c(k))` where `K = copies_below_price(p)`.
    pub fn area_under_price(&self, p: Money) -> Money {
        self.checked_area_under_price(p).expect("area under price exceeds the exact range")
    }

    /// [`area_under_price`](Self::area_under_price), or `None` when the area
    /// is too large to represent: more than `u64::MAX` copies lie below `p`
    /// (possible on logarithmic curves) or the sum overflows.
    pub fn checked_area_under_price(&self, p: Money) -> Option<Money> {
        let copies = self.copies_below_price(p);
        if copies == u64::MAX && self.copy_limit != Some(u64::MAX) {
            return None;
        }
        let cumulative = self
            .checked_cumulative_cost(copies)?
            .finite()
            .expect("copies below a finite price have finite cumulative cost");
        p.checked_mul(Money::from(copies))?.checked_sub(cumulative)
    }

    /// Whether the finite part of the curve has non-decreasing increments.
    ///
    /// A jump to `+∞` (the supply limit) is allowed; a finite plateau after a
    /// jump is not.
    pub fn is_convex(&self) -> bool {
        match &self.shape {
            CurveShape::Linear { .. } | CurveShape::Polynomial { .. } => true,
            CurveShape::Logarithmic { a } => {
                a.is_zero() || self.copy_limit.is_some_and(|limit| limit <= 2)
            }
            CurveShape::LimitedSupply { free_copies, cap } => match cap {
                Price::Infinite => true,
                Price::Finite(c) => {
                    c.is_zero()
                        || self.copy_limit.is_some_and(|limit| limit <= free_copies.saturating_add(1))
                }
            },
            CurveShape::Table { values } => {
                let end = self.copy_limit.map_or(values.len(), |l| values.len().min(l as usize));
                values[..end].windows(3).all(|w| w[1] - w[0] <= w[2] - w[1])
            }
        }
    }
}

/// `⌈log₂(k+1)⌉`, i.e. the bit length of `k`.
fn ceil_log2_plus_one(k: u64) -> u64 {
    (u64::BITS - k.leading_zeros()) as u64
}

/// `Σ_{j=1}^{k} ⌈log₂(j+1)⌉`, summed level by level: the value `t` is taken
/// by the `2^(t-1)` indices `j ∈ [2^(t-1), 2^t − 1]`.
fn log_curve_prefix_sum(k: u64) -> Option<Money> {
    let mut total = 0i128;
    for t in 1..=u64::BITS {
        let start = 1u128 << (t - 1);
        if start > k as u128 {
            break;
        }
        let end = ((1u128 << t) - 1).min(k as u128);
        total = total.checked_add(t as i128 * (end - start + 1) as i128)?;
    }
    Some(Money::from_int(total))
}
