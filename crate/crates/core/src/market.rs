//! The online protocol and its audit trail.
//!
//! Buyers arrive one at a time. Each sees the frozen quote vector, takes her
//! demand bundle, and the scheme records one sale per purchased item before
//! the next buyer arrives. The [`Transcript`] event log is the source of
//! truth; its aggregates are caches checked by [`replay_verify`].

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cost::CostCurve;
use crate::money::{Money, Price};
use crate::pricing::{PostedPriceScheme, PricingError, SchemeDescriptor};
use crate::valuation::{demand_bundle, Bundle, PriceVector, Valuation, ValuationError};

#[derive(Debug, Error)]
pub enum MarketError {
    #[error("buyer {buyer} is defined over {got} items, market has {expected}")]
    UniverseMismatch { buyer: usize, got: usize, expected: usize },
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error(transparent)]
    Valuation(#[from] ValuationError),
    #[error("transcript io: {0}")]
    Io(#[from] std::io::Error),
    #[error("transcript line {line}: {source}")]
    Parse { line: usize, source: serde_json::Error },
    #[error("transcript line {line}: {reason}")]
    Structure { line: usize, reason: String },
}

/// One copy bought by one buyer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Purchase {
    pub item: usize,
    pub copy: u64,
    pub price: Money,
    pub cost: Money,
}

/// Everything that happened during one buyer's visit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuyerEvent {
    pub buyer: usize,
    pub quotes: PriceVector,
    pub bundle: Bundle,
    pub purchases: Vec<Purchase>,
    pub value: Money,
}

impl BuyerEvent {
    pub fn payment(&self) -> Money {
        self.purchases.iter().map(|p| p.price).sum()
    }

    pub fn cost(&self) -> Money {
        self.purchases.iter().map(|p| p.cost).sum()
    }
}

/// Final per-item state: `x_i`, `π_i` and `P^f_i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemOutcome {
    pub item: usize,
    pub sold: u64,
    pub profit: Money,
    pub first_unsold_price: Price,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub revenue: Money,
    pub cost: Money,
    pub value: Money,
    pub welfare: Money,
    pub profit: Money,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub scheme: SchemeDescriptor,
    pub events: Vec<BuyerEvent>,
    pub items: Vec<ItemOutcome>,
    pub totals: Totals,
}

impl Transcript {
    /// Seller profit after each buyer, i.e. `Σ_i π_i` at every prefix.
    pub fn running_profit(&self) -> Vec<Money> {
        self.events
            .iter()
            .scan(Money::ZERO, |acc, e| {
                *acc += e.payment() - e.cost();
                Some(*acc)
            })
            .collect()
    }

    /// Write as line-delimited records: a `run` header, one `event` per
    /// buyer, then a `summary`.
    pub fn write_jsonl<W: Write>(&self, run: u64, out: &mut W) -> std::io::Result<()> {
        let header = TranscriptRecord::Run {
            run,
            scheme: self.scheme.clone(),
            items: self.items.len(),
            buyers: self.events.len(),
        };
        writeln!(out, "{}", serde_json::to_string(&header)?)?;
        for event in &self.events {
            let record = TranscriptRecordRef::Event { run, event };
            writeln!(out, "{}", serde_json::to_string(&record)?)?;
        }
        let summary = TranscriptRecordRef::Summary { run, items: &self.items, totals: &self.totals };
        writeln!(out, "{}", serde_json::to_string(&summary)?)?;
        Ok(())
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum TranscriptRecord {
    Run { run: u64, scheme: SchemeDescriptor, items: usize, buyers: usize },
    Event { run: u64, event: BuyerEvent },
    Summary { run: u64, items: Vec<ItemOutcome>, totals: Totals },
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum TranscriptRecordRef<'a> {
    Event { run: u64, event: &'a BuyerEvent },
    Summary { run: u64, items: &'a [ItemOutcome], totals: &'a Totals },
}

/// Parse every transcript in a line-delimited stream, keyed by run id.
pub fn read_transcripts<R: BufRead>(input: R) -> Result<Vec<(u64, Transcript)>, MarketError> {
    let mut out = Vec::new();
    let mut open: Option<(u64, SchemeDescriptor, usize, Vec<BuyerEvent>)> = None;
    for (index, line) in input.lines().enumerate() {
        let line_no = index + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TranscriptRecord =
            serde_json::from_str(&line).map_err(|source| MarketError::Parse { line: line_no, source })?;
        let structure = |reason: &str| MarketError::Structure { line: line_no, reason: reason.to_string() };
        match record {
            TranscriptRecord::Run { run, scheme, buyers, .. } => {
                if open.is_some() {
                    return Err(structure("run header before previous summary"));
                }
                open = Some((run, scheme, buyers, Vec::new()));
            }
            TranscriptRecord::Event { run, event } => match open.as_mut() {
                Some((id, _, _, events)) if *id == run => events.push(event),
                _ => return Err(structure("event outside its run")),
            },
            TranscriptRecord::Summary { run, items, totals } => match open.take() {
                Some((id, scheme, buyers, events)) if id == run => {
                    if events.len() != buyers {
                        return Err(structure("event count differs from run header"));
                    }
                    out.push((run, Transcript { scheme, events, items, totals }));
                }
                _ => return Err(structure("summary outside its run")),
            },
        }
    }
    if open.is_some() {
        return Err(MarketError::Structure { line: 0, reason: "unterminated run at end of input".into() });
    }
    Ok(out)
}

/// Run the online protocol for `buyers` in order against `scheme`.
pub fn run_auction(mut scheme: PostedPriceScheme, buyers: &[Valuation]) -> Result<Transcript, MarketError> {
    let n = scheme.items();
    for (buyer, v) in buyers.iter().enumerate() {
        if v.universe_size() != n {
            return Err(MarketError::UniverseMismatch { buyer, got: v.universe_size(), expected: n });
        }
    }
    let mut events = Vec::with_capacity(buyers.len());
    for (buyer, valuation) in buyers.iter().enumerate() {
        let quotes = PriceVector::new((0..n).map(|i| scheme.quote(i)).collect::<Result<_, _>>()?)?;
        let bundle = demand_bundle(valuation, &quotes)?;
        let mut purchases = Vec::with_capacity(bundle.len());
        for item in bundle.items() {
            let sale = scheme.record_sale(item)?;
            purchases.push(Purchase { item, copy: sale.copy, price: sale.price, cost: sale.cost });
        }
        events.push(BuyerEvent { buyer, quotes, bundle, purchases, value: valuation.value_of(bundle) });
    }
    let items = (0..n)
        .map(|item| {
            let state = scheme.state(item);
            Ok(ItemOutcome {
                item,
                sold: state.sold,
                profit: state.profit,
                first_unsold_price: scheme.quote(item)?,
            })
        })
        .collect::<Result<Vec<_>, PricingError>>()?;
    let totals = totals_from_events(&events);
    Ok(Transcript { scheme: scheme.descriptor().clone(), events, items, totals })
}

fn totals_from_events(events: &[BuyerEvent]) -> Totals {
    let revenue: Money = events.iter().map(BuyerEvent::payment).sum();
    let cost: Money = events.iter().map(BuyerEvent::cost).sum();
    let value: Money = events.iter().map(|e| e.value).sum();
    Totals { revenue, cost, value, welfare: value - cost, profit: revenue - cost }
}

/// First inconsistency found while replaying a transcript.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ReplayError {
    /// Offending buyer event, or `None` for run-level checks.
    pub event: Option<usize>,
    pub reason: String,
}

impl fmt::Display for ReplayError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.event {
            Some(e) => write!(f, "event {e}: {}", self.reason),
            None => write!(f, "{}", self.reason),
        }
    }
}

/// Recompute a transcript from its events, the curves and the buyers'
/// valuations, re-deriving every quote from the recorded scheme.
pub fn replay_verify(transcript: &Transcript, curves: &[CostCurve], buyers: &[Valuation]) -> Result<(), ReplayError> {
    let run_err = |reason: String| ReplayError { event: None, reason };
    let mut scheme = PostedPriceScheme::from_descriptor(transcript.scheme.clone(), curves.to_vec())
        .map_err(|e| run_err(format!("cannot rebuild scheme: {e}")))?;
    if transcript.events.len() != buyers.len() {
        return Err(run_err(format!("{} events for {} buyers", transcript.events.len(), buyers.len())));
    }
    let n = curves.len();
    for (index, (event, valuation)) in transcript.events.iter().zip(buyers).enumerate() {
        let fail = |reason: String| ReplayError { event: Some(index), reason };
        if event.buyer != index {
            return Err(fail(format!("buyer index {} out of order", event.buyer)));
        }
        if valuation.universe_size() != n {
            return Err(fail("valuation universe differs from item count".into()));
        }
        let quotes: Vec<Price> =
            (0..n).map(|i| scheme.quote(i)).collect::<Result<_, _>>().map_err(|e| fail(e.to_string()))?;
        if event.quotes.as_slice() != quotes.as_slice() {
            return Err(fail("recorded quotes differ from the scheme's".into()));
        }
        let demanded = demand_bundle(valuation, &event.quotes).map_err(|e| fail(e.to_string()))?;
        if demanded != event.bundle {
            return Err(fail(format!("bundle {:?} is not the demand {:?}", event.bundle, demanded)));
        }
        let bought: Vec<usize> = event.purchases.iter().map(|p| p.item).collect();
        if bought != event.bundle.items().collect::<Vec<_>>() {
            return Err(fail("purchases do not match the bundle".into()));
        }
        for purchase in &event.purchases {
            let item = purchase.item;
            let expected_copy = scheme.state(item).sold + 1;
            if purchase.copy != expected_copy {
                return Err(fail(format!("item {item} copy {} should be {expected_copy}", purchase.copy)));
            }
            if Price::Finite(purchase.price) != quotes[item] {
                return Err(fail(format!("item {item} paid {} but was quoted {}", purchase.price, quotes[item])));
            }
            if Price::Finite(purchase.cost) != curves[item].marginal(purchase.copy) {
                return Err(fail(format!("item {item} copy {} has the wrong cost", purchase.copy)));
            }
            scheme.record_sale(item).map_err(|e| fail(e.to_string()))?;
        }
        if event.value != valuation.value_of(event.bundle) {
            return Err(fail("recorded value differs from the valuation".into()));
        }
        if (event.value - event.payment()).is_negative() {
            return Err(fail("buyer utility is negative".into()));
        }
    }
    if transcript.totals != totals_from_events(&transcript.events) {
        return Err(run_err("aggregates differ from the event log".into()));
    }
    if transcript.items.len() != n {
        return Err(run_err("item summary has the wrong length".into()));
    }
    for (item, outcome) in transcript.items.iter().enumerate() {
        let state = scheme.state(item);
        let quote = scheme.quote(item).map_err(|e| run_err(e.to_string()))?;
        if outcome.item != item
            || outcome.sold != state.sold
            || outcome.profit != state.profit
            || outcome.first_unsold_price != quote
        {
            return Err(run_err(format!("item {item} summary differs from replay")));
        }
    }
    let item_profit: Money = transcript.items.iter().map(|o| o.profit).sum();
    if item_profit != transcript.totals.profit {
        return Err(run_err("per-item profits do not sum to revenue minus cost".into()));
    }
    Ok(())
}
