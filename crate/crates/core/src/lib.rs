//! Simulation of online posted-price markets where the seller produces
//! copies of each item at non-decreasing marginal cost.
//!
//! * [`cost`] — marginal, cumulative, inverse and area queries on cost curves.
//! * [`valuation`] — buyer set functions and the exact demand oracle.
//! * [`pricing`] — twice-the-index, chunked, smoothing and baseline pricing
//!   rules, plus the randomized profit wrapper.
//! * [`market`] — the online protocol, transcripts and replay verification.
//! * [`oracle`] — exact offline optima and per-item structural quantities.
//! * [`harness`] — instance generators, adversarial fixtures and experiments.
//!
//! All money is exact rational arithmetic, so demand ties, transcripts and
//! benchmark comparisons are reproducible bit for bit.

pub mod cost;
pub mod harness;
pub mod market;
pub mod money;
pub mod oracle;
pub mod pricing;
pub mod valuation;

pub use cost::{CostCurve, CurveError, CurveShape};
pub use market::{replay_verify, run_auction, ReplayError, Transcript};
pub use money::{Money, Price};
pub use oracle::{opt_profit_bruteforce, opt_welfare_additive, opt_welfare_bruteforce, structural_report, Allocation};
pub use pricing::{PostedPriceScheme, SchemeConfig, WelfareRule};
pub use valuation::{demand_bundle, Bundle, Closure, PriceVector, Valuation};
