//! Instance generation, experiment execution and reporting.

pub mod experiment;
pub mod fixtures;
pub mod instance;

use thiserror::Error;

use crate::cost::CurveError;
use crate::market::MarketError;

pub use experiment::{
    read_results, render_report, run_experiment, summarize_results, verify_outputs, write_outputs, CellOutput,
    ExperimentConfig, ExperimentResult, OptStatus, ReportFormat, ReportRow,
};
pub use fixtures::{gen_fixture, Fixture, DEFAULT_FIXTURE_SIZE};
pub use instance::{
    gen_random, read_instances, write_instances, CurveFamily, Instance, InstanceMeta, RandomSpec, ValuationFamily,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown family {0:?}")]
    UnknownFamily(String),
    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("{0}")]
    Format(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("cell {cell}: {source}")]
    Cell { cell: u64, source: Box<MarketError> },
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
