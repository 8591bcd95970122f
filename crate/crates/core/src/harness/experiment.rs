use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::instance::{Instance, InstanceMeta};
use super::HarnessError;
use crate::market::{replay_verify, run_auction, MarketError, Transcript};
use crate::money::{Money, Price};
use crate::oracle::{opt_welfare, structural_report, OptMethod, StructuralEntry};
use crate::pricing::{SchemeConfig, SchemeDescriptor};

pub const RESULTS_FORMAT: &str = "posted-pricing/results";
pub const RESULTS_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub schemes: Vec<SchemeConfig>,
    pub trials: u32,
    pub master_seed: u64,
    pub opt_budget: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptStatus {
    Additive,
    BruteForce,
    Refused,
}

/// One (instance, scheme, trial) cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub cell: u64,
    pub instance: usize,
    pub meta: InstanceMeta,
    pub scheme_name: String,
    pub scheme: SchemeDescriptor,
    pub trial: u32,
    pub master_seed: u64,
    pub items: usize,
    pub buyers: usize,
    pub sw_alg: Money,
    pub sw_opt: Option<Money>,
    pub opt: OptStatus,
    pub profit: Money,
    pub revenue: Money,
    pub cost: Money,
    pub value: Money,
    /// `SW(OPT) / SW(ALG)`; `+∞` when the run earned no welfare but OPT did.
    pub welfare_ratio: Option<Price>,
    pub structural: Vec<StructuralEntry>,
    /// Smallest structural ratio among items with at least one sale.
    pub min_structural_ratio: Option<Price>,
}

#[derive(Debug, Clone)]
pub struct CellOutput {
    pub result: ExperimentResult,
    pub transcript: Transcript,
}

/// `opt / alg` with the conventions `0/0 = 1` and `x/0 = +∞`.
pub fn welfare_ratio(opt: Money, alg: Money) -> Price {
    if alg.is_zero() {
        if opt.is_zero() {
            Price::Finite(Money::ONE)
        } else {
            Price::Infinite
        }
    } else {
        Price::Finite(opt / alg)
    }
}

fn min_structural(entries: &[StructuralEntry]) -> Option<Price> {
    entries.iter().filter(|e| e.sold > 0).map(|e| e.ratio).min()
}

#[allow(clippy::too_many_arguments)]
fn summarize(
    cell: u64,
    instance_index: usize,
    instance: &Instance,
    scheme_name: String,
    trial: u32,
    master_seed: u64,
    transcript: &Transcript,
    opt: Option<(Money, OptStatus)>,
) -> ExperimentResult {
    let structural = structural_report(transcript, &instance.curves);
    let totals = &transcript.totals;
    let (sw_opt, status) = match opt {
        Some((w, s)) => (Some(w), s),
        None => (None, OptStatus::Refused),
    };
    ExperimentResult {
        cell,
        instance: instance_index,
        meta: instance.meta.clone(),
        scheme_name,
        scheme: transcript.scheme.clone(),
        trial,
        master_seed,
        items: instance.items(),
        buyers: instance.buyers.len(),
        sw_alg: totals.welfare,
        sw_opt,
        opt: status,
        profit: totals.profit,
        revenue: totals.revenue,
        cost: totals.cost,
        value: totals.value,
        welfare_ratio: sw_opt.map(|o| welfare_ratio(o, totals.welfare)),
        min_structural_ratio: min_structural(&structural),
        structural,
    }
}

/// Run every (instance, scheme, trial) cell. Cell `c` draws its randomness
/// from stream `c` of a ChaCha8 generator keyed by the master seed, so the
/// output is independent of scheduling.
pub fn run_experiment(instances: &[Instance], config: &ExperimentConfig) -> Result<Vec<CellOutput>, HarnessError> {
    let opts: Vec<Option<(Money, OptStatus)>> = instances
        .par_iter()
        .map(|i| {
            opt_welfare(&i.curves, &i.buyers, config.opt_budget).ok().map(|(a, method)| {
                let status = match method {
                    OptMethod::Additive => OptStatus::Additive,
                    OptMethod::BruteForce => OptStatus::BruteForce,
                };
                (a.welfare, status)
            })
        })
        .collect();
    let mut cells = Vec::new();
    for (ii, _) in instances.iter().enumerate() {
        for (si, _) in config.schemes.iter().enumerate() {
            for trial in 0..config.trials {
                cells.push((ii, si, trial));
            }
        }
    }
    cells
        .into_par_iter()
        .enumerate()
        .map(|(cell, (ii, si, trial))| {
            let instance = &instances[ii];
            let scheme_config = &config.schemes[si];
            let mut rng = ChaCha8Rng::seed_from_u64(config.master_seed);
            rng.set_stream(cell as u64);
            let scheme = scheme_config
                .instantiate(instance.curves.clone(), Some(instance.meta.vmax), &mut rng)
                .map_err(|source| HarnessError::Cell { cell: cell as u64, source: Box::new(MarketError::from(source)) })?;
            let transcript = run_auction(scheme, &instance.buyers)
                .map_err(|source| HarnessError::Cell { cell: cell as u64, source: Box::new(source) })?;
            let result = summarize(
                cell as u64,
                ii,
                instance,
                scheme_config.name(),
                trial,
                config.master_seed,
                &transcript,
                opts[ii],
            );
            Ok(CellOutput { result, transcript })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct ResultsHeader {
    format: String,
    version: u32,
    master_seed: u64,
    trials: u32,
    schemes: Vec<String>,
    cells: usize,
}

/// Write `results.jsonl` (header line plus one row per cell) and
/// `transcripts.jsonl` (each cell's transcript under its cell id).
pub fn write_outputs<W1: Write, W2: Write>(
    outputs: &[CellOutput],
    config: &ExperimentConfig,
    results: &mut W1,
    transcripts: &mut W2,
) -> Result<(), HarnessError> {
    let header = ResultsHeader {
        format: RESULTS_FORMAT.into(),
        version: RESULTS_VERSION,
        master_seed: config.master_seed,
        trials: config.trials,
        schemes: config.schemes.iter().map(SchemeConfig::name).collect(),
        cells: outputs.len(),
    };
    writeln!(results, "{}", serde_json::to_string(&header)?)?;
    for out in outputs {
        writeln!(results, "{}", serde_json::to_string(&out.result)?)?;
        out.transcript.write_jsonl(out.result.cell, transcripts)?;
    }
    Ok(())
}

pub fn read_results<R: BufRead>(input: R) -> Result<Vec<ExperimentResult>, HarnessError> {
    let mut lines = input.lines().enumerate();
    let header: ResultsHeader = match lines.next() {
        Some((_, line)) => serde_json::from_str(&line?).map_err(|e| HarnessError::Parse { line: 1, message: e.to_string() })?,
        None => return Err(HarnessError::Format("empty results file".into())),
    };
    if header.format != RESULTS_FORMAT || header.version != RESULTS_VERSION {
        return Err(HarnessError::Format(format!("unsupported results format {} v{}", header.format, header.version)));
    }
    let mut rows = Vec::new();
    for (index, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).map_err(|e| HarnessError::Parse { line: index + 1, message: e.to_string() })?);
    }
    if rows.len() != header.cells {
        return Err(HarnessError::Format(format!("header announces {} cells, found {}", header.cells, rows.len())));
    }
    Ok(rows)
}

/// Check every stored cell: replay its transcript against the instance and
/// recompute the result row's columns from the transcript.
pub fn verify_outputs(
    instances: &[Instance],
    results: &[ExperimentResult],
    transcripts: &[(u64, Transcript)],
) -> Vec<(u64, String)> {
    let by_cell: BTreeMap<u64, &Transcript> = transcripts.iter().map(|(id, t)| (*id, t)).collect();
    let mut failures = Vec::new();
    for row in results {
        let Some(instance) = instances.get(row.instance) else {
            failures.push((row.cell, format!("instance {} missing", row.instance)));
            continue;
        };
        let Some(transcript) = by_cell.get(&row.cell) else {
            failures.push((row.cell, "transcript missing".into()));
            continue;
        };
        if let Err(e) = replay_verify(transcript, &instance.curves, &instance.buyers) {
            failures.push((row.cell, format!("replay: {e}")));
            continue;
        }
        let expected = summarize(
            row.cell,
            row.instance,
            instance,
            row.scheme_name.clone(),
            row.trial,
            row.master_seed,
            transcript,
            row.sw_opt.map(|w| (w, row.opt)),
        );
        if &expected != row {
            failures.push((row.cell, "result row differs from its transcript".into()));
        }
    }
    failures
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub group: String,
    pub scheme: String,
    pub cells: usize,
    pub ratio_mean: Option<f64>,
    pub ratio_min: Option<f64>,
    pub ratio_max: Option<f64>,
    pub sw_alg_mean: f64,
    pub profit_mean: f64,
    pub min_structural_ratio: Option<f64>,
}

/// Group rows by (instance label, scheme) in first-seen order and summarize.
pub fn summarize_results(results: &[ExperimentResult]) -> Vec<ReportRow> {
    let mut order: Vec<(String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String), Vec<&ExperimentResult>> = BTreeMap::new();
    for r in results {
        let key = (r.meta.label(), r.scheme_name.clone());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r);
    }
    order
        .into_iter()
        .map(|key| {
            let rows = &groups[&key];
            let ratios: Vec<f64> = rows.iter().filter_map(|r| r.welfare_ratio.map(|p| p.to_f64())).collect();
            let mean = |xs: &[f64]| if xs.is_empty() { None } else { Some(xs.iter().sum::<f64>() / xs.len() as f64) };
            let count = rows.len() as f64;
            ReportRow {
                cells: rows.len(),
                ratio_mean: mean(&ratios),
                ratio_min: ratios.iter().copied().reduce(f64::min),
                ratio_max: ratios.iter().copied().reduce(f64::max),
                sw_alg_mean: rows.iter().map(|r| r.sw_alg.to_f64()).sum::<f64>() / count,
                profit_mean: rows.iter().map(|r| r.profit.to_f64()).sum::<f64>() / count,
                min_structural_ratio: rows.iter().filter_map(|r| r.min_structural_ratio).min().map(|p| p.to_f64()),
                group: key.0,
                scheme: key.1,
            }
        })
        .collect()
}

fn cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, |v| format!("{v:.6}"))
}

pub fn render_report(rows: &[ReportRow], format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str("group,scheme,cells,ratio_mean,ratio_min,ratio_max,sw_alg_mean,profit_mean,min_structural_ratio\n");
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{:.6},{:.6},{}",
                    r.group,
                    r.scheme,
                    r.cells,
                    cell(r.ratio_mean),
                    cell(r.ratio_min),
                    cell(r.ratio_max),
                    r.sw_alg_mean,
                    r.profit_mean,
                    cell(r.min_structural_ratio)
                );
            }
        }
        ReportFormat::Table => {
            let _ = writeln!(
                out,
                "{:<32} {:<26} {:>5} {:>12} {:>12} {:>12} {:>12}",
                "group", "scheme", "cells", "ratio_mean", "ratio_max", "profit_mean", "min_struct"
            );
            for r in rows {
                let show = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
                let _ = writeln!(
                    out,
                    "{:<32} {:<26} {:>5} {:>12} {:>12} {:>12.4} {:>12}",
                    r.group,
                    r.scheme,
                    r.cells,
                    show(r.ratio_mean),
                    show(r.ratio_max),
                    r.profit_mean,
                    show(r.min_structural_ratio)
                );
            }
        }
    }
    out
}
