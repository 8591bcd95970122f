use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::cost::{CostCurve, CurveShape};
use crate::money::{Money, Price};
use crate::valuation::{Bundle, Closure, Valuation, MAX_TABLE_ITEMS};

pub const INSTANCE_FORMAT: &str = "posted-pricing/instance";
pub const INSTANCE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceMeta {
    /// `random` or `fixture`.
    pub generator: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<u64>,
    /// Upper bound on any buyer's value for any bundle.
    pub vmax: Money,
}

impl InstanceMeta {
    /// Short label for grouping results, e.g. `at_cost_fails/4` or `random`.
    pub fn label(&self) -> String {
        match (&self.fixture, self.size) {
            (Some(name), Some(size)) => format!("{name}/{size}"),
            (Some(name), None) => name.clone(),
            _ => self.generator.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawInstance {
    format: String,
    version: u32,
    meta: InstanceMeta,
    items: usize,
    curves: Vec<CostCurve>,
    buyers: Vec<Valuation>,
}

/// Items with their cost curves and an ordered buyer sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawInstance", into = "RawInstance")]
pub struct Instance {
    pub meta: InstanceMeta,
    pub curves: Vec<CostCurve>,
    pub buyers: Vec<Valuation>,
}

impl TryFrom<RawInstance> for Instance {
    type Error = HarnessError;
    fn try_from(raw: RawInstance) -> Result<Self, HarnessError> {
        if raw.format != INSTANCE_FORMAT || raw.version != INSTANCE_VERSION {
            return Err(HarnessError::Format(format!("unsupported instance format {} v{}", raw.format, raw.version)));
        }
        if raw.curves.len() != raw.items {
            return Err(HarnessError::Format(format!("{} curves for {} items", raw.curves.len(), raw.items)));
        }
        Instance::new(raw.meta, raw.curves, raw.buyers)
    }
}

impl From<Instance> for RawInstance {
    fn from(i: Instance) -> Self {
        RawInstance {
            format: INSTANCE_FORMAT.to_string(),
            version: INSTANCE_VERSION,
            meta: i.meta,
            items: i.curves.len(),
            curves: i.curves,
            buyers: i.buyers,
        }
    }
}

impl Instance {
    pub fn new(meta: InstanceMeta, curves: Vec<CostCurve>, buyers: Vec<Valuation>) -> Result<Self, HarnessError> {
        if let Some(b) = buyers.iter().position(|v| v.universe_size() != curves.len()) {
            return Err(HarnessError::Format(format!(
                "buyer {b} spans {} items, instance has {}",
                buyers[b].universe_size(),
                curves.len()
            )));
        }
        Ok(Instance { meta, curves, buyers })
    }

    pub fn items(&self) -> usize {
        self.curves.len()
    }

    /// Largest value any buyer assigns to any bundle.
    pub fn value_bound(&self) -> Money {
        self.buyers.iter().map(max_value).max().unwrap_or(Money::ZERO)
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("instances always serialize")
    }
}

fn max_value(v: &Valuation) -> Money {
    match v {
        Valuation::Additive { values } => values.iter().sum(),
        Valuation::UnitDemand { values } => values.iter().copied().max().unwrap_or(Money::ZERO),
        Valuation::SingleMinded { value, .. } => *value,
        Valuation::Table { entries, .. } => entries.values().copied().max().unwrap_or(Money::ZERO),
    }
}

pub fn write_instances<W: Write>(instances: &[Instance], out: &mut W) -> std::io::Result<()> {
    for i in instances {
        writeln!(out, "{}", i.to_json_line())?;
    }
    Ok(())
}

pub fn read_instances<R: BufRead>(input: R) -> Result<Vec<Instance>, HarnessError> {
    let mut out = Vec::new();
    for (index, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| HarnessError::Parse { line: index + 1, message: e.to_string() })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveFamily {
    Linear,
    Poly,
    Log,
    Limited,
    Table,
    /// Linear or polynomial; safe for the smoothing scheme.
    Convex,
    Mixed,
}

impl FromStr for CurveFamily {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Ok(match s {
            "linear" => CurveFamily::Linear,
            "poly" => CurveFamily::Poly,
            "log" => CurveFamily::Log,
            "limited" => CurveFamily::Limited,
            "table" => CurveFamily::Table,
            "convex" => CurveFamily::Convex,
            "mixed" => CurveFamily::Mixed,
            other => return Err(HarnessError::UnknownFamily(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValuationFamily {
    Additive,
    UnitDemand,
    SingleMinded,
    Table,
    Mixed,
}

impl FromStr for ValuationFamily {
    type Err = HarnessError;
    fn from_str(s: &str) -> Result<Self, HarnessError> {
        Ok(match s {
            "additive" => ValuationFamily::Additive,
            "unit_demand" => ValuationFamily::UnitDemand,
            "single_minded" => ValuationFamily::SingleMinded,
            "table" => ValuationFamily::Table,
            "mixed" => ValuationFamily::Mixed,
            other => return Err(HarnessError::UnknownFamily(other.to_string())),
        })
    }
}

/// Parameters of [`gen_random`].
#[derive(Debug, Clone)]
pub struct RandomSpec {
    pub items: usize,
    pub buyers: usize,
    pub curves: CurveFamily,
    pub valuations: ValuationFamily,
    pub seed: u64,
    /// Per-draw value ceiling; values are integers in `[0, value_max]`.
    pub value_max: u64,
}

fn random_curve(family: CurveFamily, buyers: usize, rng: &mut ChaCha8Rng) -> CostCurve {
    let family = match family {
        CurveFamily::Convex => *[CurveFamily::Linear, CurveFamily::Poly].choose(rng).unwrap(),
        CurveFamily::Mixed => *[CurveFamily::Linear, CurveFamily::Poly, CurveFamily::Log, CurveFamily::Limited, CurveFamily::Table]
            .choose(rng)
            .unwrap(),
        f => f,
    };
    let limit = 2 * buyers as u64 + 2;
    let shape = match family {
        CurveFamily::Linear => CurveShape::Linear { a: Money::new(rng.gen_range(1..=4), 2) },
        CurveFamily::Poly => CurveShape::Polynomial { a: Money::new(1, rng.gen_range(1..=4)), degree: rng.gen_range(1..=3) },
        CurveFamily::Log => CurveShape::Logarithmic { a: Money::from_int(rng.gen_range(1..=4)) },
        CurveFamily::Limited => CurveShape::LimitedSupply {
            free_copies: rng.gen_range(0..=buyers as u64),
            cap: if rng.gen_bool(0.5) { Price::Infinite } else { Price::Finite(Money::from_int(rng.gen_range(1..=8))) },
        },
        CurveFamily::Table => {
            let mut level = rng.gen_range(0..=2i128);
            let values = (0..limit)
                .map(|_| {
                    let v = Money::from_int(level);
                    level += rng.gen_range(0..=3);
                    v
                })
                .collect();
            CurveShape::Table { values }
        }
        CurveFamily::Convex | CurveFamily::Mixed => unreachable!(),
    };
    let copy_limit = match &shape {
        CurveShape::LimitedSupply { cap: Price::Finite(_), .. } => Some(limit),
        _ => None,
    };
    CostCurve::new(shape, copy_limit).expect("generated curves are valid")
}

fn random_bundle(items: usize, rng: &mut ChaCha8Rng) -> Bundle {
    loop {
        let mask = rng.gen_range(0..1u64 << items);
        if mask != 0 {
            return Bundle::from_mask(mask);
        }
    }
}

fn random_valuation(family: ValuationFamily, items: usize, value_max: u64, rng: &mut ChaCha8Rng) -> Valuation {
    let family = match family {
        ValuationFamily::Mixed => *[
            ValuationFamily::Additive,
            ValuationFamily::UnitDemand,
            ValuationFamily::SingleMinded,
            ValuationFamily::Table,
        ]
        .choose(rng)
        .unwrap(),
        f => f,
    };
    let mut value = || Money::from(rng.gen_range(0..=value_max));
    match family {
        ValuationFamily::Additive => Valuation::additive((0..items).map(|_| value()).collect()),
        ValuationFamily::UnitDemand => Valuation::unit_demand((0..items).map(|_| value()).collect()),
        ValuationFamily::SingleMinded => {
            let v = value();
            Valuation::single_minded(items, random_bundle(items, rng), v)
        }
        ValuationFamily::Table => {
            let entries = rng.gen_range(1..=4usize.min((1 << items) - 1));
            let closure = if rng.gen_bool(0.5) { Closure::Monotone } else { Closure::Exact };
            let listed: Vec<(Bundle, Money)> = (0..entries)
                .map(|_| (random_bundle(items, rng), Money::from(rng.gen_range(0..=value_max))))
                .collect();
            Valuation::table(items, closure, listed)
        }
        ValuationFamily::Mixed => unreachable!(),
    }
    .expect("generated valuations are valid")
}

/// A random instance, fully determined by `spec`.
pub fn gen_random(spec: &RandomSpec) -> Result<Instance, HarnessError> {
    if spec.items == 0 || spec.items > MAX_TABLE_ITEMS {
        return Err(HarnessError::InvalidArgument(format!("item count must be in 1..={MAX_TABLE_ITEMS}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let curves = (0..spec.items).map(|_| random_curve(spec.curves, spec.buyers, &mut rng)).collect();
    let buyers = (0..spec.buyers)
        .map(|_| random_valuation(spec.valuations, spec.items, spec.value_max, &mut rng))
        .collect();
    let mut instance = Instance::new(
        InstanceMeta { generator: "random".into(), seed: Some(spec.seed), fixture: None, size: None, vmax: Money::ONE },
        curves,
        buyers,
    )?;
    instance.meta.vmax = instance.value_bound().max(Money::ONE);
    Ok(instance)
}
