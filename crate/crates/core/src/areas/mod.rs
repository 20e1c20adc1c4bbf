//! Knowledge Area parser: splits an alert context into per-area fact tables,
//! feature vectors and raw rows.

mod catalog;
mod parse;

use std::collections::BTreeMap;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::model::{AlertContext, Transaction};
use crate::money::Money;
use crate::registry::{KaId, Registry};

pub use catalog::{catalog, evidence_fact, owner, FeatureDescriptor};
pub(crate) use parse::amount_stats as parse_amount_stats;

pub const DEFAULT_WINDOW_DAYS: u32 = 90;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParserConfig {
    pub window_days: u32,
}

impl Default for ParserConfig {
    fn default() -> Self {
        ParserConfig {
            window_days: DEFAULT_WINDOW_DAYS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum FactValue {
    Amount(Money),
    Decimal(f64),
    Integer(i64),
    Text(String),
    Date(NaiveDate),
    Boolean(bool),
}

impl FactValue {
    /// Numeric reading used by the fact checker; `None` for text, dates and booleans.
    pub fn as_number(&self) -> Option<f64> {
        match self {
            FactValue::Amount(m) => Some(m.to_f64()),
            FactValue::Decimal(d) => Some(*d),
            FactValue::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn is_numeric(&self) -> bool {
        self.as_number().is_some()
    }
}

impl fmt::Display for FactValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FactValue::Amount(m) => write!(f, "{m}"),
            FactValue::Decimal(d) => write!(f, "{d:.2}"),
            FactValue::Integer(i) => write!(f, "{i}"),
            FactValue::Text(s) => f.write_str(s),
            FactValue::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
            FactValue::Boolean(b) => f.write_str(if *b { "yes" } else { "no" }),
        }
    }
}

/// Current value against the person's historical baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Comparative {
    pub current: f64,
    pub baseline: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fact {
    pub fact_id: String,
    pub ka: KaId,
    pub name: String,
    pub value: FactValue,
    pub unit: Option<String>,
    pub comparative: Option<Comparative>,
}

impl Fact {
    pub fn new(ka: &KaId, key: &str, name: &str, value: FactValue) -> Self {
        Fact {
            fact_id: format!("{ka}.{key}"),
            ka: ka.clone(),
            name: name.to_string(),
            value,
            unit: None,
            comparative: None,
        }
    }

    pub fn with_unit(mut self, unit: &str) -> Self {
        self.unit = Some(unit.to_string());
        self
    }

    pub fn with_comparative(mut self, current: f64, baseline: f64) -> Self {
        debug_assert!(self.value.is_numeric());
        self.comparative = Some(Comparative { current, baseline });
        self
    }

    /// Short key without the area prefix, e.g. `mean_amount_90d`.
    pub fn key(&self) -> &str {
        self.fact_id
            .split_once('.')
            .map_or(self.fact_id.as_str(), |(_, k)| k)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub ka: KaId,
    pub value: f64,
}

/// Feature name to value, each feature tagged with its owning area.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(BTreeMap<String, Feature>);

impl FeatureVector {
    pub fn new() -> Self {
        FeatureVector(BTreeMap::new())
    }

    pub fn insert(&mut self, name: impl Into<String>, ka: KaId, value: f64) {
        self.0.insert(name.into(), Feature { ka, value });
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).map(|f| f.value)
    }

    pub fn owner(&self, name: &str) -> Option<&KaId> {
        self.0.get(name).map(|f| &f.ka)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Feature)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    pub fn merge(&mut self, other: FeatureVector) {
        self.0.extend(other.0);
    }

    /// The slice of features owned by `ka`.
    pub fn for_area(&self, ka: &KaId) -> FeatureVector {
        FeatureVector(
            self.0
                .iter()
                .filter(|(_, f)| &f.ka == ka)
                .map(|(k, f)| (k.clone(), f.clone()))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeAreaView {
    pub ka: KaId,
    pub facts: Vec<Fact>,
    pub features: FeatureVector,
    pub rows: Vec<Transaction>,
}

impl KnowledgeAreaView {
    pub fn fact(&self, key: &str) -> Option<&Fact> {
        self.facts.iter().find(|f| f.key() == key)
    }

    /// Appends the blocklist justification as a fact of this area.
    pub fn add_block_justification(&mut self, justification: &str) {
        self.facts.push(Fact::new(
            &self.ka,
            "blocklist_justification",
            "Blocklist justification",
            FactValue::Text(justification.to_string()),
        ));
    }
}

/// One view per registered area, keyed by area id.
pub fn segment(
    ctx: &AlertContext,
    registry: &Registry,
    cfg: &ParserConfig,
) -> BTreeMap<KaId, KnowledgeAreaView> {
    registry
        .ids()
        .map(|ka| (ka.clone(), parse::build(ka, ctx, cfg)))
        .collect()
}

/// The full feature catalog evaluated on `ctx`.
pub fn extract_features(ctx: &AlertContext, cfg: &ParserConfig) -> FeatureVector {
    let mut out = FeatureVector::new();
    for ka in KaId::BUILTIN.iter() {
        out.merge(parse::build(ka, ctx, cfg).features);
    }
    out
}
