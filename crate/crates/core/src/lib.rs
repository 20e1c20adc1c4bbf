//! Fraud alert triage by Knowledge Areas.
//!
//! An alerted transaction and its person's history are split into Knowledge
//! Areas (alerted person, location, flow balance, card, counterpart, activity).
//! Each area gets a fact table and features; user-defined rules score and flag
//! areas with top-k attribution; summaries are generated from the facts and
//! verified against them; chart specs describe each area's history with the
//! current transaction and confirmed fraud highlighted.

pub mod areas;
pub mod charts;
pub mod countries;
pub mod datagen;
pub mod engine;
pub mod model;
pub mod money;
pub mod parallel;
pub mod registry;
pub mod risk;
pub mod rules;
pub mod store;
pub mod summary;

pub use areas::{extract_features, segment, Fact, FactValue, FeatureVector, KnowledgeAreaView, ParserConfig};
pub use engine::{Engine, EngineConfig, EngineError};
pub use model::{Alert, AlertContext, AlertStatus, Decision, Person, Transaction};
pub use money::Money;
pub use registry::{default_registry, KaId, KnowledgeArea, Registry};
pub use risk::{Assessment, RiskConfig, RiskReport};
pub use rules::{Rule, RuleSet};
pub use store::{BlockEntry, Store, StoreError};

/// Version stamped on every serialized payload consumed outside the crate.
pub const SCHEMA_VERSION: u32 = 1;
