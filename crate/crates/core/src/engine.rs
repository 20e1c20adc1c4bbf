//! Ingestion, assessment and per-alert views on top of the store.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::areas::{segment, KnowledgeAreaView, ParserConfig};
use crate::charts::{charts_for, ChartPanel};
use crate::model::{Alert, AlertContext, Decision, Person, Transaction, Violation};
use crate::parallel::{self, Execution};
use crate::registry::{default_registry, KaId, Registry};
use crate::risk::{Assessment, RiskConfig, RiskProvider, RiskReport, RuleRiskProvider};
use crate::rules::RuleSet;
use crate::store::{BlockEntry, IngestReport, Rejection, Store, StoreError};
use crate::summary::{summarize, LlmGateway, SummaryDoc, SummaryMode};
use crate::SCHEMA_VERSION;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EngineConfig {
    pub parser: ParserConfig,
    pub risk: RiskConfig,
    pub summary_mode: SummaryMode,
    pub execution: Execution,
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("unknown knowledge area {0:?}")]
    UnknownArea(String),
}

impl EngineError {
    pub fn is_not_found(&self) -> bool {
        matches!(
            self,
            EngineError::UnknownArea(_) | EngineError::Store(StoreError::NotFound { .. })
        )
    }

    pub fn is_conflict(&self) -> bool {
        matches!(self, EngineError::Store(StoreError::Conflict(_)))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestOutcome {
    #[serde(flatten)]
    pub report: IngestReport,
    /// Alerts created by this batch, ordered by transaction time.
    pub alerts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverviewEntry {
    pub ka: KaId,
    pub label: String,
    pub icon_key: String,
    pub risky: bool,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overview {
    pub schema_version: u32,
    pub alert: Alert,
    pub person: Person,
    pub transaction: Transaction,
    pub central_ka: KaId,
    pub event_score: f64,
    pub entries: Vec<OverviewEntry>,
}

/// Everything needed to render one alert.
pub struct AlertViews {
    pub context: AlertContext,
    pub views: BTreeMap<KaId, KnowledgeAreaView>,
    pub assessment: Assessment,
}

impl AlertViews {
    pub fn report(&self, ka: &KaId) -> RiskReport {
        self.assessment
            .reports
            .get(ka)
            .cloned()
            .unwrap_or_else(|| RiskReport::clear(ka.clone()))
    }
}

pub fn alert_id_for(transaction_id: &str) -> String {
    format!("alert-{transaction_id}")
}

pub struct Engine {
    store: Arc<Store>,
    registry: Registry,
    provider: RwLock<Arc<dyn RiskProvider>>,
    config: EngineConfig,
    llm: Option<Arc<LlmGateway>>,
}

impl Engine {
    pub fn new(store: Arc<Store>, rules: RuleSet, config: EngineConfig) -> Self {
        Engine {
            store,
            registry: default_registry(),
            provider: RwLock::new(Arc::new(RuleRiskProvider::new(rules, config.risk))),
            config,
            llm: None,
        }
    }

    pub fn with_registry(mut self, registry: Registry) -> Self {
        self.registry = registry;
        self
    }

    pub fn with_provider(self, provider: Arc<dyn RiskProvider>) -> Self {
        *self.provider.write().unwrap_or_else(|e| e.into_inner()) = provider;
        self
    }

    pub fn with_llm(mut self, llm: Arc<LlmGateway>) -> Self {
        self.llm = Some(llm);
        self
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Replaces the rule set; existing alerts keep their stored assessment.
    pub fn set_rules(&self, rules: RuleSet) {
        let provider = Arc::new(RuleRiskProvider::new(rules, self.config.risk));
        *self.provider.write().unwrap_or_else(|e| e.into_inner()) = provider;
    }

    fn provider(&self) -> Arc<dyn RiskProvider> {
        Arc::clone(&self.provider.read().unwrap_or_else(|e| e.into_inner()))
    }

    fn area(&self, ka: &str) -> Result<KaId, EngineError> {
        self.registry
            .find(ka)
            .map(|a| a.id.clone())
            .ok_or_else(|| EngineError::UnknownArea(ka.to_string()))
    }

    /// Segments `ctx`, adding the blocklist justification to justified areas.
    pub fn views(&self, ctx: &AlertContext, block: Option<&BlockEntry>) -> BTreeMap<KaId, KnowledgeAreaView> {
        let mut views = segment(ctx, &self.registry, &self.config.parser);
        if let Some(b) = block {
            for ka in &b.justified_kas {
                if let Some(v) = views.get_mut(ka) {
                    v.add_block_justification(&b.justification_text);
                }
            }
        }
        views
    }

    pub fn assess(&self, ctx: &AlertContext) -> (BTreeMap<KaId, KnowledgeAreaView>, Assessment) {
        let block = self
            .store
            .blocklist_check(&ctx.person.person_id, ctx.current.device_id.as_deref());
        let views = self.views(ctx, block.as_ref());
        let assessment = self.provider().assess(ctx, &views, block.as_ref());
        (views, assessment)
    }

    /// Stores the events, assesses every new one and opens an alert for each
    /// event with a flagged area. Persons are processed in parallel; the
    /// events of one person run in time order so earlier alerts are visible
    /// to later events.
    pub fn ingest_events(&self, events: Vec<Transaction>) -> Result<IngestOutcome, EngineError> {
        let mut rejections = Vec::new();
        let mut known = Vec::with_capacity(events.len());
        let mut positions = Vec::with_capacity(events.len());
        for (index, t) in events.into_iter().enumerate() {
            if self.store.person(&t.person_id).is_none() {
                rejections.push(Rejection {
                    index,
                    transaction_id: t.transaction_id.clone(),
                    violations: vec![Violation::new("person_id", "unknown person_id")],
                });
            } else {
                positions.push(index);
                known.push(t);
            }
        }
        let mut report = self.store.ingest(known)?;
        for r in &mut report.rejections {
            r.index = positions[r.index];
        }
        report.rejections.extend(rejections);
        report.rejections.sort_by_key(|r| r.index);

        let mut by_person: BTreeMap<String, Vec<Transaction>> = BTreeMap::new();
        for id in &report.new_ids {
            if let Some(t) = self.store.transaction(id) {
                by_person.entry(t.person_id.clone()).or_default().push(t);
            }
        }
        let groups: Vec<(String, Vec<Transaction>)> = by_person.into_iter().collect();
        let created: Vec<Vec<(Alert, Assessment)>> =
            parallel::map(&groups, self.config.execution, |(pid, txns)| {
                self.assess_person(pid, txns)
            });
        let mut created: Vec<(Alert, Assessment)> = created.into_iter().flatten().collect();
        created.sort_by(|a, b| {
            a.0.created_at
                .cmp(&b.0.created_at)
                .then_with(|| a.0.alert_id.cmp(&b.0.alert_id))
        });
        let alerts = created.iter().map(|(a, _)| a.alert_id.clone()).collect();
        self.store.create_alerts(created)?;
        Ok(IngestOutcome { report, alerts })
    }

    fn assess_person(&self, person_id: &str, new: &[Transaction]) -> Vec<(Alert, Assessment)> {
        let Some(person) = self.store.person(person_id) else {
            return Vec::new();
        };
        let all = self.store.person_transactions(person_id);
        let mut alert_of: HashMap<String, Alert> = self
            .store
            .person_alerts_before(person_id, DateTime::<Utc>::MAX_UTC)
            .into_iter()
            .map(|a| (a.transaction_id.clone(), a))
            .collect();
        let mut new: Vec<&Transaction> = new.iter().collect();
        new.sort_by(|a, b| {
            a.timestamp
                .cmp(&b.timestamp)
                .then_with(|| a.transaction_id.cmp(&b.transaction_id))
        });

        let mut out = Vec::new();
        for t in new {
            if alert_of.contains_key(&t.transaction_id) {
                continue;
            }
            let cut = all.partition_point(|h| h.timestamp < t.timestamp);
            let history = all[..cut].to_vec();
            let past_alerts = history
                .iter()
                .filter_map(|h| alert_of.get(&h.transaction_id).cloned())
                .collect();
            let ctx = AlertContext {
                alert: Alert::open(alert_id_for(&t.transaction_id), &t.transaction_id, t.timestamp),
                current: t.clone(),
                person: person.clone(),
                history,
                past_alerts,
            };
            let (_, assessment) = self.assess(&ctx);
            if assessment.any_flagged() {
                alert_of.insert(t.transaction_id.clone(), ctx.alert.clone());
                out.push((ctx.alert, assessment));
            }
        }
        out
    }

    /// Opens an alert for a stored transaction whether or not an area flags.
    /// Returns the existing alert if there is one.
    pub fn raise_alert(&self, transaction_id: &str) -> Result<Alert, EngineError> {
        if let Some(a) = self.store.alert_for_transaction(transaction_id) {
            return Ok(a);
        }
        let current = self
            .store
            .transaction(transaction_id)
            .ok_or_else(|| StoreError::NotFound {
                kind: "transaction",
                id: transaction_id.to_string(),
            })?;
        let person = self
            .store
            .person(&current.person_id)
            .ok_or_else(|| StoreError::NotFound {
                kind: "person",
                id: current.person_id.clone(),
            })?;
        let history: Vec<Transaction> = self
            .store
            .person_transactions(&person.person_id)
            .into_iter()
            .take_while(|t| t.timestamp < current.timestamp)
            .collect();
        let past_alerts = self
            .store
            .person_alerts_before(&person.person_id, current.timestamp);
        let ctx = AlertContext {
            alert: Alert::open(alert_id_for(transaction_id), transaction_id, current.timestamp),
            current,
            person,
            history,
            past_alerts,
        };
        let (_, assessment) = self.assess(&ctx);
        self.store.create_alert(ctx.alert.clone(), assessment)?;
        Ok(ctx.alert)
    }

    /// Context, views and the stored assessment of an alert.
    pub fn alert_views(&self, alert_id: &str) -> Result<AlertViews, EngineError> {
        let context = self.store.load_context(alert_id)?;
        let assessment = self.store.assessment(alert_id).ok_or_else(|| StoreError::NotFound {
            kind: "assessment",
            id: alert_id.to_string(),
        })?;
        let justified = assessment.reports.values().any(|r| r.blocklist_justified);
        let block = if justified {
            self.store
                .blocklist_check(&context.person.person_id, context.current.device_id.as_deref())
        } else {
            None
        };
        let views = self.views(&context, block.as_ref());
        Ok(AlertViews {
            context,
            views,
            assessment,
        })
    }

    pub fn overview(&self, alert_id: &str) -> Result<Overview, EngineError> {
        let context = self.store.load_context(alert_id)?;
        let assessment = self.store.assessment(alert_id).ok_or_else(|| StoreError::NotFound {
            kind: "assessment",
            id: alert_id.to_string(),
        })?;
        let entries = self
            .registry
            .areas()
            .iter()
            .map(|a| {
                let r = assessment.reports.get(&a.id);
                OverviewEntry {
                    ka: a.id.clone(),
                    label: a.label.clone(),
                    icon_key: a.icon_key.clone(),
                    risky: r.is_some_and(|r| r.flagged),
                    score: r.map_or(0.0, |r| r.score),
                }
            })
            .collect();
        Ok(Overview {
            schema_version: SCHEMA_VERSION,
            alert: context.alert,
            person: context.person,
            transaction: context.current,
            central_ka: self.registry.central().id.clone(),
            event_score: assessment.event_score(),
            entries,
        })
    }

    pub fn summary(&self, alert_id: &str, ka: &str, mode: Option<SummaryMode>) -> Result<SummaryDoc, EngineError> {
        let ka = self.area(ka)?;
        let v = self.alert_views(alert_id)?;
        let mode = mode.unwrap_or(self.config.summary_mode);
        Ok(summarize(&v.views[&ka], &v.report(&ka), mode, self.llm.as_deref()))
    }

    /// Summaries of every area of an alert, generated concurrently.
    pub fn summaries(&self, alert_id: &str, mode: Option<SummaryMode>) -> Result<Vec<SummaryDoc>, EngineError> {
        let v = self.alert_views(alert_id)?;
        let mode = mode.unwrap_or(self.config.summary_mode);
        let kas: Vec<KaId> = self.registry.ids().cloned().collect();
        Ok(parallel::map(&kas, self.config.execution, |ka| {
            summarize(&v.views[ka], &v.report(ka), mode, self.llm.as_deref())
        }))
    }

    pub fn charts(&self, alert_id: &str, ka: &str) -> Result<ChartPanel, EngineError> {
        let ka = self.area(ka)?;
        let v = self.alert_views(alert_id)?;
        Ok(charts_for(&v.views[&ka], &v.context))
    }

    pub fn rows(&self, alert_id: &str, ka: &str) -> Result<Vec<Transaction>, EngineError> {
        let ka = self.area(ka)?;
        let mut v = self.alert_views(alert_id)?;
        Ok(v.views.remove(&ka).map(|v| v.rows).unwrap_or_default())
    }

    pub fn decide(&self, alert_id: &str, decision: Decision, at: DateTime<Utc>) -> Result<Alert, EngineError> {
        Ok(self.store.record_decision(alert_id, decision, at)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::Direction;
    use crate::store::SubjectKind;

    fn engine() -> Engine {
        let store = Arc::new(Store::in_memory());
        store.put_persons(vec![person()]).unwrap();
        Engine::new(store, RuleSet::default_rules(), EngineConfig::default())
    }

    fn history() -> Vec<Transaction> {
        (1..=6)
            .map(|d| transfer(&format!("h{d}"), d, "50.00", Direction::Outgoing))
            .chain((1..=2).map(|d| transfer(&format!("s{d}"), d, "2000.00", Direction::Incoming)))
            .collect()
    }

    #[test]
    fn benign_event_opens_no_alert() {
        let e = engine();
        let out = e.ingest_events(history()).unwrap();
        assert_eq!(out.report.ingested, 8);
        let out = e
            .ingest_events(vec![transfer("c", 8, "52.00", Direction::Outgoing)])
            .unwrap();
        assert!(out.alerts.is_empty(), "{:?}", out.alerts);
    }

    #[test]
    fn new_country_opens_location_alert() {
        let e = engine();
        e.ingest_events(history()).unwrap();
        let mut t = transfer("c", 8, "52.00", Direction::Outgoing);
        t.country = "BR".into();
        t.city = "Recife".into();
        let out = e.ingest_events(vec![t]).unwrap();
        assert_eq!(out.alerts, vec!["alert-c".to_string()]);
        let o = e.overview("alert-c").unwrap();
        assert_eq!(o.entries.len(), 6);
        let loc = o.entries.iter().find(|x| x.ka == KaId::LOCATION).unwrap();
        assert!(loc.risky);
        assert_eq!(o.central_ka, KaId::ALERTED_PERSON);
    }

    #[test]
    fn unknown_person_is_rejected_with_batch_index() {
        let e = engine();
        let mut stranger = transfer("x", 1, "10.00", Direction::Outgoing);
        stranger.person_id = "P404".into();
        let bad = transfer("y", 1, "0.00", Direction::Outgoing);
        let out = e
            .ingest_events(vec![transfer("ok", 1, "10.00", Direction::Outgoing), stranger, bad])
            .unwrap();
        assert_eq!(out.report.ingested, 1);
        let idx: Vec<usize> = out.report.rejections.iter().map(|r| r.index).collect();
        assert_eq!(idx, vec![1, 2]);
    }

    #[test]
    fn blocklisted_person_flags_justified_area() {
        let e = engine();
        e.ingest_events(history()).unwrap();
        e.store()
            .blocklist_add(BlockEntry {
                subject_kind: SubjectKind::User,
                subject_id: "P1".into(),
                justification_text: "Reported account takeover".into(),
                justified_kas: vec![KaId::CARD],
                added_at: ts(0, 0),
            })
            .unwrap();
        let out = e
            .ingest_events(vec![transfer("c", 8, "52.00", Direction::Outgoing)])
            .unwrap();
        assert_eq!(out.alerts.len(), 1);
        let v = e.alert_views("alert-c").unwrap();
        let card = v.report(&KaId::CARD);
        assert!(card.flagged && card.blocklist_justified);
        let doc = e.summary("alert-c", "card", Some(SummaryMode::TemplateOnly)).unwrap();
        assert!(doc.text.contains("Reported account takeover"), "{}", doc.text);
    }

    #[test]
    fn unknown_area_and_alert_are_not_found() {
        let e = engine();
        assert!(e.summary("nope", "card", None).unwrap_err().is_not_found());
        e.ingest_events(history()).unwrap();
        let a = e.raise_alert("h3").unwrap();
        assert!(e.charts(&a.alert_id, "weather").unwrap_err().is_not_found());
        assert_eq!(e.raise_alert("h3").unwrap(), a);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let run = |execution| {
            let store = Arc::new(Store::in_memory());
            store.put_persons(vec![person()]).unwrap();
            let e = Engine::new(
                store,
                RuleSet::default_rules(),
                EngineConfig {
                    execution,
                    ..EngineConfig::default()
                },
            );
            let mut events = history();
            let mut t = transfer("c", 8, "900.00", Direction::Outgoing);
            t.country = "BR".into();
            events.push(t);
            let out = e.ingest_events(events).unwrap();
            (out.alerts.clone(), serde_json::to_string(&e.store().assessment("alert-c")).unwrap())
        };
        assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
    }
}
