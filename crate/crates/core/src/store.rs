//! Embedded store for transactions, persons, alerts, assessments and the blocklist.
//!
//! State lives in memory behind a single `RwLock`. A store opened on a path
//! also appends every mutation to a JSONL journal in that file and replays it
//! on open; [`Store::in_memory`] skips the journal.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{
    validate_person, validate_transaction, Alert, AlertContext, AlertStatus, Decision, Person,
    Transaction, Violation,
};
use crate::registry::KaId;
use crate::risk::Assessment;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectKind {
    User,
    Device,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockEntry {
    pub subject_kind: SubjectKind,
    pub subject_id: String,
    pub justification_text: String,
    pub justified_kas: Vec<KaId>,
    pub added_at: DateTime<Utc>,
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("{kind} {id:?} not found")]
    NotFound { kind: &'static str, id: String },
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("invalid: {0}")]
    Invalid(String),
    #[error("journal i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("journal record at line {line}: {source}")]
    Corrupt {
        line: usize,
        source: serde_json::Error,
    },
}

impl StoreError {
    fn not_found(kind: &'static str, id: &str) -> Self {
        StoreError::NotFound {
            kind,
            id: id.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    /// Position of the record in the submitted batch.
    pub index: usize,
    pub transaction_id: String,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub ingested: usize,
    pub skipped: usize,
    pub rejections: Vec<Rejection>,
    /// Ids of newly stored transactions, in batch order.
    #[serde(skip)]
    pub new_ids: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum JournalOp {
    Person { person: Person },
    Transaction { transaction: Transaction },
    Alert { alert: Alert, assessment: Assessment },
    Decision { alert_id: String, decision: Decision, decided_at: DateTime<Utc> },
    Block { entry: BlockEntry },
}

#[derive(Debug, Default, PartialEq)]
struct State {
    persons: BTreeMap<String, Person>,
    txns: HashMap<String, Transaction>,
    /// Per person, transaction ids ascending by (timestamp, id).
    by_person: HashMap<String, Vec<String>>,
    alerts: BTreeMap<String, Alert>,
    alert_by_txn: HashMap<String, String>,
    assessments: HashMap<String, Assessment>,
    blocklist: BTreeMap<(SubjectKind, String), BlockEntry>,
}

impl State {
    fn apply(&mut self, op: JournalOp) {
        match op {
            JournalOp::Person { person } => {
                self.persons.insert(person.person_id.clone(), person);
            }
            JournalOp::Transaction { transaction } => self.insert_txn(transaction),
            JournalOp::Alert { alert, assessment } => {
                self.alert_by_txn
                    .insert(alert.transaction_id.clone(), alert.alert_id.clone());
                self.assessments.insert(alert.alert_id.clone(), assessment);
                self.alerts.insert(alert.alert_id.clone(), alert);
            }
            JournalOp::Decision {
                alert_id,
                decision,
                decided_at,
            } => {
                if let Some(alert) = self.alerts.get_mut(&alert_id) {
                    alert.status = AlertStatus::Decided;
                    alert.decision = Some(decision);
                    alert.decided_at = Some(decided_at);
                    if decision == Decision::Fraud {
                        if let Some(t) = self.txns.get_mut(&alert.transaction_id) {
                            t.confirmed_fraud = true;
                        }
                    }
                }
            }
            JournalOp::Block { entry } => {
                self.blocklist
                    .insert((entry.subject_kind, entry.subject_id.clone()), entry);
            }
        }
    }

    fn insert_txn(&mut self, t: Transaction) {
        let ids = self.by_person.entry(t.person_id.clone()).or_default();
        let key = (t.timestamp, t.transaction_id.as_str());
        let txns = &self.txns;
        let pos = ids.partition_point(|id| {
            let other = &txns[id];
            (other.timestamp, other.transaction_id.as_str()) < key
        });
        ids.insert(pos, t.transaction_id.clone());
        self.txns.insert(t.transaction_id.clone(), t);
    }

    fn person_txns(&self, person_id: &str) -> impl Iterator<Item = &Transaction> {
        self.by_person
            .get(person_id)
            .into_iter()
            .flatten()
            .map(|id| &self.txns[id])
    }
}

pub struct Store {
    state: RwLock<State>,
    journal: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl Store {
    pub fn in_memory() -> Self {
        Store {
            state: RwLock::new(State::default()),
            journal: None,
            path: None,
        }
    }

    /// Opens (or creates) a journal-backed store at `path`.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let mut state = State::default();
        if path.exists() {
            let reader = BufReader::new(File::open(&path)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let op: JournalOp = serde_json::from_str(&line)
                    .map_err(|source| StoreError::Corrupt { line: i + 1, source })?;
                state.apply(op);
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Store {
            state: RwLock::new(state),
            journal: Some(Mutex::new(file)),
            path: Some(path),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn write_journal(&self, ops: &[JournalOp]) -> Result<(), StoreError> {
        let Some(journal) = &self.journal else {
            return Ok(());
        };
        let mut buf = Vec::new();
        for op in ops {
            serde_json::to_writer(&mut buf, op).expect("journal ops serialize");
            buf.push(b'\n');
        }
        let mut file = journal.lock().unwrap();
        file.write_all(&buf)?;
        file.flush()?;
        Ok(())
    }

    fn read(&self) -> std::sync::RwLockReadGuard<'_, State> {
        self.state.read().unwrap()
    }

    fn write(&self) -> std::sync::RwLockWriteGuard<'_, State> {
        self.state.write().unwrap()
    }

    /// Stores valid persons; already-known ids are skipped.
    pub fn put_persons(&self, persons: Vec<Person>) -> Result<IngestReport, StoreError> {
        let mut report = IngestReport::default();
        let mut state = self.write();
        let mut ops = Vec::new();
        for (index, p) in persons.into_iter().enumerate() {
            if let Err(violations) = validate_person(&p) {
                report.rejections.push(Rejection {
                    index,
                    transaction_id: p.person_id.clone(),
                    violations,
                });
                continue;
            }
            if state.persons.contains_key(&p.person_id) {
                report.skipped += 1;
                continue;
            }
            report.ingested += 1;
            report.new_ids.push(p.person_id.clone());
            state.persons.insert(p.person_id.clone(), p.clone());
            ops.push(JournalOp::Person { person: p });
        }
        self.write_journal(&ops)?;
        Ok(report)
    }

    /// Stores valid, previously unseen transactions. The whole batch becomes
    /// visible to readers at once.
    pub fn ingest(&self, events: Vec<Transaction>) -> Result<IngestReport, StoreError> {
        let mut report = IngestReport::default();
        let mut state = self.write();
        let mut ops = Vec::new();
        for (index, t) in events.into_iter().enumerate() {
            if let Err(violations) = validate_transaction(&t) {
                report.rejections.push(Rejection {
                    index,
                    transaction_id: t.transaction_id.clone(),
                    violations,
                });
                continue;
            }
            if state.txns.contains_key(&t.transaction_id) {
                report.skipped += 1;
                continue;
            }
            report.ingested += 1;
            report.new_ids.push(t.transaction_id.clone());
            state.insert_txn(t.clone());
            ops.push(JournalOp::Transaction { transaction: t });
        }
        self.write_journal(&ops)?;
        Ok(report)
    }

    pub fn transaction(&self, id: &str) -> Option<Transaction> {
        self.read().txns.get(id).cloned()
    }

    pub fn person(&self, id: &str) -> Option<Person> {
        self.read().persons.get(id).cloned()
    }

    pub fn transaction_count(&self) -> usize {
        self.read().txns.len()
    }

    /// All transactions of a person ascending by timestamp.
    pub fn person_transactions(&self, person_id: &str) -> Vec<Transaction> {
        self.read().person_txns(person_id).cloned().collect()
    }

    /// Alerts of a person whose transaction precedes `before`.
    pub fn person_alerts_before(&self, person_id: &str, before: DateTime<Utc>) -> Vec<Alert> {
        let state = self.read();
        state
            .person_txns(person_id)
            .take_while(|t| t.timestamp < before)
            .filter_map(|t| state.alert_by_txn.get(&t.transaction_id))
            .map(|id| state.alerts[id].clone())
            .collect()
    }

    pub fn alert(&self, alert_id: &str) -> Option<Alert> {
        self.read().alerts.get(alert_id).cloned()
    }

    pub fn alert_for_transaction(&self, transaction_id: &str) -> Option<Alert> {
        let state = self.read();
        state
            .alert_by_txn
            .get(transaction_id)
            .map(|id| state.alerts[id].clone())
    }

    pub fn alerts(&self) -> Vec<Alert> {
        self.read().alerts.values().cloned().collect()
    }

    pub fn assessment(&self, alert_id: &str) -> Option<Assessment> {
        self.read().assessments.get(alert_id).cloned()
    }

    /// Records a new alert and its assessment. An alert id or transaction
    /// that already has an alert is a conflict.
    pub fn create_alert(&self, alert: Alert, assessment: Assessment) -> Result<(), StoreError> {
        let mut state = self.write();
        self.insert_alert(&mut state, alert, assessment)
    }

    /// Records several alerts under one write lock.
    pub fn create_alerts(&self, alerts: Vec<(Alert, Assessment)>) -> Result<(), StoreError> {
        let mut state = self.write();
        for (a, s) in alerts {
            self.insert_alert(&mut state, a, s)?;
        }
        Ok(())
    }

    fn insert_alert(
        &self,
        state: &mut State,
        alert: Alert,
        assessment: Assessment,
    ) -> Result<(), StoreError> {
        if !state.txns.contains_key(&alert.transaction_id) {
            return Err(StoreError::not_found("transaction", &alert.transaction_id));
        }
        if state.alerts.contains_key(&alert.alert_id)
            || state.alert_by_txn.contains_key(&alert.transaction_id)
        {
            return Err(StoreError::Conflict(format!(
                "alert for transaction {} already exists",
                alert.transaction_id
            )));
        }
        let op = JournalOp::Alert { alert, assessment };
        self.write_journal(std::slice::from_ref(&op))?;
        state.apply(op);
        Ok(())
    }

    pub fn load_context(&self, alert_id: &str) -> Result<AlertContext, StoreError> {
        let state = self.read();
        let alert = state
            .alerts
            .get(alert_id)
            .ok_or_else(|| StoreError::not_found("alert", alert_id))?
            .clone();
        let current = state
            .txns
            .get(&alert.transaction_id)
            .ok_or_else(|| StoreError::not_found("transaction", &alert.transaction_id))?
            .clone();
        let person = state
            .persons
            .get(&current.person_id)
            .ok_or_else(|| StoreError::not_found("person", &current.person_id))?
            .clone();
        let history: Vec<Transaction> = state
            .person_txns(&person.person_id)
            .take_while(|t| t.timestamp < current.timestamp)
            .cloned()
            .collect();
        let past_alerts = history
            .iter()
            .filter_map(|t| state.alert_by_txn.get(&t.transaction_id))
            .map(|id| state.alerts[id].clone())
            .collect();
        Ok(AlertContext {
            alert,
            current,
            person,
            history,
            past_alerts,
        })
    }

    pub fn record_decision(
        &self,
        alert_id: &str,
        decision: Decision,
        at: DateTime<Utc>,
    ) -> Result<Alert, StoreError> {
        let mut state = self.write();
        let alert = state
            .alerts
            .get(alert_id)
            .ok_or_else(|| StoreError::not_found("alert", alert_id))?;
        if alert.status == AlertStatus::Decided {
            return Err(StoreError::Conflict(format!("alert {alert_id} already decided")));
        }
        let op = JournalOp::Decision {
            alert_id: alert_id.to_string(),
            decision,
            decided_at: at,
        };
        self.write_journal(std::slice::from_ref(&op))?;
        state.apply(op);
        Ok(state.alerts[alert_id].clone())
    }

    /// A user entry wins over a device entry.
    pub fn blocklist_check(&self, person_id: &str, device_id: Option<&str>) -> Option<BlockEntry> {
        let state = self.read();
        state
            .blocklist
            .get(&(SubjectKind::User, person_id.to_string()))
            .or_else(|| {
                device_id.and_then(|d| state.blocklist.get(&(SubjectKind::Device, d.to_string())))
            })
            .cloned()
    }

    pub fn blocklist_add(&self, entry: BlockEntry) -> Result<(), StoreError> {
        if entry.justified_kas.is_empty() {
            return Err(StoreError::Invalid("justified_kas must not be empty".into()));
        }
        let mut state = self.write();
        let key = (entry.subject_kind, entry.subject_id.clone());
        if state.blocklist.contains_key(&key) {
            return Err(StoreError::Conflict(format!(
                "{:?} {} already blocklisted",
                entry.subject_kind, entry.subject_id
            )));
        }
        let op = JournalOp::Block { entry };
        self.write_journal(std::slice::from_ref(&op))?;
        state.apply(op);
        Ok(())
    }

    #[cfg(test)]
    fn same_state(&self, other: &Store) -> bool {
        *self.read() == *other.read()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;
    use crate::model::Direction;
    use crate::risk::Assessment;
    use crate::money::Money;

    fn empty_assessment() -> Assessment {
        Assessment {
            reports: BTreeMap::new(),
        }
    }

    fn three() -> Vec<Transaction> {
        vec![
            transfer("T1", 1, "10.00", Direction::Outgoing),
            transfer("T2", 2, "20.00", Direction::Outgoing),
            transfer("T3", 3, "30.00", Direction::Incoming),
        ]
    }

    fn seeded() -> Store {
        let s = Store::in_memory();
        s.put_persons(vec![person()]).unwrap();
        s
    }

    #[test]
    fn ingest_is_idempotent() {
        let s = seeded();
        let r = s.ingest(three()).unwrap();
        assert_eq!((r.ingested, r.skipped), (3, 0));
        let r = s.ingest(three()).unwrap();
        assert_eq!((r.ingested, r.skipped), (0, 3));
        assert_eq!(s.transaction_count(), 3);
    }

    #[test]
    fn partial_batch_reports_rejection() {
        let s = seeded();
        let mut bad = transfer("T9", 4, "1.00", Direction::Outgoing);
        bad.amount = Money::ZERO;
        let mut batch = three();
        batch.truncate(2);
        batch.push(bad);
        let r = s.ingest(batch).unwrap();
        assert_eq!((r.ingested, r.skipped), (2, 0));
        assert_eq!(r.rejections.len(), 1);
        assert_eq!(r.rejections[0].index, 2);
        assert_eq!(r.rejections[0].transaction_id, "T9");
    }

    #[test]
    fn context_with_empty_history() {
        let s = seeded();
        s.ingest(vec![transfer("T1", 1, "10.00", Direction::Outgoing)]).unwrap();
        s.create_alert(Alert::open("A1", "T1", ts(1, 12)), empty_assessment()).unwrap();
        let ctx = s.load_context("A1").unwrap();
        assert!(ctx.history.is_empty());
        assert_eq!(ctx.current.transaction_id, "T1");
    }

    #[test]
    fn context_history_sorted_and_excludes_current() {
        let s = seeded();
        let mut txns: Vec<_> = (0..5)
            .map(|i| transfer(&format!("H{i}"), 5 - i, "5.00", Direction::Outgoing))
            .collect();
        txns.push(transfer("CUR", 10, "50.00", Direction::Outgoing));
        txns.push(transfer("LATER", 11, "50.00", Direction::Outgoing));
        s.ingest(txns).unwrap();
        s.create_alert(Alert::open("A1", "CUR", ts(10, 12)), empty_assessment()).unwrap();
        let ctx = s.load_context("A1").unwrap();
        assert_eq!(ctx.history.len(), 5);
        assert!(ctx.history.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        assert!(ctx.history.iter().all(|t| t.timestamp < ctx.current.timestamp));
    }

    #[test]
    fn unknown_alert_is_not_found() {
        let s = seeded();
        assert!(matches!(s.load_context("nope"), Err(StoreError::NotFound { kind: "alert", .. })));
    }

    #[test]
    fn fraud_decision_sets_flag_and_conflicts_twice() {
        let s = seeded();
        s.ingest(three()).unwrap();
        s.create_alert(Alert::open("A1", "T2", ts(2, 12)), empty_assessment()).unwrap();
        let a = s.record_decision("A1", Decision::Fraud, ts(3, 0)).unwrap();
        assert_eq!(a.status, AlertStatus::Decided);
        assert_eq!(a.decided_at, Some(ts(3, 0)));
        assert!(s.transaction("T2").unwrap().confirmed_fraud);
        assert!(matches!(
            s.record_decision("A1", Decision::Legitimate, ts(4, 0)),
            Err(StoreError::Conflict(_))
        ));
    }

    #[test]
    fn legitimate_decision_leaves_flag() {
        let s = seeded();
        s.ingest(three()).unwrap();
        s.create_alert(Alert::open("A1", "T2", ts(2, 12)), empty_assessment()).unwrap();
        let a = s.record_decision("A1", Decision::Legitimate, ts(3, 0)).unwrap();
        assert_eq!(a.decision, Some(Decision::Legitimate));
        assert!(!s.transaction("T2").unwrap().confirmed_fraud);
    }

    fn block(kind: SubjectKind, id: &str, kas: Vec<KaId>) -> BlockEntry {
        BlockEntry {
            subject_kind: kind,
            subject_id: id.into(),
            justification_text: "Card reported stolen".into(),
            justified_kas: kas,
            added_at: ts(0, 0),
        }
    }

    #[test]
    fn blocklist_behaviour() {
        let s = Store::in_memory();
        assert_eq!(s.blocklist_check("P1", Some("D1")), None);
        s.blocklist_add(block(SubjectKind::Device, "D1", vec![KaId::CARD])).unwrap();
        s.blocklist_add(block(SubjectKind::User, "P1", vec![KaId::ALERTED_PERSON])).unwrap();
        let hit = s.blocklist_check("P1", Some("D1")).unwrap();
        assert_eq!(hit.subject_kind, SubjectKind::User);
        assert_eq!(hit.justified_kas, vec![KaId::ALERTED_PERSON]);
        assert_eq!(
            s.blocklist_check("P2", Some("D1")).unwrap().subject_kind,
            SubjectKind::Device
        );
        assert!(matches!(
            s.blocklist_add(block(SubjectKind::User, "P1", vec![KaId::CARD])),
            Err(StoreError::Conflict(_))
        ));
        assert!(matches!(
            s.blocklist_add(block(SubjectKind::User, "P3", vec![])),
            Err(StoreError::Invalid(_))
        ));
    }

    #[test]
    fn journal_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("store.jsonl");
        let mut txns = three();
        txns[0].timestamp = txns[0].timestamp + chrono::Duration::nanoseconds(123_456_789);
        {
            let s = Store::open(&path).unwrap();
            s.put_persons(vec![person()]).unwrap();
            s.ingest(txns.clone()).unwrap();
            s.create_alert(Alert::open("A1", "T2", ts(2, 12)), empty_assessment()).unwrap();
            s.record_decision("A1", Decision::Fraud, ts(3, 0)).unwrap();
            s.blocklist_add(block(SubjectKind::User, "P1", vec![KaId::LOCATION])).unwrap();
        }
        let s = Store::open(&path).unwrap();
        assert_eq!(s.transaction("T1").unwrap(), txns[0]);
        assert_eq!(s.transaction("T3").unwrap(), txns[2]);
        assert!(s.transaction("T2").unwrap().confirmed_fraud);
        assert_eq!(s.alert("A1").unwrap().status, AlertStatus::Decided);
        assert!(s.blocklist_check("P1", None).is_some());
    }

    #[test]
    fn double_ingest_leaves_equal_state() {
        let once = seeded();
        once.ingest(three()).unwrap();
        let twice = seeded();
        twice.ingest(three()).unwrap();
        twice.ingest(three()).unwrap();
        assert!(once.same_state(&twice));
    }
}
