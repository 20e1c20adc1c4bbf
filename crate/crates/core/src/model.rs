//! Domain records: transactions, persons, alerts and the per-alert context.

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::money::Money;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Incoming,
    Outgoing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    CardPresent,
    CardNotPresent,
    Transfer,
    Cash,
}

impl Channel {
    pub fn uses_card(self) -> bool {
        matches!(self, Channel::CardPresent | Channel::CardNotPresent)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Channel::CardPresent => "card_present",
            Channel::CardNotPresent => "card_not_present",
            Channel::Transfer => "transfer",
            Channel::Cash => "cash",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryMode {
    Chip,
    Magstripe,
    Manual,
    Online,
}

impl EntryMode {
    pub const ALL: [EntryMode; 4] = [
        EntryMode::Chip,
        EntryMode::Magstripe,
        EntryMode::Manual,
        EntryMode::Online,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntryMode::Chip => "chip",
            EntryMode::Magstripe => "magstripe",
            EntryMode::Manual => "manual",
            EntryMode::Online => "online",
        }
    }
}

/// One financial event. Field names are the JSONL ingestion contract.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub transaction_id: String,
    pub timestamp: DateTime<Utc>,
    pub amount: Money,
    pub currency: String,
    pub direction: Direction,
    pub channel: Channel,
    pub person_id: String,
    pub counterpart_id: String,
    pub counterpart_name: String,
    pub counterpart_country: String,
    #[serde(default)]
    pub card_id: Option<String>,
    #[serde(default)]
    pub card_entry_mode: Option<EntryMode>,
    pub country: String,
    pub city: String,
    #[serde(default)]
    pub device_id: Option<String>,
    #[serde(default)]
    pub confirmed_fraud: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Person {
    pub person_id: String,
    pub name: String,
    pub age: u32,
    pub country: String,
    pub account_opened: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlertStatus {
    Open,
    Decided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Fraud,
    Legitimate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Alert {
    pub alert_id: String,
    pub transaction_id: String,
    pub created_at: DateTime<Utc>,
    pub status: AlertStatus,
    #[serde(default)]
    pub decision: Option<Decision>,
    #[serde(default)]
    pub decided_at: Option<DateTime<Utc>>,
}

impl Alert {
    pub fn open(alert_id: impl Into<String>, transaction_id: impl Into<String>, created_at: DateTime<Utc>) -> Self {
        Alert {
            alert_id: alert_id.into(),
            transaction_id: transaction_id.into(),
            created_at,
            status: AlertStatus::Open,
            decision: None,
            decided_at: None,
        }
    }
}

/// The alerted transaction together with everything known about its person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlertContext {
    pub alert: Alert,
    pub current: Transaction,
    pub person: Person,
    /// Earlier transactions of the person, ascending by timestamp.
    pub history: Vec<Transaction>,
    pub past_alerts: Vec<Alert>,
}

impl AlertContext {
    /// Finds a transaction of this context (history or current) by id.
    pub fn transaction(&self, transaction_id: &str) -> Option<&Transaction> {
        if self.current.transaction_id == transaction_id {
            return Some(&self.current);
        }
        self.history.iter().find(|t| t.transaction_id == transaction_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: &'static str,
    pub message: String,
}

impl Violation {
    pub fn new(field: &'static str, message: impl Into<String>) -> Self {
        Violation {
            field,
            message: message.into(),
        }
    }
}

fn is_alpha2(code: &str) -> bool {
    code.len() == 2 && code.bytes().all(|b| b.is_ascii_uppercase())
}

/// Checks every record-level invariant and returns all violations found.
pub fn validate_transaction(t: &Transaction) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if t.transaction_id.trim().is_empty() {
        out.push(Violation::new("transaction_id", "transaction_id must not be empty"));
    }
    if !t.amount.is_positive() {
        out.push(Violation::new("amount", "amount must be positive"));
    }
    if t.currency.len() != 3 || !t.currency.bytes().all(|b| b.is_ascii_uppercase()) {
        out.push(Violation::new("currency", "currency must be an ISO-4217 code"));
    }
    if t.person_id.trim().is_empty() {
        out.push(Violation::new("person_id", "person_id must not be empty"));
    }
    if t.counterpart_id.trim().is_empty() {
        out.push(Violation::new("counterpart_id", "counterpart_id must not be empty"));
    }
    if !is_alpha2(&t.counterpart_country) {
        out.push(Violation::new(
            "counterpart_country",
            "counterpart_country must be an ISO-3166 alpha-2 code",
        ));
    }
    if !is_alpha2(&t.country) {
        out.push(Violation::new("country", "country must be an ISO-3166 alpha-2 code"));
    }
    match (t.channel.uses_card(), t.card_id.is_some()) {
        (true, false) => out.push(Violation::new(
            "card_id",
            format!("card_id required for {}", t.channel.as_str()),
        )),
        (false, true) => out.push(Violation::new(
            "card_id",
            format!("card_id forbidden for {}", t.channel.as_str()),
        )),
        _ => {}
    }
    if t.card_entry_mode.is_some() && t.card_id.is_none() {
        out.push(Violation::new("card_entry_mode", "card_entry_mode requires a card_id"));
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

pub fn validate_person(p: &Person) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if p.person_id.trim().is_empty() {
        out.push(Violation::new("person_id", "person_id must not be empty"));
    }
    if p.age < 18 {
        out.push(Violation::new("age", "age must be at least 18"));
    }
    if !is_alpha2(&p.country) {
        out.push(Violation::new("country", "country must be an ISO-3166 alpha-2 code"));
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn well_formed_transfer_is_ok() {
        let t = transfer("T1", 0, "100.00", Direction::Outgoing);
        assert_eq!(validate_transaction(&t), Ok(()));
    }

    #[test]
    fn zero_amount_is_rejected() {
        let mut t = transfer("T1", 0, "1.00", Direction::Outgoing);
        t.amount = Money::ZERO;
        let v = validate_transaction(&t).unwrap_err();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].message, "amount must be positive");
    }

    #[test]
    fn card_on_transfer_is_rejected() {
        let mut t = transfer("T1", 0, "1.00", Direction::Outgoing);
        t.card_id = Some("K1".into());
        let v = validate_transaction(&t).unwrap_err();
        assert_eq!(v[0].message, "card_id forbidden for transfer");
    }

    #[test]
    fn reports_every_violation() {
        let mut t = transfer("T1", 0, "1.00", Direction::Outgoing);
        t.amount = Money::ZERO;
        t.country = "Portugal".into();
        t.channel = Channel::CardPresent;
        let v = validate_transaction(&t).unwrap_err();
        let fields: Vec<_> = v.iter().map(|v| v.field).collect();
        assert_eq!(fields, vec!["amount", "country", "card_id"]);
    }

    #[test]
    fn jsonl_contract_field_names() {
        let t = transfer("T1", 0, "100.00", Direction::Incoming);
        let v: serde_json::Value = serde_json::to_value(&t).unwrap();
        assert_eq!(v["amount"], "100.00");
        assert_eq!(v["direction"], "incoming");
        assert_eq!(v["timestamp"], "2024-05-01T12:00:00Z");
        let back: Transaction = serde_json::from_value(v).unwrap();
        assert_eq!(back, t);
    }
}
