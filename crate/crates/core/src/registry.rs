//! Knowledge Area identifiers and the registry of areas shown for an alert.

use std::borrow::Cow;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Maximum number of areas the console lays out around the central one.
pub const MAX_AREAS: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct KaId(Cow<'static, str>);

impl KaId {
    pub const ALERTED_PERSON: KaId = KaId(Cow::Borrowed("alerted_person"));
    pub const LOCATION: KaId = KaId(Cow::Borrowed("location"));
    pub const FLOW_BALANCE: KaId = KaId(Cow::Borrowed("flow_balance"));
    pub const CARD: KaId = KaId(Cow::Borrowed("card"));
    pub const COUNTERPART: KaId = KaId(Cow::Borrowed("counterpart"));
    pub const ACTIVITY: KaId = KaId(Cow::Borrowed("activity"));

    pub const BUILTIN: [KaId; 6] = [
        KaId::ALERTED_PERSON,
        KaId::LOCATION,
        KaId::FLOW_BALANCE,
        KaId::CARD,
        KaId::COUNTERPART,
        KaId::ACTIVITY,
    ];

    /// A custom area id: lowercase ascii letters, digits and underscores.
    pub fn custom(id: impl Into<String>) -> Result<KaId, RegistryError> {
        let id = id.into();
        let valid = !id.is_empty()
            && id.starts_with(|c: char| c.is_ascii_lowercase())
            && id.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_');
        if !valid {
            return Err(RegistryError::InvalidId(id));
        }
        Ok(KaId(Cow::Owned(id)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_builtin(&self) -> bool {
        KaId::BUILTIN.contains(self)
    }
}

impl fmt::Display for KaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeArea {
    pub id: KaId,
    pub label: String,
    pub icon_key: String,
}

impl KnowledgeArea {
    pub fn new(id: KaId, label: impl Into<String>, icon_key: impl Into<String>) -> Self {
        KnowledgeArea {
            id,
            label: label.into(),
            icon_key: icon_key.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("registry is full ({MAX_AREAS} areas)")]
    Full,
    #[error("area {0:?} is already registered")]
    Duplicate(String),
    #[error("invalid area id {0:?}")]
    InvalidId(String),
}

/// Ordered set of areas; the first entry is always the central alerted person.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Registry {
    areas: Vec<KnowledgeArea>,
}

impl Registry {
    pub fn register(&mut self, area: KnowledgeArea) -> Result<(), RegistryError> {
        if self.areas.len() >= MAX_AREAS {
            return Err(RegistryError::Full);
        }
        if self.contains(&area.id) {
            return Err(RegistryError::Duplicate(area.id.to_string()));
        }
        self.areas.push(area);
        Ok(())
    }

    pub fn areas(&self) -> &[KnowledgeArea] {
        &self.areas
    }

    pub fn ids(&self) -> impl Iterator<Item = &KaId> {
        self.areas.iter().map(|a| &a.id)
    }

    pub fn get(&self, id: &KaId) -> Option<&KnowledgeArea> {
        self.areas.iter().find(|a| &a.id == id)
    }

    pub fn find(&self, id: &str) -> Option<&KnowledgeArea> {
        self.areas.iter().find(|a| a.id.as_str() == id)
    }

    pub fn contains(&self, id: &KaId) -> bool {
        self.get(id).is_some()
    }

    pub fn central(&self) -> &KnowledgeArea {
        &self.areas[0]
    }

    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }
}

impl Default for Registry {
    fn default() -> Self {
        default_registry()
    }
}

/// The six fraud-review areas, in console order.
pub fn default_registry() -> Registry {
    Registry {
        areas: vec![
            KnowledgeArea::new(KaId::ALERTED_PERSON, "Alerted person", "person"),
            KnowledgeArea::new(KaId::LOCATION, "Location", "globe"),
            KnowledgeArea::new(KaId::FLOW_BALANCE, "Flow balance", "scale"),
            KnowledgeArea::new(KaId::CARD, "Card", "card"),
            KnowledgeArea::new(KaId::COUNTERPART, "Counterpart", "handshake"),
            KnowledgeArea::new(KaId::ACTIVITY, "Alerted person activity", "activity"),
        ],
    }
}
