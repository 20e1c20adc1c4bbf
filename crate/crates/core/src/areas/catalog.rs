//! The fixed feature catalog: every feature name, its owning area and unit.

use serde::Serialize;

use crate::registry::KaId;

pub(crate) struct FeatureDef {
    pub name: &'static str,
    pub ka: KaId,
    pub unit: Option<&'static str>,
    pub windowed: bool,
    /// Fact whose rendered value a risk highlight on this feature covers.
    pub evidence: &'static str,
}

const fn def(
    name: &'static str,
    ka: KaId,
    unit: Option<&'static str>,
    windowed: bool,
    evidence: &'static str,
) -> FeatureDef {
    FeatureDef {
        name,
        ka,
        unit,
        windowed,
        evidence,
    }
}

pub(crate) const FEATURES: &[FeatureDef] = &[
    def("age", KaId::ALERTED_PERSON, Some("years"), false, "alerted_person.age"),
    def("account_age_days", KaId::ALERTED_PERSON, Some("days"), false, "alerted_person.account_age_days"),
    def("past_alert_count", KaId::ALERTED_PERSON, None, false, "alerted_person.past_alert_count"),
    def(
        "past_confirmed_fraud_count",
        KaId::ALERTED_PERSON,
        None,
        false,
        "alerted_person.past_confirmed_fraud_count",
    ),
    def("is_new_country", KaId::LOCATION, None, false, "location.current_country"),
    def("is_new_city", KaId::LOCATION, None, false, "location.current_city"),
    def("distinct_countries_90d", KaId::LOCATION, None, true, "location.distinct_countries_90d"),
    def("current_country_txn_share", KaId::LOCATION, None, true, "location.current_country_share_90d"),
    def("total_in_90d", KaId::FLOW_BALANCE, Some("currency"), true, "flow_balance.total_in_90d"),
    def("total_out_90d", KaId::FLOW_BALANCE, Some("currency"), true, "flow_balance.total_out_90d"),
    def("net_flow_90d", KaId::FLOW_BALANCE, Some("currency"), true, "flow_balance.net_flow_90d"),
    def("in_out_ratio_90d", KaId::FLOW_BALANCE, None, true, "flow_balance.in_out_ratio_90d"),
    def(
        "distinct_counterparties_90d",
        KaId::FLOW_BALANCE,
        None,
        true,
        "flow_balance.distinct_counterparties_90d",
    ),
    def("is_new_card", KaId::CARD, None, false, "card.card_id"),
    def("entry_mode_rarity", KaId::CARD, None, false, "card.entry_mode_share"),
    def("card_txn_count", KaId::CARD, None, false, "card.card_txn_count"),
    def("is_new_counterpart", KaId::COUNTERPART, None, false, "counterpart.name"),
    def("counterpart_txn_count", KaId::COUNTERPART, None, false, "counterpart.txn_count"),
    def(
        "counterpart_country_matches_person",
        KaId::COUNTERPART,
        None,
        false,
        "counterpart.country",
    ),
    def("txn_count_90d", KaId::ACTIVITY, None, true, "activity.txn_count_90d"),
    def("mean_amount_90d", KaId::ACTIVITY, Some("currency"), true, "activity.mean_amount_90d"),
    def("max_amount_90d", KaId::ACTIVITY, Some("currency"), true, "activity.max_amount_90d"),
    def("amount_zscore", KaId::ACTIVITY, None, true, "activity.current_amount"),
    def("hours_since_last_txn", KaId::ACTIVITY, Some("hours"), true, "activity.hours_since_last_txn"),
];

pub(crate) fn lookup(name: &str) -> Option<&'static FeatureDef> {
    FEATURES.iter().find(|f| f.name == name)
}

/// Owning area of a catalog feature.
pub fn owner(name: &str) -> Option<KaId> {
    lookup(name).map(|f| f.ka.clone())
}

/// Fact id a risk highlight on `feature` should cover.
pub fn evidence_fact(feature: &str) -> Option<&'static str> {
    lookup(feature).map(|f| f.evidence)
}

/// Machine-readable catalog entry consumed by the rule loader.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeatureDescriptor {
    pub name: String,
    pub ka: KaId,
    pub unit: Option<String>,
    pub window_days: Option<u32>,
}

pub fn catalog(window_days: u32) -> Vec<FeatureDescriptor> {
    FEATURES
        .iter()
        .map(|f| FeatureDescriptor {
            name: f.name.to_string(),
            ka: f.ka.clone(),
            unit: f.unit.map(str::to_string),
            window_days: f.windowed.then_some(window_days),
        })
        .collect()
}
