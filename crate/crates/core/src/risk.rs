//! Per-area risk scores, flags and top-k attribution.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::areas::{self, KnowledgeAreaView};
use crate::model::AlertContext;
use crate::registry::KaId;
use crate::rules::{evaluate_rules, RuleSet, TriggeredRule};
use crate::store::BlockEntry;

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_TOP_K: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub feature: String,
    pub contribution: f64,
}

/// Rule that fired, reduced to what the report needs to persist.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggeredRuleRef {
    pub rule_id: String,
    pub description: String,
    pub severity: f64,
    pub variables: Vec<String>,
    pub kas: Vec<KaId>,
}

impl From<&TriggeredRule> for TriggeredRuleRef {
    fn from(t: &TriggeredRule) -> Self {
        TriggeredRuleRef {
            rule_id: t.rule.rule_id.clone(),
            description: t.rule.description.clone(),
            severity: t.rule.severity,
            variables: t.rule.variables.clone(),
            kas: t.kas.iter().cloned().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub ka: KaId,
    pub score: f64,
    pub flagged: bool,
    pub attributed_variables: Vec<Attribution>,
    pub triggered: Vec<TriggeredRuleRef>,
    pub blocklist_justified: bool,
}

impl RiskReport {
    pub fn clear(ka: KaId) -> Self {
        RiskReport {
            ka,
            score: 0.0,
            flagged: false,
            attributed_variables: Vec::new(),
            triggered: Vec::new(),
            blocklist_justified: false,
        }
    }

    pub fn attributed(&self, feature: &str) -> bool {
        self.attributed_variables.iter().any(|a| a.feature == feature)
    }
}

/// All per-area reports of one alert, persisted at alert creation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assessment {
    pub reports: BTreeMap<KaId, RiskReport>,
}

impl Assessment {
    pub fn any_flagged(&self) -> bool {
        self.reports.values().any(|r| r.flagged)
    }

    /// Event-level score: the maximum over areas.
    pub fn event_score(&self) -> f64 {
        self.reports.values().map(|r| r.score).fold(0.0, f64::max)
    }

    pub fn flagged_areas(&self) -> Vec<KaId> {
        self.reports
            .values()
            .filter(|r| r.flagged)
            .map(|r| r.ka.clone())
            .collect()
    }
}

/// Noisy-OR of the severities of triggered rules touching `ka`.
pub fn ka_score(triggered: &[TriggeredRule], ka: &KaId) -> f64 {
    let keep: f64 = triggered
        .iter()
        .filter(|t| t.kas.contains(ka))
        .map(|t| 1.0 - t.rule.severity)
        .product();
    (1.0 - keep).clamp(0.0, 1.0)
}

/// Top-k features of `ka` by summed severity of the triggered rules that use
/// them; ties go to the lexicographically smaller name.
pub fn attribute(triggered: &[TriggeredRule], ka: &KaId, k: usize) -> Vec<Attribution> {
    let mut sums: BTreeMap<&str, f64> = BTreeMap::new();
    for t in triggered.iter().filter(|t| t.kas.contains(ka)) {
        for v in &t.rule.variables {
            if areas::owner(v).as_ref() == Some(ka) {
                *sums.entry(v).or_default() += t.rule.severity;
            }
        }
    }
    let mut ranked: Vec<(&str, f64)> = sums.into_iter().collect();
    // stable sort over name-ordered input keeps the lexicographic tie-break
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
    ranked
        .into_iter()
        .take(k)
        .map(|(feature, contribution)| Attribution {
            feature: feature.to_string(),
            contribution,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskConfig {
    pub threshold: f64,
    pub top_k: usize,
}

impl Default for RiskConfig {
    fn default() -> Self {
        RiskConfig {
            threshold: DEFAULT_THRESHOLD,
            top_k: DEFAULT_TOP_K,
        }
    }
}

/// Source of per-area risk. The rule engine is the shipped implementation;
/// a model-based scorer with its own attribution can stand in its place.
pub trait RiskProvider: Send + Sync {
    fn assess(
        &self,
        ctx: &AlertContext,
        views: &BTreeMap<KaId, KnowledgeAreaView>,
        block: Option<&BlockEntry>,
    ) -> Assessment;
}

pub struct RuleRiskProvider {
    pub rules: RuleSet,
    pub config: RiskConfig,
}

impl RuleRiskProvider {
    pub fn new(rules: RuleSet, config: RiskConfig) -> Self {
        RuleRiskProvider { rules, config }
    }
}

impl RiskProvider for RuleRiskProvider {
    fn assess(
        &self,
        ctx: &AlertContext,
        views: &BTreeMap<KaId, KnowledgeAreaView>,
        block: Option<&BlockEntry>,
    ) -> Assessment {
        assess(ctx, views, &self.rules, self.config, block)
    }
}

pub fn assess(
    _ctx: &AlertContext,
    views: &BTreeMap<KaId, KnowledgeAreaView>,
    rules: &RuleSet,
    config: RiskConfig,
    block: Option<&BlockEntry>,
) -> Assessment {
    let mut features = areas::FeatureVector::new();
    for view in views.values() {
        features.merge(view.features.clone());
    }
    let triggered = evaluate_rules(&features, rules);
    let reports = views
        .keys()
        .map(|ka| {
            let score = ka_score(&triggered, ka);
            let elevated = score >= config.threshold;
            let justified = block.is_some_and(|b| b.justified_kas.contains(ka));
            let report = RiskReport {
                ka: ka.clone(),
                score,
                flagged: elevated || justified,
                attributed_variables: if elevated {
                    attribute(&triggered, ka, config.top_k)
                } else {
                    Vec::new()
                },
                triggered: triggered
                    .iter()
                    .filter(|t| t.kas.contains(ka))
                    .map(TriggeredRuleRef::from)
                    .collect(),
                blocklist_justified: justified,
            };
            (ka.clone(), report)
        })
        .collect();
    Assessment { reports }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::Rule;
    use std::collections::BTreeSet;

    fn trig(id: &str, severity: f64, vars: &[&str]) -> TriggeredRule {
        let expr = vars
            .iter()
            .map(|v| format!("{v} >= 0"))
            .collect::<Vec<_>>()
            .join(" && ");
        let rule = Rule::new(id, id, expr, severity).unwrap();
        let kas = rule.areas();
        TriggeredRule { rule, kas }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn score_examples() {
        let ka = KaId::ACTIVITY;
        assert_eq!(ka_score(&[], &ka), 0.0);
        let two = [trig("a", 0.5, &["amount_zscore"]), trig("b", 0.5, &["txn_count_90d"])];
        assert!(close(ka_score(&two, &ka), 0.75));
        let three = [
            trig("a", 0.2, &["amount_zscore"]),
            trig("b", 0.3, &["txn_count_90d"]),
            trig("c", 0.4, &["max_amount_90d"]),
        ];
        assert!(close(ka_score(&three, &ka), 0.664));
    }

    #[test]
    fn score_ignores_rules_of_other_areas() {
        let t = [trig("a", 0.9, &["is_new_country"])];
        assert_eq!(ka_score(&t, &KaId::ACTIVITY), 0.0);
        assert!(close(ka_score(&t, &KaId::LOCATION), 0.9));
    }

    #[test]
    fn attribution_examples() {
        let ka = KaId::ACTIVITY;
        let t = [trig("r1", 0.6, &["amount_zscore"]), trig("r2", 0.3, &["txn_count_90d"])];
        let a = attribute(&t, &ka, 1);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].feature, "amount_zscore");
        assert!(close(a[0].contribution, 0.6));

        let tie = [trig("r1", 0.4, &["txn_count_90d"]), trig("r2", 0.4, &["amount_zscore"])];
        assert_eq!(attribute(&tie, &ka, 1)[0].feature, "amount_zscore");

        assert_eq!(attribute(&t, &ka, 3).len(), 2);
    }

    #[test]
    fn attribution_sums_shared_features() {
        let t = [
            trig("r1", 0.3, &["amount_zscore"]),
            trig("r2", 0.5, &["amount_zscore", "txn_count_90d"]),
        ];
        let a = attribute(&t, &KaId::ACTIVITY, 3);
        assert_eq!(a[0].feature, "amount_zscore");
        assert!(close(a[0].contribution, 0.8));
        assert_eq!(a[1].feature, "txn_count_90d");
    }

    #[test]
    fn cross_area_rule_attributes_own_features_only() {
        let t = [trig("r", 0.8, &["is_new_country", "amount_zscore"])];
        let loc = attribute(&t, &KaId::LOCATION, 3);
        assert_eq!(loc.len(), 1);
        assert_eq!(loc[0].feature, "is_new_country");
        let kas: BTreeSet<_> = t[0].kas.iter().cloned().collect();
        assert!(kas.contains(&KaId::ACTIVITY));
    }
}
