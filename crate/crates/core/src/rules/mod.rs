//! User-defined risk rules and their evaluation.

pub mod expr;

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::areas::{self, FeatureVector};
use crate::registry::KaId;

pub use expr::{parse, CmpOp, Expr, ParseError};

/// The rule file shipped with the crate, tuned to the synthetic scenarios.
pub const DEFAULT_RULES: &str = include_str!("default_rules.toml");

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rule {
    pub rule_id: String,
    pub description: String,
    pub expression: String,
    pub severity: f64,
    /// Feature names appearing in `expression`, sorted.
    pub variables: Vec<String>,
    #[serde(skip)]
    ast: Expr,
}

impl Rule {
    /// Parses `expression` and checks every variable against the feature catalog.
    pub fn new(
        rule_id: impl Into<String>,
        description: impl Into<String>,
        expression: impl Into<String>,
        severity: f64,
    ) -> Result<Self, RuleError> {
        let rule_id = rule_id.into();
        let expression = expression.into();
        if !(severity > 0.0 && severity <= 1.0) {
            return Err(RuleError::Severity { rule_id, severity });
        }
        let ast = expr::parse(&expression).map_err(|source| RuleError::Syntax {
            rule_id: rule_id.clone(),
            source,
        })?;
        let variables: Vec<String> = ast.variables().into_iter().collect();
        for v in &variables {
            if areas::owner(v).is_none() {
                return Err(RuleError::UnknownFeature {
                    rule_id,
                    feature: v.clone(),
                });
            }
        }
        Ok(Rule {
            rule_id,
            description: description.into(),
            expression,
            severity,
            variables,
            ast,
        })
    }

    pub fn expr(&self) -> &Expr {
        &self.ast
    }

    /// Areas owning this rule's variables.
    pub fn areas(&self) -> BTreeSet<KaId> {
        self.variables.iter().filter_map(|v| areas::owner(v)).collect()
    }

    pub fn matches(&self, features: &FeatureVector) -> bool {
        self.ast.eval(features)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RuleError {
    #[error("rule {rule_id}: {source}")]
    Syntax { rule_id: String, source: ParseError },
    #[error("rule {rule_id}: unknown feature {feature:?}")]
    UnknownFeature { rule_id: String, feature: String },
    #[error("rule {rule_id}: severity {severity} outside (0, 1]")]
    Severity { rule_id: String, severity: f64 },
    #[error("duplicate rule id {0:?}")]
    Duplicate(String),
    #[error("malformed rule file: {0}")]
    Format(#[from] toml::de::Error),
    #[error("cannot read rule file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TriggeredRule {
    pub rule: Rule,
    pub kas: BTreeSet<KaId>,
}

#[derive(Deserialize)]
struct RuleFile {
    #[serde(default, rename = "rule")]
    rules: Vec<RuleRecord>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleRecord {
    rule_id: String,
    description: String,
    expression: String,
    severity: f64,
}

/// An immutable, validated list of rules in file order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RuleSet {
    rules: Vec<Rule>,
}

impl RuleSet {
    pub fn new(rules: Vec<Rule>) -> Result<Self, RuleError> {
        let mut seen = HashSet::new();
        for r in &rules {
            if !seen.insert(r.rule_id.clone()) {
                return Err(RuleError::Duplicate(r.rule_id.clone()));
            }
        }
        Ok(RuleSet { rules })
    }

    /// Parses a TOML document of `[[rule]]` tables.
    pub fn from_toml(text: &str) -> Result<Self, RuleError> {
        let file: RuleFile = toml::from_str(text)?;
        let rules = file
            .rules
            .into_iter()
            .map(|r| Rule::new(r.rule_id, r.description, r.expression, r.severity))
            .collect::<Result<Vec<_>, _>>()?;
        RuleSet::new(rules)
    }

    pub fn load(path: &Path) -> Result<Self, RuleError> {
        RuleSet::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn default_rules() -> Self {
        RuleSet::from_toml(DEFAULT_RULES).expect("shipped rule file is valid")
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

/// Rules whose expression holds on `features`, in rule order.
pub fn evaluate_rules(features: &FeatureVector, rules: &RuleSet) -> Vec<TriggeredRule> {
    rules
        .rules
        .iter()
        .filter(|r| r.matches(features))
        .map(|r| TriggeredRule {
            rule: r.clone(),
            kas: r.areas(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(pairs: &[(&str, f64)]) -> FeatureVector {
        let mut v = FeatureVector::new();
        for (k, x) in pairs {
            v.insert(*k, areas::owner(k).unwrap(), *x);
        }
        v
    }

    #[test]
    fn default_rules_load_and_reference_catalog() {
        let rs = RuleSet::default_rules();
        assert!((8..=12).contains(&rs.len()), "{} rules", rs.len());
        for r in rs.rules() {
            assert!(!r.areas().is_empty());
        }
    }

    #[test]
    fn triggered_rule_areas_union() {
        let rs = RuleSet::new(vec![Rule::new(
            "r",
            "new country with unusual amount",
            "is_new_country == 1 && amount_zscore > 2",
            0.5,
        )
        .unwrap()])
        .unwrap();
        let t = evaluate_rules(&fv(&[("is_new_country", 1.0), ("amount_zscore", 2.5)]), &rs);
        assert_eq!(t.len(), 1);
        let kas: Vec<_> = t[0].kas.iter().cloned().collect();
        assert_eq!(kas, vec![KaId::ACTIVITY, KaId::LOCATION]);
    }

    #[test]
    fn order_follows_file() {
        let rs = RuleSet::from_toml(
            r#"
[[rule]]
rule_id = "b"
description = "second"
expression = "age > 1"
severity = 0.2

[[rule]]
rule_id = "a"
description = "first"
expression = "age > 0"
severity = 0.3
"#,
        )
        .unwrap();
        let t = evaluate_rules(&fv(&[("age", 40.0)]), &rs);
        let ids: Vec<_> = t.iter().map(|t| t.rule.rule_id.as_str()).collect();
        assert_eq!(ids, ["b", "a"]);
    }

    #[test]
    fn unknown_feature_rejected_at_load() {
        let err = Rule::new("r", "d", "shoe_size > 44", 0.5).unwrap_err();
        assert!(matches!(err, RuleError::UnknownFeature { ref feature, .. } if feature == "shoe_size"));
    }

    #[test]
    fn severity_bounds() {
        assert!(Rule::new("r", "d", "age > 1", 0.0).is_err());
        assert!(Rule::new("r", "d", "age > 1", 1.2).is_err());
        assert!(Rule::new("r", "d", "age > 1", f64::NAN).is_err());
        assert!(Rule::new("r", "d", "age > 1", 1.0).is_ok());
    }

    #[test]
    fn duplicate_ids_and_unknown_fields() {
        let r = Rule::new("r", "d", "age > 1", 0.5).unwrap();
        assert!(matches!(
            RuleSet::new(vec![r.clone(), r]),
            Err(RuleError::Duplicate(_))
        ));
        let bad = "[[rule]]\nrule_id='x'\ndescription='d'\nexpression='age > 1'\nseverity=0.5\nvariables=['age']\n";
        assert!(matches!(RuleSet::from_toml(bad), Err(RuleError::Format(_))));
    }
}
