use std::collections::BTreeMap;

use katriage::charts::subtitle_stats;
use katriage::risk::{attribute, ka_score};
use katriage::rules::TriggeredRule;
use katriage::areas::catalog;
use katriage::{KaId, Money, Rule};
use proptest::prelude::*;

fn feature_names() -> Vec<(String, KaId)> {
    catalog(90).into_iter().map(|d| (d.name, d.ka)).collect()
}

fn trig(id: usize, severity: f64, vars: &[String]) -> TriggeredRule {
    let expr = vars
        .iter()
        .map(|v| format!("{v} >= 0"))
        .collect::<Vec<_>>()
        .join(" && ");
    let rule = Rule::new(format!("R{id:03}"), "generated", expr, severity).unwrap();
    let kas = rule.areas();
    TriggeredRule { rule, kas }
}

prop_compose! {
    fn arb_rules(max: usize)(specs in proptest::collection::vec(
        (1u32..=100, proptest::collection::btree_set(0usize..24, 1..4)),
        0..max,
    )) -> Vec<TriggeredRule> {
        let names = feature_names();
        specs
            .into_iter()
            .enumerate()
            .map(|(i, (sev, vars))| {
                let vars: Vec<String> = vars.into_iter().map(|v| names[v].0.clone()).collect();
                trig(i, sev as f64 / 100.0, &vars)
            })
            .collect()
    }
}

fn oracle_score(rules: &[TriggeredRule], ka: &KaId) -> f64 {
    let mut sev: Vec<f64> = rules
        .iter()
        .filter(|t| t.kas.contains(ka))
        .map(|t| t.rule.severity)
        .collect();
    sev.sort_by(f64::total_cmp);
    let mut acc = 0.0;
    for s in sev {
        acc = acc + s - acc * s;
    }
    acc
}

proptest! {
    #[test]
    fn score_is_bounded_and_matches_noisy_or(rules in arb_rules(12)) {
        for ka in KaId::BUILTIN {
            let s = ka_score(&rules, &ka);
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!((s - oracle_score(&rules, &ka)).abs() < 1e-9);
            if !rules.iter().any(|t| t.kas.contains(&ka)) {
                prop_assert_eq!(s, 0.0);
            }
        }
    }

    #[test]
    fn adding_a_rule_never_lowers_a_score(rules in arb_rules(10), extra in arb_rules(2)) {
        let mut more = rules.clone();
        more.extend(extra.into_iter().enumerate().map(|(i, mut t)| {
            t.rule.rule_id = format!("X{i}");
            t
        }));
        for ka in KaId::BUILTIN {
            prop_assert!(ka_score(&more, &ka) + 1e-12 >= ka_score(&rules, &ka));
        }
    }

    #[test]
    fn rule_order_does_not_matter(rules in arb_rules(12), seed in any::<u64>()) {
        let mut shuffled = rules.clone();
        let n = shuffled.len();
        let mut state = seed;
        for i in (1..n).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (state >> 33) as usize % (i + 1));
        }
        for ka in KaId::BUILTIN {
            prop_assert!((ka_score(&rules, &ka) - ka_score(&shuffled, &ka)).abs() < 1e-12);
            let a: Vec<String> = attribute(&rules, &ka, 3).into_iter().map(|a| a.feature).collect();
            let b: Vec<String> = attribute(&shuffled, &ka, 3).into_iter().map(|a| a.feature).collect();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn attribution_stays_in_area_and_is_ranked(rules in arb_rules(12), k in 0usize..6) {
        let owners: BTreeMap<String, KaId> = feature_names().into_iter().collect();
        for ka in KaId::BUILTIN {
            let attr = attribute(&rules, &ka, k);
            prop_assert!(attr.len() <= k);
            for a in &attr {
                prop_assert_eq!(&owners[&a.feature], &ka);
                prop_assert!(a.contribution > 0.0);
            }
            for w in attr.windows(2) {
                prop_assert!(
                    w[0].contribution > w[1].contribution
                        || (w[0].contribution == w[1].contribution && w[0].feature < w[1].feature)
                );
            }
        }
    }

    #[test]
    fn money_text_round_trips(cents in -10_000_000_000i64..10_000_000_000) {
        let m = Money::from_cents(cents);
        let text = m.to_string();
        prop_assert_eq!(text.parse::<Money>().unwrap(), m);
        let frac = text.rsplit('.').next().unwrap();
        prop_assert_eq!(frac.len(), 2);
        let json = serde_json::to_string(&m).unwrap();
        prop_assert_eq!(serde_json::from_str::<Money>(&json).unwrap(), m);
    }

    #[test]
    fn subtitle_stats_match_oracle(cents in proptest::collection::vec(1i64..100_000_000, 0..60)) {
        let values: Vec<Money> = cents.iter().copied().map(Money::from_cents).collect();
        let stats = subtitle_stats(&values);
        prop_assert_eq!(stats.count, cents.len());
        if cents.is_empty() {
            prop_assert!(stats.mean.is_none() && stats.max.is_none() && stats.min.is_none());
        } else {
            let n = cents.len() as i128;
            let total: i128 = cents.iter().map(|&c| c as i128).sum();
            // candidates floor and floor + 1; pick the nearer, even on ties
            let lo = total / n;
            let hi = lo + 1;
            let d_lo = total - lo * n;
            let d_hi = hi * n - total;
            let mean = if d_lo < d_hi || (d_lo == d_hi && lo % 2 == 0) { lo } else { hi };
            prop_assert_eq!(stats.mean.unwrap().cents() as i128, mean);
            prop_assert_eq!(stats.max.unwrap().cents(), *cents.iter().max().unwrap());
            prop_assert_eq!(stats.min.unwrap().cents(), *cents.iter().min().unwrap());
        }
    }
}

#[test]
fn half_even_ties() {
    let m = |c: &[i64]| subtitle_stats(&c.iter().copied().map(Money::from_cents).collect::<Vec<_>>()).mean.unwrap();
    assert_eq!(m(&[1, 2]), Money::from_cents(2));
    assert_eq!(m(&[2, 3]), Money::from_cents(2));
    assert_eq!(m(&[1000, 2000, 3000]), "20.00".parse().unwrap());
}
