use std::collections::BTreeMap;
use std::sync::Arc;

use katriage::datagen::{generate, Dataset, GenConfig};
use katriage::parallel::Execution;
use katriage::risk::DEFAULT_THRESHOLD;
use katriage::summary::{detect_hallucinations, generate_template, summarize, SummaryMode};
use katriage::{Engine, EngineConfig, RuleSet, Store};

fn dataset(seed: u64) -> Dataset {
    generate(&GenConfig {
        seed,
        n_persons: 12,
        days: 90,
        fraud_rate: 0.05,
        ..GenConfig::default()
    })
    .unwrap()
}

fn engine_with(data: &Dataset, execution: Execution) -> Engine {
    let store = Arc::new(Store::in_memory());
    store.put_persons(data.persons.clone()).unwrap();
    let engine = Engine::new(
        store,
        RuleSet::default_rules(),
        EngineConfig {
            execution,
            ..EngineConfig::default()
        },
    );
    engine.ingest_events(data.plain_transactions()).unwrap();
    engine
}

#[test]
fn flags_follow_scores_and_rules() {
    let data = dataset(3);
    let engine = engine_with(&data, Execution::default());
    let alerts = engine.store().alerts();
    assert!(!alerts.is_empty());
    for alert in alerts {
        let a = engine.store().assessment(&alert.alert_id).unwrap();
        assert!(a.any_flagged());
        for r in a.reports.values() {
            assert_eq!(r.flagged, r.score >= DEFAULT_THRESHOLD || r.blocklist_justified);
            if r.flagged {
                assert!(!r.triggered.is_empty() || r.blocklist_justified);
            }
            if r.score < DEFAULT_THRESHOLD {
                assert!(r.attributed_variables.is_empty());
            }
        }
    }
}

#[test]
fn sequential_and_parallel_agree() {
    let data = dataset(5);
    let a = engine_with(&data, Execution::Sequential);
    let b = engine_with(&data, Execution::Parallel);
    let collect = |e: &Engine| -> BTreeMap<String, String> {
        e.store()
            .alerts()
            .into_iter()
            .map(|al| {
                let s = serde_json::to_string(&e.store().assessment(&al.alert_id).unwrap()).unwrap();
                (al.alert_id, s)
            })
            .collect()
    };
    assert_eq!(collect(&a), collect(&b));
}

#[test]
fn reingest_is_a_no_op() {
    let data = dataset(9);
    let engine = engine_with(&data, Execution::default());
    let before = engine.store().alerts().len();
    let again = engine.ingest_events(data.plain_transactions()).unwrap();
    assert_eq!(again.report.ingested, 0);
    assert_eq!(again.report.skipped, data.transactions.len());
    assert!(again.alerts.is_empty());
    assert_eq!(engine.store().alerts().len(), before);
}

#[test]
fn template_summaries_are_grounded() {
    let data = dataset(11);
    let engine = engine_with(&data, Execution::default());
    for alert in engine.store().alerts().iter().take(40) {
        let v = engine.alert_views(&alert.alert_id).unwrap();
        for (ka, view) in &v.views {
            let report = v.report(ka);
            let doc = generate_template(view, &report);
            let check = detect_hallucinations(&doc.text, &view.facts);
            assert!(check.ok, "{ka:?}: {:?} in {:?}", check.violations, doc.text);
            if !report.flagged {
                assert!(doc.highlights.is_empty());
            }
            for h in &doc.highlights {
                assert!(doc.text.is_char_boundary(h.start) && doc.text.is_char_boundary(h.end));
                assert!(h.start < h.end && h.end <= doc.text.len());
            }
            let same = summarize(view, &report, SummaryMode::TemplateOnly, None);
            assert_eq!(same, doc);
        }
    }
}

#[test]
fn chart_stats_cover_source_rows() {
    let data = dataset(13);
    let engine = engine_with(&data, Execution::default());
    for alert in engine.store().alerts().iter().take(20) {
        let v = engine.alert_views(&alert.alert_id).unwrap();
        for ka in v.views.keys() {
            let panel = engine.charts(&alert.alert_id, ka.as_str()).unwrap();
            assert!(panel.charts.len() <= 3);
            for chart in &panel.charts {
                let amounts: Vec<_> = chart
                    .source_rows
                    .iter()
                    .map(|id| v.context.transaction(id).unwrap().amount)
                    .collect();
                assert_eq!(chart.stats, katriage::charts::subtitle_stats(&amounts));
            }
        }
    }
}
