use std::collections::{BTreeMap, BTreeSet, HashSet};

use chrono::Duration;

use super::{Fact, FactValue, FeatureVector, KnowledgeAreaView, ParserConfig};
use crate::model::{AlertContext, Direction, Transaction};
use crate::money::Money;
use crate::registry::KaId;

pub(crate) fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// History entries inside the lookback window, i.e. at or after
/// `current.timestamp - window_days`.
fn window<'a>(ctx: &'a AlertContext, cfg: &ParserConfig) -> Vec<&'a Transaction> {
    let start = ctx.current.timestamp - Duration::days(cfg.window_days as i64);
    ctx.history.iter().filter(|t| t.timestamp >= start).collect()
}

struct Builder<'a> {
    ka: &'a KaId,
    facts: Vec<Fact>,
    features: FeatureVector,
    rows: Vec<Transaction>,
}

impl<'a> Builder<'a> {
    fn new(ka: &'a KaId) -> Self {
        Builder {
            ka,
            facts: Vec::new(),
            features: FeatureVector::new(),
            rows: Vec::new(),
        }
    }

    fn fact(&mut self, key: &str, name: &str, value: FactValue) -> &mut Fact {
        self.facts.push(Fact::new(self.ka, key, name, value));
        self.facts.last_mut().unwrap()
    }

    fn feature(&mut self, name: &str, value: f64) {
        self.features.insert(name, self.ka.clone(), value);
    }

    fn insufficient_history(&mut self) {
        self.fact("insufficient_history", "Insufficient history", FactValue::Boolean(true));
    }

    fn window_days(&mut self, cfg: &ParserConfig) {
        self.fact("window_days", "Lookback window", FactValue::Integer(cfg.window_days as i64))
            .unit = Some("days".into());
    }

    fn finish(self) -> KnowledgeAreaView {
        KnowledgeAreaView {
            ka: self.ka.clone(),
            facts: self.facts,
            features: self.features,
            rows: self.rows,
        }
    }
}

pub(super) fn build(ka: &KaId, ctx: &AlertContext, cfg: &ParserConfig) -> KnowledgeAreaView {
    let mut b = Builder::new(ka);
    match ka.as_str() {
        "alerted_person" => alerted_person(&mut b, ctx),
        "location" => location(&mut b, ctx, cfg),
        "flow_balance" => flow_balance(&mut b, ctx, cfg),
        "card" => card(&mut b, ctx),
        "counterpart" => counterpart(&mut b, ctx),
        "activity" => activity(&mut b, ctx, cfg),
        // custom areas carry no parsing method of their own
        _ => {}
    }
    b.finish()
}

fn alerted_person(b: &mut Builder<'_>, ctx: &AlertContext) {
    let p = &ctx.person;
    let account_age = (ctx.current.timestamp.date_naive() - p.account_opened).num_days();
    let confirmed = ctx.history.iter().filter(|t| t.confirmed_fraud).count();

    b.fact("name", "Name", FactValue::Text(p.name.clone()));
    b.fact("age", "Age", FactValue::Integer(p.age as i64)).unit = Some("years".into());
    b.fact("country", "Country", FactValue::Text(p.country.clone()));
    b.fact("account_opened", "Account opened", FactValue::Date(p.account_opened));
    b.fact("account_age_days", "Account age", FactValue::Integer(account_age))
        .unit = Some("days".into());
    b.fact(
        "past_alert_count",
        "Past alerts",
        FactValue::Integer(ctx.past_alerts.len() as i64),
    );
    b.fact(
        "past_confirmed_fraud_count",
        "Past confirmed fraud",
        FactValue::Integer(confirmed as i64),
    );

    b.feature("age", p.age as f64);
    b.feature("account_age_days", account_age as f64);
    b.feature("past_alert_count", ctx.past_alerts.len() as f64);
    b.feature("past_confirmed_fraud_count", confirmed as f64);

    let alerted: HashSet<&str> = ctx.past_alerts.iter().map(|a| a.transaction_id.as_str()).collect();
    b.rows = ctx
        .history
        .iter()
        .filter(|t| t.confirmed_fraud || alerted.contains(t.transaction_id.as_str()))
        .cloned()
        .chain(std::iter::once(ctx.current.clone()))
        .collect();
}

fn location(b: &mut Builder<'_>, ctx: &AlertContext, cfg: &ParserConfig) {
    let cur = &ctx.current;
    let win = window(ctx, cfg);
    let has_history = !ctx.history.is_empty();
    let is_new_country = has_history && !ctx.history.iter().any(|t| t.country == cur.country);
    let is_new_city = has_history
        && !ctx
            .history
            .iter()
            .any(|t| t.country == cur.country && t.city == cur.city);
    let distinct: BTreeSet<&str> = win
        .iter()
        .map(|t| t.country.as_str())
        .chain(std::iter::once(cur.country.as_str()))
        .collect();
    let share = if win.is_empty() {
        0.0
    } else {
        win.iter().filter(|t| t.country == cur.country).count() as f64 / win.len() as f64
    };

    b.fact("current_country", "Country", FactValue::Text(cur.country.clone()));
    b.fact("current_city", "City", FactValue::Text(cur.city.clone()));
    b.fact("is_new_country", "New country", FactValue::Boolean(is_new_country));
    b.fact("is_new_city", "New city", FactValue::Boolean(is_new_city));
    b.window_days(cfg);
    b.fact(
        "distinct_countries_90d",
        "Distinct countries",
        FactValue::Integer(distinct.len() as i64),
    );
    b.fact(
        "current_country_share_90d",
        "Share of transactions in this country",
        FactValue::Decimal(round2(share * 100.0)),
    )
    .unit = Some("%".into());
    if let Some(usual) = most_frequent(win.iter().map(|t| t.country.as_str())) {
        b.fact("usual_country", "Most frequent country", FactValue::Text(usual.to_string()));
    }
    if win.is_empty() {
        b.insufficient_history();
    }

    b.feature("is_new_country", flag(is_new_country));
    b.feature("is_new_city", flag(is_new_city));
    b.feature("distinct_countries_90d", distinct.len() as f64);
    b.feature("current_country_txn_share", share);

    b.rows = win.into_iter().cloned().chain(std::iter::once(cur.clone())).collect();
}

fn most_frequent<'a>(items: impl Iterator<Item = &'a str>) -> Option<&'a str> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for i in items {
        *counts.entry(i).or_default() += 1;
    }
    // max_by_key keeps the last maximum; iterate reversed so ties go to the smallest key
    counts.into_iter().rev().max_by_key(|(_, c)| *c).map(|(k, _)| k)
}

fn flow_balance(b: &mut Builder<'_>, ctx: &AlertContext, cfg: &ParserConfig) {
    let cur = &ctx.current;
    let mut rows: Vec<&Transaction> = window(ctx, cfg);
    rows.push(cur);
    let total = |dir| -> Money {
        rows.iter()
            .filter(|t| t.direction == dir)
            .map(|t| t.amount)
            .sum()
    };
    let total_in = total(Direction::Incoming);
    let total_out = total(Direction::Outgoing);
    let net = total_in - total_out;
    let ratio = if total_out.is_positive() {
        total_in.to_f64() / total_out.to_f64()
    } else {
        0.0
    };
    let counterparties: BTreeSet<&str> = rows.iter().map(|t| t.counterpart_id.as_str()).collect();

    b.fact("currency", "Currency", FactValue::Text(cur.currency.clone()));
    b.window_days(cfg);
    b.fact("total_in_90d", "Total incoming", FactValue::Amount(total_in))
        .unit = Some(cur.currency.clone());
    b.fact("total_out_90d", "Total outgoing", FactValue::Amount(total_out))
        .unit = Some(cur.currency.clone());
    b.fact("net_flow_90d", "Net flow", FactValue::Amount(net)).unit = Some(cur.currency.clone());
    b.fact(
        "in_out_ratio_90d",
        "Incoming to outgoing ratio",
        FactValue::Decimal(round2(ratio)),
    );
    b.fact(
        "distinct_counterparties_90d",
        "Distinct counterparties",
        FactValue::Integer(counterparties.len() as i64),
    );
    if !total_out.is_positive() {
        b.insufficient_history();
    }

    b.feature("total_in_90d", total_in.to_f64());
    b.feature("total_out_90d", total_out.to_f64());
    b.feature("net_flow_90d", net.to_f64());
    b.feature("in_out_ratio_90d", ratio);
    b.feature("distinct_counterparties_90d", counterparties.len() as f64);

    b.rows = rows.into_iter().cloned().collect();
}

fn card(b: &mut Builder<'_>, ctx: &AlertContext) {
    let cur = &ctx.current;
    let card_history: Vec<&Transaction> = ctx.history.iter().filter(|t| t.card_id.is_some()).collect();
    let Some(card_id) = cur.card_id.as_deref() else {
        b.fact("channel", "Channel", FactValue::Text(cur.channel.as_str().to_string()));
        b.fact("card_used", "Card used", FactValue::Boolean(false));
        b.feature("is_new_card", 0.0);
        b.feature("entry_mode_rarity", 0.0);
        b.feature("card_txn_count", 0.0);
        if card_history.is_empty() {
            b.insufficient_history();
        }
        b.rows = card_history.into_iter().cloned().collect();
        return;
    };

    let is_new = !ctx.history.is_empty() && !card_history.iter().any(|t| t.card_id.as_deref() == Some(card_id));
    let same_card = card_history
        .iter()
        .filter(|t| t.card_id.as_deref() == Some(card_id))
        .count();
    let share = match cur.card_entry_mode {
        Some(mode) if !card_history.is_empty() => {
            card_history
                .iter()
                .filter(|t| t.card_entry_mode == Some(mode))
                .count() as f64
                / card_history.len() as f64
        }
        _ => 0.0,
    };

    b.fact("card_id", "Card", FactValue::Text(card_id.to_string()));
    if let Some(mode) = cur.card_entry_mode {
        b.fact("entry_mode", "Entry mode", FactValue::Text(mode.as_str().to_string()));
    }
    b.fact("is_new_card", "New card", FactValue::Boolean(is_new));
    b.fact("card_txn_count", "Earlier transactions with this card", FactValue::Integer(same_card as i64));
    b.fact(
        "entry_mode_share",
        "Share of card history with this entry mode",
        FactValue::Decimal(round2(share * 100.0)),
    )
    .unit = Some("%".into());
    if card_history.is_empty() {
        b.insufficient_history();
    }

    b.feature("is_new_card", flag(is_new));
    b.feature("entry_mode_rarity", share);
    b.feature("card_txn_count", same_card as f64);

    b.rows = card_history
        .into_iter()
        .cloned()
        .chain(std::iter::once(cur.clone()))
        .collect();
}

fn counterpart(b: &mut Builder<'_>, ctx: &AlertContext) {
    let cur = &ctx.current;
    let same: Vec<&Transaction> = ctx
        .history
        .iter()
        .filter(|t| t.counterpart_id == cur.counterpart_id)
        .collect();
    let is_new = !ctx.history.is_empty() && same.is_empty();
    let matches = cur.counterpart_country == ctx.person.country;

    b.fact("name", "Counterpart", FactValue::Text(cur.counterpart_name.clone()));
    b.fact("country", "Counterpart country", FactValue::Text(cur.counterpart_country.clone()));
    b.fact("person_country", "Person country", FactValue::Text(ctx.person.country.clone()));
    b.fact("is_new", "New counterpart", FactValue::Boolean(is_new));
    b.fact(
        "txn_count",
        "Earlier transactions with counterpart",
        FactValue::Integer(same.len() as i64),
    );
    b.fact(
        "country_matches_person",
        "Counterpart in person's country",
        FactValue::Boolean(matches),
    );

    b.feature("is_new_counterpart", flag(is_new));
    b.feature("counterpart_txn_count", same.len() as f64);
    b.feature("counterpart_country_matches_person", flag(matches));

    b.rows = same.into_iter().cloned().chain(std::iter::once(cur.clone())).collect();
}

/// Baseline amount statistics; `std` is the sample deviation (n - 1).
pub(crate) struct AmountStats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub max: Money,
    pub mean_rounded: Money,
}

pub(crate) fn amount_stats(amounts: &[Money]) -> Option<AmountStats> {
    if amounts.is_empty() {
        return None;
    }
    let n = amounts.len();
    let total: i128 = amounts.iter().map(|m| m.cents() as i128).sum();
    let mean = total as f64 / 100.0 / n as f64;
    let std = if n < 2 {
        0.0
    } else {
        let ss: f64 = amounts.iter().map(|m| (m.to_f64() - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    };
    Some(AmountStats {
        count: n,
        mean,
        std,
        max: *amounts.iter().max().unwrap(),
        mean_rounded: Money::mean_half_even(total, n),
    })
}

fn activity(b: &mut Builder<'_>, ctx: &AlertContext, cfg: &ParserConfig) {
    let cur = &ctx.current;
    let win = window(ctx, cfg);
    let same_dir: Vec<&Transaction> = win.iter().copied().filter(|t| t.direction == cur.direction).collect();
    let amounts: Vec<Money> = same_dir.iter().map(|t| t.amount).collect();
    let stats = amount_stats(&amounts);
    let zscore = match &stats {
        Some(s) if s.count >= 2 && s.std > 0.0 => (cur.amount.to_f64() - s.mean) / s.std,
        _ => 0.0,
    };
    let last = win.iter().map(|t| t.timestamp).max();
    let hours = match last {
        Some(ts) => (cur.timestamp - ts).num_seconds() as f64 / 3600.0,
        None => cfg.window_days as f64 * 24.0,
    };
    let count = same_dir.len();

    b.fact("currency", "Currency", FactValue::Text(cur.currency.clone()));
    b.fact(
        "direction",
        "Direction",
        FactValue::Text(match cur.direction {
            Direction::Incoming => "incoming".into(),
            Direction::Outgoing => "outgoing".into(),
        }),
    );
    let baseline = stats.as_ref().map_or(0.0, |s| s.mean);
    let f = b.fact("current_amount", "Current amount", FactValue::Amount(cur.amount));
    f.unit = Some(cur.currency.clone());
    *f = f.clone().with_comparative(cur.amount.to_f64(), baseline);
    b.window_days(cfg);
    b.fact("txn_count_90d", "Transactions in window", FactValue::Integer(count as i64));
    if let Some(s) = &stats {
        b.fact("mean_amount_90d", "Mean amount", FactValue::Amount(s.mean_rounded))
            .unit = Some(cur.currency.clone());
        b.fact("max_amount_90d", "Maximum amount", FactValue::Amount(s.max))
            .unit = Some(cur.currency.clone());
    }
    b.fact("amount_zscore", "Amount z-score", FactValue::Decimal(round2(zscore)));
    if last.is_some() {
        b.fact(
            "hours_since_last_txn",
            "Hours since previous transaction",
            FactValue::Decimal(round2(hours)),
        )
        .unit = Some("hours".into());
    }
    if count < 2 {
        b.insufficient_history();
    }

    b.feature("txn_count_90d", count as f64);
    b.feature(
        "mean_amount_90d",
        stats.as_ref().map_or(0.0, |s| s.mean_rounded.to_f64()),
    );
    b.feature("max_amount_90d", stats.as_ref().map_or(0.0, |s| s.max.to_f64()));
    b.feature("amount_zscore", zscore);
    b.feature("hours_since_last_txn", hours);

    b.rows = same_dir
        .into_iter()
        .cloned()
        .chain(std::iter::once(cur.clone()))
        .collect();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::areas::{extract_features, segment};
    use crate::model::fixtures::*;
    use crate::model::Direction;
    use crate::registry::default_registry;
    use proptest::prelude::*;

    fn cfg() -> ParserConfig {
        ParserConfig::default()
    }

    fn fact(ctx: &AlertContext, ka: &KaId, key: &str) -> FactValue {
        let views = segment(ctx, &default_registry(), &cfg());
        views[ka].fact(key).unwrap().value.clone()
    }

    #[test]
    fn empty_history_counts_zero() {
        let ctx = context(transfer("c", 200, "10.00", Direction::Outgoing), vec![]);
        assert_eq!(fact(&ctx, &KaId::ACTIVITY, "txn_count_90d"), FactValue::Integer(0));
        assert!(segment(&ctx, &default_registry(), &cfg())[&KaId::ACTIVITY]
            .fact("insufficient_history")
            .is_some());
    }

    #[test]
    fn mean_of_three() {
        let hist = vec![
            transfer("h1", 100, "10.00", Direction::Outgoing),
            transfer("h2", 101, "20.00", Direction::Outgoing),
            transfer("h3", 102, "30.00", Direction::Outgoing),
        ];
        let ctx = context(transfer("c", 110, "25.00", Direction::Outgoing), hist);
        assert_eq!(
            fact(&ctx, &KaId::ACTIVITY, "mean_amount_90d"),
            FactValue::Amount("20.00".parse().unwrap())
        );
        assert_eq!(fact(&ctx, &KaId::ACTIVITY, "txn_count_90d"), FactValue::Integer(3));
    }

    #[test]
    fn new_country_is_flagged() {
        let mut hist = vec![
            transfer("h1", 100, "10.00", Direction::Outgoing),
            transfer("h2", 101, "20.00", Direction::Outgoing),
            transfer("h3", 102, "30.00", Direction::Outgoing),
        ];
        hist[2].country = "ES".into();
        let mut cur = transfer("c", 110, "25.00", Direction::Outgoing);
        cur.country = "FR".into();
        let f = extract_features(&context(cur.clone(), hist.clone()), &cfg());
        assert_eq!(f.get("is_new_country"), Some(1.0));
        cur.country = "ES".into();
        let f = extract_features(&context(cur, hist), &cfg());
        assert_eq!(f.get("is_new_country"), Some(0.0));
    }

    #[test]
    fn window_excludes_old_rows() {
        let hist = vec![
            transfer("h1", 0, "10.00", Direction::Outgoing),
            transfer("h2", 1, "20.00", Direction::Outgoing),
        ];
        let ctx = context(transfer("c", 121, "25.00", Direction::Outgoing), hist);
        let f = extract_features(&ctx, &cfg());
        assert_eq!(f.get("txn_count_90d"), Some(0.0));
        // the boundary itself is inside the window
        let edge = vec![transfer("h1", 31, "10.00", Direction::Outgoing)];
        let ctx = context(transfer("c", 121, "25.00", Direction::Outgoing), edge);
        assert_eq!(extract_features(&ctx, &cfg()).get("txn_count_90d"), Some(1.0));
    }

    #[test]
    fn net_flow_includes_current() {
        let hist = vec![transfer("h1", 100, "100.00", Direction::Incoming)];
        let ctx = context(transfer("c", 110, "40.00", Direction::Outgoing), hist);
        assert_eq!(
            fact(&ctx, &KaId::FLOW_BALANCE, "net_flow_90d"),
            FactValue::Amount("60.00".parse().unwrap())
        );
        let f = extract_features(&ctx, &cfg());
        assert_eq!(f.get("in_out_ratio_90d"), Some(2.5));
    }

    #[test]
    fn ratio_without_outgoing_is_zero_with_notice() {
        let hist = vec![transfer("h1", 100, "100.00", Direction::Incoming)];
        let ctx = context(transfer("c", 110, "40.00", Direction::Incoming), hist);
        assert_eq!(extract_features(&ctx, &cfg()).get("in_out_ratio_90d"), Some(0.0));
        let views = segment(&ctx, &default_registry(), &cfg());
        assert!(views[&KaId::FLOW_BALANCE].fact("insufficient_history").is_some());
    }

    #[test]
    fn counterpart_seen_twice() {
        let mut other = transfer("h3", 102, "30.00", Direction::Outgoing);
        other.counterpart_id = "C2".into();
        let hist = vec![
            transfer("h1", 100, "10.00", Direction::Outgoing),
            transfer("h2", 101, "20.00", Direction::Outgoing),
            other,
        ];
        let ctx = context(transfer("c", 110, "25.00", Direction::Outgoing), hist);
        let f = extract_features(&ctx, &cfg());
        assert_eq!(f.get("counterpart_txn_count"), Some(2.0));
        assert_eq!(f.get("is_new_counterpart"), Some(0.0));
        let views = segment(&ctx, &default_registry(), &cfg());
        let ids: Vec<&str> = views[&KaId::COUNTERPART]
            .rows
            .iter()
            .map(|t| t.transaction_id.as_str())
            .collect();
        assert_eq!(ids, vec!["h1", "h2", "c"]);
    }

    #[test]
    fn every_fact_and_feature_stays_in_its_area() {
        let hist = vec![transfer("h1", 100, "10.00", Direction::Outgoing)];
        let ctx = context(transfer("c", 110, "25.00", Direction::Outgoing), hist);
        let views = segment(&ctx, &default_registry(), &cfg());
        let mut seen = std::collections::BTreeSet::new();
        for (ka, v) in &views {
            for f in &v.facts {
                assert_eq!(&f.ka, ka);
                assert!(f.fact_id.starts_with(ka.as_str()));
            }
            for (name, feat) in v.features.iter() {
                assert_eq!(&feat.ka, ka);
                assert!(seen.insert(name.to_string()), "{name} in two areas");
            }
        }
        assert_eq!(seen.len(), 24);
    }

    proptest! {
        #[test]
        fn wider_window_never_sees_fewer(days in proptest::collection::vec(0u32..200, 0..30), w in 1u32..150) {
            let hist: Vec<Transaction> = days
                .iter()
                .enumerate()
                .map(|(i, d)| transfer(&format!("h{i}"), *d, "10.00", Direction::Outgoing))
                .collect();
            let mut hist = hist;
            hist.sort_by_key(|t| t.timestamp);
            let ctx = context(transfer("c", 200, "10.00", Direction::Outgoing), hist);
            let narrow = extract_features(&ctx, &ParserConfig { window_days: w });
            let wide = extract_features(&ctx, &ParserConfig { window_days: w + 30 });
            prop_assert!(narrow.get("txn_count_90d") <= wide.get("txn_count_90d"));
            prop_assert!(narrow.get("total_out_90d") <= wide.get("total_out_90d"));
            prop_assert!(narrow.get("distinct_counterparties_90d") <= wide.get("distinct_counterparties_90d"));
        }
    }
}
