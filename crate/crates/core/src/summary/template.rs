use std::collections::BTreeSet;

use crate::areas::{evidence_fact, FactValue, KnowledgeAreaView};
use crate::countries;
use crate::risk::RiskReport;

use super::{Generator, Highlight, HighlightKind, SummaryDoc};

/// Text under construction with risk spans over evidence phrases.
struct Writer<'a> {
    view: &'a KnowledgeAreaView,
    text: String,
    highlights: Vec<Highlight>,
    evidence: BTreeSet<String>,
}

impl<'a> Writer<'a> {
    fn new(view: &'a KnowledgeAreaView, report: &RiskReport) -> Self {
        let evidence = if report.flagged {
            report
                .attributed_variables
                .iter()
                .filter_map(|a| evidence_fact(&a.feature))
                .map(str::to_string)
                .collect()
        } else {
            BTreeSet::new()
        };
        Writer {
            view,
            text: String::new(),
            highlights: Vec::new(),
            evidence,
        }
    }

    fn push(&mut self, s: &str) {
        self.text.push_str(s);
    }

    /// Appends `phrase`, highlighted when one of `keys` is evidence of an
    /// attributed variable.
    fn phrase(&mut self, phrase: &str, keys: &[&str]) {
        let start = self.text.len();
        self.text.push_str(phrase);
        let hit = keys
            .iter()
            .any(|k| self.evidence.contains(&format!("{}.{k}", self.view.ka)));
        if hit && !phrase.is_empty() {
            self.highlights.push(Highlight {
                start,
                end: self.text.len(),
                kind: HighlightKind::Risk,
            });
        }
    }

    fn value(&self, key: &str) -> Option<String> {
        self.view.fact(key).map(|f| f.value.to_string())
    }

    fn get(&self, key: &str) -> String {
        self.value(key).unwrap_or_default()
    }

    fn int(&self, key: &str) -> i64 {
        match self.view.fact(key).map(|f| &f.value) {
            Some(FactValue::Integer(i)) => *i,
            _ => 0,
        }
    }

    fn yes(&self, key: &str) -> bool {
        matches!(self.view.fact(key).map(|f| &f.value), Some(FactValue::Boolean(true)))
    }

    fn has(&self, key: &str) -> bool {
        self.view.fact(key).is_some()
    }
}

fn place(code: &str) -> String {
    match countries::name(code) {
        Some(name) => format!("{name} ({code})"),
        None => code.to_string(),
    }
}

fn plural(n: i64, one: &str, many: &str) -> String {
    if n == 1 {
        format!("{n} {one}")
    } else {
        format!("{n} {many}")
    }
}

/// Deterministic summary built only from the area's facts.
pub fn generate_template(view: &KnowledgeAreaView, report: &RiskReport) -> SummaryDoc {
    let mut w = Writer::new(view, report);
    match view.ka.as_str() {
        "alerted_person" => alerted_person(&mut w),
        "location" => location(&mut w),
        "flow_balance" => flow_balance(&mut w),
        "card" => card(&mut w),
        "counterpart" => counterpart(&mut w),
        "activity" => activity(&mut w),
        _ => custom(&mut w),
    }
    if let Some(j) = w.value("blocklist_justification") {
        w.push(" The person is on the blocklist: ");
        w.push(&j);
        w.push(".");
    }
    if report.flagged {
        w.push(" This area is flagged as risky.");
    } else {
        w.push(" No risk indicators were raised for this area.");
    }
    SummaryDoc {
        ka: view.ka.clone(),
        text: w.text.trim_start().to_string(),
        highlights: {
            // trimming only ever removes a leading space before any span
            let shift = w.text.len() - w.text.trim_start().len();
            w.highlights
                .iter()
                .map(|h| Highlight {
                    start: h.start - shift,
                    end: h.end - shift,
                    kind: h.kind,
                })
                .collect()
        },
        verified: true,
        generator: Generator::Template,
    }
}

fn alerted_person(w: &mut Writer<'_>) {
    let name = w.get("name");
    let country = place(&w.get("country"));
    w.push(&name);
    w.push(" is ");
    let age = format!("{} years old", w.get("age"));
    w.phrase(&age, &["age"]);
    w.push(&format!(" and lives in {country}."));
    w.push(&format!(" The account was opened on {}, ", w.get("account_opened")));
    let days = format!("{} days", w.get("account_age_days"));
    w.phrase(&days, &["account_age_days"]);
    w.push(" before this transaction.");
    let alerts = w.int("past_alert_count");
    let fraud = w.int("past_confirmed_fraud_count");
    w.push(" The person has ");
    w.phrase(&plural(alerts, "earlier alert", "earlier alerts"), &["past_alert_count"]);
    w.push(" and ");
    w.phrase(
        &plural(fraud, "transaction", "transactions"),
        &["past_confirmed_fraud_count"],
    );
    w.push(" confirmed as fraud.");
}

fn location(w: &mut Writer<'_>) {
    let city = w.get("current_city");
    let country = place(&w.get("current_country"));
    w.push("The transaction took place in ");
    w.phrase(&city, &["current_city"]);
    w.push(", ");
    w.phrase(&country, &["current_country"]);
    w.push(".");
    if !w.has("usual_country") {
        w.push(" There is insufficient history to compare locations.");
        return;
    }
    if w.yes("is_new_country") {
        w.push(" This is the first transaction in this country for the person.");
    } else if w.yes("is_new_city") {
        w.push(" This is the first transaction in this city for the person.");
    } else {
        w.push(" The person has transacted here before.");
    }
    let days = w.get("window_days");
    w.push(&format!(" Over the last {days} days, "));
    let share = format!("{}%", w.get("current_country_share_90d"));
    w.phrase(&share, &["current_country_share_90d"]);
    w.push(" of the person's transactions were in this country, spread over ");
    let n = w.int("distinct_countries_90d");
    w.phrase(
        &plural(n, "country", "countries"),
        &["distinct_countries_90d"],
    );
    let usual = place(&w.get("usual_country"));
    w.push(&format!("; the most frequent was {usual}."));
}

fn flow_balance(w: &mut Writer<'_>) {
    let cur = w.get("currency");
    let days = w.get("window_days");
    w.push(&format!(
        "Over the last {days} days, including this transaction, the person received "
    ));
    let inc = format!("{} {cur}", w.get("total_in_90d"));
    w.phrase(&inc, &["total_in_90d"]);
    w.push(" and sent ");
    let out = format!("{} {cur}", w.get("total_out_90d"));
    w.phrase(&out, &["total_out_90d"]);
    w.push(", a net flow of ");
    let net = format!("{} {cur}", w.get("net_flow_90d"));
    w.phrase(&net, &["net_flow_90d"]);
    w.push(".");
    if w.yes("insufficient_history") {
        w.push(" There is insufficient history of outgoing funds to compute a ratio.");
    } else {
        w.push(" Incoming funds were ");
        let ratio = format!("{} times", w.get("in_out_ratio_90d"));
        w.phrase(&ratio, &["in_out_ratio_90d"]);
        w.push(" the outgoing funds.");
    }
    let n = w.int("distinct_counterparties_90d");
    w.push(" Funds moved between the person and ");
    w.phrase(
        &plural(n, "distinct counterparty", "distinct counterparties"),
        &["distinct_counterparties_90d"],
    );
    w.push(".");
}

fn card(w: &mut Writer<'_>) {
    if !w.has("card_id") {
        let channel = w.get("channel");
        w.push(&format!("No card was used; the transaction channel is {channel}."));
        if w.yes("insufficient_history") {
            w.push(" There is insufficient card history for comparison.");
        }
        return;
    }
    let card = w.get("card_id");
    w.push("The transaction used card ");
    w.phrase(&card, &["card_id"]);
    if let Some(mode) = w.value("entry_mode") {
        w.push(&format!(" with entry mode {mode}"));
    }
    w.push(".");
    if w.yes("insufficient_history") {
        w.push(" There is insufficient card history for comparison.");
        return;
    }
    if w.yes("is_new_card") {
        w.push(" The person has not used this card before.");
    }
    let n = w.int("card_txn_count");
    w.push(" The card appears in ");
    w.phrase(
        &plural(n, "earlier transaction", "earlier transactions"),
        &["card_txn_count"],
    );
    if w.has("entry_mode") {
        w.push(", and ");
        let share = format!("{}%", w.get("entry_mode_share"));
        w.phrase(&share, &["entry_mode_share"]);
        w.push(" of the person's card transactions used this entry mode");
    }
    w.push(".");
}

fn counterpart(w: &mut Writer<'_>) {
    let name = w.get("name");
    let country = place(&w.get("country"));
    w.push("The counterpart is ");
    w.phrase(&name, &["name"]);
    w.push(", located in ");
    w.phrase(&country, &["country"]);
    w.push(".");
    let n = w.int("txn_count");
    if w.yes("is_new") {
        w.push(" This is the first transaction with this counterpart.");
    } else if n == 0 {
        w.push(" There is insufficient history with counterparts.");
    } else {
        w.push(" The person made ");
        w.phrase(
            &plural(n, "earlier transaction", "earlier transactions"),
            &["txn_count"],
        );
        w.push(" with this counterpart.");
    }
    if w.yes("country_matches_person") {
        w.push(" The counterpart is based in the person's country.");
    } else {
        let home = place(&w.get("person_country"));
        w.push(&format!(
            " The counterpart is not based in the person's country, {home}."
        ));
    }
}

fn activity(w: &mut Writer<'_>) {
    let cur = w.get("currency");
    let dir = w.get("direction");
    let days = w.get("window_days");
    w.push(&format!("The current {dir} transaction is "));
    let amount = format!("{} {cur}", w.get("current_amount"));
    w.phrase(&amount, &["current_amount"]);
    w.push(".");
    let n = w.int("txn_count_90d");
    if n == 0 {
        w.push(&format!(
            " There is insufficient history: no earlier {dir} transactions in the last {days} days."
        ));
    } else {
        w.push(&format!(" Over the last {days} days there "));
        w.push(if n == 1 { "was " } else { "were " });
        w.phrase(
            &plural(n, &format!("earlier {dir} transaction"), &format!("earlier {dir} transactions")),
            &["txn_count_90d"],
        );
        w.push(", with a mean of ");
        let mean = format!("{} {cur}", w.get("mean_amount_90d"));
        w.phrase(&mean, &["mean_amount_90d"]);
        w.push(" and a maximum of ");
        let max = format!("{} {cur}", w.get("max_amount_90d"));
        w.phrase(&max, &["max_amount_90d"]);
        w.push(".");
        if n >= 2 {
            w.push(&format!(
                " The current amount has a z-score of {} against that history.",
                w.get("amount_zscore")
            ));
        } else {
            w.push(" There is insufficient history to compute a z-score.");
        }
    }
    if let Some(h) = w.value("hours_since_last_txn") {
        w.push(" The previous transaction took place ");
        w.phrase(&format!("{h} hours"), &["hours_since_last_txn"]);
        w.push(" earlier.");
    }
}

fn custom(w: &mut Writer<'_>) {
    if w.view.facts.is_empty() {
        w.push("There are no facts recorded for this area.");
        return;
    }
    let parts: Vec<String> = w
        .view
        .facts
        .iter()
        .map(|f| match &f.unit {
            Some(u) => format!("{} {u}", f.value),
            None => f.value.to_string(),
        })
        .collect();
    w.push(&format!("Recorded values for this area: {}.", parts.join(", ")));
}
