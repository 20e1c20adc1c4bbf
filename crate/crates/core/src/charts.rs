//! Declarative chart specifications per Knowledge Area.
//!
//! Every chart carries subtitle statistics over the amounts of the rows it
//! plots, a gray annotation on the alerted transaction and a red annotation
//! per confirmed-fraud row.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::areas::KnowledgeAreaView;
use crate::model::{AlertContext, Direction, Transaction};
use crate::money::Money;
use crate::registry::KaId;
use crate::SCHEMA_VERSION;

pub const MAX_CHARTS: usize = 3;
pub const TOP_COUNTERPARTS: usize = 10;
pub const NO_DATA_NOTICE: &str = "No history available for this area";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartType {
    Bar,
    Histogram,
    StackedBar,
    Area,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    CurrentGray,
    FraudRed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub label: String,
    pub unit: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: String,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub kind: AnnotationKind,
    pub series: String,
    pub x: String,
    pub transaction_id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubtitleStats {
    pub count: usize,
    pub mean: Option<Money>,
    pub max: Option<Money>,
    pub min: Option<Money>,
}

impl SubtitleStats {
    pub fn render(&self, unit: &str) -> String {
        match (self.mean, self.max, self.min) {
            (Some(mean), Some(max), Some(min)) => format!(
                "count {}, mean {mean} {unit}, max {max} {unit}, min {min} {unit}",
                self.count
            ),
            _ => format!("count {}", self.count),
        }
    }
}

/// Count, half-even rounded mean, max and min of `values`.
pub fn subtitle_stats(values: &[Money]) -> SubtitleStats {
    if values.is_empty() {
        return SubtitleStats {
            count: 0,
            mean: None,
            max: None,
            min: None,
        };
    }
    let total: i128 = values.iter().map(|v| v.cents() as i128).sum();
    SubtitleStats {
        count: values.len(),
        mean: Some(Money::mean_half_even(total, values.len())),
        max: values.iter().max().copied(),
        min: values.iter().min().copied(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub schema_version: u32,
    pub chart_id: String,
    pub ka: KaId,
    pub chart_type: ChartType,
    pub title: String,
    pub subtitle: String,
    pub stats: SubtitleStats,
    pub x_axis: Axis,
    pub y_axis: Axis,
    pub series: Vec<Series>,
    pub annotations: Vec<Annotation>,
    /// Transactions the chart is drawn from, in plotting order.
    pub source_rows: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartPanel {
    pub schema_version: u32,
    pub ka: KaId,
    pub charts: Vec<ChartSpec>,
    pub notice: Option<String>,
}

struct Draft {
    id: &'static str,
    chart_type: ChartType,
    title: &'static str,
    x_axis: Axis,
    y_axis: Axis,
    series: Vec<Series>,
    annotations: Vec<Annotation>,
}

fn axis(label: &str, unit: Option<&str>) -> Axis {
    Axis {
        label: label.to_string(),
        unit: unit.map(str::to_string),
    }
}

fn sorted(rows: impl IntoIterator<Item = Transaction>) -> Vec<Transaction> {
    let mut rows: Vec<Transaction> = rows.into_iter().collect();
    rows.sort_by(|a, b| {
        a.timestamp
            .cmp(&b.timestamp)
            .then_with(|| a.transaction_id.cmp(&b.transaction_id))
    });
    rows
}

/// Annotations for `rows`, each row placed at `(series, x)` by `locate`.
fn annotate(
    rows: &[Transaction],
    current_id: &str,
    locate: impl Fn(&Transaction) -> (String, String),
) -> Vec<Annotation> {
    let mut out = Vec::new();
    for t in rows {
        let kind = if t.transaction_id == current_id {
            AnnotationKind::CurrentGray
        } else if t.confirmed_fraud {
            AnnotationKind::FraudRed
        } else {
            continue;
        };
        let (series, x) = locate(t);
        out.push(Annotation {
            kind,
            series,
            x,
            transaction_id: t.transaction_id.clone(),
        });
    }
    out
}

fn count_bar(
    rows: &[Transaction],
    current_id: &str,
    key: impl Fn(&Transaction) -> String,
    series_label: &str,
) -> (Series, Vec<Annotation>) {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for t in rows {
        *counts.entry(key(t)).or_default() += 1;
    }
    let mut cats: Vec<(String, usize)> = counts.into_iter().collect();
    cats.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let series = Series {
        label: series_label.to_string(),
        points: cats
            .into_iter()
            .map(|(x, n)| Point { x, y: n as f64 })
            .collect(),
    };
    let ann = annotate(rows, current_id, |t| (series_label.to_string(), key(t)));
    (series, ann)
}

fn month(t: &Transaction) -> String {
    t.timestamp.format("%Y-%m").to_string()
}

fn timestamp(t: &Transaction) -> String {
    t.timestamp.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

/// Rows a KA's charts are drawn from.
fn source(view: &KnowledgeAreaView, ctx: &AlertContext) -> Vec<Transaction> {
    match view.ka.as_str() {
        "counterpart" => sorted(
            ctx.history
                .iter()
                .cloned()
                .chain(std::iter::once(ctx.current.clone())),
        ),
        _ => sorted(view.rows.iter().cloned()),
    }
}

pub fn charts_for(view: &KnowledgeAreaView, ctx: &AlertContext) -> ChartPanel {
    let rows = source(view, ctx);
    let current_id = ctx.current.transaction_id.as_str();
    let has_history = rows.iter().any(|t| t.transaction_id != current_id);
    let drafts = if has_history {
        drafts(&view.ka, &rows, ctx)
    } else {
        Vec::new()
    };
    let amounts: Vec<Money> = rows.iter().map(|t| t.amount).collect();
    let stats = subtitle_stats(&amounts);
    let currency = ctx.current.currency.as_str();
    let charts: Vec<ChartSpec> = drafts
        .into_iter()
        .filter(|d| d.series.iter().any(|s| !s.points.is_empty()))
        .take(MAX_CHARTS)
        .map(|d| ChartSpec {
            schema_version: SCHEMA_VERSION,
            chart_id: format!("{}.{}", view.ka, d.id),
            ka: view.ka.clone(),
            chart_type: d.chart_type,
            title: d.title.to_string(),
            subtitle: stats.render(currency),
            stats,
            x_axis: d.x_axis,
            y_axis: d.y_axis,
            series: d.series,
            annotations: d.annotations,
            source_rows: rows.iter().map(|t| t.transaction_id.clone()).collect(),
        })
        .collect();
    ChartPanel {
        schema_version: SCHEMA_VERSION,
        ka: view.ka.clone(),
        notice: charts.is_empty().then(|| NO_DATA_NOTICE.to_string()),
        charts,
    }
}

fn drafts(ka: &KaId, rows: &[Transaction], ctx: &AlertContext) -> Vec<Draft> {
    let current_id = ctx.current.transaction_id.as_str();
    let currency = ctx.current.currency.as_str();
    match ka.as_str() {
        "alerted_person" => {
            let series = Series {
                label: "amount".into(),
                points: rows
                    .iter()
                    .map(|t| Point {
                        x: timestamp(t),
                        y: t.amount.to_f64(),
                    })
                    .collect(),
            };
            vec![Draft {
                id: "alert_timeline",
                chart_type: ChartType::Bar,
                title: "Past alerts and confirmed fraud",
                x_axis: axis("Time", None),
                y_axis: axis("Amount", Some(currency)),
                series: vec![series],
                annotations: annotate(rows, current_id, |t| ("amount".into(), timestamp(t))),
            }]
        }
        "location" => {
            let (series, annotations) =
                count_bar(rows, current_id, |t| t.country.clone(), "transactions");
            vec![Draft {
                id: "country_counts",
                chart_type: ChartType::Bar,
                title: "Transactions per country",
                x_axis: axis("Country", None),
                y_axis: axis("Transactions", None),
                series: vec![series],
                annotations,
            }]
        }
        "flow_balance" => flow_drafts(rows, current_id, currency),
        "card" => {
            let mode = |t: &Transaction| {
                t.card_entry_mode
                    .map_or("unknown".to_string(), |m| m.as_str().to_string())
            };
            let mut counts: BTreeMap<String, usize> = BTreeMap::new();
            for t in rows {
                *counts.entry(mode(t)).or_default() += 1;
            }
            let series = Series {
                label: "transactions".into(),
                points: counts
                    .into_iter()
                    .map(|(x, n)| Point { x, y: n as f64 })
                    .collect(),
            };
            vec![Draft {
                id: "entry_modes",
                chart_type: ChartType::Histogram,
                title: "Card entry modes",
                x_axis: axis("Entry mode", None),
                y_axis: axis("Transactions", None),
                series: vec![series],
                annotations: annotate(rows, current_id, |t| ("transactions".into(), mode(t))),
            }]
        }
        "counterpart" => {
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for t in rows {
                *counts.entry(t.counterpart_id.as_str()).or_default() += 1;
            }
            let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
            let top: Vec<&str> = ranked.iter().take(TOP_COUNTERPARTS).map(|(id, _)| *id).collect();
            let label = |t: &Transaction| -> String {
                if top.contains(&t.counterpart_id.as_str()) {
                    format!("{} ({})", t.counterpart_name, t.counterpart_id)
                } else {
                    "other".to_string()
                }
            };
            let mut points: Vec<Point> = Vec::new();
            for id in &top {
                let first = rows.iter().find(|t| t.counterpart_id == *id).unwrap();
                let n = ranked.iter().find(|(c, _)| c == id).unwrap().1;
                points.push(Point {
                    x: label(first),
                    y: n as f64,
                });
            }
            let other: usize = ranked.iter().skip(TOP_COUNTERPARTS).map(|(_, n)| n).sum();
            if other > 0 {
                points.push(Point {
                    x: "other".into(),
                    y: other as f64,
                });
            }
            vec![Draft {
                id: "counterpart_counts",
                chart_type: ChartType::Bar,
                title: "Transactions per counterpart",
                x_axis: axis("Counterpart", None),
                y_axis: axis("Transactions", None),
                series: vec![Series {
                    label: "transactions".into(),
                    points,
                }],
                annotations: annotate(rows, current_id, |t| ("transactions".into(), label(t))),
            }]
        }
        "activity" => activity_drafts(rows, current_id, currency),
        _ => Vec::new(),
    }
}

fn flow_drafts(rows: &[Transaction], current_id: &str, currency: &str) -> Vec<Draft> {
    let mut months: BTreeMap<String, (Money, Money)> = BTreeMap::new();
    if let (Some(first), Some(last)) = (rows.first(), rows.last()) {
        // every calendar month between the first and the last row
        let mut m = chrono::Datelike::with_day0(&first.timestamp.date_naive(), 0).unwrap();
        let end = last.timestamp.date_naive();
        while m <= end {
            months.insert(m.format("%Y-%m").to_string(), (Money::ZERO, Money::ZERO));
            m = m.checked_add_months(chrono::Months::new(1)).unwrap();
        }
    }
    for t in rows {
        let e = months.entry(month(t)).or_default();
        match t.direction {
            Direction::Incoming => e.0 += t.amount,
            Direction::Outgoing => e.1 += t.amount,
        }
    }
    let point = |k: &String, v: Money| Point {
        x: k.clone(),
        y: v.to_f64(),
    };
    let incoming = Series {
        label: "incoming".into(),
        points: months.iter().map(|(k, v)| point(k, v.0)).collect(),
    };
    let outgoing = Series {
        label: "outgoing".into(),
        points: months.iter().map(|(k, v)| point(k, v.1)).collect(),
    };
    let net = Series {
        label: "net".into(),
        points: months.iter().map(|(k, v)| point(k, v.0 - v.1)).collect(),
    };
    let dir = |t: &Transaction| match t.direction {
        Direction::Incoming => "incoming".to_string(),
        Direction::Outgoing => "outgoing".to_string(),
    };
    vec![
        Draft {
            id: "monthly_flow",
            chart_type: ChartType::StackedBar,
            title: "Incoming and outgoing funds per month",
            x_axis: axis("Month", None),
            y_axis: axis("Amount", Some(currency)),
            series: vec![incoming, outgoing],
            annotations: annotate(rows, current_id, |t| (dir(t), month(t))),
        },
        Draft {
            id: "net_flow",
            chart_type: ChartType::Area,
            title: "Net flow per month",
            x_axis: axis("Month", None),
            y_axis: axis("Amount", Some(currency)),
            series: vec![net],
            annotations: annotate(rows, current_id, |t| ("net".into(), month(t))),
        },
    ]
}

/// Number of histogram bins: Sturges' rule, at least 4.
pub fn sturges_bins(n: usize) -> usize {
    if n == 0 {
        return 4;
    }
    let k = (n as f64).log2().ceil() as usize + 1;
    k.max(4)
}

fn activity_drafts(rows: &[Transaction], current_id: &str, currency: &str) -> Vec<Draft> {
    let over_time = Series {
        label: "amount".into(),
        points: rows
            .iter()
            .map(|t| Point {
                x: timestamp(t),
                y: t.amount.to_f64(),
            })
            .collect(),
    };

    let k = sturges_bins(rows.len());
    let lo = rows.iter().map(|t| t.amount.cents()).min().unwrap_or(0);
    let hi = rows.iter().map(|t| t.amount.cents()).max().unwrap_or(0);
    let width = ((hi - lo) / k as i64 + 1).max(1);
    let bin = |t: &Transaction| (((t.amount.cents() - lo) / width) as usize).min(k - 1);
    let bin_label = |i: usize| {
        let start = Money::from_cents(lo + width * i as i64);
        let end = Money::from_cents(lo + width * (i as i64 + 1));
        format!("{start}-{end}")
    };
    let mut counts = vec![0usize; k];
    for t in rows {
        counts[bin(t)] += 1;
    }
    let histogram = Series {
        label: "transactions".into(),
        points: counts
            .iter()
            .enumerate()
            .map(|(i, n)| Point {
                x: bin_label(i),
                y: *n as f64,
            })
            .collect(),
    };

    vec![
        Draft {
            id: "amount_over_time",
            chart_type: ChartType::Area,
            title: "Amount over time",
            x_axis: axis("Time", None),
            y_axis: axis("Amount", Some(currency)),
            series: vec![over_time],
            annotations: annotate(rows, current_id, |t| ("amount".into(), timestamp(t))),
        },
        Draft {
            id: "amount_distribution",
            chart_type: ChartType::Histogram,
            title: "Amount distribution",
            x_axis: axis("Amount", Some(currency)),
            y_axis: axis("Transactions", None),
            series: vec![histogram],
            annotations: annotate(rows, current_id, |t| ("transactions".into(), bin_label(bin(t)))),
        },
    ]
}
