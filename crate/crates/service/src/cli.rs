//! The `katriage` command line.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use katriage::datagen::{self, GenConfig, PERSONS_FILE};
use katriage::summary::{SummaryDoc, SummaryMode};
use katriage::{AlertStatus, Decision, Engine, EngineError, Person, Transaction};
use serde::Serialize;

use crate::api;
use crate::config::{Settings, SettingsError};

#[derive(Debug, Parser)]
#[command(name = "katriage", version, about = "Fraud alert triage by knowledge areas")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset as JSON Lines.
    Gen(GenArgs),
    /// Ingest a transactions file and open alerts for flagged events.
    Ingest(IngestArgs),
    /// Run the HTTP service.
    Serve(ServeArgs),
    /// Print an alert's overview and the summary of every area.
    Triage(TriageArgs),
    /// Print the summary of one area of an alert.
    Summarize(SummarizeArgs),
    /// List alerts, newest first.
    Alerts(AlertsArgs),
    /// Record an analyst decision on an alert.
    Decide(DecideArgs),
}

#[derive(Debug, Args)]
pub struct StoreArgs {
    /// Service settings file (TOML).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Store journal; overrides the settings file.
    #[arg(long)]
    pub store: Option<PathBuf>,
}

impl StoreArgs {
    fn settings(&self) -> Result<Settings, CliError> {
        let mut s = Settings::load_or_default(self.config.as_deref())?;
        if let Some(store) = &self.store {
            s.store = store.clone();
        }
        Ok(s)
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub persons: Option<usize>,
    #[arg(long)]
    pub days: Option<u32>,
    #[arg(long)]
    pub fraud_rate: Option<f64>,
    /// Output directory for persons.jsonl and transactions.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    /// Generator settings file (TOML); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Transactions as JSON Lines.
    pub file: PathBuf,
    /// Persons as JSON Lines; defaults to persons.jsonl next to FILE.
    #[arg(long)]
    pub persons: Option<PathBuf>,
    #[command(flatten)]
    pub store: StoreArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address; overrides the settings file.
    #[arg(long)]
    pub listen: Option<String>,
    #[command(flatten)]
    pub store: StoreArgs,
}

#[derive(Debug, Args)]
pub struct TriageArgs {
    pub alert_id: String,
    #[arg(long)]
    pub mode: Option<SummaryMode>,
    #[command(flatten)]
    pub store: StoreArgs,
}

#[derive(Debug, Args)]
pub struct SummarizeArgs {
    pub alert_id: String,
    pub ka: String,
    #[arg(long)]
    pub mode: Option<SummaryMode>,
    /// Print the full summary document as JSON.
    #[arg(long)]
    pub json: bool,
    #[command(flatten)]
    pub store: StoreArgs,
}

#[derive(Debug, Args)]
pub struct AlertsArgs {
    #[arg(long, value_parser = parse_status)]
    pub status: Option<AlertStatus>,
    #[arg(long)]
    pub limit: Option<usize>,
    #[command(flatten)]
    pub store: StoreArgs,
}

#[derive(Debug, Args)]
pub struct DecideArgs {
    pub alert_id: String,
    #[arg(value_parser = parse_decision)]
    pub decision: Decision,
    #[command(flatten)]
    pub store: StoreArgs,
}

fn parse_status(s: &str) -> Result<AlertStatus, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown status {s:?}"))
}

fn parse_decision(s: &str) -> Result<Decision, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("decision must be fraud or legitimate, got {s:?}"))
}

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_NOT_FOUND: u8 = 2;

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    fn failure(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_FAILURE,
            message: message.into(),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        CliError {
            code: if e.is_not_found() { EXIT_NOT_FOUND } else { EXIT_FAILURE },
            message: e.to_string(),
        }
    }
}

impl From<SettingsError> for CliError {
    fn from(e: SettingsError) -> Self {
        CliError::failure(e.to_string())
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::failure(e.to_string())
    }
}

/// Runs a parsed command, writing results to `out` and diagnostics to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Gen(a) => gen(a, out),
        Command::Ingest(a) => ingest(a, out, err),
        Command::Serve(a) => serve(a, err),
        Command::Triage(a) => {
            let engine = a.store.settings()?.open_engine()?;
            out.write_all(render_triage(&engine, &a.alert_id, a.mode)?.as_bytes())?;
            Ok(())
        }
        Command::Summarize(a) => {
            let engine = a.store.settings()?.open_engine()?;
            let doc = engine.summary(&a.alert_id, &a.ka, a.mode)?;
            if a.json {
                serde_json::to_writer_pretty(&mut *out, &doc).map_err(io::Error::from)?;
                writeln!(out)?;
            } else {
                writeln!(out, "{}", doc.text)?;
            }
            Ok(())
        }
        Command::Alerts(a) => {
            let engine = a.store.settings()?.open_engine()?;
            out.write_all(render_alerts(&engine, a.status, a.limit).as_bytes())?;
            Ok(())
        }
        Command::Decide(a) => {
            let engine = a.store.settings()?.open_engine()?;
            let alert = engine.decide(&a.alert_id, a.decision, chrono::Utc::now())?;
            writeln!(out, "{} {}", alert.alert_id, label(&a.decision))?;
            Ok(())
        }
    }
}

fn gen(a: GenArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::failure(format!("cannot read {}: {e}", path.display())))?;
            toml::from_str::<GenConfig>(&text)
                .map_err(|e| CliError::failure(format!("invalid generator settings in {}: {e}", path.display())))?
        }
        None => GenConfig::default(),
    };
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(v) = a.persons {
        cfg.n_persons = v;
    }
    if let Some(v) = a.days {
        cfg.days = v;
    }
    if let Some(v) = a.fraud_rate {
        cfg.fraud_rate = v;
    }
    let data = datagen::generate(&cfg).map_err(|e| CliError {
        code: EXIT_NOT_FOUND,
        message: e.to_string(),
    })?;
    data.write_dir(&a.out)?;
    writeln!(
        out,
        "wrote {} persons and {} transactions ({} labeled) to {}",
        data.persons.len(),
        data.transactions.len(),
        data.labeled_count(),
        a.out.display()
    )?;
    Ok(())
}

fn read_records<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let file = File::open(path).map_err(|e| CliError::failure(format!("cannot open {}: {e}", path.display())))?;
    datagen::read_jsonl(BufReader::new(file)).map_err(|e| CliError::failure(format!("{}: {e}", path.display())))
}

fn ingest(a: IngestArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let settings = a.store.settings()?;
    let engine = settings.open_engine()?;
    let persons_path = a
        .persons
        .clone()
        .or_else(|| a.file.parent().map(|d| d.join(PERSONS_FILE)).filter(|p| p.exists()));
    if let Some(path) = persons_path {
        let persons: Vec<Person> = read_records(&path)?;
        let report = engine.store().put_persons(persons).map_err(EngineError::from)?;
        writeln!(out, "persons: {} ingested, {} skipped", report.ingested, report.skipped)?;
        for r in &report.rejections {
            writeln!(err, "person record {} ({}) rejected: {}", r.index + 1, r.transaction_id, violations(&r.violations))?;
        }
    }
    let events: Vec<Transaction> = read_records(&a.file)?;
    let outcome = engine.ingest_events(events)?;
    writeln!(
        out,
        "transactions: {} ingested, {} skipped, {} rejected",
        outcome.report.ingested,
        outcome.report.skipped,
        outcome.report.rejections.len()
    )?;
    writeln!(out, "alerts created: {}", outcome.alerts.len())?;
    for r in &outcome.report.rejections {
        writeln!(err, "record {} ({}) rejected: {}", r.index + 1, r.transaction_id, violations(&r.violations))?;
    }
    if outcome.report.rejections.is_empty() {
        Ok(())
    } else {
        Err(CliError::failure(format!(
            "{} transaction records rejected",
            outcome.report.rejections.len()
        )))
    }
}

fn violations(v: &[katriage::model::Violation]) -> String {
    v.iter()
        .map(|v| format!("{}: {}", v.field, v.message))
        .collect::<Vec<_>>()
        .join("; ")
}

fn serve(a: ServeArgs, err: &mut dyn Write) -> Result<(), CliError> {
    let mut settings = a.store.settings()?;
    if let Some(listen) = a.listen {
        settings.listen = listen;
    }
    let engine = settings.open_engine()?;
    let state = api::AppState {
        engine,
        api_token: settings.api_token.clone(),
        rules_path: settings.rules.clone(),
    };
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(&settings.listen).await?;
        writeln!(err, "listening on {}", listener.local_addr()?)?;
        api::serve(listener, api::router(state)).await
    })?;
    Ok(())
}

fn label<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

/// Summary text with highlighted spans wrapped in `**`.
pub fn marked_text(doc: &SummaryDoc) -> String {
    let mut s = String::with_capacity(doc.text.len() + doc.highlights.len() * 4);
    let mut at = 0;
    for h in &doc.highlights {
        s.push_str(&doc.text[at..h.start]);
        s.push_str("**");
        s.push_str(&doc.text[h.start..h.end]);
        s.push_str("**");
        at = h.end;
    }
    s.push_str(&doc.text[at..]);
    s
}

/// Plain-text triage report: overview then one summary per area.
pub fn render_triage(engine: &Engine, alert_id: &str, mode: Option<SummaryMode>) -> Result<String, EngineError> {
    let o = engine.overview(alert_id)?;
    let docs = engine.summaries(alert_id, mode)?;
    let t = &o.transaction;
    let p = &o.person;
    let mut s = String::new();
    let _ = writeln!(s, "Alert {} ({})", o.alert.alert_id, label(&o.alert.status));
    if let Some(d) = o.alert.decision {
        let _ = writeln!(s, "Decision: {}", label(&d));
    }
    let _ = writeln!(
        s,
        "Transaction {} at {}: {} {} {} {} with {} ({}) in {}, {}",
        t.transaction_id,
        t.timestamp.format("%Y-%m-%d %H:%M:%S UTC"),
        label(&t.direction),
        label(&t.channel),
        t.amount,
        t.currency,
        t.counterpart_name,
        t.counterpart_country,
        t.city,
        t.country
    );
    let _ = writeln!(s, "Person {} {}, age {}, country {}", p.person_id, p.name, p.age, p.country);
    let _ = writeln!(s, "Event score {:.2}", o.event_score);
    let _ = writeln!(s);
    let _ = writeln!(s, "Knowledge areas:");
    let width = o.entries.iter().map(|e| e.ka.as_str().len()).max().unwrap_or(0);
    for e in &o.entries {
        let mark = if e.risky { "[!]" } else { "[ ]" };
        let central = if e.ka == o.central_ka { " (central)" } else { "" };
        let _ = writeln!(
            s,
            "  {mark} {:<width$}  score {:.2}  {}{central}",
            e.ka.as_str(),
            e.score,
            e.label
        );
    }
    for (e, doc) in o.entries.iter().zip(&docs) {
        let _ = writeln!(s);
        let state = if e.risky { "risky" } else { "clear" };
        let _ = writeln!(s, "== {} [{state}] ==", e.label);
        let _ = writeln!(s, "{}", marked_text(doc));
    }
    Ok(s)
}

pub fn render_alerts(engine: &Engine, status: Option<AlertStatus>, limit: Option<usize>) -> String {
    let mut alerts = engine.store().alerts();
    alerts.retain(|a| status.is_none_or(|s| a.status == s));
    alerts.sort_by(|a, b| (b.created_at, &b.alert_id).cmp(&(a.created_at, &a.alert_id)));
    alerts.truncate(limit.unwrap_or(usize::MAX));
    let mut s = String::new();
    for a in alerts {
        let assessment = engine.store().assessment(&a.alert_id);
        let score = assessment.as_ref().map_or(0.0, |x| x.event_score());
        let flagged: Vec<String> = assessment
            .map(|x| x.flagged_areas().iter().map(|k| k.as_str().to_string()).collect())
            .unwrap_or_default();
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{:.2}\t{}",
            a.alert_id,
            a.created_at.format("%Y-%m-%dT%H:%M:%SZ"),
            label(&a.status),
            score,
            flagged.join(",")
        );
    }
    s
}
