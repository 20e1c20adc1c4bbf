use serde::Serialize;

use crate::areas::KnowledgeAreaView;
use crate::risk::RiskReport;

use super::{RISK_CLOSE, RISK_OPEN};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Prompt {
    pub system_context: String,
    pub fact_block: String,
    pub insight_block: String,
    pub instruction_block: String,
}

impl Prompt {
    /// The user turn sent after `system_context`.
    pub fn user_message(&self) -> String {
        format!(
            "FACTS\n{}\n\nRISK ASSESSMENT\n{}\n\nINSTRUCTIONS\n{}",
            self.fact_block, self.insight_block, self.instruction_block
        )
    }

    /// Rough token count (four characters per token).
    pub fn estimated_tokens(&self) -> usize {
        (self.system_context.len() + self.user_message().len()).div_ceil(4)
    }
}

pub fn build_prompt(view: &KnowledgeAreaView, report: &RiskReport) -> Prompt {
    let system_context = format!(
        "You assist fraud analysts reviewing an alerted financial transaction. \
         The alert is split into knowledge areas; you describe the \"{}\" area. \
         You only restate the facts you are given, in plain English.",
        view.ka
    );

    let fact_block = view
        .facts
        .iter()
        .map(|f| match &f.unit {
            Some(u) => format!("{} = {} {}", f.name, f.value, u),
            None => format!("{} = {}", f.name, f.value),
        })
        .collect::<Vec<_>>()
        .join("\n");

    let mut insight = Vec::new();
    if report.flagged {
        insight.push("This area IS flagged as suspicious.".to_string());
    } else {
        insight.push("This area is NOT flagged as suspicious.".to_string());
    }
    if !report.attributed_variables.is_empty() {
        let vars = report
            .attributed_variables
            .iter()
            .map(|a| a.feature.as_str())
            .collect::<Vec<_>>()
            .join(", ");
        insight.push(format!("Variables responsible for the risk: {vars}."));
    }
    for t in &report.triggered {
        insight.push(format!("Triggered rule: {}.", t.description));
    }
    if report.blocklist_justified {
        insight.push("The person or device is on the blocklist with this area as justification.".into());
    }

    let instruction_block = format!(
        "Write one short paragraph summarising the facts. Use only the facts listed above and \
         never introduce other numbers, dates, names or countries. Copy numbers exactly as given. \
         Wrap each phrase that shows suspicious behaviour in {RISK_OPEN} and {RISK_CLOSE}; \
         do not mark anything if the area is not flagged."
    );

    Prompt {
        system_context,
        fact_block,
        insight_block: insight.join("\n"),
        instruction_block,
    }
}
