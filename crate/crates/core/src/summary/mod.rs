//! Per-area natural-language summaries with risk highlights.
//!
//! The LLM path builds a prompt from the facts, asks the model for a
//! paragraph, strips the risk markers into byte-offset highlights and checks
//! every number, date and entity against the facts. Anything that does not
//! check out is replaced by [`UNAVAILABLE_TEXT`]. The template path renders
//! fixed sentences straight from the facts.

mod llm;
mod prompt;
mod template;
mod verify;

use serde::{Deserialize, Serialize};

use crate::areas::KnowledgeAreaView;
use crate::registry::KaId;
use crate::risk::RiskReport;

pub use llm::{GenerationError, HttpLanguageModel, LanguageModel, LlmGateway, LlmOptions};
pub use prompt::{build_prompt, Prompt};
pub use template::generate_template;
pub use verify::{detect_hallucinations, ClaimViolation, Verification};

pub const UNAVAILABLE_TEXT: &str = "Summary not available";
pub const RISK_OPEN: &str = "<risk>";
pub const RISK_CLOSE: &str = "</risk>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HighlightKind {
    Risk,
}

/// Byte range `[start, end)` of the summary text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Highlight {
    pub start: usize,
    pub end: usize,
    pub kind: HighlightKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Llm,
    Template,
    Unavailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMode {
    #[default]
    LlmWithFallback,
    TemplateOnly,
}

impl std::str::FromStr for SummaryMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "llm" | "llm_with_fallback" => Ok(SummaryMode::LlmWithFallback),
            "template" | "template_only" => Ok(SummaryMode::TemplateOnly),
            other => Err(format!("unknown summary mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDoc {
    pub ka: KaId,
    pub text: String,
    pub highlights: Vec<Highlight>,
    pub verified: bool,
    pub generator: Generator,
}

impl SummaryDoc {
    pub fn unavailable(ka: KaId) -> Self {
        SummaryDoc {
            ka,
            text: UNAVAILABLE_TEXT.to_string(),
            highlights: Vec::new(),
            verified: false,
            generator: Generator::Unavailable,
        }
    }

    /// Substrings covered by the highlights, in order.
    pub fn highlighted(&self) -> Vec<&str> {
        self.highlights
            .iter()
            .map(|h| &self.text[h.start..h.end])
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkerError(pub String);

/// Removes `<risk>` markers and returns the plain text with the marked ranges.
pub fn strip_markers(raw: &str) -> Result<(String, Vec<Highlight>), MarkerError> {
    let mut text = String::with_capacity(raw.len());
    let mut highlights = Vec::new();
    let mut open: Option<usize> = None;
    let mut rest = raw;
    while !rest.is_empty() {
        if let Some(r) = rest.strip_prefix(RISK_OPEN) {
            if open.is_some() {
                return Err(MarkerError("nested risk marker".into()));
            }
            open = Some(text.len());
            rest = r;
        } else if let Some(r) = rest.strip_prefix(RISK_CLOSE) {
            let start = open.take().ok_or_else(|| MarkerError("unopened risk marker".into()))?;
            if start < text.len() {
                highlights.push(Highlight {
                    start,
                    end: text.len(),
                    kind: HighlightKind::Risk,
                });
            }
            rest = r;
        } else {
            let c = rest.chars().next().unwrap();
            text.push(c);
            rest = &rest[c.len_utf8()..];
        }
    }
    if open.is_some() {
        return Err(MarkerError("unclosed risk marker".into()));
    }
    Ok((text, highlights))
}

/// Summary of one area. With an LLM gateway the model output is verified and
/// replaced by the sentinel when a claim does not match the facts; if the
/// model cannot be reached the template is used instead.
pub fn summarize(
    view: &KnowledgeAreaView,
    report: &RiskReport,
    mode: SummaryMode,
    llm: Option<&LlmGateway>,
) -> SummaryDoc {
    let gateway = match (mode, llm) {
        (SummaryMode::LlmWithFallback, Some(g)) => g,
        _ => return generate_template(view, report),
    };
    let prompt = build_prompt(view, report);
    let raw = match gateway.generate(&prompt) {
        Ok(raw) => raw,
        Err(_) => return generate_template(view, report),
    };
    verified_llm_doc(view, report, &raw)
}

/// Turns raw model output into a summary, or the sentinel if it fails checks.
pub fn verified_llm_doc(view: &KnowledgeAreaView, report: &RiskReport, raw: &str) -> SummaryDoc {
    let Ok((text, highlights)) = strip_markers(raw.trim()) else {
        return SummaryDoc::unavailable(view.ka.clone());
    };
    if text.trim().is_empty() || !detect_hallucinations(&text, &view.facts).ok {
        return SummaryDoc::unavailable(view.ka.clone());
    }
    SummaryDoc {
        ka: view.ka.clone(),
        text,
        // highlights only make sense on a flagged area
        highlights: if report.flagged { highlights } else { Vec::new() },
        verified: true,
        generator: Generator::Llm,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn markers_become_byte_ranges() {
        let (text, hl) = strip_markers("Paid <risk>900.00 EUR</risk> today.").unwrap();
        assert_eq!(text, "Paid 900.00 EUR today.");
        assert_eq!(hl.len(), 1);
        assert_eq!(&text[hl[0].start..hl[0].end], "900.00 EUR");
    }

    #[test]
    fn unbalanced_markers_are_rejected() {
        assert!(strip_markers("<risk>a").is_err());
        assert!(strip_markers("a</risk>").is_err());
        assert!(strip_markers("<risk><risk>a</risk></risk>").is_err());
    }

    #[test]
    fn mode_parses() {
        assert_eq!("template".parse::<SummaryMode>().unwrap(), SummaryMode::TemplateOnly);
        assert!("x".parse::<SummaryMode>().is_err());
    }
}
