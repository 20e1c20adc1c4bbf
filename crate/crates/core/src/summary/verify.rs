use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::areas::{Fact, FactValue};
use crate::countries;

/// Relative tolerance for numbers written with a different precision.
const REL_TOLERANCE: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    Number,
    Date,
    Entity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimViolation {
    pub kind: ClaimKind,
    pub claim: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub ok: bool,
    pub violations: Vec<ClaimViolation>,
}

/// Checks every number, date and named entity of `text` against `facts`.
pub fn detect_hallucinations(text: &str, facts: &[Fact]) -> Verification {
    let mut masked: Vec<u8> = text.as_bytes().to_vec();
    mask_text_facts(text, facts, &mut masked);

    let mut violations = Vec::new();
    check_dates(text, facts, &mut masked, &mut violations);
    check_numbers(&masked, facts, &mut violations);
    check_entities(&masked, &mut violations);

    violations.sort_by_key(|v| v.start);
    Verification {
        ok: violations.is_empty(),
        violations,
    }
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b >= 0x80
}

/// Blanks out whole-word occurrences of text facts (and the country names of
/// country-code facts) so they are not read as claims.
fn mask_text_facts(text: &str, facts: &[Fact], masked: &mut [u8]) {
    let mut needles: Vec<String> = Vec::new();
    for f in facts {
        if let FactValue::Text(s) = &f.value {
            let s = s.trim();
            if s.is_empty() {
                continue;
            }
            needles.push(s.to_string());
            if let Some(name) = countries::name(s) {
                needles.push(name.to_string());
            }
        }
    }
    needles.sort_by_key(|n| std::cmp::Reverse(n.len()));
    let bytes = text.as_bytes();
    for needle in &needles {
        let nb = needle.as_bytes();
        let mut from = 0;
        while let Some(pos) = text[from..].find(needle.as_str()) {
            let start = from + pos;
            let end = start + nb.len();
            let left_ok = start == 0
                || !is_word_byte(bytes[start - 1])
                || !is_word_byte(nb[0]);
            let right_ok = end == bytes.len()
                || !is_word_byte(bytes[end])
                || !is_word_byte(nb[nb.len() - 1]);
            if left_ok && right_ok {
                masked[start..end].fill(b' ');
            }
            from = start + needle.chars().next().map_or(1, char::len_utf8);
        }
    }
}

fn check_dates(text: &str, facts: &[Fact], masked: &mut [u8], out: &mut Vec<ClaimViolation>) {
    let dates: Vec<NaiveDate> = facts
        .iter()
        .filter_map(|f| match f.value {
            FactValue::Date(d) => Some(d),
            _ => None,
        })
        .collect();
    let n = masked.len();
    let mut i = 0;
    while i + 10 <= n {
        let w = &masked[i..i + 10];
        let shape = w.iter().enumerate().all(|(k, b)| match k {
            4 | 7 => *b == b'-',
            _ => b.is_ascii_digit(),
        });
        let left = i == 0 || !is_word_byte(masked[i - 1]);
        let right = i + 10 == n || !masked[i + 10].is_ascii_digit();
        if shape && left && right {
            let s = &text[i..i + 10];
            let ok = NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .map(|d| dates.contains(&d))
                .unwrap_or(false);
            if !ok {
                out.push(ClaimViolation {
                    kind: ClaimKind::Date,
                    claim: s.to_string(),
                    start: i,
                    end: i + 10,
                });
            }
            masked[i..i + 10].fill(b' ');
            i += 10;
        } else {
            i += 1;
        }
    }
}

struct NumberToken {
    start: usize,
    end: usize,
    value: f64,
    integral: bool,
}

/// Numeric tokens with optional sign, currency symbol, thousands separators,
/// fraction and percent sign. Numbers glued to letters (ids, units) are skipped.
fn number_tokens(s: &[u8]) -> Vec<NumberToken> {
    const SYMBOLS: [&[u8]; 3] = ["€".as_bytes(), b"$", "£".as_bytes()];
    let symbol_at = |i: usize| -> usize {
        SYMBOLS
            .iter()
            .find(|sym| s[i..].starts_with(sym))
            .map_or(0, |sym| sym.len())
    };

    let mut out = Vec::new();
    let n = s.len();
    let mut i = 0;
    while i < n {
        let start = i;
        let mut j = i;
        let negative = s[j] == b'-';
        if negative {
            j += 1;
        }
        if j < n {
            j += symbol_at(j);
        }
        if j >= n || !s[j].is_ascii_digit() {
            i += 1;
            continue;
        }
        if negative && j == i + 1 && start > 0 && is_word_byte(s[start - 1]) {
            // a hyphen inside a word, not a sign
            i = j;
            continue;
        }
        let glued_left = start > 0 && (is_word_byte(s[start - 1]) || s[start - 1] == b'.');
        let digits_start = j;
        while j < n && s[j].is_ascii_digit() {
            j += 1;
        }
        // thousands separators: only groups of exactly three digits
        if j - digits_start <= 3 {
            while j + 3 < n
                && s[j] == b','
                && s[j + 1..j + 4].iter().all(u8::is_ascii_digit)
                && (j + 4 == n || !s[j + 4].is_ascii_digit())
            {
                j += 4;
            }
        }
        let mut integral = true;
        if j + 1 < n && s[j] == b'.' && s[j + 1].is_ascii_digit() {
            integral = false;
            j += 1;
            while j < n && s[j].is_ascii_digit() {
                j += 1;
            }
        }
        let glued_right = j < n
            && (is_word_byte(s[j]) || (s[j] == b'.' && j + 1 < n && s[j + 1].is_ascii_digit()));
        if j < n && s[j] == b'%' {
            integral = false;
            j += 1;
        }
        if glued_left || glued_right {
            while j < n && (is_word_byte(s[j]) || s[j] == b'.' && j + 1 < n && s[j + 1].is_ascii_digit()) {
                j += 1;
            }
            i = j;
            continue;
        }
        let literal: String = s[digits_start..j]
            .iter()
            .filter(|b| b.is_ascii_digit() || **b == b'.')
            .map(|b| *b as char)
            .collect();
        if let Ok(v) = literal.parse::<f64>() {
            out.push(NumberToken {
                start,
                end: j,
                value: if negative { -v } else { v },
                integral,
            });
        }
        i = j;
    }
    out
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= REL_TOLERANCE * a.abs().max(b.abs())
}

fn check_numbers(masked: &[u8], facts: &[Fact], out: &mut Vec<ClaimViolation>) {
    let mut integers: Vec<f64> = Vec::new();
    let mut reals: Vec<f64> = Vec::new();
    for f in facts {
        match &f.value {
            FactValue::Integer(i) => integers.push(*i as f64),
            FactValue::Amount(m) => reals.push(m.to_f64()),
            FactValue::Decimal(d) => reals.push(*d),
            _ => {}
        }
        if let Some(c) = &f.comparative {
            reals.push(c.current);
            reals.push(c.baseline);
        }
    }
    for tok in number_tokens(masked) {
        let v = tok.value;
        let matches_int = integers.iter().any(|x| *x == v || *x == v.abs() || -*x == v);
        let matches_real = reals.iter().any(|x| close(*x, v) || close(x.abs(), v.abs()));
        let ok = if tok.integral {
            matches_int || matches_real
        } else {
            matches_real || integers.iter().any(|x| close(*x, v) || close(x.abs(), v.abs()))
        };
        if !ok {
            out.push(ClaimViolation {
                kind: ClaimKind::Number,
                claim: String::from_utf8_lossy(&masked[tok.start..tok.end]).into_owned(),
                start: tok.start,
                end: tok.end,
            });
        }
    }
}

/// Capitalised word sequences left after masking are entities the facts do
/// not mention. The first word of a sentence is ordinary capitalisation
/// unless it is an acronym or a country.
fn check_entities(masked: &[u8], out: &mut Vec<ClaimViolation>) {
    let text = String::from_utf8_lossy(masked);
    let words = words(&text);
    let mut k = 0;
    while k < words.len() {
        let (ws, we) = words[k];
        if !is_capitalised(&text[ws..we]) {
            k += 1;
            continue;
        }
        // extend over capitalised words separated by single spaces
        let mut last = k;
        while last + 1 < words.len() {
            let (ns, ne) = words[last + 1];
            let gap = &text[words[last].1..ns];
            if (gap == " " || gap == "-") && is_capitalised(&text[ns..ne]) {
                last += 1;
            } else {
                break;
            }
        }
        let mut first = k;
        if sentence_start(&text, ws) {
            let w = &text[ws..we];
            let suspicious = is_acronym(w) || countries::code_for_name(w).is_some();
            if !suspicious {
                first += 1;
            }
        }
        while first <= last && text[words[first].0..words[first].1] == *"I" {
            first += 1;
        }
        if first <= last {
            let (s, _) = words[first];
            let (_, e) = words[last];
            out.push(ClaimViolation {
                kind: ClaimKind::Entity,
                claim: text[s..e].to_string(),
                start: s,
                end: e,
            });
        }
        k = last + 1;
    }
}

fn words(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        let part = c.is_alphanumeric() || (c == '\'' && start.is_some());
        match (part, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                out.push((s, i));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        out.push((s, text.len()));
    }
    out
}

fn is_capitalised(w: &str) -> bool {
    w.chars().next().is_some_and(char::is_uppercase)
}

fn is_acronym(w: &str) -> bool {
    w.chars().count() >= 2 && w.chars().all(char::is_uppercase)
}

fn sentence_start(text: &str, at: usize) -> bool {
    match text[..at].trim_end().chars().last() {
        None => true,
        Some(c) => matches!(c, '.' | '!' | '?' | '\n' | '"' | '\u{201c}'),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::money::Money;
    use crate::registry::KaId;

    fn facts() -> Vec<Fact> {
        let ka = KaId::ACTIVITY;
        vec![
            Fact::new(&ka, "name", "Name", FactValue::Text("Maria Silva".into())),
            Fact::new(&ka, "country", "Country", FactValue::Text("PT".into())),
            Fact::new(&ka, "age", "Age", FactValue::Integer(43)),
            Fact::new(&ka, "amount", "Amount", FactValue::Amount(Money::from_cents(123_456))),
            Fact::new(&ka, "share", "Share", FactValue::Decimal(12.5)),
            Fact::new(&ka, "net", "Net", FactValue::Amount(Money::from_cents(-6_000))),
            Fact::new(
                &ka,
                "opened",
                "Opened",
                FactValue::Date(NaiveDate::from_ymd_opt(2020, 1, 15).unwrap()),
            ),
        ]
    }

    fn ok(text: &str) -> bool {
        detect_hallucinations(text, &facts()).ok
    }

    #[test]
    fn faithful_text_passes() {
        assert!(ok("Maria Silva is 43 years old and lives in Portugal (PT)."));
        assert!(ok("She paid €1,234.56, or 1234.56, which is 12.5% of it."));
        assert!(ok("The account was opened on 2020-01-15."));
        assert!(ok("The net flow was -60.00 and about 1235."));
    }

    #[test]
    fn wrong_numbers_fail() {
        assert!(!ok("Maria Silva is 34 years old."));
        assert!(!ok("The amount was 1300.00."));
        assert!(!ok("Share of 14%."));
    }

    #[test]
    fn wrong_dates_fail() {
        assert!(!ok("Opened on 2020-01-16."));
        assert!(!ok("Opened on 2020-13-40."));
    }

    #[test]
    fn unknown_entities_fail() {
        assert!(!ok("Maria Silva moved to Spain."));
        assert!(!ok("Spain is far."));
        assert!(!ok("She sent money to John Doe."));
        assert!(!ok("The counterpart is in FR."));
        assert!(ok("The person lives in Portugal."));
    }

    #[test]
    fn ids_and_words_with_digits_are_not_claims() {
        assert!(ok("The feature txn_count_90d and the z-score."));
        assert!(!ok("The card K10 was used."));
    }

    #[test]
    fn violations_carry_offsets() {
        let text = "She is 34 years old.";
        let v = detect_hallucinations(text, &facts());
        assert_eq!(v.violations.len(), 1);
        let c = &v.violations[0];
        assert_eq!(&text[c.start..c.end], "34");
        assert_eq!(c.kind, ClaimKind::Number);
    }
}
