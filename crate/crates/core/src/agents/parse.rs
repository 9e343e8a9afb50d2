//! Parsers for the structured trailer lines agents are asked to emit.
//!
//! Every function here is total: arbitrary model output yields a defined
//! value, never a panic.

use std::sync::LazyLock;

use regex::Regex;

use crate::model::{AuthorshipLabel, Leaning};

static VERDICT_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*VERDICT:\s*(HUMAN|MACHINE)\b").unwrap());
static CONFIDENCE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*CONFIDENCE:\s*([01](?:\.\d+)?)\b").unwrap());
static LEANING_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*LEANING:\s*(HUMAN|MACHINE|UNCERTAIN)\b").unwrap());

/// Finds the last `VERDICT:` line and the last `CONFIDENCE:` line.
///
/// Confidence outside [0, 1] is dropped rather than clamped.
pub fn parse_verdict(raw: &str) -> Option<(AuthorshipLabel, Option<f64>)> {
    let label = raw.lines().rev().find_map(|line| {
        VERDICT_RE.captures(line).map(|c| {
            if c[1].eq_ignore_ascii_case("machine") {
                AuthorshipLabel::Machine
            } else {
                AuthorshipLabel::Human
            }
        })
    })?;
    let confidence = raw
        .lines()
        .rev()
        .find_map(|line| CONFIDENCE_RE.captures(line))
        .and_then(|c| c[1].parse::<f64>().ok())
        .filter(|v| (0.0..=1.0).contains(v));
    Some((label, confidence))
}

/// Last `LEANING:` line wins; absent means Uncertain.
pub fn parse_leaning(raw: &str) -> Leaning {
    raw.lines()
        .rev()
        .find_map(|line| LEANING_RE.captures(line))
        .map(|c| match c[1].to_ascii_uppercase().as_str() {
            "HUMAN" => Leaning::Human,
            "MACHINE" => Leaning::Machine,
            _ => Leaning::Uncertain,
        })
        .unwrap_or(Leaning::Uncertain)
}

/// Response text with LEANING trailer lines removed.
pub(crate) fn strip_leaning_lines(raw: &str) -> String {
    raw.lines()
        .filter(|line| !LEANING_RE.is_match(line))
        .collect::<Vec<_>>()
        .join("\n")
        .trim()
        .to_string()
}
