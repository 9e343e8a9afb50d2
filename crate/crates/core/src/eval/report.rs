//! Evaluation report schema and the plain-text comparison table.

use serde::{Deserialize, Serialize};

use super::metrics::ConfusionMatrix;
use crate::model::{AuthorshipLabel, PipelineConfig, TokenUsage, VerdictSource};

/// Key of the report section excluded from reproducibility comparisons.
pub const VOLATILE_KEY: &str = "volatile";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureKind {
    ReplayMiss,
    Auth,
    RateLimited,
    Transport,
    Api,
    MalformedResponse,
    Gateway,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub sample_id: String,
    pub stage: String,
    pub kind: FailureKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub sample_id: String,
    pub gold: AuthorshipLabel,
    pub predicted: AuthorshipLabel,
    pub confidence: Option<f64>,
    pub parse_failed: bool,
    pub source: VerdictSource,
    pub llm_calls: u64,
}

/// Run-dependent values: wall-clock timings and the backend that served
/// the run. Two replays of the same cassette differ only here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolatileSection {
    pub note: String,
    pub backend: String,
    pub avg_latency_seconds: Option<f64>,
    pub total_seconds: f64,
    pub sample_latency_seconds: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub corpus: String,
    pub label: String,
    pub config: PipelineConfig,
    pub template_digest: String,
    pub n_samples: usize,
    pub n_scored: usize,
    pub confusion: ConfusionMatrix,
    /// `None` when no sample was scored.
    pub accuracy: Option<f64>,
    pub macro_f1: Option<f64>,
    pub avg_llm_calls: Option<f64>,
    pub token_usage: TokenUsage,
    pub parse_failure_count: usize,
    pub failed_sample_ids: Vec<String>,
    pub failures: Vec<SampleFailure>,
    pub outcomes: Vec<SampleOutcome>,
    pub volatile: VolatileSection,
}

impl EvalReport {
    pub fn has_replay_miss(&self) -> bool {
        self.failures.iter().any(|f| f.kind == FailureKind::ReplayMiss)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Report JSON without the volatile section.
    pub fn stable_json(&self) -> String {
        strip_volatile(&self.to_json())
    }
}

/// Removes the volatile section from a serialized report (or a JSON array
/// of reports, or rows holding them) and re-serializes.
pub fn strip_volatile(json: &str) -> String {
    fn strip(v: &mut serde_json::Value) {
        match v {
            serde_json::Value::Object(map) => {
                map.remove(VOLATILE_KEY);
                map.values_mut().for_each(strip);
            }
            serde_json::Value::Array(items) => items.iter_mut().for_each(strip),
            _ => {}
        }
    }
    let mut v: serde_json::Value = serde_json::from_str(json).expect("valid report JSON");
    strip(&mut v);
    serde_json::to_string_pretty(&v).expect("value serializes")
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{:.2}", x * 100.0))
}

/// Fixed-column comparison table: F1 / Acc in percent, then cost columns.
pub fn render_table<'a>(title: &str, rows: impl IntoIterator<Item = (String, Result<&'a EvalReport, String>)>) -> String {
    let mut out = format!(
        "{title}\n{:<28} {:>15} {:>10} {:>8} {:>8} {:>7}\n",
        "variant", "F1 / Acc", "avg_calls", "scored", "parse_f", "failed"
    );
    for (name, report) in rows {
        match report {
            Ok(r) => out.push_str(&format!(
                "{:<28} {:>15} {:>10} {:>8} {:>8} {:>7}\n",
                name,
                format!("{} / {}", fmt_pct(r.macro_f1), fmt_pct(r.accuracy)),
                r.avg_llm_calls.map_or_else(|| "-".into(), |c| format!("{c:.2}")),
                r.n_scored,
                r.parse_failure_count,
                r.failed_sample_ids.len(),
            )),
            Err(e) => out.push_str(&format!("{name:<28} error: {e}\n")),
        }
    }
    out
}
