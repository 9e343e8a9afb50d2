//! Labeled corpora in line-delimited JSON.
//!
//! One object per line: `{"id": str, "text": str, "label": 0|1, "domain": str?}`
//! with 0 = human and 1 = machine. Blank lines are skipped. Line endings inside
//! texts are normalized to LF; nothing else about the text is touched.

use std::collections::HashSet;
use std::path::Path;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;
use tracing::warn;

use crate::model::{AuthorshipLabel, TextSample};

const TOY_SOURCE: &str = include_str!("../fixtures/toy.jsonl");
pub const TOY_CORPUS_NAME: &str = "toy";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: duplicate id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: invalid label {label} (expected 0 or 1)")]
    InvalidLabel { line: usize, label: String },
    #[error("corpus has no samples")]
    EmptyCorpus,
    #[error("sample `{0}` has no gold label")]
    Unlabeled(String),
}

impl DatasetError {
    /// 1-based line number for errors tied to a line.
    pub fn line(&self) -> Option<usize> {
        match self {
            DatasetError::ParseError { line, .. }
            | DatasetError::DuplicateId { line, .. }
            | DatasetError::InvalidLabel { line, .. } => Some(*line),
            _ => None,
        }
    }
}

/// Labeled samples with unique ids. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Corpus {
    name: String,
    samples: Vec<TextSample>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, samples: Vec<TextSample>) -> Result<Self, DatasetError> {
        if samples.is_empty() {
            return Err(DatasetError::EmptyCorpus);
        }
        let mut seen = HashSet::new();
        for (i, s) in samples.iter().enumerate() {
            if s.gold_label().is_none() {
                return Err(DatasetError::Unlabeled(s.id().to_string()));
            }
            if !seen.insert(s.id()) {
                return Err(DatasetError::DuplicateId {
                    line: i + 1,
                    id: s.id().to_string(),
                });
            }
        }
        let corpus = Self {
            name: name.into(),
            samples,
        };
        for label in AuthorshipLabel::ALL {
            if corpus.count(label) == 0 {
                warn!(corpus = %corpus.name, %label, "corpus has no samples of this class");
            }
        }
        Ok(corpus)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn samples(&self) -> &[TextSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn count(&self, label: AuthorshipLabel) -> usize {
        self.samples
            .iter()
            .filter(|s| s.gold_label() == Some(label))
            .count()
    }

    pub fn golds(&self) -> Vec<AuthorshipLabel> {
        self.samples
            .iter()
            .map(|s| s.gold_label().expect("corpus samples are labeled"))
            .collect()
    }

    /// Canonical serialization; `parse_corpus` of the output yields the same samples.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            let mut obj = serde_json::Map::new();
            obj.insert("id".into(), s.id().into());
            obj.insert("text".into(), s.text().into());
            obj.insert(
                "label".into(),
                s.gold_label().expect("labeled").encode().into(),
            );
            if let Some(d) = s.domain_tag() {
                obj.insert("domain".into(), d.into());
            }
            out.push_str(&Value::Object(obj).to_string());
            out.push('\n');
        }
        out
    }

    pub fn write_jsonl(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_jsonl())
    }
}

fn parse_line(line_no: usize, line: &str) -> Result<TextSample, DatasetError> {
    let parse_err = |message: String| DatasetError::ParseError {
        line: line_no,
        message,
    };
    let value: Value = serde_json::from_str(line).map_err(|e| parse_err(e.to_string()))?;
    let obj = value
        .as_object()
        .ok_or_else(|| parse_err("expected a JSON object".into()))?;
    let string_field = |key: &str| -> Result<Option<String>, DatasetError> {
        match obj.get(key) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(other) => Err(parse_err(format!("`{key}` must be a string, got {other}"))),
        }
    };
    let id = string_field("id")?.ok_or_else(|| parse_err("missing `id`".into()))?;
    let text = string_field("text")?.ok_or_else(|| parse_err("missing `text`".into()))?;
    let domain = string_field("domain")?;
    let raw_label = obj
        .get("label")
        .ok_or_else(|| parse_err("missing `label`".into()))?;
    let label = raw_label
        .as_i64()
        .and_then(|code| AuthorshipLabel::decode(code).ok())
        .ok_or_else(|| DatasetError::InvalidLabel {
            line: line_no,
            label: raw_label.to_string(),
        })?;
    TextSample::new(id, text.replace("\r\n", "\n"), Some(label), domain)
        .map_err(|e| parse_err(e.to_string()))
}

/// Parses corpus text. Errors carry 1-based line numbers.
pub fn parse_corpus(name: impl Into<String>, source: &str) -> Result<Corpus, DatasetError> {
    let mut samples = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in source.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let sample = parse_line(i + 1, line)?;
        if !seen.insert(sample.id().to_string()) {
            return Err(DatasetError::DuplicateId {
                line: i + 1,
                id: sample.id().to_string(),
            });
        }
        samples.push(sample);
    }
    Corpus::new(name, samples)
}

/// Loads a corpus file; the corpus is named after the file stem.
pub fn load_corpus(path: &Path) -> Result<Corpus, DatasetError> {
    let source = std::fs::read_to_string(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "corpus".into());
    parse_corpus(name, &source)
}

/// Deterministic selection of up to `n_per_class` samples per class.
///
/// Algorithm: one ChaCha8 stream seeded with `seed_from_u64(seed)`. For each
/// class in label order (Human, Machine) that has more than `n_per_class`
/// members, shuffle the member positions with Fisher-Yates (for i from
/// len-1 down to 1, swap i with `next_u64() % (i + 1)`) and keep the first
/// `n_per_class`. Selected samples keep their corpus order.
pub fn subsample(corpus: &Corpus, n_per_class: usize, seed: u64) -> Corpus {
    assert!(n_per_class >= 1, "n_per_class must be at least 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = vec![false; corpus.len()];
    for label in AuthorshipLabel::ALL {
        let mut members: Vec<usize> = corpus
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.gold_label() == Some(label))
            .map(|(i, _)| i)
            .collect();
        if members.len() > n_per_class {
            for i in (1..members.len()).rev() {
                let j = (rng.next_u64() % (i as u64 + 1)) as usize;
                members.swap(i, j);
            }
            members.truncate(n_per_class);
        }
        for i in members {
            keep[i] = true;
        }
    }
    let samples = corpus
        .samples
        .iter()
        .zip(keep)
        .filter(|(_, k)| *k)
        .map(|(s, _)| s.clone())
        .collect();
    Corpus {
        name: corpus.name.clone(),
        samples,
    }
}

/// The bundled 20-sample corpus (10 human, 10 machine). Every machine text
/// carries the sentinel the toy scripted backend keys on.
pub fn make_toy_corpus() -> Corpus {
    parse_corpus(TOY_CORPUS_NAME, TOY_SOURCE).expect("bundled toy corpus is valid")
}

/// Raw bytes of the bundled toy corpus file.
pub fn toy_corpus_source() -> &'static str {
    TOY_SOURCE
}
