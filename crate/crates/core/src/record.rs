//! One emitted puzzle as a JSONL line.

use serde::{Deserialize, Serialize};

use crate::corpus::DifficultyFeatures;
use crate::error::{Error, Result};
use crate::qa::AnswerRecord;
use crate::spec::{Config, EvalType};

/// A scalar for single-query puzzles, a list otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn from_vec(mut v: Vec<T>) -> Self {
        if v.len() == 1 {
            OneOrMany::One(v.remove(0))
        } else {
            OneOrMany::Many(v)
        }
    }
}

/// One dataset line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetRecord {
    pub id: String,
    pub source: String,
    pub qtype: OneOrMany<String>,
    pub eval_type: OneOrMany<EvalType>,
    pub question: String,
    /// Answer text; per-query answers joined by `; ` for multi-query puzzles.
    pub answer: String,
    pub answers: Vec<AnswerRecord>,
    pub config: Config,
    /// Canonical config digest.
    pub fingerprint: String,
    pub difficulty: DifficultyFeatures,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt: Option<String>,
}

impl DatasetRecord {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("records serialize")
    }

    pub fn from_line(line: &str) -> Result<DatasetRecord> {
        serde_json::from_str(line).map_err(|e| Error::Schema(format!("dataset record: {e}")))
    }
}

/// Parse a whole JSONL document, skipping blank lines.
pub fn read_jsonl(text: &str) -> Result<Vec<DatasetRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| DatasetRecord::from_line(l).map_err(|e| Error::Schema(format!("line {}: {e}", i + 1))))
        .collect()
}

/// Answer text of a multi-query puzzle.
pub fn join_answers(answers: &[AnswerRecord]) -> String {
    answers.iter().map(|a| a.rendered.as_str()).collect::<Vec<_>>().join("; ")
}

/// `EvalType` name helper for reports.
pub fn eval_type_names(e: &OneOrMany<EvalType>) -> String {
    match e {
        OneOrMany::One(t) => t.name().to_string(),
        OneOrMany::Many(v) => v.iter().map(|t| t.name()).collect::<Vec<_>>().join("|"),
    }
}
