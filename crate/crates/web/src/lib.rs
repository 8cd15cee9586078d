//! Browser bindings: generate puzzles, grade predictions and compute the
//! saturation curve from a spec text.
//!
//! The plain Rust functions carry the logic and are tested natively; the
//! `#[wasm_bindgen]` wrappers only convert errors for JavaScript.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wasm_bindgen::prelude::*;

use puzzlegen_core::corpus::saturation_curve;
use puzzlegen_core::pipeline::{generate_batch, GenerateOptions};
use puzzlegen_core::qa::grade_prediction;
use puzzlegen_core::record::{read_jsonl, DatasetRecord};
use puzzlegen_core::spec::{parse_spec_named, validate_spec, PuzzleTemplate, Severity};

/// Resamples allowed per output slot; the bundled specs with strict answer
/// assertions need well above the CLI default.
const RETRY_BUDGET: usize = 400;

const BUNDLED: [(&str, &str); 7] = [
    ("hamburger", include_str!("../../core/specs/hamburger.spec")),
    ("graduation", include_str!("../../core/specs/graduation.spec")),
    ("vase", include_str!("../../core/specs/vase.spec")),
    ("vase-small", include_str!("../../core/specs/vase-small.spec")),
    ("wine", include_str!("../../core/specs/wine.spec")),
    ("product", include_str!("../../core/specs/product.spec")),
    ("exam", include_str!("../../core/specs/exam.spec")),
];

/// Failures surfaced to the page.
#[derive(Debug, Error)]
pub enum WebError {
    #[error(transparent)]
    Core(#[from] puzzlegen_core::Error),
    #[error("spec has errors: {0}")]
    InvalidSpec(String),
    #[error("predictions line {line}: {message}")]
    Prediction { line: usize, message: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Names of the specs shipped with the demo.
pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

/// Text of a bundled spec.
pub fn bundled_text(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

fn load(spec_text: &str, spec_id: &str) -> Result<PuzzleTemplate, WebError> {
    let t = parse_spec_named(spec_text, spec_id)?;
    let errors: Vec<String> =
        validate_spec(&t).into_iter().filter(|d| d.severity == Severity::Error).map(|d| d.to_string()).collect();
    if errors.is_empty() {
        Ok(t)
    } else {
        Err(WebError::InvalidSpec(errors.join("; ")))
    }
}

fn options() -> GenerateOptions {
    GenerateOptions {
        retry_budget: RETRY_BUDGET,
        jobs: 1,
        ..GenerateOptions::default()
    }
}

/// Generate `count` instances and return them as JSONL records.
pub fn generate_jsonl(spec_text: &str, spec_id: &str, count: usize, seed: u64) -> Result<String, WebError> {
    let t = load(spec_text, spec_id)?;
    let batch = generate_batch(&t, count, seed, &options())?;
    let mut out = String::new();
    for inst in &batch.instances {
        out.push_str(&serde_json::to_string(&inst.to_record(None)?)?);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Deserialize)]
struct Prediction {
    id: String,
    #[serde(alias = "prediction")]
    answer: String,
}

/// Grade of one gold record.
#[derive(Debug, Serialize, PartialEq)]
pub struct GradeRow {
    pub id: String,
    pub correct: bool,
    pub unparseable: bool,
    pub missing: bool,
}

/// Accuracy over a gold set.
#[derive(Debug, Serialize, PartialEq)]
pub struct GradeSummary {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub rows: Vec<GradeRow>,
}

/// Grade JSONL predictions (`{"id", "answer"}`) against JSONL gold records.
pub fn grade_jsonl(predictions: &str, gold: &str) -> Result<GradeSummary, WebError> {
    let mut preds = HashMap::new();
    for (i, line) in predictions.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let p: Prediction = serde_json::from_str(line).map_err(|e| WebError::Prediction {
            line: i + 1,
            message: e.to_string(),
        })?;
        preds.insert(p.id, p.answer);
    }
    let records: Vec<DatasetRecord> = read_jsonl(gold)?;
    let rows: Vec<GradeRow> = records
        .iter()
        .map(|r| match preds.get(&r.id) {
            None => GradeRow {
                id: r.id.clone(),
                correct: false,
                unparseable: false,
                missing: true,
            },
            Some(p) => {
                let g = grade_prediction(p, &r.answers);
                GradeRow {
                    id: r.id.clone(),
                    correct: g.correct,
                    unparseable: g.unparseable,
                    missing: false,
                }
            }
        })
        .collect();
    let correct = rows.iter().filter(|r| r.correct).count();
    Ok(GradeSummary {
        total: rows.len(),
        correct,
        accuracy: if rows.is_empty() { 0.0 } else { correct as f64 / rows.len() as f64 },
        rows,
    })
}

/// Unique-instance curve `(generated, unique)` over `count` generations.
pub fn saturation_points(
    spec_text: &str,
    spec_id: &str,
    count: usize,
    seed: u64,
    every: usize,
) -> Result<Vec<(usize, usize)>, WebError> {
    let t = load(spec_text, spec_id)?;
    let batch = generate_batch(&t, count, seed, &options())?;
    let fps: Vec<_> = batch.instances.iter().map(|i| i.fingerprint).collect();
    Ok(saturation_curve(&fps, every))
}

fn js(e: WebError) -> JsError {
    JsError::new(&e.to_string())
}

/// JSON array of bundled spec names.
#[wasm_bindgen(js_name = bundledSpecs)]
pub fn bundled_specs_js() -> String {
    serde_json::to_string(&bundled_names()).unwrap_or_default()
}

/// Text of a bundled spec, or an empty string.
#[wasm_bindgen(js_name = bundledSpec)]
pub fn bundled_spec_js(name: &str) -> String {
    bundled_text(name).unwrap_or_default().to_string()
}

/// JSONL of `count` generated instances.
#[wasm_bindgen(js_name = generate)]
pub fn generate_js(spec_text: &str, spec_id: &str, count: usize, seed: u64) -> Result<String, JsError> {
    generate_jsonl(spec_text, spec_id, count, seed).map_err(js)
}

/// JSON grade summary.
#[wasm_bindgen(js_name = grade)]
pub fn grade_js(predictions: &str, gold: &str) -> Result<String, JsError> {
    let summary = grade_jsonl(predictions, gold).map_err(js)?;
    serde_json::to_string(&summary).map_err(|e| js(e.into()))
}

/// JSON array of `[generated, unique]` pairs.
#[wasm_bindgen(js_name = saturation)]
pub fn saturation_js(spec_text: &str, spec_id: &str, count: usize, seed: u64, every: usize) -> Result<String, JsError> {
    let points = saturation_points(spec_text, spec_id, count, seed, every).map_err(js)?;
    serde_json::to_string(&points).map_err(|e| js(e.into()))
}
