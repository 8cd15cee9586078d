//! Subcommand implementations.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::Deserialize;

use puzzlegen_core::corpus::{self, DedupKey, Fingerprint, ScoredItem};
use puzzlegen_core::pipeline::{self, GenerateOptions, PuzzleInstance};
use puzzlegen_core::qa::{self, grade_answer};
use puzzlegen_core::record::{read_jsonl, DatasetRecord};
use puzzlegen_core::render::WrapperSet;
use puzzlegen_core::solver::SolveOptions;
use puzzlegen_core::spec::{parse_config, parse_spec_named, validate_spec, Config, PuzzleTemplate, Severity};
use puzzlegen_core::Error as CoreError;

use crate::error::CliError;
use crate::output::Outputs;
use crate::GenArgs;

/// Environment variable selecting the solver backend.
pub const SOLVER_ENV: &str = "PUZZLEGEN_SOLVER";

/// Only the bundled finite-domain backend exists; any other request is unavailable.
pub fn check_solver() -> Result<(), CliError> {
    match std::env::var(SOLVER_ENV) {
        Ok(v) if !matches!(v.as_str(), "" | "builtin" | "fd") => Err(CoreError::SolverUnavailable(format!(
            "{SOLVER_ENV}={v}: only the builtin finite-domain backend is available"
        ))
        .into()),
        _ => Ok(()),
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn spec_id(path: &Path) -> String {
    path.file_stem().map_or_else(|| "spec".to_string(), |s| s.to_string_lossy().into_owned())
}

/// Parse a spec file, named after its file stem, rejecting error diagnostics.
fn load_spec(path: &Path) -> Result<PuzzleTemplate, CliError> {
    let t = parse_spec_named(&read(path)?, &spec_id(path))?;
    let diags = validate_spec(&t);
    for d in &diags {
        log::warn!("{}: {d}", path.display());
    }
    if let Some(d) = diags.iter().find(|d| d.severity == Severity::Error) {
        return Err(CoreError::Schema(format!("{}: {d}", path.display())).into());
    }
    Ok(t)
}

fn load_records(path: &Path) -> Result<Vec<DatasetRecord>, CliError> {
    read_jsonl(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn gen_options(gen: &GenArgs) -> GenerateOptions {
    GenerateOptions {
        retry_budget: gen.retry_budget,
        solve: SolveOptions {
            timeout_ms: gen.timeout_ms,
            ..SolveOptions::default()
        },
        jobs: gen.jobs,
    }
}

fn jsonl(records: impl IntoIterator<Item = String>) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

pub fn generate(
    spec: &Path,
    count: usize,
    seed: u64,
    out: &Path,
    wrappers: Option<&Path>,
    gen: &GenArgs,
) -> Result<(), CliError> {
    let t = load_spec(spec)?;
    let wrappers: Option<WrapperSet> = match wrappers {
        Some(p) => Some(serde_json::from_str(&read(p)?).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?),
        None => None,
    };
    let mut outputs = Outputs::new();
    let batch = pipeline::generate_batch(&t, count, seed, &gen_options(gen))?;
    let lines = batch
        .instances
        .iter()
        .map(|i| i.to_record(wrappers.as_ref()).map(|r| r.to_line()))
        .collect::<Result<Vec<_>, _>>()?;
    outputs.stage(out, jsonl(lines).as_bytes())?;
    outputs.commit()?;
    let summary = serde_json::json!({
        "generated": batch.instances.len(),
        "attempts": batch.stats.attempts,
        "failures": batch.stats.failures,
    });
    eprintln!("{summary}");
    Ok(())
}

/// Gold answers keyed by query name.
fn load_gold(path: &Path, t: &PuzzleTemplate) -> Result<BTreeMap<String, String>, CliError> {
    let text = read(path)?;
    if let Ok(map) = serde_json::from_str::<BTreeMap<String, String>>(&text) {
        return Ok(map);
    }
    match t.queries.as_slice() {
        [q] => Ok(BTreeMap::from([(q.name.clone(), text.trim().to_string())])),
        _ => Err(CliError::Input(format!(
            "{}: plain-text gold needs a single-query spec; use a JSON object keyed by query name",
            path.display()
        ))),
    }
}

fn emit_record(inst: &PuzzleInstance, out: Option<&Path>) -> Result<(), CliError> {
    let line = inst.to_record(None)?.to_line();
    match out {
        Some(p) => {
            let mut outputs = Outputs::new();
            outputs.stage(p, jsonl([line]).as_bytes())?;
            outputs.commit()
        }
        None => {
            println!("{line}");
            Ok(())
        }
    }
}

pub fn reproduce(
    spec: &Path,
    config: &Path,
    gold: Option<&Path>,
    original: Option<&Path>,
    randomize: &[String],
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let t = load_spec(spec)?;
    let c: Config = parse_config(&read(config)?)?;
    let gold = gold.map(|g| load_gold(g, &t)).transpose()?;
    if original.is_none() && randomize.is_empty() {
        if let Some(gold) = &gold {
            let report = pipeline::validate_seed(&t, &c, gold);
            println!("{}", serde_json::to_string(&report).expect("reports serialize"));
            if !report.pass {
                let failed: Vec<&str> = report.checks.iter().filter(|c| !c.pass).map(|c| c.query.as_str()).collect();
                return Err(CliError::Validation(match &report.error {
                    Some(e) => e.clone(),
                    None => format!("answers differ for {}", failed.join(", ")),
                }));
            }
            if out.is_some() {
                emit_record(&pipeline::reproduce_from_config(&t, &c)?, out)?;
            }
            return Ok(());
        }
        return emit_record(&pipeline::reproduce_from_config(&t, &c)?, out);
    }
    let orig = match original {
        Some(p) => load_spec(p)?,
        None => t.clone(),
    };
    let inst = pipeline::rephrase(&orig, &t, &c, randomize, seed)?;
    if let Some(gold) = &gold {
        for a in &inst.answers {
            let Some(expected) = gold.get(&a.query_name) else {
                return Err(CliError::Validation(format!("no gold for query `{}`", a.query_name)));
            };
            if !grade_answer(expected, a).correct {
                return Err(CliError::Validation(format!(
                    "query `{}`: expected {expected}, computed {}",
                    a.query_name, a.rendered
                )));
            }
        }
    }
    emit_record(&inst, out)
}

pub fn dedup(inputs: &[std::path::PathBuf], out: &Path, report: &Path, specs: &[std::path::PathBuf]) -> Result<(), CliError> {
    let mut templates = HashMap::new();
    for p in specs {
        let t = load_spec(p)?;
        templates.insert(t.id.clone(), t);
    }
    let mut lines = Vec::new();
    let mut keys = Vec::new();
    for path in inputs {
        for (i, line) in read(path)?.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let r = DatasetRecord::from_line(line)
                .map_err(|e| CliError::Input(format!("{} line {}: {e}", path.display(), i + 1)))?;
            let key = match templates.get(&r.source) {
                Some(t) => {
                    let canonical = corpus::canonical_form(&r.config, t).to_string();
                    DedupKey {
                        source: r.source.clone(),
                        digest: Fingerprint::of(&canonical),
                        canonical: Some(canonical),
                    }
                }
                None => DedupKey {
                    source: r.source.clone(),
                    digest: Fingerprint::parse(&r.fingerprint).ok_or_else(|| {
                        CliError::Input(format!("{} line {}: bad fingerprint `{}`", path.display(), i + 1, r.fingerprint))
                    })?,
                    canonical: None,
                },
            };
            keys.push(key);
            lines.push(line.to_string());
        }
    }
    let (kept, dups) = corpus::dedup(&keys);
    let mut outputs = Outputs::new();
    outputs.stage(out, jsonl(kept.iter().map(|&i| lines[i].clone())).as_bytes())?;
    outputs.stage(report, dups.to_csv().as_bytes())?;
    outputs.commit()?;
    eprintln!("{}", serde_json::json!({ "input": lines.len(), "unique": kept.len(), "duplicates": dups.total() }));
    Ok(())
}

pub fn score(input: &Path, out: &Path, hist: &Path) -> Result<(), CliError> {
    let mut records = load_records(input)?;
    if records.len() < 2 {
        log::warn!("scoring {} record(s): min-max normalization needs a spread", records.len());
    }
    let features: Vec<_> = records.iter().map(|r| r.difficulty.clone()).collect();
    let (scores, bounds) = corpus::difficulty_score(&features);
    for (r, s) in records.iter_mut().zip(&scores) {
        r.difficulty.score = Some(*s);
    }
    let sidecar = serde_json::json!({ "records": records.len(), "bounds": bounds });
    let mut sidecar_path = out.as_os_str().to_owned();
    sidecar_path.push(".bounds.json");
    let mut outputs = Outputs::new();
    outputs.stage(out, jsonl(records.iter().map(DatasetRecord::to_line)).as_bytes())?;
    outputs.stage(hist, corpus::histogram_csv(&scores).as_bytes())?;
    outputs.stage(Path::new(&sidecar_path), (serde_json::to_string_pretty(&sidecar).unwrap() + "\n").as_bytes())?;
    outputs.commit()
}

pub fn partition(input: &Path, seed: u64, out_dir: &Path) -> Result<(), CliError> {
    let text = read(input)?;
    let records = read_jsonl(&text).map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
    let mut lines: HashMap<&str, String> = HashMap::new();
    let mut items = Vec::with_capacity(records.len());
    for r in &records {
        let score = r
            .difficulty
            .score
            .ok_or_else(|| CliError::Input(format!("record {} has no score; run `score` first", r.id)))?;
        if lines.insert(&r.id, r.to_line()).is_some() {
            return Err(CliError::Input(format!("duplicate id {}", r.id)));
        }
        items.push(ScoredItem {
            id: r.id.clone(),
            source: r.source.clone(),
            score,
        });
    }
    let plan = corpus::partition(&items, seed);
    let mut outputs = Outputs::new();
    outputs.ensure_dir(out_dir)?;
    for name in corpus::SPLITS {
        let body = jsonl(plan.split(name).iter().map(|id| lines[id.as_str()].clone()));
        outputs.stage(&out_dir.join(format!("{name}.jsonl")), body.as_bytes())?;
    }
    let counts: BTreeMap<&str, usize> = corpus::SPLITS.iter().map(|s| (*s, plan.split(s).len())).collect();
    let manifest = serde_json::json!({
        "input_sha256": corpus::sha256_hex(&text),
        "seed": seed,
        "hard_threshold": corpus::HARD_THRESHOLD,
        "records": records.len(),
        "splits": counts,
        "per_source": plan.per_source,
        "warnings": plan.warnings,
    });
    outputs.stage(&out_dir.join("manifest.json"), (serde_json::to_string_pretty(&manifest).unwrap() + "\n").as_bytes())?;
    outputs.commit()
}

#[derive(Deserialize)]
struct Prediction {
    id: String,
    #[serde(alias = "prediction")]
    answer: String,
}

pub fn grade(pred: &Path, gold: &Path, out: &Path) -> Result<(), CliError> {
    let mut preds: HashMap<String, String> = HashMap::new();
    for (i, line) in read(pred)?.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let p: Prediction = serde_json::from_str(line)
            .map_err(|e| CliError::Input(format!("{} line {}: {e}", pred.display(), i + 1)))?;
        preds.insert(p.id, p.answer);
    }
    let records = load_records(gold)?;
    let known: HashSet<&str> = records.iter().map(|r| r.id.as_str()).collect();
    for id in preds.keys().filter(|id| !known.contains(id.as_str())) {
        log::warn!("prediction for unknown id {id}");
    }
    let mut csv = String::from("id,source,correct,unparseable,missing\n");
    let mut correct_total = 0;
    for r in &records {
        let (correct, unparseable, missing) = match preds.get(&r.id) {
            None => (false, false, true),
            Some(p) => {
                let g = qa::grade_prediction(p, &r.answers);
                (g.correct, g.unparseable, false)
            }
        };
        correct_total += usize::from(correct);
        csv.push_str(&format!("{},{},{correct},{unparseable},{missing}\n", r.id, r.source));
    }
    let mut outputs = Outputs::new();
    outputs.stage(out, csv.as_bytes())?;
    outputs.commit()?;
    eprintln!("{}", serde_json::json!({ "graded": records.len(), "correct": correct_total }));
    Ok(())
}

pub fn saturation(spec: &Path, count: usize, seed: u64, out: &Path, every: usize, gen: &GenArgs) -> Result<(), CliError> {
    if every == 0 {
        return Err(CliError::Input("--every must be positive".into()));
    }
    let t = load_spec(spec)?;
    let batch = pipeline::generate_batch(&t, count, seed, &gen_options(gen))?;
    let fps: Vec<_> = batch.instances.iter().map(|i| i.fingerprint).collect();
    let curve = corpus::saturation_curve(&fps, every);
    let mut csv = String::from("generated,unique\n");
    for (n, u) in &curve {
        csv.push_str(&format!("{n},{u}\n"));
    }
    let mut outputs = Outputs::new();
    outputs.stage(out, csv.as_bytes())?;
    outputs.commit()?;
    eprintln!("{}", serde_json::json!({ "generated": count, "unique": curve.last().map_or(0, |c| c.1) }));
    Ok(())
}
