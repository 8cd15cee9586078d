//! Corpus passes: fingerprints and deduplication, difficulty features and
//! scores, and stratified partitioning.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value as Json};
use sha2::{Digest, Sha256};

use crate::rng::RngStream;
use crate::spec::{Config, InstanceParams, PuzzleTemplate, VariableKind};

/// Entity-generating builtins whose outputs are labels, not content.
const NOMINAL_SOURCES: [&str; 3] = ["get_faker", "entity_fakers", "generate_letters"];

/// 128-bit digest of a canonical config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Fingerprint(pub u128);

impl fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:032x}", self.0)
    }
}

impl Fingerprint {
    pub fn of(text: &str) -> Fingerprint {
        let d = Sha256::digest(text.as_bytes());
        let mut b = [0u8; 16];
        b.copy_from_slice(&d[..16]);
        Fingerprint(u128::from_be_bytes(b))
    }

    pub fn parse(hex: &str) -> Option<Fingerprint> {
        u128::from_str_radix(hex, 16).ok().map(Fingerprint)
    }
}

/// Hex sha256 of arbitrary text.
pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Variables whose values trace back to entity generators.
pub fn nominal_variables(t: &PuzzleTemplate) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    loop {
        let before = out.len();
        for v in &t.variables {
            if let VariableKind::Formula(f) = &v.kind {
                let calls = f.expr.called_functions();
                let direct = NOMINAL_SOURCES.iter().any(|n| calls.contains(*n));
                let inherited = f.expr.free_names().iter().any(|n| out.contains(n));
                if direct || inherited {
                    out.insert(v.name.clone());
                }
            }
        }
        if out.len() == before {
            return out;
        }
    }
}

fn instance_key(p: &InstanceParams, unordered: &[bool]) -> Json {
    match &p.indices {
        Some(pick) => {
            let dims: Vec<Json> = pick
                .iter()
                .map(|entry| {
                    let per: Vec<Json> = entry
                        .iter()
                        .enumerate()
                        .map(|(s, idx)| {
                            let mut idx = idx.clone();
                            if unordered.get(s).copied().unwrap_or(false) {
                                idx.sort_unstable();
                            }
                            json!(idx)
                        })
                        .collect();
                    json!(per)
                })
                .collect();
            json!(dims)
        }
        None => p.params.clone(),
    }
}

fn sorted(mut items: Vec<Json>) -> Json {
    items.sort_by_key(|a| a.to_string());
    Json::Array(items)
}

/// Whether a condition refers to instance positions via `_index`.
pub fn uses_index(c: &crate::spec::ConditionDecl) -> bool {
    let in_desc = c.desc.iter().flat_map(|d| d.exprs()).any(|e| e.free_names().contains("_index"));
    in_desc || c.formula.expr.free_names().contains("_index")
}

/// Canonical form of a config: nominal variables dropped, unordered
/// selections sorted, and condition and option lists treated as multisets
/// unless they refer to instance positions.
pub fn canonical_form(c: &Config, t: &PuzzleTemplate) -> Json {
    let nominal = nominal_variables(t);
    let variables: BTreeMap<&String, &Json> = c.variable_values.iter().filter(|(k, _)| !nominal.contains(*k)).collect();
    let unordered_of = |sel: Option<&crate::spec::SelectionSpec>| -> Vec<bool> {
        sel.map(|s| (0..s.source.len()).map(|i| !s.ordered(i)).collect()).unwrap_or_default()
    };
    let mut symbols = BTreeMap::new();
    for (name, list) in &c.symbol_params {
        let sel = t.symbol(name).and_then(|s| match &s.kind {
            crate::spec::SymbolKind::Derived { selection, .. } => Some(selection),
            _ => None,
        });
        let un = unordered_of(sel);
        // Derived instances are addressable by position, so their order is kept.
        symbols.insert(name, Json::Array(list.iter().map(|p| instance_key(p, &un)).collect()));
    }
    let mut conditions = BTreeMap::new();
    for (name, list) in &c.condition_params {
        let decl = t.condition(name);
        let un = unordered_of(decl.and_then(|x| x.selection.as_ref()));
        let keys: Vec<Json> = list.iter().map(|p| instance_key(p, &un)).collect();
        let positional = decl.is_some_and(uses_index);
        conditions.insert(name, if positional { Json::Array(keys) } else { sorted(keys) });
    }
    let mut queries = BTreeMap::new();
    for (name, q) in &c.query_params {
        let templates = match t.query(name).map(|q| &q.kind) {
            Some(crate::spec::QueryKind::Selection { templates, .. }) => templates.as_slice(),
            _ => &[],
        };
        let opts = q
            .options
            .iter()
            .map(|o| {
                let un = unordered_of(templates.get(o.template).map(|x| &x.selection));
                let p = InstanceParams {
                    params: o.params.clone(),
                    indices: o.indices.clone(),
                };
                json!([o.template, instance_key(&p, &un)])
            })
            .collect();
        queries.insert(name, sorted(opts));
    }
    let mut out = json!({
        "spec": c.spec_id,
        "variables": variables,
        "symbols": symbols,
        "conditions": conditions,
        "queries": queries,
    });
    if t.post_generation.is_some() {
        // Frozen post-generation values identify the puzzle; the seed only stands in without them.
        if c.post_values.is_empty() {
            out["rng_seed"] = json!(c.rng_seed);
        } else {
            out["post_values"] = json!(c.post_values);
        }
    }
    out
}

/// Unique-count curve `(generated, unique)` sampled every `every` items
/// and at the last item.
pub fn saturation_curve(fingerprints: &[Fingerprint], every: usize) -> Vec<(usize, usize)> {
    let every = every.max(1);
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for (i, fp) in fingerprints.iter().enumerate() {
        seen.insert(*fp);
        let n = i + 1;
        if n % every == 0 || n == fingerprints.len() {
            out.push((n, seen.len()));
        }
    }
    out
}

/// Digest of [`canonical_form`].
pub fn canonical_fingerprint(c: &Config, t: &PuzzleTemplate) -> Fingerprint {
    Fingerprint::of(&canonical_form(c, t).to_string())
}

/// Duplicates found per source spec.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicateReport {
    pub per_source: BTreeMap<String, usize>,
}

impl DuplicateReport {
    pub fn total(&self) -> usize {
        self.per_source.values().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.per_source.is_empty()
    }

    /// `source,duplicates` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("source,duplicates\n");
        for (s, n) in &self.per_source {
            out.push_str(&format!("{s},{n}\n"));
        }
        out
    }
}

/// Dedup key of one record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DedupKey {
    pub source: String,
    pub digest: Fingerprint,
    /// Canonical text for exact comparison on digest match, when known.
    pub canonical: Option<String>,
}

/// Indices of the first occurrence of every distinct key, in input order.
pub fn dedup(keys: &[DedupKey]) -> (Vec<usize>, DuplicateReport) {
    let mut seen: HashMap<(&str, Fingerprint), Vec<Option<&str>>> = HashMap::new();
    let mut kept = Vec::new();
    let mut report = DuplicateReport::default();
    for (i, k) in keys.iter().enumerate() {
        let bucket = seen.entry((k.source.as_str(), k.digest)).or_default();
        let duplicate = bucket.iter().any(|c| match (c, &k.canonical) {
            (Some(a), Some(b)) => *a == b.as_str(),
            _ => true,
        });
        if duplicate {
            *report.per_source.entry(k.source.clone()).or_default() += 1;
        } else {
            bucket.push(k.canonical.as_deref());
            kept.push(i);
        }
    }
    (kept, report)
}

/// Raw difficulty features of one instance, plus its score once normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifficultyFeatures {
    pub sym_num: usize,
    pub cond_num: usize,
    pub desc_len: usize,
    #[serde(default)]
    pub var_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// Difficulty-adjusted normalized value of one variable.
///
/// `None` for a degenerate interval or a zero diff_factor.
pub fn adjusted_value(v: f64, lo: f64, hi: f64, diff_factor: i8) -> Option<f64> {
    if hi <= lo || diff_factor == 0 {
        return None;
    }
    let hat = (v - lo) / (hi - lo);
    Some(if diff_factor > 0 { hat } else { 1.0 - hat })
}

/// Mean of the adjusted values, `None` when empty.
pub fn var_scale(adjusted: &[f64]) -> Option<f64> {
    if adjusted.is_empty() {
        None
    } else {
        Some(adjusted.iter().sum::<f64>() / adjusted.len() as f64)
    }
}

/// Per-feature min/max over a scored corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreBounds {
    pub sym_num: (f64, f64),
    pub cond_num: (f64, f64),
    pub desc_len: (f64, f64),
    pub var_scale: Option<(f64, f64)>,
}

fn bounds(xs: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    xs.fold(None, |acc, x| match acc {
        None => Some((x, x)),
        Some((lo, hi)) => Some((lo.min(x), hi.max(x))),
    })
}

fn normalize(x: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Min-max normalize each feature over the corpus and average the available ones.
pub fn difficulty_score(features: &[DifficultyFeatures]) -> (Vec<f64>, ScoreBounds) {
    let b = ScoreBounds {
        sym_num: bounds(features.iter().map(|f| f.sym_num as f64)).unwrap_or((0.0, 0.0)),
        cond_num: bounds(features.iter().map(|f| f.cond_num as f64)).unwrap_or((0.0, 0.0)),
        desc_len: bounds(features.iter().map(|f| f.desc_len as f64)).unwrap_or((0.0, 0.0)),
        var_scale: bounds(features.iter().filter_map(|f| f.var_scale)),
    };
    let scores = features
        .iter()
        .map(|f| {
            let mut parts = vec![
                normalize(f.sym_num as f64, b.sym_num),
                normalize(f.cond_num as f64, b.cond_num),
                normalize(f.desc_len as f64, b.desc_len),
            ];
            if let (Some(v), Some(vb)) = (f.var_scale, b.var_scale) {
                parts.push(normalize(v, vb));
            }
            parts.iter().sum::<f64>() / parts.len() as f64
        })
        .collect();
    (scores, b)
}

/// Score histogram as CSV with bins of width 0.05.
pub fn histogram_csv(scores: &[f64]) -> String {
    let mut counts = [0usize; 20];
    for s in scores {
        let i = ((s / 0.05).floor() as usize).min(19);
        counts[i] += 1;
    }
    let mut out = String::from("bin_start,bin_end,count\n");
    for (i, c) in counts.iter().enumerate() {
        out.push_str(&format!("{:.2},{:.2},{c}\n", i as f64 * 0.05, (i + 1) as f64 * 0.05));
    }
    out
}

/// Difficulty threshold between normal and hard.
pub const HARD_THRESHOLD: f64 = 0.5;

/// Split names in manifest order.
pub const SPLITS: [&str; 4] = ["test", "sft", "rl_val", "rl_train"];

/// Input row for partitioning.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredItem {
    pub id: String,
    pub source: String,
    pub score: f64,
}

/// Split assignment of every instance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub seed: u64,
    /// split name to ids, in plan order.
    pub splits: BTreeMap<String, Vec<String>>,
    /// source to split name to count.
    pub per_source: BTreeMap<String, BTreeMap<String, usize>>,
    /// Sources that could not fill the SFT and validation quotas.
    pub warnings: Vec<String>,
}

impl PartitionPlan {
    pub fn split(&self, name: &str) -> &[String] {
        self.splits.get(name).map_or(&[], Vec::as_slice)
    }
}

/// Quota per category for SFT and RL validation.
pub const SFT_PER_CATEGORY: usize = 25;
pub const VAL_PER_CATEGORY: usize = 5;

fn take(pool: &mut Vec<String>, n: usize) -> Vec<String> {
    let n = n.min(pool.len());
    pool.drain(..n).collect()
}

fn source_stream(seed: u64, source: &str) -> RngStream {
    let d = Sha256::digest(source.as_bytes());
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    RngStream::new(seed, u64::from_be_bytes(b))
}

/// Per source: 10% test per category, then 25+25 SFT and 5+5 validation
/// (falling back to normal when hard runs short), rest to RL training.
pub fn partition(items: &[ScoredItem], seed: u64) -> PartitionPlan {
    let mut by_source: BTreeMap<&str, (Vec<String>, Vec<String>)> = BTreeMap::new();
    for it in items {
        let e = by_source.entry(it.source.as_str()).or_default();
        if it.score <= HARD_THRESHOLD {
            e.0.push(it.id.clone());
        } else {
            e.1.push(it.id.clone());
        }
    }
    let mut plan = PartitionPlan {
        seed,
        ..PartitionPlan::default()
    };
    for s in SPLITS {
        plan.splits.insert(s.to_string(), Vec::new());
    }
    for (source, (mut normal, mut hard)) in by_source {
        let mut rng = source_stream(seed, source);
        rng.shuffle(&mut normal);
        rng.shuffle(&mut hard);
        let test_count = |n: usize| if n == 0 { 0 } else { ((n as f64 * 0.1).round() as usize).max(1) };
        let (tn, th) = (test_count(normal.len()), test_count(hard.len()));
        let mut test = take(&mut normal, tn);
        test.extend(take(&mut hard, th));

        let quota = |per: usize, normal: &mut Vec<String>, hard: &mut Vec<String>| {
            let h = take(hard, per);
            let n = take(normal, per + (per - h.len()));
            let mut out = n;
            out.extend(h);
            out
        };
        let sft = quota(SFT_PER_CATEGORY, &mut normal, &mut hard);
        let val = quota(VAL_PER_CATEGORY, &mut normal, &mut hard);
        if sft.len() < 2 * SFT_PER_CATEGORY || val.len() < 2 * VAL_PER_CATEGORY {
            let msg = format!(
                "{source}: insufficient instances (sft {}/{}, rl_val {}/{})",
                sft.len(),
                2 * SFT_PER_CATEGORY,
                val.len(),
                2 * VAL_PER_CATEGORY
            );
            log::warn!("{msg}");
            plan.warnings.push(msg);
        }
        let mut rest = normal;
        rest.extend(hard);
        let counts = plan.per_source.entry(source.to_string()).or_default();
        for (name, ids) in [("test", test), ("sft", sft), ("rl_val", val), ("rl_train", rest)] {
            counts.insert(name.to_string(), ids.len());
            plan.splits.get_mut(name).unwrap().extend(ids);
        }
    }
    plan
}

/// Whether a plan is disjoint and covers exactly `ids`.
pub fn plan_is_exact(plan: &PartitionPlan, ids: &[String]) -> bool {
    let mut seen = BTreeSet::new();
    for list in plan.splits.values() {
        for id in list {
            if !seen.insert(id.as_str()) {
                return false;
            }
        }
    }
    seen.len() == ids.len() && ids.iter().all(|i| seen.contains(i.as_str()))
}

