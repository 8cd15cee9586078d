//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines appear in order
//! under `cargo test`. Failures are reported in the summary line; set
//! `ACCEPTANCE_STRICT=1` to also exit non-zero on any failure.
//! `ACCEPTANCE_ONLY=<n>` runs a single criterion.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use puzzlegen_core::corpus::{
    adjusted_value, canonical_fingerprint, difficulty_score, nominal_variables, partition, plan_is_exact, uses_index,
    DifficultyFeatures, ScoredItem,
};
use puzzlegen_core::pipeline::{generate_batch, generate_one, GenerateOptions};
use puzzlegen_core::rng::RngStream;
use puzzlegen_core::spec::{parse_spec_named, serialize_spec, Config, PuzzleTemplate};
use puzzlegen_core::verify::{brute_force_verify, condition_names, negate_condition};
use serde_json::Value as Json;

const BUNDLED: [&str; 6] = ["hamburger", "graduation", "vase", "wine", "product", "exam"];

fn specs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/specs")
}

fn spec_path(name: &str) -> PathBuf {
    specs_dir().join(format!("{name}.spec"))
}

fn spec(name: &str) -> PuzzleTemplate {
    parse_spec_named(&std::fs::read_to_string(spec_path(name)).unwrap(), name).unwrap()
}

fn puzzlegen(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_puzzlegen")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// Instances whose symbols are all Boolean and at most this many.
const ORACLE_MAX_SYMBOLS: usize = 20;

fn oracle_equivalence() -> Outcome {
    // Wine and product declare integer symbols, so only the Boolean specs qualify.
    let boolean_specs = ["hamburger", "graduation", "vase", "exam"];
    let per_spec = 125;
    let opts = GenerateOptions {
        retry_budget: 400,
        ..GenerateOptions::default()
    };
    let mut verified = 0;
    let mut failures = Vec::new();
    let mut options = 0;
    for name in boolean_specs {
        let t = spec(name);
        let (mut found, mut job) = (0, 0u64);
        while found < per_spec && job < 5000 {
            let inst = match generate_one(&t, RngStream::new(500, job), &opts) {
                Ok(i) => i,
                Err(e) => {
                    failures.push(format!("{name}#{job}: {e}"));
                    job += 1;
                    continue;
                }
            };
            job += 1;
            match brute_force_verify(&t, &inst.config, ORACLE_MAX_SYMBOLS) {
                Ok(None) => {}
                Ok(Some(r)) => {
                    found += 1;
                    options += r.options_checked;
                    if r.ok() {
                        verified += 1;
                    } else {
                        failures.push(format!("{name} {}: {r:?}", inst.id));
                    }
                }
                Err(e) => failures.push(format!("{name} {}: {e}", inst.id)),
            }
        }
    }
    let total = per_spec * boolean_specs.len();
    outcome(
        verified == total && failures.is_empty(),
        format!(
            "{verified}/{total} instances (<= {ORACLE_MAX_SYMBOLS} Boolean symbols; hamburger, graduation, vase, exam) match the truth table; {options} option labels re-derived{}",
            if failures.is_empty() { String::new() } else { format!("; failures: {:?}", &failures[..failures.len().min(3)]) }
        ),
    )
}

fn seed_reproduction(tmp: &Path) -> Outcome {
    let seeds = specs_dir().join("seeds");
    let (mut passed, mut detected, mut mutants, mut undetected) = (0, 0, 0, Vec::new());
    for name in BUNDLED {
        let config = seeds.join(format!("{name}.config"));
        let gold = seeds.join(format!("{name}.gold"));
        let out = puzzlegen(&["reproduce", "--spec", s(&spec_path(name)), "--config", s(&config), "--gold", s(&gold)]);
        if out.status.success() {
            passed += 1;
        }
        let t = spec(name);
        let mut all = true;
        for cond in condition_names(&t) {
            mutants += 1;
            let dir = tmp.join(format!("mut-{name}-{cond}"));
            std::fs::create_dir_all(&dir).unwrap();
            let path = dir.join(format!("{name}.spec"));
            std::fs::write(&path, serialize_spec(&negate_condition(&t, &cond).unwrap())).unwrap();
            let out = puzzlegen(&["reproduce", "--spec", s(&path), "--config", s(&config), "--gold", s(&gold)]);
            if out.status.code() == Some(2) {
                continue;
            }
            all = false;
            undetected.push(format!("{name}.{cond}"));
        }
        if all {
            detected += 1;
        }
    }
    outcome(
        passed == 6 && detected == 6,
        format!(
            "{passed}/6 seeds reproduce; {detected}/6 specs detect every negated condition ({}/{mutants} mutants){}",
            mutants - undetected.len(),
            if undetected.is_empty() { String::new() } else { format!("; undetected {undetected:?}") }
        ),
    )
}

fn curve(path: &Path) -> Vec<(usize, usize)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let (a, b) = l.split_once(',').unwrap();
            (a.parse().unwrap(), b.parse().unwrap())
        })
        .collect()
}

fn unique_at(c: &[(usize, usize)], n: usize) -> usize {
    c.iter().find(|(g, _)| *g == n).map(|(_, u)| *u).unwrap()
}

fn saturation(tmp: &Path) -> Outcome {
    let n = 10_000;
    let mut curves = Vec::new();
    for name in ["vase-small", "vase"] {
        let out = tmp.join(format!("{name}.csv"));
        let r = puzzlegen(&[
            "saturation", "--spec", s(&spec_path(name)), "--count", &n.to_string(), "--seed", "1", "--out", s(&out),
            "--retry-budget", "64",
        ]);
        if !r.status.success() {
            return outcome(false, format!("{name}: saturation run failed: {}", String::from_utf8_lossy(&r.stderr)));
        }
        curves.push(curve(&out));
    }
    let monotone = curves.iter().all(|c| c.windows(2).all(|w| w[1].1 >= w[0].1));
    let (small, wide) = (&curves[0], &curves[1]);
    let (u_small, u_wide) = (unique_at(small, n), unique_at(wide, n));
    let tail = |c: &[(usize, usize)]| (unique_at(c, n) - unique_at(c, n * 9 / 10)) as f64 / (n / 10) as f64;
    let (m_small, m_wide) = (tail(small), tail(wide));
    let pass = monotone && (2500..=4000).contains(&u_small) && m_small < 0.01 && u_wide > u_small && m_wide >= 0.01;
    outcome(
        pass,
        format!(
            "p_num [3,5]: {u_small} unique of {n}, final-10% marginal {:.2}%; p_num [3,10]: {u_wide} unique, marginal {:.2}% (target [2500,4000] and < 1%, then larger and >= 1%)",
            m_small * 100.0,
            m_wide * 100.0
        ),
    )
}

fn feat(rng: &mut RngStream) -> DifficultyFeatures {
    DifficultyFeatures {
        sym_num: rng.int_in(0, 300) as usize,
        cond_num: rng.int_in(0, 100) as usize,
        desc_len: rng.int_in(0, 5000) as usize,
        var_scale: if rng.index(4) == 0 { None } else { Some(rng.float_in(0.0, 1.0)) },
        score: None,
    }
}

fn difficulty_formula() -> Outcome {
    let f = |a, b, c, d| DifficultyFeatures {
        sym_num: a,
        cond_num: b,
        desc_len: c,
        var_scale: Some(d),
        score: None,
    };
    let (scores, _) = difficulty_score(&[f(1, 1, 10, 0.0), f(5, 9, 90, 1.0), f(3, 4, 50, 0.5)]);
    let endpoints = scores[0] == 0.0 && scores[1] == 1.0;
    let mut complement = true;
    for k in 0..=100 {
        let hat = k as f64 / 100.0;
        complement &= adjusted_value(hat, 0.0, 1.0, -1) == Some(1.0 - hat);
        complement &= adjusted_value(hat, 0.0, 1.0, 1) == Some(hat);
    }
    complement &= adjusted_value(3.0, 3.0, 10.0, 1) == Some(0.0) && adjusted_value(10.0, 3.0, 10.0, 1) == Some(1.0);
    let mut rng = RngStream::new(4, 0);
    let mut in_range = 0;
    for _ in 0..100 {
        let n = 1 + rng.index(200);
        let corpus: Vec<_> = (0..n).map(|_| feat(&mut rng)).collect();
        if difficulty_score(&corpus).0.iter().all(|s| (0.0..=1.0).contains(s)) {
            in_range += 1;
        }
    }
    outcome(
        endpoints && complement && in_range == 100,
        format!("endpoints exact: {endpoints}; complement identity exact: {complement}; {in_range}/100 random corpora in [0,1]"),
    )
}

fn partitioning() -> Outcome {
    let mut rng = RngStream::new(5, 0);
    let mut items = Vec::new();
    for seed in 0..86 {
        let hard = 25 + rng.index(200);
        for k in 0..1000 {
            let score = if k < hard { rng.float_in(0.5001, 1.0) } else { rng.float_in(0.0, 0.5) };
            items.push(ScoredItem {
                id: format!("s{seed:02}-{k:04}"),
                source: format!("s{seed:02}"),
                score,
            });
        }
    }
    let plan = partition(&items, 42);
    let ids: Vec<String> = items.iter().map(|i| i.id.clone()).collect();
    let exact = plan_is_exact(&plan, &ids);
    let test_ok = plan.per_source.values().all(|c| c["test"].abs_diff(100) <= 1);
    let (sft, val) = (plan.split("sft").len(), plan.split("rl_val").len());
    outcome(
        sft == 4300 && val == 860 && exact && test_ok,
        format!("|SFT| = {sft}, |RL-val| = {val}; disjoint and exhaustive: {exact}; per-seed test = 10% +/- 1: {test_ok}"),
    )
}

fn strings(v: &Json, out: &mut BTreeSet<String>) {
    match v {
        Json::String(s) => {
            out.insert(s.clone());
        }
        Json::Array(xs) => xs.iter().for_each(|x| strings(x, out)),
        Json::Object(m) => m.values().for_each(|x| strings(x, out)),
        _ => {}
    }
}

fn rename(v: &mut Json, map: &BTreeMap<String, String>) {
    match v {
        Json::String(s) => {
            if let Some(n) = map.get(s.as_str()) {
                *s = n.clone();
            }
        }
        Json::Array(xs) => xs.iter_mut().for_each(|x| rename(x, map)),
        Json::Object(m) => m.values_mut().for_each(|x| rename(x, map)),
        _ => {}
    }
}

fn renamed(c: &Config, t: &PuzzleTemplate) -> Config {
    let mut names = BTreeSet::new();
    for v in nominal_variables(t) {
        strings(&c.variable_values[&v], &mut names);
    }
    let map: BTreeMap<String, String> = names.into_iter().map(|s| (s.clone(), format!("{s} II"))).collect();
    let mut j = c.to_json();
    for field in ["variable_values", "symbol_params", "condition_params", "query_params"] {
        rename(&mut j[field], &map);
    }
    Config::from_json(j).unwrap()
}

/// Shuffle order-free instance lists and reverse every order=false selection.
fn permuted(c: &Config, t: &PuzzleTemplate, rng: &mut RngStream) -> (Config, usize) {
    let mut out = c.clone();
    let mut reversed = 0;
    for (name, list) in out.condition_params.iter_mut() {
        let decl = t.condition(name).unwrap();
        if !uses_index(decl) {
            rng.shuffle(list);
        }
        let sel = decl.selection.as_ref().unwrap();
        for p in list.iter_mut() {
            for entry in p.indices.as_mut().unwrap() {
                for (src, idx) in entry.iter_mut().enumerate() {
                    if !sel.ordered(src) && idx.len() > 1 {
                        idx.reverse();
                        reversed += 1;
                    }
                }
            }
        }
    }
    (out, reversed)
}

fn dedup_semantics() -> Outcome {
    let mut unordered_graduation = spec("graduation");
    for c in unordered_graduation.conditions.iter_mut().filter(|c| c.name == "cond1") {
        c.selection.as_mut().unwrap().order = Some(vec![false]);
    }
    let templates = [spec("hamburger"), unordered_graduation, spec("vase-small"), spec("exam")];
    let opts = GenerateOptions {
        retry_budget: 400,
        ..GenerateOptions::default()
    };
    let mut rng = RngStream::new(6, 0);
    let (mut configs, mut rename_ok, mut perm_ok, mut change_ok, mut changes, mut reversals) = (0, 0, 0, 0, 0, 0);
    for t in &templates {
        let batch = match generate_batch(t, 250, 66, &opts) {
            Ok(b) => b,
            Err(e) => return outcome(false, format!("{}: {e}", t.id)),
        };
        let nominal = nominal_variables(t);
        for inst in batch.instances {
            let c = &inst.config;
            configs += 1;
            let base = canonical_fingerprint(c, t);
            rename_ok += usize::from(canonical_fingerprint(&renamed(c, t), t) == base);
            let (p, r) = permuted(c, t, &mut rng);
            reversals += r;
            perm_ok += usize::from(canonical_fingerprint(&p, t) == base);
            for (v, val) in &c.variable_values {
                if nominal.contains(v) {
                    continue;
                }
                let mut changed = c.clone();
                let bumped = match val {
                    Json::Number(n) if n.is_i64() => Json::from(n.as_i64().unwrap() + 1),
                    Json::Number(n) => Json::from(n.as_f64().unwrap() + 0.5),
                    other => Json::String(format!("{other}*")),
                };
                changed.variable_values.insert(v.clone(), bumped);
                changes += 1;
                change_ok += usize::from(canonical_fingerprint(&changed, t) != base);
            }
        }
    }
    outcome(
        rename_ok == configs && perm_ok == configs && change_ok == changes && configs == 1000,
        format!(
            "{configs} configs: renaming keeps {rename_ok}/{configs}; permuting keeps {perm_ok}/{configs} ({reversals} unordered picks reversed); substantive edits change {change_ok}/{changes}"
        ),
    )
}

fn determinism(tmp: &Path) -> Outcome {
    let run = |tag: &str, jobs: &str| -> Option<Vec<u8>> {
        let out = tmp.join(format!("det-{tag}.jsonl"));
        let r = puzzlegen(&[
            "generate", "--spec", s(&spec_path("hamburger")), "--count", "100", "--seed", "42", "--out", s(&out), "--jobs", jobs,
        ]);
        r.status.success().then(|| std::fs::read(&out).unwrap())
    };
    let (Some(a), Some(b), Some(one), Some(eight)) = (run("a", "1"), run("b", "1"), run("j1", "1"), run("j8", "8")) else {
        return outcome(false, "generate failed".into());
    };
    let lines = a.iter().filter(|&&b| b == b'\n').count();
    outcome(
        a == b && one == eight && lines == 100,
        format!("two runs byte-identical: {}; --jobs 1 vs --jobs 8 identical: {}; {lines} lines", a == b, one == eight),
    )
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        ("oracle equivalence", Box::new(oracle_equivalence)),
        ("seed reproduction", Box::new(|| seed_reproduction(tmp.path()))),
        ("saturation", Box::new(|| saturation(tmp.path()))),
        ("difficulty formula", Box::new(difficulty_formula)),
        ("partitioning", Box::new(partitioning)),
        ("dedup semantics", Box::new(dedup_semantics)),
        ("determinism", Box::new(|| determinism(tmp.path()))),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|v| v.parse().ok());
    let (mut failed, mut passed) = (0, 0);
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if only.is_some_and(|o| o != n) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!o.pass);
        passed += usize::from(o.pass);
        println!("criterion {n} ({name}): {verdict} | {} | {:.1}s", o.detail, start.elapsed().as_secs_f64());
    }
    if only.is_none_or(|o| o == 8) {
        println!("criterion 8 (LLM training results): EXCLUDED | model training and evaluation are outside this artifact");
    }
    println!("acceptance summary: {passed} passed, {failed} failed, 1 excluded");
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
