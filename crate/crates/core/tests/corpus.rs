mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::spec;
use proptest::prelude::*;
use puzzlegen_core::corpus::*;
use puzzlegen_core::pipeline::{generate_batch, GenerateOptions};
use puzzlegen_core::rng::RngStream;
use puzzlegen_core::spec::{Config, PuzzleTemplate};
use serde_json::Value as Json;

fn feat(sym: usize, cond: usize, len: usize, vs: Option<f64>) -> DifficultyFeatures {
    DifficultyFeatures {
        sym_num: sym,
        cond_num: cond,
        desc_len: len,
        var_scale: vs,
        score: None,
    }
}

#[test]
fn adjusted_values_and_endpoints() {
    assert_eq!(adjusted_value(3.0, 3.0, 10.0, 1), Some(0.0));
    assert_eq!(adjusted_value(10.0, 3.0, 10.0, 1), Some(1.0));
    let hat = 0.3;
    assert_eq!(adjusted_value(hat, 0.0, 1.0, -1), Some(1.0 - hat));
    assert_eq!(adjusted_value(5.0, 5.0, 5.0, 1), None);
    assert_eq!(adjusted_value(5.0, 1.0, 9.0, 0), None);
    assert_eq!(var_scale(&[]), None);
    assert_eq!(var_scale(&[0.0, 1.0]), Some(0.5));
}

#[test]
fn minimal_and_maximal_instances_score_zero_and_one() {
    let corpus = vec![feat(4, 3, 100, Some(0.0)), feat(9, 7, 400, Some(1.0)), feat(6, 5, 250, Some(0.4))];
    let (scores, bounds) = difficulty_score(&corpus);
    assert_eq!(scores[0], 0.0);
    assert_eq!(scores[1], 1.0);
    assert!(scores[2] > 0.0 && scores[2] < 1.0);
    assert_eq!(bounds.sym_num, (4.0, 9.0));
    let pair = vec![feat(1, 1, 1, None), feat(2, 2, 2, None)];
    assert_eq!(difficulty_score(&pair).0, vec![0.0, 1.0]);
    let constant = vec![feat(3, 3, 3, None), feat(3, 3, 3, None)];
    assert_eq!(difficulty_score(&constant).0, vec![0.0, 0.0]);
}

#[test]
fn missing_var_scale_averages_three_features() {
    let corpus = vec![feat(0, 0, 0, Some(0.0)), feat(10, 10, 10, Some(1.0)), feat(10, 0, 0, None)];
    let (scores, _) = difficulty_score(&corpus);
    assert!((scores[2] - 1.0 / 3.0).abs() < 1e-12);
}

#[test]
fn histogram_has_twenty_bins() {
    let csv = histogram_csv(&[0.0, 0.04, 0.05, 0.99, 1.0]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "bin_start,bin_end,count");
    assert_eq!(lines.len(), 21);
    assert!(lines[1].ends_with(",2") && lines[2].ends_with(",1") && lines[20].ends_with(",2"));
}

fn arb_features() -> impl Strategy<Value = DifficultyFeatures> {
    (0usize..200, 0usize..80, 0usize..5000, proptest::option::of(0.0f64..=1.0)).prop_map(|(s, c, l, v)| feat(s, c, l, v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn scores_lie_in_the_unit_interval(corpus in proptest::collection::vec(arb_features(), 1..60)) {
        let (scores, _) = difficulty_score(&corpus);
        prop_assert_eq!(scores.len(), corpus.len());
        for s in scores {
            prop_assert!((0.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn more_conditions_never_lower_a_score(
        corpus in proptest::collection::vec(arb_features(), 2..40),
        pick in any::<prop::sample::Index>(),
        extra in 1usize..50,
    ) {
        let i = pick.index(corpus.len());
        let before = difficulty_score(&corpus).0[i];
        let mut bumped = corpus.clone();
        bumped[i].cond_num += extra;
        let after = difficulty_score(&bumped).0[i];
        prop_assert!(after >= before - 1e-12, "{} -> {}", before, after);
    }

    #[test]
    fn partitions_are_disjoint_exhaustive_and_deterministic(
        sizes in proptest::collection::vec((0usize..120, 0usize..60), 1..6),
        seed in any::<u64>(),
    ) {
        let mut items = Vec::new();
        for (s, (normal, hard)) in sizes.iter().enumerate() {
            for k in 0..*normal {
                items.push(ScoredItem { id: format!("s{s}-n{k}"), source: format!("s{s}"), score: 0.25 });
            }
            for k in 0..*hard {
                items.push(ScoredItem { id: format!("s{s}-h{k}"), source: format!("s{s}"), score: 0.75 });
            }
        }
        let ids: Vec<String> = items.iter().map(|i| i.id.clone()).collect();
        let plan = partition(&items, seed);
        prop_assert!(plan_is_exact(&plan, &ids));
        prop_assert_eq!(&plan, &partition(&items, seed));
    }
}

#[test]
fn full_scale_partition_sizes() {
    let mut items = Vec::new();
    let mut rng = RngStream::new(1, 0);
    for s in 0..86 {
        for k in 0..1000 {
            let score = if k < 100 { 0.6 + 0.4 * rng.float_in(0.0, 1.0) } else { 0.5 * rng.float_in(0.0, 1.0) };
            items.push(ScoredItem {
                id: format!("seed{s}-{k:04}"),
                source: format!("seed{s}"),
                score,
            });
        }
    }
    let plan = partition(&items, 2024);
    assert_eq!(plan.split("sft").len(), 4300);
    assert_eq!(plan.split("rl_val").len(), 860);
    assert!(plan.warnings.is_empty());
    let ids: Vec<String> = items.iter().map(|i| i.id.clone()).collect();
    assert!(plan_is_exact(&plan, &ids));
    for counts in plan.per_source.values() {
        assert!(counts["test"].abs_diff(100) <= 1);
    }
}

#[test]
fn missing_hard_instances_fall_back_to_normal() {
    let items: Vec<ScoredItem> = (0..100)
        .map(|k| ScoredItem {
            id: format!("n{k}"),
            source: "only".into(),
            score: 0.1,
        })
        .collect();
    let plan = partition(&items, 3);
    assert_eq!(plan.split("test").len(), 10);
    assert_eq!(plan.split("sft").len(), 50);
    assert_eq!(plan.split("rl_val").len(), 10);
    assert_eq!(plan.split("rl_train").len(), 30);
    let small: Vec<ScoredItem> = items[..20].to_vec();
    let plan = partition(&small, 3);
    assert_eq!(plan.warnings.len(), 1);
    assert_eq!(plan.split("test").len(), 2);
}

fn key(source: &str, text: &str) -> DedupKey {
    DedupKey {
        source: source.into(),
        digest: Fingerprint::of(text),
        canonical: Some(text.into()),
    }
}

#[test]
fn dedup_keeps_first_occurrences_and_is_idempotent() {
    let mut keys = Vec::new();
    for i in 0..1000 {
        keys.push(key("vase", &format!("c{}", i % 322)));
    }
    keys.push(key("wine", "c1"));
    let (kept, report) = dedup(&keys);
    assert_eq!(kept.len(), 323);
    assert_eq!(report.per_source["vase"], 678);
    assert!(!report.per_source.contains_key("wine"));
    assert_eq!(kept[..3], [0, 1, 2]);
    let unique: Vec<DedupKey> = kept.iter().map(|&i| keys[i].clone()).collect();
    let (again, report2) = dedup(&unique);
    assert_eq!(again.len(), unique.len());
    assert!(report2.is_empty());
    assert_eq!(report.to_csv(), "source,duplicates\nvase,678\n");
}

#[test]
fn digest_collisions_are_rechecked_against_canonical_text() {
    let d = Fingerprint::of("same");
    let keys = vec![
        DedupKey { source: "s".into(), digest: d, canonical: Some("a".into()) },
        DedupKey { source: "s".into(), digest: d, canonical: Some("b".into()) },
        DedupKey { source: "s".into(), digest: d, canonical: Some("a".into()) },
    ];
    let (kept, report) = dedup(&keys);
    assert_eq!(kept, vec![0, 1]);
    assert_eq!(report.total(), 1);
    let fp = Fingerprint::of("x");
    assert_eq!(Fingerprint::parse(&fp.to_string()), Some(fp));
    assert_eq!(fp.to_string().len(), 32);
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

/// Replace every string that a nominal variable produced.
fn rename_nominal(c: &Config, t: &PuzzleTemplate) -> Config {
    let mut names = BTreeSet::new();
    for v in nominal_variables(t) {
        strings(&c.variable_values[&v], &mut names);
    }
    let map: BTreeMap<String, String> = names.into_iter().map(|s| (s.clone(), format!("Renamed {s}"))).collect();
    let mut j = c.to_json();
    for field in ["variable_values", "symbol_params", "condition_params", "query_params"] {
        rename(&mut j[field], &map);
    }
    Config::from_json(j).unwrap()
}

fn configs(name: &str, n: usize) -> (PuzzleTemplate, Vec<Config>) {
    let t = spec(name);
    let opts = GenerateOptions {
        retry_budget: 400,
        ..GenerateOptions::default()
    };
    let batch = generate_batch(&t, n, 99, &opts).unwrap();
    (t, batch.instances.into_iter().map(|i| i.config).collect())
}

#[test]
fn renaming_nominal_values_keeps_fingerprints() {
    for name in ["hamburger", "vase", "graduation", "exam"] {
        let (t, cs) = configs(name, 25);
        assert!(!nominal_variables(&t).is_empty());
        for c in &cs {
            let renamed = rename_nominal(c, &t);
            assert_ne!(&renamed, c);
            assert_eq!(canonical_fingerprint(&renamed, &t), canonical_fingerprint(c, &t), "{name}");
        }
    }
}

#[test]
fn changing_a_substantive_variable_changes_the_fingerprint() {
    for name in ["hamburger", "vase", "graduation", "exam", "wine"] {
        let (t, cs) = configs(name, 20);
        let nominal = nominal_variables(&t);
        for c in &cs {
            let base = canonical_fingerprint(c, &t);
            for (v, val) in &c.variable_values {
                if nominal.contains(v) {
                    continue;
                }
                let mut changed = c.clone();
                let bumped = match val {
                    Json::Number(n) if n.is_i64() => Json::from(n.as_i64().unwrap() + 1),
                    Json::Number(n) => Json::from(n.as_f64().unwrap() + 0.5),
                    other => Json::String(format!("{other}!")),
                };
                changed.variable_values.insert(v.clone(), bumped);
                assert_ne!(canonical_fingerprint(&changed, &t), base, "{name}.{v}");
            }
        }
    }
}

#[test]
fn permuting_unordered_selections_keeps_fingerprints() {
    let mut t = spec("graduation");
    for c in t.conditions.iter_mut().filter(|c| c.name == "cond1") {
        c.selection.as_mut().unwrap().order = Some(vec![false]);
    }
    let opts = GenerateOptions::default();
    let batch = generate_batch(&t, 40, 5, &opts).unwrap();
    let mut rng = RngStream::new(8, 0);
    for inst in &batch.instances {
        let c = &inst.config;
        let base = canonical_fingerprint(c, &t);
        let mut permuted = c.clone();
        for list in permuted.condition_params.values_mut() {
            rng.shuffle(list);
        }
        for p in permuted.condition_params.get_mut("cond1").unwrap() {
            let idx = &mut p.indices.as_mut().unwrap()[0][0];
            idx.reverse();
        }
        assert_eq!(canonical_fingerprint(&permuted, &t), base);

        let mut ordered = c.clone();
        let cond2 = ordered.condition_params.get_mut("cond2").unwrap();
        cond2[0].indices.as_mut().unwrap()[0][0].reverse();
        assert_ne!(canonical_fingerprint(&ordered, &t), base, "order=true selections are ordered");
    }
}

#[test]
fn positional_instances_keep_their_order() {
    let (t, cs) = configs("vase", 10);
    let mut checked = 0;
    for c in &cs {
        let speeches = &c.symbol_params["speeches_s"];
        let Some(j) = (1..speeches.len()).find(|&j| speeches[j] != speeches[0]) else {
            continue;
        };
        let mut swapped = c.clone();
        swapped.symbol_params.get_mut("speeches_s").unwrap().swap(0, j);
        assert_ne!(canonical_fingerprint(&swapped, &t), canonical_fingerprint(c, &t), "who says what matters");
        checked += 1;
    }
    assert!(checked > 0);
}
