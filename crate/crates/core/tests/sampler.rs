mod common;

use std::collections::{BTreeSet, HashMap};

use common::spec;
use puzzlegen_core::expr::{Env, Value};
use puzzlegen_core::pipeline::{generate_one, GenerateOptions};
use puzzlegen_core::rng::RngStream;
use puzzlegen_core::sampler::*;
use puzzlegen_core::spec::{parse_spec_named, Code, SelectionSpec};

fn toy(vars: &str) -> puzzlegen_core::spec::PuzzleTemplate {
    parse_spec_named(&format!("variables:\n{vars}desc: \"x\"\n"), "toy").unwrap()
}

fn value_of(draws: &[VarDraw], name: &str) -> i64 {
    draws.iter().find(|d| d.name == name).unwrap().value.as_int().unwrap()
}

fn letters(items: &[&str]) -> Vec<Vec<Value>> {
    vec![items.iter().map(|s| Value::str(s)).collect()]
}

fn spec_over(n_sources: usize) -> SelectionSpec {
    SelectionSpec::with_sources((0..n_sources).map(|_| Code::parse("pool").unwrap()).collect())
}

#[test]
fn domain_variable_covers_its_interval() {
    let t = toy("  s_num: {type: int, domain: \"[4, 7]\"}\n");
    let mut env = Env::with_rng(RngStream::new(5, 0));
    let mut seen = BTreeSet::new();
    for _ in 0..200 * 4 {
        let draws = sample_variables(&t, &mut env, &HashMap::new()).unwrap();
        let v = value_of(&draws, "s_num");
        assert!((4..=7).contains(&v));
        assert_eq!(draws[0].interval, Some((4.0, 7.0)));
        seen.insert(v);
    }
    assert_eq!(seen, (4..=7).collect());
}

#[test]
fn dependent_domain_is_evaluated_after_its_inputs() {
    let t = toy("  select_num: {type: int, domain: \"[p_num // 2 - 1, p_num // 2 + 1]\"}\n  p_num: {type: int, domain: \"[3, 8]\"}\n");
    let fixed = HashMap::from([("p_num".to_string(), Value::Int(6))]);
    let mut env = Env::with_rng(RngStream::new(9, 0));
    let mut seen = BTreeSet::new();
    for _ in 0..200 * 3 {
        let draws = sample_variables(&t, &mut env, &fixed).unwrap();
        assert_eq!(value_of(&draws, "p_num"), 6);
        seen.insert(value_of(&draws, "select_num"));
    }
    assert_eq!(seen, BTreeSet::from([2, 3, 4]));
}

#[test]
fn inverted_and_cyclic_domains_are_rejected() {
    let t = toy("  v: {type: int, domain: \"[5, 4]\"}\n");
    let e = sample_variables(&t, &mut Env::with_rng(RngStream::new(1, 0)), &HashMap::new()).unwrap_err();
    assert_eq!(e.class(), "EmptyDomain");
    let doc = "variables:\n  a: {formula: \"b + 1\"}\n  b: {formula: \"a + 1\"}\ndesc: \"x\"\n";
    let e = parse_spec_named(doc, "toy")
        .map_err(|e| e.class())
        .and_then(|t| variable_order(&t).map_err(|e| e.class()))
        .unwrap_err();
    assert_eq!(e, "CyclicDependency");
}

#[test]
fn sampling_is_deterministic_per_stream() {
    let t = toy("  a: {type: int, domain: \"[1, 1000]\"}\n  b: {formula: \"randint(1, 6) + randint(1, 6)\"}\n  f: {type: float, domain: \"[0, 1]\"}\n");
    let run = |seed, job| {
        let mut env = Env::with_rng(RngStream::new(seed, job));
        let draws = sample_variables(&t, &mut env, &HashMap::new()).unwrap();
        draws.iter().map(|d| d.value.to_json().unwrap().to_string()).collect::<Vec<_>>()
    };
    assert_eq!(run(7, 3), run(7, 3));
    let distinct: BTreeSet<_> = (0..20).map(|j| run(7, j)).collect();
    assert!(distinct.len() > 15, "streams for different jobs look correlated");
    let mut env = Env::with_rng(RngStream::new(7, 0));
    for _ in 0..500 {
        let draws = sample_variables(&t, &mut env, &HashMap::new()).unwrap();
        assert!((2..=12).contains(&value_of(&draws, "b")));
        let f = draws.iter().find(|d| d.name == "f").unwrap().value.as_f64().unwrap();
        assert!((0.0..=1.0).contains(&f));
        assert_eq!((f * 1e6).round() / 1e6, f, "{f} has more than six decimals");
    }
}

#[test]
fn unordered_pairs_without_repeats_enumerate_all_combinations() {
    let pools = letters(&["A", "B", "C"]);
    let mut s = spec_over(1);
    s.order = Some(vec![false]);
    let mut env = Env::with_rng(RngStream::new(3, 0));
    for _ in 0..50 {
        let r = select_with_constraints(&pools, &s, Some(&[2]), 3, &mut env).unwrap();
        let got: BTreeSet<String> = r.tuples.iter().map(|t| t.py_str().unwrap()).collect();
        assert_eq!(got.len(), 3);
        for pick in &r.indices {
            let idx = &pick[0][0];
            assert!(idx.windows(2).all(|w| w[0] < w[1]), "unordered draw not ascending: {idx:?}");
        }
    }
    let e = select_with_constraints(&pools, &s, Some(&[2]), 4, &mut env).unwrap_err();
    assert_eq!(e.class(), "SelectionExhausted");
}

#[test]
fn replacement_allows_repeated_items() {
    let pools = letters(&["x"]);
    let mut s = spec_over(1);
    s.duplicate = Some(vec![true]);
    let r = select_with_constraints(&pools, &s, Some(&[2]), 1, &mut Env::with_rng(RngStream::new(1, 0))).unwrap();
    assert_eq!(r.tuples[0].py_str().unwrap(), "(['x', 'x'],)");
    s.duplicate = None;
    let e = select_with_constraints(&pools, &s, Some(&[2]), 1, &mut Env::with_rng(RngStream::new(1, 0))).unwrap_err();
    assert_eq!(e.class(), "SelectionExhausted");
}

#[test]
fn dim_cond_keeps_listed_fields_apart() {
    let pools = vec![letters(&["A", "B", "C"]).remove(0), letters(&["A", "B", "C"]).remove(0)];
    let mut s = spec_over(2);
    s.dim_cond = vec![vec![0, 1]];
    let mut env = Env::with_rng(RngStream::new(4, 0));
    let r = select_with_constraints(&pools, &s, None, 6, &mut env).unwrap();
    for pick in &r.indices {
        assert_ne!(pick[0][0], pick[0][1]);
    }
    let e = select_with_constraints(&pools, &s, None, 7, &mut env).unwrap_err();
    assert_eq!(e.class(), "SelectionExhausted");
}

fn var(c: &puzzlegen_core::spec::Config, name: &str) -> i64 {
    c.variable_values[name].as_i64().unwrap()
}

#[test]
fn hamburger_symbols_and_condition_counts_follow_the_variables() {
    let t = spec("hamburger");
    let opts = GenerateOptions::default();
    let mut saw_4x3 = false;
    for j in 0..40 {
        let inst = generate_one(&t, RngStream::new(21, j), &opts).unwrap();
        let c = &inst.config;
        let (s, f) = (var(c, "s_num"), var(c, "f_num"));
        assert_eq!(inst.features.sym_num as i64, s * f);
        let n = c.condition_params["a_bought_b"].len() as i64;
        assert!((s * f / 3..=s * f / 2).contains(&n), "{n} instances for s={s} f={f}");
        if (s, f) == (4, 3) {
            saw_4x3 = true;
            assert_eq!(inst.features.sym_num, 12);
            assert!((4..=6).contains(&n));
        }
        assert!(!c.condition_params.contains_key("purchased_at_least_one_kind"));
        let pairs: Vec<_> = c.condition_params["a_b_exclusive"].iter().map(|p| p.params.to_string()).collect();
        assert_eq!(pairs.iter().collect::<BTreeSet<_>>().len(), pairs.len(), "domain_cond violated");
    }
    assert!(saw_4x3, "no 4x3 instance in 40 draws");
}

#[test]
fn vase_speeches_match_the_number_of_children() {
    let t = spec("vase");
    let opts = GenerateOptions {
        retry_budget: 400,
        ..GenerateOptions::default()
    };
    for j in 0..10 {
        let inst = generate_one(&t, RngStream::new(8, j), &opts).unwrap();
        let c = &inst.config;
        let p = var(c, "p_num") as usize;
        assert_eq!(c.symbol_params["speeches_s"].len(), p);
        assert!(!c.condition_params.contains_key("cond1"));
        assert_eq!(c.variable_values["names"].as_array().unwrap().len(), p);
    }
}

#[test]
fn wine_attributes_make_two_symbols_per_barrel() {
    let t = spec("wine");
    let inst = generate_one(&t, RngStream::new(2, 0), &GenerateOptions::default()).unwrap();
    let w = var(&inst.config, "wine_num") as usize;
    assert_eq!(inst.features.sym_num, 2 * w);
}
