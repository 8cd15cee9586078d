mod common;

use std::rc::Rc;

use common::{spec, BUNDLED};
use puzzlegen_core::pipeline::{generate_batch, generate_one, replay_parts, GenerateOptions};
use puzzlegen_core::qa::{evaluate_candidate, grade_answer, replay_selection_query, OptionSpace};
use puzzlegen_core::render::{wrap_prompt, WrapperSet};
use puzzlegen_core::rng::RngStream;
use puzzlegen_core::spec::{parse_spec_named, CondScope, QueryKind, SelectType};

const SELECTION_SPECS: [&str; 4] = ["hamburger", "graduation", "product", "wine"];

fn generous() -> GenerateOptions {
    GenerateOptions {
        retry_budget: 400,
        jobs: 0,
        ..GenerateOptions::default()
    }
}

#[test]
fn single_select_queries_have_exactly_one_correct_option() {
    for name in SELECTION_SPECS {
        let t = spec(name);
        let batch = generate_batch(&t, 1000, 77, &generous()).unwrap();
        assert_eq!(batch.instances.len(), 1000);
        for inst in &batch.instances {
            for (q, a) in t.queries.iter().zip(&inst.answers) {
                let QueryKind::Selection { select_type, opt_num, .. } = &q.kind else {
                    continue;
                };
                let options = a.options.as_ref().unwrap();
                assert_eq!(options.len(), *opt_num, "{name} {}", inst.id);
                let correct = options.iter().filter(|o| o.correct).count();
                match select_type {
                    SelectType::Single => assert_eq!(correct, 1, "{name} {}", inst.id),
                    SelectType::Multiple => assert!(correct >= 1 && correct < options.len()),
                }
                let texts: std::collections::BTreeSet<_> = options.iter().map(|o| &o.text).collect();
                assert_eq!(texts.len(), options.len(), "duplicate option text in {name} {}", inst.id);
            }
        }
    }
}

#[test]
fn every_gold_answer_grades_itself() {
    for name in BUNDLED {
        let t = spec(name);
        let batch = generate_batch(&t, 40, 5, &generous()).unwrap();
        for inst in &batch.instances {
            for a in &inst.answers {
                let g = grade_answer(&a.rendered, a);
                assert!(g.correct && !g.unparseable, "{name}: {a:?}");
            }
            let record = inst.to_record(None).unwrap();
            for a in &record.answers {
                assert!(grade_answer(&a.rendered, a).correct);
            }
        }
    }
}

#[test]
fn labels_survive_model_reordering_and_all_implies_any() {
    for name in SELECTION_SPECS {
        let t = spec(name);
        for j in 0..8 {
            let inst = generate_one(&t, RngStream::new(13, j), &generous()).unwrap();
            let mut r = replay_parts(&t, &inst.config).unwrap();
            let mut reversed = r.models.clone();
            reversed.reverse();
            for (q, a) in t.queries.iter().zip(&inst.answers) {
                let QueryKind::Selection { templates, .. } = &q.kind else {
                    continue;
                };
                let recorded = &inst.config.query_params[&q.name].options;
                let again = replay_selection_query(q, &mut r.env, &reversed, recorded).unwrap();
                assert_eq!(&again.answer, a, "{name}: labels depend on model order");

                let mut relaxed = templates.clone();
                for tpl in &mut relaxed {
                    tpl.cond = CondScope::Any;
                }
                let space = OptionSpace::new(&relaxed, &mut r.env).unwrap();
                for (opt, rec) in a.options.as_ref().unwrap().iter().zip(recorded) {
                    let pick = rec.indices.clone().expect("generated configs record indices");
                    let any = evaluate_candidate(&relaxed, &space, rec.template, pick, &mut r.env, &r.models).unwrap();
                    if templates[rec.template].cond == CondScope::All && opt.correct {
                        assert!(any.correct, "{name}: correct under all but not under any");
                    }
                    assert_eq!(any.text, opt.text);
                }
            }
            let _ = Rc::strong_count(&r.models[0]);
        }
    }
}

const SENTINEL_SPEC: &str = r#"
variables:
  n: {type: int, domain: "[2, 4]"}
symbols:
  x: {source: ["range(n)"], type: bool}
conditions:
  fixed:
    formula: "Or(x[0], Not(x[0]))"
    desc: "STATIC."
  many:
    source: ["range(n)"]
    domain: "[1, n]"
    formula: "Or(x[_sym[0]], Not(x[_sym[0]]))"
    desc: "SENT{_sym[0]}."
  none:
    source: ["range(n)"]
    domain: "[0, 0]"
    formula: "x[_sym[0]]"
    desc: "NEVER."
queries:
  q: {desc: "How many?", ans_formula: "len(_solutions)", ans_text: "{_ans}"}
desc: "Start. {many} Mid.{none} End. {q}"
"#;

#[test]
fn condition_descs_appear_once_each_and_empty_groups_vanish() {
    let t = parse_spec_named(SENTINEL_SPEC, "sentinel").unwrap();
    for j in 0..30 {
        let inst = generate_one(&t, RngStream::new(4, j), &GenerateOptions::default()).unwrap();
        let c = &inst.config;
        let picked: Vec<i64> = c.condition_params["many"]
            .iter()
            .map(|p| p.params[0].as_i64().unwrap())
            .collect();
        assert_eq!(inst.question.matches("SENT").count(), picked.len());
        for k in &picked {
            assert_eq!(inst.question.matches(&format!("SENT{k}.")).count(), 1);
        }
        assert!(c.condition_params["none"].is_empty());
        assert!(!inst.question.contains("NEVER") && !inst.question.contains("STATIC"));
        assert!(inst.question.contains("Mid. End."), "{}", inst.question);
        let n = c.variable_values["n"].as_i64().unwrap();
        assert_eq!(inst.answers[0].rendered, (1i64 << n).to_string());
    }
}

#[test]
fn aggregate_conditions_placeholder_lists_every_instance() {
    let t = spec("product");
    let inst = generate_one(&t, RngStream::new(6, 0), &generous()).unwrap();
    let c = &inst.config;
    let mut expected = 0;
    for name in ["cond1", "cond2", "cond3"] {
        expected += c.condition_params[name].len();
    }
    let q = &inst.question;
    let between = q.matches(" items between them.").count();
    let after = q.matches(" is placed immediately after ").count();
    let not_in = q.matches(" is not in position ").count();
    assert_eq!(between + after + not_in, expected);
    let first_cond = q.find(" items between them.").unwrap();
    let question = q.find("which of the following must be true?").unwrap();
    assert!(first_cond < question);
    assert!(q.contains("\nF. "));
}

#[test]
fn wrapped_prompt_contains_question_and_directive() {
    let t = spec("hamburger");
    let inst = generate_one(&t, RngStream::new(1, 1), &GenerateOptions::default()).unwrap();
    let text = wrap_prompt(&inst.question, &inst.answers, &WrapperSet::default()).unwrap();
    assert!(text.contains(&inst.question));
    assert!(text.trim_end().ends_with("separated by commas."));
    let record = inst.to_record(Some(&WrapperSet::default())).unwrap();
    assert_eq!(record.prompt.as_deref(), Some(text.as_str()));
}
