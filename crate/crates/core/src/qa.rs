//! Gold answers for open queries, option synthesis for selection queries,
//! and grading of predicted answers.

use std::collections::BTreeMap;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Env, Value};
use crate::sampler::{self, Pick, SELECTION_ATTEMPTS};
use crate::solver::Model;
use crate::spec::{AnsText, CondScope, EvalType, OptionParams, OptionTemplate, QueryDecl, QueryKind, SelectType};

/// One labeled option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionRecord {
    pub label: String,
    pub text: String,
    pub correct: bool,
}

/// Gold answer of one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub query_name: String,
    pub qtype: String,
    pub eval_type: EvalType,
    /// Structured gold: a number, a string, or a list of strings.
    pub gold: serde_json::Value,
    /// Gold as answer text.
    pub rendered: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<OptionRecord>>,
}

/// Labels for `n` options.
pub fn labels(n: usize) -> Vec<String> {
    (0..n).map(|i| char::from(b'A' + i as u8).to_string()).collect()
}

fn models_value(models: &[Rc<Model>]) -> Value {
    Value::list(models.iter().cloned().map(Value::Model).collect())
}

/// Evaluate an open query against the solution set.
pub fn answer_open_query(q: &QueryDecl, env: &mut Env, models: &[Rc<Model>]) -> Result<AnswerRecord> {
    let QueryKind::Open {
        ans_formula,
        ans_text,
        ans_assertion,
        eval_type,
        query_type,
    } = &q.kind
    else {
        return Err(Error::Constraint(format!("`{}` is not an open query", q.name)));
    };
    if models.is_empty() {
        return Err(Error::EmptySolutionSet);
    }
    let sols = models_value(models);
    let first = Value::Model(models[0].clone());
    let ans = env
        .eval_with(&ans_formula.expr, &[("_solutions", sols.clone()), ("_model", first)])?
        .folded();
    let bindings = [("_ans", ans.clone()), ("_solutions", sols)];
    if let Some(a) = ans_assertion {
        if !env.eval_with(&a.expr, &bindings)?.folded().truthy()? {
            return Err(Error::AssertionFailed(format!("`{}` does not hold for `{}`", a.text, q.name)));
        }
    }
    let rendered = match ans_text {
        AnsText::Template(t) => {
            let mark = bindings.clone();
            for (n, v) in &mark {
                env.set(n, v.clone());
            }
            let r = t.render(env);
            for (n, _) in &mark {
                env.unset(n);
            }
            r?
        }
        AnsText::Expr(c) => env.eval_with(&c.expr, &bindings)?.folded().py_str()?,
    };
    let eval_type = eval_type.unwrap_or_else(|| infer_eval_type(ans_text, &rendered));
    let gold = gold_value(eval_type, &rendered);
    let qtype = query_type.clone().unwrap_or_else(|| {
        match eval_type {
            EvalType::Numeral => "fill_in_blank",
            _ => "short_answer",
        }
        .to_string()
    });
    Ok(AnswerRecord {
        query_name: q.name.clone(),
        qtype,
        eval_type,
        gold,
        rendered,
        options: None,
    })
}

fn infer_eval_type(ans_text: &AnsText, rendered: &str) -> EvalType {
    if let AnsText::Expr(c) = ans_text {
        if matches!(c.expr, crate::expr::Expr::Join(..)) {
            return EvalType::UnorderedArray;
        }
    }
    if parse_number(rendered).is_some() {
        EvalType::Numeral
    } else {
        EvalType::Nominal
    }
}

fn gold_value(eval_type: EvalType, rendered: &str) -> serde_json::Value {
    match eval_type {
        EvalType::Numeral => match parse_number(rendered) {
            Some(x) if x.fract() == 0.0 && x.abs() < 9e15 => serde_json::json!(x as i64),
            Some(x) => serde_json::json!(x),
            None => serde_json::json!(rendered),
        },
        EvalType::OrderedArray | EvalType::UnorderedArray | EvalType::Option => {
            serde_json::json!(split_items(rendered))
        }
        EvalType::Nominal => serde_json::json!(rendered),
    }
}

/// Evaluated candidate option.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub template: usize,
    pub pick: Pick,
    pub binding: Value,
    pub text: String,
    pub correct: bool,
}

/// Per-template pools and amounts.
pub struct OptionSpace {
    pools: Vec<Vec<Vec<Value>>>,
    amounts: Vec<Option<Vec<usize>>>,
}

impl OptionSpace {
    pub fn new(templates: &[OptionTemplate], env: &mut Env) -> Result<OptionSpace> {
        let mut pools = Vec::new();
        let mut amounts = Vec::new();
        for t in templates {
            pools.push(sampler::eval_pools(&t.selection.source, env)?);
            amounts.push(sampler::eval_amounts(&t.selection, env)?);
        }
        Ok(OptionSpace { pools, amounts })
    }
}

/// Judge and render one option.
pub fn evaluate_candidate(
    templates: &[OptionTemplate],
    space: &OptionSpace,
    ti: usize,
    pick: Pick,
    env: &mut Env,
    models: &[Rc<Model>],
) -> Result<Candidate> {
    let t = &templates[ti];
    let binding = sampler::binding(&space.pools[ti], space.amounts[ti].as_deref(), &pick);
    let sols = models_value(models);
    let holds = |m: &Rc<Model>, env: &mut Env| -> Result<bool> {
        env.eval_with(
            &t.opt_formula.expr,
            &[("_opt", binding.clone()), ("_model", Value::Model(m.clone())), ("_solutions", sols.clone())],
        )?
        .folded()
        .truthy()
    };
    let mut correct = match t.cond {
        CondScope::All => true,
        CondScope::Any => false,
    };
    for m in models {
        let h = holds(m, env)?;
        match t.cond {
            CondScope::All if !h => {
                correct = false;
                break;
            }
            CondScope::Any if h => {
                correct = true;
                break;
            }
            _ => {}
        }
    }
    env.set("_opt", binding.clone());
    let text = t.opt_text.render(env);
    env.unset("_opt");
    Ok(Candidate {
        template: ti,
        pick,
        binding,
        text: text?.trim().to_string(),
        correct,
    })
}

fn flatten(v: &Value, out: &mut Vec<Value>) {
    match v {
        Value::List(xs) | Value::Tuple(xs) => xs.iter().for_each(|x| flatten(x, out)),
        other => out.push(other.clone()),
    }
}

/// Whether an option restates one of the given condition parameters.
pub fn restates(binding: &Value, condition_params: &[Value]) -> bool {
    let mut a = Vec::new();
    flatten(binding, &mut a);
    condition_params.iter().any(|c| {
        let mut b = Vec::new();
        flatten(c, &mut b);
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x == y)
    })
}

/// Options of one selection query, in label order.
#[derive(Debug, Clone)]
pub struct BuiltOptions {
    pub answer: AnswerRecord,
    pub chosen: Vec<Candidate>,
}

fn assemble(q: &QueryDecl, query_type: &str, chosen: Vec<Candidate>) -> BuiltOptions {
    let labels = labels(chosen.len());
    let mut options = Vec::with_capacity(chosen.len());
    let mut gold = Vec::new();
    for (c, label) in chosen.iter().zip(&labels) {
        if c.correct {
            gold.push(label.clone());
        }
        options.push(OptionRecord {
            label: label.clone(),
            text: c.text.clone(),
            correct: c.correct,
        });
    }
    let rendered = gold.join(",");
    BuiltOptions {
        answer: AnswerRecord {
            query_name: q.name.clone(),
            qtype: query_type.to_string(),
            eval_type: EvalType::Option,
            gold: serde_json::json!(gold),
            rendered,
            options: Some(options),
        },
        chosen,
    }
}

/// Sample, judge and label the options of a selection query.
///
/// `forbidden` holds condition parameters that options may not restate.
pub fn build_selection_query(
    q: &QueryDecl,
    env: &mut Env,
    models: &[Rc<Model>],
    forbidden: &[Value],
) -> Result<BuiltOptions> {
    let QueryKind::Selection {
        query_type,
        select_type,
        opt_num,
        templates,
        redundancy_guard,
        ..
    } = &q.kind
    else {
        return Err(Error::Constraint(format!("`{}` is not a selection query", q.name)));
    };
    if models.is_empty() {
        return Err(Error::EmptySolutionSet);
    }
    let opt_num = *opt_num;
    let space = OptionSpace::new(templates, env)?;
    let mut seen: Vec<(usize, Pick)> = Vec::new();
    let mut correct: Vec<Candidate> = Vec::new();
    let mut wrong: Vec<Candidate> = Vec::new();
    let enough = |c: &[Candidate], w: &[Candidate]| match select_type {
        SelectType::Single => !c.is_empty() && w.len() >= opt_num - 1,
        SelectType::Multiple => !c.is_empty() && !w.is_empty() && c.len() + w.len() >= 2 * opt_num,
    };
    let budget = 4 * SELECTION_ATTEMPTS * opt_num;
    for attempt in 0..budget {
        if enough(&correct, &wrong) {
            break;
        }
        let ti = attempt % templates.len();
        let t = &templates[ti];
        let amounts = space.amounts[ti].as_deref();
        let Some(pick) = sampler::draw_pick(&space.pools[ti], &t.selection, amounts, env.rng("option sampling")?) else {
            continue;
        };
        if seen.iter().any(|(i, p)| *i == ti && *p == pick) {
            continue;
        }
        seen.push((ti, pick.clone()));
        if !sampler::pick_admissible(&space.pools[ti], &t.selection, amounts, &pick, env)? {
            continue;
        }
        let cand = evaluate_candidate(templates, &space, ti, pick, env, models)?;
        if *redundancy_guard && restates(&cand.binding, forbidden) {
            continue;
        }
        if correct.iter().chain(&wrong).any(|c| c.text == cand.text) {
            continue;
        }
        if cand.correct {
            correct.push(cand);
        } else {
            wrong.push(cand);
        }
    }
    let exhausted = || Error::OptionSynthesisExhausted(q.name.clone());
    let rng = env.rng("option assembly")?;
    let mut chosen = match select_type {
        SelectType::Single => {
            if correct.is_empty() || wrong.len() < opt_num - 1 {
                return Err(exhausted());
            }
            let mut picked = vec![correct.swap_remove(rng.index(correct.len()))];
            rng.shuffle(&mut wrong);
            picked.extend(wrong.into_iter().take(opt_num - 1));
            picked
        }
        SelectType::Multiple => {
            if correct.is_empty() || wrong.is_empty() || correct.len() + wrong.len() < opt_num {
                return Err(exhausted());
            }
            let lo = opt_num.saturating_sub(wrong.len()).max(1);
            let hi = correct.len().min(opt_num - 1);
            if lo > hi {
                return Err(exhausted());
            }
            let k = rng.int_in(lo as i64, hi as i64) as usize;
            rng.shuffle(&mut correct);
            rng.shuffle(&mut wrong);
            let mut picked: Vec<Candidate> = correct.into_iter().take(k).collect();
            picked.extend(wrong.into_iter().take(opt_num - k));
            picked
        }
    };
    env.rng("option order")?.shuffle(&mut chosen);
    Ok(assemble(q, query_type, chosen))
}

/// Rebuild a selection query from recorded options.
pub fn replay_selection_query(
    q: &QueryDecl,
    env: &mut Env,
    models: &[Rc<Model>],
    recorded: &[OptionParams],
) -> Result<BuiltOptions> {
    let QueryKind::Selection {
        query_type,
        select_type,
        opt_num,
        templates,
        ..
    } = &q.kind
    else {
        return Err(Error::Constraint(format!("`{}` is not a selection query", q.name)));
    };
    if recorded.len() != *opt_num {
        return Err(Error::ConfigShapeMismatch(format!(
            "query `{}` records {} options but opt_num is {opt_num}",
            q.name,
            recorded.len()
        )));
    }
    if models.is_empty() {
        return Err(Error::EmptySolutionSet);
    }
    let space = OptionSpace::new(templates, env)?;
    let mut chosen = Vec::with_capacity(recorded.len());
    for o in recorded {
        if o.template >= templates.len() {
            return Err(Error::ConfigShapeMismatch(format!("query `{}` has no template {}", q.name, o.template)));
        }
        let ti = o.template;
        let pick = match &o.indices {
            Some(idx) => idx.clone(),
            None => sampler::locate_pick(
                &space.pools[ti],
                space.amounts[ti].as_deref(),
                templates[ti].selection.dim,
                &o.params,
                &env.symbols,
            )?,
        };
        let amounts = space.amounts[ti].as_deref();
        sampler::replay_selection(&space.pools[ti], &templates[ti].selection, amounts, std::slice::from_ref(&pick))?;
        chosen.push(evaluate_candidate(templates, &space, ti, pick, env, models)?);
    }
    let n_correct = chosen.iter().filter(|c| c.correct).count();
    let ok = match select_type {
        SelectType::Single => n_correct == 1,
        SelectType::Multiple => n_correct >= 1 && n_correct < chosen.len(),
    };
    if !ok {
        return Err(Error::AssertionFailed(format!(
            "query `{}` has {n_correct} correct options, which its select_type does not allow",
            q.name
        )));
    }
    Ok(assemble(q, query_type, chosen))
}

/// Outcome of grading one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grade {
    pub correct: bool,
    /// The prediction could not be parsed for the answer's eval_type.
    pub unparseable: bool,
}

fn parse_number(s: &str) -> Option<f64> {
    let t = s.trim();
    if t.is_empty() {
        return None;
    }
    t.parse::<f64>().ok().filter(|x| x.is_finite())
}

fn split_items(s: &str) -> Vec<String> {
    let t = s.trim();
    if t.is_empty() {
        return Vec::new();
    }
    t.split(',').map(collapse).collect()
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn label_set(s: &str) -> Option<Vec<String>> {
    let mut out: Vec<String> = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|x| !x.is_empty())
        .map(|x| x.to_ascii_uppercase())
        .collect();
    if out.is_empty() || !out.iter().all(|x| x.len() == 1 && x.as_bytes()[0].is_ascii_uppercase()) {
        return None;
    }
    out.sort();
    out.dedup();
    Some(out)
}

/// Grade a predicted answer text against a gold record.
pub fn grade_answer(predicted: &str, gold: &AnswerRecord) -> Grade {
    let graded = |correct: bool| Grade {
        correct,
        unparseable: false,
    };
    let unparseable = Grade {
        correct: false,
        unparseable: true,
    };
    match gold.eval_type {
        EvalType::Numeral => {
            let (Some(p), Some(g)) = (parse_number(predicted), parse_number(&gold.rendered)) else {
                return unparseable;
            };
            let diff = (p - g).abs();
            graded(diff <= 1e-9 || diff <= 1e-6 * p.abs().max(g.abs()))
        }
        EvalType::Nominal => graded(collapse(predicted) == collapse(&gold.rendered)),
        EvalType::Option => match (label_set(predicted), label_set(&gold.rendered)) {
            (Some(p), Some(g)) => graded(p == g),
            _ => unparseable,
        },
        EvalType::OrderedArray => graded(split_items(predicted) == split_items(&gold.rendered)),
        EvalType::UnorderedArray => {
            let count = |v: Vec<String>| {
                let mut m = BTreeMap::new();
                for x in v {
                    *m.entry(x).or_insert(0usize) += 1;
                }
                m
            };
            graded(count(split_items(predicted)) == count(split_items(&gold.rendered)))
        }
    }
}

/// Grade a full prediction against every answer of a record; multi-query
/// predictions separate their parts with `;`. A part-count mismatch is unparseable.
pub fn grade_prediction(predicted: &str, answers: &[AnswerRecord]) -> Grade {
    let parts: Vec<&str> = if answers.len() > 1 { predicted.split(';').collect() } else { vec![predicted] };
    if parts.len() != answers.len() {
        return Grade {
            correct: false,
            unparseable: true,
        };
    }
    let grades: Vec<Grade> = parts.iter().zip(answers).map(|(p, a)| grade_answer(p.trim(), a)).collect();
    Grade {
        correct: grades.iter().all(|g| g.correct),
        unparseable: grades.iter().any(|g| g.unparseable),
    }
}
