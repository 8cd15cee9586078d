//! Independent re-verification of small instances by exhaustive enumeration.

use std::collections::BTreeSet;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::pipeline::replay_parts;
use crate::qa;
use crate::solver::term::Sort;
use crate::solver::Model;
use crate::spec::{Code, Config, PuzzleTemplate, QueryKind};

/// Outcome of [`brute_force_verify`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyReport {
    pub symbols: usize,
    pub solver_models: usize,
    pub brute_models: usize,
    /// Solver and truth-table model sets are equal.
    pub models_match: bool,
    /// Every gold answer and option label recomputes identically.
    pub answers_match: bool,
    pub options_checked: usize,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.models_match && self.answers_match
    }
}

/// Replay `c`, enumerate every assignment of its symbols, and recompute
/// all answers from the truth-table models.
///
/// `None` when the instance has non-boolean symbols or more than `max_symbols`.
pub fn brute_force_verify(t: &PuzzleTemplate, c: &Config, max_symbols: usize) -> Result<Option<VerifyReport>> {
    let mut r = replay_parts(t, c)?;
    let sorts = &r.constraints.sorts;
    let n = sorts.len();
    if n > max_symbols || n >= 63 || sorts.iter().any(|s| *s != Sort::Bool) {
        return Ok(None);
    }
    let mut brute = Vec::new();
    let mut vals = vec![0i64; n];
    for mask in 0u64..1 << n {
        for (i, v) in vals.iter_mut().enumerate() {
            *v = (mask >> i & 1) as i64;
        }
        if r.constraints.satisfied_by(&vals) {
            brute.push(vals.clone());
        }
    }
    let solver_set: BTreeSet<&Vec<i64>> = r.models.iter().map(|m| &m.values).collect();
    let brute_set: BTreeSet<&Vec<i64>> = brute.iter().collect();
    let optimized = t.optimize.is_some() || !t.calc_solution;
    let models_match = if optimized {
        solver_set.is_subset(&brute_set)
    } else {
        solver_set == brute_set && solver_set.len() == r.models.len()
    };
    let brute_models = brute_set.len();

    // recompute answers from the truth table, in reverse order
    let tag = r.env.model_tag;
    let models: Vec<Rc<Model>> = if optimized {
        r.models.clone()
    } else {
        brute.into_iter().rev().map(|values| Rc::new(Model { tag, values })).collect()
    };
    let mut answers_match = true;
    let mut options_checked = 0;
    for (q, gold) in t.queries.iter().zip(&r.instance.answers) {
        let again = match &q.kind {
            QueryKind::Open { .. } => qa::answer_open_query(q, &mut r.env, &models)?,
            QueryKind::Selection { .. } => {
                let recorded = &r.instance.config.query_params[&q.name].options;
                options_checked += recorded.len();
                qa::replay_selection_query(q, &mut r.env, &models, recorded)?.answer
            }
        };
        answers_match &= again == *gold;
    }
    Ok(Some(VerifyReport {
        symbols: n,
        solver_models: r.models.len(),
        brute_models,
        models_match,
        answers_match,
        options_checked,
    }))
}

/// Every condition name, post-generation conditions included.
pub fn condition_names(t: &PuzzleTemplate) -> Vec<String> {
    let post = t.post_generation.iter().flat_map(|p| &p.conditions);
    t.conditions.iter().chain(post).map(|c| c.name.clone()).collect()
}

/// The template with the formula of condition `name` negated.
///
/// List-valued formulas are conjoined before negation.
pub fn negate_condition(t: &PuzzleTemplate, name: &str) -> Result<PuzzleTemplate> {
    let mut out = t.clone();
    let post = out.post_generation.iter_mut().flat_map(|p| p.conditions.iter_mut());
    let cond = out
        .conditions
        .iter_mut()
        .chain(post)
        .find(|c| c.name == name)
        .ok_or_else(|| Error::UnboundName(format!("condition `{name}`")))?;
    cond.formula = Code::parse(&format!("Not(And({}))", cond.formula.text.trim()))?;
    Ok(out)
}
