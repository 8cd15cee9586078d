//! Static name-resolution and shape checks.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::model::*;
use crate::expr::{is_builtin, Expr, Template};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// One validation finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub location: String,
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}: {}", self.location, self.message)
    }
}

struct Checker<'a> {
    t: &'a PuzzleTemplate,
    out: Vec<Diagnostic>,
    operators: BTreeSet<&'a str>,
}

impl<'a> Checker<'a> {
    fn error(&mut self, location: String, message: String) {
        self.out.push(Diagnostic {
            location,
            severity: Severity::Error,
            message,
        });
    }

    fn expr(&mut self, loc: &str, e: &Expr, scope: &BTreeSet<String>) {
        for name in e.free_names() {
            if !scope.contains(&name) {
                self.error(loc.to_string(), format!("unresolved name `{name}`"));
            }
        }
        for f in e.called_functions() {
            if !is_builtin(&f) && !self.operators.contains(f.as_str()) {
                self.error(loc.to_string(), format!("unknown function `{f}`"));
            }
        }
    }

    fn code(&mut self, loc: &str, c: &Code, scope: &BTreeSet<String>) {
        self.expr(loc, &c.expr, scope);
    }

    fn template(&mut self, loc: &str, t: &Template, scope: &BTreeSet<String>) {
        for e in t.exprs() {
            for name in e.free_names() {
                if !scope.contains(&name) {
                    self.error(loc.to_string(), format!("unresolved placeholder name `{name}`"));
                }
            }
            for f in e.called_functions() {
                if !is_builtin(&f) && !self.operators.contains(f.as_str()) {
                    self.error(loc.to_string(), format!("unknown function `{f}`"));
                }
            }
        }
    }

    fn selection(&mut self, loc: &str, s: &SelectionSpec, scope: &BTreeSet<String>) {
        let n = s.source.len();
        if n == 0 {
            self.error(format!("{loc}.source"), "at least one source is required".into());
        }
        for (i, c) in s.source.iter().enumerate() {
            self.code(&format!("{loc}.source[{i}]"), c, scope);
        }
        let lens = [
            ("amount", s.amount.as_ref().map(Vec::len)),
            ("order", s.order.as_ref().map(Vec::len)),
            ("duplicate", s.duplicate.as_ref().map(Vec::len)),
        ];
        for (field, len) in lens {
            if let Some(len) = len {
                if len != n {
                    self.error(
                        format!("{loc}.{field}"),
                        format!("has {len} entries but there are {n} sources"),
                    );
                }
            }
        }
        if let Some(a) = &s.amount {
            for (i, c) in a.iter().enumerate() {
                self.code(&format!("{loc}.amount[{i}]"), c, scope);
            }
        }
        if let Some(d) = &s.domain {
            self.code(&format!("{loc}.domain"), d, scope);
        }
        for g in &s.dim_cond {
            if let Some(bad) = g.iter().find(|&&i| i >= n) {
                self.error(format!("{loc}.dim_cond"), format!("source index {bad} out of range (0..{n})"));
            }
        }
        for (k, c) in s.custom_cond.iter().enumerate() {
            let cloc = format!("{loc}.custom_cond[{k}]");
            if let Some(bad) = c.fields.iter().find(|&&i| i >= n) {
                self.error(cloc.clone(), format!("field index {bad} out of range (0..{n})"));
            }
            if c.params.len() != c.fields.len() {
                self.error(
                    cloc.clone(),
                    format!("lambda takes {} parameters but {} fields are listed", c.params.len(), c.fields.len()),
                );
            }
            let mut inner = scope.clone();
            inner.extend(c.params.iter().cloned());
            self.code(&cloc, &c.body, &inner);
        }
    }
}

fn with(scope: &BTreeSet<String>, extra: &[&str]) -> BTreeSet<String> {
    let mut s = scope.clone();
    s.extend(extra.iter().map(|x| x.to_string()));
    s
}

/// Variable dependency cycle, if any, as a path of names.
pub fn variable_cycle(t: &PuzzleTemplate) -> Option<Vec<String>> {
    let names: HashMap<&str, usize> = t.variables.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
    let deps: Vec<Vec<usize>> = t
        .variables
        .iter()
        .map(|v| {
            let e = match &v.kind {
                VariableKind::Domain { domain, .. } => &domain.expr,
                VariableKind::Formula(f) => &f.expr,
            };
            e.free_names().iter().filter_map(|n| names.get(n.as_str()).copied()).collect()
        })
        .collect();
    // 0 unvisited, 1 on stack, 2 done
    let mut state = vec![0u8; deps.len()];
    let mut stack = Vec::new();
    fn dfs(i: usize, deps: &[Vec<usize>], state: &mut [u8], stack: &mut Vec<usize>) -> Option<Vec<usize>> {
        state[i] = 1;
        stack.push(i);
        for &j in &deps[i] {
            if state[j] == 1 {
                let pos = stack.iter().position(|&x| x == j).unwrap();
                let mut cyc = stack[pos..].to_vec();
                cyc.push(j);
                return Some(cyc);
            }
            if state[j] == 0 {
                if let Some(c) = dfs(j, deps, state, stack) {
                    return Some(c);
                }
            }
        }
        stack.pop();
        state[i] = 2;
        None
    }
    for i in 0..deps.len() {
        if state[i] == 0 {
            if let Some(c) = dfs(i, &deps, &mut state, &mut stack) {
                return Some(c.into_iter().map(|k| t.variables[k].name.clone()).collect());
            }
        }
    }
    None
}

/// Check every name reference and list-shape invariant.
///
/// Returns an empty list for a clean template.
pub fn validate_spec(t: &PuzzleTemplate) -> Vec<Diagnostic> {
    let mut c = Checker {
        t,
        out: Vec::new(),
        operators: t.custom_operators.iter().map(|(n, _)| n.as_str()).collect(),
    };
    let vars: BTreeSet<String> = t.variables.iter().map(|v| v.name.clone()).collect();
    for v in &t.variables {
        match &v.kind {
            VariableKind::Domain { domain, .. } => c.code(&format!("variables.{}.domain", v.name), domain, &vars),
            VariableKind::Formula(f) => c.code(&format!("variables.{}.formula", v.name), f, &vars),
        }
    }
    if let Some(cycle) = variable_cycle(t) {
        c.error("variables".into(), format!("cyclic dependency: {}", cycle.join(" -> ")));
    }

    let mut scope = vars.clone();
    for s in &c.t.symbols {
        let loc = format!("symbols.{}", s.name);
        match &s.kind {
            SymbolKind::Defined { source, desc, .. } => {
                for (i, src) in source.iter().enumerate() {
                    c.code(&format!("{loc}.source[{i}]"), src, &scope);
                }
                let inner = with(&scope, &["_names", "_index"]);
                for d in desc {
                    c.template(&format!("{loc}.desc"), d, &inner);
                }
            }
            SymbolKind::Derived { selection, formula, desc } => {
                c.selection(&loc, selection, &scope);
                let inner = with(&scope, &["_sym", "_index"]);
                if let Some(f) = formula {
                    c.code(&format!("{loc}.formula"), f, &inner);
                }
                if let Some(d) = desc {
                    c.template(&format!("{loc}.desc"), d, &inner);
                }
            }
        }
        scope.insert(s.name.clone());
    }

    let conditions = |c: &mut Checker<'_>, list: &[ConditionDecl], prefix: &str, scope: &BTreeSet<String>| {
        for cond in list {
            let loc = format!("{prefix}.{}", cond.name);
            let inner = match &cond.selection {
                Some(sel) => {
                    c.selection(&loc, sel, scope);
                    with(scope, &["_sym", "_index"])
                }
                None => scope.clone(),
            };
            c.code(&format!("{loc}.formula"), &cond.formula, &inner);
            if let Some(d) = &cond.desc {
                c.template(&format!("{loc}.desc"), d, &inner);
            }
        }
    };
    conditions(&mut c, &t.conditions, "conditions", &scope);

    if let Some(pg) = &t.post_generation {
        for (name, f) in &pg.vars {
            let inner = with(&scope, &["_sol"]);
            c.code(&format!("post_generation.post_gen_vars.{name}"), f, &inner);
            scope.insert(name.clone());
        }
        conditions(&mut c, &pg.conditions, "post_generation.post_gen_conditions", &scope);
    }
    if let Some(o) = &t.optimize {
        c.code("optimize.formula", &o.formula, &scope);
    }

    for q in &t.queries {
        let loc = format!("queries.{}", q.name);
        c.template(&format!("{loc}.desc"), &q.desc, &scope);
        match &q.kind {
            QueryKind::Open {
                ans_formula,
                ans_text,
                ans_assertion,
                ..
            } => {
                c.code(&format!("{loc}.ans_formula"), ans_formula, &with(&scope, &["_solutions", "_model"]));
                let ans_scope = with(&scope, &["_ans", "_solutions"]);
                match ans_text {
                    AnsText::Template(tpl) => c.template(&format!("{loc}.ans_text"), tpl, &ans_scope),
                    AnsText::Expr(e) => c.code(&format!("{loc}.ans_text"), e, &ans_scope),
                }
                if let Some(a) = ans_assertion {
                    c.code(&format!("{loc}.ans_assertion"), a, &ans_scope);
                }
            }
            QueryKind::Selection { templates, .. } => {
                for (i, tpl) in templates.iter().enumerate() {
                    let tloc = format!("{loc}.templates[{i}]");
                    c.selection(&tloc, &tpl.selection, &scope);
                    c.code(
                        &format!("{tloc}.opt_formula"),
                        &tpl.opt_formula,
                        &with(&scope, &["_opt", "_model", "_solutions"]),
                    );
                    c.template(&format!("{tloc}.opt_text"), &tpl.opt_text, &with(&scope, &["_opt"]));
                }
            }
        }
    }

    let mut top = with(&scope, &["conditions", "queries"]);
    top.extend(t.conditions.iter().map(|x| x.name.clone()));
    top.extend(t.queries.iter().map(|x| x.name.clone()));
    if let Some(pg) = &t.post_generation {
        top.extend(pg.conditions.iter().map(|x| x.name.clone()));
    }
    c.template("desc", &t.desc, &top);
    c.out
}
