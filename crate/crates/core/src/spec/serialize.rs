//! [`PuzzleTemplate`] back to a YAML document.

use serde_yaml::{Mapping, Value as Yaml};

use super::model::*;
use super::parse::DEFAULT_MAX_SOLUTION;
use crate::solver::term::Sort;

/// Serialize to YAML text that [`super::parse_spec_named`] reads back to an equal template.
pub fn serialize_spec(t: &PuzzleTemplate) -> String {
    let mut top = Mapping::new();
    if !t.custom_operators.is_empty() {
        let mut ops = Mapping::new();
        for (name, def) in &t.custom_operators {
            let text = match def {
                OperatorDef::Lambda { text, .. } => text.clone(),
                OperatorDef::Plugin(p) => format!("plugin:{p}"),
            };
            ops.insert(s(name), s(&text));
        }
        top.insert(s("custom_operators"), Yaml::Mapping(ops));
    }
    if !t.variables.is_empty() {
        let mut vars = Mapping::new();
        for v in &t.variables {
            let mut m = Mapping::new();
            match &v.kind {
                VariableKind::Domain { ty, domain } => {
                    m.insert(s("type"), s(ty.name()));
                    m.insert(s("domain"), s(&domain.text));
                }
                VariableKind::Formula(f) => {
                    m.insert(s("formula"), s(&f.text));
                }
            }
            if v.diff_factor != 0 {
                m.insert(s("diff_factor"), Yaml::Number(i64::from(v.diff_factor).into()));
            }
            vars.insert(s(&v.name), Yaml::Mapping(m));
        }
        top.insert(s("variables"), Yaml::Mapping(vars));
    }
    if !t.symbols.is_empty() {
        let mut syms = Mapping::new();
        for sym in &t.symbols {
            syms.insert(s(&sym.name), Yaml::Mapping(symbol(sym)));
        }
        top.insert(s("symbols"), Yaml::Mapping(syms));
    }
    if !t.conditions.is_empty() {
        top.insert(s("conditions"), conditions(&t.conditions));
    }
    if !t.calc_solution {
        top.insert(s("calc_solution"), Yaml::Bool(false));
    }
    if t.max_solution != DEFAULT_MAX_SOLUTION {
        top.insert(s("max_solution"), Yaml::Number((t.max_solution as u64).into()));
    }
    if let Some(pg) = &t.post_generation {
        let mut m = Mapping::new();
        let mut vars = Mapping::new();
        for (name, c) in &pg.vars {
            vars.insert(s(name), s(&c.text));
        }
        m.insert(s("post_gen_vars"), Yaml::Mapping(vars));
        m.insert(s("post_gen_conditions"), conditions(&pg.conditions));
        top.insert(s("post_generation"), Yaml::Mapping(m));
    }
    if let Some(o) = &t.optimize {
        let mut m = Mapping::new();
        let dir = match o.direction {
            OptimizeDirection::Minimize => "minimize",
            OptimizeDirection::Maximize => "maximize",
        };
        m.insert(s("type"), s(dir));
        m.insert(s("formula"), s(&o.formula.text));
        top.insert(s("optimize"), Yaml::Mapping(m));
    }
    if !t.queries.is_empty() {
        let mut qs = Mapping::new();
        for q in &t.queries {
            qs.insert(s(&q.name), Yaml::Mapping(query(q)));
        }
        top.insert(s("queries"), Yaml::Mapping(qs));
    }
    top.insert(s("desc"), s(t.desc.source()));
    serde_yaml::to_string(&Yaml::Mapping(top)).expect("YAML serialization of plain mappings")
}

fn s(text: &str) -> Yaml {
    Yaml::String(text.to_string())
}

fn codes(list: &[Code]) -> Yaml {
    Yaml::Sequence(list.iter().map(|c| s(&c.text)).collect())
}

fn bools(list: &[bool]) -> Yaml {
    Yaml::Sequence(list.iter().map(|b| Yaml::Bool(*b)).collect())
}

fn sort_name(sort: Sort) -> Yaml {
    s(match sort {
        Sort::Bool => "bool",
        Sort::Int => "int",
    })
}

fn selection(m: &mut Mapping, sel: &SelectionSpec) {
    m.insert(s("source"), codes(&sel.source));
    if let Some(a) = &sel.amount {
        m.insert(s("amount"), codes(a));
    }
    if let Some(o) = &sel.order {
        m.insert(s("order"), bools(o));
    }
    if let Some(d) = &sel.duplicate {
        m.insert(s("duplicate"), bools(d));
    }
    if let Some(d) = &sel.domain {
        m.insert(s("domain"), s(&d.text));
    }
    if !sel.domain_cond {
        m.insert(s("domain_cond"), Yaml::Bool(false));
    }
    if sel.dim != 1 {
        m.insert(s("dim"), Yaml::Number((sel.dim as u64).into()));
    }
    if !sel.dim_cond.is_empty() {
        let groups = sel
            .dim_cond
            .iter()
            .map(|g| Yaml::Sequence(g.iter().map(|i| Yaml::Number((*i as u64).into())).collect()))
            .collect();
        m.insert(s("dim_cond"), Yaml::Sequence(groups));
    }
    if !sel.custom_cond.is_empty() {
        let list = sel
            .custom_cond
            .iter()
            .map(|c| {
                let mut cm = Mapping::new();
                let scope = match c.scope {
                    Scope::Domain => "domain",
                    Scope::Dim => "dim",
                };
                cm.insert(s("scope"), s(scope));
                cm.insert(
                    s("fields"),
                    Yaml::Sequence(c.fields.iter().map(|i| Yaml::Number((*i as u64).into())).collect()),
                );
                cm.insert(s("constraint"), s(&c.text));
                Yaml::Mapping(cm)
            })
            .collect();
        m.insert(s("custom_cond"), Yaml::Sequence(list));
    }
}

fn symbol(sym: &SymbolDecl) -> Mapping {
    let mut m = Mapping::new();
    match &sym.kind {
        SymbolKind::Defined {
            source,
            attrs,
            sorts,
            desc,
        } => {
            m.insert(s("source"), codes(source));
            if attrs.is_empty() {
                m.insert(s("type"), sort_name(sorts[0]));
                if let Some(d) = desc.first() {
                    m.insert(s("desc"), s(d.source()));
                }
            } else {
                m.insert(s("attr"), Yaml::Sequence(attrs.iter().map(|a| s(a)).collect()));
                m.insert(s("type"), Yaml::Sequence(sorts.iter().map(|x| sort_name(*x)).collect()));
                if !desc.is_empty() {
                    m.insert(s("desc"), Yaml::Sequence(desc.iter().map(|d| s(d.source())).collect()));
                }
            }
        }
        SymbolKind::Derived {
            selection: sel,
            formula,
            desc,
        } => {
            selection(&mut m, sel);
            if let Some(f) = formula {
                m.insert(s("formula"), s(&f.text));
            }
            if let Some(d) = desc {
                m.insert(s("desc"), s(d.source()));
            }
        }
    }
    m
}

fn conditions(list: &[ConditionDecl]) -> Yaml {
    let mut out = Mapping::new();
    for c in list {
        let mut m = Mapping::new();
        if let Some(sel) = &c.selection {
            selection(&mut m, sel);
        }
        m.insert(s("formula"), s(&c.formula.text));
        if let Some(d) = &c.desc {
            m.insert(s("desc"), s(d.source()));
        }
        out.insert(s(&c.name), Yaml::Mapping(m));
    }
    Yaml::Mapping(out)
}

fn option_template(m: &mut Mapping, t: &OptionTemplate) {
    selection(m, &t.selection);
    let cond = match t.cond {
        CondScope::Any => "any",
        CondScope::All => "all",
    };
    m.insert(s("cond"), s(cond));
    m.insert(s("opt_formula"), s(&t.opt_formula.text));
    m.insert(s("opt_text"), s(t.opt_text.source()));
}

fn query(q: &QueryDecl) -> Mapping {
    let mut m = Mapping::new();
    m.insert(s("desc"), s(q.desc.source()));
    match &q.kind {
        QueryKind::Open {
            ans_formula,
            ans_text,
            ans_assertion,
            eval_type,
            query_type,
        } => {
            m.insert(s("ans_formula"), s(&ans_formula.text));
            m.insert(s("ans_text"), s(ans_text.source()));
            if let Some(a) = ans_assertion {
                m.insert(s("ans_assertion"), s(&a.text));
            }
            if let Some(e) = eval_type {
                m.insert(s("eval_type"), s(e.name()));
            }
            if let Some(qt) = query_type {
                m.insert(s("query_type"), s(qt));
            }
        }
        QueryKind::Selection {
            query_type,
            select_type,
            opt_num,
            templates,
            inline,
            redundancy_guard,
        } => {
            m.insert(s("query_type"), s(query_type));
            let st = match select_type {
                SelectType::Single => "single",
                SelectType::Multiple => "multiple",
            };
            m.insert(s("select_type"), s(st));
            m.insert(s("opt_num"), Yaml::Number((*opt_num as u64).into()));
            if !redundancy_guard {
                m.insert(s("redundancy_guard"), Yaml::Bool(false));
            }
            if *inline {
                option_template(&mut m, &templates[0]);
            } else {
                let list = templates
                    .iter()
                    .map(|t| {
                        let mut tm = Mapping::new();
                        option_template(&mut tm, t);
                        Yaml::Mapping(tm)
                    })
                    .collect();
                m.insert(s("templates"), Yaml::Sequence(list));
            }
        }
    }
    m
}
