//! Randomized choices: variable values and constrained selections over pools.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::expr::{Env, Value};
use crate::rng::RngStream;
use crate::symbols::SymbolRegistry;
use crate::spec::{Code, CustomCond, PuzzleTemplate, ScalarType, Scope, SelectionSpec, VariableKind};

/// Draw attempts per selected instance before giving up.
pub const SELECTION_ATTEMPTS: usize = 64;

/// Float variables are rounded to this many decimals.
pub const FLOAT_DECIMALS: i32 = 6;

/// Pool positions of one selected instance, `[dim][source][item]`.
pub type Pick = Vec<Vec<Vec<usize>>>;

/// Result of [`select_with_constraints`].
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    /// The `_sym` / `_opt` binding per instance.
    pub tuples: Vec<Value>,
    pub indices: Vec<Pick>,
}

/// One sampled variable.
#[derive(Debug, Clone)]
pub struct VarDraw {
    pub name: String,
    pub value: Value,
    /// Closed interval the value was drawn from, for interval domains.
    pub interval: Option<(f64, f64)>,
}

/// Evaluation order of variables, dependencies first, ties in declaration order.
pub fn variable_order(t: &PuzzleTemplate) -> Result<Vec<usize>> {
    if let Some(cycle) = crate::spec::variable_cycle(t) {
        return Err(Error::CyclicDependency(cycle));
    }
    let names: HashMap<&str, usize> = t.variables.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect();
    let deps: Vec<BTreeSet<usize>> = t
        .variables
        .iter()
        .map(|v| {
            variable_expr(&v.kind)
                .expr
                .free_names()
                .iter()
                .filter_map(|n| names.get(n.as_str()).copied())
                .collect()
        })
        .collect();
    let mut done = vec![false; deps.len()];
    let mut order = Vec::with_capacity(deps.len());
    while order.len() < deps.len() {
        let next = (0..deps.len())
            .find(|&i| !done[i] && deps[i].iter().all(|&d| done[d]))
            .expect("acyclic graph always has a ready node");
        done[next] = true;
        order.push(next);
    }
    Ok(order)
}

fn variable_expr(kind: &VariableKind) -> &Code {
    match kind {
        VariableKind::Domain { domain, .. } => domain,
        VariableKind::Formula(f) => f,
    }
}

/// Names whose value depends, directly or transitively, on any of `roots`.
pub fn dependents(t: &PuzzleTemplate, roots: &[String]) -> BTreeSet<String> {
    let mut out: BTreeSet<String> = roots.iter().cloned().collect();
    loop {
        let before = out.len();
        for v in &t.variables {
            if variable_expr(&v.kind).expr.free_names().iter().any(|n| out.contains(n)) {
                out.insert(v.name.clone());
            }
        }
        if out.len() == before {
            return out;
        }
    }
}

/// Sample every variable in dependency order, binding each into `env`.
///
/// Names in `fixed` are taken verbatim instead of drawn or computed.
pub fn sample_variables(t: &PuzzleTemplate, env: &mut Env, fixed: &HashMap<String, Value>) -> Result<Vec<VarDraw>> {
    let mut draws = Vec::with_capacity(t.variables.len());
    for i in variable_order(t)? {
        let v = &t.variables[i];
        let (value, interval) = match &v.kind {
            VariableKind::Formula(f) => {
                let value = match fixed.get(&v.name) {
                    Some(x) => x.clone(),
                    None => env.eval_with(&f.expr, &[])?,
                };
                (value, None)
            }
            VariableKind::Domain { ty, domain } => {
                let dom = env.eval_with(&domain.expr, &[]).map_err(|e| match e {
                    Error::UnboundName(n) => Error::UnboundName(format!("{n} (in the domain of `{}`)", v.name)),
                    other => other,
                })?;
                match fixed.get(&v.name) {
                    Some(x) => (x.clone(), interval_of(*ty, &dom, &v.name).ok().flatten()),
                    None => draw_domain(*ty, &dom, &v.name, env)?,
                }
            }
        };
        env.set(&v.name, value.clone());
        draws.push(VarDraw {
            name: v.name.clone(),
            value,
            interval,
        });
    }
    Ok(draws)
}

fn interval_of(ty: ScalarType, dom: &Value, name: &str) -> Result<Option<(f64, f64)>> {
    match (ty, dom) {
        (ScalarType::Int | ScalarType::Float, Value::List(xs) | Value::Tuple(xs)) if xs.len() == 2 => {
            let (lo, hi) = match ty {
                ScalarType::Int => (xs[0].as_count()? as f64, xs[1].as_count()? as f64),
                _ => (xs[0].as_f64()?, xs[1].as_f64()?),
            };
            if lo > hi {
                return Err(Error::EmptyDomain(format!("`{name}` has domain [{lo}, {hi}]")));
            }
            Ok(Some((lo, hi)))
        }
        _ => Ok(None),
    }
}

fn draw_domain(ty: ScalarType, dom: &Value, name: &str, env: &mut Env) -> Result<(Value, Option<(f64, f64)>)> {
    if let Some((lo, hi)) = interval_of(ty, dom, name)? {
        let rng = env.rng("variable domain")?;
        let v = match ty {
            ScalarType::Int => Value::Int(rng.int_in(lo as i64, hi as i64)),
            _ => {
                let scale = 10f64.powi(FLOAT_DECIMALS);
                Value::Float((rng.float_in(lo, hi) * scale).round() / scale)
            }
        };
        return Ok((v, Some((lo, hi))));
    }
    match dom {
        Value::List(xs) | Value::Tuple(xs) => {
            if xs.is_empty() {
                return Err(Error::EmptyDomain(format!("`{name}` has an empty choice set")));
            }
            let i = env.rng("variable domain")?.index(xs.len());
            Ok((coerce(ty, &xs[i], name)?, None))
        }
        scalar => Ok((coerce(ty, scalar, name)?, None)),
    }
}

fn coerce(ty: ScalarType, v: &Value, name: &str) -> Result<Value> {
    let bad = || Error::TypeMismatch(format!("`{name}` is declared {} but its domain yields {}", ty.name(), v.type_name()));
    Ok(match (ty, v) {
        (ScalarType::Int, Value::Int(_)) | (ScalarType::Bool, Value::Bool(_)) | (ScalarType::Text, Value::Str(_)) => {
            v.clone()
        }
        (ScalarType::Int, Value::Float(f)) => Value::Int(f.trunc() as i64),
        (ScalarType::Float, Value::Int(i)) => Value::Float(*i as f64),
        (ScalarType::Float, Value::Float(_)) => v.clone(),
        _ => return Err(bad()),
    })
}

/// Evaluate each source expression to its pool of items.
pub fn eval_pools(sources: &[Code], env: &mut Env) -> Result<Vec<Vec<Value>>> {
    sources
        .iter()
        .map(|s| {
            let v = env.eval_with(&s.expr, &[])?;
            match &v {
                Value::Str(_) => Err(Error::TypeMismatch(format!("source `{}` is text, not a pool", s.text))),
                _ => v.iter_items(),
            }
        })
        .collect()
}

/// Evaluate per-source amounts; `None` means one scalar item per source.
pub fn eval_amounts(spec: &SelectionSpec, env: &mut Env) -> Result<Option<Vec<usize>>> {
    let Some(amounts) = &spec.amount else {
        return Ok(None);
    };
    amounts
        .iter()
        .map(|a| {
            let k = env.eval_with(&a.expr, &[])?.as_count()?;
            usize::try_from(k).map_err(|_| Error::EmptyDomain(format!("amount `{}` evaluated to {k}", a.text)))
        })
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Resolve a `domain` count: an integer, or a `[lo, hi]` range drawn inclusively.
pub fn eval_count(domain: Option<&Code>, env: &mut Env) -> Result<usize> {
    let Some(code) = domain else {
        return Ok(1);
    };
    let v = env.eval_with(&code.expr, &[])?;
    let n = match &v {
        Value::List(xs) | Value::Tuple(xs) if xs.len() == 2 => {
            let (lo, hi) = (xs[0].as_count()?, xs[1].as_count()?);
            if lo > hi {
                return Err(Error::EmptyDomain(format!("count range `{}` is [{lo}, {hi}]", code.text)));
            }
            env.rng("count range")?.int_in(lo, hi)
        }
        other => other.as_count()?,
    };
    usize::try_from(n).map_err(|_| Error::EmptyDomain(format!("count `{}` evaluated to {n}", code.text)))
}

/// Build the `_sym` / `_opt` binding for one pick.
pub fn binding(pools: &[Vec<Value>], amounts: Option<&[usize]>, pick: &Pick) -> Value {
    let dims: Vec<Value> = pick
        .iter()
        .map(|per_source| {
            Value::tuple(
                per_source
                    .iter()
                    .enumerate()
                    .map(|(s, idx)| match amounts {
                        None => pools[s][idx[0]].clone(),
                        Some(_) => Value::list(idx.iter().map(|&i| pools[s][i].clone()).collect()),
                    })
                    .collect(),
            )
        })
        .collect();
    if dims.len() == 1 {
        dims.into_iter().next().unwrap()
    } else {
        Value::list(dims)
    }
}

/// Field values of one dim entry.
fn field_values(pools: &[Vec<Value>], amounts: Option<&[usize]>, entry: &[Vec<usize>], fields: &[usize]) -> Vec<Value> {
    fields
        .iter()
        .map(|&f| match amounts {
            None => pools[f][entry[f][0]].clone(),
            Some(_) => Value::list(entry[f].iter().map(|&i| pools[f][i].clone()).collect()),
        })
        .collect()
}

fn custom_holds(c: &CustomCond, args: Vec<Value>, env: &mut Env) -> Result<bool> {
    let bindings: Vec<(&str, Value)> = c.params.iter().map(String::as_str).zip(args).collect();
    env.eval_with(&c.body.expr, &bindings)?.folded().truthy()
}

/// Whether one pick satisfies `dim_cond` and the dim-scoped custom conditions.
pub fn pick_admissible(
    pools: &[Vec<Value>],
    spec: &SelectionSpec,
    amounts: Option<&[usize]>,
    pick: &Pick,
    env: &mut Env,
) -> Result<bool> {
    for entry in pick {
        for group in &spec.dim_cond {
            let vals = field_values(pools, amounts, entry, group);
            for a in 0..vals.len() {
                for b in a + 1..vals.len() {
                    if vals[a] == vals[b] {
                        return Ok(false);
                    }
                }
            }
        }
        for c in spec.custom_cond.iter().filter(|c| c.scope == Scope::Dim) {
            if !custom_holds(c, field_values(pools, amounts, entry, &c.fields), env)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Whether the domain-scoped custom conditions hold over a whole selection.
pub fn selection_admissible(
    pools: &[Vec<Value>],
    spec: &SelectionSpec,
    amounts: Option<&[usize]>,
    picks: &[Pick],
    env: &mut Env,
) -> Result<bool> {
    for c in spec.custom_cond.iter().filter(|c| c.scope == Scope::Domain) {
        let mut columns: Vec<Vec<Value>> = vec![Vec::new(); c.fields.len()];
        for pick in picks {
            for entry in pick {
                for (col, v) in columns.iter_mut().zip(field_values(pools, amounts, entry, &c.fields)) {
                    col.push(v);
                }
            }
        }
        if !custom_holds(c, columns.into_iter().map(Value::list).collect(), env)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Draw one unconstrained pick. `None` when a pool is too small.
pub fn draw_pick(
    pools: &[Vec<Value>],
    spec: &SelectionSpec,
    amounts: Option<&[usize]>,
    rng: &mut RngStream,
) -> Option<Pick> {
    let mut pick = Vec::with_capacity(spec.dim);
    for _ in 0..spec.dim {
        let mut entry = Vec::with_capacity(pools.len());
        for (s, pool) in pools.iter().enumerate() {
            let n = pool.len();
            let k = amounts.map_or(1, |a| a[s]);
            if k > 0 && n == 0 {
                return None;
            }
            let mut idx = if spec.duplicates(s) {
                (0..k).map(|_| rng.index(n)).collect::<Vec<_>>()
            } else {
                if k > n {
                    return None;
                }
                rng.sample_indices(n, k)
            };
            if !spec.ordered(s) {
                idx.sort_unstable();
            }
            entry.push(idx);
        }
        pick.push(entry);
    }
    Some(pick)
}

/// Draw `count` picks honoring every selection constraint.
pub fn select_with_constraints(
    pools: &[Vec<Value>],
    spec: &SelectionSpec,
    amounts: Option<&[usize]>,
    count: usize,
    env: &mut Env,
) -> Result<SelectionResult> {
    let exhausted = |what: &str| Error::SelectionExhausted(format!("{what} after {SELECTION_ATTEMPTS} attempts"));
    for _ in 0..SELECTION_ATTEMPTS {
        let mut picks: Vec<Pick> = Vec::with_capacity(count);
        while picks.len() < count {
            let mut found = None;
            for _ in 0..SELECTION_ATTEMPTS {
                let rng = env.rng("selection")?;
                let Some(pick) = draw_pick(pools, spec, amounts, rng) else {
                    return Err(Error::SelectionExhausted("a source pool is smaller than its amount".into()));
                };
                if spec.domain_cond && picks.contains(&pick) {
                    continue;
                }
                if pick_admissible(pools, spec, amounts, &pick, env)? {
                    found = Some(pick);
                    break;
                }
            }
            match found {
                Some(p) => picks.push(p),
                None => return Err(exhausted(&format!("could not draw instance {} of {count}", picks.len() + 1))),
            }
        }
        if selection_admissible(pools, spec, amounts, &picks, env)? {
            let tuples = picks.iter().map(|p| binding(pools, amounts, p)).collect();
            return Ok(SelectionResult { tuples, indices: picks });
        }
    }
    Err(exhausted("domain-scoped custom conditions never held"))
}

/// Validate recorded picks against the pools and rebuild their bindings.
pub fn replay_selection(
    pools: &[Vec<Value>],
    spec: &SelectionSpec,
    amounts: Option<&[usize]>,
    picks: &[Pick],
) -> Result<SelectionResult> {
    for pick in picks {
        let ok = pick.len() == spec.dim
            && pick.iter().all(|entry| {
                entry.len() == pools.len()
                    && entry.iter().enumerate().all(|(s, idx)| {
                        idx.len() == amounts.map_or(1, |a| a[s]) && idx.iter().all(|&i| i < pools[s].len())
                    })
            });
        if !ok {
            return Err(Error::ConfigShapeMismatch(format!("recorded indices {pick:?} do not fit the pools")));
        }
    }
    Ok(SelectionResult {
        tuples: picks.iter().map(|p| binding(pools, amounts, p)).collect(),
        indices: picks.to_vec(),
    })
}

/// Find the pick whose binding records as `params` (configs without indices).
pub fn locate_pick(
    pools: &[Vec<Value>],
    amounts: Option<&[usize]>,
    dim: usize,
    params: &serde_json::Value,
    registry: &SymbolRegistry,
) -> Result<Pick> {
    let mismatch = |what: &str| Error::ConfigShapeMismatch(format!("recorded params {params}: {what}"));
    let dims: Vec<&serde_json::Value> = if dim == 1 {
        vec![params]
    } else {
        params.as_array().ok_or_else(|| mismatch("expected one entry per dim"))?.iter().collect()
    };
    if dims.len() != dim {
        return Err(mismatch("wrong number of dims"));
    }
    let plain: Vec<Vec<serde_json::Value>> = pools
        .iter()
        .map(|p| p.iter().map(|x| registry.plain_json(x)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let locate = |s: usize, v: &serde_json::Value| -> Result<usize> {
        plain[s].iter().position(|p| p == v).ok_or_else(|| mismatch(&format!("{v} is not in source {s}")))
    };
    let mut pick = Vec::with_capacity(dim);
    for d in dims {
        let items = d.as_array().filter(|a| a.len() == pools.len()).ok_or_else(|| mismatch("one entry per source expected"))?;
        let mut entry = Vec::with_capacity(items.len());
        for (s, item) in items.iter().enumerate() {
            match amounts {
                None => entry.push(vec![locate(s, item)?]),
                Some(a) => {
                    let xs = item.as_array().filter(|x| x.len() == a[s]).ok_or_else(|| mismatch("amount differs"))?;
                    entry.push(xs.iter().map(|x| locate(s, x)).collect::<Result<_>>()?);
                }
            }
        }
        pick.push(entry);
    }
    Ok(pick)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec::parse_spec;

    fn letters(xs: &[&str]) -> Vec<Value> {
        xs.iter().map(|x| Value::str(x)).collect()
    }

    fn spec(order: bool, dup: bool, domain_cond: bool) -> SelectionSpec {
        let mut s = SelectionSpec::with_sources(vec![Code::parse("pool").unwrap()]);
        s.amount = Some(vec![Code::parse("2").unwrap()]);
        s.order = Some(vec![order]);
        s.duplicate = Some(vec![dup]);
        s.domain_cond = domain_cond;
        s
    }

    #[test]
    fn all_combinations_without_repeats() {
        let pools = vec![letters(&["A", "B", "C"])];
        let mut env = Env::with_rng(RngStream::new(3, 0));
        let r = select_with_constraints(&pools, &spec(false, false, true), Some(&[2]), 3, &mut env).unwrap();
        let mut got: Vec<Vec<usize>> = r.indices.iter().map(|p| p[0][0].clone()).collect();
        for g in &got {
            assert!(g[0] < g[1], "unordered draws are ascending");
        }
        got.sort();
        assert_eq!(got, vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
    }

    #[test]
    fn pigeonhole_exhausts() {
        let pools = vec![letters(&["A", "B", "C"])];
        let mut env = Env::with_rng(RngStream::new(3, 0));
        let e = select_with_constraints(&pools, &spec(false, false, true), Some(&[2]), 4, &mut env).unwrap_err();
        assert_eq!(e.class(), "SelectionExhausted");
    }

    #[test]
    fn duplicates_allowed_with_replacement() {
        let pools = vec![letters(&["x"])];
        let mut env = Env::with_rng(RngStream::new(1, 0));
        let r = select_with_constraints(&pools, &spec(true, true, true), Some(&[2]), 1, &mut env).unwrap();
        assert_eq!(r.indices, vec![vec![vec![vec![0, 0]]]]);
        assert_eq!(r.tuples[0].py_str().unwrap(), "(['x', 'x'],)");
    }

    #[test]
    fn dim_cond_and_custom_cond() {
        let doc = r#"
variables:
  xs: {formula: "range(4)"}
symbols:
  d:
    source: [xs, xs]
    domain: 5
    dim_cond: [[0, 1]]
    custom_cond:
    - {scope: dim, fields: [0, 1], constraint: "lambda a, b: a < b"}
desc: ""
"#;
        let t = parse_spec(doc).unwrap();
        let crate::spec::SymbolKind::Derived { selection, .. } = &t.symbols[0].kind else { panic!() };
        let mut env = Env::with_rng(RngStream::new(9, 0));
        env.set("xs", Value::list((0..4).map(Value::Int).collect()));
        let pools = eval_pools(&selection.source, &mut env).unwrap();
        let r = select_with_constraints(&pools, selection, None, 5, &mut env).unwrap();
        for p in &r.indices {
            assert!(p[0][0][0] < p[0][1][0]);
        }
    }

    #[test]
    fn variable_domains() {
        let doc = "variables:\n  p_num: {type: int, domain: \"[6, 6]\"}\n  select_num: {type: int, domain: \"[p_num // 2 - 1, p_num // 2 + 1]\"}\ndesc: \"\"\n";
        let t = parse_spec(doc).unwrap();
        let mut seen = BTreeSet::new();
        for seed in 0..200 {
            let mut env = Env::with_rng(RngStream::new(seed, 0));
            let d = sample_variables(&t, &mut env, &HashMap::new()).unwrap();
            seen.insert(d[1].value.as_int().unwrap());
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), vec![2, 3, 4]);

        let bad = parse_spec("variables:\n  x: {type: int, domain: \"[5, 4]\"}\ndesc: \"\"\n").unwrap();
        let mut env = Env::with_rng(RngStream::new(0, 0));
        let e = sample_variables(&bad, &mut env, &HashMap::new()).unwrap_err();
        assert_eq!(e.class(), "EmptyDomain");
    }

    #[test]
    fn cycles_are_reported() {
        let t = parse_spec("variables:\n  a: {formula: \"b + 1\"}\n  b: {formula: \"a + 1\"}\ndesc: \"\"\n").unwrap();
        let mut env = Env::with_rng(RngStream::new(0, 0));
        let e = sample_variables(&t, &mut env, &HashMap::new()).unwrap_err();
        assert_eq!(e.class(), "CyclicDependency");
    }
}
