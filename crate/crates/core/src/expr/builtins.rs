//! Builtin function library.

use std::rc::Rc;

use super::eval::{binary, compare};
use super::{faker, Env, Value};
use crate::error::{Error, Result};
use crate::expr::ast::{BinOp, CmpOp};
use crate::solver::term::{Sort, Term, TermRef};

type Builtin = fn(Vec<Value>, &mut Env) -> Result<Value>;

pub(crate) fn lookup(name: &str) -> Option<Builtin> {
    Some(match name {
        "randint" => randint,
        "get_faker" | "entity_fakers" => get_faker,
        "generate_letters" => generate_letters,
        "range" => range,
        "len" => len,
        "sum" | "Sum" => sum,
        "str" => |a, _| one(a, "str").and_then(|v| Ok(Value::str(&v.py_str()?))),
        "round" => round,
        "zip" => zip,
        "enumerate" => enumerate,
        "abs" => abs,
        "min" => |a, _| extreme(a, "min", CmpOp::Lt),
        "max" => |a, _| extreme(a, "max", CmpOp::Gt),
        "int" => int,
        "float" => |a, _| one(a, "float").and_then(|v| v.as_f64().map(Value::Float)),
        "sorted" => sorted,
        "list" => |a, _| one(a, "list").and_then(|v| v.iter_items().map(Value::list)),
        "And" => |a, _| and(flatten_args(a)),
        "Or" => |a, _| or(flatten_args(a)),
        "Not" => |a, _| one(a, "Not").and_then(|v| not(&v)),
        "Implies" => implies,
        "Xor" => xor,
        "If" => if_then_else,
        "Distinct" => |a, _| distinct(flatten_args(a)),
        "gen_event_count_condition" => gen_event_count_condition,
        "make_expr" => make_expr,
        "get_value" => get_value,
        "get_p" => get_p,
        "get_desc" => get_desc,
        "get_TF_events_for_each_solution" => get_tf_events,
        "to_unique" => to_unique,
        _ => return None,
    })
}

/// Native operators selectable from `custom_operator` as `plugin:<name>`.
pub(crate) const PLUGINS: &[(&str, super::PluginFn)] = &[
    ("gcd", plugin_gcd),
    ("lcm", plugin_lcm),
    ("factorial", plugin_factorial),
    ("is_prime", plugin_is_prime),
];

fn arity(args: &[Value], name: &str, lo: usize, hi: usize) -> Result<()> {
    if args.len() < lo || args.len() > hi {
        let want = if lo == hi { lo.to_string() } else { format!("{lo} to {hi}") };
        return Err(Error::Arity(format!("{name}() takes {want} arguments, {} given", args.len())));
    }
    Ok(())
}

fn one(mut args: Vec<Value>, name: &str) -> Result<Value> {
    arity(&args, name, 1, 1)?;
    Ok(args.remove(0))
}

fn two(mut args: Vec<Value>, name: &str) -> Result<(Value, Value)> {
    arity(&args, name, 2, 2)?;
    let b = args.pop().expect("two args");
    let a = args.pop().expect("two args");
    Ok((a, b))
}

/// A single list argument stands for its items.
fn flatten_args(args: Vec<Value>) -> Vec<Value> {
    if args.len() == 1 {
        if let Value::List(_) | Value::Tuple(_) | Value::Group(_) = &args[0] {
            if let Ok(items) = args[0].iter_items() {
                return items;
            }
        }
    }
    args
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.unsigned_abs(), b.unsigned_abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a as i64
}

fn plugin_gcd(args: &[Value]) -> Result<Value> {
    arity(args, "gcd", 2, 2)?;
    Ok(Value::Int(gcd(args[0].as_int()?, args[1].as_int()?)))
}

fn plugin_lcm(args: &[Value]) -> Result<Value> {
    arity(args, "lcm", 2, 2)?;
    let (a, b) = (args[0].as_int()?, args[1].as_int()?);
    if a == 0 || b == 0 {
        return Ok(Value::Int(0));
    }
    Ok(Value::Int((a / gcd(a, b) * b).abs()))
}

fn plugin_factorial(args: &[Value]) -> Result<Value> {
    arity(args, "factorial", 1, 1)?;
    let n = args[0].as_int()?;
    if !(0..=20).contains(&n) {
        return Err(Error::TypeMismatch(format!("factorial({n}) is out of range")));
    }
    Ok(Value::Int((1..=n).product()))
}

fn plugin_is_prime(args: &[Value]) -> Result<Value> {
    arity(args, "is_prime", 1, 1)?;
    let n = args[0].as_int()?;
    Ok(Value::Bool(n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)))
}

fn randint(args: Vec<Value>, env: &mut Env) -> Result<Value> {
    let (a, b) = two(args, "randint")?;
    let (lo, hi) = (a.as_int()?, b.as_int()?);
    if lo > hi {
        return Err(Error::EmptyDomain(format!("randint({lo}, {hi})")));
    }
    Ok(Value::Int(env.rng("randint")?.int_in(lo, hi)))
}

fn get_faker(args: Vec<Value>, env: &mut Env) -> Result<Value> {
    let (a, b) = two(args, "get_faker")?;
    // both argument orders appear in the wild
    let (count, kind) = match (&a, &b) {
        (Value::Str(k), n) => (n.as_int()?, k.to_string()),
        (n, Value::Str(k)) => (n.as_int()?, k.to_string()),
        _ => return Err(Error::TypeMismatch("get_faker expects a count and an entity kind".into())),
    };
    let drawn = faker::draw(&kind, count, env.rng("get_faker")?)?;
    Ok(Value::list(drawn.iter().map(|s| Value::str(s)).collect()))
}

fn generate_letters(args: Vec<Value>, _: &mut Env) -> Result<Value> {
    let n = one(args, "generate_letters")?.as_int()?;
    Ok(Value::list(faker::letters(n)?.iter().map(|s| Value::str(s)).collect()))
}

fn range(args: Vec<Value>, _: &mut Env) -> Result<Value> {
    arity(&args, "range", 1, 3)?;
    let ints: Vec<i64> = args.iter().map(Value::as_int).collect::<Result<_>>()?;
    let (start, stop, step) = match ints.as_slice() {
        [stop] => (0, *stop, 1),
        [start, stop] => (*start, *stop, 1),
        [start, stop, step] => (*start, *stop, *step),
        _ => unreachable!(),
    };
    if step == 0 {
        return Err(Error::TypeMismatch("range() step must not be zero".into()));
    }
    let mut out = Vec::new();
    let mut i = start;
    while (step > 0 && i < stop) || (step < 0 && i > stop) {
        out.push(Value::Int(i));
        i += step;
    }
    Ok(Value::list(out))
}

fn len(args: Vec<Value>, _: &mut Env) -> Result<Value> {
    let v = one(args, "len")?;
    Ok(Value::Int(match &v {
        Value::List(xs) | Value::Tuple(xs) => xs.len(),
        Value::Str(s) => s.chars().count(),
        Value::Group(g) => g.len(),
        other => return Err(Error::TypeMismatch(format!("{} has no length", other.type_name()))),
    } as i64))
}

fn sum(args: Vec<Value>, _: &mut Env) -> Result<Value> {
    let items = flatten_args(args);
    let mut acc = Value::Int(0);
    for it in &items {
        acc = binary(BinOp::Add, &acc, it)?;
    }
    Ok(acc)
}

fn round(args: Vec<Value>, _: &mut Env) -> Result<Value> {
    arity(&args, "round", 1, 2)?;
    let x = args[0].folded();
    match (x, args.get(1)) {
        (Value::Int(v), _) => Ok(Value::Int(v)),
        (Value::Bool(b), _) => Ok(Value::Int(b as i64)),
        (Value::Float(f), None) => Ok(Value::Int(f.round_ties_even() as i64)),
        (Value::Float(f), Some(n)) => {
            let p = 10f64.powi(n.as_int()? as i32);
            Ok(Value::Float((f * p).round_ties_even() / p))
        }
        (other, _) => Err(Error::TypeMismatch(format!("cannot round {}", other.type_name()))),
    }
}

fn zip(args: Vec<Value>, _: &mut Env) -> Result<Value> {
    let cols: Vec<Vec<Value>> = args.iter().map(Value::iter_items).collect::<Result<_>>()?;
    let n = cols.iter().map(Vec::len).min().unwrap_or(0);
    Ok(Value::list(
        (0..n)
            .map(|i| Value::tuple(cols.iter().map(|c| c[i].clone()).collect()))
            .collect(),
    ))
}

fn enumerate(args: Vec<Value>, _: &mut Env) -> Result<Value> {
    arity(&args, "enumerate", 1, 2)?;
    let start = args.get(1).map(Value::as_int).transpose()?.unwrap_or(0);
    let items = args[0].iter_items()?;
    Ok(Value::list(
        items
            .into_iter()
            .enumerate()
            .map(|(i, v)| Value::tuple(vec![Value::Int(start + i as i64), v]))
            .collect(),
    ))
}

fn abs(args: Vec<Value>, _: &mut Env) -> Result<Value> {
    let v = one(args, "abs")?.folded();
    match v {
        Value::Int(x) => Ok(Value::Int(x.abs())),
        Value::Bool(b) => Ok(Value::Int(b as i64)),
        Value::Float(x) => Ok(Value::Float(x.abs())),
        Value::Term(t) => {
            let neg = Rc::new(Term::Neg(t.clone()));
            let nonneg = Rc::new(Term::Cmp(CmpOp::Ge, t.clone(), Rc::new(Term::Int(0))));
            Ok(Value::term(Term::Ite(nonneg, t, neg)))
        }
        other => Err(Error::TypeMismatch(format!("abs() of {}", other.type_name()))),
    }
}

fn extreme(args: Vec<Value>, name: &str, op: CmpOp) -> Result<Value> {
    let items = flatten_args(args);
    let mut best: Option<Value> = None;
    for it in items {
        best = Some(match best {
            None => it,
            Some(b) => {
                if compare(op, &it, &b)?.truthy()? {
                    it
                } else {
                    b
                }
            }
        });
    }
    best.ok_or_else(|| Error::TypeMismatch(format!("{name}() of an empty sequence")))
}

fn int(args: Vec<Value>, _: &mut Env) -> Result<Value> {
    match one(args, "int")?.folded() {
        Value::Float(f) => Ok(Value::Int(f.trunc() as i64)),
        Value::Str(s) => s
            .trim()
            .parse()
            .map(Value::Int)
            .map_err(|_| Error::TypeMismatch(format!("invalid integer text '{s}'"))),
        other => other.as_int().map(Value::Int),
    }
}

fn sorted(args: Vec<Value>, _: &mut Env) -> Result<Value> {
    let mut items = one(args, "sorted")?.iter_items()?;
    let mut err = None;
    items.sort_by(|a, b| {
        if compare(CmpOp::Lt, a, b).and_then(|v| v.truthy()).unwrap_or_else(|e| {
            err = Some(e);
            false
        }) {
            std::cmp::Ordering::Less
        } else if compare(CmpOp::Lt, b, a).and_then(|v| v.truthy()).unwrap_or(false) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(Value::list(items)),
    }
}

/// Conjunction with constant folding.
pub(crate) fn and(items: Vec<Value>) -> Result<Value> {
    junction(items, true)
}

pub(crate) fn or(items: Vec<Value>) -> Result<Value> {
    junction(items, false)
}

fn junction(items: Vec<Value>, is_and: bool) -> Result<Value> {
    let mut terms: Vec<TermRef> = Vec::new();
    for it in items {
        let it = it.folded();
        match &it {
            Value::Term(_) => {
                let t = it.bool_term()?;
                match (&*t, is_and) {
                    (Term::And(xs), true) | (Term::Or(xs), false) => terms.extend(xs.iter().cloned()),
                    _ => terms.push(t),
                }
            }
            Value::List(_) | Value::Tuple(_) => {
                let nested = junction(it.iter_items()?, is_and)?;
                if let Some(v) = push_folded(&mut terms, nested, is_and)? {
                    return Ok(v);
                }
            }
            _ => {
                if it.truthy()? != is_and {
                    return Ok(Value::Bool(!is_and));
                }
            }
        }
    }
    Ok(match terms.len() {
        0 => Value::Bool(is_and),
        1 => Value::Term(terms.pop().expect("one term")),
        _ => Value::term(if is_and { Term::And(terms) } else { Term::Or(terms) }),
    })
}

fn push_folded(terms: &mut Vec<TermRef>, v: Value, is_and: bool) -> Result<Option<Value>> {
    match v {
        Value::Bool(b) if b != is_and => Ok(Some(Value::Bool(b))),
        Value::Bool(_) => Ok(None),
        other => {
            terms.push(other.bool_term()?);
            Ok(None)
        }
    }
}

fn not(v: &Value) -> Result<Value> {
    match v.folded() {
        Value::Term(_) => {
            let t = v.bool_term()?;
            Ok(match &*t {
                Term::Not(inner) => Value::Term(inner.clone()),
                _ => Value::term(Term::Not(t)),
            })
        }
        other => Ok(Value::Bool(!other.truthy()?)),
    }
}

fn implies(args: Vec<Value>, _: &mut Env) -> Result<Value> {
    let (a, b) = two(args, "Implies")?;
    let (a, b) = (a.folded(), b.folded());
    match (&a, &b) {
        (Value::Term(_), Value::Term(_)) => Ok(Value::term(Term::Implies(a.bool_term()?, b.bool_term()?))),
        (Value::Term(_), _) => {
            if b.truthy()? {
                Ok(Value::Bool(true))
            } else {
                not(&a)
            }
        }
        (_, _) => {
            if a.truthy()? {
                match b {
                    Value::Term(_) => Ok(Value::Term(b.bool_term()?)),
                    _ => Ok(Value::Bool(b.truthy()?)),
                }
            } else {
                Ok(Value::Bool(true))
            }
        }
    }
}

fn xor(args: Vec<Value>, _: &mut Env) -> Result<Value> {
    let (a, b) = two(args, "Xor")?;
    let (a, b) = (a.folded(), b.folded());
    match (&a, &b) {
        (Value::Term(_), Value::Term(_)) => Ok(Value::term(Term::Xor(a.bool_term()?, b.bool_term()?))),
        (Value::Term(_), c) | (c, Value::Term(_)) => {
            let t = if matches!(a, Value::Term(_)) { &a } else { &b };
            if c.truthy()? {
                not(t)
            } else {
                Ok(Value::Term(t.bool_term()?))
            }
        }
        _ => Ok(Value::Bool(a.truthy()? != b.truthy()?)),
    }
}

fn if_then_else(mut args: Vec<Value>, _: &mut Env) -> Result<Value> {
    arity(&args, "If", 3, 3)?;
    let e = args.pop().expect("3 args");
    let t = args.pop().expect("3 args");
    let c = args.pop().expect("3 args").folded();
    match c {
        Value::Term(_) => {
            let (tt, et) = (t.to_term()?, e.to_term()?);
            if tt.sort() != et.sort() && !matches!(*tt, Term::Int(_) | Term::Bool(_)) && !matches!(*et, Term::Int(_) | Term::Bool(_)) {
                return Err(Error::TypeMismatch("If branches have different sorts".into()));
            }
            Ok(Value::term(Term::Ite(c.bool_term()?, tt, et)))
        }
        other => Ok(if other.truthy()? { t } else { e }),
    }
}

fn distinct(items: Vec<Value>) -> Result<Value> {
    let items: Vec<Value> = items.iter().map(Value::folded).collect();
    if items.iter().any(|v| matches!(v, Value::Term(_))) {
        let terms: Vec<TermRef> = items.iter().map(Value::to_term).collect::<Result<_>>()?;
        return Ok(Value::term(Term::Distinct(terms)));
    }
    for i in 0..items.len() {
        for j in i + 1..items.len() {
            if items[i].concrete_eq(&items[j]) == Some(true) {
                return Ok(Value::Bool(false));
            }
        }
    }
    Ok(Value::Bool(true))
}

fn gen_event_count_condition(args: Vec<Value>, _: &mut Env) -> Result<Value> {
    arity(&args, "gen_event_count_condition", 2, 3)?;
    let events = args[0].iter_items()?;
    let mode = args[1].as_str()?;
    match mode {
        "equal" => {
            let n = args
                .get(2)
                .ok_or_else(|| Error::Arity("gen_event_count_condition(..., 'equal', n) needs n".into()))?;
            let mut count = Value::Int(0);
            for e in &events {
                let one = match e.folded() {
                    Value::Term(_) => Value::term(Term::Ite(e.bool_term()?, Rc::new(Term::Int(1)), Rc::new(Term::Int(0)))),
                    other => Value::Int(other.truthy()? as i64),
                };
                count = binary(BinOp::Add, &count, &one)?;
            }
            compare(CmpOp::Eq, &count, n)
        }
        "distinct" => distinct(events),
        other => Err(Error::UnknownOperatorTag(other.to_string())),
    }
}

fn make_expr(args: Vec<Value>, _: &mut Env) -> Result<Value> {
    arity(&args, "make_expr", 3, 3)?;
    let op = match args[0].as_str()? {
        "eq" | "==" => CmpOp::Eq,
        "ne" | "!=" => CmpOp::Ne,
        "lt" | "<" => CmpOp::Lt,
        "le" | "<=" => CmpOp::Le,
        "gt" | ">" => CmpOp::Gt,
        "ge" | ">=" => CmpOp::Ge,
        other => return Err(Error::UnknownOperatorTag(other.to_string())),
    };
    compare(op, &args[1], &args[2])
}

fn model_value(model: &crate::solver::Model, v: &Value) -> Result<Value> {
    match v {
        Value::Term(t) => {
            let x = t.eval(&model.values).ok_or(Error::ForeignModel)?;
            Ok(match t.sort() {
                Sort::Bool => Value::Bool(x != 0),
                Sort::Int => Value::Int(x),
            })
        }
        Value::List(xs) => Ok(Value::list(xs.iter().map(|x| model_value(model, x)).collect::<Result<_>>()?)),
        Value::Tuple(xs) => Ok(Value::tuple(xs.iter().map(|x| model_value(model, x)).collect::<Result<_>>()?)),
        Value::Group(g) => model_value(model, &Value::list(g.items(g))),
        Value::Entity(..) => Err(Error::TypeMismatch("get_value needs an attribute; use .get(name)".into())),
        other => Ok(other.clone()),
    }
}

fn get_value(args: Vec<Value>, env: &mut Env) -> Result<Value> {
    let (m, v) = two(args, "get_value")?;
    let Value::Model(model) = m else {
        return Err(Error::TypeMismatch(format!("get_value expects a model, found {}", m.type_name())));
    };
    if model.tag != env.model_tag {
        return Err(Error::ForeignModel);
    }
    model_value(&model, &v)
}

fn get_p(args: Vec<Value>, env: &mut Env) -> Result<Value> {
    let (v, src) = two(args, "get_p")?;
    env.symbols.source_of(&v, src.as_str()?)
}

fn get_desc(args: Vec<Value>, _: &mut Env) -> Result<Value> {
    match one(args, "get_desc")? {
        Value::Group(g) => Ok(Value::list(g.descs.iter().map(|d| Value::str(d)).collect())),
        other => Err(Error::TypeMismatch(format!("get_desc expects a symbol group, found {}", other.type_name()))),
    }
}

fn get_tf_events(args: Vec<Value>, env: &mut Env) -> Result<Value> {
    arity(&args, "get_TF_events_for_each_solution", 3, 3)?;
    let events = args[0].iter_items()?;
    let models = args[1].iter_items()?;
    let target = &args[2];
    let mut out = Vec::with_capacity(models.len());
    for m in &models {
        let Value::Model(model) = m else {
            return Err(Error::TypeMismatch(format!("expected models, found {}", m.type_name())));
        };
        if model.tag != env.model_tag {
            return Err(Error::ForeignModel);
        }
        let mut hits = Vec::new();
        for e in &events {
            if model_value(model, e)?.concrete_eq(target) == Some(true) {
                hits.push(e.clone());
            }
        }
        out.push(Value::list(hits));
    }
    Ok(Value::list(out))
}

fn to_unique(args: Vec<Value>, _: &mut Env) -> Result<Value> {
    let items = one(args, "to_unique")?.iter_items()?;
    let mut out: Vec<Value> = Vec::new();
    for it in items {
        if !out.iter().any(|o| o.concrete_eq(&it) == Some(true)) {
            out.push(it);
        }
    }
    Ok(Value::list(out))
}
