//! Tree-walking evaluator.

use std::cmp::Ordering;

use super::ast::{BinOp, CmpOp, Expr, ForClause, Literal};
use super::{builtins, Env, Operator, Value};
use crate::error::{Error, Result};
use crate::solver::term::{py_floordiv, py_mod, Term};

/// Evaluate an expression in `env`.
pub fn evaluate(e: &Expr, env: &mut Env) -> Result<Value> {
    match e {
        Expr::Lit(l) => Ok(match l {
            Literal::Int(v) => Value::Int(*v),
            Literal::Float(v) => Value::Float(*v),
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Str(s) => Value::str(s),
            Literal::None => Value::None,
        }),
        Expr::Name(n) => env.get(n).cloned(),
        Expr::Neg(a) => {
            let v = evaluate(a, env)?;
            negate(&v)
        }
        Expr::Binary(op, a, b) => {
            let a = evaluate(a, env)?;
            let b = evaluate(b, env)?;
            binary(*op, &a, &b)
        }
        Expr::Compare(first, rest) => {
            let mut lhs = evaluate(first, env)?;
            let mut parts = Vec::new();
            for (op, e) in rest {
                let rhs = evaluate(e, env)?;
                let r = compare(*op, &lhs, &rhs)?;
                if let Value::Bool(false) = r {
                    return Ok(Value::Bool(false));
                }
                parts.push(r);
                lhs = rhs;
            }
            if parts.len() == 1 {
                Ok(parts.pop().expect("one comparison"))
            } else {
                builtins::and(parts)
            }
        }
        Expr::IfElse {
            cond,
            then,
            otherwise,
        } => {
            if evaluate(cond, env)?.truthy()? {
                evaluate(then, env)
            } else {
                evaluate(otherwise, env)
            }
        }
        Expr::Call(name, args) => {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(evaluate(a, env)?);
            }
            call(name, vals, env)
        }
        Expr::Index(target, index) => {
            let t = evaluate(target, env)?;
            let i = evaluate(index, env)?;
            index_value(&t, &i)
        }
        Expr::Slice(target, lo, hi) => {
            let t = evaluate(target, env)?;
            let lo = lo.as_ref().map(|e| evaluate(e, env)).transpose()?;
            let hi = hi.as_ref().map(|e| evaluate(e, env)).transpose()?;
            slice(&t, lo.as_ref(), hi.as_ref())
        }
        Expr::GetAttr(target, attr) => {
            let t = evaluate(target, env)?;
            let a = evaluate(attr, env)?;
            let a = a.as_str()?;
            match &t {
                Value::Group(g) => g.attr_column(a),
                Value::Entity(g, i) => g.entity_attr(*i, a),
                other => Err(Error::TypeMismatch(format!("`.get` needs a symbol group or entity, found {}", other.type_name()))),
            }
        }
        Expr::Join(sep, items) => {
            let sep = evaluate(sep, env)?;
            let sep = sep.as_str()?.to_string();
            let items = evaluate(items, env)?.iter_items()?;
            let mut parts = Vec::with_capacity(items.len());
            for it in &items {
                match it {
                    Value::Str(s) => parts.push(s.to_string()),
                    other => {
                        return Err(Error::TypeMismatch(format!(
                            "join expects text items, found {}",
                            other.type_name()
                        )))
                    }
                }
            }
            Ok(Value::str(&parts.join(&sep)))
        }
        Expr::List(items) => {
            let mut out = Vec::with_capacity(items.len());
            for it in items {
                out.push(evaluate(it, env)?);
            }
            Ok(Value::list(out))
        }
        Expr::Tuple(items) => {
            let mut out = Vec::with_capacity(items.len());
            for it in items {
                out.push(evaluate(it, env)?);
            }
            Ok(Value::tuple(out))
        }
        Expr::Comp {
            elem,
            clauses,
            filter,
        } => {
            let mut out = Vec::new();
            let mark = env.mark();
            let r = comprehension(elem, clauses, filter.as_deref(), env, &mut out);
            env.reset(mark);
            r.map(|_| Value::list(out))
        }
    }
}

fn comprehension(
    elem: &Expr,
    clauses: &[ForClause],
    filter: Option<&Expr>,
    env: &mut Env,
    out: &mut Vec<Value>,
) -> Result<()> {
    let Some((first, rest)) = clauses.split_first() else {
        if let Some(f) = filter {
            if !evaluate(f, env)?.truthy()? {
                return Ok(());
            }
        }
        out.push(evaluate(elem, env)?);
        return Ok(());
    };
    let items = evaluate(&first.iter, env)?.iter_items()?;
    for item in items {
        let mark = env.mark();
        bind_targets(first, item, env)?;
        comprehension(elem, rest, filter, env, out)?;
        env.reset(mark);
    }
    Ok(())
}

fn bind_targets(clause: &ForClause, item: Value, env: &mut Env) -> Result<()> {
    if !clause.unpack {
        env.push_local(&clause.targets[0], item);
        return Ok(());
    }
    let parts = match &item {
        Value::List(xs) | Value::Tuple(xs) => xs.clone(),
        other => return Err(Error::TypeMismatch(format!("cannot unpack {}", other.type_name()))),
    };
    if parts.len() != clause.targets.len() {
        return Err(Error::TypeMismatch(format!(
            "cannot unpack {} values into {} names",
            parts.len(),
            clause.targets.len()
        )));
    }
    for (n, v) in clause.targets.iter().zip(parts.iter()) {
        env.push_local(n, v.clone());
    }
    Ok(())
}

fn call(name: &str, args: Vec<Value>, env: &mut Env) -> Result<Value> {
    if let Some(f) = builtins::lookup(name) {
        return f(args, env);
    }
    let op = env.operators.get(name).cloned();
    match op {
        Some(Operator::Lambda(l)) => {
            if l.params.len() != args.len() {
                return Err(Error::Arity(format!(
                    "`{name}` takes {} arguments, {} given",
                    l.params.len(),
                    args.len()
                )));
            }
            let bindings: Vec<(&str, Value)> = l.params.iter().map(String::as_str).zip(args).collect();
            env.eval_with(&l.body, &bindings)
        }
        Some(Operator::Plugin(_, f)) => f(&args),
        None => Err(Error::UnboundName(format!("{name}()"))),
    }
}

pub(crate) fn negate(v: &Value) -> Result<Value> {
    match v.folded() {
        Value::Int(x) => Ok(Value::Int(x.checked_neg().ok_or_else(overflow)?)),
        Value::Bool(b) => Ok(Value::Int(-(b as i64))),
        Value::Float(x) => Ok(Value::Float(-x)),
        Value::Term(t) => Ok(Value::term(Term::Neg(t))),
        other => Err(Error::TypeMismatch(format!("cannot negate {}", other.type_name()))),
    }
}

fn overflow() -> Error {
    Error::TypeMismatch("integer overflow".into())
}

fn is_num(v: &Value) -> bool {
    matches!(v, Value::Int(_) | Value::Bool(_) | Value::Float(_))
}

pub(crate) fn binary(op: BinOp, a: &Value, b: &Value) -> Result<Value> {
    let (a, b) = (a.folded(), b.folded());
    if matches!(a, Value::Term(_)) || matches!(b, Value::Term(_)) {
        return symbolic_binary(op, &a, &b);
    }
    match (&a, &b) {
        (Value::Float(_), _) | (_, Value::Float(_)) if is_num(&a) && is_num(&b) => {
            let (x, y) = (a.as_f64()?, b.as_f64()?);
            Ok(Value::Float(match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div | BinOp::FloorDiv | BinOp::Mod if y == 0.0 => return Err(Error::DivisionByZero),
                BinOp::Div => x / y,
                BinOp::FloorDiv => (x / y).floor(),
                BinOp::Mod => x - y * (x / y).floor(),
            }))
        }
        _ if is_num(&a) && is_num(&b) => {
            let (x, y) = (a.as_int()?, b.as_int()?);
            Ok(match op {
                BinOp::Add => Value::Int(x.checked_add(y).ok_or_else(overflow)?),
                BinOp::Sub => Value::Int(x.checked_sub(y).ok_or_else(overflow)?),
                BinOp::Mul => Value::Int(x.checked_mul(y).ok_or_else(overflow)?),
                _ if y == 0 => return Err(Error::DivisionByZero),
                BinOp::Div => Value::Float(x as f64 / y as f64),
                BinOp::FloorDiv => Value::Int(py_floordiv(x, y)),
                BinOp::Mod => Value::Int(py_mod(x, y)),
            })
        }
        (Value::Str(x), Value::Str(y)) if op == BinOp::Add => Ok(Value::str(&format!("{x}{y}"))),
        (Value::List(x), Value::List(y)) if op == BinOp::Add => {
            Ok(Value::list(x.iter().chain(y.iter()).cloned().collect()))
        }
        (Value::Tuple(x), Value::Tuple(y)) if op == BinOp::Add => {
            Ok(Value::tuple(x.iter().chain(y.iter()).cloned().collect()))
        }
        (Value::Str(s), Value::Int(n)) | (Value::Int(n), Value::Str(s)) if op == BinOp::Mul => {
            Ok(Value::str(&s.repeat((*n).max(0) as usize)))
        }
        (Value::List(xs), Value::Int(n)) | (Value::Int(n), Value::List(xs)) if op == BinOp::Mul => {
            let mut out = Vec::new();
            for _ in 0..(*n).max(0) {
                out.extend(xs.iter().cloned());
            }
            Ok(Value::list(out))
        }
        _ => Err(Error::TypeMismatch(format!(
            "unsupported operand types for {op:?}: {} and {}",
            a.type_name(),
            b.type_name()
        ))),
    }
}

fn symbolic_binary(op: BinOp, a: &Value, b: &Value) -> Result<Value> {
    let (x, y) = (a.to_term()?, b.to_term()?);
    Ok(Value::term(match op {
        BinOp::Add => {
            let mut items = Vec::new();
            for t in [x, y] {
                match &*t {
                    Term::Add(xs) => items.extend(xs.iter().cloned()),
                    _ => items.push(t),
                }
            }
            Term::Add(items)
        }
        BinOp::Sub => Term::Sub(x, y),
        BinOp::Mul => Term::Mul(vec![x, y]),
        BinOp::Div | BinOp::FloorDiv => {
            if *y == Term::Int(0) {
                return Err(Error::DivisionByZero);
            }
            Term::Div(x, y)
        }
        BinOp::Mod => {
            if *y == Term::Int(0) {
                return Err(Error::DivisionByZero);
            }
            Term::Mod(x, y)
        }
    }))
}

fn concrete_order(a: &Value, b: &Value) -> Result<Ordering> {
    match (a, b) {
        (Value::Str(x), Value::Str(y)) => Ok(x.cmp(y)),
        (Value::List(x), Value::List(y)) | (Value::Tuple(x), Value::Tuple(y)) => {
            for (p, q) in x.iter().zip(y.iter()) {
                match concrete_order(&p.folded(), &q.folded())? {
                    Ordering::Equal => continue,
                    o => return Ok(o),
                }
            }
            Ok(x.len().cmp(&y.len()))
        }
        _ if is_num(a) && is_num(b) => {
            if matches!(a, Value::Float(_)) || matches!(b, Value::Float(_)) {
                a.as_f64()?
                    .partial_cmp(&b.as_f64()?)
                    .ok_or_else(|| Error::TypeMismatch("comparison with NaN".into()))
            } else {
                Ok(a.as_int()?.cmp(&b.as_int()?))
            }
        }
        _ => Err(Error::TypeMismatch(format!(
            "cannot order {} and {}",
            a.type_name(),
            b.type_name()
        ))),
    }
}

/// One comparison; symbolic operands build a constraint term.
pub(crate) fn compare(op: CmpOp, a: &Value, b: &Value) -> Result<Value> {
    let (a, b) = (a.folded(), b.folded());
    let symbolic = matches!(a, Value::Term(_)) || matches!(b, Value::Term(_));
    if symbolic {
        return Ok(Value::term(Term::Cmp(op, a.to_term()?, b.to_term()?)));
    }
    match op {
        CmpOp::Eq | CmpOp::Ne => {
            let eq = a.concrete_eq(&b).ok_or_else(|| {
                Error::TypeMismatch(format!("cannot compare {} and {}", a.type_name(), b.type_name()))
            })?;
            Ok(Value::Bool(if op == CmpOp::Eq { eq } else { !eq }))
        }
        _ => {
            let o = concrete_order(&a, &b)?;
            Ok(Value::Bool(match op {
                CmpOp::Lt => o == Ordering::Less,
                CmpOp::Le => o != Ordering::Greater,
                CmpOp::Gt => o == Ordering::Greater,
                CmpOp::Ge => o != Ordering::Less,
                CmpOp::Eq | CmpOp::Ne => unreachable!(),
            }))
        }
    }
}

fn seq_index(len: usize, i: i64) -> Result<usize> {
    let n = len as i64;
    let j = if i < 0 { i + n } else { i };
    if j < 0 || j >= n {
        Err(Error::TypeMismatch(format!("index {i} out of range for length {len}")))
    } else {
        Ok(j as usize)
    }
}

pub(crate) fn index_value(t: &Value, i: &Value) -> Result<Value> {
    match t {
        Value::List(xs) | Value::Tuple(xs) => Ok(xs[seq_index(xs.len(), i.folded().as_int()?)?].clone()),
        Value::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            let j = seq_index(chars.len(), i.as_int()?)?;
            Ok(Value::str(&chars[j].to_string()))
        }
        Value::Group(g) => g.index(g, &i.folded()),
        other => Err(Error::TypeMismatch(format!("{} is not indexable", other.type_name()))),
    }
}

fn slice(t: &Value, lo: Option<&Value>, hi: Option<&Value>) -> Result<Value> {
    let bound = |v: Option<&Value>, len: usize, default: usize| -> Result<usize> {
        match v {
            None | Some(Value::None) => Ok(default),
            Some(v) => {
                let i = v.as_int()?;
                let n = len as i64;
                Ok((if i < 0 { i + n } else { i }).clamp(0, n) as usize)
            }
        }
    };
    match t {
        Value::List(xs) | Value::Tuple(xs) => {
            let a = bound(lo, xs.len(), 0)?;
            let b = bound(hi, xs.len(), xs.len())?;
            let part = if a < b { xs[a..b].to_vec() } else { Vec::new() };
            Ok(if matches!(t, Value::Tuple(_)) {
                Value::tuple(part)
            } else {
                Value::list(part)
            })
        }
        Value::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            let a = bound(lo, chars.len(), 0)?;
            let b = bound(hi, chars.len(), chars.len())?;
            Ok(Value::str(&if a < b { chars[a..b].iter().collect::<String>() } else { String::new() }))
        }
        other => Err(Error::TypeMismatch(format!("{} cannot be sliced", other.type_name()))),
    }
}
