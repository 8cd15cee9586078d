//! Runtime values of the expression language.

use std::fmt::Write as _;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::solver::term::{Sort, Term, TermRef};
use crate::solver::Model;
use crate::symbols::Group;

/// A value produced by evaluating an expression.
#[derive(Debug, Clone)]
pub enum Value {
    None,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(Rc<str>),
    List(Rc<Vec<Value>>),
    Tuple(Rc<Vec<Value>>),
    /// Constraint term; solver symbols are `Term::Var`.
    Term(TermRef),
    /// A symbol group (defined or derived).
    Group(Rc<Group>),
    /// One key of an attribute-carrying defined group.
    Entity(Rc<Group>, usize),
    Model(Rc<Model>),
}

impl Value {
    pub fn str(s: &str) -> Value {
        Value::Str(Rc::from(s))
    }

    pub fn list(items: Vec<Value>) -> Value {
        Value::List(Rc::new(items))
    }

    pub fn tuple(items: Vec<Value>) -> Value {
        Value::Tuple(Rc::new(items))
    }

    pub fn term(t: Term) -> Value {
        Value::Term(Rc::new(t))
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::None => "None",
            Value::Bool(_) => "bool",
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Str(_) => "str",
            Value::List(_) => "list",
            Value::Tuple(_) => "tuple",
            Value::Term(_) => "constraint",
            Value::Group(_) => "symbol group",
            Value::Entity(..) => "entity",
            Value::Model(_) => "model",
        }
    }

    /// Whether the value holds a solver term anywhere inside.
    pub fn is_symbolic(&self) -> bool {
        match self {
            Value::Term(t) => !matches!(**t, Term::Bool(_) | Term::Int(_)),
            Value::List(xs) | Value::Tuple(xs) => xs.iter().any(Value::is_symbolic),
            Value::Entity(..) | Value::Group(_) => true,
            _ => false,
        }
    }

    /// Python truthiness. Constraint terms have none.
    pub fn truthy(&self) -> Result<bool> {
        Ok(match self {
            Value::None => false,
            Value::Bool(b) => *b,
            Value::Int(v) => *v != 0,
            Value::Float(v) => *v != 0.0,
            Value::Str(s) => !s.is_empty(),
            Value::List(xs) | Value::Tuple(xs) => !xs.is_empty(),
            Value::Term(t) => match **t {
                Term::Bool(b) => b,
                Term::Int(v) => v != 0,
                _ => {
                    return Err(Error::TypeMismatch(
                        "a constraint has no truth value before solving; use get_value or If".into(),
                    ))
                }
            },
            Value::Group(_) | Value::Entity(..) | Value::Model(_) => true,
        })
    }

    pub fn as_int(&self) -> Result<i64> {
        match self {
            Value::Int(v) => Ok(*v),
            Value::Bool(b) => Ok(*b as i64),
            Value::Term(t) => match **t {
                Term::Int(v) => Ok(v),
                Term::Bool(b) => Ok(b as i64),
                _ => Err(Error::TypeMismatch("expected an integer, found a constraint".into())),
            },
            other => Err(Error::TypeMismatch(format!("expected an integer, found {}", other.type_name()))),
        }
    }

    /// Integer view used by count expressions: floats truncate toward zero.
    pub fn as_count(&self) -> Result<i64> {
        match self {
            Value::Float(f) if f.is_finite() => Ok(f.trunc() as i64),
            other => other.as_int(),
        }
    }

    pub fn as_f64(&self) -> Result<f64> {
        match self {
            Value::Float(f) => Ok(*f),
            other => other.as_int().map(|v| v as f64),
        }
    }

    pub fn as_str(&self) -> Result<&str> {
        match self {
            Value::Str(s) => Ok(s),
            other => Err(Error::TypeMismatch(format!("expected text, found {}", other.type_name()))),
        }
    }

    /// Items of a list, tuple, string (characters) or symbol group.
    pub fn iter_items(&self) -> Result<Vec<Value>> {
        match self {
            Value::List(xs) | Value::Tuple(xs) => Ok(xs.as_ref().clone()),
            Value::Str(s) => Ok(s.chars().map(|c| Value::str(&c.to_string())).collect()),
            Value::Group(g) => Ok(g.items(g)),
            other => Err(Error::TypeMismatch(format!("{} is not iterable", other.type_name()))),
        }
    }

    /// Python `str()`.
    pub fn py_str(&self) -> Result<String> {
        match self {
            Value::Str(s) => Ok(s.to_string()),
            other => {
                let mut out = String::new();
                other.write_repr(&mut out)?;
                Ok(out)
            }
        }
    }

    /// Python `repr()`.
    pub fn py_repr(&self) -> Result<String> {
        let mut out = String::new();
        self.write_repr(&mut out)?;
        Ok(out)
    }

    fn write_repr(&self, out: &mut String) -> Result<()> {
        match self {
            Value::None => out.push_str("None"),
            Value::Bool(b) => out.push_str(if *b { "True" } else { "False" }),
            Value::Int(v) => {
                let _ = write!(out, "{v}");
            }
            Value::Float(v) => out.push_str(&format_float(*v)),
            Value::Str(s) => {
                out.push('\'');
                for c in s.chars() {
                    match c {
                        '\'' => out.push_str("\\'"),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        c => out.push(c),
                    }
                }
                out.push('\'');
            }
            Value::List(xs) | Value::Tuple(xs) => {
                let is_tuple = matches!(self, Value::Tuple(_));
                out.push(if is_tuple { '(' } else { '[' });
                for (i, x) in xs.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    x.write_repr(out)?;
                }
                if is_tuple && xs.len() == 1 {
                    out.push(',');
                }
                out.push(if is_tuple { ')' } else { ']' });
            }
            Value::Term(t) => match **t {
                Term::Bool(b) => out.push_str(if b { "True" } else { "False" }),
                Term::Int(v) => {
                    let _ = write!(out, "{v}");
                }
                _ => return Err(Error::Render(format!("constraint `{t}` cannot be rendered as text"))),
            },
            Value::Group(g) => return Err(Error::Render(format!("symbol group `{}` cannot be rendered as text", g.name))),
            Value::Entity(g, _) => return Err(Error::Render(format!("symbol of `{}` cannot be rendered as text", g.name))),
            Value::Model(_) => return Err(Error::Render("a solver model cannot be rendered as text".into())),
        }
        Ok(())
    }

    /// Concrete equality with Python numeric coercion.
    /// `None` when either side is symbolic.
    pub fn concrete_eq(&self, other: &Value) -> Option<bool> {
        use Value::*;
        Some(match (self.folded(), other.folded()) {
            (None, None) => true,
            (Str(a), Str(b)) => a == b,
            (Float(a), b) if b.is_number() => a == b.as_f64().ok()?,
            (a, Float(b)) if a.is_number() => a.as_f64().ok()? == b,
            (a, b) if a.is_number() && b.is_number() => a.as_int().ok()? == b.as_int().ok()?,
            (List(a), List(b)) | (Tuple(a), Tuple(b)) => {
                if a.len() != b.len() {
                    return Some(false);
                }
                for (x, y) in a.iter().zip(b.iter()) {
                    if !x.concrete_eq(y)? {
                        return Some(false);
                    }
                }
                true
            }
            (Term(a), Term(b)) => {
                if a == b {
                    true
                } else {
                    return Option::None;
                }
            }
            (Term(_), _) | (_, Term(_)) => return Option::None,
            (Entity(g, i), Entity(h, j)) => Rc::ptr_eq(&g, &h) && i == j,
            (Group(g), Group(h)) => Rc::ptr_eq(&g, &h),
            (Model(a), Model(b)) => a == b,
            _ => false,
        })
    }

    fn is_number(&self) -> bool {
        matches!(self, Value::Int(_) | Value::Bool(_) | Value::Float(_))
    }

    /// Constant terms collapse to plain values.
    pub fn folded(&self) -> Value {
        match self {
            Value::Term(t) => match **t {
                Term::Bool(b) => Value::Bool(b),
                Term::Int(v) => Value::Int(v),
                _ => self.clone(),
            },
            _ => self.clone(),
        }
    }

    /// Solver term for this value.
    pub fn to_term(&self) -> Result<TermRef> {
        match self {
            Value::Term(t) => Ok(t.clone()),
            Value::Bool(b) => Ok(Rc::new(Term::Bool(*b))),
            Value::Int(v) => Ok(Rc::new(Term::Int(*v))),
            Value::Float(f) if f.fract() == 0.0 && f.abs() < 9.0e15 => Ok(Rc::new(Term::Int(*f as i64))),
            Value::Float(_) => Err(Error::TypeMismatch(
                "real-valued constraints are not supported; only Bool and Int symbols".into(),
            )),
            other => Err(Error::TypeMismatch(format!(
                "{} cannot be used inside a constraint",
                other.type_name()
            ))),
        }
    }

    pub fn bool_term(&self) -> Result<TermRef> {
        let t = self.to_term()?;
        if t.sort() != Sort::Bool {
            if let Term::Int(v) = *t {
                return Ok(Rc::new(Term::Bool(v != 0)));
            }
            return Err(Error::TypeMismatch(format!("expected a boolean constraint, found integer term `{t}`")));
        }
        Ok(t)
    }

    /// JSON form used in configs. Symbols are written by reference.
    pub fn to_json(&self) -> Result<serde_json::Value> {
        use serde_json::Value as J;
        Ok(match self {
            Value::None => J::Null,
            Value::Bool(b) => J::Bool(*b),
            Value::Int(v) => J::from(*v),
            Value::Float(f) => serde_json::Number::from_f64(*f)
                .map(J::Number)
                .ok_or_else(|| Error::TypeMismatch("non-finite float".into()))?,
            Value::Str(s) => J::String(s.to_string()),
            Value::List(xs) | Value::Tuple(xs) => {
                J::Array(xs.iter().map(Value::to_json).collect::<Result<_>>()?)
            }
            Value::Term(t) => match **t {
                Term::Bool(b) => J::Bool(b),
                Term::Int(v) => J::from(v),
                Term::Var(v, _) => serde_json::json!({ "symbol": v.0 }),
                _ => J::String(format!("<{t}>")),
            },
            Value::Entity(g, i) => serde_json::json!({ "entity": g.name, "index": i }),
            Value::Group(g) => serde_json::json!({ "group": g.name }),
            Value::Model(_) => return Err(Error::TypeMismatch("a solver model cannot be recorded".into())),
        })
    }

    /// Inverse of [`Value::to_json`] for plain data.
    pub fn from_json(j: &serde_json::Value) -> Result<Value> {
        use serde_json::Value as J;
        Ok(match j {
            J::Null => Value::None,
            J::Bool(b) => Value::Bool(*b),
            J::Number(n) => {
                if let Some(v) = n.as_i64() {
                    Value::Int(v)
                } else {
                    Value::Float(n.as_f64().ok_or_else(|| Error::Schema(format!("bad number {n}")))?)
                }
            }
            J::String(s) => Value::str(s),
            J::Array(xs) => Value::list(xs.iter().map(Value::from_json).collect::<Result<_>>()?),
            J::Object(_) => return Err(Error::Schema(format!("cannot read value {j}"))),
        })
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Term(a), Value::Term(b)) => a == b,
            (Value::List(a), Value::List(b)) | (Value::Tuple(a), Value::Tuple(b)) => a == b,
            _ => self.concrete_eq(other).unwrap_or(false),
        }
    }
}

/// Shortest round-trip float text, Python style.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{v:?}");
    if s.contains('e') || s.contains('E') {
        // Rust prints `1e20`; Python prints `1e+20`.
        let (mant, exp) = s.split_once('e').unwrap_or((&s, "0"));
        let exp: i32 = exp.parse().unwrap_or(0);
        if (-5..16).contains(&exp) {
            return format!("{v}");
        }
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mant}e{sign}{:02}", exp.abs());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn python_repr() {
        let v = Value::list(vec![Value::str("A"), Value::Int(2), Value::Bool(true), Value::Float(2.5)]);
        assert_eq!(v.py_str().unwrap(), "['A', 2, True, 2.5]");
        assert_eq!(Value::tuple(vec![Value::Int(1)]).py_str().unwrap(), "(1,)");
        assert_eq!(Value::Float(2.0).py_str().unwrap(), "2.0");
        assert_eq!(Value::str("x").py_str().unwrap(), "x");
    }

    #[test]
    fn numeric_equality_coerces() {
        assert_eq!(Value::Int(1).concrete_eq(&Value::Bool(true)), Some(true));
        assert_eq!(Value::Int(2).concrete_eq(&Value::Float(2.0)), Some(true));
        assert_eq!(Value::str("1").concrete_eq(&Value::Int(1)), Some(false));
    }

    #[test]
    fn json_round_trip() {
        let v = Value::list(vec![Value::str("A"), Value::Int(-3), Value::Float(0.5), Value::Bool(false)]);
        assert_eq!(Value::from_json(&v.to_json().unwrap()).unwrap(), v);
    }
}
