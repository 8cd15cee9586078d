//! Instantiated symbol groups and the per-instance symbol registry.

use std::collections::HashMap;
use std::rc::Rc;

use crate::error::{Error, Result};
use crate::expr::Value;
use crate::solver::term::{Sort, Term, VarId};

/// Solver-side metadata of one declared symbol.
#[derive(Debug, Clone)]
pub struct VarInfo {
    /// Display name, e.g. `buy[('Ann', 'Tea')]`.
    pub name: String,
    pub sort: Sort,
    pub group: Rc<str>,
    pub key: usize,
    pub attr: Option<usize>,
}

/// An instantiated symbol group.
#[derive(Debug)]
pub struct Group {
    pub name: String,
    pub kind: GroupKind,
    /// Rendered description per element.
    pub descs: Vec<String>,
}

#[derive(Debug)]
pub enum GroupKind {
    /// One solver symbol (or one per attribute) per key of the source product.
    Defined {
        /// Normalized source expression texts, used by `get_p`.
        sources: Vec<String>,
        keys: Vec<Value>,
        key_index: HashMap<String, usize>,
        attrs: Vec<String>,
        /// Per key, one variable per attribute (exactly one when `attrs` is empty).
        vars: Vec<Vec<Value>>,
    },
    /// Formula results per selected instance.
    Derived { elements: Vec<Value> },
}

/// Canonical lookup key for group indexing.
pub fn key_text(v: &Value) -> Result<String> {
    match v {
        Value::Term(_) | Value::Group(_) | Value::Entity(..) | Value::Model(_) => {
            // symbols used as keys would be unusual but must not alias plain keys
            Err(Error::TypeMismatch(format!("{} cannot index a symbol group", v.type_name())))
        }
        Value::List(xs) | Value::Tuple(xs) => {
            let parts: Result<Vec<String>> = xs.iter().map(key_text).collect();
            Ok(format!("({})", parts?.join(", ")))
        }
        other => other.py_repr(),
    }
}

/// Remove whitespace so `range(0, n)` and `range(0,n)` name the same source.
pub fn normalize_source(text: &str) -> String {
    text.chars().filter(|c| !c.is_whitespace()).collect()
}

impl Group {
    pub fn len(&self) -> usize {
        match &self.kind {
            GroupKind::Defined { keys, .. } => keys.len(),
            GroupKind::Derived { elements } => elements.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The element at position `i`. `this` must be the Rc holding `self`.
    pub fn element(&self, this: &Rc<Group>, i: usize) -> Value {
        match &self.kind {
            GroupKind::Defined { attrs, vars, .. } => {
                if attrs.is_empty() {
                    vars[i][0].clone()
                } else {
                    Value::Entity(this.clone(), i)
                }
            }
            GroupKind::Derived { elements } => elements[i].clone(),
        }
    }

    pub fn items(&self, this: &Rc<Group>) -> Vec<Value> {
        (0..self.len()).map(|i| self.element(this, i)).collect()
    }

    /// `group[key]`: by key for defined groups, by position for derived ones.
    pub fn index(&self, this: &Rc<Group>, key: &Value) -> Result<Value> {
        match &self.kind {
            GroupKind::Defined { key_index, .. } => {
                let k = key_text(key)?;
                match key_index.get(&k) {
                    Some(&i) => Ok(self.element(this, i)),
                    None => Err(Error::TypeMismatch(format!("`{}` has no key {k}", self.name))),
                }
            }
            GroupKind::Derived { elements } => {
                let i = key.as_int()?;
                let n = elements.len() as i64;
                let j = if i < 0 { i + n } else { i };
                if j < 0 || j >= n {
                    return Err(Error::TypeMismatch(format!("index {i} out of range for `{}`", self.name)));
                }
                Ok(elements[j as usize].clone())
            }
        }
    }

    /// `.get(attr)` over the whole group: one symbol per key.
    pub fn attr_column(&self, attr: &str) -> Result<Value> {
        match &self.kind {
            GroupKind::Defined { attrs, vars, .. } => {
                let a = self.attr_pos(attrs, attr)?;
                Ok(Value::list(vars.iter().map(|row| row[a].clone()).collect()))
            }
            GroupKind::Derived { .. } => Err(Error::TypeMismatch(format!("derived group `{}` has no attributes", self.name))),
        }
    }

    /// `.get(attr)` on one entity.
    pub fn entity_attr(&self, i: usize, attr: &str) -> Result<Value> {
        match &self.kind {
            GroupKind::Defined { attrs, vars, .. } => {
                let a = self.attr_pos(attrs, attr)?;
                Ok(vars[i][a].clone())
            }
            GroupKind::Derived { .. } => unreachable!("entities only exist for defined groups"),
        }
    }

    fn attr_pos(&self, attrs: &[String], attr: &str) -> Result<usize> {
        attrs
            .iter()
            .position(|a| a == attr)
            .ok_or_else(|| Error::TypeMismatch(format!("`{}` has no attribute `{attr}`", self.name)))
    }

    /// Key component of element `i` for the named source.
    pub fn source_component(&self, i: usize, source: &str) -> Result<Value> {
        match &self.kind {
            GroupKind::Defined { sources, keys, .. } => {
                let wanted = normalize_source(source);
                let pos = sources
                    .iter()
                    .position(|s| *s == wanted)
                    .ok_or_else(|| Error::UnknownSource(format!("`{}` is not built from `{source}`", self.name)))?;
                match &keys[i] {
                    Value::Tuple(parts) if sources.len() > 1 => Ok(parts[pos].clone()),
                    k => Ok(k.clone()),
                }
            }
            GroupKind::Derived { .. } => Err(Error::UnknownSource(format!("derived group `{}` has no source keys", self.name))),
        }
    }
}

/// All symbols and groups of one instance.
#[derive(Debug, Default)]
pub struct SymbolRegistry {
    pub vars: Vec<VarInfo>,
    pub groups: HashMap<String, Rc<Group>>,
}

impl SymbolRegistry {
    pub fn declare(&mut self, info: VarInfo) -> Value {
        let id = VarId(self.vars.len() as u32);
        let sort = info.sort;
        self.vars.push(info);
        Value::term(Term::Var(id, sort))
    }

    pub fn sorts(&self) -> Vec<Sort> {
        self.vars.iter().map(|v| v.sort).collect()
    }

    /// Plain JSON for recording: symbols appear as `{"symbol": name}`.
    pub fn plain_json(&self, v: &Value) -> Result<serde_json::Value> {
        match v {
            Value::Term(t) => match **t {
                Term::Var(id, _) => Ok(serde_json::json!({ "symbol": self.vars[id.0 as usize].name })),
                _ => v.to_json(),
            },
            Value::List(xs) | Value::Tuple(xs) => Ok(serde_json::Value::Array(
                xs.iter().map(|x| self.plain_json(x)).collect::<Result<_>>()?,
            )),
            other => other.to_json(),
        }
    }

    /// Source key component behind a solver symbol or entity.
    pub fn source_of(&self, v: &Value, source: &str) -> Result<Value> {
        match v {
            Value::Term(t) => match **t {
                Term::Var(id, _) => {
                    let info = &self.vars[id.0 as usize];
                    let group = &self.groups[info.group.as_ref()];
                    group.source_component(info.key, source)
                }
                _ => Err(Error::TypeMismatch(format!("get_p expects symbols, found constraint `{t}`"))),
            },
            Value::Entity(g, i) => g.source_component(*i, source),
            Value::List(xs) | Value::Tuple(xs) => {
                let mapped: Result<Vec<Value>> = xs.iter().map(|x| self.source_of(x, source)).collect();
                Ok(if matches!(v, Value::Tuple(_)) {
                    Value::tuple(mapped?)
                } else {
                    Value::list(mapped?)
                })
            }
            other => Err(Error::TypeMismatch(format!("get_p expects symbols, found {}", other.type_name()))),
        }
    }
}
