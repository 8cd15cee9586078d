//! The embedded expression language: parsing, evaluation, builtins and
//! `{...}` template interpolation.

pub mod ast;
mod builtins;
mod eval;
pub mod faker;
pub mod parser;
pub mod template;
mod value;

use std::collections::HashMap;
use std::rc::Rc;

pub use ast::{Expr, Lambda};
pub use eval::evaluate;
pub use parser::{parse_expression, parse_lambda};
pub use template::{render_template, Template};
pub use value::{format_float, Value};

use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::symbols::SymbolRegistry;

/// Names bound only in specific contexts.
pub const RESERVED: [&str; 8] = ["_sym", "_opt", "_index", "_model", "_solutions", "_sol", "_ans", "_names"];

/// Native operator available to `custom_operator` declarations.
pub type PluginFn = fn(&[Value]) -> Result<Value>;

/// A user-declared operator.
#[derive(Debug, Clone)]
pub enum Operator {
    Lambda(Rc<Lambda>),
    Plugin(&'static str, PluginFn),
}

/// Custom operators by call name.
pub type Operators = HashMap<String, Operator>;

/// Compile-time plugin registry.
pub fn plugin(name: &str) -> Option<(&'static str, PluginFn)> {
    builtins::PLUGINS.iter().find(|(n, _)| *n == name).copied()
}

/// Whether `name` is a builtin function.
pub fn is_builtin(name: &str) -> bool {
    builtins::lookup(name).is_some()
}

/// Evaluation environment of one generation job.
#[derive(Debug, Default)]
pub struct Env {
    globals: HashMap<String, Value>,
    locals: Vec<(String, Value)>,
    pub symbols: SymbolRegistry,
    pub operators: Rc<Operators>,
    /// Absent during pure replay: RNG builtins then fail.
    pub rng: Option<RngStream>,
    /// Tag of the solver context whose models `get_value` accepts.
    pub model_tag: u64,
}

impl Env {
    pub fn new() -> Self {
        Env::default()
    }

    pub fn with_rng(rng: RngStream) -> Self {
        Env {
            rng: Some(rng),
            ..Env::default()
        }
    }

    pub fn set(&mut self, name: &str, v: Value) {
        self.globals.insert(name.to_string(), v);
    }

    pub fn unset(&mut self, name: &str) {
        self.globals.remove(name);
    }

    pub fn get(&self, name: &str) -> Result<&Value> {
        if let Some((_, v)) = self.locals.iter().rev().find(|(n, _)| n == name) {
            return Ok(v);
        }
        self.globals
            .get(name)
            .ok_or_else(|| Error::UnboundName(name.to_string()))
    }

    pub fn has(&self, name: &str) -> bool {
        self.get(name).is_ok()
    }

    pub(crate) fn push_local(&mut self, name: &str, v: Value) {
        self.locals.push((name.to_string(), v));
    }

    pub(crate) fn mark(&self) -> usize {
        self.locals.len()
    }

    pub(crate) fn reset(&mut self, mark: usize) {
        self.locals.truncate(mark);
    }

    /// Evaluate with temporary bindings that are removed afterwards.
    pub fn eval_with(&mut self, e: &Expr, bindings: &[(&str, Value)]) -> Result<Value> {
        let mark = self.mark();
        for (n, v) in bindings {
            self.push_local(n, v.clone());
        }
        let r = evaluate(e, self);
        self.reset(mark);
        r
    }

    pub(crate) fn rng(&mut self, what: &str) -> Result<&mut RngStream> {
        self.rng
            .as_mut()
            .ok_or_else(|| Error::Constraint(format!("`{what}` needs randomness but this evaluation replays a config")))
    }
}
