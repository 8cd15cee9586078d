//! Typed specification structures.

use std::fmt;

use crate::expr::{parse_expression, Expr, Template};
use crate::error::Result;
use crate::solver::term::Sort;

/// Expression source text together with its parsed form.
#[derive(Debug, Clone)]
pub struct Code {
    pub text: String,
    pub expr: Expr,
}

impl Code {
    pub fn parse(text: &str) -> Result<Code> {
        Ok(Code {
            text: text.to_string(),
            expr: parse_expression(text)?,
        })
    }
}

impl PartialEq for Code {
    fn eq(&self, other: &Code) -> bool {
        self.expr == other.expr
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarType {
    Int,
    Bool,
    Float,
    Text,
}

impl ScalarType {
    pub fn name(self) -> &'static str {
        match self {
            ScalarType::Int => "int",
            ScalarType::Bool => "bool",
            ScalarType::Float => "float",
            ScalarType::Text => "text",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum VariableKind {
    /// Drawn uniformly from `domain`.
    Domain { ty: ScalarType, domain: Code },
    /// Computed from earlier values.
    Formula(Code),
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariableDef {
    pub name: String,
    pub kind: VariableKind,
    pub diff_factor: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Domain,
    Dim,
}

/// Extra predicate on selected parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomCond {
    pub scope: Scope,
    pub fields: Vec<usize>,
    /// `lambda a, b: ...` with one parameter per field.
    pub params: Vec<String>,
    pub body: Code,
    pub text: String,
}

/// Randomized selection over source pools.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionSpec {
    pub source: Vec<Code>,
    /// `None` draws one scalar item per source.
    pub amount: Option<Vec<Code>>,
    pub order: Option<Vec<bool>>,
    pub duplicate: Option<Vec<bool>>,
    /// Instance count: an integer or a `[lo, hi]` range.
    pub domain: Option<Code>,
    pub domain_cond: bool,
    pub dim: usize,
    pub dim_cond: Vec<Vec<usize>>,
    pub custom_cond: Vec<CustomCond>,
}

impl SelectionSpec {
    pub fn with_sources(source: Vec<Code>) -> Self {
        SelectionSpec {
            source,
            amount: None,
            order: None,
            duplicate: None,
            domain: None,
            domain_cond: true,
            dim: 1,
            dim_cond: Vec::new(),
            custom_cond: Vec::new(),
        }
    }

    pub fn ordered(&self, i: usize) -> bool {
        self.order.as_ref().is_none_or(|o| o[i])
    }

    pub fn duplicates(&self, i: usize) -> bool {
        self.duplicate.as_ref().is_some_and(|d| d[i])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolKind {
    Defined {
        source: Vec<Code>,
        attrs: Vec<String>,
        /// One sort per attribute, or exactly one without attributes.
        sorts: Vec<Sort>,
        /// Empty, one template, or one per attribute.
        desc: Vec<Template>,
    },
    Derived {
        selection: SelectionSpec,
        formula: Option<Code>,
        desc: Option<Template>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolDecl {
    pub name: String,
    pub kind: SymbolKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionDecl {
    pub name: String,
    pub formula: Code,
    pub desc: Option<Template>,
    /// Present for dynamic conditions.
    pub selection: Option<SelectionSpec>,
}

impl ConditionDecl {
    pub fn is_dynamic(&self) -> bool {
        self.selection.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondScope {
    Any,
    All,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptionTemplate {
    pub selection: SelectionSpec,
    pub cond: CondScope,
    pub opt_formula: Code,
    pub opt_text: Template,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectType {
    Single,
    Multiple,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalType {
    Numeral,
    Nominal,
    Option,
    OrderedArray,
    UnorderedArray,
}

impl EvalType {
    pub fn name(self) -> &'static str {
        match self {
            EvalType::Numeral => "numeral",
            EvalType::Nominal => "nominal",
            EvalType::Option => "option",
            EvalType::OrderedArray => "ordered_array",
            EvalType::UnorderedArray => "unordered_array",
        }
    }

    pub fn from_name(s: &str) -> Option<EvalType> {
        Some(match s {
            "numeral" => EvalType::Numeral,
            "nominal" => EvalType::Nominal,
            "option" => EvalType::Option,
            "ordered_array" => EvalType::OrderedArray,
            "unordered_array" => EvalType::UnorderedArray,
            _ => return None,
        })
    }
}

/// How an open query's answer text is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum AnsText {
    /// Contains `{...}` placeholders.
    Template(Template),
    /// A bare expression such as `','.join(_ans[0])`.
    Expr(Code),
}

impl AnsText {
    pub fn source(&self) -> &str {
        match self {
            AnsText::Template(t) => t.source(),
            AnsText::Expr(c) => &c.text,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryKind {
    Open {
        ans_formula: Code,
        ans_text: AnsText,
        ans_assertion: Option<Code>,
        eval_type: Option<EvalType>,
        query_type: Option<String>,
    },
    Selection {
        query_type: String,
        select_type: SelectType,
        opt_num: usize,
        templates: Vec<OptionTemplate>,
        /// Template fields were written inline on the query.
        inline: bool,
        redundancy_guard: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryDecl {
    pub name: String,
    pub desc: Template,
    pub kind: QueryKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostGenDecl {
    pub vars: Vec<(String, Code)>,
    pub conditions: Vec<ConditionDecl>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizeDirection {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeDecl {
    pub direction: OptimizeDirection,
    pub formula: Code,
}

/// Operator definition text from `custom_operator`.
#[derive(Debug, Clone, PartialEq)]
pub enum OperatorDef {
    Lambda { text: String, params: Vec<String>, body: Expr },
    Plugin(String),
}

/// A parsed puzzle specification.
#[derive(Debug, Clone, PartialEq)]
pub struct PuzzleTemplate {
    /// Spec identifier (file stem by default).
    pub id: String,
    pub custom_operators: Vec<(String, OperatorDef)>,
    pub variables: Vec<VariableDef>,
    pub symbols: Vec<SymbolDecl>,
    pub conditions: Vec<ConditionDecl>,
    pub calc_solution: bool,
    pub max_solution: usize,
    pub post_generation: Option<PostGenDecl>,
    pub optimize: Option<OptimizeDecl>,
    pub queries: Vec<QueryDecl>,
    pub desc: Template,
}

impl PuzzleTemplate {
    pub fn variable(&self, name: &str) -> Option<&VariableDef> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn symbol(&self, name: &str) -> Option<&SymbolDecl> {
        self.symbols.iter().find(|s| s.name == name)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionDecl> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn query(&self, name: &str) -> Option<&QueryDecl> {
        self.queries.iter().find(|q| q.name == name)
    }
}
