//! Expression syntax tree.

use std::collections::BTreeSet;

/// Literal constants.
#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    FloorDiv,
    Mod,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// One `for targets in iter` clause of a comprehension.
#[derive(Debug, Clone, PartialEq)]
pub struct ForClause {
    pub targets: Vec<String>,
    /// Whether the targets were written as a tuple (`a, b` or `(a,)`).
    pub unpack: bool,
    pub iter: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Lit(Literal),
    Name(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// Chained comparison `a < b <= c`.
    Compare(Box<Expr>, Vec<(CmpOp, Expr)>),
    IfElse {
        cond: Box<Expr>,
        then: Box<Expr>,
        otherwise: Box<Expr>,
    },
    Call(String, Vec<Expr>),
    Index(Box<Expr>, Box<Expr>),
    Slice(Box<Expr>, Option<Box<Expr>>, Option<Box<Expr>>),
    /// `target.get(attr)`
    GetAttr(Box<Expr>, Box<Expr>),
    /// `sep.join(items)`
    Join(Box<Expr>, Box<Expr>),
    List(Vec<Expr>),
    Tuple(Vec<Expr>),
    Comp {
        elem: Box<Expr>,
        clauses: Vec<ForClause>,
        filter: Option<Box<Expr>>,
    },
}

/// A parsed `lambda a, b: body` operator definition.
#[derive(Debug, Clone, PartialEq)]
pub struct Lambda {
    pub params: Vec<String>,
    pub body: Expr,
}

impl Expr {
    /// Names read by this expression that are not bound by an enclosing comprehension.
    pub fn free_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    /// Function names called anywhere in this expression.
    pub fn called_functions(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |e| {
            if let Expr::Call(name, _) = e {
                out.insert(name.clone());
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Lit(_) | Expr::Name(_) => {}
            Expr::Neg(a) => a.walk(f),
            Expr::Binary(_, a, b) | Expr::Index(a, b) | Expr::GetAttr(a, b) | Expr::Join(a, b) => {
                a.walk(f);
                b.walk(f);
            }
            Expr::Compare(a, rest) => {
                a.walk(f);
                for (_, e) in rest {
                    e.walk(f);
                }
            }
            Expr::IfElse {
                cond,
                then,
                otherwise,
            } => {
                cond.walk(f);
                then.walk(f);
                otherwise.walk(f);
            }
            Expr::Call(_, args) | Expr::List(args) | Expr::Tuple(args) => {
                for a in args {
                    a.walk(f);
                }
            }
            Expr::Slice(a, lo, hi) => {
                a.walk(f);
                if let Some(lo) = lo {
                    lo.walk(f);
                }
                if let Some(hi) = hi {
                    hi.walk(f);
                }
            }
            Expr::Comp {
                elem,
                clauses,
                filter,
            } => {
                for c in clauses {
                    c.iter.walk(f);
                }
                elem.walk(f);
                if let Some(flt) = filter {
                    flt.walk(f);
                }
            }
        }
    }

    fn collect_free(&self, bound: &mut Vec<String>, out: &mut BTreeSet<String>) {
        match self {
            Expr::Lit(_) => {}
            Expr::Name(n) => {
                if !bound.iter().any(|b| b == n) {
                    out.insert(n.clone());
                }
            }
            Expr::Neg(a) => a.collect_free(bound, out),
            Expr::Binary(_, a, b) | Expr::Index(a, b) | Expr::GetAttr(a, b) | Expr::Join(a, b) => {
                a.collect_free(bound, out);
                b.collect_free(bound, out);
            }
            Expr::Compare(a, rest) => {
                a.collect_free(bound, out);
                for (_, e) in rest {
                    e.collect_free(bound, out);
                }
            }
            Expr::IfElse {
                cond,
                then,
                otherwise,
            } => {
                cond.collect_free(bound, out);
                then.collect_free(bound, out);
                otherwise.collect_free(bound, out);
            }
            Expr::Call(_, args) | Expr::List(args) | Expr::Tuple(args) => {
                for a in args {
                    a.collect_free(bound, out);
                }
            }
            Expr::Slice(a, lo, hi) => {
                a.collect_free(bound, out);
                for e in [lo, hi].into_iter().flatten() {
                    e.collect_free(bound, out);
                }
            }
            Expr::Comp {
                elem,
                clauses,
                filter,
            } => {
                let mark = bound.len();
                for c in clauses {
                    c.iter.collect_free(bound, out);
                    bound.extend(c.targets.iter().cloned());
                }
                elem.collect_free(bound, out);
                if let Some(flt) = filter {
                    flt.collect_free(bound, out);
                }
                bound.truncate(mark);
            }
        }
    }
}
