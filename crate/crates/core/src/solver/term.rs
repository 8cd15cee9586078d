//! Constraint terms built by the expression evaluator.

use std::fmt;
use std::rc::Rc;

pub use crate::expr::ast::CmpOp;

/// Index of a declared solver symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(pub u32);

/// Solver sort of a declared symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sort {
    Bool,
    Int,
}

pub type TermRef = Rc<Term>;

/// Integer/boolean constraint term. Booleans act as 0/1 in arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub enum Term {
    Bool(bool),
    Int(i64),
    Var(VarId, Sort),
    Not(TermRef),
    And(Vec<TermRef>),
    Or(Vec<TermRef>),
    Implies(TermRef, TermRef),
    Xor(TermRef, TermRef),
    Ite(TermRef, TermRef, TermRef),
    Cmp(CmpOp, TermRef, TermRef),
    Add(Vec<TermRef>),
    Sub(TermRef, TermRef),
    Neg(TermRef),
    Mul(Vec<TermRef>),
    /// Floor division.
    Div(TermRef, TermRef),
    /// Modulo with the sign of the divisor.
    Mod(TermRef, TermRef),
    Distinct(Vec<TermRef>),
}

impl Term {
    pub fn sort(&self) -> Sort {
        match self {
            Term::Bool(_)
            | Term::Not(_)
            | Term::And(_)
            | Term::Or(_)
            | Term::Implies(..)
            | Term::Xor(..)
            | Term::Cmp(..)
            | Term::Distinct(_) => Sort::Bool,
            Term::Var(_, s) => *s,
            Term::Ite(_, a, _) => a.sort(),
            Term::Int(_)
            | Term::Add(_)
            | Term::Sub(..)
            | Term::Neg(_)
            | Term::Mul(_)
            | Term::Div(..)
            | Term::Mod(..) => Sort::Int,
        }
    }

    /// Children in evaluation order.
    pub fn children(&self) -> Vec<&TermRef> {
        match self {
            Term::Bool(_) | Term::Int(_) | Term::Var(..) => Vec::new(),
            Term::Not(a) | Term::Neg(a) => vec![a],
            Term::And(xs) | Term::Or(xs) | Term::Add(xs) | Term::Mul(xs) | Term::Distinct(xs) => {
                xs.iter().collect()
            }
            Term::Implies(a, b)
            | Term::Xor(a, b)
            | Term::Cmp(_, a, b)
            | Term::Sub(a, b)
            | Term::Div(a, b)
            | Term::Mod(a, b) => vec![a, b],
            Term::Ite(c, a, b) => vec![c, a, b],
        }
    }

    /// Every variable mentioned by the term.
    pub fn vars(&self, out: &mut Vec<VarId>) {
        if let Term::Var(v, _) = self {
            out.push(*v);
        }
        for c in self.children() {
            c.vars(out);
        }
    }

    /// Evaluate under a full assignment (booleans as 0/1).
    pub fn eval(&self, values: &[i64]) -> Option<i64> {
        Some(match self {
            Term::Bool(b) => *b as i64,
            Term::Int(v) => *v,
            Term::Var(v, _) => *values.get(v.0 as usize)?,
            Term::Not(a) => (a.eval(values)? == 0) as i64,
            Term::And(xs) => {
                for x in xs {
                    if x.eval(values)? == 0 {
                        return Some(0);
                    }
                }
                1
            }
            Term::Or(xs) => {
                for x in xs {
                    if x.eval(values)? != 0 {
                        return Some(1);
                    }
                }
                0
            }
            Term::Implies(a, b) => (a.eval(values)? == 0 || b.eval(values)? != 0) as i64,
            Term::Xor(a, b) => ((a.eval(values)? != 0) != (b.eval(values)? != 0)) as i64,
            Term::Ite(c, a, b) => {
                if c.eval(values)? != 0 {
                    a.eval(values)?
                } else {
                    b.eval(values)?
                }
            }
            Term::Cmp(op, a, b) => {
                let (a, b) = (a.eval(values)?, b.eval(values)?);
                cmp_holds(*op, a, b) as i64
            }
            Term::Add(xs) => {
                let mut s = 0i64;
                for x in xs {
                    s = s.saturating_add(x.eval(values)?);
                }
                s
            }
            Term::Sub(a, b) => a.eval(values)?.saturating_sub(b.eval(values)?),
            Term::Neg(a) => a.eval(values)?.saturating_neg(),
            Term::Mul(xs) => {
                let mut s = 1i64;
                for x in xs {
                    s = s.saturating_mul(x.eval(values)?);
                }
                s
            }
            Term::Div(a, b) => {
                let (a, b) = (a.eval(values)?, b.eval(values)?);
                if b == 0 {
                    0
                } else {
                    py_floordiv(a, b)
                }
            }
            Term::Mod(a, b) => {
                let (a, b) = (a.eval(values)?, b.eval(values)?);
                if b == 0 {
                    a
                } else {
                    py_mod(a, b)
                }
            }
            Term::Distinct(xs) => {
                let mut vals = Vec::with_capacity(xs.len());
                for x in xs {
                    vals.push(x.eval(values)?);
                }
                vals.sort_unstable();
                vals.windows(2).all(|w| w[0] != w[1]) as i64
            }
        })
    }
}

/// Python-style modulo (result has the divisor's sign).
pub fn py_mod(a: i64, b: i64) -> i64 {
    if b == -1 {
        return 0;
    }
    let r = a % b;
    if r != 0 && ((r < 0) != (b < 0)) {
        r + b
    } else {
        r
    }
}

/// Python-style floor division.
pub fn py_floordiv(a: i64, b: i64) -> i64 {
    if b == -1 {
        return a.saturating_neg();
    }
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

pub fn cmp_holds(op: CmpOp, a: i64, b: i64) -> bool {
    match op {
        CmpOp::Eq => a == b,
        CmpOp::Ne => a != b,
        CmpOp::Lt => a < b,
        CmpOp::Le => a <= b,
        CmpOp::Gt => a > b,
        CmpOp::Ge => a >= b,
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list(f: &mut fmt::Formatter<'_>, name: &str, xs: &[TermRef]) -> fmt::Result {
            write!(f, "{name}(")?;
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{x}")?;
            }
            write!(f, ")")
        }
        match self {
            Term::Bool(b) => write!(f, "{}", if *b { "True" } else { "False" }),
            Term::Int(v) => write!(f, "{v}"),
            Term::Var(v, _) => write!(f, "v{}", v.0),
            Term::Not(a) => write!(f, "Not({a})"),
            Term::And(xs) => list(f, "And", xs),
            Term::Or(xs) => list(f, "Or", xs),
            Term::Implies(a, b) => write!(f, "Implies({a}, {b})"),
            Term::Xor(a, b) => write!(f, "Xor({a}, {b})"),
            Term::Ite(c, a, b) => write!(f, "If({c}, {a}, {b})"),
            Term::Cmp(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Term::Add(xs) => list(f, "Sum", xs),
            Term::Sub(a, b) => write!(f, "({a} - {b})"),
            Term::Neg(a) => write!(f, "-({a})"),
            Term::Mul(xs) => list(f, "Product", xs),
            Term::Div(a, b) => write!(f, "({a} // {b})"),
            Term::Mod(a, b) => write!(f, "({a} % {b})"),
            Term::Distinct(xs) => list(f, "Distinct", xs),
        }
    }
}
