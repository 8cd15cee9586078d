//! Constraint solving: model enumeration and linear optimization behind a
//! small backend port, with a built-in finite-domain backend.

mod fd;
pub mod term;

use std::rc::Rc;

use crate::error::{Error, Result};
use term::{CmpOp, Sort, Term, TermRef, VarId};

pub use fd::CLAMP;

/// One satisfying assignment, tagged with the context that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub tag: u64,
    /// Value per declared symbol; booleans are 0/1.
    pub values: Vec<i64>,
}

/// Declarations plus ordered assertions.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    pub sorts: Vec<Sort>,
    /// `(label, term)` in condition declaration order.
    pub assertions: Vec<(String, TermRef)>,
}

impl ConstraintSet {
    pub fn new(sorts: Vec<Sort>) -> Self {
        ConstraintSet {
            sorts,
            assertions: Vec::new(),
        }
    }

    pub fn assert(&mut self, label: impl Into<String>, t: TermRef) {
        self.assertions.push((label.into(), t));
    }

    /// Check that every referenced symbol is declared with a matching sort.
    pub fn check_declared(&self) -> Result<()> {
        for (label, t) in &self.assertions {
            let mut vars = Vec::new();
            t.vars(&mut vars);
            for v in vars {
                if v.0 as usize >= self.sorts.len() {
                    return Err(Error::Constraint(format!("`{label}` references undeclared symbol v{}", v.0)));
                }
            }
        }
        Ok(())
    }

    /// Whether `values` satisfies every assertion.
    pub fn satisfied_by(&self, values: &[i64]) -> bool {
        self.assertions.iter().all(|(_, t)| t.eval(values).is_some_and(|v| v != 0))
    }
}

/// Enumerated models of one instance.
#[derive(Debug, Clone)]
pub struct SolutionSet {
    pub models: Vec<Rc<Model>>,
    /// More models exist beyond `limit`.
    pub truncated: bool,
    pub limit: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Minimize,
    Maximize,
}

/// Optimization result.
#[derive(Debug, Clone)]
pub struct Optimum {
    pub model: Rc<Model>,
    pub value: i64,
}

/// Per-call solver limits.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Deterministic work budget (propagation steps plus search nodes).
    pub max_work: u64,
    /// Wall-clock budget in milliseconds; 0 disables it.
    pub timeout_ms: u64,
    /// Randomizes value order when set.
    pub seed: Option<u64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_work: 40_000_000,
            timeout_ms: 10_000,
            seed: None,
        }
    }
}

/// Solver port.
pub trait Backend {
    /// One model, or `None` when unsatisfiable.
    fn check(&mut self, cs: &ConstraintSet, opts: &SolveOptions) -> Result<Option<Vec<i64>>>;

    /// Up to `limit` distinct models; the flag reports whether more exist.
    ///
    /// The default iterates `check` with blocking clauses over all declared
    /// symbols.
    fn enumerate(&mut self, cs: &ConstraintSet, limit: usize, opts: &SolveOptions) -> Result<(Vec<Vec<i64>>, bool)> {
        let mut work = cs.clone();
        let mut found = Vec::new();
        while let Some(m) = self.check(&work, opts)? {
            if found.len() == limit {
                return Ok((found, true));
            }
            work.assert("blocking", blocking_clause(&m, &cs.sorts));
            found.push(m);
        }
        Ok((found, false))
    }

    /// An optimal model and the objective value.
    fn optimize(&mut self, cs: &ConstraintSet, dir: Direction, objective: &TermRef, opts: &SolveOptions) -> Result<(Vec<i64>, i64)>;
}

/// `Or(v_i != m_i)` over every declared symbol.
pub fn blocking_clause(m: &[i64], sorts: &[Sort]) -> TermRef {
    Rc::new(Term::Or(
        m.iter()
            .zip(sorts)
            .enumerate()
            .map(|(i, (v, s))| {
                Rc::new(Term::Cmp(
                    CmpOp::Ne,
                    Rc::new(Term::Var(VarId(i as u32), *s)),
                    Rc::new(Term::Int(*v)),
                ))
            })
            .collect(),
    ))
}

/// Reject objectives outside linear integer arithmetic.
pub fn check_linear(t: &Term) -> Result<()> {
    fn constant(t: &Term) -> bool {
        let mut vars = Vec::new();
        t.vars(&mut vars);
        vars.is_empty()
    }
    match t {
        Term::Int(_) | Term::Bool(_) | Term::Var(..) => Ok(()),
        Term::Add(xs) => xs.iter().try_for_each(|x| check_linear(x)),
        Term::Sub(a, b) => {
            check_linear(a)?;
            check_linear(b)
        }
        Term::Neg(a) => check_linear(a),
        Term::Mul(xs) => {
            let open = xs.iter().filter(|x| !constant(x)).count();
            if open > 1 {
                return Err(Error::NonlinearObjective(format!("product of symbols in `{t}`")));
            }
            xs.iter().try_for_each(|x| check_linear(x))
        }
        Term::Div(a, b) | Term::Mod(a, b) => {
            if !constant(b) {
                return Err(Error::NonlinearObjective(format!("division by a symbol in `{t}`")));
            }
            check_linear(a)
        }
        Term::Ite(_, a, b) => {
            check_linear(a)?;
            check_linear(b)
        }
        // boolean sub-terms count as 0/1 indicators
        _ => Ok(()),
    }
}

/// Built-in finite-domain backend.
#[derive(Debug, Default, Clone)]
pub struct FdBackend;

impl FdBackend {
    fn compile(cs: &ConstraintSet) -> Result<fd::Compiled> {
        cs.check_declared()?;
        let mut prog = fd::Compiled::default();
        for (label, t) in &cs.assertions {
            if t.sort() != Sort::Bool {
                return Err(Error::FormulaType(format!("`{label}` is not a boolean constraint")));
            }
            prog.add_root(t);
        }
        Ok(prog)
    }
}

impl Backend for FdBackend {
    fn check(&mut self, cs: &ConstraintSet, opts: &SolveOptions) -> Result<Option<Vec<i64>>> {
        let prog = Self::compile(cs)?;
        let mut budget = fd::Budget::new(opts.max_work, opts.timeout_ms);
        let mut search = fd::Search::new(&prog, &cs.sorts, opts.seed);
        let mut found = None;
        search.run(&mut budget, &mut |vals| {
            found = Some(vals.to_vec());
            fd::Flow::Stop
        })?;
        Ok(found)
    }

    fn enumerate(&mut self, cs: &ConstraintSet, limit: usize, opts: &SolveOptions) -> Result<(Vec<Vec<i64>>, bool)> {
        let prog = Self::compile(cs)?;
        let mut budget = fd::Budget::new(opts.max_work, opts.timeout_ms);
        let mut search = fd::Search::new(&prog, &cs.sorts, opts.seed);
        let mut found = Vec::new();
        let mut truncated = false;
        search.run(&mut budget, &mut |vals| {
            if found.len() == limit {
                truncated = true;
                return fd::Flow::Stop;
            }
            found.push(vals.to_vec());
            fd::Flow::Continue
        })?;
        Ok((found, truncated))
    }

    fn optimize(&mut self, cs: &ConstraintSet, dir: Direction, objective: &TermRef, opts: &SolveOptions) -> Result<(Vec<i64>, i64)> {
        check_linear(objective)?;
        let mut prog = Self::compile(cs)?;
        let obj = prog.compile(objective);
        let mut budget = fd::Budget::new(opts.max_work, opts.timeout_ms);

        // Binary search on the objective bound; each probe asserts the bound as a constraint.
        let probe = |lo: i64, hi: i64, budget: &mut fd::Budget| -> Result<Option<Vec<i64>>> {
            let mut bounded = cs.clone();
            bounded.assert("objective-lo", Rc::new(Term::Cmp(CmpOp::Ge, objective.clone(), Rc::new(Term::Int(lo)))));
            bounded.assert("objective-hi", Rc::new(Term::Cmp(CmpOp::Le, objective.clone(), Rc::new(Term::Int(hi)))));
            let prog = Self::compile(&bounded)?;
            let mut s = fd::Search::new(&prog, &cs.sorts, opts.seed);
            let mut found = None;
            s.run(budget, &mut |vals| {
                found = Some(vals.to_vec());
                fd::Flow::Stop
            })?;
            Ok(found)
        };
        let (mut lo, mut hi) = {
            let mut s = fd::Search::new(&prog, &cs.sorts, None);
            if !s.presolve(&mut budget)? {
                return Err(Error::Infeasible);
            }
            s.node_bounds(obj)
        };
        let mut best = probe(lo, hi, &mut budget)?.ok_or(Error::Infeasible)?;
        let value_of = |vals: &[i64]| objective.eval(vals).unwrap_or(0);
        let mut best_val = value_of(&best);
        match dir {
            Direction::Maximize => lo = best_val,
            Direction::Minimize => hi = best_val,
        }
        while lo < hi {
            let mid = lo + ((hi as i128 - lo as i128) / 2) as i64;
            let (a, b) = match dir {
                Direction::Maximize => (mid + 1, hi),
                Direction::Minimize => (lo, mid),
            };
            match probe(a, b, &mut budget)? {
                Some(m) => {
                    best_val = value_of(&m);
                    best = m;
                    match dir {
                        Direction::Maximize => lo = best_val,
                        Direction::Minimize => hi = best_val,
                    }
                }
                None => match dir {
                    Direction::Maximize => hi = mid,
                    Direction::Minimize => lo = mid + 1,
                },
            }
        }
        // an optimum sitting on the artificial clamp means no real bound exists
        let on_clamp = best
            .iter()
            .zip(&cs.sorts)
            .any(|(v, s)| *s == Sort::Int && v.abs() >= CLAMP);
        if on_clamp {
            return Err(Error::Unbounded);
        }
        Ok((best, best_val))
    }
}

/// Enumerate into a [`SolutionSet`] tagged for one instance.
pub fn enumerate_models(backend: &mut dyn Backend, cs: &ConstraintSet, limit: usize, tag: u64, opts: &SolveOptions) -> Result<SolutionSet> {
    if limit == 0 {
        return Err(Error::Constraint("max_solution must be at least 1".into()));
    }
    let (found, truncated) = backend.enumerate(cs, limit, opts)?;
    Ok(SolutionSet {
        models: found.into_iter().map(|values| Rc::new(Model { tag, values })).collect(),
        truncated,
        limit,
    })
}

/// Optimize and tag the resulting model.
pub fn optimize_objective(backend: &mut dyn Backend, cs: &ConstraintSet, dir: Direction, objective: &TermRef, tag: u64, opts: &SolveOptions) -> Result<Optimum> {
    let (values, value) = backend.optimize(cs, dir, objective, opts)?;
    Ok(Optimum {
        model: Rc::new(Model { tag, values }),
        value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(i: u32, s: Sort) -> TermRef {
        Rc::new(Term::Var(VarId(i), s))
    }

    fn int(v: i64) -> TermRef {
        Rc::new(Term::Int(v))
    }

    fn cmp(op: CmpOp, a: TermRef, b: TermRef) -> TermRef {
        Rc::new(Term::Cmp(op, a, b))
    }

    fn exactly_one(x: TermRef, y: TermRef) -> TermRef {
        Rc::new(Term::Xor(x, y))
    }

    #[test]
    fn exactly_one_of_two() {
        let mut cs = ConstraintSet::new(vec![Sort::Bool, Sort::Bool]);
        cs.assert("x", exactly_one(var(0, Sort::Bool), var(1, Sort::Bool)));
        let opts = SolveOptions::default();
        let s = enumerate_models(&mut FdBackend, &cs, 10, 0, &opts).unwrap();
        assert_eq!(s.models.len(), 2);
        assert!(!s.truncated);
        let s = enumerate_models(&mut FdBackend, &cs, 1, 0, &opts).unwrap();
        assert_eq!(s.models.len(), 1);
        assert!(s.truncated);
    }

    #[test]
    fn unsat_has_no_models() {
        let mut cs = ConstraintSet::new(vec![Sort::Bool]);
        cs.assert("a", var(0, Sort::Bool));
        cs.assert("b", Rc::new(Term::Not(var(0, Sort::Bool))));
        let s = enumerate_models(&mut FdBackend, &cs, 5, 0, &SolveOptions::default()).unwrap();
        assert!(s.models.is_empty());
        assert!(!s.truncated);
    }

    #[test]
    fn blocking_clause_default_agrees() {
        struct Plain(FdBackend);
        impl Backend for Plain {
            fn check(&mut self, cs: &ConstraintSet, o: &SolveOptions) -> Result<Option<Vec<i64>>> {
                self.0.check(cs, o)
            }
            fn optimize(&mut self, cs: &ConstraintSet, d: Direction, t: &TermRef, o: &SolveOptions) -> Result<(Vec<i64>, i64)> {
                self.0.optimize(cs, d, t, o)
            }
        }
        let mut cs = ConstraintSet::new(vec![Sort::Int, Sort::Int]);
        cs.assert("r", Rc::new(Term::And(vec![
            cmp(CmpOp::Ge, var(0, Sort::Int), int(1)),
            cmp(CmpOp::Le, var(0, Sort::Int), int(4)),
            cmp(CmpOp::Ge, var(1, Sort::Int), int(1)),
            cmp(CmpOp::Le, var(1, Sort::Int), int(4)),
            cmp(CmpOp::Lt, var(0, Sort::Int), var(1, Sort::Int)),
        ])));
        let opts = SolveOptions::default();
        let (mut a, ta) = FdBackend.enumerate(&cs, 100, &opts).unwrap();
        let (mut b, tb) = Plain(FdBackend).enumerate(&cs, 100, &opts).unwrap();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
        assert_eq!((ta, tb), (false, false));
    }

    #[test]
    fn optimization_examples() {
        let opts = SolveOptions::default();
        let x = var(0, Sort::Int);
        let mut cs = ConstraintSet::new(vec![Sort::Int]);
        cs.assert("ge3", cmp(CmpOp::Ge, x.clone(), int(3)));
        let r = optimize_objective(&mut FdBackend, &cs, Direction::Minimize, &x, 0, &opts).unwrap();
        assert_eq!(r.value, 3);

        let mut cs = ConstraintSet::new(vec![Sort::Int]);
        cs.assert("le3", cmp(CmpOp::Le, x.clone(), int(3)));
        cs.assert("le5", cmp(CmpOp::Le, x.clone(), int(5)));
        let r = optimize_objective(&mut FdBackend, &cs, Direction::Maximize, &x, 0, &opts).unwrap();
        assert_eq!(r.value, 3);

        let cs = ConstraintSet::new(vec![Sort::Int]);
        let r = optimize_objective(&mut FdBackend, &cs, Direction::Maximize, &x, 0, &opts);
        assert_eq!(r.unwrap_err(), Error::Unbounded);

        let mut cs = ConstraintSet::new(vec![Sort::Int]);
        cs.assert("no", Rc::new(Term::Bool(false)));
        let r = optimize_objective(&mut FdBackend, &cs, Direction::Maximize, &x, 0, &opts);
        assert_eq!(r.unwrap_err(), Error::Infeasible);
    }

    #[test]
    fn nonlinear_objective_rejected() {
        let t = Term::Mul(vec![var(0, Sort::Int), var(1, Sort::Int)]);
        assert!(matches!(check_linear(&t), Err(Error::NonlinearObjective(_))));
        let t = Term::Mul(vec![int(3), var(1, Sort::Int)]);
        assert!(check_linear(&t).is_ok());
    }
}
