//! Finite-domain propagation and search over compiled terms.
//!
//! Propagation narrows interval/set domains top-down from each asserted
//! root (HC4 style). Disjunctions with several open branches are handled by
//! constructive disjunction: each branch is narrowed on a scratch copy and
//! the union of the results is kept. Every leaf of the search is re-checked
//! exactly, so propagation only affects speed, never answers.

use std::collections::HashMap;
use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::term::{cmp_holds, py_floordiv, py_mod, CmpOp, Sort, Term, TermRef};
use crate::error::{Error, Result};

/// Bound used for integer symbols without declared limits.
pub const CLAMP: i64 = 1 << 40;
/// Domains at most this large are stored as explicit value sets on demand.
const SET_LIMIT: u64 = 512;
/// Domains at most this large are branched value by value.
const ENUM_LIMIT: u64 = 64;
/// Disjunctions with more open branches than this skip constructive narrowing.
const CD_LIMIT: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Dom {
    Range(i64, i64),
    /// Sorted, unique, non-empty.
    Set(Vec<i64>),
}

impl Dom {
    fn lo(&self) -> i64 {
        match self {
            Dom::Range(l, _) => *l,
            Dom::Set(v) => v[0],
        }
    }

    fn hi(&self) -> i64 {
        match self {
            Dom::Range(_, h) => *h,
            Dom::Set(v) => v[v.len() - 1],
        }
    }

    fn size(&self) -> u64 {
        match self {
            Dom::Range(l, h) => (*h as i128 - *l as i128 + 1).min(u64::MAX as i128) as u64,
            Dom::Set(v) => v.len() as u64,
        }
    }

    fn contains(&self, x: i64) -> bool {
        match self {
            Dom::Range(l, h) => *l <= x && x <= *h,
            Dom::Set(v) => v.binary_search(&x).is_ok(),
        }
    }

    fn values(&self) -> Vec<i64> {
        match self {
            Dom::Range(l, h) => (*l..=*h).collect(),
            Dom::Set(v) => v.clone(),
        }
    }

    /// Intersect with `[lo, hi]`. `None` when empty.
    fn restrict(&self, lo: i64, hi: i64) -> Option<Dom> {
        match self {
            Dom::Range(l, h) => {
                let (a, b) = ((*l).max(lo), (*h).min(hi));
                (a <= b).then_some(Dom::Range(a, b))
            }
            Dom::Set(v) => {
                let kept: Vec<i64> = v.iter().copied().filter(|x| *x >= lo && *x <= hi).collect();
                (!kept.is_empty()).then_some(Dom::Set(kept))
            }
        }
    }

    /// Remove one value when representable. `None` when empty.
    fn remove(&self, x: i64) -> Option<Dom> {
        if !self.contains(x) {
            return Some(self.clone());
        }
        match self {
            Dom::Range(l, h) => {
                if *l == *h {
                    None
                } else if x == *l {
                    Some(Dom::Range(l + 1, *h))
                } else if x == *h {
                    Some(Dom::Range(*l, h - 1))
                } else if self.size() <= SET_LIMIT {
                    Some(Dom::Set((*l..=*h).filter(|v| *v != x).collect()))
                } else {
                    Some(self.clone())
                }
            }
            Dom::Set(v) => {
                let kept: Vec<i64> = v.iter().copied().filter(|y| *y != x).collect();
                (!kept.is_empty()).then_some(Dom::Set(kept))
            }
        }
    }

    fn union(&self, other: &Dom) -> Dom {
        let small = |d: &Dom| d.size() <= SET_LIMIT;
        if small(self) && small(other) {
            let mut v = self.values();
            v.extend(other.values());
            v.sort_unstable();
            v.dedup();
            if v.len() as i64 == v[v.len() - 1] - v[0] + 1 {
                return Dom::Range(v[0], v[v.len() - 1]);
            }
            return Dom::Set(v);
        }
        Dom::Range(self.lo().min(other.lo()), self.hi().max(other.hi()))
    }

    fn normalize(self) -> Dom {
        match self {
            Dom::Set(v) if v.len() as i64 == v[v.len() - 1] - v[0] + 1 => Dom::Range(v[0], v[v.len() - 1]),
            d => d,
        }
    }
}

#[derive(Debug, Clone)]
enum Node {
    Const(i64),
    Var(usize),
    Not(usize),
    And(Vec<usize>),
    Or(Vec<usize>),
    Implies(usize, usize),
    Xor(usize, usize),
    Ite(usize, usize, usize),
    Cmp(CmpOp, usize, usize),
    Add(Vec<usize>),
    Sub(usize, usize),
    Neg(usize),
    Mul(Vec<usize>),
    Div(usize, usize),
    Mod(usize, usize),
    Distinct(Vec<usize>),
}

/// Term DAG flattened into an arena.
#[derive(Debug, Clone, Default)]
pub(crate) struct Compiled {
    nodes: Vec<Node>,
    memo: HashMap<*const Term, usize>,
    /// Owns the compiled terms so pointer keys in `memo` stay unique.
    keep: Vec<TermRef>,
    pub roots: Vec<usize>,
}

impl Compiled {
    pub fn add_root(&mut self, t: &TermRef) -> usize {
        let id = self.compile(t);
        self.roots.push(id);
        id
    }

    pub fn compile(&mut self, t: &TermRef) -> usize {
        let key = Rc::as_ptr(t);
        if let Some(&id) = self.memo.get(&key) {
            return id;
        }
        let node = match &**t {
            Term::Bool(b) => Node::Const(*b as i64),
            Term::Int(v) => Node::Const(*v),
            Term::Var(v, _) => Node::Var(v.0 as usize),
            Term::Not(a) => Node::Not(self.compile(a)),
            Term::And(xs) => Node::And(xs.iter().map(|x| self.compile(x)).collect()),
            Term::Or(xs) => Node::Or(xs.iter().map(|x| self.compile(x)).collect()),
            Term::Implies(a, b) => Node::Implies(self.compile(a), self.compile(b)),
            Term::Xor(a, b) => Node::Xor(self.compile(a), self.compile(b)),
            Term::Ite(c, a, b) => Node::Ite(self.compile(c), self.compile(a), self.compile(b)),
            Term::Cmp(op, a, b) => Node::Cmp(*op, self.compile(a), self.compile(b)),
            Term::Add(xs) => Node::Add(xs.iter().map(|x| self.compile(x)).collect()),
            Term::Sub(a, b) => Node::Sub(self.compile(a), self.compile(b)),
            Term::Neg(a) => Node::Neg(self.compile(a)),
            Term::Mul(xs) => Node::Mul(xs.iter().map(|x| self.compile(x)).collect()),
            Term::Div(a, b) => Node::Div(self.compile(a), self.compile(b)),
            Term::Mod(a, b) => Node::Mod(self.compile(a), self.compile(b)),
            Term::Distinct(xs) => Node::Distinct(xs.iter().map(|x| self.compile(x)).collect()),
        };
        self.nodes.push(node);
        let id = self.nodes.len() - 1;
        self.keep.push(t.clone());
        self.memo.insert(key, id);
        id
    }

    /// Exact value under a full assignment.
    fn exact(&self, n: usize, vals: &[i64]) -> i64 {
        let e = |m: usize| self.exact(m, vals);
        match &self.nodes[n] {
            Node::Const(c) => *c,
            Node::Var(v) => vals[*v],
            Node::Not(a) => (e(*a) == 0) as i64,
            Node::And(xs) => xs.iter().all(|x| e(*x) != 0) as i64,
            Node::Or(xs) => xs.iter().any(|x| e(*x) != 0) as i64,
            Node::Implies(a, b) => (e(*a) == 0 || e(*b) != 0) as i64,
            Node::Xor(a, b) => ((e(*a) != 0) != (e(*b) != 0)) as i64,
            Node::Ite(c, a, b) => {
                if e(*c) != 0 {
                    e(*a)
                } else {
                    e(*b)
                }
            }
            Node::Cmp(op, a, b) => cmp_holds(*op, e(*a), e(*b)) as i64,
            Node::Add(xs) => xs.iter().fold(0i64, |s, x| s.saturating_add(e(*x))),
            Node::Sub(a, b) => e(*a).saturating_sub(e(*b)),
            Node::Neg(a) => e(*a).saturating_neg(),
            Node::Mul(xs) => xs.iter().fold(1i64, |s, x| s.saturating_mul(e(*x))),
            Node::Div(a, b) => {
                let d = e(*b);
                if d == 0 {
                    0
                } else {
                    py_floordiv(e(*a), d)
                }
            }
            Node::Mod(a, b) => {
                let d = e(*b);
                let x = e(*a);
                if d == 0 {
                    x
                } else {
                    py_mod(x, d)
                }
            }
            Node::Distinct(xs) => {
                let mut v: Vec<i64> = xs.iter().map(|x| e(*x)).collect();
                v.sort_unstable();
                v.windows(2).all(|w| w[0] != w[1]) as i64
            }
        }
    }
}

struct Conflict;

type Prop<T = ()> = std::result::Result<T, Conflict>;

/// Work and wall-clock limits for one solver call.
#[derive(Debug, Clone)]
pub(crate) struct Budget {
    pub work: u64,
    pub max_work: u64,
    #[cfg(not(target_arch = "wasm32"))]
    pub deadline: Option<std::time::Instant>,
}

impl Budget {
    pub fn new(max_work: u64, timeout_ms: u64) -> Self {
        let _ = timeout_ms;
        Budget {
            work: 0,
            max_work,
            #[cfg(not(target_arch = "wasm32"))]
            deadline: (timeout_ms > 0)
                .then(|| std::time::Instant::now() + std::time::Duration::from_millis(timeout_ms)),
        }
    }

    fn tick(&mut self, n: u64) -> Result<()> {
        self.work += n;
        if self.work > self.max_work {
            return Err(Error::SolverTimeout);
        }
        #[cfg(not(target_arch = "wasm32"))]
        if self.work % 4096 < n {
            if let Some(d) = self.deadline {
                if std::time::Instant::now() > d {
                    return Err(Error::SolverTimeout);
                }
            }
        }
        Ok(())
    }
}

/// Search state over one compiled problem.
pub(crate) struct Search<'a> {
    prog: &'a Compiled,
    doms: Vec<Dom>,
    changed: bool,
    work: u64,
    rng: Option<ChaCha8Rng>,
}

/// What the leaf callback wants next.
pub(crate) enum Flow {
    Continue,
    Stop,
}

impl<'a> Search<'a> {
    pub fn new(prog: &'a Compiled, sorts: &[Sort], seed: Option<u64>) -> Self {
        let doms = sorts
            .iter()
            .map(|s| match s {
                Sort::Bool => Dom::Range(0, 1),
                Sort::Int => Dom::Range(-CLAMP, CLAMP),
            })
            .collect();
        Search {
            prog,
            doms,
            changed: false,
            work: 0,
            rng: seed.map(ChaCha8Rng::seed_from_u64),
        }
    }

    /// Root-level propagation. Returns false when the problem is infeasible.
    pub fn presolve(&mut self, budget: &mut Budget) -> Result<bool> {
        let ok = self.propagate().is_ok();
        budget.tick(std::mem::take(&mut self.work))?;
        Ok(ok)
    }

    /// Interval of a node under the current domains.
    pub fn node_bounds(&self, n: usize) -> (i64, i64) {
        self.eval(n)
    }

    /// Depth-first search calling `leaf` on every solution.
    pub fn run(&mut self, budget: &mut Budget, leaf: &mut dyn FnMut(&[i64]) -> Flow) -> Result<Flow> {
        budget.tick(1)?;
        let ok = self.propagate().is_ok();
        budget.tick(std::mem::take(&mut self.work))?;
        if !ok {
            return Ok(Flow::Continue);
        }
        let mut pick: Option<(u64, usize)> = None;
        for (i, d) in self.doms.iter().enumerate() {
            let s = d.size();
            if s > 1 && pick.is_none_or(|(best, _)| s < best) {
                pick = Some((s, i));
            }
        }
        let Some((size, var)) = pick else {
            let vals: Vec<i64> = self.doms.iter().map(Dom::lo).collect();
            if self.prog.roots.iter().all(|r| self.prog.exact(*r, &vals) != 0) {
                return Ok(leaf(&vals));
            }
            return Ok(Flow::Continue);
        };
        let saved = self.doms.clone();
        if size <= ENUM_LIMIT {
            let mut vals = self.doms[var].values();
            if let Some(rng) = self.rng.as_mut() {
                vals.shuffle(rng);
            }
            for v in vals {
                self.doms[var] = Dom::Range(v, v);
                let flow = self.run(budget, leaf)?;
                self.doms.clone_from(&saved);
                if let Flow::Stop = flow {
                    return Ok(Flow::Stop);
                }
            }
        } else {
            let (lo, hi) = (self.doms[var].lo(), self.doms[var].hi());
            let mid = lo + ((hi as i128 - lo as i128) / 2) as i64;
            let mut halves = [(lo, mid), (mid + 1, hi)];
            if let Some(rng) = self.rng.as_mut() {
                halves.shuffle(rng);
            }
            for (a, b) in halves {
                if let Some(d) = saved[var].restrict(a, b) {
                    self.doms[var] = d;
                    let flow = self.run(budget, leaf)?;
                    self.doms.clone_from(&saved);
                    if let Flow::Stop = flow {
                        return Ok(Flow::Stop);
                    }
                }
            }
        }
        Ok(Flow::Continue)
    }

    fn propagate(&mut self) -> Prop {
        loop {
            self.changed = false;
            for i in 0..self.prog.roots.len() {
                let r = self.prog.roots[i];
                self.narrow(r, 1, 1)?;
            }
            if !self.changed {
                return Ok(());
            }
        }
    }

    fn eval(&self, n: usize) -> (i64, i64) {
        let nodes = &self.prog.nodes;
        let b = |x: bool| x as i64;
        match &nodes[n] {
            Node::Const(c) => (*c, *c),
            Node::Var(v) => (self.doms[*v].lo(), self.doms[*v].hi()),
            Node::Not(a) => {
                let (l, h) = self.eval(*a);
                (1 - h, 1 - l)
            }
            Node::And(xs) => {
                let mut all_true = true;
                for x in xs {
                    let (l, h) = self.eval(*x);
                    if l == 0 && h == 0 {
                        return (0, 0);
                    }
                    if l <= 0 && h >= 0 {
                        all_true = false;
                    }
                }
                if all_true {
                    (1, 1)
                } else {
                    (0, 1)
                }
            }
            Node::Or(xs) => {
                let mut all_false = true;
                for x in xs {
                    let (l, h) = self.eval(*x);
                    if l > 0 || h < 0 {
                        return (1, 1);
                    }
                    if !(l == 0 && h == 0) {
                        all_false = false;
                    }
                }
                if all_false {
                    (0, 0)
                } else {
                    (0, 1)
                }
            }
            Node::Implies(a, c) => {
                let (al, ah) = self.eval(*a);
                let (cl, ch) = self.eval(*c);
                let a_false = al == 0 && ah == 0;
                let c_true = cl > 0 || ch < 0;
                let a_true = al > 0 || ah < 0;
                let c_false = cl == 0 && ch == 0;
                if a_false || c_true {
                    (1, 1)
                } else if a_true && c_false {
                    (0, 0)
                } else {
                    (0, 1)
                }
            }
            Node::Xor(a, c) => match (self.truth(*a), self.truth(*c)) {
                (Some(x), Some(y)) => {
                    let v = b(x != y);
                    (v, v)
                }
                _ => (0, 1),
            },
            Node::Ite(c, x, y) => match self.truth(*c) {
                Some(true) => self.eval(*x),
                Some(false) => self.eval(*y),
                None => {
                    let (a, bb) = (self.eval(*x), self.eval(*y));
                    (a.0.min(bb.0), a.1.max(bb.1))
                }
            },
            Node::Cmp(op, x, y) => {
                let (xl, xh) = self.eval(*x);
                let (yl, yh) = self.eval(*y);
                let (t, f) = match op {
                    CmpOp::Eq => (xl == xh && yl == yh && xl == yl, xh < yl || yh < xl || self.eq_excluded(*x, *y)),
                    CmpOp::Ne => (xh < yl || yh < xl || self.eq_excluded(*x, *y), xl == xh && yl == yh && xl == yl),
                    CmpOp::Lt => (xh < yl, xl >= yh),
                    CmpOp::Le => (xh <= yl, xl > yh),
                    CmpOp::Gt => (xl > yh, xh <= yl),
                    CmpOp::Ge => (xl >= yh, xh < yl),
                };
                if t {
                    (1, 1)
                } else if f {
                    (0, 0)
                } else {
                    (0, 1)
                }
            }
            Node::Add(xs) => xs.iter().fold((0i64, 0i64), |(l, h), x| {
                let (a, c) = self.eval(*x);
                (l.saturating_add(a), h.saturating_add(c))
            }),
            Node::Sub(x, y) => {
                let (a, c) = self.eval(*x);
                let (d, e) = self.eval(*y);
                (a.saturating_sub(e), c.saturating_sub(d))
            }
            Node::Neg(x) => {
                let (a, c) = self.eval(*x);
                (c.saturating_neg(), a.saturating_neg())
            }
            Node::Mul(xs) => xs.iter().fold((1i64, 1i64), |(l, h), x| {
                let (a, c) = self.eval(*x);
                let p = [l.saturating_mul(a), l.saturating_mul(c), h.saturating_mul(a), h.saturating_mul(c)];
                (*p.iter().min().expect("4"), *p.iter().max().expect("4"))
            }),
            Node::Div(x, y) => {
                let (a, c) = self.eval(*x);
                let (d, e) = self.eval(*y);
                if d > 0 || e < 0 {
                    let p = [py_floordiv(a, d), py_floordiv(a, e), py_floordiv(c, d), py_floordiv(c, e)];
                    (*p.iter().min().expect("4"), *p.iter().max().expect("4"))
                } else {
                    let m = a.saturating_abs().max(c.saturating_abs());
                    (m.saturating_neg(), m)
                }
            }
            Node::Mod(x, y) => {
                let (a, c) = self.eval(*x);
                let (d, e) = self.eval(*y);
                if d > 0 {
                    if a >= 0 && c < d {
                        (a, c)
                    } else {
                        (0, e - 1)
                    }
                } else if e < 0 {
                    (d + 1, 0)
                } else {
                    let m = d.saturating_abs().max(e.saturating_abs());
                    (a.min(m.saturating_neg()), c.max(m))
                }
            }
            Node::Distinct(xs) => {
                let mut fixed = Vec::new();
                let mut open = false;
                for x in xs {
                    let (l, h) = self.eval(*x);
                    if l == h {
                        fixed.push(l);
                    } else {
                        open = true;
                    }
                }
                fixed.sort_unstable();
                if fixed.windows(2).any(|w| w[0] == w[1]) {
                    (0, 0)
                } else if open {
                    (0, 1)
                } else {
                    (1, 1)
                }
            }
        }
    }

    fn truth(&self, n: usize) -> Option<bool> {
        let (l, h) = self.eval(n);
        if l == 0 && h == 0 {
            Some(false)
        } else if l > 0 || h < 0 {
            Some(true)
        } else {
            None
        }
    }

    /// Holes in set domains can rule out equality even when intervals overlap.
    fn eq_excluded(&self, x: usize, y: usize) -> bool {
        let dom_of = |n: usize| match &self.prog.nodes[n] {
            Node::Var(v) => Some(&self.doms[*v]),
            _ => None,
        };
        let fixed_of = |n: usize| {
            let (l, h) = self.eval(n);
            (l == h).then_some(l)
        };
        match (dom_of(x), fixed_of(y), dom_of(y), fixed_of(x)) {
            (Some(d), Some(c), _, _) | (_, _, Some(d), Some(c)) => !d.contains(c),
            _ => false,
        }
    }

    fn set_dom(&mut self, v: usize, d: Dom) {
        if self.doms[v] != d {
            self.doms[v] = d.normalize();
            self.changed = true;
        }
    }

    fn narrow(&mut self, n: usize, lo: i64, hi: i64) -> Prop {
        self.work += 1;
        let (cl, ch) = self.eval(n);
        let (nl, nh) = (cl.max(lo), ch.min(hi));
        if nl > nh {
            return Err(Conflict);
        }
        if nl == cl && nh == ch {
            return Ok(());
        }
        let node = self.prog.nodes[n].clone();
        match node {
            Node::Const(_) => Ok(()),
            Node::Var(v) => {
                let d = self.doms[v].restrict(nl, nh).ok_or(Conflict)?;
                self.set_dom(v, d);
                Ok(())
            }
            Node::Not(a) => {
                if nl == 1 {
                    self.narrow(a, 0, 0)
                } else {
                    self.narrow_true(a)
                }
            }
            Node::And(xs) => {
                if nl == 1 {
                    for x in xs {
                        self.narrow(x, 1, 1)?;
                    }
                    Ok(())
                } else {
                    self.narrow_some_false(&xs)
                }
            }
            Node::Or(xs) => {
                if nh == 0 {
                    for x in xs {
                        self.narrow(x, 0, 0)?;
                    }
                    Ok(())
                } else {
                    self.narrow_some_true(&xs)
                }
            }
            Node::Implies(a, c) => {
                if nh == 0 {
                    self.narrow_true(a)?;
                    self.narrow(c, 0, 0)
                } else {
                    match (self.truth(a), self.truth(c)) {
                        (Some(true), _) => self.narrow_true(c),
                        (_, Some(false)) => self.narrow(a, 0, 0),
                        _ => Ok(()),
                    }
                }
            }
            Node::Xor(a, c) => {
                let target = nl == 1;
                match (self.truth(a), self.truth(c)) {
                    (Some(x), None) => self.narrow_bool(c, x != target),
                    (None, Some(y)) => self.narrow_bool(a, y != target),
                    _ => Ok(()),
                }
            }
            Node::Ite(c, x, y) => match self.truth(c) {
                Some(true) => self.narrow(x, nl, nh),
                Some(false) => self.narrow(y, nl, nh),
                None => {
                    let (xl, xh) = self.eval(x);
                    let (yl, yh) = self.eval(y);
                    if xh < nl || xl > nh {
                        self.narrow(c, 0, 0)?;
                        self.narrow(y, nl, nh)
                    } else if yh < nl || yl > nh {
                        self.narrow_true(c)?;
                        self.narrow(x, nl, nh)
                    } else {
                        Ok(())
                    }
                }
            },
            Node::Cmp(op, x, y) => {
                let op = if nl == 1 { op } else { negate(op) };
                self.narrow_cmp(op, x, y)
            }
            Node::Add(xs) => {
                let bounds: Vec<(i64, i64)> = xs.iter().map(|x| self.eval(*x)).collect();
                let sl = bounds.iter().fold(0i64, |s, b| s.saturating_add(b.0));
                let sh = bounds.iter().fold(0i64, |s, b| s.saturating_add(b.1));
                for (x, (bl, bh)) in xs.iter().zip(bounds) {
                    let rest_l = sl.saturating_sub(bl);
                    let rest_h = sh.saturating_sub(bh);
                    self.narrow(*x, nl.saturating_sub(rest_h), nh.saturating_sub(rest_l))?;
                }
                Ok(())
            }
            Node::Sub(x, y) => {
                let (yl, yh) = self.eval(y);
                self.narrow(x, nl.saturating_add(yl), nh.saturating_add(yh))?;
                let (xl, xh) = self.eval(x);
                self.narrow(y, xl.saturating_sub(nh), xh.saturating_sub(nl))
            }
            Node::Neg(x) => self.narrow(x, nh.saturating_neg(), nl.saturating_neg()),
            Node::Mul(xs) => {
                let mut coef = 1i64;
                let mut open = None;
                for x in &xs {
                    let (l, h) = self.eval(*x);
                    if l == h {
                        coef = coef.saturating_mul(l);
                    } else if open.is_none() {
                        open = Some(*x);
                    } else {
                        return Ok(());
                    }
                }
                match open {
                    Some(x) if coef > 0 => self.narrow(x, div_ceil(nl, coef), py_floordiv(nh, coef)),
                    Some(x) if coef < 0 => self.narrow(x, div_ceil(nh, coef), py_floordiv(nl, coef)),
                    _ => Ok(()),
                }
            }
            Node::Div(x, y) => {
                let (yl, yh) = self.eval(y);
                if yl == yh && yl > 0 {
                    let c = yl;
                    self.narrow(x, nl.saturating_mul(c), nh.saturating_mul(c).saturating_add(c - 1))
                } else {
                    Ok(())
                }
            }
            Node::Mod(..) => Ok(()),
            Node::Distinct(xs) => {
                if nl == 1 {
                    self.narrow_distinct(&xs)
                } else {
                    Ok(())
                }
            }
        }
    }

    fn narrow_true(&mut self, n: usize) -> Prop {
        // children of logical nodes are 0/1, so "true" is exactly 1
        self.narrow(n, 1, 1)
    }

    fn narrow_bool(&mut self, n: usize, v: bool) -> Prop {
        if v {
            self.narrow_true(n)
        } else {
            self.narrow(n, 0, 0)
        }
    }

    fn narrow_some_false(&mut self, xs: &[usize]) -> Prop {
        let mut open = None;
        for x in xs {
            match self.truth(*x) {
                Some(false) => return Ok(()),
                Some(true) => {}
                None if open.is_none() => open = Some(*x),
                None => return Ok(()),
            }
        }
        match open {
            Some(x) => self.narrow(x, 0, 0),
            None => Err(Conflict),
        }
    }

    fn narrow_some_true(&mut self, xs: &[usize]) -> Prop {
        let mut open = Vec::new();
        for x in xs {
            match self.truth(*x) {
                Some(true) => return Ok(()),
                Some(false) => {}
                None => open.push(*x),
            }
        }
        match open.len() {
            0 => Err(Conflict),
            1 => self.narrow_true(open[0]),
            k if k <= CD_LIMIT => self.constructive(&open),
            _ => Ok(()),
        }
    }

    /// Keep, per variable, the union of what each open branch allows.
    fn constructive(&mut self, open: &[usize]) -> Prop {
        let base = self.doms.clone();
        let changed = self.changed;
        let mut union: Option<Vec<Dom>> = None;
        let mut feasible = Vec::new();
        for &x in open {
            self.doms.clone_from(&base);
            if self.narrow_true(x).is_ok() {
                feasible.push(x);
                union = Some(match union {
                    None => self.doms.clone(),
                    Some(u) => u.iter().zip(self.doms.iter()).map(|(a, b)| a.union(b)).collect(),
                });
            }
        }
        self.doms = base;
        self.changed = changed;
        match feasible.len() {
            0 => Err(Conflict),
            1 => self.narrow_true(feasible[0]),
            _ => {
                let u = union.expect("feasible branches");
                for (v, d) in u.into_iter().enumerate() {
                    if d.size() < self.doms[v].size() {
                        self.set_dom(v, d);
                    }
                }
                Ok(())
            }
        }
    }

    fn narrow_cmp(&mut self, op: CmpOp, x: usize, y: usize) -> Prop {
        let (xl, xh) = self.eval(x);
        let (yl, yh) = self.eval(y);
        match op {
            CmpOp::Eq => {
                self.narrow(x, yl, yh)?;
                let (xl, xh) = self.eval(x);
                self.narrow(y, xl, xh)?;
                self.eq_sets(x, y)
            }
            CmpOp::Ne => {
                if yl == yh {
                    self.remove_value(x, yl)?;
                }
                if xl == xh {
                    self.remove_value(y, xl)?;
                }
                Ok(())
            }
            CmpOp::Lt => {
                self.narrow(x, i64::MIN, yh.saturating_sub(1))?;
                self.narrow(y, xl.saturating_add(1), i64::MAX)
            }
            CmpOp::Le => {
                self.narrow(x, i64::MIN, yh)?;
                self.narrow(y, xl, i64::MAX)
            }
            CmpOp::Gt => self.narrow_cmp(CmpOp::Lt, y, x),
            CmpOp::Ge => self.narrow_cmp(CmpOp::Le, y, x),
        }
    }

    /// Equality between two variables intersects their value sets.
    fn eq_sets(&mut self, x: usize, y: usize) -> Prop {
        if let (Node::Var(a), Node::Var(b)) = (&self.prog.nodes[x], &self.prog.nodes[y]) {
            let (a, b) = (*a, *b);
            if matches!(self.doms[a], Dom::Set(_)) || matches!(self.doms[b], Dom::Set(_)) {
                let da = &self.doms[a];
                let db = &self.doms[b];
                if da.size() <= SET_LIMIT && db.size() <= SET_LIMIT {
                    let common: Vec<i64> = da.values().into_iter().filter(|v| db.contains(*v)).collect();
                    if common.is_empty() {
                        return Err(Conflict);
                    }
                    self.set_dom(a, Dom::Set(common.clone()));
                    self.set_dom(b, Dom::Set(common));
                }
            }
        }
        Ok(())
    }

    fn remove_value(&mut self, n: usize, v: i64) -> Prop {
        if let Node::Var(var) = self.prog.nodes[n] {
            let d = self.doms[var].remove(v).ok_or(Conflict)?;
            self.set_dom(var, d);
            Ok(())
        } else {
            let (l, h) = self.eval(n);
            if l == h && l == v {
                return Err(Conflict);
            }
            if l == v {
                return self.narrow(n, v + 1, h);
            }
            if h == v {
                return self.narrow(n, l, v - 1);
            }
            Ok(())
        }
    }

    fn narrow_distinct(&mut self, xs: &[usize]) -> Prop {
        let mut fixed = Vec::new();
        for x in xs {
            let (l, h) = self.eval(*x);
            if l == h {
                fixed.push((*x, l));
            }
        }
        for (fx, v) in &fixed {
            for x in xs {
                if x != fx {
                    self.remove_value(*x, *v)?;
                }
            }
        }
        // pigeonhole over variable children with small domains
        let mut union: Vec<i64> = Vec::new();
        for x in xs {
            match &self.prog.nodes[*x] {
                Node::Var(v) if self.doms[*v].size() <= SET_LIMIT => union.extend(self.doms[*v].values()),
                _ => return Ok(()),
            }
        }
        union.sort_unstable();
        union.dedup();
        if union.len() < xs.len() {
            return Err(Conflict);
        }
        Ok(())
    }
}

fn negate(op: CmpOp) -> CmpOp {
    match op {
        CmpOp::Eq => CmpOp::Ne,
        CmpOp::Ne => CmpOp::Eq,
        CmpOp::Lt => CmpOp::Ge,
        CmpOp::Le => CmpOp::Gt,
        CmpOp::Gt => CmpOp::Le,
        CmpOp::Ge => CmpOp::Lt,
    }
}

fn div_ceil(a: i64, b: i64) -> i64 {
    -py_floordiv(a.saturating_neg(), b)
}
