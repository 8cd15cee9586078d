use std::collections::BTreeSet;
use std::rc::Rc;

use proptest::prelude::*;
use puzzlegen_core::solver::term::{CmpOp, Sort, Term, TermRef, VarId};
use puzzlegen_core::solver::{enumerate_models, optimize_objective, ConstraintSet, Direction, FdBackend, SolveOptions};

fn var(i: u32, s: Sort) -> TermRef {
    Rc::new(Term::Var(VarId(i), s))
}

fn int(v: i64) -> TermRef {
    Rc::new(Term::Int(v))
}

fn cmp(op: CmpOp, a: TermRef, b: TermRef) -> TermRef {
    Rc::new(Term::Cmp(op, a, b))
}

fn opts() -> SolveOptions {
    SolveOptions::default()
}

#[test]
fn enumeration_examples() {
    let mut cs = ConstraintSet::new(vec![Sort::Bool, Sort::Bool]);
    cs.assert("xor", Rc::new(Term::Xor(var(0, Sort::Bool), var(1, Sort::Bool))));
    let all = enumerate_models(&mut FdBackend, &cs, 10, 1, &opts()).unwrap();
    assert_eq!(all.models.len(), 2);
    assert!(!all.truncated);
    let one = enumerate_models(&mut FdBackend, &cs, 1, 1, &opts()).unwrap();
    assert_eq!(one.models.len(), 1);
    assert!(one.truncated);

    let mut unsat = ConstraintSet::new(vec![Sort::Bool]);
    unsat.assert("a", var(0, Sort::Bool));
    unsat.assert("b", Rc::new(Term::Not(var(0, Sort::Bool))));
    let none = enumerate_models(&mut FdBackend, &unsat, 10, 1, &opts()).unwrap();
    assert!(none.models.is_empty());
    assert!(!none.truncated);
}

#[test]
fn optimization_examples() {
    let x = var(0, Sort::Int);
    let mut cs = ConstraintSet::new(vec![Sort::Int]);
    cs.assert("lo", cmp(CmpOp::Ge, x.clone(), int(3)));
    let min = optimize_objective(&mut FdBackend, &cs, Direction::Minimize, &x, 1, &opts()).unwrap();
    assert_eq!(min.value, 3);
    let e = optimize_objective(&mut FdBackend, &cs, Direction::Maximize, &x, 1, &opts()).unwrap_err();
    assert_eq!(e.class(), "Unbounded");

    let mut cs = ConstraintSet::new(vec![Sort::Int]);
    cs.assert("a", cmp(CmpOp::Le, x.clone(), int(3)));
    cs.assert("b", cmp(CmpOp::Le, x.clone(), int(5)));
    cs.assert("c", cmp(CmpOp::Ge, x.clone(), int(-10)));
    let max = optimize_objective(&mut FdBackend, &cs, Direction::Maximize, &x, 1, &opts()).unwrap();
    assert_eq!(max.value, 3);

    let mut bad = ConstraintSet::new(vec![Sort::Int]);
    bad.assert("a", cmp(CmpOp::Ge, x.clone(), int(5)));
    bad.assert("b", cmp(CmpOp::Le, x.clone(), int(4)));
    let e = optimize_objective(&mut FdBackend, &bad, Direction::Minimize, &x, 1, &opts()).unwrap_err();
    assert_eq!(e.class(), "Infeasible");
}

/// A random boolean formula over `n` variables.
fn bool_formula(n: u32) -> impl Strategy<Value = TermRef> {
    let leaf = (0..n, any::<bool>()).prop_map(|(i, neg)| {
        let v = var(i, Sort::Bool);
        if neg {
            Rc::new(Term::Not(v))
        } else {
            v
        }
    });
    leaf.prop_recursive(3, 16, 4, |inner| {
        prop_oneof![
            prop::collection::vec(inner.clone(), 1..4).prop_map(|xs| Rc::new(Term::Or(xs))),
            prop::collection::vec(inner.clone(), 1..4).prop_map(|xs| Rc::new(Term::And(xs))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Rc::new(Term::Implies(a, b))),
            (inner.clone(), inner).prop_map(|(a, b)| Rc::new(Term::Xor(a, b))),
        ]
    })
}

fn brute(cs: &ConstraintSet, domains: &[(i64, i64)]) -> BTreeSet<Vec<i64>> {
    let mut out = BTreeSet::new();
    let mut cur: Vec<i64> = domains.iter().map(|d| d.0).collect();
    loop {
        if cs.satisfied_by(&cur) {
            out.insert(cur.clone());
        }
        let mut i = 0;
        loop {
            if i == cur.len() {
                return out;
            }
            if cur[i] < domains[i].1 {
                cur[i] += 1;
                break;
            }
            cur[i] = domains[i].0;
            i += 1;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn boolean_enumeration_matches_truth_table(n in 1u32..9, fs in prop::collection::vec(bool_formula(8), 1..5)) {
        let mut cs = ConstraintSet::new(vec![Sort::Bool; 8]);
        for (i, f) in fs.into_iter().enumerate() {
            cs.assert(format!("c{i}"), f);
        }
        // pin unused variables so the model set stays comparable
        for i in n..8 {
            cs.assert(format!("pin{i}"), Rc::new(Term::Not(var(i, Sort::Bool))));
        }
        let expected = brute(&cs, &[(0, 1); 8]);
        let got = enumerate_models(&mut FdBackend, &cs, 1000, 1, &opts()).unwrap();
        let got: BTreeSet<Vec<i64>> = got.models.iter().map(|m| m.values.clone()).collect();
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn integer_enumeration_matches_brute_force(
        a in -3i64..4, b in -3i64..4, k in -6i64..7, op in 0usize..6, distinct in any::<bool>()
    ) {
        let ops = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge];
        let (x, y, z) = (var(0, Sort::Int), var(1, Sort::Int), var(2, Sort::Int));
        let mut cs = ConstraintSet::new(vec![Sort::Int; 3]);
        for v in [&x, &y, &z] {
            cs.assert("lo", cmp(CmpOp::Ge, v.clone(), int(-4)));
            cs.assert("hi", cmp(CmpOp::Le, v.clone(), int(5)));
        }
        let lin = Rc::new(Term::Add(vec![
            Rc::new(Term::Mul(vec![int(a), x.clone()])),
            Rc::new(Term::Mul(vec![int(b), y.clone()])),
            z.clone(),
        ]));
        cs.assert("lin", cmp(ops[op], lin, int(k)));
        if distinct {
            cs.assert("d", Rc::new(Term::Distinct(vec![x, y, z])));
        }
        let expected = brute(&cs, &[(-4, 5); 3]);
        let got = enumerate_models(&mut FdBackend, &cs, 2000, 1, &opts()).unwrap();
        let models: BTreeSet<Vec<i64>> = got.models.iter().map(|m| m.values.clone()).collect();
        prop_assert_eq!(models.len(), got.models.len(), "models are pairwise distinct");
        prop_assert_eq!(models, expected);
    }
}

#[test]
fn small_linear_maximization() {
    let (x, y) = (var(0, Sort::Int), var(1, Sort::Int));
    let mut cs = ConstraintSet::new(vec![Sort::Int; 2]);
    for v in [&x, &y] {
        cs.assert("lo", cmp(CmpOp::Ge, v.clone(), int(0)));
        cs.assert("hi", cmp(CmpOp::Le, v.clone(), int(9)));
    }
    cs.assert("sum", cmp(CmpOp::Le, Rc::new(Term::Add(vec![x.clone(), y.clone()])), int(9)));
    let obj = Rc::new(Term::Add(vec![Rc::new(Term::Mul(vec![int(2), x])), y]));
    let best = optimize_objective(&mut FdBackend, &cs, Direction::Maximize, &obj, 1, &opts()).unwrap();
    assert_eq!(best.value, 18);
}
