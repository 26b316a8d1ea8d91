//! The rewrite-rule catalog.
//!
//! Bidirectional rules are registered as two one-directional entries, the
//! reverse carrying a `<-` suffix. Rules that move subterms across binder
//! boundaries re-insert a shifted copy of the moved class's smallest
//! representative; their side conditions are re-checked against that
//! representative at application time. Entries marked `invented` are not
//! part of the published selection; each carries its own soundness test.

use std::collections::HashMap;

use crate::expr::{CmpOp, Expr, KeyAttr, StorageAttr, UnaryOp};

use super::egraph::{ClassId, EGraph, ENode, Op};
use super::pattern::*;

/// Dictionary depth of globals, for shape-sensitive side conditions.
pub type ShapeCtx = HashMap<String, usize>;

#[derive(Debug, Clone)]
pub enum Guard {
    /// the smallest representative must not use the given free indices
    ReprExcludes(u8, &'static [u32]),
    /// the representative is strict (zero-preserving) in the given index
    ReprStrict(u8, u32),
    /// the representative is additive in the given index
    ReprLinear(u8, u32),
    ReprIsDict(u8),
    ReprIsScalar(u8),
    /// the representative is a bare global or variable reference; used to
    /// keep expansive rules from regenerating structure forever
    ReprIsAtom(u8),
}

pub type ApplyFn = fn(&mut EGraph, &Subst) -> Option<(ClassId, bool)>;

#[derive(Clone)]
pub enum Applier {
    Template(Pat),
    Fn(ApplyFn),
}

#[derive(Clone)]
pub struct Rule {
    pub name: &'static str,
    pub invented: bool,
    /// participates in the storage-independent stage
    pub stage1: bool,
    pub searcher: Pat,
    pub guards: Vec<Guard>,
    pub applier: Applier,
}

impl std::fmt::Debug for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Rule({})", self.name)
    }
}

impl Rule {
    pub fn check_guards(&self, eg: &EGraph, subst: &Subst, shapes: &ShapeCtx) -> bool {
        self.guards.iter().all(|g| {
            let repr_of = |v: u8| eg.repr(subst[v as usize].expect("guard on unbound pvar"));
            match g {
                Guard::ReprExcludes(v, banned) => {
                    let fv = repr_of(*v).free_vars();
                    banned.iter().all(|b| !fv.contains(b))
                }
                Guard::ReprStrict(v, idx) => repr_of(*v).is_strict_in(*idx),
                Guard::ReprLinear(v, idx) => repr_of(*v).is_linear_in(*idx),
                Guard::ReprIsDict(v) => dict_depth(&repr_of(*v), shapes).map_or(false, |d| d > 0),
                Guard::ReprIsScalar(v) => dict_depth(&repr_of(*v), shapes) == Some(0),
                Guard::ReprIsAtom(v) => matches!(&*repr_of(*v), Expr::Global(_) | Expr::Var(_)),
            }
        })
    }

    pub fn apply(&self, eg: &mut EGraph, subst: &Subst) -> Option<(ClassId, bool)> {
        match &self.applier {
            Applier::Template(p) => Some(p.instantiate(eg, subst)),
            Applier::Fn(f) => f(eg, subst),
        }
    }
}

/// Dictionary nesting depth of a term, where the depth of globals comes
/// from the catalog. `None` when the head does not determine it.
pub fn dict_depth(e: &Expr, shapes: &ShapeCtx) -> Option<usize> {
    match e {
        Expr::IntLit(_) | Expr::RealLit(_) | Expr::BoolLit(_) | Expr::Cmp(..) => Some(0),
        Expr::Div(..) | Expr::Mod(..) | Expr::Unary(..) => Some(0),
        Expr::Var(_) => None,
        Expr::Global(n) => shapes.get(n).copied(),
        Expr::DictSing(_, _, _, v) => Some(1 + dict_depth(v, shapes)?),
        Expr::Range(..) => Some(1),
        Expr::SubArray(d, ..) => dict_depth(d, shapes),
        Expr::Lookup(d, _) => dict_depth(d, shapes).map(|n| n.saturating_sub(1)),
        Expr::IfThen(_, b) | Expr::Let(_, b) | Expr::Sum(_, b) => dict_depth(b, shapes),
        Expr::Merge(_, _, b) => dict_depth(b, shapes),
        Expr::Add(a, b) | Expr::Sub(a, b) => dict_depth(a, shapes).or_else(|| dict_depth(b, shapes)),
        Expr::Mul(a, b) => match (dict_depth(a, shapes), dict_depth(b, shapes)) {
            (Some(x), Some(y)) => Some(x.max(y)),
            (Some(x), None) if x > 0 => Some(x),
            (None, Some(y)) if y > 0 => Some(y),
            _ => None,
        },
    }
}

/// Re-insert the class's representative shifted by `delta` at `cutoff`.
/// Returns `None` when a negative shift would drop a bound variable.
fn shifted(eg: &mut EGraph, class: ClassId, delta: i64, cutoff: u32) -> Option<ClassId> {
    let repr = eg.repr(class);
    if delta < 0 {
        let low = cutoff;
        let high = cutoff + (-delta) as u32;
        if repr.free_vars().iter().any(|v| *v >= low && *v < high) {
            return None;
        }
    }
    if delta == 0 {
        return Some(class);
    }
    Some(eg.add_expr(&repr.shift(delta, cutoff)))
}

fn renumbered(eg: &mut EGraph, class: ClassId, map: &dyn Fn(u32) -> u32) -> ClassId {
    let repr = eg.repr(class);
    eg.add_expr(&repr.rename_free(&|i| map(i)))
}

fn node(eg: &mut EGraph, op: Op, children: Vec<ClassId>) -> (ClassId, bool) {
    eg.add(ENode { op, children })
}

fn s(v: &Subst, i: u8) -> ClassId {
    v[i as usize].expect("unbound pattern variable")
}

// Appliers for the binder-crossing rules. Substitution layout per rule is
// documented next to its registration.

fn apply_d2(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // sum(<k,v> in e1) e2 * e3 -> e2' * (sum(<k,v> in e1) e3)
    let e2 = shifted(eg, s(sub, 1), -2, 0)?;
    let (inner, c1) = node(eg, Op::Sum, vec![s(sub, 0), s(sub, 2)]);
    let (out, c2) = node(eg, Op::Mul, vec![e2, inner]);
    Some((out, c1 || c2))
}

fn apply_d2_rev(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // e2 * (sum(<k,v> in e1) e3) -> sum(<k,v> in e1) e2' * e3
    let e2 = shifted(eg, s(sub, 0), 2, 0)?;
    let (prod, c1) = node(eg, Op::Mul, vec![e2, s(sub, 2)]);
    let (out, c2) = node(eg, Op::Sum, vec![s(sub, 1), prod]);
    Some((out, c1 || c2))
}

fn apply_d3(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // sum(<k,v> in e1) e2 * e3 -> (sum(<k,v> in e1) e2) * e3'
    let e3 = shifted(eg, s(sub, 2), -2, 0)?;
    let (inner, c1) = node(eg, Op::Sum, vec![s(sub, 0), s(sub, 1)]);
    let (out, c2) = node(eg, Op::Mul, vec![inner, e3]);
    Some((out, c1 || c2))
}

fn apply_d3_rev(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // (sum(<k,v> in e1) e2) * e3 -> sum(<k,v> in e1) e2 * e3'
    let e3 = shifted(eg, s(sub, 2), 2, 0)?;
    let (prod, c1) = node(eg, Op::Mul, vec![s(sub, 1), e3]);
    let (out, c2) = node(eg, Op::Sum, vec![s(sub, 0), prod]);
    Some((out, c1 || c2))
}

fn apply_d4(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // sum(<k,v> in e1) { e2 -> e3 } -> { e2' -> sum(<k,v> in e1) e3 }
    let e2 = shifted(eg, s(sub, 1), -2, 0)?;
    let (inner, c1) = node(eg, Op::Sum, vec![s(sub, 0), s(sub, 2)]);
    let (out, c2) = node(eg, Op::DictSing(KeyAttr::None, StorageAttr::Logical), vec![e2, inner]);
    Some((out, c1 || c2))
}

fn apply_d4_rev(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // { e2 -> sum(<k,v> in e1) e3 } -> sum(<k,v> in e1) { e2' -> e3 }
    let e2 = shifted(eg, s(sub, 0), 2, 0)?;
    let (d, c1) = node(eg, Op::DictSing(KeyAttr::None, StorageAttr::Logical), vec![e2, s(sub, 2)]);
    let (out, c2) = node(eg, Op::Sum, vec![s(sub, 1), d]);
    Some((out, c1 || c2))
}

fn apply_f1(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // sum(<k,v> in e1) if (k == e2) then e3
    //   -> let k = e2' in let v = e1'(k) in e3
    let e2 = shifted(eg, s(sub, 1), -2, 0)?;
    let e1 = shifted(eg, s(sub, 0), 1, 0)?;
    let (k, _) = node(eg, Op::Var(0), vec![]);
    let (looked, c1) = node(eg, Op::Lookup, vec![e1, k]);
    let (inner, c2) = node(eg, Op::Let, vec![looked, s(sub, 2)]);
    let (out, c3) = node(eg, Op::Let, vec![e2, inner]);
    Some((out, c1 || c2 || c3))
}

fn apply_f2(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // sum(<k1,v1> in (sum(<k2,v2> in e1) {k2 -> e2})) e3
    //   -> sum(<k2,v2> in e1) let k1 = k2 in let v1 = e2' in e3'
    let e2 = shifted(eg, s(sub, 1), 1, 0)?;
    let e3 = shifted(eg, s(sub, 2), 2, 2)?;
    let (k2, _) = node(eg, Op::Var(1), vec![]);
    let (inner, c1) = node(eg, Op::Let, vec![e2, e3]);
    let (outer_let, c2) = node(eg, Op::Let, vec![k2, inner]);
    let (out, c3) = node(eg, Op::Sum, vec![s(sub, 0), outer_let]);
    Some((out, c1 || c2 || c3))
}

fn apply_f3(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // sum(<k1,v1> in (sum(<k2,v2> in e1) {@unique e2 -> e3})) e4
    //   -> sum(<k2,v2> in e1) let k1 = e2 in let v1 = e3' in e4'
    let e3 = shifted(eg, s(sub, 2), 1, 0)?;
    let e4 = shifted(eg, s(sub, 3), 2, 2)?;
    let (inner, c1) = node(eg, Op::Let, vec![e3, e4]);
    let (outer_let, c2) = node(eg, Op::Let, vec![s(sub, 1), inner]);
    let (out, c3) = node(eg, Op::Sum, vec![s(sub, 0), outer_let]);
    Some((out, c1 || c2 || c3))
}

fn apply_f4(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // sum(<k1,v1> in e1) sum(<k2,v2> in e2) if (v1 == v2) then e3
    //   -> merge(<k1,k2,v1> in <e1,e2'>) let v2 = v1 in e3''
    // index map: [k1=3,v1=2,k2=1,v2=0] -> [k1=3,k2=2,v1=1,v2=0]
    let e2 = shifted(eg, s(sub, 1), -2, 0)?;
    let body = renumbered(eg, s(sub, 2), &|i| match i {
        0 => 0,
        1 => 2,
        2 => 1,
        n => n,
    });
    let (v1, _) = node(eg, Op::Var(0), vec![]);
    let (let_v2, c1) = node(eg, Op::Let, vec![v1, body]);
    let (out, c2) = node(eg, Op::Merge, vec![s(sub, 0), e2, let_v2]);
    Some((out, c1 || c2))
}

fn apply_f4_rev(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // merge(<k1,k2,v> in <e1,e2>) e3
    //   -> sum(<k1,v> in e1) sum(<k2,u> in e2) if (v == u) then e3'
    // index map: [k1=2,k2=1,v=0] -> [k1=3,v=2,k2=1,u=0]
    let e2 = shifted(eg, s(sub, 1), 2, 0)?;
    let body = renumbered(eg, s(sub, 2), &|i| match i {
        0 => 2,
        1 => 1,
        2 => 3,
        n => n + 1,
    });
    let (v_outer, _) = node(eg, Op::Var(2), vec![]);
    let (v_inner, _) = node(eg, Op::Var(0), vec![]);
    let (guard, _) = node(eg, Op::Cmp(CmpOp::Eq), vec![v_outer, v_inner]);
    let (iff, c1) = node(eg, Op::IfThen, vec![guard, body]);
    let (inner, c2) = node(eg, Op::Sum, vec![e2, iff]);
    let (out, c3) = node(eg, Op::Sum, vec![s(sub, 0), inner]);
    Some((out, c1 || c2 || c3))
}

fn apply_t5(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // sum(<k,v> in e1:e2) e3 -> sum(<k,_> in e1:e2) let v = k in e3'
    let e3 = shifted(eg, s(sub, 2), 1, 1)?;
    let (range, c0) = node(eg, Op::Range, vec![s(sub, 0), s(sub, 1)]);
    let (k, _) = node(eg, Op::Var(1), vec![]);
    let (let_v, c1) = node(eg, Op::Let, vec![k, e3]);
    let (out, c2) = node(eg, Op::Sum, vec![range, let_v]);
    Some((out, c0 || c1 || c2))
}

fn apply_t5_rev(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // sum(<k,_> in e1:e2) let v = k in e3 -> sum(<k,v> in e1:e2) e3'
    // e3 sits under [k=2,_=1,v=0]; the `_` must be unused; map 0->0, 2->1, n>=3 -> n-1
    let repr = eg.repr(s(sub, 2));
    if repr.uses_var(1) {
        return None;
    }
    let body = renumbered(eg, s(sub, 2), &|i| match i {
        0 => 0,
        1 => 1, // unused, kept stable
        n => n - 1,
    });
    let (range, c0) = node(eg, Op::Range, vec![s(sub, 0), s(sub, 1)]);
    let (out, c1) = node(eg, Op::Sum, vec![range, body]);
    Some((out, c0 || c1))
}

fn apply_let_inline(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // let x = e1 in e2 -> e2[e1/x], by concrete substitution on the
    // smallest representatives
    let bound = eg.repr(s(sub, 0));
    let body = eg.repr(s(sub, 1));
    if body.node_count() > 20_000 {
        return None;
    }
    let result = body.subst_top(&bound);
    Some((eg.add_expr(&result), true))
}

fn apply_sum_swap(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // sum(<k1,v1> in e1) sum(<k2,v2> in e2) e3
    //   -> sum(<k2,v2> in e2') sum(<k1,v1> in e1') e3''
    let e2 = shifted(eg, s(sub, 1), -2, 0)?;
    let e1 = shifted(eg, s(sub, 0), 2, 0)?;
    let body = renumbered(eg, s(sub, 2), &|i| match i {
        0 => 2,
        1 => 3,
        2 => 0,
        3 => 1,
        n => n,
    });
    let (inner, c1) = node(eg, Op::Sum, vec![e1, body]);
    let (out, c2) = node(eg, Op::Sum, vec![e2, inner]);
    Some((out, c1 || c2))
}

fn apply_if_hoist_sum(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // sum(<k,v> in e1) if (c) then e3 -> if (c') then sum(<k,v> in e1) e3
    let c = shifted(eg, s(sub, 1), -2, 0)?;
    let (inner, c1) = node(eg, Op::Sum, vec![s(sub, 0), s(sub, 2)]);
    let (out, c2) = node(eg, Op::IfThen, vec![c, inner]);
    Some((out, c1 || c2))
}

fn apply_if_hoist_sum_rev(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // if (c) then sum(<k,v> in e1) e3 -> sum(<k,v> in e1) if (c') then e3
    let c = shifted(eg, s(sub, 0), 2, 0)?;
    let (iff, c1) = node(eg, Op::IfThen, vec![c, s(sub, 2)]);
    let (out, c2) = node(eg, Op::Sum, vec![s(sub, 1), iff]);
    Some((out, c1 || c2))
}

fn apply_sum_lookup(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // (sum(<k,v> in e1) e2)(e3) -> sum(<k,v> in e1) (e2(e3'))
    let key = shifted(eg, s(sub, 2), 2, 0)?;
    let (looked, c1) = node(eg, Op::Lookup, vec![s(sub, 1), key]);
    let (out, c2) = node(eg, Op::Sum, vec![s(sub, 0), looked]);
    Some((out, c1 || c2))
}

fn apply_mater(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // sum(<k,v> in e1) { e2 -> e3 * e4 }
    //   -> let t = e4' in sum(<k,v> in e1') { e2' -> e3' * t }
    let t = shifted(eg, s(sub, 3), -2, 0)?;
    let e1 = shifted(eg, s(sub, 0), 1, 0)?;
    let key = shifted(eg, s(sub, 1), 1, 2)?;
    let fact = shifted(eg, s(sub, 2), 1, 2)?;
    let (tvar, _) = node(eg, Op::Var(2), vec![]);
    let (prod, c1) = node(eg, Op::Mul, vec![fact, tvar]);
    let (d, c2) = node(eg, Op::DictSing(KeyAttr::None, StorageAttr::Logical), vec![key, prod]);
    let (inner, c3) = node(eg, Op::Sum, vec![e1, d]);
    let (out, c4) = node(eg, Op::Let, vec![t, inner]);
    Some((out, c1 || c2 || c3 || c4))
}

fn apply_bcast(eg: &mut EGraph, sub: &Subst) -> Option<(ClassId, bool)> {
    // a * b with scalar a, dictionary b -> sum(<i,vb> in b) { i -> a' * vb }
    let a = shifted(eg, s(sub, 0), 2, 0)?;
    let (i, _) = node(eg, Op::Var(1), vec![]);
    let (vb, _) = node(eg, Op::Var(0), vec![]);
    let (prod, c1) = node(eg, Op::Mul, vec![a, vb]);
    let (d, c2) = node(eg, Op::DictSing(KeyAttr::None, StorageAttr::Logical), vec![i, prod]);
    let (out, c3) = node(eg, Op::Sum, vec![s(sub, 1), d]);
    Some((out, c1 || c2 || c3))
}

fn rule(
    name: &'static str,
    invented: bool,
    stage1: bool,
    searcher: Pat,
    guards: Vec<Guard>,
    applier: Applier,
) -> Rule {
    Rule { name, invented, stage1, searcher, guards, applier }
}

/// The full catalog, in deterministic application order.
pub fn rule_catalog() -> Vec<Rule> {
    use Applier::{Fn, Template};
    let mut rules = Vec::new();
    let bidi = |name: &'static str,
                    rev_name: &'static str,
                    invented: bool,
                    stage1: bool,
                    lhs: Pat,
                    rhs: Pat,
                    rules: &mut Vec<Rule>| {
        rules.push(rule(name, invented, stage1, lhs.clone(), vec![], Template(rhs.clone())));
        rules.push(rule(rev_name, invented, stage1, rhs, vec![], Template(lhs)));
    };

    // associativity / commutativity
    bidi("A1", "A1<-", false, true, pmul(pv(0), pmul(pv(1), pv(2))), pmul(pmul(pv(0), pv(1)), pv(2)), &mut rules);
    // the factor moved across a dictionary constructor must be a scalar:
    // multiplying the singleton by it is then a broadcast
    rules.push(rule(
        "A2",
        false,
        true,
        pdict(pv(0), pmul(pv(1), pv(2))),
        vec![Guard::ReprIsScalar(2)],
        Template(pmul(pdict(pv(0), pv(1)), pv(2))),
    ));
    rules.push(rule(
        "A2<-",
        false,
        true,
        pmul(pdict(pv(0), pv(1)), pv(2)),
        vec![Guard::ReprIsScalar(2)],
        Template(pdict(pv(0), pmul(pv(1), pv(2)))),
    ));
    rules.push(rule(
        "A3",
        false,
        true,
        pdict(pv(0), pmul(pv(1), pv(2))),
        vec![Guard::ReprIsScalar(1)],
        Template(pmul(pv(1), pdict(pv(0), pv(2)))),
    ));
    rules.push(rule(
        "A3<-",
        false,
        true,
        pmul(pv(1), pdict(pv(0), pv(2))),
        vec![Guard::ReprIsScalar(1)],
        Template(pdict(pv(0), pmul(pv(1), pv(2)))),
    ));
    bidi("A4", "A4<-", false, true, pif(pv(0), pmul(pv(1), pv(2))), pmul(pv(1), pif(pv(0), pv(2))), &mut rules);
    rules.push(rule("C1", false, true, padd(pv(0), pv(1)), vec![], Template(padd(pv(1), pv(0)))));
    rules.push(rule("C2", false, true, peq(pv(0), pv(1)), vec![], Template(peq(pv(1), pv(0)))));
    rules.push(rule("C3", true, true, pmul(pv(0), pv(1)), vec![], Template(pmul(pv(1), pv(0)))));

    // algebraic simplifications (one-directional)
    rules.push(rule("L1", false, true, padd(pv(0), pzero()), vec![], Template(pv(0))));
    rules.push(rule("L2", false, true, pmul(pv(0), pzero()), vec![], Template(pint(0))));
    rules.push(rule("L3", false, true, pmul(pv(0), pone()), vec![], Template(pv(0))));
    rules.push(rule("L4", false, true, pn(Op::Unary(UnaryOp::Neg), vec![pzero()]), vec![], Template(pint(0))));
    rules.push(rule("L5", false, true, psub(pv(0), pzero()), vec![], Template(pv(0))));
    rules.push(rule("L6", false, true, psub(pv(0), pv(0)), vec![], Template(pint(0))));

    // distributivity / factorization
    bidi(
        "D1",
        "D1<-",
        false,
        true,
        padd(pmul(pv(0), pv(1)), pmul(pv(0), pv(2))),
        pmul(pv(0), padd(pv(1), pv(2))),
        &mut rules,
    );
    rules.push(rule(
        "D2",
        false,
        true,
        psum(pv(0), pmul(pv(1), pv(2))),
        vec![Guard::ReprExcludes(1, &[0, 1])],
        Fn(apply_d2),
    ));
    rules.push(rule("D2<-", false, true, pmul(pv(0), psum(pv(1), pv(2))), vec![], Fn(apply_d2_rev)));
    rules.push(rule(
        "D3",
        false,
        true,
        psum(pv(0), pmul(pv(1), pv(2))),
        vec![Guard::ReprExcludes(2, &[0, 1])],
        Fn(apply_d3),
    ));
    rules.push(rule("D3<-", false, true, pmul(psum(pv(0), pv(1)), pv(2)), vec![], Fn(apply_d3_rev)));
    rules.push(rule(
        "D4",
        false,
        true,
        psum(pv(0), pdict(pv(1), pv(2))),
        vec![Guard::ReprExcludes(1, &[0, 1])],
        Fn(apply_d4),
    ));
    rules.push(rule("D4<-", false, true, pdict(pv(0), psum(pv(1), pv(2))), vec![], Fn(apply_d4_rev)));

    // fusion
    rules.push(rule(
        "F1",
        false,
        true,
        psum(pv(0), pif(peq(pvar_idx(1), pv(1)), pv(2))),
        vec![Guard::ReprExcludes(1, &[0, 1]), Guard::ReprStrict(2, 0)],
        Fn(apply_f1),
    ));
    rules.push(rule(
        "F2",
        false,
        true,
        psum(psum(pv(0), pdict(pvar_idx(1), pv(1))), pv(2)),
        vec![Guard::ReprStrict(2, 0)],
        Fn(apply_f2),
    ));
    rules.push(rule(
        "F3",
        false,
        false,
        psum(psum(pv(0), pdict_uniq(pv(1), pv(2))), pv(3)),
        vec![Guard::ReprStrict(3, 0)],
        Fn(apply_f3),
    ));
    rules.push(rule(
        "F4",
        false,
        false,
        psum(pv(0), psum(pv(1), pif(peq(pvar_idx(2), pvar_idx(0)), pv(2)))),
        vec![Guard::ReprExcludes(1, &[0, 1])],
        Fn(apply_f4),
    ));
    rules.push(rule(
        "F4<-",
        false,
        false,
        pn(Op::Merge, vec![pv(0), pv(1), pv(2)]),
        vec![],
        Fn(apply_f4_rev),
    ));

    // dictionary rules
    rules.push(rule("T1", false, true, psum(pv(0), pdict(pvar_idx(1), pvar_idx(0))), vec![], Template(pv(0))));
    // the expansion direction is useful only for rewriting a bare
    // collection reference into an iteration a consumer can fuse with;
    // unrestricted it regenerates structure forever
    rules.push(rule(
        "T1<-",
        false,
        true,
        pv(0),
        vec![Guard::ReprIsDict(0), Guard::ReprIsAtom(0)],
        Template(psum(pv(0), pdict(pvar_idx(1), pvar_idx(0)))),
    ));
    bidi(
        "T2",
        "T2<-",
        false,
        true,
        padd(plookup(pv(0), pv(2)), plookup(pv(1), pv(2))),
        plookup(padd(pv(0), pv(1)), pv(2)),
        &mut rules,
    );
    bidi(
        "T3",
        "T3<-",
        false,
        true,
        padd(pdict(pv(0), pv(1)), pdict(pv(0), pv(2))),
        pdict(pv(0), padd(pv(1), pv(2))),
        &mut rules,
    );
    // T4/T5 in the form consistent with the range semantics `i1:i2 =
    // { i1 -> i1, ... }`; see `paper_literal` below for the printed form.
    bidi(
        "T4",
        "T4<-",
        false,
        true,
        plookup(pn(Op::Range, vec![pv(0), pv(1)]), pv(2)),
        pif(
            pn(
                Op::Cmp(CmpOp::And),
                vec![pn(Op::Cmp(CmpOp::Ge), vec![pv(2), pv(0)]), pn(Op::Cmp(CmpOp::Lt), vec![pv(2), pv(1)])],
            ),
            pv(2),
        ),
        &mut rules,
    );
    rules.push(rule("T5", false, true, psum(pn(Op::Range, vec![pv(0), pv(1)]), pv(2)), vec![], Fn(apply_t5)));
    rules.push(rule(
        "T5<-",
        false,
        true,
        psum(pn(Op::Range, vec![pv(0), pv(1)]), plet(pvar_idx(1), pv(2))),
        vec![],
        Fn(apply_t5_rev),
    ));

    // let inlining
    rules.push(rule("LET-INLINE", false, true, plet(pv(0), pv(1)), vec![], Fn(apply_let_inline)));

    // loop reordering and guard motion
    rules.push(rule(
        "SUM-SWAP",
        true,
        true,
        psum(pv(0), psum(pv(1), pv(2))),
        vec![Guard::ReprExcludes(1, &[0, 1])],
        Fn(apply_sum_swap),
    ));
    rules.push(rule(
        "IF-HOIST-SUM",
        true,
        true,
        psum(pv(0), pif(pv(1), pv(2))),
        vec![Guard::ReprExcludes(1, &[0, 1])],
        Fn(apply_if_hoist_sum),
    ));
    rules.push(rule("IF-HOIST-SUM<-", true, true, pif(pv(0), psum(pv(1), pv(2))), vec![], Fn(apply_if_hoist_sum_rev)));
    rules.push(rule(
        "IF-SWAP",
        true,
        true,
        pif(pv(0), pif(pv(1), pv(2))),
        vec![],
        Template(pif(pv(1), pif(pv(0), pv(2)))),
    ));
    bidi(
        "IF-HOIST-DICT",
        "IF-HOIST-DICT<-",
        true,
        true,
        pdict(pv(0), pif(pv(1), pv(2))),
        pif(pv(1), pdict(pv(0), pv(2))),
        &mut rules,
    );
    rules.push(rule(
        "SUM-ADD",
        true,
        true,
        psum(padd(pv(0), pv(1)), pv(2)),
        vec![Guard::ReprLinear(2, 0)],
        Template(padd(psum(pv(0), pv(2)), psum(pv(1), pv(2)))),
    ));

    // lookup pushing
    rules.push(rule(
        "SUM-LOOKUP",
        true,
        false,
        plookup(psum(pv(0), pv(1)), pv(2)),
        vec![Guard::ReprIsDict(1)],
        Fn(apply_sum_lookup),
    ));
    rules.push(rule(
        "SING-LOOKUP",
        true,
        false,
        plookup(pdict(pv(0), pv(1)), pv(2)),
        vec![],
        Template(pif(peq(pv(2), pv(0)), pv(1))),
    ));

    // loop-invariant materialization
    rules.push(rule(
        "MATER",
        true,
        true,
        psum(pv(0), pdict(pv(1), pmul(pv(2), pv(3)))),
        vec![Guard::ReprExcludes(3, &[0, 1])],
        Fn(apply_mater),
    ));

    // normalization
    rules.push(rule(
        "SUB-NEG",
        true,
        true,
        psub(pv(0), pv(1)),
        vec![],
        Template(padd(pv(0), pn(Op::Unary(UnaryOp::Neg), vec![pv(1)]))),
    ));

    // physical annotation and @unique erasure
    rules.push(rule("UNIQ-DROP", true, false, pdict_uniq(pv(0), pv(1)), vec![], Template(pdict(pv(0), pv(1)))));
    rules.push(rule(
        "ANN-DENSE",
        false,
        false,
        pdict(pv(0), pv(1)),
        vec![],
        Template(pn(Op::DictSing(KeyAttr::None, StorageAttr::Dense), vec![pv(0), pv(1)])),
    ));
    rules.push(rule(
        "ANN-HASH",
        false,
        false,
        pdict(pv(0), pv(1)),
        vec![],
        Template(pn(Op::DictSing(KeyAttr::None, StorageAttr::Hash), vec![pv(0), pv(1)])),
    ));
    // scalar-by-dictionary products become explicit loops
    rules.push(rule(
        "BCAST",
        true,
        false,
        pmul(pv(0), pv(1)),
        vec![Guard::ReprIsScalar(0), Guard::ReprIsDict(1)],
        Fn(apply_bcast),
    ));

    rules
}

/// Rules for the storage-independent first stage.
pub fn stage1_rules() -> Vec<Rule> {
    rule_catalog().into_iter().filter(|r| r.stage1).collect()
}

fn pzero() -> Pat {
    Pat::AnyZero
}

fn pone() -> Pat {
    Pat::AnyOne
}

/// The printed forms of T4/T5 treat `e1:e2` as if it were keyed from zero
/// with values offset by the lower bound; that conflicts with the range
/// definition `i1:i2 = { i1 -> i1, ... }` that the evaluator implements.
/// They are kept here for reference and excluded from the catalog; the
/// test alongside demonstrates the conflict.
pub mod paper_literal {
    use super::*;

    pub fn t4_literal() -> (Pat, Pat) {
        (
            plookup(pn(Op::Range, vec![pv(0), pv(1)]), pv(2)),
            pif(
                pn(
                    Op::Cmp(CmpOp::And),
                    vec![pn(Op::Cmp(CmpOp::Ge), vec![pv(2), pv(0)]), pn(Op::Cmp(CmpOp::Lt), vec![pv(2), pv(1)])],
                ),
                padd(pv(0), pv(2)),
            ),
        )
    }

    #[cfg(test)]
    mod tests {
        use crate::interp::eval;
        use crate::parser::parse_lower;
        use crate::storage::StorageCatalog;

        #[test]
        fn literal_t4_conflicts_with_range_semantics() {
            let catalog = StorageCatalog::new();
            let lhs = parse_lower("(2:5)(3)", None).unwrap();
            let rhs_literal = parse_lower("if (3 >= 2 && 3 < 5) then 2 + 3", None).unwrap();
            let rhs_adjusted = parse_lower("if (3 >= 2 && 3 < 5) then 3", None).unwrap();
            let lhs_v = eval(&catalog, &lhs).unwrap().0;
            assert!(!lhs_v.value_eq(&eval(&catalog, &rhs_literal).unwrap().0));
            assert!(lhs_v.value_eq(&eval(&catalog, &rhs_adjusted).unwrap().0));
        }
    }
}
