//! Every rewrite rule is exercised on randomized instantiations that
//! satisfy its side conditions; all terms reachable after one application
//! must evaluate to the value of the original term. Integer data compares
//! exactly; real data within 1e-9 relative.

use std::collections::BTreeMap;
use std::rc::Rc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use sdqlite_core::expr::{CmpOp, Expr, KeyAttr, StorageAttr};
#[allow(unused_imports)]
use sdqlite_core::expr::UnaryOp;
use sdqlite_core::interp::eval;
use sdqlite_core::optimizer::egraph::{expr_of, EGraph, Op};
use sdqlite_core::optimizer::pattern::{Pat, Subst, MAX_PVARS};
use sdqlite_core::optimizer::rules::{dict_depth, rule_catalog, Guard, Rule};
use sdqlite_core::optimizer::shape_ctx;
use sdqlite_core::storage::{Elem, PhysicalBuffer, StorageCatalog};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Role {
    Int,
    Real,
    Bool,
    Dict,
    Any,
    /// key of a `@unique` singleton: must be injective in the enclosing
    /// sum's key binder so the distinctness assertion genuinely holds
    UniqKey,
}

#[derive(Debug, Clone)]
struct Slot {
    var: u8,
    depth: u32,
    role: Role,
    /// in-scope binder types, outermost first; true = int-typed
    binders: Vec<Role>,
}

/// Walk the pattern collecting first-occurrence slots for pattern vars.
fn collect_slots(pat: &Pat, role: Role, binders: &mut Vec<Role>, out: &mut Vec<Slot>) {
    match pat {
        Pat::V(v) => {
            if !out.iter().any(|s| s.var == *v) {
                out.push(Slot { var: *v, depth: binders.len() as u32, role, binders: binders.clone() });
            }
        }
        Pat::AnyZero | Pat::AnyOne => {}
        Pat::N(op, kids) => match op {
            Op::Sum => {
                collect_slots(&kids[0], Role::Dict, binders, out);
                binders.push(Role::Int);
                binders.push(Role::Real);
                collect_slots(&kids[1], Role::Any, binders, out);
                binders.pop();
                binders.pop();
            }
            Op::Merge => {
                collect_slots(&kids[0], Role::Dict, binders, out);
                collect_slots(&kids[1], Role::Dict, binders, out);
                binders.push(Role::Int);
                binders.push(Role::Int);
                binders.push(Role::Real);
                collect_slots(&kids[2], Role::Any, binders, out);
                binders.pop();
                binders.pop();
                binders.pop();
            }
            Op::Let => {
                collect_slots(&kids[0], Role::Real, binders, out);
                binders.push(Role::Real);
                collect_slots(&kids[1], Role::Any, binders, out);
                binders.pop();
            }
            Op::Lookup => {
                collect_slots(&kids[0], Role::Dict, binders, out);
                collect_slots(&kids[1], Role::Int, binders, out);
            }
            Op::DictSing(attr, _) => {
                let key_role = if *attr == KeyAttr::Unique { Role::UniqKey } else { Role::Int };
                collect_slots(&kids[0], key_role, binders, out);
                collect_slots(&kids[1], Role::Any, binders, out);
            }
            Op::IfThen => {
                collect_slots(&kids[0], Role::Bool, binders, out);
                collect_slots(&kids[1], Role::Any, binders, out);
            }
            Op::Cmp(_) => {
                collect_slots(&kids[0], Role::Int, binders, out);
                collect_slots(&kids[1], Role::Int, binders, out);
            }
            Op::Range => {
                for k in kids {
                    collect_slots(k, Role::Int, binders, out);
                }
            }
            Op::Add | Op::Sub => {
                // propagate so additions in collection position stay dicts
                for k in kids {
                    collect_slots(k, role, binders, out);
                }
            }
            _ => {
                for k in kids {
                    collect_slots(k, Role::Any, binders, out);
                }
            }
        },
    }
}

struct Gen<'a> {
    rng: &'a mut StdRng,
    dict_globals: Vec<&'static str>,
}

impl<'a> Gen<'a> {
    fn pick_var(&mut self, binders: &[Role], want: Role, banned: &[u32]) -> Option<Expr> {
        let n = binders.len() as u32;
        let mut options = Vec::new();
        for (pos, ty) in binders.iter().enumerate() {
            let idx = n - 1 - pos as u32;
            if banned.contains(&idx) {
                continue;
            }
            let ok = matches!(
                (want, ty),
                (Role::Int, Role::Int) | (Role::Real, Role::Real) | (Role::Any, _)
            );
            if ok && *ty != Role::Dict && *ty != Role::Bool {
                options.push(idx);
            }
        }
        if options.is_empty() {
            None
        } else {
            Some(Expr::Var(options[self.rng.gen_range(0..options.len())]))
        }
    }

    fn gen(&mut self, role: Role, depth_budget: u32, binders: &[Role], banned: &[u32]) -> Expr {
        match role {
            Role::UniqKey => {
                // outside a sum a singleton's key is trivially unique
                if binders.len() < 2 || banned.contains(&1) {
                    return self.gen(Role::Int, depth_budget, binders, banned);
                }
                // injective in the key binder (index 1)
                let k = Expr::Var(1);
                match self.rng.gen_range(0..4) {
                    0 => k,
                    1 => Expr::Add(k.rc(), Expr::IntLit(self.rng.gen_range(1..4)).rc()),
                    2 => Expr::Mul(k.rc(), Expr::IntLit(2).rc()),
                    _ => Expr::Add(
                        Expr::Mul(k.rc(), Expr::IntLit(3).rc()).rc(),
                        Expr::IntLit(self.rng.gen_range(0..3)).rc(),
                    ),
                }
            }
            Role::Any => {
                let r = if self.rng.gen_bool(0.8) { Role::Real } else { Role::Dict };
                self.gen(r, depth_budget, binders, banned)
            }
            Role::Int => {
                if depth_budget == 0 || self.rng.gen_bool(0.4) {
                    if self.rng.gen_bool(0.4) {
                        if let Some(v) = self.pick_var(binders, Role::Int, banned) {
                            return v;
                        }
                    }
                    return Expr::IntLit(self.rng.gen_range(-2..5));
                }
                let a = self.gen(Role::Int, depth_budget - 1, binders, banned);
                let b = self.gen(Role::Int, depth_budget - 1, binders, banned);
                if self.rng.gen_bool(0.5) {
                    Expr::Add(a.rc(), b.rc())
                } else {
                    Expr::Mul(a.rc(), b.rc())
                }
            }
            Role::Real => {
                if depth_budget == 0 || self.rng.gen_bool(0.35) {
                    if self.rng.gen_bool(0.5) {
                        if let Some(v) = self.pick_var(binders, Role::Real, banned) {
                            return v;
                        }
                    }
                    let vals = [1.5, -2.0, 0.5, 3.0, -0.25, 2.0];
                    return Expr::real(vals[self.rng.gen_range(0..vals.len())]);
                }
                match self.rng.gen_range(0..5) {
                    0 => {
                        let d = self.gen(Role::Dict, 0, binders, banned);
                        let k = self.gen(Role::Int, depth_budget - 1, binders, banned);
                        Expr::Lookup(d.rc(), k.rc())
                    }
                    1 => Expr::Add(
                        self.gen(Role::Real, depth_budget - 1, binders, banned).rc(),
                        self.gen(Role::Real, depth_budget - 1, binders, banned).rc(),
                    ),
                    2 => Expr::Mul(
                        self.gen(Role::Real, depth_budget - 1, binders, banned).rc(),
                        self.gen(Role::Real, depth_budget - 1, binders, banned).rc(),
                    ),
                    3 => Expr::Unary(
                        sdqlite_core::expr::UnaryOp::Neg,
                        self.gen(Role::Real, depth_budget - 1, binders, banned).rc(),
                    ),
                    _ => {
                        // a small scalar sum over a dictionary
                        let d = self.gen(Role::Dict, 0, binders, banned);
                        let mut inner = binders.to_vec();
                        inner.push(Role::Int);
                        inner.push(Role::Real);
                        let banned2: Vec<u32> = banned.iter().map(|b| b + 2).collect();
                        let body = self.gen(Role::Real, depth_budget - 1, &inner, &banned2);
                        Expr::Sum(d.rc(), body.rc())
                    }
                }
            }
            Role::Bool => {
                let a = self.gen(Role::Int, depth_budget.min(1), binders, banned);
                let b = self.gen(Role::Int, depth_budget.min(1), binders, banned);
                let op = match self.rng.gen_range(0..3) {
                    0 => CmpOp::Eq,
                    1 => CmpOp::Lt,
                    _ => CmpOp::Ge,
                };
                Expr::Cmp(op, a.rc(), b.rc())
            }
            Role::Dict => {
                if depth_budget == 0 || self.rng.gen_bool(0.6) {
                    let g = self.dict_globals[self.rng.gen_range(0..self.dict_globals.len())];
                    return Expr::Global(g.to_string());
                }
                match self.rng.gen_range(0..3) {
                    0 => Expr::DictSing(
                        KeyAttr::None,
                        StorageAttr::Logical,
                        self.gen(Role::Int, depth_budget - 1, binders, banned).rc(),
                        self.gen(Role::Real, depth_budget - 1, binders, banned).rc(),
                    ),
                    1 => Expr::Add(
                        self.gen(Role::Dict, depth_budget - 1, binders, banned).rc(),
                        self.gen(Role::Dict, depth_budget - 1, binders, banned).rc(),
                    ),
                    _ => {
                        let d = self.gen(Role::Dict, 0, binders, banned);
                        let mut inner = binders.to_vec();
                        inner.push(Role::Int);
                        inner.push(Role::Real);
                        let banned2: Vec<u32> = banned.iter().map(|b| b + 2).collect();
                        let key = self.gen(Role::Int, 1, &inner, &banned2);
                        let val = self.gen(Role::Real, depth_budget - 1, &inner, &banned2);
                        Expr::Sum(
                            d.rc(),
                            Expr::DictSing(KeyAttr::None, StorageAttr::Logical, key.rc(), val.rc()).rc(),
                        )
                    }
                }
            }
        }
    }
}

fn pat_to_expr(pat: &Pat, assign: &[Option<Rc<Expr>>], rng: &mut StdRng) -> Rc<Expr> {
    match pat {
        Pat::V(v) => Rc::clone(assign[*v as usize].as_ref().expect("missing assignment")),
        Pat::AnyZero => {
            if rng.gen_bool(0.5) {
                Expr::IntLit(0).rc()
            } else {
                Expr::real(0.0).rc()
            }
        }
        Pat::AnyOne => {
            if rng.gen_bool(0.5) {
                Expr::IntLit(1).rc()
            } else {
                Expr::real(1.0).rc()
            }
        }
        Pat::N(op, kids) => {
            let children: Vec<Rc<Expr>> = kids.iter().map(|k| pat_to_expr(k, assign, rng)).collect();
            Rc::new(expr_of(op, children))
        }
    }
}

fn make_catalog(rng: &mut StdRng) -> StorageCatalog {
    let mut c = StorageCatalog::new();
    c.insert_buffer("gi", PhysicalBuffer::IntScalar(rng.gen_range(1..5))).unwrap();
    c.insert_buffer("gr", PhysicalBuffer::RealScalar([1.5, -2.5, 4.0][rng.gen_range(0..3)])).unwrap();
    for name in ["d0", "d1", "d2"] {
        let size = rng.gen_range(0..5);
        let mut entries = BTreeMap::new();
        for _ in 0..size {
            let k = rng.gen_range(0..7i64);
            let vals = [1.0, 2.5, -1.5, 3.0, -4.0, 0.5];
            entries.insert(vec![k], vals[rng.gen_range(0..vals.len())]);
        }
        c.insert_buffer(name, PhysicalBuffer::Hash { elem: Elem::Real, arity: 1, entries }).unwrap();
    }
    c
}

/// Generate one instantiation satisfying the rule's guards, or None.
fn instantiate(
    rule: &Rule,
    rng: &mut StdRng,
    shapes: &sdqlite_core::optimizer::ShapeCtx,
) -> Option<(Vec<Option<Rc<Expr>>>, Rc<Expr>)> {
    let mut slots = Vec::new();
    collect_slots(&rule.searcher, Role::Any, &mut Vec::new(), &mut slots);

    let mut assign: Vec<Option<Rc<Expr>>> = vec![None; MAX_PVARS];
    for slot in &slots {
        let mut role = slot.role;
        let mut banned: Vec<u32> = Vec::new();
        let mut strict_in: Option<u32> = None;
        let mut linear_in: Option<u32> = None;
        for g in &rule.guards {
            match g {
                Guard::ReprExcludes(v, b) if *v == slot.var => banned.extend(b.iter().copied()),
                Guard::ReprStrict(v, i) if *v == slot.var => strict_in = Some(*i),
                Guard::ReprLinear(v, i) if *v == slot.var => linear_in = Some(*i),
                Guard::ReprIsDict(v) if *v == slot.var => role = Role::Dict,
                Guard::ReprIsScalar(v) if *v == slot.var => {
                    if role == Role::Any || role == Role::Dict {
                        role = Role::Real;
                    }
                }
                _ => {}
            }
        }
        let mut gen = Gen { rng, dict_globals: vec!["d0", "d1", "d2"] };
        let expr = if let Some(idx) = strict_in {
            // build a strict body: a product headed by the binder value,
            // sometimes wrapped in a singleton
            let factor = gen.gen(Role::Real, 2, &slot.binders, &banned);
            let core = Expr::Mul(Expr::Var(idx).rc(), factor.rc());
            if gen.rng.gen_bool(0.4) {
                let key = gen.gen(Role::Int, 1, &slot.binders, &banned);
                Expr::DictSing(KeyAttr::None, StorageAttr::Logical, key.rc(), core.rc())
            } else {
                core
            }
        } else if let Some(idx) = linear_in {
            let factor = gen.gen(Role::Real, 1, &slot.binders, &[idx]);
            let core = Expr::Mul(Expr::Var(idx).rc(), factor.rc());
            if gen.rng.gen_bool(0.5) {
                let key = gen.gen(Role::Int, 1, &slot.binders, &[idx]);
                Expr::DictSing(KeyAttr::None, StorageAttr::Logical, key.rc(), core.rc())
            } else {
                core
            }
        } else {
            gen.gen(role, 3, &slot.binders, &banned)
        };
        // verify the guards we promised
        for g in &rule.guards {
            match g {
                Guard::ReprExcludes(v, b) if *v == slot.var => {
                    let fv = expr.free_vars();
                    if b.iter().any(|x| fv.contains(x)) {
                        return None;
                    }
                }
                Guard::ReprStrict(v, i) if *v == slot.var => {
                    if !expr.is_strict_in(*i) {
                        return None;
                    }
                }
                Guard::ReprLinear(v, i) if *v == slot.var => {
                    if !expr.is_linear_in(*i) {
                        return None;
                    }
                }
                Guard::ReprIsDict(v) if *v == slot.var => {
                    if dict_depth(&expr, shapes).map_or(true, |d| d == 0) {
                        return None;
                    }
                }
                Guard::ReprIsScalar(v) if *v == slot.var => {
                    if dict_depth(&expr, shapes) != Some(0) {
                        return None;
                    }
                }
                _ => {}
            }
        }
        assign[slot.var as usize] = Some(expr.rc());
    }
    let lhs = pat_to_expr(&rule.searcher, &assign, rng);
    if !lhs.is_closed() {
        return None;
    }
    Some((assign, lhs))
}

fn subst_for(rule: &Rule, eg: &EGraph, root: u32) -> Vec<Subst> {
    rule.searcher.match_class(eg, root, [None; MAX_PVARS])
}

#[test]
fn every_rule_preserves_semantics() {
    let rules = rule_catalog();
    let trials = 100;
    for rule in &rules {
        let mut rng = StdRng::seed_from_u64(
            0xA5A5_0000 ^ rule.name.bytes().fold(0u64, |a, b| a.wrapping_mul(31).wrapping_add(b as u64)),
        );
        let mut fired = 0;
        let mut attempts = 0;
        while fired < trials && attempts < trials * 60 {
            attempts += 1;
            let catalog = make_catalog(&mut rng);
            let shapes = shape_ctx(&catalog);
            let Some((_assign, lhs)) = instantiate(rule, &mut rng, &shapes) else {
                continue;
            };
            let base = match eval(&catalog, &lhs) {
                Ok((v, _)) => v,
                Err(_) => continue, // instantiation hit an evaluation corner; skip
            };

            let mut eg = EGraph::new();
            let root = eg.add_expr(&lhs);
            let matches = subst_for(rule, &eg, root);
            let mut applied = false;
            for subst in matches {
                if !rule.check_guards(&eg, &subst, &shapes) {
                    continue;
                }
                if let Some((new_class, _)) = rule.apply(&mut eg, &subst) {
                    eg.union(root, new_class);
                    applied = true;
                }
            }
            if !applied {
                continue;
            }
            fired += 1;
            eg.rebuild();

            for term in eg.enumerate(root, 14, 48) {
                match eval(&catalog, &term) {
                    Ok((v, _)) => {
                        assert!(
                            v.approx_eq(&base, 1e-9),
                            "rule {} unsound:\n  lhs  = {}\n  term = {}\n  want {}\n  got  {}",
                            rule.name,
                            lhs,
                            term,
                            base,
                            v
                        );
                    }
                    // heterogeneous instantiations can legalize only one
                    // side of an algebraic identity; the ill-typed twin is
                    // never extractable (infinite cost) and is tolerated
                    // here, unlike scope errors, which are always bugs
                    Err(sdqlite_core::error::EvalError::TypeMismatch(_))
                    | Err(sdqlite_core::error::EvalError::LookupOnScalar) => {}
                    Err(e) => panic!(
                        "rule {} produced erroring term:\n  lhs  = {}\n  term = {}\n  err: {:?}",
                        rule.name, lhs, term, e
                    ),
                }
            }
        }
        assert!(
            fired >= trials,
            "rule {}: fired on only {} instantiations after {} attempts",
            rule.name,
            fired,
            attempts
        );
    }
}
