//! Desugaring of surface conveniences down to the single-binder,
//! single-key core forms:
//!
//! - `e(e1,e2)`            => `e(e1)(e2)`
//! - `{ (e1,e2) -> e }`    => `{ e1 -> { e2 -> e } }`
//! - `{ () -> e }`         => `e`
//! - `{ a -> x, b -> y }`  => `{ a -> x } + { b -> y }`
//! - tuple binders         => nested sums over fresh row variables
//! - multi-binding lets    => nested lets
//! - multi-collection sums => nested sums
//! - repeated binder keys  => fresh keys plus an equality guard on the body
//!
//! Fresh names contain `#`, which the lexer cannot produce, so they can
//! never capture user names.

use crate::expr::CmpOp;

use super::ast::*;

pub struct Desugarer {
    fresh: u32,
}

impl Desugarer {
    pub fn new() -> Desugarer {
        Desugarer { fresh: 0 }
    }

    fn fresh_name(&mut self, hint: &str) -> String {
        let n = format!("{}#{}", hint, self.fresh);
        self.fresh += 1;
        n
    }

    pub fn desugar(&mut self, e: &SurfExpr) -> SurfExpr {
        let e = self.top(e);
        e.map_children(&mut |c| self.desugar(c))
    }

    /// Apply top-level rewrites to a node until none applies, leaving a
    /// sugar-free head; children are handled by the recursive walk.
    fn top(&mut self, e: &SurfExpr) -> SurfExpr {
        let mut cur = e.clone();
        loop {
            match self.step(&cur) {
                Some(next) => cur = next,
                None => return cur,
            }
        }
    }

    fn step(&mut self, e: &SurfExpr) -> Option<SurfExpr> {
        match e {
            // curried application
            SurfExpr::Call(f, args) if args.len() > 1 => {
                let mut cur = SurfExpr::Call(f.clone(), vec![args[0].clone()]);
                for a in &args[1..] {
                    cur = SurfExpr::Call(cur.boxed(), vec![a.clone()]);
                }
                Some(cur)
            }
            SurfExpr::Dict(entries) if entries.len() > 1 => {
                let mut iter = entries.iter();
                let mut cur = SurfExpr::Dict(vec![iter.next().unwrap().clone()]);
                for next in iter {
                    cur = SurfExpr::Bin(BinOp::Add, cur.boxed(), SurfExpr::Dict(vec![next.clone()]).boxed());
                }
                Some(cur)
            }
            SurfExpr::Dict(entries) if entries.len() == 1 => {
                let entry = &entries[0];
                match &entry.key {
                    DictKey::Unit => Some(entry.val.clone()),
                    DictKey::Tuple(parts) => {
                        // { (e1, e2, ...) -> v } => { e1 -> { (e2, ...) -> v } }
                        let (first, rest) = parts.split_first().unwrap();
                        let inner_key = if rest.len() == 1 {
                            DictKey::Single(rest[0].clone())
                        } else {
                            DictKey::Tuple(rest.to_vec())
                        };
                        let inner = SurfExpr::Dict(vec![DictEntry {
                            key_attr: entry.key_attr,
                            storage_attr: entry.storage_attr,
                            key: inner_key,
                            val: entry.val.clone(),
                        }]);
                        Some(SurfExpr::Dict(vec![DictEntry {
                            key_attr: entry.key_attr,
                            storage_attr: entry.storage_attr,
                            key: DictKey::Single(first.clone()),
                            val: inner,
                        }]))
                    }
                    DictKey::Single(_) => None,
                }
            }
            SurfExpr::Let(binds, body) if binds.len() > 1 => {
                let (first, rest) = binds.split_first().unwrap();
                Some(SurfExpr::Let(
                    vec![first.clone()],
                    SurfExpr::Let(rest.to_vec(), body.clone()).boxed(),
                ))
            }
            SurfExpr::Sum(binds, body) => self.desugar_sum(binds, body),
            _ => None,
        }
    }

    fn desugar_sum(&mut self, binds: &[SumBinding], body: &SurfExpr) -> Option<SurfExpr> {
        // repeated binder keys anywhere in the flattened key list become
        // fresh names plus equality guards applied to the body
        let mut counts: std::collections::HashMap<String, u32> = std::collections::HashMap::new();
        for b in binds {
            for n in key_names(&b.key) {
                if n != "_" {
                    *counts.entry(n).or_insert(0) += 1;
                }
            }
        }
        let mut repeated: Vec<String> = counts.iter().filter(|(_, c)| **c > 1).map(|(n, _)| n.clone()).collect();
        repeated.sort();
        if !repeated.is_empty() {
            let mut renames: std::collections::HashMap<String, Vec<String>> = std::collections::HashMap::new();
            let mut latest: std::collections::HashMap<String, String> = std::collections::HashMap::new();
            let mut new_binds = Vec::new();
            for b in binds {
                // a later collection referring to a renamed key follows
                // ordinary shadowing: it sees the nearest occurrence
                let mut coll = b.coll.clone();
                for (orig, fresh) in &latest {
                    coll = rename_free_name(&coll, orig, fresh);
                }
                let new_key = match &b.key {
                    BinderKey::Single(n) => BinderKey::Single(self.rename_key(n, &repeated, &mut renames, &mut latest)),
                    BinderKey::Tuple(ns) => BinderKey::Tuple(
                        ns.iter().map(|n| self.rename_key(n, &repeated, &mut renames, &mut latest)).collect(),
                    ),
                };
                new_binds.push(SumBinding { key: new_key, val: b.val.clone(), coll });
            }
            // each repeated key contributes one guard per extra occurrence
            let mut guarded = body.clone();
            for name in &repeated {
                guarded = rename_free_name(&guarded, name, &latest[name]);
            }
            let mut guards = Vec::new();
            for name in &repeated {
                let occ = &renames[name];
                for later in &occ[1..] {
                    guards.push(SurfExpr::Cmp(
                        CmpOp::Eq,
                        SurfExpr::Name(occ[0].clone()).boxed(),
                        SurfExpr::Name(later.clone()).boxed(),
                    ));
                }
            }
            for g in guards.into_iter().rev() {
                guarded = SurfExpr::If(g.boxed(), guarded.boxed());
            }
            return Some(SurfExpr::Sum(new_binds, guarded.boxed()));
        }

        // tuple binder: iterate the outer level into a fresh row variable
        if let Some(pos) = binds.iter().position(|b| matches!(b.key, BinderKey::Tuple(_))) {
            let b = &binds[pos];
            let names = match &b.key {
                BinderKey::Tuple(ns) => ns.clone(),
                _ => unreachable!(),
            };
            let (first, rest) = names.split_first().unwrap();
            let row = self.fresh_name("w");
            let inner_key =
                if rest.len() == 1 { BinderKey::Single(rest[0].clone()) } else { BinderKey::Tuple(rest.to_vec()) };
            let outer = SumBinding {
                key: BinderKey::Single(first.clone()),
                val: row.clone(),
                coll: b.coll.clone(),
            };
            let inner = SumBinding { key: inner_key, val: b.val.clone(), coll: SurfExpr::Name(row) };
            let mut new_binds = binds[..pos].to_vec();
            new_binds.push(outer);
            new_binds.push(inner);
            new_binds.extend_from_slice(&binds[pos + 1..]);
            return Some(SurfExpr::Sum(new_binds, body.clone().boxed()));
        }

        // multi-collection sum
        if binds.len() > 1 {
            let (first, rest) = binds.split_first().unwrap();
            return Some(SurfExpr::Sum(
                vec![first.clone()],
                SurfExpr::Sum(rest.to_vec(), body.clone().boxed()).boxed(),
            ));
        }
        None
    }

    fn rename_key(
        &mut self,
        name: &str,
        repeated: &[String],
        renames: &mut std::collections::HashMap<String, Vec<String>>,
        latest: &mut std::collections::HashMap<String, String>,
    ) -> String {
        if !repeated.contains(&name.to_string()) {
            return name.to_string();
        }
        let fresh = self.fresh_name(name);
        renames.entry(name.to_string()).or_default().push(fresh.clone());
        latest.insert(name.to_string(), fresh.clone());
        fresh
    }
}

fn key_names(k: &BinderKey) -> Vec<String> {
    match k {
        BinderKey::Single(n) => vec![n.clone()],
        BinderKey::Tuple(ns) => ns.clone(),
    }
}

/// Rename free occurrences of `from` to `to`, respecting shadowing by
/// binders of the same name.
fn rename_free_name(e: &SurfExpr, from: &str, to: &str) -> SurfExpr {
    match e {
        SurfExpr::Name(n) if n == from => SurfExpr::Name(to.to_string()),
        SurfExpr::Let(binds, body) => {
            let mut shadowed = false;
            let mut new_binds = Vec::new();
            for (n, b) in binds {
                let b2 = if shadowed { b.clone() } else { rename_free_name(b, from, to) };
                new_binds.push((n.clone(), b2));
                if n == from {
                    shadowed = true;
                }
            }
            let body2 = if shadowed { (**body).clone() } else { rename_free_name(body, from, to) };
            SurfExpr::Let(new_binds, body2.boxed())
        }
        SurfExpr::Sum(binds, body) => {
            let mut shadowed = false;
            let mut new_binds = Vec::new();
            for b in binds {
                let coll = if shadowed { b.coll.clone() } else { rename_free_name(&b.coll, from, to) };
                new_binds.push(SumBinding { key: b.key.clone(), val: b.val.clone(), coll });
                if key_names(&b.key).iter().any(|n| n == from) || b.val == from {
                    shadowed = true;
                }
            }
            let body2 = if shadowed { (**body).clone() } else { rename_free_name(body, from, to) };
            SurfExpr::Sum(new_binds, body2.boxed())
        }
        SurfExpr::Merge { k1, k2, v, c1, c2, body } => {
            let c1 = rename_free_name(c1, from, to).boxed();
            let c2 = rename_free_name(c2, from, to).boxed();
            let body = if [k1, k2, v].iter().any(|n| *n == from) {
                body.clone()
            } else {
                rename_free_name(body, from, to).boxed()
            };
            SurfExpr::Merge { k1: k1.clone(), k2: k2.clone(), v: v.clone(), c1, c2, body }
        }
        _ => e.map_children(&mut |c| rename_free_name(c, from, to)),
    }
}

/// Desugar a surface expression to the sugar-free core surface form.
pub fn desugar(e: &SurfExpr) -> SurfExpr {
    Desugarer::new().desugar(e)
}

/// True when the expression contains no sugar forms; used by tests.
pub fn is_sugar_free(e: &SurfExpr) -> bool {
    let mut ok = true;
    match e {
        SurfExpr::Call(_, args) if args.len() != 1 => ok = false,
        SurfExpr::Dict(entries) => {
            if entries.len() != 1 || !matches!(entries[0].key, DictKey::Single(_)) {
                ok = false;
            }
        }
        SurfExpr::Let(binds, _) if binds.len() != 1 => ok = false,
        SurfExpr::Sum(binds, _) => {
            if binds.len() != 1 || !matches!(binds[0].key, BinderKey::Single(_)) {
                ok = false;
            }
        }
        _ => {}
    }
    if !ok {
        return false;
    }
    let mut all = true;
    e.map_children(&mut |c| {
        all &= is_sugar_free(c);
        c.clone()
    });
    all
}
