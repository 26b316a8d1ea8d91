//! Name resolution: sugar-free surface expressions become nameless core
//! expressions. Alpha-equivalent inputs produce identical output.

use std::collections::BTreeSet;
use std::rc::Rc;

use crate::error::LowerError;
use crate::expr::Expr;

use super::ast::*;

/// Known global names. `None` accepts any free name as a global, which is
/// convenient for tests and for programs checked against a catalog later.
pub struct Scope<'a> {
    globals: Option<&'a BTreeSet<String>>,
    stack: Vec<Option<String>>,
}

impl<'a> Scope<'a> {
    pub fn new(globals: Option<&'a BTreeSet<String>>) -> Scope<'a> {
        Scope { globals, stack: Vec::new() }
    }

    fn push(&mut self, name: &str) {
        if name == "_" {
            self.stack.push(None);
        } else {
            self.stack.push(Some(name.to_string()));
        }
    }

    fn pop(&mut self, n: usize) {
        for _ in 0..n {
            self.stack.pop();
        }
    }

    fn resolve(&self, name: &str) -> Option<u32> {
        for (depth, entry) in self.stack.iter().rev().enumerate() {
            if entry.as_deref() == Some(name) {
                return Some(depth as u32);
            }
        }
        None
    }
}

pub fn lower(e: &SurfExpr, globals: Option<&BTreeSet<String>>) -> Result<Expr, LowerError> {
    let mut scope = Scope::new(globals);
    go(e, &mut scope)
}

fn go(e: &SurfExpr, scope: &mut Scope) -> Result<Expr, LowerError> {
    Ok(match e {
        SurfExpr::Int(i) => Expr::IntLit(*i),
        SurfExpr::Real(x) => Expr::real(*x),
        SurfExpr::Bool(b) => Expr::BoolLit(*b),
        SurfExpr::Name(n) => match scope.resolve(n) {
            Some(d) => Expr::Var(d),
            None => match scope.globals {
                Some(g) if !g.contains(n) => return Err(LowerError::UnboundVariable(n.clone())),
                _ => Expr::Global(n.clone()),
            },
        },
        SurfExpr::Bin(op, a, b) => {
            let a = go(a, scope)?.rc();
            let b = go(b, scope)?.rc();
            match op {
                BinOp::Add => Expr::Add(a, b),
                BinOp::Sub => Expr::Sub(a, b),
                BinOp::Mul => Expr::Mul(a, b),
                BinOp::Div => Expr::Div(a, b),
                BinOp::Mod => Expr::Mod(a, b),
            }
        }
        SurfExpr::Unary(op, a) => Expr::Unary(*op, go(a, scope)?.rc()),
        SurfExpr::Cmp(op, a, b) => Expr::Cmp(*op, go(a, scope)?.rc(), go(b, scope)?.rc()),
        SurfExpr::Call(f, args) => {
            assert_eq!(args.len(), 1, "call not desugared");
            let base = go(f, scope)?.rc();
            match &args[0] {
                SurfExpr::Range(lo, hi) => {
                    Expr::SubArray(base, go(lo, scope)?.rc(), go(hi, scope)?.rc())
                }
                a => Expr::Lookup(base, go(a, scope)?.rc()),
            }
        }
        SurfExpr::Range(lo, hi) => Expr::Range(go(lo, scope)?.rc(), go(hi, scope)?.rc()),
        SurfExpr::Dict(entries) => {
            assert_eq!(entries.len(), 1, "dict not desugared");
            let entry = &entries[0];
            let key = match &entry.key {
                DictKey::Single(k) => go(k, scope)?,
                _ => panic!("dict key not desugared"),
            };
            Expr::DictSing(entry.key_attr, entry.storage_attr, key.rc(), go(&entry.val, scope)?.rc())
        }
        SurfExpr::If(c, b) => Expr::IfThen(go(c, scope)?.rc(), go(b, scope)?.rc()),
        SurfExpr::Let(binds, body) => {
            assert_eq!(binds.len(), 1, "let not desugared");
            let (name, bound) = &binds[0];
            let bound = go(bound, scope)?;
            scope.push(name);
            let body = go(body, scope);
            scope.pop(1);
            Expr::Let(bound.rc(), body?.rc())
        }
        SurfExpr::Sum(binds, body) => {
            assert_eq!(binds.len(), 1, "sum not desugared");
            let b = &binds[0];
            let key = match &b.key {
                BinderKey::Single(n) => n.clone(),
                _ => panic!("tuple binder not desugared"),
            };
            let coll = go(&b.coll, scope)?;
            scope.push(&key);
            scope.push(&b.val);
            let body = go(body, scope);
            scope.pop(2);
            Expr::Sum(coll.rc(), body?.rc())
        }
        SurfExpr::Merge { k1, k2, v, c1, c2, body } => {
            let c1 = go(c1, scope)?;
            let c2 = go(c2, scope)?;
            scope.push(k1);
            scope.push(k2);
            scope.push(v);
            let body = go(body, scope);
            scope.pop(3);
            Expr::Merge(c1.rc(), c2.rc(), body?.rc())
        }
    })
}

/// Convenience: parse, desugar, and lower one expression.
pub fn parse_lower(text: &str, globals: Option<&BTreeSet<String>>) -> Result<Rc<Expr>, crate::error::Error> {
    let surf = super::grammar::parse_expr(text)?;
    let sugar_free = super::desugar::desugar(&surf);
    Ok(lower(&sugar_free, globals)?.rc())
}
