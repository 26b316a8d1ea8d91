//! Core expression tree with nameless (De Bruijn) variables.
//!
//! Binder conventions, used everywhere in this crate:
//! - `Let(bound, body)`: inside `body`, index 0 is the bound value.
//! - `Sum(coll, body)`: inside `body`, index 0 is the element value and
//!   index 1 is the element key.
//! - `Merge(c1, c2, body)`: inside `body`, index 0 is the shared value,
//!   index 1 is the key into `c2`, index 2 is the key into `c1`.
//!
//! Alpha-equivalent surface terms lower to identical `Expr` values, so
//! structural equality and hashing are alpha-insensitive.

use std::fmt;
use std::rc::Rc;

/// Comparison and boolean connective operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::And => "&&",
            CmpOp::Or => "||",
        }
    }
}

/// Key annotation on a dictionary constructor. `Unique` asserts that all
/// keys produced within an enclosing sum are distinct; it has no runtime
/// effect and only enables fusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KeyAttr {
    None,
    Unique,
}

/// Physical representation chosen for a constructed dictionary. `Logical`
/// means no choice has been made yet; such plans cannot be executed and
/// cost infinity during extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StorageAttr {
    Logical,
    Dense,
    Hash,
}

/// Unary integer/real primitives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum UnaryOp {
    Neg,
    Exp,
    /// Compact the even bit positions of a nonnegative int.
    EvenBits,
    /// Compact the odd bit positions of a nonnegative int.
    OddBits,
}

/// The expression calculus. All collections are dictionaries from integer
/// keys to values; a scalar is a zero-depth dictionary.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    IntLit(i64),
    /// Stored as bits so that `Expr` is `Eq + Hash`.
    RealLit(u64),
    BoolLit(bool),
    /// De Bruijn index counting enclosing binders.
    Var(u32),
    /// A named physical buffer or logical tensor.
    Global(String),
    Add(Rc<Expr>, Rc<Expr>),
    Mul(Rc<Expr>, Rc<Expr>),
    Sub(Rc<Expr>, Rc<Expr>),
    Div(Rc<Expr>, Rc<Expr>),
    Mod(Rc<Expr>, Rc<Expr>),
    Unary(UnaryOp, Rc<Expr>),
    Cmp(CmpOp, Rc<Expr>, Rc<Expr>),
    /// `{ key -> val }` with optional `@unique` / `@dense` / `@hash`.
    DictSing(KeyAttr, StorageAttr, Rc<Expr>, Rc<Expr>),
    /// `dict(key)`; missing keys read as zero.
    Lookup(Rc<Expr>, Rc<Expr>),
    /// `lo:hi`, the dictionary `{ lo -> lo, ..., hi-1 -> hi-1 }`.
    Range(Rc<Expr>, Rc<Expr>),
    /// `arr(lo:hi)`, the sub-dictionary of `arr` on keys `lo..hi`.
    SubArray(Rc<Expr>, Rc<Expr>, Rc<Expr>),
    /// `if (cond) then body`; zero otherwise.
    IfThen(Rc<Expr>, Rc<Expr>),
    Let(Rc<Expr>, Rc<Expr>),
    Sum(Rc<Expr>, Rc<Expr>),
    Merge(Rc<Expr>, Rc<Expr>, Rc<Expr>),
}

pub fn real_bits(x: f64) -> u64 {
    x.to_bits()
}

impl Expr {
    pub fn real(x: f64) -> Expr {
        Expr::RealLit(real_bits(x))
    }

    pub fn real_value(&self) -> Option<f64> {
        match self {
            Expr::RealLit(b) => Some(f64::from_bits(*b)),
            _ => None,
        }
    }

    pub fn rc(self) -> Rc<Expr> {
        Rc::new(self)
    }

    /// Number of binders each child lives under, in child order.
    pub fn binder_counts(&self) -> &'static [u32] {
        match self {
            Expr::IntLit(_) | Expr::RealLit(_) | Expr::BoolLit(_) | Expr::Var(_) | Expr::Global(_) => &[],
            Expr::Unary(..) | Expr::IfThen(..) => match self {
                Expr::Unary(..) => &[0],
                _ => &[0, 0],
            },
            Expr::Add(..) | Expr::Mul(..) | Expr::Sub(..) | Expr::Div(..) | Expr::Mod(..) | Expr::Cmp(..) => &[0, 0],
            Expr::DictSing(..) | Expr::Lookup(..) | Expr::Range(..) => &[0, 0],
            Expr::SubArray(..) => &[0, 0, 0],
            Expr::Let(..) => &[0, 1],
            Expr::Sum(..) => &[0, 2],
            Expr::Merge(..) => &[0, 0, 3],
        }
    }

    pub fn children(&self) -> Vec<&Rc<Expr>> {
        match self {
            Expr::IntLit(_) | Expr::RealLit(_) | Expr::BoolLit(_) | Expr::Var(_) | Expr::Global(_) => vec![],
            Expr::Unary(_, a) => vec![a],
            Expr::Add(a, b)
            | Expr::Mul(a, b)
            | Expr::Sub(a, b)
            | Expr::Div(a, b)
            | Expr::Mod(a, b)
            | Expr::Cmp(_, a, b)
            | Expr::Lookup(a, b)
            | Expr::Range(a, b)
            | Expr::IfThen(a, b)
            | Expr::Let(a, b)
            | Expr::Sum(a, b)
            | Expr::DictSing(_, _, a, b) => vec![a, b],
            Expr::SubArray(a, b, c) | Expr::Merge(a, b, c) => vec![a, b, c],
        }
    }

    pub fn map_children(&self, mut f: impl FnMut(usize, &Rc<Expr>) -> Rc<Expr>) -> Expr {
        match self {
            Expr::IntLit(_) | Expr::RealLit(_) | Expr::BoolLit(_) | Expr::Var(_) | Expr::Global(_) => self.clone(),
            Expr::Unary(op, a) => Expr::Unary(*op, f(0, a)),
            Expr::Add(a, b) => Expr::Add(f(0, a), f(1, b)),
            Expr::Mul(a, b) => Expr::Mul(f(0, a), f(1, b)),
            Expr::Sub(a, b) => Expr::Sub(f(0, a), f(1, b)),
            Expr::Div(a, b) => Expr::Div(f(0, a), f(1, b)),
            Expr::Mod(a, b) => Expr::Mod(f(0, a), f(1, b)),
            Expr::Cmp(op, a, b) => Expr::Cmp(*op, f(0, a), f(1, b)),
            Expr::DictSing(k, s, a, b) => Expr::DictSing(*k, *s, f(0, a), f(1, b)),
            Expr::Lookup(a, b) => Expr::Lookup(f(0, a), f(1, b)),
            Expr::Range(a, b) => Expr::Range(f(0, a), f(1, b)),
            Expr::SubArray(a, b, c) => Expr::SubArray(f(0, a), f(1, b), f(2, c)),
            Expr::IfThen(a, b) => Expr::IfThen(f(0, a), f(1, b)),
            Expr::Let(a, b) => Expr::Let(f(0, a), f(1, b)),
            Expr::Sum(a, b) => Expr::Sum(f(0, a), f(1, b)),
            Expr::Merge(a, b, c) => Expr::Merge(f(0, a), f(1, b), f(2, c)),
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(|c| c.node_count()).sum::<usize>()
    }

    /// Add `delta` to every free variable index `>= cutoff`. `delta` may be
    /// negative; shifting a bound occurrence below its binder is a caller bug
    /// and panics in debug builds.
    pub fn shift(&self, delta: i64, cutoff: u32) -> Expr {
        if delta == 0 {
            return self.clone();
        }
        match self {
            Expr::Var(i) if *i >= cutoff => {
                let v = *i as i64 + delta;
                debug_assert!(v >= 0, "shift produced a negative index");
                Expr::Var(v as u32)
            }
            _ => {
                let binders = self.binder_counts();
                self.map_children(|i, c| Rc::new(c.shift(delta, cutoff + binders[i])))
            }
        }
    }

    /// Renumber free variables through `map(idx) -> idx`, where `idx` is
    /// relative to the term root. Used by rewrites that permute binders.
    pub fn rename_free(&self, map: &impl Fn(u32) -> u32) -> Expr {
        fn go(e: &Expr, depth: u32, map: &impl Fn(u32) -> u32) -> Expr {
            match e {
                Expr::Var(i) if *i >= depth => Expr::Var(map(*i - depth) + depth),
                _ => {
                    let binders = e.binder_counts();
                    e.map_children(|i, c| Rc::new(go(c, depth + binders[i], map)))
                }
            }
        }
        go(self, 0, map)
    }

    /// Replace index 0 with `arg` (shifted per depth) and close the binder:
    /// all remaining free indices drop by one.
    pub fn subst_top(&self, arg: &Expr) -> Expr {
        fn go(e: &Expr, depth: u32, arg: &Expr) -> Expr {
            match e {
                Expr::Var(i) if *i == depth => arg.shift(depth as i64, 0),
                Expr::Var(i) if *i > depth => Expr::Var(i - 1),
                _ => {
                    let binders = e.binder_counts();
                    e.map_children(|i, c| Rc::new(go(c, depth + binders[i], arg)))
                }
            }
        }
        go(self, 0, arg)
    }

    /// Largest free variable index, if any.
    pub fn max_free_var(&self) -> Option<u32> {
        fn go(e: &Expr, depth: u32, acc: &mut Option<u32>) {
            match e {
                Expr::Var(i) if *i >= depth => {
                    let free = *i - depth;
                    *acc = Some(acc.map_or(free, |a| a.max(free)));
                }
                _ => {
                    let binders = e.binder_counts();
                    for (i, c) in e.children().into_iter().enumerate() {
                        go(c, depth + binders[i], acc);
                    }
                }
            }
        }
        let mut acc = None;
        go(self, 0, &mut acc);
        acc
    }

    /// Free variable indices relative to the term root, plus global names.
    pub fn free_vars(&self) -> std::collections::BTreeSet<u32> {
        fn go(e: &Expr, depth: u32, acc: &mut std::collections::BTreeSet<u32>) {
            match e {
                Expr::Var(i) if *i >= depth => {
                    acc.insert(*i - depth);
                }
                _ => {
                    let binders = e.binder_counts();
                    for (i, c) in e.children().into_iter().enumerate() {
                        go(c, depth + binders[i], acc);
                    }
                }
            }
        }
        let mut acc = std::collections::BTreeSet::new();
        go(self, 0, &mut acc);
        acc
    }

    pub fn uses_var(&self, idx: u32) -> bool {
        self.free_vars().contains(&idx)
    }

    pub fn is_closed(&self) -> bool {
        self.max_free_var().is_none()
    }

    /// True when the expression can be evaluated without runtime errors for
    /// any environment: no division, modulo, exponent, or buffer access.
    pub fn is_total(&self) -> bool {
        match self {
            Expr::Div(..) | Expr::Mod(..) | Expr::SubArray(..) => false,
            Expr::Unary(UnaryOp::Exp, _) => false,
            Expr::Lookup(base, _) if matches!(**base, Expr::Global(_)) => false,
            _ => self.children().iter().all(|c| c.is_total()),
        }
    }

    /// True when substituting the zero value for variable `idx` is guaranteed
    /// to evaluate to zero, without introducing errors the original term
    /// could not raise. Conservative; used as a fusion-rule side condition.
    pub fn is_strict_in(&self, idx: u32) -> bool {
        match self {
            Expr::Var(i) => *i == idx,
            Expr::Mul(a, b) => a.is_strict_in(idx) || b.is_strict_in(idx),
            Expr::Add(a, b) | Expr::Sub(a, b) => a.is_strict_in(idx) && b.is_strict_in(idx),
            Expr::Unary(UnaryOp::Neg, a) => a.is_strict_in(idx),
            Expr::DictSing(_, _, _key, val) => val.is_strict_in(idx),
            Expr::Lookup(d, _key) => d.is_strict_in(idx),
            Expr::IfThen(c, b) => b.is_strict_in(idx) && c.is_total(),
            Expr::Sum(coll, body) => {
                coll.is_strict_in(idx) || (body.is_strict_in(idx + 2) && coll.is_total())
            }
            Expr::Merge(c1, c2, body) => {
                (c1.is_strict_in(idx) && c2.is_total())
                    || (c2.is_strict_in(idx) && c1.is_total())
                    || (body.is_strict_in(idx + 3) && c1.is_total() && c2.is_total())
            }
            _ => false,
        }
    }

    /// True when the term is additive in variable `idx`: splitting the
    /// variable's value across an addition splits the result. Conservative.
    pub fn is_linear_in(&self, idx: u32) -> bool {
        match self {
            Expr::Var(i) => *i == idx,
            Expr::Mul(a, b) => {
                (a.is_linear_in(idx) && !b.uses_var(idx)) || (!a.uses_var(idx) && b.is_linear_in(idx))
            }
            Expr::Add(a, b) | Expr::Sub(a, b) => a.is_linear_in(idx) && b.is_linear_in(idx),
            Expr::Unary(UnaryOp::Neg, a) => a.is_linear_in(idx),
            Expr::DictSing(_, _, key, val) => !key.uses_var(idx) && val.is_linear_in(idx),
            Expr::IfThen(c, b) => !c.uses_var(idx) && b.is_linear_in(idx) && c.is_total(),
            Expr::Sum(coll, body) => !coll.uses_var(idx) && body.is_linear_in(idx + 2) && coll.is_total(),
            Expr::Lookup(d, k) => d.is_linear_in(idx) && !k.uses_var(idx),
            _ => false,
        }
    }

    /// Names of all globals referenced anywhere in the term.
    pub fn global_refs(&self) -> std::collections::BTreeSet<String> {
        let mut acc = std::collections::BTreeSet::new();
        fn go(e: &Expr, acc: &mut std::collections::BTreeSet<String>) {
            if let Expr::Global(n) = e {
                acc.insert(n.clone());
            }
            for c in e.children() {
                go(c, acc);
            }
        }
        go(self, &mut acc);
        acc
    }

    /// Replace every `Global(name)` with the given expression builder result.
    pub fn replace_globals(&self, f: &impl Fn(&str, u32) -> Option<Expr>) -> Expr {
        fn go(e: &Expr, depth: u32, f: &impl Fn(&str, u32) -> Option<Expr>) -> Expr {
            match e {
                Expr::Global(n) => f(n, depth).unwrap_or_else(|| e.clone()),
                _ => {
                    let binders = e.binder_counts();
                    e.map_children(|i, c| Rc::new(go(c, depth + binders[i], f)))
                }
            }
        }
        go(self, 0, f)
    }
}

/// Exact set of global names and dangling variable indices of a term.
pub fn free_global_refs(e: &Expr) -> (std::collections::BTreeSet<String>, std::collections::BTreeSet<u32>) {
    (e.global_refs(), e.free_vars())
}

// Rendering. The output is valid surface syntax and round-trips through the
// parser; bound variables get fresh names x0, x1, ...

struct Renderer<'a> {
    names: Vec<String>,
    out: &'a mut String,
}

fn prec_of(e: &Expr) -> u8 {
    // higher binds tighter
    match e {
        Expr::Cmp(CmpOp::Or, ..) => 1,
        Expr::Cmp(CmpOp::And, ..) => 2,
        Expr::Cmp(..) => 3,
        Expr::Range(..) => 4,
        Expr::Add(..) | Expr::Sub(..) => 5,
        Expr::Mul(..) | Expr::Div(..) | Expr::Mod(..) => 6,
        Expr::Unary(UnaryOp::Neg, _) => 7,
        Expr::IfThen(..) | Expr::Let(..) | Expr::Sum(..) | Expr::Merge(..) => 0,
        _ => 10,
    }
}

impl<'a> Renderer<'a> {
    fn fresh(&mut self) -> String {
        let n = format!("x{}", self.names.len());
        self.names.push(n.clone());
        n
    }

    fn name(&self, idx: u32) -> String {
        let pos = self.names.len() as i64 - 1 - idx as i64;
        if pos < 0 {
            format!("%{}", idx)
        } else {
            self.names[pos as usize].clone()
        }
    }

    fn atom(&mut self, e: &Expr, min_prec: u8) {
        let p = prec_of(e);
        if p < min_prec {
            self.out.push('(');
            self.render(e);
            self.out.push(')');
        } else {
            self.render(e);
        }
    }

    fn render(&mut self, e: &Expr) {
        match e {
            Expr::IntLit(i) => {
                self.out.push_str(&i.to_string());
            }
            Expr::RealLit(b) => {
                let x = f64::from_bits(*b);
                if x == x.trunc() && x.is_finite() && x.abs() < 1e15 {
                    self.out.push_str(&format!("{:.1}", x));
                } else {
                    self.out.push_str(&format!("{}", x));
                }
            }
            Expr::BoolLit(b) => self.out.push_str(if *b { "true" } else { "false" }),
            Expr::Var(i) => {
                let n = self.name(*i);
                self.out.push_str(&n);
            }
            Expr::Global(n) => self.out.push_str(n),
            Expr::Add(a, b) => {
                self.atom(a, 5);
                self.out.push_str(" + ");
                self.atom(b, 6);
            }
            Expr::Sub(a, b) => {
                self.atom(a, 5);
                self.out.push_str(" - ");
                self.atom(b, 6);
            }
            Expr::Mul(a, b) => {
                self.atom(a, 6);
                self.out.push_str(" * ");
                self.atom(b, 7);
            }
            Expr::Div(a, b) => {
                self.atom(a, 6);
                self.out.push_str(" / ");
                self.atom(b, 7);
            }
            Expr::Mod(a, b) => {
                self.atom(a, 6);
                self.out.push_str(" % ");
                self.atom(b, 7);
            }
            Expr::Unary(op, a) => match op {
                UnaryOp::Neg => {
                    self.out.push('-');
                    self.atom(a, 7);
                }
                UnaryOp::Exp => {
                    self.out.push_str("exp(");
                    self.render(a);
                    self.out.push(')');
                }
                UnaryOp::EvenBits => {
                    self.out.push_str("even_bits(");
                    self.render(a);
                    self.out.push(')');
                }
                UnaryOp::OddBits => {
                    self.out.push_str("odd_bits(");
                    self.render(a);
                    self.out.push(')');
                }
            },
            Expr::Cmp(op, a, b) => {
                let p = prec_of(e);
                self.atom(a, p + 1);
                self.out.push(' ');
                self.out.push_str(op.symbol());
                self.out.push(' ');
                self.atom(b, p + 1);
            }
            Expr::DictSing(k, s, key, val) => {
                self.out.push_str("{ ");
                match k {
                    KeyAttr::Unique => self.out.push_str("@unique "),
                    KeyAttr::None => {}
                }
                match s {
                    StorageAttr::Dense => self.out.push_str("@dense "),
                    StorageAttr::Hash => self.out.push_str("@hash "),
                    StorageAttr::Logical => {}
                }
                self.render(key);
                self.out.push_str(" -> ");
                self.render(val);
                self.out.push_str(" }");
            }
            Expr::Lookup(d, k) => {
                self.atom(d, 10);
                self.out.push('(');
                self.render(k);
                self.out.push(')');
            }
            Expr::Range(a, b) => {
                self.atom(a, 5);
                self.out.push(':');
                self.atom(b, 5);
            }
            Expr::SubArray(d, lo, hi) => {
                self.atom(d, 10);
                self.out.push('(');
                self.atom(lo, 5);
                self.out.push(':');
                self.atom(hi, 5);
                self.out.push(')');
            }
            Expr::IfThen(c, b) => {
                self.out.push_str("if (");
                self.render(c);
                self.out.push_str(") then ");
                self.atom(b, 1);
            }
            Expr::Let(bound, body) => {
                self.out.push_str("let ");
                let pos = self.out.len();
                self.render(bound);
                let bound_txt = self.out.split_off(pos);
                let n = self.fresh();
                self.out.push_str(&n);
                self.out.push_str(" = ");
                self.out.push_str(&bound_txt);
                self.out.push_str(" in ");
                self.render(body);
                self.names.pop();
            }
            Expr::Sum(coll, body) => {
                self.out.push_str("sum(<");
                let pos = self.out.len();
                self.render(coll);
                let coll_txt = self.out.split_off(pos);
                let k = self.fresh();
                let v = self.fresh();
                self.out.push_str(&k);
                self.out.push(',');
                self.out.push_str(&v);
                self.out.push_str("> in ");
                self.out.push_str(&coll_txt);
                self.out.push_str(") ");
                self.render(body);
                self.names.pop();
                self.names.pop();
            }
            Expr::Merge(c1, c2, body) => {
                self.out.push_str("merge(<");
                let pos = self.out.len();
                self.render(c1);
                self.out.push_str("\u{0}");
                self.render(c2);
                let both = self.out.split_off(pos);
                let mut parts = both.split('\u{0}');
                let c1_txt = parts.next().unwrap().to_string();
                let c2_txt = parts.next().unwrap().to_string();
                let k1 = self.fresh();
                let k2 = self.fresh();
                let v = self.fresh();
                self.out.push_str(&format!("{},{},{}> in <{}, {}>) ", k1, k2, v, c1_txt, c2_txt));
                self.render(body);
                self.names.pop();
                self.names.pop();
                self.names.pop();
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        let mut r = Renderer { names: Vec::new(), out: &mut s };
        r.render(self);
        f.write_str(&s)
    }
}

// Convenience constructors used heavily in rules and tests.
pub fn int(i: i64) -> Rc<Expr> {
    Expr::IntLit(i).rc()
}
pub fn var(i: u32) -> Rc<Expr> {
    Expr::Var(i).rc()
}
pub fn global(n: &str) -> Rc<Expr> {
    Expr::Global(n.to_string()).rc()
}
pub fn add(a: Rc<Expr>, b: Rc<Expr>) -> Rc<Expr> {
    Expr::Add(a, b).rc()
}
pub fn mul(a: Rc<Expr>, b: Rc<Expr>) -> Rc<Expr> {
    Expr::Mul(a, b).rc()
}
pub fn dict(key: Rc<Expr>, val: Rc<Expr>) -> Rc<Expr> {
    Expr::DictSing(KeyAttr::None, StorageAttr::Logical, key, val).rc()
}
pub fn lookup(d: Rc<Expr>, k: Rc<Expr>) -> Rc<Expr> {
    Expr::Lookup(d, k).rc()
}
pub fn if_then(c: Rc<Expr>, b: Rc<Expr>) -> Rc<Expr> {
    Expr::IfThen(c, b).rc()
}
pub fn let_in(bound: Rc<Expr>, body: Rc<Expr>) -> Rc<Expr> {
    Expr::Let(bound, body).rc()
}
pub fn sum(coll: Rc<Expr>, body: Rc<Expr>) -> Rc<Expr> {
    Expr::Sum(coll, body).rc()
}
pub fn cmp(op: CmpOp, a: Rc<Expr>, b: Rc<Expr>) -> Rc<Expr> {
    Expr::Cmp(op, a, b).rc()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shift_respects_binders() {
        // sum(<k,v> in %0) v * %2   -- free vars {0, 0(inner as 2)}
        let e = sum(var(0), mul(var(0), var(2)));
        let shifted = e.shift(3, 0);
        assert_eq!(shifted, *sum(var(3), mul(var(0), var(5))));
    }

    #[test]
    fn subst_top_closes_binder() {
        // let x = A in x * %0  => body subst: A * %0 with outer var dropping to 0
        let body = mul(var(0), var(1));
        let out = body.subst_top(&Expr::Global("A".into()));
        assert_eq!(out, *mul(global("A"), var(0)));
    }

    #[test]
    fn subst_shifts_argument_under_binders() {
        // body: sum(<k,v> in %0) %2  (refers to the substituted value twice)
        let body = sum(var(0), var(2));
        let out = body.subst_top(&Expr::Var(5));
        assert_eq!(out, *sum(var(5), var(7)));
    }

    #[test]
    fn free_vars_and_globals() {
        let e = mul(var(0), global("B"));
        let (globals, dangling) = free_global_refs(&e);
        assert!(globals.contains("B"));
        assert_eq!(dangling.into_iter().collect::<Vec<_>>(), vec![0]);

        let e = Expr::IntLit(3);
        let (globals, dangling) = free_global_refs(&e);
        assert!(globals.is_empty() && dangling.is_empty());
    }

    #[test]
    fn strictness() {
        // v * c is strict in v
        assert!(mul(var(0), global("c")).is_strict_in(0));
        // {k -> v} is strict in v
        assert!(dict(global("k"), var(0)).is_strict_in(0));
        // v + 1 is not
        assert!(!add(var(0), int(1)).is_strict_in(0));
        // sum over v is strict via the collection
        assert!(sum(var(0), var(1)).is_strict_in(0));
        // literal is not
        assert!(!int(7).is_strict_in(0));
    }

    #[test]
    fn rename_free_permutes() {
        let e = mul(var(0), sum(global("A"), var(3)));
        let out = e.rename_free(&|i| if i == 0 { 1 } else { 0 });
        assert_eq!(out, *mul(var(1), sum(global("A"), var(2))));
    }

    #[test]
    fn display_round_shape() {
        // key binder renders first: index 1 is the key, index 0 the value
        let e = sum(global("A"), dict(var(1), var(0)));
        assert_eq!(e.to_string(), "sum(<x0,x1> in A) { x0 -> x1 }");
    }
}
