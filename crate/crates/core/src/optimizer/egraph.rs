//! Congruence-closed e-graph over the core expression operators.
//!
//! Each e-class carries its smallest known representative term. Rules whose
//! right-hand sides move subterms across binders check side conditions
//! against that representative and re-insert a shifted copy of it, which is
//! the standard way to keep nameless-variable rewriting sound inside an
//! e-graph: classes are shared across contexts, concrete terms are not.

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use crate::expr::{CmpOp, Expr, KeyAttr, StorageAttr, UnaryOp};

pub type ClassId = u32;

/// Operator label of an e-node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Op {
    IntLit(i64),
    RealLit(u64),
    BoolLit(bool),
    Var(u32),
    Global(String),
    Add,
    Mul,
    Sub,
    Div,
    Mod,
    Unary(UnaryOp),
    Cmp(CmpOp),
    DictSing(KeyAttr, StorageAttr),
    Lookup,
    Range,
    SubArray,
    IfThen,
    Let,
    Sum,
    Merge,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ENode {
    pub op: Op,
    pub children: Vec<ClassId>,
}

impl ENode {
    pub fn leaf(op: Op) -> ENode {
        ENode { op, children: Vec::new() }
    }

    fn canonicalize(&self, eg: &EGraph) -> ENode {
        ENode { op: self.op.clone(), children: self.children.iter().map(|c| eg.find(*c)).collect() }
    }
}

#[derive(Debug, Clone)]
pub struct EClass {
    pub nodes: Vec<ENode>,
    /// parent nodes and the class they live in, for congruence repair
    parents: Vec<(ENode, ClassId)>,
    /// (size, term): smallest representative known for this class
    pub small: (u32, Rc<Expr>),
}

#[derive(Debug, Default)]
pub struct EGraph {
    uf: Vec<ClassId>,
    classes: Vec<Option<EClass>>,
    memo: HashMap<ENode, ClassId>,
    /// classes whose parents need re-canonicalization
    dirty: Vec<ClassId>,
    /// classes whose smallest representative may have improved
    small_dirty: Vec<ClassId>,
}

impl EGraph {
    pub fn new() -> EGraph {
        EGraph::default()
    }

    pub fn find(&self, mut id: ClassId) -> ClassId {
        while self.uf[id as usize] != id {
            id = self.uf[id as usize];
        }
        id
    }

    pub fn node_count(&self) -> usize {
        self.class_ids().map(|c| self.classes[c as usize].as_ref().unwrap().nodes.len()).sum()
    }

    pub fn class_count(&self) -> usize {
        self.class_ids().count()
    }

    pub fn memo_count(&self) -> usize {
        self.memo.len()
    }

    pub fn class_ids(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.uf.len() as ClassId).filter(move |id| self.uf[*id as usize] == *id)
    }

    pub fn class(&self, id: ClassId) -> &EClass {
        self.classes[self.find(id) as usize].as_ref().unwrap()
    }

    /// Smallest representative term of a class.
    pub fn repr(&self, id: ClassId) -> Rc<Expr> {
        Rc::clone(&self.class(id).small.1)
    }

    /// Add a canonicalized node, returning its class and whether it is new.
    pub fn add(&mut self, node: ENode) -> (ClassId, bool) {
        let node = node.canonicalize(self);
        if let Some(&id) = self.memo.get(&node) {
            return (self.find(id), false);
        }
        let id = self.uf.len() as ClassId;
        self.uf.push(id);
        let small = self.make_small(&node);
        let class = EClass { nodes: vec![node.clone()], parents: Vec::new(), small };
        self.classes.push(Some(class));
        for &child in &node.children {
            let child = self.find(child);
            self.classes[child as usize].as_mut().unwrap().parents.push((node.clone(), id));
        }
        self.memo.insert(node, id);
        (id, true)
    }

    fn make_small(&self, node: &ENode) -> (u32, Rc<Expr>) {
        let mut size = 1u32;
        let mut child_exprs = Vec::with_capacity(node.children.len());
        for &c in &node.children {
            let (s, e) = &self.class(c).small;
            size = size.saturating_add(*s);
            child_exprs.push(Rc::clone(e));
        }
        (size, Rc::new(expr_of(&node.op, child_exprs)))
    }

    /// Union two classes; returns the canonical id and whether they merged.
    pub fn union(&mut self, a: ClassId, b: ClassId) -> (ClassId, bool) {
        let a = self.find(a);
        let b = self.find(b);
        if a == b {
            return (a, false);
        }
        // keep the smaller id as canonical for deterministic numbering
        let (keep, drop) = if a < b { (a, b) } else { (b, a) };
        self.uf[drop as usize] = keep;
        let removed = self.classes[drop as usize].take().unwrap();
        let kept = self.classes[keep as usize].as_mut().unwrap();
        kept.nodes.extend(removed.nodes);
        kept.parents.extend(removed.parents);
        let improved = removed.small.0 < kept.small.0
            || (removed.small.0 == kept.small.0 && removed.small.1 < kept.small.1);
        if improved {
            kept.small = removed.small;
        }
        // parents inherited from the worse side need their representatives
        // recomputed either way
        self.small_dirty.push(keep);
        self.dirty.push(keep);
        (keep, true)
    }

    /// Restore congruence and representative minimality after unions.
    pub fn rebuild(&mut self) {
        while !self.dirty.is_empty() || !self.small_dirty.is_empty() {
            let dirty = std::mem::take(&mut self.dirty);
            for class in dirty {
                let class = self.find(class);
                let parents = std::mem::take(&mut self.classes[class as usize].as_mut().unwrap().parents);
                let mut new_parents: Vec<(ENode, ClassId)> = Vec::with_capacity(parents.len());
                for (node, parent_class) in parents {
                    let canon = node.canonicalize(self);
                    let parent_class = self.find(parent_class);
                    if let Some(&other) = self.memo.get(&canon) {
                        let other = self.find(other);
                        if other != parent_class {
                            self.union(parent_class, other);
                        }
                    }
                    self.memo.remove(&node);
                    let parent_class = self.find(parent_class);
                    self.memo.insert(canon.clone(), parent_class);
                    new_parents.push((canon, parent_class));
                }
                let class = self.find(class);
                let slot = self.classes[class as usize].as_mut().unwrap();
                slot.parents.extend(new_parents);
                // de-duplicate nodes within the class
                let mut seen = std::collections::HashSet::new();
                let nodes = std::mem::take(&mut slot.nodes);
                let mut uniq = Vec::with_capacity(nodes.len());
                for n in nodes {
                    let c = n.canonicalize(self);
                    if seen.insert(c.clone()) {
                        uniq.push(c);
                    }
                }
                let id = self.find(class);
                self.classes[id as usize].as_mut().unwrap().nodes = uniq;
            }

            let small_dirty = std::mem::take(&mut self.small_dirty);
            for class in small_dirty {
                let class = self.find(class);
                let parents = self.classes[class as usize].as_ref().unwrap().parents.clone();
                for (node, parent_class) in parents {
                    let parent_class = self.find(parent_class);
                    let cand = self.make_small(&node.canonicalize(self));
                    let slot = self.classes[parent_class as usize].as_mut().unwrap();
                    if cand.0 < slot.small.0 || (cand.0 == slot.small.0 && cand.1 < slot.small.1) {
                        slot.small = cand;
                        self.small_dirty.push(parent_class);
                    }
                }
            }
        }
    }

    /// Insert a whole expression tree.
    pub fn add_expr(&mut self, e: &Expr) -> ClassId {
        let children: Vec<ClassId> = e.children().iter().map(|c| self.add_expr(c)).collect();
        let node = ENode { op: op_of(e), children };
        self.add(node).0
    }

    /// The class representing an expression, if it is already present.
    /// Does not create nodes.
    pub fn lookup_expr(&self, e: &Expr) -> Option<ClassId> {
        let mut children = Vec::with_capacity(e.children().len());
        for c in e.children() {
            children.push(self.lookup_expr(c)?);
        }
        let node = ENode { op: op_of(e), children }.canonicalize(self);
        self.memo.get(&node).map(|&id| self.find(id))
    }

    /// All distinct terms represented by a class, up to the given limits.
    /// Used by brute-force oracles.
    pub fn enumerate(&self, id: ClassId, max_depth: usize, cap: usize) -> Vec<Rc<Expr>> {
        fn go(
        eg: &EGraph,
            id: ClassId,
            depth: usize,
            cap: usize,
            visiting: &mut BTreeSet<ClassId>,
        ) -> Vec<Rc<Expr>> {
            if depth == 0 {
                return Vec::new();
            }
            let id = eg.find(id);
            if !visiting.insert(id) {
                return Vec::new();
            }
            let mut out: Vec<Rc<Expr>> = Vec::new();
            'nodes: for node in &eg.class(id).nodes {
                let mut parts: Vec<Vec<Rc<Expr>>> = Vec::with_capacity(node.children.len());
                for &c in &node.children {
                    let sub = go(eg, c, depth - 1, cap, visiting);
                    if sub.is_empty() {
                        continue 'nodes;
                    }
                    parts.push(sub);
                }
                let mut idx = vec![0usize; parts.len()];
                loop {
                    let children: Vec<Rc<Expr>> =
                        idx.iter().zip(&parts).map(|(i, p)| Rc::clone(&p[*i])).collect();
                    out.push(Rc::new(expr_of(&node.op, children)));
                    if out.len() >= cap {
                        break;
                    }
                    // advance the mixed-radix counter
                    let mut k = 0;
                    loop {
                        if k == idx.len() {
                            break;
                        }
                        idx[k] += 1;
                        if idx[k] < parts[k].len() {
                            break;
                        }
                        idx[k] = 0;
                        k += 1;
                    }
                    if k == idx.len() {
                        break;
                    }
                }
                if out.len() >= cap {
                    break;
                }
            }
            visiting.remove(&id);
            out.sort();
            out.dedup();
            out
        }
        go(self, id, max_depth, cap, &mut BTreeSet::new())
    }
}

pub fn op_of(e: &Expr) -> Op {
    match e {
        Expr::IntLit(i) => Op::IntLit(*i),
        Expr::RealLit(b) => Op::RealLit(*b),
        Expr::BoolLit(b) => Op::BoolLit(*b),
        Expr::Var(i) => Op::Var(*i),
        Expr::Global(n) => Op::Global(n.clone()),
        Expr::Add(..) => Op::Add,
        Expr::Mul(..) => Op::Mul,
        Expr::Sub(..) => Op::Sub,
        Expr::Div(..) => Op::Div,
        Expr::Mod(..) => Op::Mod,
        Expr::Unary(op, _) => Op::Unary(*op),
        Expr::Cmp(op, ..) => Op::Cmp(*op),
        Expr::DictSing(k, s, ..) => Op::DictSing(*k, *s),
        Expr::Lookup(..) => Op::Lookup,
        Expr::Range(..) => Op::Range,
        Expr::SubArray(..) => Op::SubArray,
        Expr::IfThen(..) => Op::IfThen,
        Expr::Let(..) => Op::Let,
        Expr::Sum(..) => Op::Sum,
        Expr::Merge(..) => Op::Merge,
    }
}

pub fn expr_of(op: &Op, mut children: Vec<Rc<Expr>>) -> Expr {
    let mut next = || children.remove(0);
    match op {
        Op::IntLit(i) => Expr::IntLit(*i),
        Op::RealLit(b) => Expr::RealLit(*b),
        Op::BoolLit(b) => Expr::BoolLit(*b),
        Op::Var(i) => Expr::Var(*i),
        Op::Global(n) => Expr::Global(n.clone()),
        Op::Add => Expr::Add(next(), next()),
        Op::Mul => Expr::Mul(next(), next()),
        Op::Sub => Expr::Sub(next(), next()),
        Op::Div => Expr::Div(next(), next()),
        Op::Mod => Expr::Mod(next(), next()),
        Op::Unary(u) => Expr::Unary(*u, next()),
        Op::Cmp(c) => Expr::Cmp(*c, next(), next()),
        Op::DictSing(k, s) => Expr::DictSing(*k, *s, next(), next()),
        Op::Lookup => Expr::Lookup(next(), next()),
        Op::Range => Expr::Range(next(), next()),
        Op::SubArray => Expr::SubArray(next(), next(), next()),
        Op::IfThen => Expr::IfThen(next(), next()),
        Op::Let => Expr::Let(next(), next()),
        Op::Sum => Expr::Sum(next(), next()),
        Op::Merge => Expr::Merge(next(), next(), next()),
    }
}

/// Binder count contributed by each child position of an operator.
pub fn op_binders(op: &Op) -> &'static [u32] {
    match op {
        Op::Let => &[0, 1],
        Op::Sum => &[0, 2],
        Op::Merge => &[0, 0, 3],
        Op::SubArray => &[0, 0, 0],
        Op::IntLit(_) | Op::RealLit(_) | Op::BoolLit(_) | Op::Var(_) | Op::Global(_) => &[],
        Op::Unary(_) => &[0],
        _ => &[0, 0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::*;

    #[test]
    fn hashcons_deduplicates() {
        let mut eg = EGraph::new();
        let a = eg.add_expr(&mul(global("a"), global("b")));
        let b = eg.add_expr(&mul(global("a"), global("b")));
        assert_eq!(a, b);
        assert_eq!(eg.node_count(), 3);
    }

    #[test]
    fn congruence_after_union() {
        // f(a) and f(b) merge when a = b
        let mut eg = EGraph::new();
        let fa = eg.add_expr(&lookup(global("f"), global("a")));
        let fb = eg.add_expr(&lookup(global("f"), global("b")));
        assert_ne!(eg.find(fa), eg.find(fb));
        let a = eg.add_expr(&global("a"));
        let b = eg.add_expr(&global("b"));
        eg.union(a, b);
        eg.rebuild();
        assert_eq!(eg.find(fa), eg.find(fb));
    }

    #[test]
    fn small_repr_improves_through_parents() {
        let mut eg = EGraph::new();
        let big = eg.add_expr(&mul(add(global("x"), int(0)), global("y")));
        let inner_big = eg.add_expr(&add(global("x"), int(0)));
        let inner_small = eg.add_expr(&global("x"));
        eg.union(inner_big, inner_small);
        eg.rebuild();
        assert_eq!(*eg.repr(big), *mul(global("x"), global("y")));
    }

    #[test]
    fn lookup_expr_finds_members_without_mutation() {
        let mut eg = EGraph::new();
        let root = eg.add_expr(&add(global("a"), global("b")));
        let nodes_before = eg.memo_count();
        assert_eq!(eg.lookup_expr(&add(global("a"), global("b"))), Some(eg.find(root)));
        assert_eq!(eg.lookup_expr(&mul(global("a"), global("b"))), None);
        assert_eq!(eg.memo_count(), nodes_before);
    }

    #[test]
    fn enumerate_lists_alternatives() {
        let mut eg = EGraph::new();
        let root = eg.add_expr(&add(global("a"), global("b")));
        let alt = eg.add_expr(&add(global("b"), global("a")));
        eg.union(root, alt);
        eg.rebuild();
        let terms = eg.enumerate(root, 5, 100);
        assert_eq!(terms.len(), 2);
    }
}
