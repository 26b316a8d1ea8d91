//! Cheapest-plan extraction from a saturated e-graph.
//!
//! The estimate of a term depends on the cardinalities bound to enclosing
//! binders (iterating a looked-up row costs per its row length, not per a
//! global default), so extraction runs top-down carrying a binder
//! environment, memoized per (class, environment). Cycles through the
//! e-graph are resolved by a bounded fixed point: each round may only
//! lower a class's best cost, and rounds repeat until nothing improves.

use std::collections::HashMap;
use std::rc::Rc;

use crate::costing::{card_in, coll_kind, CollKind, CostModel, Cardinality};
use crate::expr::Expr;

use super::egraph::{expr_of, op_binders, ClassId, EGraph, Op};

type Env = Vec<Cardinality>;

#[derive(Clone)]
struct Best {
    cost: f64,
    size: u32,
    expr: Rc<Expr>,
}

struct Extractor<'a> {
    eg: &'a EGraph,
    model: &'a CostModel<'a>,
    memo: HashMap<(ClassId, Env), Option<Best>>,
    /// keys finalized in the current round; avoids recomputation
    done: std::collections::HashSet<(ClassId, Env)>,
    changed: bool,
}

impl<'a> Extractor<'a> {
    fn better(a: &Best, b: &Best) -> bool {
        // strict improvement ordering with deterministic tie-breaks
        if a.cost != b.cost {
            return a.cost < b.cost;
        }
        if a.size != b.size {
            return a.size < b.size;
        }
        a.expr.to_string() < b.expr.to_string()
    }

    fn best(&mut self, class: ClassId, env: &Env, visiting: &mut Vec<(ClassId, Env)>) -> Option<Best> {
        // self-referential classes (`e = sum(<k,v> in e) {k -> v}`) grow the
        // environment without ever repeating a (class, env) key; no useful
        // plan nests deeper than this
        if env.len() > 48 {
            return None;
        }
        let class = self.eg.find(class);
        let key = (class, env.clone());
        if self.done.contains(&key) || visiting.contains(&key) {
            // finished this round, or re-entered through a cycle: use the
            // best estimate so far
            return self.memo.get(&key).cloned().flatten();
        }
        visiting.push(key.clone());
        let mut best: Option<Best> = None;
        for node in &self.eg.class(class).nodes {
            if let Some(cand) = self.cost_node(&node.op, &node.children, env, visiting) {
                if cand.cost.is_finite() && best.as_ref().map_or(true, |b| Self::better(&cand, b)) {
                    best = Some(cand);
                }
            }
        }
        visiting.pop();
        let prev = self.memo.get(&key).cloned().flatten();
        let improved = match (&prev, &best) {
            (None, Some(_)) => true,
            (Some(p), Some(b)) => Self::better(b, p),
            _ => false,
        };
        let out = if improved {
            self.memo.insert(key.clone(), best.clone());
            self.changed = true;
            best
        } else {
            self.memo.insert(key.clone(), prev.clone());
            prev
        };
        self.done.insert(key);
        out
    }

    fn cost_node(
        &mut self,
        op: &Op,
        children: &[ClassId],
        env: &Env,
        visiting: &mut Vec<(ClassId, Env)>,
    ) -> Option<Best> {
        let coeffs = self.model.coeffs;
        let stats = self.model.stats;

        // leaves
        match op {
            Op::IntLit(_) | Op::RealLit(_) | Op::BoolLit(_) | Op::Global(_) => {
                return Some(Best { cost: 0.0, size: 1, expr: Rc::new(expr_of(op, vec![])) });
            }
            Op::Var(_) => {
                return Some(Best { cost: 1.0, size: 1, expr: Rc::new(expr_of(op, vec![])) });
            }
            _ => {}
        }

        let binders = op_binders(op);
        debug_assert_eq!(binders.len(), children.len());
        let mut parts: Vec<Best> = Vec::with_capacity(children.len());
        for (i, &child) in children.iter().enumerate() {
            // binder children see an extended environment derived from the
            // already-chosen collection child
            let extended: Env = match (op, i) {
                (Op::Let, 1) => {
                    let bound_card = self.card_of_expr(&parts[0].expr, env);
                    push_env(env, &[bound_card])
                }
                (Op::Sum, 1) => {
                    let coll_card = self.card_of_expr(&parts[0].expr, env);
                    push_env(env, &[Cardinality::Scalar, coll_card.elem()])
                }
                (Op::Merge, 2) => push_env(
                    env,
                    &[Cardinality::Scalar, Cardinality::Scalar, Cardinality::Scalar],
                ),
                _ => env.clone(),
            };
            let b = self.best(child, &extended, visiting)?;
            parts.push(b);
        }

        let child_cost = |i: usize| parts[i].cost;
        let child_card = |me: &mut Self, i: usize, env_for: &Env| me.card_of_expr(&parts[i].expr, env_for);

        let cost = match op {
            Op::Add | Op::Mul | Op::Sub => {
                let ca = child_card(self, 0, env);
                let cb = child_card(self, 1, env);
                if matches!(ca, Cardinality::Dict(..)) || matches!(cb, Cardinality::Dict(..)) {
                    f64::INFINITY
                } else {
                    child_cost(0) + child_cost(1) + 1.0
                }
            }
            Op::Div | Op::Mod | Op::Cmp(_) => child_cost(0) + child_cost(1) + 1.0,
            Op::Unary(_) => child_cost(0) + 1.0,
            Op::DictSing(_, attr) => {
                let base = child_cost(0) + child_cost(1);
                match attr {
                    crate::expr::StorageAttr::Dense => base + coeffs.arr_insert,
                    crate::expr::StorageAttr::Hash => base + coeffs.hash_insert,
                    crate::expr::StorageAttr::Logical => match self.model.logical_dicts {
                        crate::costing::LogicalDictCost::AsHash => base + coeffs.hash_insert,
                        crate::costing::LogicalDictCost::Infinite => f64::INFINITY,
                    },
                }
            }
            Op::Lookup => {
                let kind = self.kind_of(&parts[0].expr);
                child_cost(0) + child_cost(1) + coeffs.lookup(kind)
            }
            Op::Range => child_cost(0) + child_cost(1) + 1.0,
            Op::SubArray => child_cost(0) + child_cost(1) + child_cost(2) + 1.0,
            Op::IfThen => {
                let sel = stats.selectivity(&parts[0].expr);
                child_cost(0) + sel * child_cost(1)
            }
            Op::Let => coeffs.mater * child_cost(0) + child_cost(1),
            Op::Sum => {
                let kind = self.kind_of(&parts[0].expr);
                let size = child_card(self, 0, env).size();
                child_cost(0) + coeffs.iter(kind) * size * child_cost(1)
            }
            Op::Merge => {
                let k1 = self.kind_of(&parts[0].expr);
                let k2 = self.kind_of(&parts[1].expr);
                let s1 = child_card(self, 0, env).size();
                let s2 = child_card(self, 1, env).size();
                child_cost(0)
                    + child_cost(1)
                    + (coeffs.iter(k1) * s1 + coeffs.iter(k2) * s2) * child_cost(2)
            }
            Op::IntLit(_) | Op::RealLit(_) | Op::BoolLit(_) | Op::Var(_) | Op::Global(_) => unreachable!(),
        };

        let size = parts.iter().fold(1u32, |acc, p| acc.saturating_add(p.size));
        let expr = Rc::new(expr_of(op, parts.into_iter().map(|p| p.expr).collect()));
        Some(Best { cost, size, expr })
    }

    fn card_of_expr(&self, e: &Expr, env: &Env) -> Cardinality {
        let mut env = env.clone();
        card_in(e, self.model.stats, &mut env)
    }

    fn kind_of(&self, e: &Expr) -> CollKind {
        coll_kind(e, self.model.catalog)
    }
}

fn push_env(env: &Env, extra: &[Cardinality]) -> Env {
    let mut out = env.clone();
    out.extend_from_slice(extra);
    out
}

/// Cheapest finite-cost representative of the root class, with its cost.
pub fn extract_best(eg: &EGraph, root: ClassId, model: &CostModel) -> Option<(Rc<Expr>, f64)> {
    let mut ex = Extractor { eg, model, memo: HashMap::new(), done: Default::default(), changed: true };
    let max_rounds = eg.node_count().max(4);
    let mut result = None;
    for _ in 0..max_rounds {
        ex.changed = false;
        ex.done.clear();
        result = ex.best(root, &Vec::new(), &mut Vec::new());
        if !ex.changed {
            break;
        }
    }
    result.map(|b| (b.expr, b.cost))
}
