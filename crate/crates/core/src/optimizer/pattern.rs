//! Pattern matching over the e-graph (e-matching).

use super::egraph::{ClassId, EGraph, ENode, Op};

pub const MAX_PVARS: usize = 6;

/// A pattern: operators with pattern variables at the leaves. Pattern
/// variables bind whole e-classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pat {
    /// pattern variable 0..MAX_PVARS
    V(u8),
    N(Op, Vec<Pat>),
    /// matches the integer or real zero literal; search-only
    AnyZero,
    /// matches the integer or real one literal; search-only
    AnyOne,
}

pub type Subst = [Option<ClassId>; MAX_PVARS];

impl Pat {
    /// All substitutions under which this pattern matches the class.
    pub fn match_class(&self, eg: &EGraph, class: ClassId, subst: Subst) -> Vec<Subst> {
        let class = eg.find(class);
        match self {
            Pat::V(v) => {
                let v = *v as usize;
                match subst[v] {
                    Some(bound) if eg.find(bound) == class => vec![subst],
                    Some(_) => Vec::new(),
                    None => {
                        let mut s = subst;
                        s[v] = Some(class);
                        vec![s]
                    }
                }
            }
            Pat::N(op, kids) => {
                let mut out = Vec::new();
                for node in &eg.class(class).nodes {
                    if node.op != *op || node.children.len() != kids.len() {
                        continue;
                    }
                    out.extend(match_children(eg, kids, &node.children, subst));
                }
                out
            }
            Pat::AnyZero => {
                let hit = eg.class(class).nodes.iter().any(|n| {
                    matches!(n.op, Op::IntLit(0)) || n.op == Op::RealLit(0f64.to_bits())
                });
                if hit {
                    vec![subst]
                } else {
                    Vec::new()
                }
            }
            Pat::AnyOne => {
                let hit = eg.class(class).nodes.iter().any(|n| {
                    matches!(n.op, Op::IntLit(1)) || n.op == Op::RealLit(1f64.to_bits())
                });
                if hit {
                    vec![subst]
                } else {
                    Vec::new()
                }
            }
        }
    }

    /// Match against every class; results are (class, substitution) pairs in
    /// ascending class order with duplicates removed.
    pub fn search(&self, eg: &EGraph) -> Vec<(ClassId, Subst)> {
        let mut out = Vec::new();
        for class in eg.class_ids() {
            let mut matches = self.match_class(eg, class, [None; MAX_PVARS]);
            matches.sort();
            matches.dedup();
            out.extend(matches.into_iter().map(|s| (class, s)));
        }
        out
    }

    /// Instantiate the pattern, adding nodes to the graph. Pattern variables
    /// must be bound. Returns (class, any_node_was_new).
    pub fn instantiate(&self, eg: &mut EGraph, subst: &Subst) -> (ClassId, bool) {
        match self {
            Pat::V(v) => (subst[*v as usize].expect("unbound pattern variable in template"), false),
            Pat::AnyZero | Pat::AnyOne => panic!("literal matchers cannot appear in templates"),
            Pat::N(op, kids) => {
                let mut changed = false;
                let mut children = Vec::with_capacity(kids.len());
                for k in kids {
                    let (c, ch) = k.instantiate(eg, subst);
                    children.push(c);
                    changed |= ch;
                }
                let (id, new) = eg.add(ENode { op: op.clone(), children });
                (id, changed || new)
            }
        }
    }
}

fn match_children(eg: &EGraph, pats: &[Pat], classes: &[ClassId], subst: Subst) -> Vec<Subst> {
    if pats.is_empty() {
        return vec![subst];
    }
    let mut out = Vec::new();
    for s in pats[0].match_class(eg, classes[0], subst) {
        out.extend(match_children(eg, &pats[1..], &classes[1..], s));
    }
    out
}

// Small constructors to keep rule definitions readable.
pub fn pv(v: u8) -> Pat {
    Pat::V(v)
}
pub fn pn(op: Op, kids: Vec<Pat>) -> Pat {
    Pat::N(op, kids)
}
pub fn padd(a: Pat, b: Pat) -> Pat {
    pn(Op::Add, vec![a, b])
}
pub fn pmul(a: Pat, b: Pat) -> Pat {
    pn(Op::Mul, vec![a, b])
}
pub fn psub(a: Pat, b: Pat) -> Pat {
    pn(Op::Sub, vec![a, b])
}
pub fn psum(coll: Pat, body: Pat) -> Pat {
    pn(Op::Sum, vec![coll, body])
}
pub fn plet(bound: Pat, body: Pat) -> Pat {
    pn(Op::Let, vec![bound, body])
}
pub fn pif(c: Pat, b: Pat) -> Pat {
    pn(Op::IfThen, vec![c, b])
}
pub fn plookup(d: Pat, k: Pat) -> Pat {
    pn(Op::Lookup, vec![d, k])
}
pub fn pdict(key: Pat, val: Pat) -> Pat {
    use crate::expr::{KeyAttr, StorageAttr};
    pn(Op::DictSing(KeyAttr::None, StorageAttr::Logical), vec![key, val])
}
pub fn pdict_uniq(key: Pat, val: Pat) -> Pat {
    use crate::expr::{KeyAttr, StorageAttr};
    pn(Op::DictSing(KeyAttr::Unique, StorageAttr::Logical), vec![key, val])
}
pub fn pvar_idx(i: u32) -> Pat {
    pn(Op::Var(i), vec![])
}
pub fn pint(i: i64) -> Pat {
    pn(Op::IntLit(i), vec![])
}
pub fn peq(a: Pat, b: Pat) -> Pat {
    pn(Op::Cmp(crate::expr::CmpOp::Eq), vec![a, b])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::*;

    #[test]
    fn matches_with_repeated_variable() {
        let mut eg = EGraph::new();
        let same = eg.add_expr(&sub(global("a"), global("a")));
        let diff = eg.add_expr(&sub(global("a"), global("b")));
        let pat = psub(pv(0), pv(0));
        assert_eq!(pat.match_class(&eg, same, [None; MAX_PVARS]).len(), 1);
        assert_eq!(pat.match_class(&eg, diff, [None; MAX_PVARS]).len(), 0);
    }

    #[test]
    fn search_finds_nested_matches() {
        let mut eg = EGraph::new();
        eg.add_expr(&mul(global("x"), mul(global("y"), global("z"))));
        let pat = pmul(pv(0), pv(1));
        assert_eq!(pat.search(&eg).len(), 2);
    }

    fn sub(a: std::rc::Rc<Expr>, b: std::rc::Rc<Expr>) -> std::rc::Rc<Expr> {
        Expr::Sub(a, b).rc()
    }
}
