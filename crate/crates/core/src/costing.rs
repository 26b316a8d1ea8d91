//! Structured cardinality estimation and physical cost estimation.
//!
//! Cardinalities follow the grammar `c ::= s | c[n] | #m`: a scalar, a
//! dictionary of estimated size `n` with element estimate `c`, or a static
//! integer `m` usable as a size. Costs combine per-node coefficients with
//! sizes taken from the cardinality of the collection being iterated.

use std::collections::BTreeMap;
use std::fmt;

use crate::expr::{CmpOp, Expr, StorageAttr};
use crate::storage::StorageCatalog;

/// Structured size estimate.
#[derive(Debug, Clone)]
pub enum Cardinality {
    Scalar,
    /// `elem[n]`
    Dict(f64, Box<Cardinality>),
    /// `#m`: an integer-valued expression whose value is usable as a size
    Static(f64),
}

impl Cardinality {
    /// Parse `n1[n2[...[s]...]]`, `s`, or `#m`.
    pub fn parse(text: &str) -> Option<Cardinality> {
        let t = text.trim();
        if t == "s" {
            return Some(Cardinality::Scalar);
        }
        if let Some(m) = t.strip_prefix('#') {
            return Some(Cardinality::Static(m.trim().parse().ok()?));
        }
        let open = t.find('[')?;
        if !t.ends_with(']') {
            return None;
        }
        let n: f64 = t[..open].trim().parse().ok()?;
        let inner = Cardinality::parse(&t[open + 1..t.len() - 1])?;
        Some(Cardinality::Dict(n, Box::new(inner)))
    }

    pub fn elem(&self) -> Cardinality {
        match self {
            Cardinality::Dict(_, e) => (**e).clone(),
            _ => Cardinality::Scalar,
        }
    }

    /// `size(e)`: collection size under this estimate. Scalars count as one
    /// element; statics carry their value.
    pub fn size(&self) -> f64 {
        match self {
            Cardinality::Dict(n, _) => *n,
            Cardinality::Static(m) => *m,
            Cardinality::Scalar => 1.0,
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Cardinality::Dict(_, e) => 1 + e.depth(),
            _ => 0,
        }
    }

    /// Uniform estimate for a tensor with unknown statistics.
    pub fn default_depth(depth: usize, default_size: f64) -> Cardinality {
        let mut c = Cardinality::Scalar;
        for _ in 0..depth {
            c = Cardinality::Dict(default_size, Box::new(c));
        }
        c
    }

    fn scale(&self, factor: f64) -> Cardinality {
        match self {
            Cardinality::Dict(n, e) => Cardinality::Dict(n * factor, e.clone()),
            other => other.clone(),
        }
    }
}

impl PartialEq for Cardinality {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Cardinality::Scalar, Cardinality::Scalar) => true,
            (Cardinality::Static(a), Cardinality::Static(b)) => a.to_bits() == b.to_bits(),
            (Cardinality::Dict(a, x), Cardinality::Dict(b, y)) => a.to_bits() == b.to_bits() && x == y,
            _ => false,
        }
    }
}

impl Eq for Cardinality {}

impl std::hash::Hash for Cardinality {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        match self {
            Cardinality::Scalar => 0u8.hash(state),
            Cardinality::Dict(n, e) => {
                1u8.hash(state);
                n.to_bits().hash(state);
                e.hash(state);
            }
            Cardinality::Static(m) => {
                2u8.hash(state);
                m.to_bits().hash(state);
            }
        }
    }
}

impl fmt::Display for Cardinality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn num(x: f64) -> String {
            if x == x.trunc() && x.is_finite() && x.abs() < 1e15 {
                format!("{}", x as i64)
            } else {
                format!("{}", x)
            }
        }
        match self {
            Cardinality::Scalar => write!(f, "s"),
            Cardinality::Dict(n, e) => write!(f, "{}[{}]", num(*n), e),
            Cardinality::Static(m) => write!(f, "#{}", num(*m)),
        }
    }
}

/// Collection kind for coefficient selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollKind {
    Dense,
    Hash,
    Trie,
}

/// Per-operation cost coefficients, keyed by collection kind where the
/// physical representation matters. Dense access is cheaper than hashed.
#[derive(Debug, Clone, PartialEq)]
pub struct CostCoefficients {
    pub lookup_dense: f64,
    pub lookup_hash: f64,
    pub lookup_trie: f64,
    pub iter_dense: f64,
    pub iter_hash: f64,
    pub iter_trie: f64,
    pub arr_insert: f64,
    pub hash_insert: f64,
    pub mater: f64,
}

impl Default for CostCoefficients {
    fn default() -> Self {
        CostCoefficients {
            lookup_dense: 1.0,
            lookup_hash: 4.0,
            lookup_trie: 4.0,
            iter_dense: 1.0,
            iter_hash: 2.0,
            iter_trie: 2.0,
            arr_insert: 1.0,
            hash_insert: 4.0,
            mater: 1.0,
        }
    }
}

impl CostCoefficients {
    pub fn lookup(&self, kind: CollKind) -> f64 {
        match kind {
            CollKind::Dense => self.lookup_dense,
            CollKind::Hash => self.lookup_hash,
            CollKind::Trie => self.lookup_trie,
        }
    }

    pub fn iter(&self, kind: CollKind) -> f64 {
        match kind {
            CollKind::Dense => self.iter_dense,
            CollKind::Hash => self.iter_hash,
            CollKind::Trie => self.iter_trie,
        }
    }

    /// Parse a `key = value` config file; unknown keys are errors.
    pub fn parse(text: &str) -> Result<CostCoefficients, String> {
        let mut c = CostCoefficients::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| format!("line {}: missing =", lineno + 1))?;
            let v: f64 = value.trim().parse().map_err(|_| format!("line {}: bad number", lineno + 1))?;
            match key.trim() {
                "gamma_lookup_dense" => c.lookup_dense = v,
                "gamma_lookup_hash" => c.lookup_hash = v,
                "gamma_lookup_trie" => c.lookup_trie = v,
                "gamma_iter_dense" => c.iter_dense = v,
                "gamma_iter_hash" => c.iter_hash = v,
                "gamma_iter_trie" => c.iter_trie = v,
                "gamma_arr_insert" => c.arr_insert = v,
                "gamma_hash_insert" => c.hash_insert = v,
                "gamma_mater" => c.mater = v,
                other => return Err(format!("line {}: unknown key {}", lineno + 1, other)),
            }
        }
        if c.lookup_dense > c.lookup_hash || c.iter_dense > c.iter_hash {
            return Err("dense access must not cost more than hashed access".into());
        }
        Ok(c)
    }
}

/// Statistics provider: per-tensor cardinalities plus defaults.
#[derive(Debug, Clone)]
pub struct Stats {
    pub cards: BTreeMap<String, Cardinality>,
    pub sel_default: f64,
    pub default_size: f64,
}

impl Default for Stats {
    fn default() -> Self {
        Stats { cards: BTreeMap::new(), sel_default: 0.1, default_size: 16.0 }
    }
}

impl Stats {
    /// Stats for a catalog: exact array lengths and hash/trie level counts
    /// for buffers, recorded tensor statistics, defaults elsewhere.
    pub fn from_catalog(catalog: &StorageCatalog) -> Stats {
        let mut cards = catalog.stats.clone();
        for (name, buf) in catalog.buffers() {
            let card = match buf {
                crate::storage::PhysicalBuffer::IntScalar(x) => Cardinality::Static(*x as f64),
                crate::storage::PhysicalBuffer::RealScalar(_) => Cardinality::Scalar,
                crate::storage::PhysicalBuffer::IntArray(v) => {
                    Cardinality::Dict(v.len() as f64, Box::new(Cardinality::Scalar))
                }
                crate::storage::PhysicalBuffer::RealArray(v) => {
                    Cardinality::Dict(v.len() as f64, Box::new(Cardinality::Scalar))
                }
                crate::storage::PhysicalBuffer::Hash { arity, entries, .. } => {
                    hash_card(*arity, entries.keys())
                }
                crate::storage::PhysicalBuffer::Trie { depth, root, .. } => trie_card(*depth, root),
            };
            cards.entry(name.clone()).or_insert(card);
        }
        Stats { cards, sel_default: catalog.sel_default, default_size: 16.0 }
    }

    fn global(&self, name: &str) -> Cardinality {
        self.cards.get(name).cloned().unwrap_or(Cardinality::Dict(
            self.default_size,
            Box::new(Cardinality::Scalar),
        ))
    }

    /// `sel(e)`: selectivity of a predicate.
    pub fn selectivity(&self, pred: &Expr) -> f64 {
        match pred {
            Expr::Cmp(CmpOp::And, a, b) => self.selectivity(a) * self.selectivity(b),
            Expr::Cmp(CmpOp::Or, a, b) => (self.selectivity(a) + self.selectivity(b)).min(1.0),
            Expr::BoolLit(true) => 1.0,
            Expr::BoolLit(false) => 0.0,
            _ => self.sel_default,
        }
    }
}

fn hash_card<'a>(arity: usize, keys: impl Iterator<Item = &'a Vec<i64>>) -> Cardinality {
    // nested distinct counts along the curried view
    let mut levels: Vec<std::collections::BTreeSet<Vec<i64>>> = vec![Default::default(); arity];
    let mut count = 0usize;
    for k in keys {
        count += 1;
        for d in 0..arity {
            levels[d].insert(k[..=d].to_vec());
        }
    }
    if count == 0 {
        return Cardinality::default_depth(arity, 0.0);
    }
    let mut card = Cardinality::Scalar;
    for d in (0..arity).rev() {
        let parents = if d == 0 { 1 } else { levels[d - 1].len() };
        let avg = levels[d].len() as f64 / parents as f64;
        card = Cardinality::Dict(avg, Box::new(card));
    }
    card
}

fn trie_card(depth: usize, root: &BTreeMap<i64, crate::storage::TrieNode>) -> Cardinality {
    use crate::storage::TrieNode;
    fn walk(m: &BTreeMap<i64, TrieNode>, level: usize, counts: &mut Vec<(usize, usize)>) {
        if counts.len() <= level {
            counts.push((0, 0));
        }
        counts[level].0 += 1;
        counts[level].1 += m.len();
        for node in m.values() {
            if let TrieNode::Map(sub) = node {
                walk(sub, level + 1, counts);
            }
        }
    }
    let mut counts = Vec::new();
    walk(root, 0, &mut counts);
    let mut card = Cardinality::Scalar;
    for level in (0..depth).rev() {
        let (parents, total) = counts.get(level).copied().unwrap_or((1, 0));
        let avg = if parents == 0 { 0.0 } else { total as f64 / parents as f64 };
        card = Cardinality::Dict(avg, Box::new(card));
    }
    card
}

/// Cardinality rules, applied bottom-up with an environment supplying the
/// estimates of bound variables.
pub fn estimate_card(e: &Expr, stats: &Stats) -> Cardinality {
    card_in(e, stats, &mut Vec::new())
}

pub fn card_in(e: &Expr, stats: &Stats, env: &mut Vec<Cardinality>) -> Cardinality {
    match e {
        Expr::IntLit(m) => Cardinality::Static(*m as f64),
        Expr::RealLit(_) | Expr::BoolLit(_) => Cardinality::Scalar,
        Expr::Var(i) => {
            let pos = env.len() as i64 - 1 - *i as i64;
            if pos < 0 {
                Cardinality::Scalar
            } else {
                env[pos as usize].clone()
            }
        }
        Expr::Global(n) => stats.global(n),
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            // element-wise arithmetic preserves the larger estimate
            let ca = card_in(a, stats, env);
            let cb = card_in(b, stats, env);
            if ca.size() >= cb.size() {
                ca
            } else {
                cb
            }
        }
        Expr::Mul(a, b) => {
            let ca = card_in(a, stats, env);
            let cb = card_in(b, stats, env);
            match (&ca, &cb) {
                (Cardinality::Dict(x, e1), Cardinality::Dict(y, _)) => {
                    Cardinality::Dict(x.min(*y), e1.clone())
                }
                (Cardinality::Dict(..), _) => ca,
                (_, Cardinality::Dict(..)) => cb,
                _ => Cardinality::Scalar,
            }
        }
        Expr::Div(..) | Expr::Mod(..) | Expr::Unary(..) | Expr::Cmp(..) => Cardinality::Scalar,
        Expr::DictSing(_, _, _, val) => {
            Cardinality::Dict(1.0, Box::new(card_in(val, stats, env)))
        }
        Expr::Lookup(d, _) => card_in(d, stats, env).elem(),
        Expr::Range(_, hi) => {
            let m = match card_in(hi, stats, env) {
                Cardinality::Static(m) => m,
                _ => stats.default_size,
            };
            Cardinality::Dict(m, Box::new(Cardinality::Scalar))
        }
        Expr::SubArray(d, lo, hi) => {
            let cd = card_in(d, stats, env);
            let n = segment_size(&cd, lo, hi, stats, env);
            Cardinality::Dict(n, Box::new(cd.elem()))
        }
        Expr::IfThen(c, b) => {
            let cb = card_in(b, stats, env);
            match cb {
                Cardinality::Scalar | Cardinality::Static(_) => cb,
                dict => dict.scale(stats.selectivity(c)),
            }
        }
        Expr::Let(bound, body) => {
            let cb = card_in(bound, stats, env);
            env.push(cb);
            let out = card_in(body, stats, env);
            env.pop();
            out
        }
        Expr::Sum(coll, body) => {
            let cc = card_in(coll, stats, env);
            let size = cc.size();
            env.push(Cardinality::Scalar); // key
            env.push(cc.elem()); // value
            let cb = card_in(body, stats, env);
            env.pop();
            env.pop();
            match cb {
                Cardinality::Scalar | Cardinality::Static(_) => Cardinality::Scalar,
                dict => dict.scale(size),
            }
        }
        Expr::Merge(c1, c2, body) => {
            let s1 = card_in(c1, stats, env).size();
            let s2 = card_in(c2, stats, env).size();
            env.push(Cardinality::Scalar);
            env.push(Cardinality::Scalar);
            env.push(Cardinality::Scalar);
            let cb = card_in(body, stats, env);
            env.pop();
            env.pop();
            env.pop();
            match cb {
                Cardinality::Scalar | Cardinality::Static(_) => Cardinality::Scalar,
                dict => dict.scale(s1.min(s2)),
            }
        }
    }
}

/// Average segment length of a subarray. A lookup pair `P(x) : P(x+1)`
/// divides the array among the `size(P) - 1` segments that `P` delimits.
fn segment_size(arr: &Cardinality, lo: &Expr, hi: &Expr, stats: &Stats, env: &mut Vec<Cardinality>) -> f64 {
    let total = arr.size();
    if let (Expr::Lookup(p1, _), Expr::Lookup(p2, _)) = (lo, hi) {
        if p1 == p2 {
            let segments = (card_in(p1, stats, env).size() - 1.0).max(1.0);
            return total / segments;
        }
    }
    total.min(stats.default_size)
}

/// Collection kind of an expression, judged from its physical head.
pub fn coll_kind(e: &Expr, catalog: Option<&StorageCatalog>) -> CollKind {
    match e {
        Expr::Range(..) | Expr::SubArray(..) => CollKind::Dense,
        Expr::DictSing(_, StorageAttr::Dense, _, _) => CollKind::Dense,
        Expr::DictSing(_, StorageAttr::Hash, _, _) => CollKind::Hash,
        Expr::Global(n) => match catalog.and_then(|c| c.buffer(n)) {
            Some(crate::storage::PhysicalBuffer::IntArray(_))
            | Some(crate::storage::PhysicalBuffer::RealArray(_)) => CollKind::Dense,
            Some(crate::storage::PhysicalBuffer::Trie { .. }) => CollKind::Trie,
            _ => CollKind::Hash,
        },
        Expr::IfThen(_, b) | Expr::Sum(_, b) | Expr::Let(_, b) => coll_kind(b, catalog),
        Expr::Add(a, _) | Expr::Mul(a, _) => coll_kind(a, catalog),
        Expr::Lookup(d, _) => coll_kind(d, catalog),
        _ => CollKind::Hash,
    }
}

/// How logical (unannotated) dictionary constructors are priced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogicalDictCost {
    /// Planning stage that ignores storage: price them like hash inserts.
    AsHash,
    /// Physical stage: unannotated dictionaries are not executable.
    Infinite,
}

pub struct CostModel<'a> {
    pub stats: &'a Stats,
    pub coeffs: &'a CostCoefficients,
    pub catalog: Option<&'a StorageCatalog>,
    pub logical_dicts: LogicalDictCost,
}

/// Cost rules over a concrete expression tree. The environment parallels
/// `card_in`'s and carries the binder estimates.
pub fn estimate_cost(e: &Expr, model: &CostModel) -> f64 {
    cost_in(e, model, &mut Vec::new())
}

pub fn cost_in(e: &Expr, model: &CostModel, env: &mut Vec<Cardinality>) -> f64 {
    match e {
        Expr::IntLit(_) | Expr::RealLit(_) | Expr::BoolLit(_) | Expr::Global(_) => 0.0,
        Expr::Var(_) => 1.0,
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
            let ca = card_in(a, model.stats, env);
            let cb = card_in(b, model.stats, env);
            if matches!(ca, Cardinality::Dict(..)) || matches!(cb, Cardinality::Dict(..)) {
                // element-wise dictionary arithmetic must be rewritten into
                // loops before execution
                return f64::INFINITY;
            }
            cost_in(a, model, env) + cost_in(b, model, env) + 1.0
        }
        Expr::Div(a, b) | Expr::Mod(a, b) => cost_in(a, model, env) + cost_in(b, model, env) + 1.0,
        Expr::Unary(_, a) => cost_in(a, model, env) + 1.0,
        Expr::Cmp(_, a, b) => cost_in(a, model, env) + cost_in(b, model, env) + 1.0,
        Expr::DictSing(_, attr, key, val) => {
            let base = cost_in(key, model, env) + cost_in(val, model, env);
            match attr {
                StorageAttr::Dense => base + model.coeffs.arr_insert,
                StorageAttr::Hash => base + model.coeffs.hash_insert,
                StorageAttr::Logical => match model.logical_dicts {
                    LogicalDictCost::AsHash => base + model.coeffs.hash_insert,
                    LogicalDictCost::Infinite => f64::INFINITY,
                },
            }
        }
        Expr::Lookup(d, k) => {
            let kind = coll_kind(d, model.catalog);
            cost_in(d, model, env) + cost_in(k, model, env) + model.coeffs.lookup(kind)
        }
        Expr::Range(lo, hi) => cost_in(lo, model, env) + cost_in(hi, model, env) + 1.0,
        Expr::SubArray(d, lo, hi) => {
            cost_in(d, model, env) + cost_in(lo, model, env) + cost_in(hi, model, env) + 1.0
        }
        Expr::IfThen(c, b) => {
            cost_in(c, model, env) + model.stats.selectivity(c) * cost_in(b, model, env)
        }
        Expr::Let(bound, body) => {
            let cost_bound = cost_in(bound, model, env);
            let cb = card_in(bound, model.stats, env);
            env.push(cb);
            let cost_body = cost_in(body, model, env);
            env.pop();
            model.coeffs.mater * cost_bound + cost_body
        }
        Expr::Sum(coll, body) => {
            let kind = coll_kind(coll, model.catalog);
            let cc = card_in(coll, model.stats, env);
            let size = cc.size();
            let cost_coll = cost_in(coll, model, env);
            env.push(Cardinality::Scalar);
            env.push(cc.elem());
            let cost_body = cost_in(body, model, env);
            env.pop();
            env.pop();
            cost_coll + model.coeffs.iter(kind) * size * cost_body
        }
        Expr::Merge(c1, c2, body) => {
            let k1 = coll_kind(c1, model.catalog);
            let k2 = coll_kind(c2, model.catalog);
            let s1 = card_in(c1, model.stats, env).size();
            let s2 = card_in(c2, model.stats, env).size();
            let cost1 = cost_in(c1, model, env);
            let cost2 = cost_in(c2, model, env);
            env.push(Cardinality::Scalar);
            env.push(Cardinality::Scalar);
            env.push(Cardinality::Scalar);
            let cost_body = cost_in(body, model, env);
            env.pop();
            env.pop();
            env.pop();
            cost1 + cost2 + (model.coeffs.iter(k1) * s1 + model.coeffs.iter(k2) * s2) * cost_body
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::*;

    fn stats_with(name: &str, card: &str) -> Stats {
        let mut s = Stats::default();
        s.cards.insert(name.into(), Cardinality::parse(card).unwrap());
        s
    }

    #[test]
    fn parse_and_display() {
        for text in ["s", "1000[s]", "2[2.5[s]]", "#8", "100[10[50[s]]]"] {
            assert_eq!(Cardinality::parse(text).unwrap().to_string(), text);
        }
    }

    #[test]
    fn worked_example_filter_sum() {
        // sum(<i,v> in A) if (v==25) then {i -> i*3} with card(A)=1000[s], sel=0.02
        let mut stats = stats_with("A", "1000[s]");
        stats.sel_default = 0.02;
        let body = if_then(cmp(CmpOp::Eq, var(0), int(25)), dict(var(1), mul(var(1), int(3))));
        let e = sum(global("A"), body);
        assert_eq!(estimate_card(&e, &stats).to_string(), "20[s]");
    }

    #[test]
    fn singleton_card() {
        let stats = Stats::default();
        assert_eq!(estimate_card(&dict(global("k"), int(7)), &stats).to_string(), "1[#7]");
        let e = dict(global("k"), mul(var(9), var(9)));
        assert_eq!(estimate_card(&e, &stats).to_string(), "1[s]");
    }

    #[test]
    fn range_card_from_static() {
        let stats = Stats::default();
        assert_eq!(estimate_card(&Expr::Range(int(0), int(8)), &stats).to_string(), "8[s]");
    }

    #[test]
    fn sum_cost_rule() {
        // sum(<k,v> in A) v with size(A)=10: cost(A) + iter_hash*10*cost(v) = 2*10*1
        let stats = stats_with("A", "10[s]");
        let coeffs = CostCoefficients::default();
        let model = CostModel {
            stats: &stats,
            coeffs: &coeffs,
            catalog: None,
            logical_dicts: LogicalDictCost::Infinite,
        };
        let e = sum(global("A"), var(0));
        assert_eq!(estimate_cost(&e, &model), 20.0);
    }

    #[test]
    fn merge_cost_rule() {
        // sizes 5 and 7, unit iteration cost, body cost 1 => 12
        let mut stats = stats_with("A", "5[s]");
        stats.cards.insert("B".into(), Cardinality::parse("7[s]").unwrap());
        let mut coeffs = CostCoefficients::default();
        coeffs.iter_hash = 1.0;
        coeffs.iter_dense = 1.0;
        let model = CostModel {
            stats: &stats,
            coeffs: &coeffs,
            catalog: None,
            logical_dicts: LogicalDictCost::Infinite,
        };
        let e = Expr::Merge(global("A"), global("B"), var(0));
        assert_eq!(estimate_cost(&e, &model), 12.0);
    }

    #[test]
    fn logical_dict_costs_infinity() {
        let stats = Stats::default();
        let coeffs = CostCoefficients::default();
        let model = CostModel {
            stats: &stats,
            coeffs: &coeffs,
            catalog: None,
            logical_dicts: LogicalDictCost::Infinite,
        };
        assert_eq!(estimate_cost(&dict(int(1), int(2)), &model), f64::INFINITY);
        let dense = Expr::DictSing(KeyAttr::None, StorageAttr::Dense, int(1), int(2));
        assert!(estimate_cost(&dense, &model).is_finite());
    }

    #[test]
    fn coefficient_file_round_trip() {
        let parsed = CostCoefficients::parse("gamma_iter_dense = 1\ngamma_iter_hash = 3\n# comment\n").unwrap();
        assert_eq!(parsed.iter_hash, 3.0);
        assert!(CostCoefficients::parse("gamma_bogus = 1").is_err());
        assert!(CostCoefficients::parse("gamma_lookup_dense = 9").is_err());
    }
}
