//! Physical-plan lowering and execution over the storage catalog.
//!
//! Execution never materializes a collection just to iterate it: buffers,
//! buffer slices, and index ranges stay lazy views, which is what makes a
//! fused plan cheaper than the naive one. Constructed dictionaries
//! accumulate into ordered maps regardless of their `@dense`/`@hash`
//! annotation (the annotation drives the cost model and the counter
//! labels); results are therefore already in canonical ordered form.

use std::collections::BTreeMap;
use std::rc::Rc;

use crate::error::{EngineError, EvalError};
use crate::expr::{CmpOp, Expr, StorageAttr, UnaryOp};
use crate::interp::OpCounters;
use crate::storage::{PhysicalBuffer, StorageCatalog, TrieNode};
use crate::value::{value_add, value_mul, value_neg, Value};

/// Loop and lookup flavors, recorded during lowering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopKind {
    Dense,
    Hash,
    Trie,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertKind {
    Dense,
    Hash,
}

/// A physical operator tree. Every node keeps the expression it was
/// lowered from.
#[derive(Debug, Clone)]
pub struct PhysicalPlan {
    pub op: PhysOp,
    pub children: Vec<PhysicalPlan>,
    pub source: Rc<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PhysOp {
    ConstInt(i64),
    ConstReal(f64),
    ConstBool(bool),
    VarRef(u32),
    BufRef(String),
    Add,
    Mul,
    Sub,
    Div,
    Mod,
    Unary(UnaryOp),
    Cmp(CmpOp),
    /// dictionary-entry construction feeding an accumulator
    Insert(InsertKind),
    ArrayLookup,
    HashLookup,
    Slice,
    RangeScan,
    IfGuard,
    /// `let`: materialize once, then run the body
    Materialize,
    ForLoop(LoopKind),
    SortedMerge,
    /// fallback when an input stream is not provably sorted
    HashProbeMerge,
}

/// Lower a finite-cost physical expression. Rejects logical dictionaries
/// and dictionary-level arithmetic that never got rewritten into loops.
pub fn lower(e: &Rc<Expr>, catalog: &StorageCatalog) -> Result<PhysicalPlan, EngineError> {
    let op = match &**e {
        Expr::IntLit(i) => PhysOp::ConstInt(*i),
        Expr::RealLit(b) => PhysOp::ConstReal(f64::from_bits(*b)),
        Expr::BoolLit(b) => PhysOp::ConstBool(*b),
        Expr::Var(i) => PhysOp::VarRef(*i),
        Expr::Global(n) => PhysOp::BufRef(n.clone()),
        Expr::Add(..) => PhysOp::Add,
        Expr::Mul(..) => PhysOp::Mul,
        Expr::Sub(..) => PhysOp::Sub,
        Expr::Div(..) => PhysOp::Div,
        Expr::Mod(..) => PhysOp::Mod,
        Expr::Unary(u, _) => PhysOp::Unary(*u),
        Expr::Cmp(c, ..) => PhysOp::Cmp(*c),
        Expr::DictSing(_, StorageAttr::Logical, ..) => {
            return Err(EngineError::LoweringError(e.to_string()));
        }
        Expr::DictSing(_, StorageAttr::Dense, ..) => PhysOp::Insert(InsertKind::Dense),
        Expr::DictSing(_, StorageAttr::Hash, ..) => PhysOp::Insert(InsertKind::Hash),
        Expr::Lookup(base, _) => match buffer_kind(base, catalog) {
            Some(LoopKind::Dense) => PhysOp::ArrayLookup,
            _ => PhysOp::HashLookup,
        },
        Expr::Range(..) => PhysOp::RangeScan,
        Expr::SubArray(..) => PhysOp::Slice,
        Expr::IfThen(..) => PhysOp::IfGuard,
        Expr::Let(..) => PhysOp::Materialize,
        Expr::Sum(coll, _) => PhysOp::ForLoop(loop_kind(coll, catalog)),
        Expr::Merge(c1, c2, _) => {
            if sorted_stream(c1, catalog) && sorted_stream(c2, catalog) {
                PhysOp::SortedMerge
            } else {
                PhysOp::HashProbeMerge
            }
        }
    };
    let children = e
        .children()
        .iter()
        .map(|c| lower(c, catalog))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PhysicalPlan { op, children, source: Rc::clone(e) })
}

fn buffer_kind(e: &Expr, catalog: &StorageCatalog) -> Option<LoopKind> {
    match e {
        Expr::Global(n) => match catalog.buffer(n) {
            Some(PhysicalBuffer::IntArray(_)) | Some(PhysicalBuffer::RealArray(_)) => Some(LoopKind::Dense),
            Some(PhysicalBuffer::Hash { .. }) => Some(LoopKind::Hash),
            Some(PhysicalBuffer::Trie { .. }) => Some(LoopKind::Trie),
            _ => None,
        },
        Expr::SubArray(base, ..) => buffer_kind(base, catalog),
        _ => None,
    }
}

fn loop_kind(coll: &Expr, catalog: &StorageCatalog) -> LoopKind {
    match coll {
        Expr::Range(..) | Expr::SubArray(..) => LoopKind::Dense,
        Expr::Global(_) => buffer_kind(coll, catalog).unwrap_or(LoopKind::Hash),
        Expr::DictSing(_, StorageAttr::Dense, ..) => LoopKind::Dense,
        _ => LoopKind::Hash,
    }
}

/// Streams whose iteration order is ascending by value: array slices and
/// ranges. Formats keep idx segments sorted, so their slices qualify.
fn sorted_stream(e: &Expr, catalog: &StorageCatalog) -> bool {
    match e {
        Expr::Range(..) => true,
        Expr::SubArray(base, ..) => matches!(buffer_kind(base, catalog), Some(LoopKind::Dense)),
        Expr::Global(_) => matches!(buffer_kind(e, catalog), Some(LoopKind::Dense)),
        _ => false,
    }
}

/// Runtime value: either materialized or a lazy view over a buffer.
#[derive(Debug, Clone)]
enum Rt {
    Val(Value),
    Buf(String),
    Slice(String, i64, i64),
    Rng(i64, i64),
}

impl Rt {
    fn is_zero(&self) -> bool {
        match self {
            Rt::Val(v) => v.is_zero(),
            Rt::Rng(lo, hi) => hi <= lo,
            Rt::Slice(_, lo, hi) => hi <= lo,
            Rt::Buf(_) => false,
        }
    }
}

struct Exec<'a> {
    catalog: &'a StorageCatalog,
    env: Vec<Rt>,
    ops: OpCounters,
}

/// Execute a lowered plan, producing the canonical value and the counters.
pub fn execute(plan: &PhysicalPlan, catalog: &StorageCatalog) -> Result<(Value, OpCounters), EngineError> {
    let mut exec = Exec { catalog, env: Vec::new(), ops: OpCounters::default() };
    let rt = exec.run(plan)?;
    let v = exec.materialize(rt)?;
    Ok((v, exec.ops))
}

impl<'a> Exec<'a> {
    fn buffer(&self, name: &str) -> Result<&'a PhysicalBuffer, EngineError> {
        self.catalog.buffer(name).ok_or_else(|| EvalError::UnknownGlobal(name.to_string()).into())
    }

    fn materialize(&self, rt: Rt) -> Result<Value, EngineError> {
        Ok(match rt {
            Rt::Val(v) => v,
            Rt::Buf(name) => self.buffer(&name)?.to_value(),
            Rt::Slice(name, lo, hi) => {
                let mut m = BTreeMap::new();
                for i in lo..hi {
                    m.insert(i, self.array_get(&name, i)?);
                }
                Value::Dict(m)
            }
            Rt::Rng(lo, hi) => Value::Dict((lo..hi).map(|i| (i, Value::Int(i))).collect()),
        })
    }

    fn array_get(&self, name: &str, i: i64) -> Result<Value, EngineError> {
        match self.buffer(name)? {
            PhysicalBuffer::IntArray(v) => v
                .get(usize::try_from(i).ok().filter(|x| *x < v.len()).ok_or_else(|| {
                    EngineError::RuntimeBoundsError(format!("{}({}) with length {}", name, i, v.len()))
                })?)
                .copied()
                .map(Value::Int)
                .ok_or_else(|| EngineError::RuntimeBoundsError(name.to_string())),
            PhysicalBuffer::RealArray(v) => v
                .get(usize::try_from(i).ok().filter(|x| *x < v.len()).ok_or_else(|| {
                    EngineError::RuntimeBoundsError(format!("{}({}) with length {}", name, i, v.len()))
                })?)
                .copied()
                .map(Value::Real)
                .ok_or_else(|| EngineError::RuntimeBoundsError(name.to_string())),
            _ => Err(EngineError::LoweringError(format!("{} is not an array", name))),
        }
    }

    fn scalar(&mut self, plan: &PhysicalPlan) -> Result<Value, EngineError> {
        let rt = self.run(plan)?;
        self.materialize(rt)
    }

    fn int(&mut self, plan: &PhysicalPlan) -> Result<i64, EngineError> {
        Ok(self.scalar(plan)?.as_int()?)
    }

    fn run(&mut self, plan: &PhysicalPlan) -> Result<Rt, EngineError> {
        match &plan.op {
            PhysOp::ConstInt(i) => Ok(Rt::Val(Value::Int(*i))),
            PhysOp::ConstReal(x) => Ok(Rt::Val(Value::Real(*x))),
            PhysOp::ConstBool(b) => Ok(Rt::Val(Value::Bool(*b))),
            PhysOp::VarRef(i) => {
                let pos = self.env.len() as i64 - 1 - *i as i64;
                if pos < 0 {
                    return Err(EvalError::DanglingVariable(*i).into());
                }
                Ok(self.env[pos as usize].clone())
            }
            PhysOp::BufRef(n) => {
                if self.catalog.buffer(n).is_some() {
                    Ok(Rt::Buf(n.clone()))
                } else {
                    Err(EvalError::UnknownGlobal(n.clone()).into())
                }
            }
            PhysOp::Add | PhysOp::Sub => {
                let a = self.scalar(&plan.children[0])?;
                let b = self.scalar(&plan.children[1])?;
                count_addition(&a, &b, &mut self.ops);
                let v = if matches!(plan.op, PhysOp::Add) {
                    value_add(&a, &b)
                } else {
                    crate::value::value_sub(&a, &b)
                };
                Ok(Rt::Val(v.map_err(EngineError::Eval)?))
            }
            PhysOp::Mul => {
                let a = self.scalar(&plan.children[0])?;
                if a.is_zero() {
                    return Ok(Rt::Val(Value::zero()));
                }
                let b = self.scalar(&plan.children[1])?;
                if matches!(a, Value::Real(_)) || matches!(b, Value::Real(_)) {
                    self.ops.mults += 1;
                }
                Ok(Rt::Val(value_mul(&a, &b).map_err(EngineError::Eval)?))
            }
            PhysOp::Div => {
                let a = self.scalar(&plan.children[0])?;
                let b = self.scalar(&plan.children[1])?;
                match (&a, &b) {
                    (Value::Int(x), Value::Int(y)) => {
                        if *y == 0 {
                            Err(EvalError::DivisionByZero.into())
                        } else {
                            Ok(Rt::Val(Value::Int(x / y)))
                        }
                    }
                    _ => {
                        let x = a.as_real().map_err(EngineError::Eval)?;
                        let y = b.as_real().map_err(EngineError::Eval)?;
                        if y == 0.0 {
                            Err(EvalError::DivisionByZero.into())
                        } else {
                            self.ops.mults += 1;
                            Ok(Rt::Val(Value::Real(x / y)))
                        }
                    }
                }
            }
            PhysOp::Mod => {
                let x = self.int(&plan.children[0])?;
                let y = self.int(&plan.children[1])?;
                if y == 0 {
                    Err(EvalError::DivisionByZero.into())
                } else {
                    Ok(Rt::Val(Value::Int(x.rem_euclid(y))))
                }
            }
            PhysOp::Unary(op) => {
                let v = self.scalar(&plan.children[0])?;
                let out = match op {
                    UnaryOp::Neg => value_neg(&v).map_err(EngineError::Eval)?,
                    UnaryOp::Exp => Value::Real(v.as_real().map_err(EngineError::Eval)?.exp()),
                    UnaryOp::EvenBits => Value::Int(compact_bits(v.as_int().map_err(EngineError::Eval)?, 0)?),
                    UnaryOp::OddBits => Value::Int(compact_bits(v.as_int().map_err(EngineError::Eval)?, 1)?),
                };
                Ok(Rt::Val(out))
            }
            PhysOp::Cmp(op) => {
                let a = self.scalar(&plan.children[0])?;
                match op {
                    CmpOp::And | CmpOp::Or => {
                        let short = matches!((&a, op), (Value::Bool(false), CmpOp::And) | (Value::Bool(true), CmpOp::Or));
                        if short {
                            return Ok(Rt::Val(a));
                        }
                        let b = self.scalar(&plan.children[1])?;
                        match (a, b) {
                            (Value::Bool(x), Value::Bool(y)) => Ok(Rt::Val(Value::Bool(if matches!(op, CmpOp::And) {
                                x && y
                            } else {
                                x || y
                            }))),
                            _ => Err(EvalError::TypeMismatch("boolean connective on non-bool".into()).into()),
                        }
                    }
                    _ => {
                        let b = self.scalar(&plan.children[1])?;
                        let x = a.as_real().map_err(EngineError::Eval)?;
                        let y = b.as_real().map_err(EngineError::Eval)?;
                        Ok(Rt::Val(Value::Bool(match op {
                            CmpOp::Eq => x == y,
                            CmpOp::Lt => x < y,
                            CmpOp::Le => x <= y,
                            CmpOp::Gt => x > y,
                            CmpOp::Ge => x >= y,
                            _ => unreachable!(),
                        })))
                    }
                }
            }
            PhysOp::Insert(_) => {
                let v = self.scalar(&plan.children[1])?;
                if v.is_zero() {
                    return Ok(Rt::Val(Value::Dict(BTreeMap::new())));
                }
                let k = self.int(&plan.children[0])?;
                let mut m = BTreeMap::new();
                m.insert(k, v);
                Ok(Rt::Val(Value::Dict(m)))
            }
            PhysOp::ArrayLookup => {
                let base = self.run(&plan.children[0])?;
                let key = self.int(&plan.children[1])?;
                self.ops.lookups += 1;
                match base {
                    Rt::Buf(name) => Ok(Rt::Val(self.array_get(&name, key)?)),
                    Rt::Slice(name, lo, hi) => {
                        if key < lo || key >= hi {
                            Ok(Rt::Val(Value::zero()))
                        } else {
                            Ok(Rt::Val(self.array_get(&name, key)?))
                        }
                    }
                    other => self.dyn_lookup(other, key),
                }
            }
            PhysOp::HashLookup => {
                let base = self.run(&plan.children[0])?;
                if base.is_zero() {
                    return Ok(Rt::Val(Value::zero()));
                }
                let key = self.int(&plan.children[1])?;
                self.ops.lookups += 1;
                self.dyn_lookup(base, key)
            }
            PhysOp::Slice => {
                let base = self.run(&plan.children[0])?;
                let lo = self.int(&plan.children[1])?;
                let hi = self.int(&plan.children[2])?;
                match base {
                    Rt::Buf(name) => {
                        let len = self.buffer(&name)?.array_len().ok_or_else(|| {
                            EngineError::LoweringError(format!("slice of non-array {}", name))
                        })? as i64;
                        if lo < 0 || hi > len {
                            return Err(EngineError::RuntimeBoundsError(format!(
                                "{}({}:{}) with length {}",
                                name, lo, hi, len
                            )));
                        }
                        Ok(Rt::Slice(name, lo, hi))
                    }
                    Rt::Val(Value::Dict(m)) => {
                        Ok(Rt::Val(Value::Dict(m.range(lo..hi).map(|(k, v)| (*k, v.clone())).collect())))
                    }
                    other => Err(EngineError::LoweringError(format!("slice of {:?}", other))),
                }
            }
            PhysOp::RangeScan => {
                let lo = self.int(&plan.children[0])?;
                let hi = self.int(&plan.children[1])?;
                Ok(Rt::Rng(lo, hi))
            }
            PhysOp::IfGuard => {
                let c = self.scalar(&plan.children[0])?;
                match c {
                    Value::Bool(true) => self.run(&plan.children[1]),
                    Value::Bool(false) => Ok(Rt::Val(Value::zero())),
                    other => Err(EvalError::TypeMismatch(format!("condition evaluated to {}", other)).into()),
                }
            }
            PhysOp::Materialize => {
                let bound = self.run(&plan.children[0])?;
                self.env.push(bound);
                let out = self.run(&plan.children[1]);
                self.env.pop();
                out
            }
            PhysOp::ForLoop(_) => {
                let coll = self.run(&plan.children[0])?;
                let mut acc = Value::zero();
                for (k, v) in self.iter_of(coll)? {
                    self.ops.iterations += 1;
                    self.env.push(Rt::Val(Value::Int(k)));
                    self.env.push(Rt::Val(v));
                    let term = self.run(&plan.children[1]);
                    self.env.pop();
                    self.env.pop();
                    let term = self.materialize(term?)?;
                    accumulate(&mut acc, term, &mut self.ops)?;
                }
                Ok(Rt::Val(acc))
            }
            PhysOp::SortedMerge => {
                let c1 = self.run(&plan.children[0])?;
                let s1 = self.stream_of(c1)?;
                let c2 = self.run(&plan.children[1])?;
                let s2 = self.stream_of(c2)?;
                check_sorted(&s1)?;
                check_sorted(&s2)?;
                let mut acc = Value::zero();
                let (mut i, mut j) = (0usize, 0usize);
                while i < s1.len() && j < s2.len() {
                    self.ops.iterations += 1;
                    let (k1, v1) = &s1[i];
                    let (k2, v2) = &s2[j];
                    let x = v1.as_real().map_err(EngineError::Eval)?;
                    let y = v2.as_real().map_err(EngineError::Eval)?;
                    if x < y {
                        i += 1;
                    } else if y < x {
                        j += 1;
                    } else {
                        let term = self.merge_body(plan, *k1, *k2, v1.clone())?;
                        accumulate(&mut acc, term, &mut self.ops)?;
                        i += 1;
                        j += 1;
                    }
                }
                Ok(Rt::Val(acc))
            }
            PhysOp::HashProbeMerge => {
                let c1 = self.run(&plan.children[0])?;
                let s1 = self.stream_of(c1)?;
                let c2 = self.run(&plan.children[1])?;
                let s2 = self.stream_of(c2)?;
                // build on the smaller side
                let (build, probe, flipped) = if s1.len() <= s2.len() { (&s1, &s2, false) } else { (&s2, &s1, true) };
                let mut table: BTreeMap<u64, Vec<(i64, Value)>> = BTreeMap::new();
                for (k, v) in build {
                    self.ops.dict_inserts += 1;
                    table.entry(value_key(v)).or_default().push((*k, v.clone()));
                }
                let mut acc = Value::zero();
                for (kp, vp) in probe {
                    self.ops.iterations += 1;
                    self.ops.lookups += 1;
                    if let Some(hits) = table.get(&value_key(vp)) {
                        for (kb, vb) in hits.clone() {
                            if !vb.value_eq(vp) {
                                continue;
                            }
                            let (k1, k2) = if flipped { (*kp, kb) } else { (kb, *kp) };
                            let term = self.merge_body(plan, k1, k2, vp.clone())?;
                            accumulate(&mut acc, term, &mut self.ops)?;
                        }
                    }
                }
                Ok(Rt::Val(acc))
            }
        }
    }

    fn merge_body(&mut self, plan: &PhysicalPlan, k1: i64, k2: i64, v: Value) -> Result<Value, EngineError> {
        self.env.push(Rt::Val(Value::Int(k1)));
        self.env.push(Rt::Val(Value::Int(k2)));
        self.env.push(Rt::Val(v));
        let term = self.run(&plan.children[2]);
        self.env.pop();
        self.env.pop();
        self.env.pop();
        let term = term?;
        self.materialize(term)
    }

    fn dyn_lookup(&mut self, base: Rt, key: i64) -> Result<Rt, EngineError> {
        match base {
            Rt::Val(Value::Dict(m)) => Ok(Rt::Val(m.get(&key).cloned().unwrap_or_else(Value::zero))),
            Rt::Val(v) if v.is_zero() => Ok(Rt::Val(Value::zero())),
            Rt::Val(_) => Err(EvalError::LookupOnScalar.into()),
            Rt::Rng(lo, hi) => Ok(Rt::Val(if key >= lo && key < hi { Value::Int(key) } else { Value::zero() })),
            Rt::Slice(name, lo, hi) => {
                if key < lo || key >= hi {
                    Ok(Rt::Val(Value::zero()))
                } else {
                    Ok(Rt::Val(self.array_get(&name, key)?))
                }
            }
            Rt::Buf(name) => match self.buffer(&name)? {
                PhysicalBuffer::IntArray(_) | PhysicalBuffer::RealArray(_) => {
                    Ok(Rt::Val(self.array_get(&name, key)?))
                }
                PhysicalBuffer::Hash { elem, arity, entries } => {
                    if *arity == 1 {
                        let v = entries.get(&vec![key]).copied();
                        Ok(Rt::Val(match v {
                            Some(x) => match elem {
                                crate::storage::Elem::Int => Value::Int(x as i64),
                                crate::storage::Elem::Real => Value::Real(x),
                            },
                            None => Value::zero(),
                        }))
                    } else {
                        // partial lookup: the curried sub-dictionary
                        let mut sub = BTreeMap::new();
                        for (ks, v) in entries.iter().filter(|(ks, _)| ks[0] == key) {
                            let val = match elem {
                                crate::storage::Elem::Int => Value::Int(*v as i64),
                                crate::storage::Elem::Real => Value::Real(*v),
                            };
                            insert_path(&mut sub, &ks[1..], val);
                        }
                        Ok(Rt::Val(Value::Dict(sub)))
                    }
                }
                PhysicalBuffer::Trie { elem, root, .. } => {
                    let out = match root.get(&key) {
                        None => Value::zero(),
                        Some(TrieNode::Leaf(x)) => match elem {
                            crate::storage::Elem::Int => Value::Int(*x as i64),
                            crate::storage::Elem::Real => Value::Real(*x),
                        },
                        Some(TrieNode::Map(m)) => trie_value(m, *elem),
                    };
                    Ok(Rt::Val(out))
                }
                PhysicalBuffer::IntScalar(_) | PhysicalBuffer::RealScalar(_) => {
                    Err(EvalError::LookupOnScalar.into())
                }
            },
        }
    }

    /// Key/value pairs of a collection view, in storage order.
    fn iter_of(&self, rt: Rt) -> Result<Vec<(i64, Value)>, EngineError> {
        self.stream_of(rt)
    }

    fn stream_of(&self, rt: Rt) -> Result<Vec<(i64, Value)>, EngineError> {
        Ok(match rt {
            Rt::Rng(lo, hi) => (lo..hi).map(|i| (i, Value::Int(i))).collect(),
            Rt::Slice(name, lo, hi) => {
                let mut out = Vec::with_capacity((hi - lo).max(0) as usize);
                for i in lo..hi {
                    out.push((i, self.array_get(&name, i)?));
                }
                out
            }
            Rt::Buf(name) => match self.buffer(&name)?.to_value() {
                Value::Dict(m) => m.into_iter().collect(),
                v if v.is_zero() => Vec::new(),
                _ => return Err(EvalError::TypeMismatch("iteration over a scalar buffer".into()).into()),
            },
            Rt::Val(Value::Dict(m)) => m.into_iter().collect(),
            Rt::Val(v) if v.is_zero() => Vec::new(),
            Rt::Val(_) => return Err(EvalError::TypeMismatch("iteration over a scalar".into()).into()),
        })
    }
}

fn trie_value(m: &BTreeMap<i64, TrieNode>, elem: crate::storage::Elem) -> Value {
    let mut out = BTreeMap::new();
    for (k, node) in m {
        let v = match node {
            TrieNode::Leaf(x) => match elem {
                crate::storage::Elem::Int => Value::Int(*x as i64),
                crate::storage::Elem::Real => Value::Real(*x),
            },
            TrieNode::Map(sub) => trie_value(sub, elem),
        };
        out.insert(*k, v);
    }
    Value::Dict(out)
}

fn insert_path(m: &mut BTreeMap<i64, Value>, path: &[i64], leaf: Value) {
    if path.len() == 1 {
        m.insert(path[0], leaf);
    } else {
        let entry = m.entry(path[0]).or_insert_with(|| Value::Dict(BTreeMap::new()));
        if let Value::Dict(sub) = entry {
            insert_path(sub, &path[1..], leaf);
        }
    }
}

/// Strictly ascending by value; duplicates mean a malformed format.
fn check_sorted(stream: &[(i64, Value)]) -> Result<(), EngineError> {
    for w in stream.windows(2) {
        let a = w[0].1.as_real().map_err(EngineError::Eval)?;
        let b = w[1].1.as_real().map_err(EngineError::Eval)?;
        if a >= b {
            return Err(EngineError::MergeNotSorted);
        }
    }
    Ok(())
}

fn value_key(v: &Value) -> u64 {
    match v {
        Value::Int(i) => (*i as f64).to_bits(),
        Value::Real(x) => x.to_bits(),
        _ => 0,
    }
}

/// Fold a term into the accumulator. New scalar keys count as inserts;
/// collisions count as (real) additions.
fn accumulate(acc: &mut Value, term: Value, ops: &mut OpCounters) -> Result<(), EngineError> {
    if term.is_zero() {
        return Ok(());
    }
    if acc.is_zero() {
        if matches!(term, Value::Dict(_)) {
            // start from an empty dictionary so the first entries count
            // as inserts like all later ones
            *acc = Value::Dict(BTreeMap::new());
        } else {
            *acc = term;
            return Ok(());
        }
    }
    match (&mut *acc, term) {
        (Value::Dict(m), Value::Dict(delta)) => {
            for (k, v) in delta {
                merge_entry(m, k, v, ops)?;
            }
            Ok(())
        }
        (a, term) => {
            count_addition(a, &term, ops);
            *a = value_add(a, &term).map_err(EngineError::Eval)?;
            Ok(())
        }
    }
}

fn merge_entry(m: &mut BTreeMap<i64, Value>, k: i64, v: Value, ops: &mut OpCounters) -> Result<(), EngineError> {
    if v.is_zero() {
        return Ok(());
    }
    match m.remove(&k) {
        None => {
            ops.dict_inserts += count_scalar_leaves(&v);
            m.insert(k, v);
        }
        Some(mut prev) => {
            match (&mut prev, v) {
                (Value::Dict(sub), Value::Dict(delta)) => {
                    for (k2, v2) in delta {
                        merge_entry(sub, k2, v2, ops)?;
                    }
                }
                (p, v) => {
                    count_addition(p, &v, ops);
                    prev = value_add(&prev, &v).map_err(EngineError::Eval)?;
                }
            }
            if !prev.is_zero() {
                m.insert(k, prev);
            }
        }
    }
    Ok(())
}

fn count_scalar_leaves(v: &Value) -> u64 {
    match v {
        Value::Dict(d) => d.values().map(count_scalar_leaves).sum(),
        _ => 1,
    }
}

fn count_addition(a: &Value, b: &Value, ops: &mut OpCounters) {
    if (matches!(a, Value::Real(_)) || matches!(b, Value::Real(_))) && !a.is_zero() && !b.is_zero() {
        ops.adds += 1;
    }
}

fn compact_bits(x: i64, phase: u32) -> Result<i64, EngineError> {
    if x < 0 {
        return Err(EvalError::BadOperand(format!("bit extraction of negative {}", x)).into());
    }
    let mut out = 0i64;
    let mut bit = 0;
    let mut i = phase;
    while i < 63 {
        if x >> i & 1 == 1 {
            out |= 1 << bit;
        }
        bit += 1;
        i += 2;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_lower;

    fn plan_of(text: &str, catalog: &StorageCatalog) -> PhysicalPlan {
        let e = parse_lower(text, None).unwrap();
        lower(&e, catalog).unwrap()
    }

    #[test]
    fn scalar_constant_folding_path() {
        let catalog = StorageCatalog::new();
        let plan = plan_of("3*4+1", &catalog);
        let (v, _) = execute(&plan, &catalog).unwrap();
        assert!(v.value_eq(&Value::Int(13)));
    }

    #[test]
    fn one_plus_one_counts_one_add() {
        let catalog = StorageCatalog::new();
        let plan = plan_of("1.0 + 1.0", &catalog);
        let (v, ops) = execute(&plan, &catalog).unwrap();
        assert!(v.value_eq(&Value::Real(2.0)));
        assert_eq!(ops.adds, 1);
    }

    #[test]
    fn logical_dict_rejected() {
        let catalog = StorageCatalog::new();
        let e = parse_lower("{1 -> 2}", None).unwrap();
        assert!(matches!(lower(&e, &catalog), Err(EngineError::LoweringError(_))));
        let e = parse_lower("{@hash 1 -> 2}", None).unwrap();
        assert!(lower(&e, &catalog).is_ok());
    }

    #[test]
    fn slice_iteration_is_lazy_and_checked() {
        let mut catalog = StorageCatalog::new();
        catalog.insert_buffer("A", PhysicalBuffer::RealArray(vec![1.0, 2.0, 3.0, 4.0])).unwrap();
        let plan = plan_of("sum(<p,x> in A(1:3)) {@hash p -> 2.0*x}", &catalog);
        let (v, ops) = execute(&plan, &catalog).unwrap();
        assert_eq!(
            v,
            crate::value::dict_from_iter([(1, Value::Real(4.0)), (2, Value::Real(6.0))])
        );
        assert_eq!(ops.iterations, 2);
        assert_eq!(ops.dict_inserts, 2);

        let plan = plan_of("sum(<p,x> in A(2:9)) x", &catalog);
        assert!(matches!(execute(&plan, &catalog), Err(EngineError::RuntimeBoundsError(_))));
    }

    #[test]
    fn sorted_merge_matches_nested_loop() {
        let mut catalog = StorageCatalog::new();
        catalog.insert_buffer("X", PhysicalBuffer::IntArray(vec![0, 2, 3, 7])).unwrap();
        catalog.insert_buffer("Y", PhysicalBuffer::IntArray(vec![2, 5, 7])).unwrap();
        let plan = plan_of("merge(<p,q,v> in <X(0:4), Y(0:3)>) v", &catalog);
        assert_eq!(plan.op, PhysOp::SortedMerge);
        let (v, _) = execute(&plan, &catalog).unwrap();
        // matches at values 2 and 7
        assert!(v.value_eq(&Value::Int(9)));
    }

    #[test]
    fn merge_rejects_unsorted_stream() {
        let mut catalog = StorageCatalog::new();
        catalog.insert_buffer("X", PhysicalBuffer::IntArray(vec![3, 1])).unwrap();
        catalog.insert_buffer("Y", PhysicalBuffer::IntArray(vec![1, 2])).unwrap();
        let plan = plan_of("merge(<p,q,v> in <X(0:2), Y(0:2)>) v", &catalog);
        assert!(matches!(execute(&plan, &catalog), Err(EngineError::MergeNotSorted)));
    }

    #[test]
    fn duplicate_values_in_stream_rejected() {
        let mut catalog = StorageCatalog::new();
        catalog.insert_buffer("X", PhysicalBuffer::IntArray(vec![1, 1])).unwrap();
        catalog.insert_buffer("Y", PhysicalBuffer::IntArray(vec![1])).unwrap();
        let plan = plan_of("merge(<p,q,v> in <X(0:2), Y(0:1)>) v", &catalog);
        assert!(matches!(execute(&plan, &catalog), Err(EngineError::MergeNotSorted)));
    }
}
