//! Physical data model: named buffers, storage catalogs, external tensor
//! ingestion, format builders, and naive-plan composition.

pub mod coo;
pub mod dump;
pub mod formats;

use std::collections::BTreeMap;
use std::rc::Rc;

use crate::costing::Cardinality;
use crate::error::StorageError;
use crate::expr::Expr;
use crate::types::SdqType;
use crate::value::Value;

pub use coo::{infer_stats, load_external, CooTensor, ExternalFormat};
pub use formats::{build_format, FormatSpec};

/// Scalar element kind of a physical declaration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Elem {
    Int,
    Real,
}

/// Nested hash-map node for tries.
#[derive(Debug, Clone, PartialEq)]
pub enum TrieNode {
    Leaf(f64),
    Map(BTreeMap<i64, TrieNode>),
}

/// A named physical value: scalar, contiguous array, flat hash-map from
/// key tuples, or a trie of hash-maps.
#[derive(Debug, Clone, PartialEq)]
pub enum PhysicalBuffer {
    IntScalar(i64),
    RealScalar(f64),
    IntArray(Vec<i64>),
    RealArray(Vec<f64>),
    Hash { elem: Elem, arity: usize, entries: BTreeMap<Vec<i64>, f64> },
    Trie { elem: Elem, depth: usize, root: BTreeMap<i64, TrieNode> },
}

impl PhysicalBuffer {
    pub fn array_len(&self) -> Option<usize> {
        match self {
            PhysicalBuffer::IntArray(v) => Some(v.len()),
            PhysicalBuffer::RealArray(v) => Some(v.len()),
            _ => None,
        }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, PhysicalBuffer::IntScalar(_) | PhysicalBuffer::RealScalar(_))
    }

    /// The buffer as a logical value. Arrays keep explicit zero entries so
    /// iteration visits every position; hash maps and tries store only what
    /// was inserted.
    pub fn to_value(&self) -> Value {
        match self {
            PhysicalBuffer::IntScalar(x) => Value::Int(*x),
            PhysicalBuffer::RealScalar(x) => Value::Real(*x),
            PhysicalBuffer::IntArray(v) => {
                Value::Dict(v.iter().enumerate().map(|(i, x)| (i as i64, Value::Int(*x))).collect())
            }
            PhysicalBuffer::RealArray(v) => {
                Value::Dict(v.iter().enumerate().map(|(i, x)| (i as i64, Value::Real(*x))).collect())
            }
            PhysicalBuffer::Hash { elem, entries, arity } => {
                // curried view: nested single-key dictionaries
                let mut root = Value::Dict(BTreeMap::new());
                for (ks, v) in entries {
                    debug_assert_eq!(ks.len(), *arity);
                    insert_nested(&mut root, ks, scalar(*elem, *v));
                }
                root
            }
            PhysicalBuffer::Trie { elem, root, .. } => {
                fn conv(node: &TrieNode, elem: Elem) -> Value {
                    match node {
                        TrieNode::Leaf(x) => scalar(elem, *x),
                        TrieNode::Map(m) => Value::Dict(m.iter().map(|(k, v)| (*k, conv(v, elem))).collect()),
                    }
                }
                Value::Dict(root.iter().map(|(k, v)| (*k, conv(v, *elem))).collect())
            }
        }
    }

    /// Logical type of the buffer.
    pub fn sdq_type(&self) -> SdqType {
        match self {
            PhysicalBuffer::IntScalar(_) => SdqType::Int,
            PhysicalBuffer::RealScalar(_) => SdqType::Real,
            PhysicalBuffer::IntArray(v) => SdqType::dict(Some(v.len() as i64), SdqType::Int),
            PhysicalBuffer::RealArray(v) => SdqType::dict(Some(v.len() as i64), SdqType::Real),
            PhysicalBuffer::Hash { elem, arity, .. } => {
                let mut t = elem_type(*elem);
                for _ in 0..*arity {
                    t = SdqType::dict(None, t);
                }
                t
            }
            PhysicalBuffer::Trie { elem, depth, .. } => {
                let mut t = elem_type(*elem);
                for _ in 0..*depth {
                    t = SdqType::dict(None, t);
                }
                t
            }
        }
    }
}

fn scalar(elem: Elem, x: f64) -> Value {
    match elem {
        Elem::Int => Value::Int(x as i64),
        Elem::Real => Value::Real(x),
    }
}

fn elem_type(elem: Elem) -> SdqType {
    match elem {
        Elem::Int => SdqType::Int,
        Elem::Real => SdqType::Real,
    }
}

fn insert_nested(v: &mut Value, keys: &[i64], leaf: Value) {
    match v {
        Value::Dict(m) => {
            if keys.len() == 1 {
                m.insert(keys[0], leaf);
            } else {
                let entry = m.entry(keys[0]).or_insert_with(|| Value::Dict(BTreeMap::new()));
                insert_nested(entry, &keys[1..], leaf);
            }
        }
        _ => unreachable!("nested insert into scalar"),
    }
}

/// Named buffers plus per-tensor storage mapping expressions and statistics.
#[derive(Debug, Clone, Default)]
pub struct StorageCatalog {
    buffers: BTreeMap<String, PhysicalBuffer>,
    mappings: BTreeMap<String, Rc<Expr>>,
    /// insertion order of tensor definitions, for dependency checking
    mapping_order: Vec<String>,
    pub stats: BTreeMap<String, Cardinality>,
    pub sel_default: f64,
}

impl StorageCatalog {
    pub fn new() -> StorageCatalog {
        StorageCatalog { sel_default: 0.1, ..Default::default() }
    }

    pub fn buffer(&self, name: &str) -> Option<&PhysicalBuffer> {
        self.buffers.get(name)
    }

    pub fn mapping(&self, name: &str) -> Option<&Rc<Expr>> {
        self.mappings.get(name)
    }

    pub fn buffers(&self) -> impl Iterator<Item = (&String, &PhysicalBuffer)> {
        self.buffers.iter()
    }

    pub fn mappings(&self) -> impl Iterator<Item = (&String, &Rc<Expr>)> {
        self.mappings.iter()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.buffers.contains_key(name) || self.mappings.contains_key(name)
    }

    pub fn insert_buffer(&mut self, name: &str, buf: PhysicalBuffer) -> Result<(), StorageError> {
        if self.contains(name) {
            return Err(StorageError::DuplicateName(name.to_string()));
        }
        self.buffers.insert(name.to_string(), buf);
        Ok(())
    }

    pub fn insert_mapping(&mut self, name: &str, tsm: Rc<Expr>) -> Result<(), StorageError> {
        if self.contains(name) {
            return Err(StorageError::DuplicateName(name.to_string()));
        }
        for g in tsm.global_refs() {
            if !self.contains(&g) {
                return Err(StorageError::MissingTensor(g));
            }
        }
        self.mappings.insert(name.to_string(), tsm);
        self.mapping_order.push(name.to_string());
        Ok(())
    }

    /// Merge another catalog into this one.
    pub fn merge(&mut self, other: StorageCatalog) -> Result<(), StorageError> {
        for (name, buf) in other.buffers {
            if self.contains(&name) {
                return Err(StorageError::DuplicateName(name));
            }
            self.buffers.insert(name, buf);
        }
        for name in other.mapping_order {
            let tsm = other.mappings[&name].clone();
            self.insert_mapping(&name, tsm)?;
        }
        for (name, card) in other.stats {
            self.stats.insert(name, card);
        }
        Ok(())
    }

    /// Global type environment for type checking.
    pub fn type_env(&self) -> crate::types::TypeEnv {
        let mut env = crate::types::TypeEnv::new();
        for (name, buf) in &self.buffers {
            env.insert(name.clone(), buf.sdq_type());
        }
        // tensor types come from their mapping bodies, in dependency order
        for name in &self.mapping_order {
            if let Ok(t) = crate::types::typecheck(&self.mappings[name], &env) {
                env.insert(name.clone(), t);
            }
        }
        env
    }

    /// The value of an int scalar buffer, used for size expressions.
    pub fn int_scalar(&self, name: &str) -> Option<i64> {
        match self.buffers.get(name) {
            Some(PhysicalBuffer::IntScalar(x)) => Some(*x),
            _ => None,
        }
    }
}

/// Compose a tensor program with the storage mappings it references:
/// each referenced tensor's mapping is bound around the program with a
/// `let`, in dependency order, producing the naive logical plan.
pub fn compose(tp: &Expr, catalog: &StorageCatalog) -> Result<Expr, StorageError> {
    // collect tensors reachable from the program
    let mut needed: Vec<String> = Vec::new();
    let mut visiting: Vec<String> = Vec::new();
    fn visit(
        name: &str,
        catalog: &StorageCatalog,
        needed: &mut Vec<String>,
        visiting: &mut Vec<String>,
    ) -> Result<(), StorageError> {
        if needed.iter().any(|n| n == name) {
            return Ok(());
        }
        if visiting.iter().any(|n| n == name) {
            return Err(StorageError::CyclicMapping(name.to_string()));
        }
        let tsm = match catalog.mapping(name) {
            Some(t) => t,
            None => return Ok(()), // plain buffer
        };
        visiting.push(name.to_string());
        for g in tsm.global_refs() {
            if !catalog.contains(&g) {
                return Err(StorageError::MissingTensor(g));
            }
            visit(&g, catalog, needed, visiting)?;
        }
        visiting.pop();
        needed.push(name.to_string());
        Ok(())
    }

    for g in tp.global_refs() {
        if catalog.mapping(&g).is_some() {
            visit(&g, catalog, &mut needed, &mut visiting)?;
        } else if !catalog.contains(&g) {
            return Err(StorageError::MissingTensor(g));
        }
    }

    if needed.is_empty() {
        return Ok(tp.clone());
    }

    // innermost let is the last-defined tensor; inside the body, tensor i
    // (0-based from outermost) is at index needed.len()-1-i
    let n = needed.len();
    let position =
        |name: &str| needed.iter().position(|x| x == name).map(|i| (n - 1 - i) as u32);

    let replace = |e: &Expr, upto: usize| {
        e.replace_globals(&|g: &str, depth: u32| {
            needed[..upto].iter().position(|x| x == g).map(|i| Expr::Var(depth + (upto - 1 - i) as u32))
        })
    };

    let mut body = tp.replace_globals(&|g, depth| position(g).map(|i| Expr::Var(depth + i)));
    for (i, name) in needed.iter().enumerate().rev() {
        // a mapping may reference earlier-defined tensors
        let tsm = replace(catalog.mapping(name).unwrap(), i);
        body = Expr::Let(tsm.rc(), body.rc());
    }
    Ok(body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::*;

    #[test]
    fn compose_without_tensor_refs_is_identity() {
        let catalog = StorageCatalog::new();
        let tp = mul(int(3), int(4));
        assert_eq!(compose(&tp, &catalog).unwrap(), *tp);
    }

    #[test]
    fn compose_missing_tensor_errors() {
        let catalog = StorageCatalog::new();
        let tp = sum(global("Z"), var(0));
        assert!(matches!(compose(&tp, &catalog), Err(StorageError::MissingTensor(n)) if n == "Z"));
    }

    #[test]
    fn compose_binds_in_dependency_order() {
        let mut catalog = StorageCatalog::new();
        catalog.insert_buffer("a_val", PhysicalBuffer::RealArray(vec![1.0, 2.0])).unwrap();
        catalog.insert_mapping("A", sum(global("a_val"), dict(var(1), var(0)))).unwrap();
        // B is defined in terms of A
        catalog.insert_mapping("B", sum(global("A"), dict(var(1), mul(var(0), int(2).into())))).unwrap();
        let tp = sum(global("B"), var(0));
        let plan = compose(&tp, &catalog).unwrap();
        // let A = ... in let B = ...A... in sum(<k,v> in B) v
        match &plan {
            Expr::Let(_, inner) => match &**inner {
                Expr::Let(b_def, body) => {
                    assert!(b_def.uses_var(0), "B's definition must reference the bound A");
                    assert_eq!(**body, *sum(var(0), var(0)));
                }
                other => panic!("expected inner let, got {}", other),
            },
            other => panic!("expected let, got {}", other),
        }
    }

    #[test]
    fn hash_buffer_curried_view() {
        let mut entries = BTreeMap::new();
        entries.insert(vec![0, 0], 6.0);
        entries.insert(vec![0, 2], 9.0);
        entries.insert(vec![2, 3], 7.0);
        let buf = PhysicalBuffer::Hash { elem: Elem::Real, arity: 2, entries };
        let v = buf.to_value();
        let expect = crate::value::dict_from_iter([
            (0, crate::value::dict_from_iter([(0, Value::Real(6.0)), (2, Value::Real(9.0))])),
            (2, crate::value::dict_from_iter([(3, Value::Real(7.0))])),
        ]);
        assert_eq!(v, expect);
    }
}
