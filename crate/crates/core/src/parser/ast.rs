//! Surface abstract syntax: named variables, tuple keys, multi-binder forms.
//! Desugaring removes all of the sugar before lowering to the core calculus.

use crate::expr::{CmpOp, KeyAttr, StorageAttr, UnaryOp};

#[derive(Debug, Clone, PartialEq)]
pub enum SurfExpr {
    Int(i64),
    Real(f64),
    Bool(bool),
    Name(String),
    Bin(BinOp, Box<SurfExpr>, Box<SurfExpr>),
    Unary(UnaryOp, Box<SurfExpr>),
    Cmp(CmpOp, Box<SurfExpr>, Box<SurfExpr>),
    /// Postfix application `e(a1, a2, ...)`; each argument may be a range.
    Call(Box<SurfExpr>, Vec<SurfExpr>),
    Range(Box<SurfExpr>, Box<SurfExpr>),
    /// `{ entries }`; multiple entries desugar to an addition of singletons.
    Dict(Vec<DictEntry>),
    If(Box<SurfExpr>, Box<SurfExpr>),
    Let(Vec<(String, SurfExpr)>, Box<SurfExpr>),
    Sum(Vec<SumBinding>, Box<SurfExpr>),
    Merge { k1: String, k2: String, v: String, c1: Box<SurfExpr>, c2: Box<SurfExpr>, body: Box<SurfExpr> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DictEntry {
    pub key_attr: KeyAttr,
    pub storage_attr: StorageAttr,
    pub key: DictKey,
    pub val: SurfExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DictKey {
    Unit,
    Single(SurfExpr),
    Tuple(Vec<SurfExpr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SumBinding {
    pub key: BinderKey,
    pub val: String,
    pub coll: SurfExpr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum BinderKey {
    Single(String),
    Tuple(Vec<String>),
}

/// Scalar element type of physical declarations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElemTy {
    Int,
    Real,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Statement {
    CreateScalar { name: String, elem: ElemTy },
    CreateArray { name: String, elem: ElemTy, size: SurfExpr },
    CreateHashmap { name: String, elem: ElemTy, dims: Vec<SurfExpr> },
    CreateTrie { name: String, elem: ElemTy, dims: Vec<SurfExpr> },
    CreateTensor { name: String, def: SurfExpr },
    Query(SurfExpr),
}

impl SurfExpr {
    pub fn boxed(self) -> Box<SurfExpr> {
        Box::new(self)
    }

    /// Walk all direct child expressions mutably.
    pub fn map_children(&self, f: &mut impl FnMut(&SurfExpr) -> SurfExpr) -> SurfExpr {
        match self {
            SurfExpr::Int(_) | SurfExpr::Real(_) | SurfExpr::Bool(_) | SurfExpr::Name(_) => self.clone(),
            SurfExpr::Bin(op, a, b) => SurfExpr::Bin(*op, f(a).boxed(), f(b).boxed()),
            SurfExpr::Unary(op, a) => SurfExpr::Unary(*op, f(a).boxed()),
            SurfExpr::Cmp(op, a, b) => SurfExpr::Cmp(*op, f(a).boxed(), f(b).boxed()),
            SurfExpr::Call(e, args) => {
                SurfExpr::Call(f(e).boxed(), args.iter().map(|a| f(a)).collect())
            }
            SurfExpr::Range(a, b) => SurfExpr::Range(f(a).boxed(), f(b).boxed()),
            SurfExpr::Dict(entries) => SurfExpr::Dict(
                entries
                    .iter()
                    .map(|e| DictEntry {
                        key_attr: e.key_attr,
                        storage_attr: e.storage_attr,
                        key: match &e.key {
                            DictKey::Unit => DictKey::Unit,
                            DictKey::Single(k) => DictKey::Single(f(k)),
                            DictKey::Tuple(ks) => DictKey::Tuple(ks.iter().map(|k| f(k)).collect()),
                        },
                        val: f(&e.val),
                    })
                    .collect(),
            ),
            SurfExpr::If(c, b) => SurfExpr::If(f(c).boxed(), f(b).boxed()),
            SurfExpr::Let(binds, body) => SurfExpr::Let(
                binds.iter().map(|(n, e)| (n.clone(), f(e))).collect(),
                f(body).boxed(),
            ),
            SurfExpr::Sum(binds, body) => SurfExpr::Sum(
                binds
                    .iter()
                    .map(|b| SumBinding { key: b.key.clone(), val: b.val.clone(), coll: f(&b.coll) })
                    .collect(),
                f(body).boxed(),
            ),
            SurfExpr::Merge { k1, k2, v, c1, c2, body } => SurfExpr::Merge {
                k1: k1.clone(),
                k2: k2.clone(),
                v: v.clone(),
                c1: f(c1).boxed(),
                c2: f(c2).boxed(),
                body: f(body).boxed(),
            },
        }
    }
}
