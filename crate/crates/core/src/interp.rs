//! Reference big-step evaluator. Every optimization in this crate is
//! verified against it.
//!
//! Evaluation notes:
//! - `i1:i2` with `i2 <= i1` is the empty dictionary.
//! - `{() -> v}` never reaches this level; desugaring collapses it.
//! - A conditional returns the zero of its body's type when false.
//! - Multiplication by a zero operand short-circuits the other operand;
//!   dictionary singletons evaluate the value first and skip the key
//!   expression when the value is zero, since a zero entry is never stored.
//! - Constructed dictionaries are zero-free. Primitive collections
//!   (ranges and physical arrays) keep explicit zero entries so that
//!   iteration visits every stored position; `0:N` must visit index 0.
//! - Subarray bounds outside a physical array are an error; lookups on a
//!   dictionary simply read zero for missing keys.

use std::collections::BTreeMap;
use std::rc::Rc;

use crate::error::EvalError;
use crate::expr::{CmpOp, Expr, UnaryOp};
use crate::storage::StorageCatalog;
use crate::value::{value_add, value_mul, value_neg, value_sub, Value};

/// Abstract operation counts gathered during evaluation; the desk-scale
/// stand-in for wall-clock measurements. `mults`/`adds` count real-valued
/// scalar work; integer index arithmetic is not counted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounters {
    pub mults: u64,
    pub adds: u64,
    pub lookups: u64,
    pub dict_inserts: u64,
    pub iterations: u64,
}

impl OpCounters {
    pub fn total(&self) -> u64 {
        self.mults + self.adds + self.lookups + self.dict_inserts + self.iterations
    }
}

/// Evaluation environment: the binder stack plus the global catalog.
pub struct Env<'a> {
    pub catalog: &'a StorageCatalog,
    stack: Vec<Value>,
    tensor_cache: BTreeMap<String, Value>,
}

impl<'a> Env<'a> {
    pub fn new(catalog: &'a StorageCatalog) -> Env<'a> {
        Env { catalog, stack: Vec::new(), tensor_cache: BTreeMap::new() }
    }

    fn get(&self, idx: u32) -> Result<&Value, EvalError> {
        let pos = self.stack.len() as i64 - 1 - idx as i64;
        if pos < 0 {
            Err(EvalError::DanglingVariable(idx))
        } else {
            Ok(&self.stack[pos as usize])
        }
    }
}

/// Evaluate a closed expression against a catalog.
pub fn eval(catalog: &StorageCatalog, e: &Expr) -> Result<(Value, OpCounters), EvalError> {
    let mut env = Env::new(catalog);
    let mut counters = OpCounters::default();
    let v = eval_in(&mut env, e, &mut counters)?;
    Ok((v, counters))
}

pub fn eval_in(env: &mut Env, e: &Expr, ops: &mut OpCounters) -> Result<Value, EvalError> {
    match e {
        Expr::IntLit(i) => Ok(Value::Int(*i)),
        Expr::RealLit(b) => Ok(Value::Real(f64::from_bits(*b))),
        Expr::BoolLit(b) => Ok(Value::Bool(*b)),
        Expr::Var(i) => env.get(*i).cloned(),
        Expr::Global(name) => {
            if let Some(v) = env.tensor_cache.get(name) {
                return Ok(v.clone());
            }
            if let Some(buf) = env.catalog.buffer(name) {
                return Ok(buf.to_value());
            }
            match env.catalog.mapping(name) {
                Some(tsm) => {
                    let tsm = Rc::clone(tsm);
                    let v = eval_in(&mut Env::new(env.catalog), &tsm, ops)?;
                    env.tensor_cache.insert(name.clone(), v.clone());
                    Ok(v)
                }
                None => Err(EvalError::UnknownGlobal(name.clone())),
            }
        }
        Expr::Add(a, b) => {
            let va = eval_in(env, a, ops)?;
            let vb = eval_in(env, b, ops)?;
            count_add(&va, &vb, ops);
            value_add(&va, &vb)
        }
        Expr::Sub(a, b) => {
            let va = eval_in(env, a, ops)?;
            let vb = eval_in(env, b, ops)?;
            count_add(&va, &vb, ops);
            value_sub(&va, &vb)
        }
        Expr::Mul(a, b) => {
            let va = eval_in(env, a, ops)?;
            if va.is_zero() {
                return Ok(Value::zero());
            }
            let vb = eval_in(env, b, ops)?;
            count_mul(&va, &vb, ops);
            value_mul(&va, &vb)
        }
        Expr::Div(a, b) => {
            let va = eval_in(env, a, ops)?;
            let vb = eval_in(env, b, ops)?;
            match (&va, &vb) {
                (Value::Int(x), Value::Int(y)) => {
                    if *y == 0 {
                        Err(EvalError::DivisionByZero)
                    } else {
                        Ok(Value::Int(x / y))
                    }
                }
                _ => {
                    let x = va.as_real()?;
                    let y = vb.as_real()?;
                    if y == 0.0 {
                        Err(EvalError::DivisionByZero)
                    } else {
                        ops.mults += 1;
                        Ok(Value::Real(x / y))
                    }
                }
            }
        }
        Expr::Mod(a, b) => {
            let x = eval_in(env, a, ops)?.as_int()?;
            let y = eval_in(env, b, ops)?.as_int()?;
            if y == 0 {
                Err(EvalError::DivisionByZero)
            } else {
                Ok(Value::Int(x.rem_euclid(y)))
            }
        }
        Expr::Unary(op, a) => {
            let v = eval_in(env, a, ops)?;
            match op {
                UnaryOp::Neg => value_neg(&v),
                UnaryOp::Exp => Ok(Value::Real(v.as_real()?.exp())),
                UnaryOp::EvenBits => Ok(Value::Int(compact_bits(v.as_int()?, 0)?)),
                UnaryOp::OddBits => Ok(Value::Int(compact_bits(v.as_int()?, 1)?)),
            }
        }
        Expr::Cmp(op, a, b) => {
            let va = eval_in(env, a, ops)?;
            match op {
                CmpOp::And => {
                    if let Value::Bool(false) = va {
                        return Ok(Value::Bool(false));
                    }
                    let vb = eval_in(env, b, ops)?;
                    bool_op(&va, &vb, |x, y| x && y)
                }
                CmpOp::Or => {
                    if let Value::Bool(true) = va {
                        return Ok(Value::Bool(true));
                    }
                    let vb = eval_in(env, b, ops)?;
                    bool_op(&va, &vb, |x, y| x || y)
                }
                _ => {
                    let vb = eval_in(env, b, ops)?;
                    let x = va.as_real()?;
                    let y = vb.as_real()?;
                    Ok(Value::Bool(match op {
                        CmpOp::Eq => x == y,
                        CmpOp::Lt => x < y,
                        CmpOp::Le => x <= y,
                        CmpOp::Gt => x > y,
                        CmpOp::Ge => x >= y,
                        _ => unreachable!(),
                    }))
                }
            }
        }
        Expr::DictSing(_, _, key, val) => {
            let v = eval_in(env, val, ops)?;
            if v.is_zero() {
                return Ok(Value::Dict(BTreeMap::new()));
            }
            let k = eval_in(env, key, ops)?.as_int()?;
            ops.dict_inserts += count_scalar_leaves(&v);
            let mut m = BTreeMap::new();
            m.insert(k, v);
            Ok(Value::Dict(m))
        }
        Expr::Lookup(d, k) => {
            let vd = eval_in(env, d, ops)?;
            if vd.is_zero() {
                return Ok(Value::zero());
            }
            let key = eval_in(env, k, ops)?.as_int()?;
            ops.lookups += 1;
            match vd {
                Value::Dict(m) => Ok(m.get(&key).cloned().unwrap_or_else(Value::zero)),
                _ => Err(EvalError::LookupOnScalar),
            }
        }
        Expr::Range(lo, hi) => {
            let lo = eval_in(env, lo, ops)?.as_int()?;
            let hi = eval_in(env, hi, ops)?.as_int()?;
            // the 0 -> 0 entry is kept: ranges are iterable index sets, and
            // skipping index 0 would lose row 0 of every storage mapping
            let mut m = BTreeMap::new();
            for i in lo..hi {
                m.insert(i, Value::Int(i));
            }
            Ok(Value::Dict(m))
        }
        Expr::SubArray(d, lo, hi) => {
            let vd = eval_in(env, d, ops)?;
            let lo = eval_in(env, lo, ops)?.as_int()?;
            let hi = eval_in(env, hi, ops)?.as_int()?;
            // for physical arrays the mapping must stay in bounds
            if let Expr::Global(name) = &**d {
                if let Some(buf) = env.catalog.buffer(name) {
                    if let Some(len) = buf.array_len() {
                        if lo < 0 || hi > len as i64 {
                            return Err(EvalError::BufferOverrun(format!(
                                "{}({}:{}) with length {}",
                                name, lo, hi, len
                            )));
                        }
                    }
                }
            }
            match vd {
                Value::Dict(m) => {
                    let mut out = BTreeMap::new();
                    for (k, v) in m.range(lo..hi) {
                        out.insert(*k, v.clone());
                    }
                    Ok(Value::Dict(out))
                }
                v if v.is_zero() => Ok(Value::Dict(BTreeMap::new())),
                _ => Err(EvalError::LookupOnScalar),
            }
        }
        Expr::IfThen(c, b) => {
            let cond = eval_in(env, c, ops)?;
            match cond {
                Value::Bool(true) => eval_in(env, b, ops),
                Value::Bool(false) => Ok(Value::zero()),
                other => Err(EvalError::TypeMismatch(format!("condition evaluated to {}", other))),
            }
        }
        Expr::Let(bound, body) => {
            let v = eval_in(env, bound, ops)?;
            env.stack.push(v);
            let out = eval_in(env, body, ops);
            env.stack.pop();
            out
        }
        Expr::Sum(coll, body) => {
            let c = eval_in(env, coll, ops)?;
            let entries = c.as_dict()?;
            let mut acc = Value::zero();
            for (k, v) in entries {
                ops.iterations += 1;
                env.stack.push(Value::Int(k));
                env.stack.push(v);
                let term = eval_in(env, body, ops);
                env.stack.pop();
                env.stack.pop();
                let term = term?;
                count_add(&acc, &term, ops);
                acc = value_add(&acc, &term)?;
            }
            Ok(acc)
        }
        Expr::Merge(c1, c2, body) => {
            // defining expansion: sum over both, keeping equal values
            let d1 = eval_in(env, c1, ops)?.as_dict()?;
            let d2 = eval_in(env, c2, ops)?.as_dict()?;
            let mut acc = Value::zero();
            for (k1, v1) in &d1 {
                for (k2, v2) in &d2 {
                    ops.iterations += 1;
                    if !v1.value_eq(v2) {
                        continue;
                    }
                    env.stack.push(Value::Int(*k1));
                    env.stack.push(Value::Int(*k2));
                    env.stack.push(v1.clone());
                    let term = eval_in(env, body, ops);
                    env.stack.pop();
                    env.stack.pop();
                    env.stack.pop();
                    let term = term?;
                    count_add(&acc, &term, ops);
                    acc = value_add(&acc, &term)?;
                }
            }
            Ok(acc)
        }
    }
}

fn bool_op(a: &Value, b: &Value, f: impl Fn(bool, bool) -> bool) -> Result<Value, EvalError> {
    match (a, b) {
        (Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(f(*x, *y))),
        _ => Err(EvalError::TypeMismatch("boolean connective on non-bool".into())),
    }
}

/// Gather bits at positions `phase, phase+2, phase+4, ...` into a compact int.
fn compact_bits(x: i64, phase: u32) -> Result<i64, EvalError> {
    if x < 0 {
        return Err(EvalError::BadOperand(format!("bit extraction of negative {}", x)));
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

fn count_scalar_leaves(v: &Value) -> u64 {
    match v {
        Value::Dict(d) => d.values().map(count_scalar_leaves).sum(),
        _ => 1,
    }
}

fn is_real(v: &Value) -> bool {
    matches!(v, Value::Real(_))
}

fn count_add(a: &Value, b: &Value, ops: &mut OpCounters) {
    if (is_real(a) || is_real(b)) && !a.is_zero() && !b.is_zero() {
        ops.adds += 1;
    }
}

fn count_mul(a: &Value, b: &Value, ops: &mut OpCounters) {
    if is_real(a) || is_real(b) {
        ops.mults += 1;
    }
}
