//! Data-model types and the type checker.
//!
//! A type is a nesting of dictionaries ending in a scalar:
//! `[n1] -> [n2] -> ... -> R` (or `Z`), with depth zero meaning a scalar.

use std::collections::HashMap;
use std::fmt;

use crate::error::TypeError;
use crate::expr::{CmpOp, Expr, UnaryOp};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SdqType {
    Int,
    Real,
    Bool,
    /// `bound` is the static extent when it is known at catalog time.
    Dict { bound: Option<i64>, value: Box<SdqType> },
}

impl SdqType {
    pub fn dict(bound: Option<i64>, value: SdqType) -> SdqType {
        SdqType::Dict { bound, value: Box::new(value) }
    }

    pub fn is_scalar(&self) -> bool {
        matches!(self, SdqType::Int | SdqType::Real | SdqType::Bool)
    }

    pub fn depth(&self) -> usize {
        match self {
            SdqType::Dict { value, .. } => 1 + value.depth(),
            _ => 0,
        }
    }

    /// Join two types that meet through addition or conditional branches.
    /// Int promotes to Real; bounds must agree or widen to unknown.
    pub fn join(&self, other: &SdqType) -> Option<SdqType> {
        match (self, other) {
            (SdqType::Int, SdqType::Int) => Some(SdqType::Int),
            (SdqType::Real, SdqType::Real)
            | (SdqType::Int, SdqType::Real)
            | (SdqType::Real, SdqType::Int) => Some(SdqType::Real),
            (SdqType::Bool, SdqType::Bool) => Some(SdqType::Bool),
            (SdqType::Dict { bound: b1, value: v1 }, SdqType::Dict { bound: b2, value: v2 }) => {
                let bound = match (b1, b2) {
                    (Some(x), Some(y)) if x == y => Some(*x),
                    _ => None,
                };
                Some(SdqType::dict(bound, v1.join(v2)?))
            }
            _ => None,
        }
    }
}

impl fmt::Display for SdqType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SdqType::Int => write!(f, "int"),
            SdqType::Real => write!(f, "real"),
            SdqType::Bool => write!(f, "bool"),
            SdqType::Dict { bound, value } => match bound {
                Some(n) => write!(f, "[{}] -> {}", n, value),
                None => write!(f, "[?] -> {}", value),
            },
        }
    }
}

/// Types of the globals an expression may reference.
pub type TypeEnv = HashMap<String, SdqType>;

/// Infer the principal type of a closed-against-catalog expression.
pub fn typecheck(e: &Expr, globals: &TypeEnv) -> Result<SdqType, TypeError> {
    check(e, globals, &mut Vec::new(), "root")
}

fn err(path: &str, msg: impl Into<String>) -> TypeError {
    TypeError::Mismatch { path: path.to_string(), msg: msg.into() }
}

fn check(e: &Expr, globals: &TypeEnv, stack: &mut Vec<SdqType>, path: &str) -> Result<SdqType, TypeError> {
    match e {
        Expr::IntLit(_) => Ok(SdqType::Int),
        Expr::RealLit(_) => Ok(SdqType::Real),
        Expr::BoolLit(_) => Ok(SdqType::Bool),
        Expr::Var(i) => {
            let pos = stack.len() as i64 - 1 - *i as i64;
            if pos < 0 {
                Err(err(path, format!("dangling variable %{}", i)))
            } else {
                Ok(stack[pos as usize].clone())
            }
        }
        Expr::Global(n) => globals.get(n).cloned().ok_or_else(|| TypeError::UnknownGlobal(n.clone())),
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            let ta = check(a, globals, stack, path)?;
            let tb = check(b, globals, stack, path)?;
            // zero literals are polymorphic against dictionaries
            if is_zero_lit(a) {
                return Ok(tb);
            }
            if is_zero_lit(b) {
                return Ok(ta);
            }
            ta.join(&tb).ok_or_else(|| err(path, format!("cannot add {} and {}", ta, tb)))
        }
        Expr::Mul(a, b) => {
            let ta = check(a, globals, stack, path)?;
            let tb = check(b, globals, stack, path)?;
            match (&ta, &tb) {
                (s, SdqType::Dict { .. }) if s.is_scalar() => Ok(tb),
                (SdqType::Dict { .. }, s) if s.is_scalar() => Ok(ta),
                _ => ta.join(&tb).ok_or_else(|| err(path, format!("cannot multiply {} and {}", ta, tb))),
            }
        }
        Expr::Div(a, b) | Expr::Mod(a, b) => {
            let ta = check(a, globals, stack, path)?;
            let tb = check(b, globals, stack, path)?;
            if !ta.is_scalar() || !tb.is_scalar() {
                return Err(err(path, "division requires scalars"));
            }
            if matches!(e, Expr::Mod(..)) {
                if ta != SdqType::Int || tb != SdqType::Int {
                    return Err(err(path, "modulo requires integers"));
                }
                return Ok(SdqType::Int);
            }
            ta.join(&tb).ok_or_else(|| err(path, "bad division operands"))
        }
        Expr::Unary(op, a) => {
            let ta = check(a, globals, stack, path)?;
            match op {
                UnaryOp::Neg => {
                    if matches!(ta, SdqType::Bool) {
                        Err(err(path, "cannot negate bool"))
                    } else {
                        Ok(ta)
                    }
                }
                UnaryOp::Exp => {
                    if ta.is_scalar() && ta != SdqType::Bool {
                        Ok(SdqType::Real)
                    } else {
                        Err(err(path, "exp requires a numeric scalar"))
                    }
                }
                UnaryOp::EvenBits | UnaryOp::OddBits => {
                    if ta == SdqType::Int {
                        Ok(SdqType::Int)
                    } else {
                        Err(err(path, "bit extraction requires an int"))
                    }
                }
            }
        }
        Expr::Cmp(op, a, b) => {
            let ta = check(a, globals, stack, path)?;
            let tb = check(b, globals, stack, path)?;
            match op {
                CmpOp::And | CmpOp::Or => {
                    if ta == SdqType::Bool && tb == SdqType::Bool {
                        Ok(SdqType::Bool)
                    } else {
                        Err(err(path, "boolean connective requires bools"))
                    }
                }
                _ => {
                    if ta.is_scalar() && tb.is_scalar() {
                        Ok(SdqType::Bool)
                    } else {
                        Err(err(path, "comparison requires scalars"))
                    }
                }
            }
        }
        Expr::DictSing(_, _, k, v) => {
            let tk = check(k, globals, stack, path)?;
            if tk != SdqType::Int {
                return Err(err(path, format!("dictionary key must be int, got {}", tk)));
            }
            let tv = check(v, globals, stack, path)?;
            Ok(SdqType::dict(None, tv))
        }
        Expr::Lookup(d, k) => {
            let td = check(d, globals, stack, path)?;
            let tk = check(k, globals, stack, path)?;
            if tk != SdqType::Int {
                return Err(err(path, format!("lookup key must be int, got {}", tk)));
            }
            match td {
                SdqType::Dict { value, .. } => Ok(*value),
                _ => Err(err(path, format!("lookup on non-dictionary {}", td))),
            }
        }
        Expr::Range(a, b) => {
            let ta = check(a, globals, stack, path)?;
            let tb = check(b, globals, stack, path)?;
            if ta != SdqType::Int || tb != SdqType::Int {
                return Err(err(path, "range bounds must be ints"));
            }
            Ok(SdqType::dict(static_extent(b), SdqType::Int))
        }
        Expr::SubArray(d, lo, hi) => {
            let td = check(d, globals, stack, path)?;
            for bound in [lo, hi] {
                if check(bound, globals, stack, path)? != SdqType::Int {
                    return Err(err(path, "subarray bounds must be ints"));
                }
            }
            match td {
                SdqType::Dict { value, .. } => Ok(SdqType::dict(None, *value)),
                _ => Err(err(path, "subarray of a scalar")),
            }
        }
        Expr::IfThen(c, b) => {
            let tc = check(c, globals, stack, path)?;
            if tc != SdqType::Bool {
                return Err(err(path, format!("condition must be bool, got {}", tc)));
            }
            check(b, globals, stack, path)
        }
        Expr::Let(bound, body) => {
            let tb = check(bound, globals, stack, path)?;
            stack.push(tb);
            let out = check(body, globals, stack, path);
            stack.pop();
            out
        }
        Expr::Sum(coll, body) => {
            let tc = check(coll, globals, stack, path)?;
            let elem = match tc {
                SdqType::Dict { value, .. } => *value,
                _ => return Err(err(path, format!("sum over non-dictionary {}", tc))),
            };
            stack.push(SdqType::Int); // key
            stack.push(elem); // value
            let out = check(body, globals, stack, path);
            stack.pop();
            stack.pop();
            out
        }
        Expr::Merge(c1, c2, body) => {
            let t1 = check(c1, globals, stack, path)?;
            let t2 = check(c2, globals, stack, path)?;
            let (e1, e2) = match (t1, t2) {
                (SdqType::Dict { value: v1, .. }, SdqType::Dict { value: v2, .. }) => (*v1, *v2),
                _ => return Err(err(path, "merge requires two dictionaries")),
            };
            if !e1.is_scalar() || !e2.is_scalar() {
                return Err(err(path, "merge inputs must have scalar values"));
            }
            let shared = e1.join(&e2).ok_or_else(|| err(path, "merge value types differ"))?;
            stack.push(SdqType::Int); // k1
            stack.push(SdqType::Int); // k2
            stack.push(shared); // v
            let out = check(body, globals, stack, path);
            stack.pop();
            stack.pop();
            stack.pop();
            out
        }
    }
}

fn is_zero_lit(e: &Expr) -> bool {
    matches!(e, Expr::IntLit(0)) || e.real_value() == Some(0.0)
}

fn static_extent(e: &Expr) -> Option<i64> {
    match e {
        Expr::IntLit(n) => Some(*n),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::*;

    #[test]
    fn range_of_literal_bound() {
        let t = typecheck(&Expr::Range(int(0), int(8)), &TypeEnv::new()).unwrap();
        assert_eq!(t, SdqType::dict(Some(8), SdqType::Int));
    }

    #[test]
    fn inner_product_head_is_scalar() {
        // sum(<i,u> in U) sum(<j,v> in V) if (i==j) then u*v
        let mut env = TypeEnv::new();
        env.insert("U".into(), SdqType::dict(None, SdqType::Real));
        env.insert("V".into(), SdqType::dict(None, SdqType::Real));
        let body = if_then(cmp(CmpOp::Eq, var(3), var(1)), mul(var(2), var(0)));
        let e = sum(global("U"), sum(global("V"), body));
        assert_eq!(typecheck(&e, &env).unwrap(), SdqType::Real);
    }

    #[test]
    fn mismatch_reports_error() {
        let e = add(int(1), Expr::BoolLit(true).rc());
        assert!(typecheck(&e, &TypeEnv::new()).is_err());
    }
}
