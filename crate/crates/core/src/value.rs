//! Runtime values: scalars and nested dictionaries over integer keys.
//!
//! Dictionaries never store zero entries; a dictionary of zeros is the empty
//! dictionary, and the empty dictionary is interchangeable with the scalar
//! zero wherever a zero of unknown type is needed.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::EvalError;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
    Dict(BTreeMap<i64, Value>),
}

impl Value {
    /// The universal zero. Typed zeros (`0.0`, `{}`) compare zero-equal.
    pub fn zero() -> Value {
        Value::Int(0)
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Value::Int(i) => *i == 0,
            Value::Real(x) => *x == 0.0,
            Value::Bool(_) => false,
            Value::Dict(d) => d.is_empty(),
        }
    }

    pub fn as_int(&self) -> Result<i64, EvalError> {
        match self {
            Value::Int(i) => Ok(*i),
            Value::Real(x) if *x == 0.0 => Ok(0),
            _ => Err(EvalError::TypeMismatch(format!("expected int, got {}", self))),
        }
    }

    pub fn as_dict(&self) -> Result<BTreeMap<i64, Value>, EvalError> {
        match self {
            Value::Dict(d) => Ok(d.clone()),
            v if v.is_zero() => Ok(BTreeMap::new()),
            _ => Err(EvalError::TypeMismatch(format!("expected dictionary, got {}", self))),
        }
    }

    /// Structural equality up to zero identification: all typed zeros are
    /// equal, and missing keys equal zero entries.
    pub fn value_eq(&self, other: &Value) -> bool {
        match (self, other) {
            (a, b) if a.is_zero() && b.is_zero() => true,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Int(a), Value::Real(b)) | (Value::Real(b), Value::Int(a)) => *a as f64 == *b,
            (Value::Real(a), Value::Real(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Dict(a), Value::Dict(b)) => {
                a.len() == b.len() && a.iter().zip(b.iter()).all(|((ka, va), (kb, vb))| ka == kb && va.value_eq(vb))
            }
            _ => false,
        }
    }

    /// Like `value_eq` but real leaves compare within `tol` relative error.
    pub fn approx_eq(&self, other: &Value, tol: f64) -> bool {
        fn close(a: f64, b: f64, tol: f64) -> bool {
            let scale = a.abs().max(b.abs()).max(1.0);
            (a - b).abs() <= tol * scale
        }
        match (self, other) {
            (a, b) if a.is_zero() && b.is_zero() => true,
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Int(a), Value::Real(b)) | (Value::Real(b), Value::Int(a)) => close(*a as f64, *b, tol),
            (Value::Real(a), Value::Real(b)) => close(*a, *b, tol),
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Dict(a), Value::Dict(b)) => {
                a.len() == b.len() && a.iter().zip(b.iter()).all(|((ka, va), (kb, vb))| ka == kb && va.approx_eq(vb, tol))
            }
            _ => false,
        }
    }

    pub fn as_real(&self) -> Result<f64, EvalError> {
        match self {
            Value::Int(i) => Ok(*i as f64),
            Value::Real(x) => Ok(*x),
            _ => Err(EvalError::TypeMismatch(format!("expected scalar, got {}", self))),
        }
    }
}

/// Build a dictionary, dropping zero values.
pub fn dict_from_iter(entries: impl IntoIterator<Item = (i64, Value)>) -> Value {
    let mut m = BTreeMap::new();
    for (k, v) in entries {
        if !v.is_zero() {
            m.insert(k, v);
        }
    }
    Value::Dict(m)
}

/// Element-wise semiring addition. Zeros are identities regardless of type.
pub fn value_add(a: &Value, b: &Value) -> Result<Value, EvalError> {
    if a.is_zero() {
        return Ok(b.clone());
    }
    if b.is_zero() {
        return Ok(a.clone());
    }
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Ok(Value::Int(x + y)),
        (Value::Int(x), Value::Real(y)) | (Value::Real(y), Value::Int(x)) => Ok(Value::Real(*x as f64 + y)),
        (Value::Real(x), Value::Real(y)) => Ok(Value::Real(x + y)),
        (Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(*x || *y)),
        (Value::Dict(x), Value::Dict(y)) => {
            let mut out = x.clone();
            for (k, v) in y {
                match out.remove(k) {
                    None => {
                        out.insert(*k, v.clone());
                    }
                    Some(prev) => {
                        let s = value_add(&prev, v)?;
                        if !s.is_zero() {
                            out.insert(*k, s);
                        }
                    }
                }
            }
            Ok(Value::Dict(out))
        }
        _ => Err(EvalError::TypeMismatch(format!("cannot add {} and {}", a, b))),
    }
}

/// Element-wise semiring multiplication. A scalar multiplied with a
/// dictionary broadcasts over the values; zero annihilates.
pub fn value_mul(a: &Value, b: &Value) -> Result<Value, EvalError> {
    if a.is_zero() || b.is_zero() {
        return Ok(Value::zero());
    }
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => Ok(Value::Int(x * y)),
        (Value::Int(x), Value::Real(y)) | (Value::Real(y), Value::Int(x)) => Ok(Value::Real(*x as f64 * y)),
        (Value::Real(x), Value::Real(y)) => Ok(Value::Real(x * y)),
        (Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(*x && *y)),
        (s, Value::Dict(d)) if !matches!(s, Value::Dict(_)) => {
            let mut out = BTreeMap::new();
            for (k, v) in d {
                let p = value_mul(s, v)?;
                if !p.is_zero() {
                    out.insert(*k, p);
                }
            }
            Ok(Value::Dict(out))
        }
        (Value::Dict(d), s) if !matches!(s, Value::Dict(_)) => value_mul(s, &Value::Dict(d.clone())),
        (Value::Dict(x), Value::Dict(y)) => {
            let mut out = BTreeMap::new();
            for (k, v) in x {
                if let Some(w) = y.get(k) {
                    let p = value_mul(v, w)?;
                    if !p.is_zero() {
                        out.insert(*k, p);
                    }
                }
            }
            Ok(Value::Dict(out))
        }
        _ => Err(EvalError::TypeMismatch(format!("cannot multiply {} and {}", a, b))),
    }
}

pub fn value_neg(a: &Value) -> Result<Value, EvalError> {
    match a {
        Value::Int(x) => Ok(Value::Int(-x)),
        Value::Real(x) => Ok(Value::Real(-x)),
        Value::Dict(d) => {
            let mut out = BTreeMap::new();
            for (k, v) in d {
                let n = value_neg(v)?;
                if !n.is_zero() {
                    out.insert(*k, n);
                }
            }
            Ok(Value::Dict(out))
        }
        Value::Bool(_) => Err(EvalError::TypeMismatch("cannot negate a boolean".into())),
    }
}

pub fn value_sub(a: &Value, b: &Value) -> Result<Value, EvalError> {
    value_add(a, &value_neg(b)?)
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{}", i),
            Value::Real(x) => {
                if *x == x.trunc() && x.is_finite() && x.abs() < 1e15 {
                    write!(f, "{:.1}", x)
                } else {
                    write!(f, "{}", x)
                }
            }
            Value::Bool(b) => write!(f, "{}", b),
            Value::Dict(d) => {
                write!(f, "{{")?;
                for (i, (k, v)) in d.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{} -> {}", k, v)?;
                }
                write!(f, "}}")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(entries: &[(i64, i64)]) -> Value {
        dict_from_iter(entries.iter().map(|(k, v)| (*k, Value::Int(*v))))
    }

    #[test]
    fn singleton_addition_merges_keys() {
        assert_eq!(value_add(&d(&[(1, 2)]), &d(&[(1, 3)])).unwrap(), d(&[(1, 5)]));
        assert_eq!(value_add(&d(&[(1, 2)]), &d(&[(2, 3)])).unwrap(), d(&[(1, 2), (2, 3)]));
    }

    #[test]
    fn zero_elimination_on_add() {
        let out = value_add(&d(&[(1, 2)]), &d(&[(1, -2)])).unwrap();
        assert_eq!(out, Value::Dict(BTreeMap::new()));
        assert!(out.is_zero());
    }

    #[test]
    fn scalar_broadcast() {
        let v = dict_from_iter([(0, Value::Int(3)), (4, Value::Int(5))]);
        let out = value_mul(&Value::Int(2), &v).unwrap();
        assert_eq!(out, dict_from_iter([(0, Value::Int(6)), (4, Value::Int(10))]));
    }

    #[test]
    fn zero_annihilates() {
        let v = d(&[(0, 3)]);
        assert!(value_mul(&v, &Value::Int(0)).unwrap().is_zero());
        assert!(value_mul(&Value::Int(0), &v).unwrap().is_zero());
    }

    #[test]
    fn zero_equivalence() {
        assert!(Value::Int(0).value_eq(&Value::Dict(BTreeMap::new())));
        assert!(Value::Real(0.0).value_eq(&Value::Int(0)));
        assert!(!Value::Int(1).value_eq(&Value::Real(1.5)));
    }
}
