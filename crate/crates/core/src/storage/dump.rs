//! Plain-text buffer dumps: one line per buffer, both emitted and parsed,
//! for catalogs on disk and golden tests.
//!
//! ```text
//! scalar M int 3
//! array C_pos2 int 0 3 3 5
//! array C_val real 6 9 8 5 7
//! hash H_hash real 2 : 0 0 -> 6 ; 0 2 -> 9
//! trie T_trie real 2 : 0 0 -> 6 ; 2 3 -> 7
//! ```

use std::collections::BTreeMap;

use crate::error::StorageError;
use crate::storage::{Elem, PhysicalBuffer, TrieNode};

pub fn emit_buffer(name: &str, buf: &PhysicalBuffer) -> String {
    match buf {
        PhysicalBuffer::IntScalar(x) => format!("scalar {} int {}", name, x),
        PhysicalBuffer::RealScalar(x) => format!("scalar {} real {}", name, x),
        PhysicalBuffer::IntArray(v) => {
            let body: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            format!("array {} int {}", name, body.join(" "))
        }
        PhysicalBuffer::RealArray(v) => {
            let body: Vec<String> = v.iter().map(|x| fmt_real(*x)).collect();
            format!("array {} real {}", name, body.join(" "))
        }
        PhysicalBuffer::Hash { elem, arity, entries } => {
            let body: Vec<String> = entries
                .iter()
                .map(|(ks, v)| {
                    let keys: Vec<String> = ks.iter().map(|k| k.to_string()).collect();
                    format!("{} -> {}", keys.join(" "), fmt_real(*v))
                })
                .collect();
            format!("hash {} {} {} : {}", name, elem_name(*elem), arity, body.join(" ; "))
        }
        PhysicalBuffer::Trie { elem, depth, root } => {
            let mut body = Vec::new();
            collect_trie(root, &mut Vec::new(), &mut body);
            format!("trie {} {} {} : {}", name, elem_name(*elem), depth, body.join(" ; "))
        }
    }
}

fn collect_trie(m: &BTreeMap<i64, TrieNode>, prefix: &mut Vec<i64>, out: &mut Vec<String>) {
    for (k, node) in m {
        prefix.push(*k);
        match node {
            TrieNode::Leaf(v) => {
                let keys: Vec<String> = prefix.iter().map(|k| k.to_string()).collect();
                out.push(format!("{} -> {}", keys.join(" "), fmt_real(*v)));
            }
            TrieNode::Map(sub) => collect_trie(sub, prefix, out),
        }
        prefix.pop();
    }
}

fn fmt_real(x: f64) -> String {
    if x == x.trunc() && x.is_finite() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{}", x)
    }
}

fn elem_name(e: Elem) -> &'static str {
    match e {
        Elem::Int => "int",
        Elem::Real => "real",
    }
}

pub fn emit_catalog_buffers<'a>(buffers: impl Iterator<Item = (&'a String, &'a PhysicalBuffer)>) -> String {
    let mut lines: Vec<String> = buffers.map(|(n, b)| emit_buffer(n, b)).collect();
    lines.sort();
    lines.join("\n") + "\n"
}

pub fn parse_buffer_line(line: &str) -> Result<Option<(String, PhysicalBuffer)>, StorageError> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let bad = |msg: &str| StorageError::Parse { path: "<dump>".into(), msg: format!("{}: {}", msg, line) };
    let toks: Vec<&str> = line.split_whitespace().collect();
    match toks[0] {
        "scalar" => {
            if toks.len() != 4 {
                return Err(bad("scalar NAME TYPE VALUE"));
            }
            let buf = match toks[2] {
                "int" => PhysicalBuffer::IntScalar(toks[3].parse().map_err(|_| bad("bad int"))?),
                "real" => PhysicalBuffer::RealScalar(toks[3].parse().map_err(|_| bad("bad real"))?),
                _ => return Err(bad("type must be int or real")),
            };
            Ok(Some((toks[1].to_string(), buf)))
        }
        "array" => {
            if toks.len() < 3 {
                return Err(bad("array NAME TYPE VALUES..."));
            }
            let name = toks[1].to_string();
            match toks[2] {
                "int" => {
                    let vals: Result<Vec<i64>, _> = toks[3..].iter().map(|t| t.parse()).collect();
                    Ok(Some((name, PhysicalBuffer::IntArray(vals.map_err(|_| bad("bad int entry"))?))))
                }
                "real" => {
                    let vals: Result<Vec<f64>, _> = toks[3..].iter().map(|t| t.parse()).collect();
                    Ok(Some((name, PhysicalBuffer::RealArray(vals.map_err(|_| bad("bad real entry"))?))))
                }
                _ => Err(bad("type must be int or real")),
            }
        }
        "hash" | "trie" => {
            if toks.len() < 5 || toks[4] != ":" {
                return Err(bad("hash|trie NAME TYPE ARITY : K.. -> V ; ..."));
            }
            let name = toks[1].to_string();
            let elem = match toks[2] {
                "int" => Elem::Int,
                "real" => Elem::Real,
                _ => return Err(bad("type must be int or real")),
            };
            let arity: usize = toks[3].parse().map_err(|_| bad("bad arity"))?;
            let rest = line.splitn(2, " : ").nth(1).unwrap_or("");
            let mut entries = BTreeMap::new();
            for part in rest.split(';') {
                let part = part.trim();
                if part.is_empty() {
                    continue;
                }
                let (ks, v) = part.split_once("->").ok_or_else(|| bad("missing ->"))?;
                let keys: Result<Vec<i64>, _> = ks.split_whitespace().map(|t| t.parse()).collect();
                let keys = keys.map_err(|_| bad("bad key"))?;
                if keys.len() != arity {
                    return Err(bad("key arity mismatch"));
                }
                let v: f64 = v.trim().parse().map_err(|_| bad("bad value"))?;
                entries.insert(keys, v);
            }
            if toks[0] == "hash" {
                Ok(Some((name, PhysicalBuffer::Hash { elem, arity, entries })))
            } else {
                let mut root = BTreeMap::new();
                for (ks, v) in entries {
                    super::formats::insert_trie_pub(&mut root, &ks, v);
                }
                Ok(Some((name, PhysicalBuffer::Trie { elem, depth: arity, root })))
            }
        }
        _ => Err(bad("unknown buffer kind")),
    }
}

pub fn parse_catalog_buffers(text: &str) -> Result<Vec<(String, PhysicalBuffer)>, StorageError> {
    let mut out = Vec::new();
    for line in text.lines() {
        if let Some(pair) = parse_buffer_line(line)? {
            out.push(pair);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_array_and_scalar() {
        for (name, buf) in [
            ("M".to_string(), PhysicalBuffer::IntScalar(3)),
            ("v".to_string(), PhysicalBuffer::RealArray(vec![6.0, 9.5, -1.0])),
            ("p".to_string(), PhysicalBuffer::IntArray(vec![0, 3, 3, 5])),
        ] {
            let line = emit_buffer(&name, &buf);
            let (n2, b2) = parse_buffer_line(&line).unwrap().unwrap();
            assert_eq!((name, buf), (n2, b2));
        }
    }

    #[test]
    fn round_trip_hash_and_trie() {
        let mut entries = BTreeMap::new();
        entries.insert(vec![0, 0], 6.0);
        entries.insert(vec![2, 3], 7.0);
        let h = PhysicalBuffer::Hash { elem: Elem::Real, arity: 2, entries };
        let line = emit_buffer("H", &h);
        let (_, b2) = parse_buffer_line(&line).unwrap().unwrap();
        assert_eq!(h, b2);

        let mut root = BTreeMap::new();
        super::super::formats::insert_trie_pub(&mut root, &[0, 1], 2.5);
        super::super::formats::insert_trie_pub(&mut root, &[4, 0], 1.0);
        let t = PhysicalBuffer::Trie { elem: Elem::Real, depth: 2, root };
        let line = emit_buffer("T", &t);
        let (_, b2) = parse_buffer_line(&line).unwrap().unwrap();
        assert_eq!(t, b2);
    }
}
