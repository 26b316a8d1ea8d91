//! Builders from coordinate tensors to physical formats, each emitting the
//! buffers plus the storage-mapping text that reads them back.
//!
//! Buffer naming follows the `T_pos1/T_idx1/T_pos2/.../T_val` convention.
//! Within each segment, idx entries are ascending; the sorted co-iteration
//! of two idx subarrays depends on this.

use std::collections::BTreeMap;

use std::rc::Rc;

use crate::error::StorageError;
use crate::expr::Expr;
use crate::parser::parse_lower;
use crate::storage::{CooTensor, Elem, PhysicalBuffer, TrieNode};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatSpec {
    Dense,
    Coo,
    Csr,
    Csc,
    Dcsr,
    /// Compressed sparse fiber; supported for orders 2 and 3.
    Csf,
    DokHash,
    Trie,
}

impl FormatSpec {
    pub fn parse(s: &str) -> Option<FormatSpec> {
        Some(match s.to_lowercase().as_str() {
            "dense" => FormatSpec::Dense,
            "coo" => FormatSpec::Coo,
            "csr" => FormatSpec::Csr,
            "csc" => FormatSpec::Csc,
            "dcsr" => FormatSpec::Dcsr,
            "csf" => FormatSpec::Csf,
            "dok" | "dok_hash" | "hash" => FormatSpec::DokHash,
            "trie" => FormatSpec::Trie,
            _ => return None,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            FormatSpec::Dense => "dense",
            FormatSpec::Coo => "coo",
            FormatSpec::Csr => "csr",
            FormatSpec::Csc => "csc",
            FormatSpec::Dcsr => "dcsr",
            FormatSpec::Csf => "csf",
            FormatSpec::DokHash => "dok_hash",
            FormatSpec::Trie => "trie",
        }
    }
}

/// Built output: named buffers plus the mapping expression and its text.
#[derive(Debug, Clone)]
pub struct BuiltFormat {
    pub buffers: Vec<(String, PhysicalBuffer)>,
    pub tsm_text: String,
    pub tsm: Rc<Expr>,
}

pub fn build_format(t: &CooTensor, spec: FormatSpec, name: &str) -> Result<BuiltFormat, StorageError> {
    let (buffers, tsm_text) = match spec {
        FormatSpec::Dense => build_dense(t, name)?,
        FormatSpec::Coo => build_coo(t, name)?,
        FormatSpec::Csr => build_csr(t, name, false)?,
        FormatSpec::Csc => build_csr(t, name, true)?,
        FormatSpec::Dcsr => build_dcsr(t, name)?,
        FormatSpec::Csf => build_csf(t, name)?,
        FormatSpec::DokHash => build_dok(t, name)?,
        FormatSpec::Trie => build_trie(t, name)?,
    };
    let tsm = parse_lower(&tsm_text, None).map_err(|e| StorageError::Parse {
        path: format!("<tsm for {}>", name),
        msg: e.to_string(),
    })?;
    Ok(BuiltFormat { buffers, tsm_text, tsm })
}

fn unsupported(spec: &str, t: &CooTensor) -> StorageError {
    StorageError::UnsupportedOrder { format: spec.to_string(), order: t.order() }
}

fn build_dense(t: &CooTensor, name: &str) -> Result<(Vec<(String, PhysicalBuffer)>, String), StorageError> {
    if t.order() == 0 || t.order() > 3 {
        return Err(unsupported("dense", t));
    }
    let total: i64 = t.dims.iter().product();
    let mut data = vec![0.0; total as usize];
    for (idx, v) in &t.entries {
        let mut off = 0i64;
        for (i, n) in idx.iter().zip(&t.dims) {
            off = off * n + i;
        }
        data[off as usize] = *v;
    }
    let mut buffers = vec![(format!("{}_val", name), PhysicalBuffer::RealArray(data))];
    for (d, n) in t.dims.iter().enumerate() {
        buffers.push((format!("{}_dim{}", name, d + 1), PhysicalBuffer::IntScalar(*n)));
    }
    let tsm = match t.order() {
        1 => format!("sum(<i,_> in 0:{n}_dim1) {{ @unique i -> {n}_val(i) }}", n = name),
        2 => format!(
            "sum(<i,_> in 0:{n}_dim1) {{ @unique i -> sum(<j,_> in 0:{n}_dim2) {{ @unique j -> {n}_val(i*{n}_dim2+j) }} }}",
            n = name
        ),
        _ => format!(
            "sum(<i,_> in 0:{n}_dim1) {{ @unique i -> sum(<j,_> in 0:{n}_dim2) {{ @unique j -> \
             sum(<k,_> in 0:{n}_dim3) {{ @unique k -> {n}_val((i*{n}_dim2+j)*{n}_dim3+k) }} }} }}",
            n = name
        ),
    };
    Ok((buffers, tsm))
}

fn build_coo(t: &CooTensor, name: &str) -> Result<(Vec<(String, PhysicalBuffer)>, String), StorageError> {
    let d = t.order();
    if d == 0 {
        return Err(unsupported("coo", t));
    }
    let nnz = t.nnz() as i64;
    let mut buffers = vec![(format!("{}_pos", name), PhysicalBuffer::IntArray(vec![0, nnz]))];
    for level in 0..d {
        let idx: Vec<i64> = t.entries.iter().map(|(i, _)| i[level]).collect();
        buffers.push((format!("{}_idx{}", name, level + 1), PhysicalBuffer::IntArray(idx)));
    }
    buffers.push((format!("{}_val", name), PhysicalBuffer::RealArray(t.entries.iter().map(|(_, v)| *v).collect())));
    // entries are sorted, so the first index array may carry @unique only
    // for order 1; deeper orders repeat the leading index
    let mut body = format!("{}_val(p)", name);
    for level in (1..d).rev() {
        body = format!("{{ {n}_idx{l}(p) -> {body} }}", n = name, l = level + 1, body = body);
    }
    let tsm = if d == 1 {
        format!("sum(<p,i> in {n}_idx1) {{ @unique i -> {n}_val(p) }}", n = name)
    } else {
        format!("sum(<p,i> in {n}_idx1) {{ i -> {body} }}", n = name, body = body)
    };
    Ok((buffers, tsm))
}

/// CSR (dense rows, sparse columns). With `transpose` the roles flip: the
/// outer loop runs over columns and the emitted logical tensor is column-major
/// nested (CSC of the same matrix, keyed column first).
fn build_csr(t: &CooTensor, name: &str, transpose: bool) -> Result<(Vec<(String, PhysicalBuffer)>, String), StorageError> {
    if t.order() != 2 {
        return Err(unsupported(if transpose { "csc" } else { "csr" }, t));
    }
    let (outer_dim, _inner_dim) = if transpose { (t.dims[1], t.dims[0]) } else { (t.dims[0], t.dims[1]) };
    let mut rows: BTreeMap<i64, Vec<(i64, f64)>> = BTreeMap::new();
    for (idx, v) in &t.entries {
        let (o, i) = if transpose { (idx[1], idx[0]) } else { (idx[0], idx[1]) };
        rows.entry(o).or_default().push((i, *v));
    }
    let mut pos2 = vec![0i64];
    let mut idx2 = Vec::new();
    let mut val = Vec::new();
    for o in 0..outer_dim {
        if let Some(mut cols) = rows.remove(&o) {
            cols.sort_by(|a, b| a.0.cmp(&b.0));
            for (i, v) in cols {
                idx2.push(i);
                val.push(v);
            }
        }
        pos2.push(idx2.len() as i64);
    }
    let buffers = vec![
        (format!("{}_len1", name), PhysicalBuffer::IntScalar(outer_dim)),
        (format!("{}_pos2", name), PhysicalBuffer::IntArray(pos2)),
        (format!("{}_idx2", name), PhysicalBuffer::IntArray(idx2)),
        (format!("{}_val", name), PhysicalBuffer::RealArray(val)),
    ];
    let tsm = format!(
        "sum(<row,_> in 0:{n}_len1) \
         {{ @unique row -> sum(<off,col> in {n}_idx2({n}_pos2(row):{n}_pos2(row+1))) \
         {{ @unique col -> {n}_val(off) }} }}",
        n = name
    );
    Ok((buffers, tsm))
}

fn build_dcsr(t: &CooTensor, name: &str) -> Result<(Vec<(String, PhysicalBuffer)>, String), StorageError> {
    if t.order() != 2 {
        return Err(unsupported("dcsr", t));
    }
    let mut rows: BTreeMap<i64, Vec<(i64, f64)>> = BTreeMap::new();
    for (idx, v) in &t.entries {
        rows.entry(idx[0]).or_default().push((idx[1], *v));
    }
    let mut idx1 = Vec::new();
    let mut pos2 = vec![0i64];
    let mut idx2 = Vec::new();
    let mut val = Vec::new();
    for (r, mut cols) in rows {
        idx1.push(r);
        cols.sort_by(|a, b| a.0.cmp(&b.0));
        for (i, v) in cols {
            idx2.push(i);
            val.push(v);
        }
        pos2.push(idx2.len() as i64);
    }
    let buffers = vec![
        (format!("{}_pos1", name), PhysicalBuffer::IntArray(vec![0, idx1.len() as i64])),
        (format!("{}_idx1", name), PhysicalBuffer::IntArray(idx1)),
        (format!("{}_pos2", name), PhysicalBuffer::IntArray(pos2)),
        (format!("{}_idx2", name), PhysicalBuffer::IntArray(idx2)),
        (format!("{}_val", name), PhysicalBuffer::RealArray(val)),
    ];
    let tsm = format!(
        "sum(<i_pos, i> in {n}_idx1) \
         {{ @unique i -> sum(<j_pos, j> in {n}_idx2({n}_pos2(i_pos):{n}_pos2(i_pos+1))) \
         {{ @unique j -> {n}_val(j_pos) }} }}",
        n = name
    );
    Ok((buffers, tsm))
}

/// Compressed sparse fiber: one sparse level per dimension, pos/idx pairs
/// chained by parent position.
fn build_csf(t: &CooTensor, name: &str) -> Result<(Vec<(String, PhysicalBuffer)>, String), StorageError> {
    let d = t.order();
    if !(2..=3).contains(&d) {
        return Err(unsupported("csf", t));
    }
    if d == 2 {
        return build_dcsr(t, name);
    }
    // level 1: distinct leading indices (entries are sorted)
    let mut idx1: Vec<i64> = Vec::new();
    let mut pos2 = vec![0i64];
    let mut idx2: Vec<i64> = Vec::new();
    let mut pos3 = vec![0i64];
    let mut idx3: Vec<i64> = Vec::new();
    let mut val: Vec<f64> = Vec::new();

    let mut last_i: Option<i64> = None;
    let mut last_ik: Option<(i64, i64)> = None;
    for (idx, v) in &t.entries {
        let (i, k, l) = (idx[0], idx[1], idx[2]);
        if last_i != Some(i) {
            if last_i.is_some() {
                pos2.push(idx2.len() as i64);
            }
            idx1.push(i);
            last_i = Some(i);
            last_ik = None;
        }
        if last_ik != Some((i, k)) {
            if last_ik.is_some() {
                pos3.push(idx3.len() as i64);
            }
            idx2.push(k);
            last_ik = Some((i, k));
        }
        idx3.push(l);
        val.push(*v);
    }
    if last_i.is_some() {
        pos2.push(idx2.len() as i64);
    }
    if last_ik.is_some() {
        pos3.push(idx3.len() as i64);
    }

    let buffers = vec![
        (format!("{}_idx1", name), PhysicalBuffer::IntArray(idx1)),
        (format!("{}_pos2", name), PhysicalBuffer::IntArray(pos2)),
        (format!("{}_idx2", name), PhysicalBuffer::IntArray(idx2)),
        (format!("{}_pos3", name), PhysicalBuffer::IntArray(pos3)),
        (format!("{}_idx3", name), PhysicalBuffer::IntArray(idx3)),
        (format!("{}_val", name), PhysicalBuffer::RealArray(val)),
    ];
    let tsm = format!(
        "sum(<i_pos, i> in {n}_idx1) \
         {{ @unique i -> sum(<k_pos, k> in {n}_idx2({n}_pos2(i_pos):{n}_pos2(i_pos+1))) \
         {{ @unique k -> sum(<l_pos, l> in {n}_idx3({n}_pos3(k_pos):{n}_pos3(k_pos+1))) \
         {{ @unique l -> {n}_val(l_pos) }} }} }}",
        n = name
    );
    Ok((buffers, tsm))
}

fn build_dok(t: &CooTensor, name: &str) -> Result<(Vec<(String, PhysicalBuffer)>, String), StorageError> {
    let d = t.order();
    if d == 0 {
        return Err(unsupported("dok_hash", t));
    }
    let entries: BTreeMap<Vec<i64>, f64> = t.entries.iter().cloned().collect();
    let buffers =
        vec![(format!("{}_hash", name), PhysicalBuffer::Hash { elem: Elem::Real, arity: d, entries })];
    let binder: Vec<String> = (0..d).map(|i| format!("i{}", i)).collect();
    let key = binder.join(",");
    let tsm = if d == 1 {
        format!("sum(<{k},v> in {n}_hash) {{ ({k}) -> v }}", k = key, n = name)
    } else {
        format!("sum(<({k}),v> in {n}_hash) {{ ({k}) -> v }}", k = key, n = name)
    };
    Ok((buffers, tsm))
}

fn build_trie(t: &CooTensor, name: &str) -> Result<(Vec<(String, PhysicalBuffer)>, String), StorageError> {
    let d = t.order();
    if d == 0 {
        return Err(unsupported("trie", t));
    }
    let mut root: BTreeMap<i64, TrieNode> = BTreeMap::new();
    for (idx, v) in &t.entries {
        insert_trie(&mut root, idx, *v);
    }
    let buffers =
        vec![(format!("{}_trie", name), PhysicalBuffer::Trie { elem: Elem::Real, depth: d, root })];
    // one nested iteration per level
    let mut body = format!("{{ i{} -> v0 }}", d - 1);
    for level in (0..d - 1).rev() {
        body = format!("{{ i{} -> {} }}", level, body);
    }
    let mut tsm = body;
    for level in (0..d).rev() {
        let coll = if level == 0 { format!("{}_trie", name) } else { format!("v{}", level) };
        let val = if level == d - 1 { "v0".to_string() } else { format!("v{}", level + 1) };
        tsm = format!("sum(<i{}, {}> in {}) {}", level, val, coll, tsm);
    }
    Ok((buffers, tsm))
}

pub(crate) fn insert_trie_pub(node: &mut BTreeMap<i64, TrieNode>, idx: &[i64], v: f64) {
    insert_trie(node, idx, v)
}

fn insert_trie(node: &mut BTreeMap<i64, TrieNode>, idx: &[i64], v: f64) {
    if idx.len() == 1 {
        node.insert(idx[0], TrieNode::Leaf(v));
    } else {
        let entry = node.entry(idx[0]).or_insert_with(|| TrieNode::Map(BTreeMap::new()));
        match entry {
            TrieNode::Map(m) => insert_trie(m, &idx[1..], v),
            TrieNode::Leaf(_) => unreachable!("mixed-depth trie"),
        }
    }
}

/// All specs applicable to a tensor of the given order.
pub fn supported_specs(order: usize) -> Vec<FormatSpec> {
    let mut out = vec![FormatSpec::Coo, FormatSpec::DokHash, FormatSpec::Trie];
    if (1..=3).contains(&order) {
        out.push(FormatSpec::Dense);
    }
    if order == 2 {
        out.extend([FormatSpec::Csr, FormatSpec::Csc, FormatSpec::Dcsr]);
    }
    if order == 3 {
        out.push(FormatSpec::Csf);
    }
    out
}

/// Build a format and register its buffers, mapping, and exact statistics.
pub fn install(
    catalog: &mut super::StorageCatalog,
    t: &CooTensor,
    spec: FormatSpec,
    name: &str,
) -> Result<(), StorageError> {
    let built = build_format(t, spec, name)?;
    for (bname, buf) in built.buffers {
        catalog.insert_buffer(&bname, buf)?;
    }
    catalog.insert_mapping(name, built.tsm)?;
    catalog.stats.insert(name.to_string(), super::coo::infer_stats(t));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1_matrix() -> CooTensor {
        CooTensor::new(
            vec![3, 4],
            vec![
                (vec![0, 0], 6.0),
                (vec![0, 2], 9.0),
                (vec![0, 3], 8.0),
                (vec![2, 0], 5.0),
                (vec![2, 3], 7.0),
            ],
        )
        .unwrap()
    }

    fn buf_ints(b: &PhysicalBuffer) -> Vec<i64> {
        match b {
            PhysicalBuffer::IntArray(v) => v.clone(),
            _ => panic!("not an int array"),
        }
    }

    fn buf_reals(b: &PhysicalBuffer) -> Vec<f64> {
        match b {
            PhysicalBuffer::RealArray(v) => v.clone(),
            _ => panic!("not a real array"),
        }
    }

    #[test]
    fn coo_of_vector() {
        // v = (9, 0, 7, 5)
        let t = CooTensor::new(vec![4], vec![(vec![0], 9.0), (vec![2], 7.0), (vec![3], 5.0)]).unwrap();
        let built = build_format(&t, FormatSpec::Coo, "v").unwrap();
        let by_name: BTreeMap<_, _> = built.buffers.iter().cloned().collect();
        assert_eq!(buf_ints(&by_name["v_pos"]), vec![0, 3]);
        assert_eq!(buf_ints(&by_name["v_idx1"]), vec![0, 2, 3]);
        assert_eq!(buf_reals(&by_name["v_val"]), vec![9.0, 7.0, 5.0]);
    }

    #[test]
    fn csr_of_fig1_matrix() {
        let built = build_format(&fig1_matrix(), FormatSpec::Csr, "C").unwrap();
        let by_name: BTreeMap<_, _> = built.buffers.iter().cloned().collect();
        assert_eq!(by_name["C_len1"], PhysicalBuffer::IntScalar(3));
        assert_eq!(buf_ints(&by_name["C_pos2"]), vec![0, 3, 3, 5]);
        assert_eq!(buf_ints(&by_name["C_idx2"]), vec![0, 2, 3, 0, 3]);
        assert_eq!(buf_reals(&by_name["C_val"]), vec![6.0, 9.0, 8.0, 5.0, 7.0]);
    }

    #[test]
    fn dcsr_of_fig1_matrix() {
        let built = build_format(&fig1_matrix(), FormatSpec::Dcsr, "C").unwrap();
        let by_name: BTreeMap<_, _> = built.buffers.iter().cloned().collect();
        assert_eq!(buf_ints(&by_name["C_pos1"]), vec![0, 2]);
        assert_eq!(buf_ints(&by_name["C_idx1"]), vec![0, 2]);
        assert_eq!(buf_ints(&by_name["C_pos2"]), vec![0, 3, 5]);
        assert_eq!(buf_ints(&by_name["C_idx2"]), vec![0, 2, 3, 0, 3]);
        assert_eq!(buf_reals(&by_name["C_val"]), vec![6.0, 9.0, 8.0, 5.0, 7.0]);
    }

    #[test]
    fn csr_rejects_order_3() {
        let t = CooTensor::new(vec![2, 2, 2], vec![(vec![0, 0, 0], 1.0)]).unwrap();
        assert!(matches!(
            build_format(&t, FormatSpec::Csr, "T"),
            Err(StorageError::UnsupportedOrder { .. })
        ));
    }
}
