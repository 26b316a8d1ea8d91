//! Coordinate-format tensors and external file ingestion.

use std::collections::BTreeMap;
use std::path::Path;

use crate::costing::Cardinality;
use crate::error::StorageError;
use crate::value::Value;

/// A deduplicated list of nonzero entries with 0-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct CooTensor {
    pub dims: Vec<i64>,
    /// sorted lexicographically by index tuple; no duplicates, no zeros
    pub entries: Vec<(Vec<i64>, f64)>,
}

impl CooTensor {
    pub fn new(dims: Vec<i64>, mut entries: Vec<(Vec<i64>, f64)>) -> Result<CooTensor, StorageError> {
        entries.retain(|(_, v)| *v != 0.0);
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(StorageError::DimensionMismatch(format!("duplicate coordinate {:?}", w[0].0)));
            }
        }
        for (idx, _) in &entries {
            if idx.len() != dims.len() {
                return Err(StorageError::DimensionMismatch(format!(
                    "index {:?} has order {}, tensor has order {}",
                    idx,
                    idx.len(),
                    dims.len()
                )));
            }
            for (d, (i, n)) in idx.iter().zip(&dims).enumerate() {
                if *i < 0 || i >= n {
                    return Err(StorageError::DimensionMismatch(format!(
                        "index {:?} out of bounds in dimension {} (extent {})",
                        idx, d, n
                    )));
                }
            }
        }
        Ok(CooTensor { dims, entries })
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    /// The tensor as a nested dictionary value.
    pub fn to_value(&self) -> Value {
        if self.order() == 0 {
            return self.entries.first().map(|(_, v)| Value::Real(*v)).unwrap_or(Value::Real(0.0));
        }
        let mut root = Value::Dict(BTreeMap::new());
        for (idx, v) in &self.entries {
            super::insert_nested(&mut root, idx, Value::Real(*v));
        }
        root
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExternalFormat {
    MatrixMarket,
    FrosttTns,
    CsvTriples,
}

impl ExternalFormat {
    pub fn from_path(path: &Path) -> Option<ExternalFormat> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("mtx") => Some(ExternalFormat::MatrixMarket),
            Some("tns") => Some(ExternalFormat::FrosttTns),
            Some("csv") | Some("txt") => Some(ExternalFormat::CsvTriples),
            _ => None,
        }
    }
}

/// Load an external tensor file. `dims` overrides the inferred extents for
/// formats that do not carry them (`.tns`, CSV).
pub fn load_external(path: &Path, format: ExternalFormat, dims: Option<Vec<i64>>) -> Result<CooTensor, StorageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| StorageError::Parse { path: path.display().to_string(), msg: e.to_string() })?;
    parse_external(&text, format, dims).map_err(|msg| StorageError::Parse { path: path.display().to_string(), msg })
}

pub fn parse_external(text: &str, format: ExternalFormat, dims: Option<Vec<i64>>) -> Result<CooTensor, String> {
    match format {
        ExternalFormat::MatrixMarket => parse_matrix_market(text),
        ExternalFormat::FrosttTns => parse_index_value_lines(text, dims, 1),
        ExternalFormat::CsvTriples => {
            let cleaned: String =
                text.lines().map(|l| l.replace(',', " ")).collect::<Vec<_>>().join("\n");
            parse_index_value_lines(&cleaned, dims, 0)
        }
    }
}

fn parse_matrix_market(text: &str) -> Result<CooTensor, String> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or("empty file")?;
    if !header.starts_with("%%MatrixMarket") {
        return Err("missing MatrixMarket header".into());
    }
    let header_l = header.to_lowercase();
    if !header_l.contains("coordinate") {
        return Err("only coordinate MatrixMarket files are supported".into());
    }
    let pattern = header_l.contains("pattern");
    let symmetric = header_l.contains("symmetric");
    let mut rest = lines.skip_while(|l| l.trim_start().starts_with('%'));
    let size_line = rest.next().ok_or("missing size line")?;
    let sizes: Vec<i64> = size_line
        .split_whitespace()
        .map(|t| t.parse::<i64>().map_err(|_| format!("bad size entry {}", t)))
        .collect::<Result<_, _>>()?;
    if sizes.len() != 3 {
        return Err(format!("expected `rows cols nnz`, got {}", size_line));
    }
    let (rows, cols, nnz) = (sizes[0], sizes[1], sizes[2] as usize);
    let mut entries = Vec::with_capacity(nnz);
    for line in rest {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let want = if pattern { 2 } else { 3 };
        if toks.len() < want {
            return Err(format!("short entry line `{}`", line));
        }
        let i: i64 = toks[0].parse().map_err(|_| format!("bad row index {}", toks[0]))?;
        let j: i64 = toks[1].parse().map_err(|_| format!("bad col index {}", toks[1]))?;
        let v: f64 = if pattern { 1.0 } else { toks[2].parse().map_err(|_| format!("bad value {}", toks[2]))? };
        entries.push((vec![i - 1, j - 1], v));
        if symmetric && i != j {
            entries.push((vec![j - 1, i - 1], v));
        }
    }
    CooTensor::new(vec![rows, cols], entries).map_err(|e| e.to_string())
}

/// Whitespace-separated `i1 ... id value` lines with the given index base.
fn parse_index_value_lines(text: &str, dims: Option<Vec<i64>>, base: i64) -> Result<CooTensor, String> {
    let mut entries: Vec<(Vec<i64>, f64)> = Vec::new();
    let mut order: Option<usize> = None;
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with('%') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() < 2 {
            return Err(format!("short entry line `{}`", line));
        }
        let d = toks.len() - 1;
        match order {
            None => order = Some(d),
            Some(o) if o != d => return Err(format!("mixed orders {} and {}", o, d)),
            _ => {}
        }
        let mut idx = Vec::with_capacity(d);
        for t in &toks[..d] {
            let i: i64 = t.parse().map_err(|_| format!("bad index {}", t))?;
            idx.push(i - base);
        }
        let v: f64 = toks[d].parse().map_err(|_| format!("bad value {}", toks[d]))?;
        entries.push((idx, v));
    }
    let order = order.unwrap_or_else(|| dims.as_ref().map(|d| d.len()).unwrap_or(0));
    let dims = match dims {
        Some(d) => {
            if d.len() != order && !entries.is_empty() {
                return Err(format!("dims of order {} given, file has order {}", d.len(), order));
            }
            d
        }
        None => {
            // tight extents from the data
            let mut d = vec![0i64; order];
            for (idx, _) in &entries {
                for (k, i) in idx.iter().enumerate() {
                    d[k] = d[k].max(i + 1);
                }
            }
            d
        }
    };
    CooTensor::new(dims, entries).map_err(|e| e.to_string())
}

/// Exact nested-average cardinality of a materialized tensor: the number of
/// nonempty slices at each level, averaged over their parents.
pub fn infer_stats(t: &CooTensor) -> Cardinality {
    fn go(v: &Value) -> Cardinality {
        match v {
            Value::Dict(m) => {
                if m.is_empty() {
                    return Cardinality::Dict(0.0, Box::new(Cardinality::Scalar));
                }
                let n = m.len() as f64;
                // average the child cardinalities level-wise
                let children: Vec<Cardinality> = m.values().map(go).collect();
                Cardinality::Dict(n, Box::new(average(&children)))
            }
            _ => Cardinality::Scalar,
        }
    }
    fn average(cards: &[Cardinality]) -> Cardinality {
        if cards.iter().all(|c| matches!(c, Cardinality::Scalar)) {
            return Cardinality::Scalar;
        }
        let mut total = 0.0;
        let mut subs = Vec::new();
        for c in cards {
            if let Cardinality::Dict(n, e) = c {
                total += n;
                subs.push((**e).clone());
            }
        }
        let avg = total / cards.len() as f64;
        Cardinality::Dict(avg, Box::new(average(&subs)))
    }
    go(&t.to_value())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triple_file_loads() {
        let t = parse_external("0 0 6\n0 2 9\n2 3 7\n", ExternalFormat::CsvTriples, Some(vec![3, 4])).unwrap();
        assert_eq!(t.nnz(), 3);
        assert_eq!(t.dims, vec![3, 4]);
    }

    #[test]
    fn empty_file_loads() {
        let t = parse_external("", ExternalFormat::CsvTriples, Some(vec![2, 2])).unwrap();
        assert_eq!(t.nnz(), 0);
    }

    #[test]
    fn duplicate_coordinate_rejected() {
        let r = parse_external("1 1 2\n1 1 3\n", ExternalFormat::FrosttTns, Some(vec![2, 2]));
        assert!(r.is_err());
    }

    #[test]
    fn tns_is_one_based() {
        let t = parse_external("1 1 5.0\n2 3 7.5\n", ExternalFormat::FrosttTns, Some(vec![2, 3])).unwrap();
        assert_eq!(t.entries[0], (vec![0, 0], 5.0));
        assert_eq!(t.entries[1], (vec![1, 2], 7.5));
    }

    #[test]
    fn matrix_market_coordinate() {
        let text = "%%MatrixMarket matrix coordinate real general\n% comment\n3 4 3\n1 1 6\n1 3 9\n3 4 7\n";
        let t = parse_external(text, ExternalFormat::MatrixMarket, None).unwrap();
        assert_eq!(t.dims, vec![3, 4]);
        assert_eq!(t.entries, vec![(vec![0, 0], 6.0), (vec![0, 2], 9.0), (vec![2, 3], 7.0)]);
    }

    #[test]
    fn infer_stats_fig1_matrix() {
        // [[6,0,9,8],[0,0,0,0],[5,0,0,7]] -> 2 nonempty rows, 2.5 nnz per row
        let t = CooTensor::new(
            vec![3, 4],
            vec![
                (vec![0, 0], 6.0),
                (vec![0, 2], 9.0),
                (vec![0, 3], 8.0),
                (vec![2, 0], 5.0),
                (vec![2, 3], 7.0),
            ],
        )
        .unwrap();
        assert_eq!(infer_stats(&t).to_string(), "2[2.5[s]]");
    }

    #[test]
    fn infer_stats_dense_and_empty() {
        let dense = CooTensor::new(
            vec![3, 4],
            (0..3).flat_map(|i| (0..4).map(move |j| (vec![i, j], 1.0))).collect(),
        )
        .unwrap();
        assert_eq!(infer_stats(&dense).to_string(), "3[4[s]]");
        let empty = CooTensor::new(vec![2, 2], vec![]).unwrap();
        assert_eq!(infer_stats(&empty).to_string(), "0[s]");
    }
}
