use sdqlite_core::costing::{CostCoefficients, CostModel, LogicalDictCost, Stats};
use sdqlite_core::optimizer::{extract_best, rule_catalog, saturate, shape_ctx, Limits};
use sdqlite_core::parser::parse_lower;
use sdqlite_core::storage::formats::install;
use sdqlite_core::storage::{compose, CooTensor, FormatSpec, StorageCatalog};
use std::time::Instant;

fn main() {
    let t = CooTensor::new(
        vec![3, 4],
        vec![(vec![0, 0], 6.0), (vec![0, 2], 9.0), (vec![0, 3], 8.0), (vec![2, 0], 5.0), (vec![2, 3], 7.0)],
    )
    .unwrap();
    let mut catalog = StorageCatalog::new();
    install(&mut catalog, &t, FormatSpec::Csr, "A").unwrap();
    let tp = parse_lower("sum(<(i,j),v> in A) {(i,j) -> v}", None).unwrap();
    let shapes = shape_ctx(&catalog);
    let rules = rule_catalog();
    let stage1: Vec<_> = rules.iter().filter(|r| r.stage1).cloned().collect();
    let stats = Stats::from_catalog(&catalog);
    let coeffs = CostCoefficients::default();

    let t0 = Instant::now();
    let (eg1, root1, rep1) = saturate(&tp, &stage1, &Limits::default(), &shapes);
    eprintln!("stage1 saturate: {:?} iters={} nodes={} classes={} stop={:?}", t0.elapsed(), rep1.iterations, rep1.memo_count, rep1.class_count, rep1.stop_reason);

    let t0 = Instant::now();
    let model1 = CostModel { stats: &stats, coeffs: &coeffs, catalog: Some(&catalog), logical_dicts: LogicalDictCost::AsHash };
    let (p1, c1) = extract_best(&eg1, root1, &model1).unwrap();
    eprintln!("stage1 extract: {:?} cost={} plan={}", t0.elapsed(), c1, p1);

    let naive = compose(&p1, &catalog).unwrap();
    eprintln!("naive size={}", naive.node_count());
    let t0 = Instant::now();
    let (eg2, root2, rep2) = saturate(&naive, &rules, &Limits { iters: 64, nodes: 100_000, time_ms: 2_000 }, &shapes);
    eprintln!("stage2 saturate: {:?} iters={} nodes={} classes={} stop={:?}", t0.elapsed(), rep2.iterations, rep2.memo_count, rep2.class_count, rep2.stop_reason);

    let t0 = Instant::now();
    let model2 = CostModel { stats: &stats, coeffs: &coeffs, catalog: Some(&catalog), logical_dicts: LogicalDictCost::Infinite };
    let out = extract_best(&eg2, root2, &model2);
    eprintln!("stage2 extract: {:?} some={}", t0.elapsed(), out.is_some());
    if let Some((p, c)) = out {
        eprintln!("cost={} plan={}", c, p);
    }
}
