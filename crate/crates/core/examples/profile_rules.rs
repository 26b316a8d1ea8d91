use sdqlite_core::optimizer::egraph::EGraph;
use sdqlite_core::optimizer::pattern::MAX_PVARS;
use sdqlite_core::optimizer::{rule_catalog, shape_ctx};
use sdqlite_core::parser::parse_lower;
use sdqlite_core::storage::formats::install;
use sdqlite_core::storage::{CooTensor, FormatSpec, StorageCatalog};
use std::collections::BTreeMap;

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
    let rules: Vec<_> = rule_catalog().into_iter().filter(|r| r.stage1).collect();

    let mut eg = EGraph::new();
    let root = eg.add_expr(&tp);
    let _ = root;
    for iter in 0..10 {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut applications: Vec<(usize, u32, _)> = Vec::new();
        for (ri, rule) in rules.iter().enumerate() {
            for (class, subst) in rule.searcher.search(&eg) {
                applications.push((ri, class, subst));
            }
        }
        for (ri, class, subst) in applications {
            let rule = &rules[ri];
            if !rule.check_guards(&eg, &subst, &shapes) {
                continue;
            }
            if let Some((new_class, added)) = rule.apply(&mut eg, &subst) {
                let (_, merged) = eg.union(class, new_class);
                if added || merged {
                    *counts.entry(rule.name).or_default() += 1;
                }
            }
            let _ = subst_len();
        }
        eg.rebuild();
        let mut top: Vec<_> = counts.into_iter().collect();
        top.sort_by_key(|(_, c)| std::cmp::Reverse(*c));
        eprintln!(
            "iter {}: nodes={} classes={} top: {:?}",
            iter,
            eg.memo_count(),
            eg.class_count(),
            &top[..top.len().min(6)]
        );
        if eg.memo_count() > 60000 {
            break;
        }
    }
}

fn subst_len() -> usize {
    MAX_PVARS
}
