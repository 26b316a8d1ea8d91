//! E-graph membership checks on the worked rewriting examples, plus
//! saturation-report behavior.

use sdqlite_core::expr::*;
use sdqlite_core::optimizer::rules::rule_catalog;
use sdqlite_core::optimizer::{saturate, Limits, ShapeCtx, StopReason};
use sdqlite_core::parser::parse_lower;

fn scalar_shapes(names: &[&str]) -> ShapeCtx {
    names.iter().map(|n| (n.to_string(), 0usize)).collect()
}

#[test]
fn assoc_rules_collect_the_three_printed_forms() {
    // a * { k -> b + c } with associativity rules only
    let e = parse_lower("a * { k -> b + c }", None).unwrap();
    let rules: Vec<_> =
        rule_catalog().into_iter().filter(|r| r.name.starts_with('A') || r.name.starts_with("C3")).collect();
    let shapes = scalar_shapes(&["a", "b", "c", "k"]);
    let (eg, root, report) = saturate(&e, &rules, &Limits::default(), &shapes);
    assert_eq!(report.stop_reason, StopReason::Saturated);

    let forms = [
        "{ k -> a * (b + c) }",
        "a * { k -> b + c }",
        "{ k -> a } * (b + c)",
    ];
    for text in forms {
        let expect = parse_lower(text, None).unwrap();
        let class = eg.lookup_expr(&expect);
        assert_eq!(class, Some(eg.find(root)), "{} missing from the root class", text);
    }
}

#[test]
fn full_catalog_adds_the_distributed_form() {
    let e = parse_lower("a * { k -> b + c }", None).unwrap();
    let rules = rule_catalog();
    let shapes = scalar_shapes(&["a", "b", "c", "k"]);
    let (eg, root, _) = saturate(&e, &rules, &Limits { iters: 12, ..Limits::default() }, &shapes);
    let expect = parse_lower("{ k -> a*b + a*c }", None).unwrap();
    assert_eq!(eg.lookup_expr(&expect), Some(eg.find(root)));
}

#[test]
fn l1_absorbs_zero() {
    let e = parse_lower("e + 0", None).unwrap();
    let rules = rule_catalog();
    let shapes = scalar_shapes(&["e"]);
    let (eg, root, _) = saturate(&e, &rules, &Limits::default(), &shapes);
    let bare = parse_lower("e", None).unwrap();
    assert_eq!(eg.lookup_expr(&bare), Some(eg.find(root)));
}

#[test]
fn f1_turns_iteration_into_lookup() {
    // desugared dot product: sum(<i,a> in A) sum(<j,b> in B) if (i==j) then a*b
    let e = parse_lower("sum(<i,a> in A) sum(<j,b> in B) if (i==j) then a*b", None).unwrap();
    let rules = rule_catalog();
    let mut shapes = ShapeCtx::new();
    shapes.insert("A".into(), 1);
    shapes.insert("B".into(), 1);
    let (eg, root, _) = saturate(&e, &rules, &Limits { iters: 8, ..Limits::default() }, &shapes);
    // sum(<i,a> in A) let k = i in let v = B(k) in a*v
    let expect = sum(
        global("A"),
        let_in(
            var(1),
            let_in(
                lookup(global("B"), var(0)),
                mul(var(2), var(0)),
            ),
        ),
    );
    assert_eq!(eg.lookup_expr(&expect), Some(eg.find(root)), "lookup form missing");
}

#[test]
fn d2_hoists_only_binder_free_factors() {
    // sum(<k,v> in A) v * 3 may hoist 3 but never v
    let e = parse_lower("sum(<k,v> in A) v * 3", None).unwrap();
    let rules = rule_catalog();
    let mut shapes = ShapeCtx::new();
    shapes.insert("A".into(), 1);
    let (eg, root, _) = saturate(&e, &rules, &Limits { iters: 6, ..Limits::default() }, &shapes);
    let hoisted_const = parse_lower("(sum(<k,v> in A) v) * 3", None).unwrap();
    assert_eq!(eg.lookup_expr(&hoisted_const), Some(eg.find(root)));
    // the unsound hoist would reference a dangling index at the top level
    let bad = mul(var(0), parse_lower("sum(<k,v> in A) 3", None).unwrap());
    assert_ne!(eg.lookup_expr(&bad), Some(eg.find(root)));
}

#[test]
fn alpha_renamed_inputs_build_identical_graphs() {
    let a = parse_lower("let x = A in sum(<k,v> in x) { k -> v * 2 }", None).unwrap();
    let b = parse_lower("let y = A in sum(<i,w> in y) { i -> w * 2 }", None).unwrap();
    assert_eq!(a, b, "alpha-equivalent programs must lower identically");
    let rules = rule_catalog();
    let mut shapes = ShapeCtx::new();
    shapes.insert("A".into(), 1);
    let (eg_a, _, rep_a) = saturate(&a, &rules, &Limits { iters: 5, ..Limits::default() }, &shapes);
    let (eg_b, _, rep_b) = saturate(&b, &rules, &Limits { iters: 5, ..Limits::default() }, &shapes);
    assert_eq!(eg_a.memo_count(), eg_b.memo_count());
    assert_eq!(eg_a.class_count(), eg_b.class_count());
    assert_eq!(rep_a.iterations, rep_b.iterations);
}

#[test]
fn report_counts_monotone_and_limits_respected() {
    let e = parse_lower("sum(<(i,j),a> in A, <(j,k),b> in B) {(i,k) -> a*b}", None).unwrap();
    let rules = rule_catalog();
    let mut shapes = ShapeCtx::new();
    shapes.insert("A".into(), 2);
    shapes.insert("B".into(), 2);
    let limits = Limits { iters: 6, nodes: 20_000, time_ms: 5_000 };
    let (_, _, report) = saturate(&e, &rules, &limits, &shapes);
    assert!(report.iterations <= limits.iters);
    for w in report.history.windows(2) {
        assert!(w[1].0 >= w[0].0, "memo count decreased: {:?}", report.history);
    }
    assert!(report.node_count > 0 && report.class_count > 0 && report.memo_count > 0);
}

#[test]
fn tiny_scalar_program_saturates_fast() {
    let e = parse_lower("1 + 2", None).unwrap();
    let rules = rule_catalog();
    let (_, _, report) = saturate(&e, &rules, &Limits::default(), &ShapeCtx::new());
    assert_eq!(report.stop_reason, StopReason::Saturated);
    assert!(report.iterations <= 3, "took {} iterations", report.iterations);
}
