//! End-to-end two-stage optimization: optimized execution must agree with
//! naive interpretation, and the expected plan shapes must be reached.

use sdqlite_core::costing::CostCoefficients;
use sdqlite_core::engine::{execute, lower};
use sdqlite_core::expr::Expr;
use sdqlite_core::interp::eval;
use sdqlite_core::optimizer::{two_stage_optimize, Limits};
use sdqlite_core::parser::parse_lower;
use sdqlite_core::storage::formats::install;
use sdqlite_core::storage::{compose, CooTensor, FormatSpec, StorageCatalog};

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

fn check_pipeline(tp_text: &str, catalog: &StorageCatalog) -> (sdqlite_core::Value, std::rc::Rc<Expr>) {
    let tp = parse_lower(tp_text, None).unwrap();
    let opt = two_stage_optimize(&tp, catalog, &Limits::default(), &CostCoefficients::default()).unwrap();

    let naive = compose(&tp, catalog).unwrap();
    let (want, _) = eval(catalog, &naive).unwrap();

    let plan = lower(&opt.plan, catalog).unwrap();
    let (got, _) = execute(&plan, catalog).unwrap();
    assert!(
        got.approx_eq(&want, 1e-9),
        "optimized result differs\n  tp: {}\n  plan: {}\n  want {}\n  got  {}",
        tp_text,
        opt.plan,
        want,
        got
    );
    (got, opt.plan)
}

#[test]
fn identity_program_fuses_away_materialization() {
    let mut catalog = StorageCatalog::new();
    install(&mut catalog, &fig1_matrix(), FormatSpec::Csr, "A").unwrap();
    let (_, plan) = check_pipeline("sum(<(i,j),v> in A) {(i,j) -> v}", &catalog);
    // the plan must read the buffers directly, not materialize A
    let rendered = plan.to_string();
    assert!(rendered.contains("A_idx2") || rendered.contains("A_val"), "plan does not touch buffers: {}", rendered);
}

#[test]
fn dot_product_over_coo_vectors() {
    let u = CooTensor::new(vec![6], vec![(vec![0], 1.0), (vec![2], 2.0), (vec![5], 3.0)]).unwrap();
    let v = CooTensor::new(vec![6], vec![(vec![0], 4.0), (vec![2], 5.0), (vec![4], 6.0)]).unwrap();
    let mut catalog = StorageCatalog::new();
    install(&mut catalog, &u, FormatSpec::DokHash, "U").unwrap();
    install(&mut catalog, &v, FormatSpec::Dense, "V").unwrap();
    let (got, _) = check_pipeline("sum(<i,u> in U, <i,v> in V) {() -> u*v}", &catalog);
    assert!(got.approx_eq(&sdqlite_core::Value::Real(14.0), 1e-9));
}

#[test]
fn spmv_csr_times_dense() {
    let mut catalog = StorageCatalog::new();
    install(&mut catalog, &fig1_matrix(), FormatSpec::Csr, "A").unwrap();
    let x = CooTensor::new(vec![4], vec![(vec![0], 1.0), (vec![1], 2.0), (vec![2], 3.0), (vec![3], 4.0)]).unwrap();
    install(&mut catalog, &x, FormatSpec::Dense, "x").unwrap();
    check_pipeline("sum(<(i,j),a> in A, <j,xv> in x) { i -> a*xv }", &catalog);
}

#[test]
fn matrix_multiply_csr_csr() {
    let mut catalog = StorageCatalog::new();
    install(&mut catalog, &fig1_matrix(), FormatSpec::Csr, "A").unwrap();
    let b = CooTensor::new(
        vec![4, 3],
        vec![(vec![0, 0], 1.0), (vec![0, 2], 2.0), (vec![2, 1], 3.0), (vec![3, 0], 4.0), (vec![3, 2], 5.0)],
    )
    .unwrap();
    install(&mut catalog, &b, FormatSpec::Csr, "B").unwrap();
    check_pipeline("sum(<(i,j),a> in A, <(j,k),b> in B) {(i,k) -> a*b}", &catalog);
}
