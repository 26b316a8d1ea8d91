//! Evaluator checks against hand-derived values and the storage mappings
//! for the running example matrix [[6,0,9,8],[0,0,0,0],[5,0,0,7]].

use sdqlite_core::expr::Expr;
use sdqlite_core::interp::eval;
use sdqlite_core::parser::parse_lower;
use sdqlite_core::storage::{PhysicalBuffer, StorageCatalog};
use sdqlite_core::value::{dict_from_iter, Value};

fn catalog(bufs: &[(&str, PhysicalBuffer)]) -> StorageCatalog {
    let mut c = StorageCatalog::new();
    for (name, buf) in bufs {
        c.insert_buffer(name, buf.clone()).unwrap();
    }
    c
}

fn run(catalog: &StorageCatalog, text: &str) -> Value {
    let e = parse_lower(text, None).unwrap();
    eval(catalog, &e).unwrap().0
}

fn ints(entries: &[(i64, i64)]) -> Value {
    dict_from_iter(entries.iter().map(|(k, v)| (*k, Value::Int(*v))))
}

#[test]
fn filter_and_scale_query() {
    // V = {0->2, 1->-1, 2->-4, 3->3, 4->1}: keep positives, multiply by 5
    let v = PhysicalBuffer::IntArray(vec![2, -1, -4, 3, 1]);
    let c = catalog(&[("V", v)]);
    let got = run(&c, "sum(<i,v> in V) if (v > 0) then { i -> 5*v }");
    assert_eq!(got, ints(&[(0, 10), (3, 15), (4, 5)]));
}

#[test]
fn dot_product() {
    let u = PhysicalBuffer::IntArray(vec![1, 2]);
    let v = PhysicalBuffer::IntArray(vec![3, 4]);
    let c = catalog(&[("U", u), ("V", v)]);
    let got = run(&c, "sum(<i,u> in U, <i,v> in V) {() -> u*v}");
    assert!(got.value_eq(&Value::Int(11)));
}

#[test]
fn elementwise_product() {
    let u = PhysicalBuffer::IntArray(vec![1, 2]);
    let v = PhysicalBuffer::IntArray(vec![3, 4]);
    let c = catalog(&[("U", u), ("V", v)]);
    let got = run(&c, "sum(<i,u> in U, <i,v> in V) {i -> u*v}");
    assert_eq!(got, ints(&[(0, 3), (1, 8)]));
}

fn fig1_csr_catalog() -> StorageCatalog {
    catalog(&[
        ("C_len1", PhysicalBuffer::IntScalar(3)),
        ("C_pos2", PhysicalBuffer::IntArray(vec![0, 3, 3, 5])),
        ("C_idx2", PhysicalBuffer::IntArray(vec![0, 2, 3, 0, 3])),
        ("C_val", PhysicalBuffer::RealArray(vec![6.0, 9.0, 8.0, 5.0, 7.0])),
    ])
}

fn fig1_matrix_value() -> Value {
    dict_from_iter([
        (
            0,
            dict_from_iter([(0, Value::Real(6.0)), (2, Value::Real(9.0)), (3, Value::Real(8.0))]),
        ),
        (2, dict_from_iter([(0, Value::Real(5.0)), (3, Value::Real(7.0))])),
    ])
}

#[test]
fn csr_mapping_reproduces_matrix() {
    let c = fig1_csr_catalog();
    let got = run(
        &c,
        "sum(<row,_> in 0:C_len1) \
         { row -> sum(<off,col> in C_idx2( C_pos2(row):C_pos2(row+1) )) { col -> C_val(off) } }",
    );
    assert_eq!(got, fig1_matrix_value());
}

#[test]
fn dcsr_mapping_reproduces_matrix() {
    let c = catalog(&[
        ("C_pos1", PhysicalBuffer::IntArray(vec![0, 2])),
        ("C_idx1", PhysicalBuffer::IntArray(vec![0, 2])),
        ("C_pos2", PhysicalBuffer::IntArray(vec![0, 3, 5])),
        ("C_idx2", PhysicalBuffer::IntArray(vec![0, 2, 3, 0, 3])),
        ("C_val", PhysicalBuffer::RealArray(vec![6.0, 9.0, 8.0, 5.0, 7.0])),
    ]);
    let got = run(
        &c,
        "sum(<i_pos, i> in C_idx1) \
         let j_start = C_pos2(i_pos), j_end = C_pos2(i_pos+1) \
         in sum(<j_pos, j> in C_idx2( j_start:j_end )) { (i,j) -> C_val(j_pos) }",
    );
    assert_eq!(got, fig1_matrix_value());
}

#[test]
fn merge_matches_equal_values() {
    // e1={0->1,1->3}, e2={0->2,1->3}: exactly one value pair matches
    let c = catalog(&[
        ("E1", PhysicalBuffer::IntArray(vec![1, 3])),
        ("E2", PhysicalBuffer::IntArray(vec![2, 3])),
    ]);
    let got = run(&c, "merge(<k1,k2,v> in <E1, E2>) 1");
    assert!(got.value_eq(&Value::Int(1)));
    // and it agrees with the defining double-sum expansion
    let expand = run(&c, "sum(<k1,v> in E1, <k2,u> in E2) (if (v==u) then 1)");
    assert!(got.value_eq(&expand));
}

#[test]
fn empty_and_negative_ranges() {
    let c = StorageCatalog::new();
    assert!(run(&c, "sum(<i,v> in 5:5) {i -> v}").is_zero());
    assert!(run(&c, "sum(<i,v> in 7:3) {i -> v}").is_zero());
}

#[test]
fn if_returns_typed_zero() {
    let c = StorageCatalog::new();
    assert!(run(&c, "if (1 == 2) then 5").is_zero());
    assert!(run(&c, "if (1 == 2) then {3 -> 4}").is_zero());
}

#[test]
fn lookup_missing_key_is_zero() {
    let c = catalog(&[("V", PhysicalBuffer::IntArray(vec![5, 0, 7]))]);
    // index 1 stores an explicit zero; reading it equals reading a hole
    assert!(run(&c, "V(1)").is_zero());
    let got = run(&c, "sum(<i,v> in V) {i -> v} ");
    assert_eq!(got, ints(&[(0, 5), (2, 7)]));
}

#[test]
fn subarray_out_of_bounds_errors() {
    let c = catalog(&[("V", PhysicalBuffer::IntArray(vec![1, 2, 3]))]);
    let e = parse_lower("sum(<i,v> in V(1:9)) v", None).unwrap();
    assert!(matches!(
        eval(&c, &e),
        Err(sdqlite_core::error::EvalError::BufferOverrun(_))
    ));
}

#[test]
fn division_by_zero_errors() {
    let c = StorageCatalog::new();
    let e = parse_lower("1 / 0", None).unwrap();
    assert!(matches!(eval(&c, &e), Err(sdqlite_core::error::EvalError::DivisionByZero)));
}

#[test]
fn conservation_identity() {
    // sum(<k,v> in d) {k -> v} reproduces d exactly
    let c = catalog(&[(
        "H",
        PhysicalBuffer::Hash {
            elem: sdqlite_core::storage::Elem::Real,
            arity: 1,
            entries: [(vec![2], 1.5), (vec![9], -4.0)].into_iter().collect(),
        },
    )]);
    let got = run(&c, "sum(<k,v> in H) {k -> v}");
    assert_eq!(got, dict_from_iter([(2, Value::Real(1.5)), (9, Value::Real(-4.0))]));
}

#[test]
fn matrix_multiply_two_forms_agree() {
    // tuple-sugar form over nested dicts vs dense-range form over arrays
    let m = 3usize;
    let n = 2usize;
    let p = 4usize;
    let a_data: Vec<f64> = (0..m * n).map(|i| (i * 7 % 5) as f64 - 1.0).collect();
    let b_data: Vec<f64> = (0..n * p).map(|i| (i * 3 % 4) as f64).collect();

    let mut cat = catalog(&[
        ("A_val", PhysicalBuffer::RealArray(a_data.clone())),
        ("B_val", PhysicalBuffer::RealArray(b_data.clone())),
        ("m", PhysicalBuffer::IntScalar(m as i64)),
        ("n", PhysicalBuffer::IntScalar(n as i64)),
        ("p", PhysicalBuffer::IntScalar(p as i64)),
    ]);
    cat.insert_mapping(
        "A",
        parse_lower("sum(<i,_> in 0:m, <j,_> in 0:n) {(i,j) -> A_val(i*n+j)}", None).unwrap(),
    )
    .unwrap();
    cat.insert_mapping(
        "B",
        parse_lower("sum(<i,_> in 0:n, <j,_> in 0:p) {(i,j) -> B_val(i*p+j)}", None).unwrap(),
    )
    .unwrap();

    let sugar = run(&cat, "sum(<(i,j),a> in A, <(j,k),b> in B) {(i,k) -> a*b}");
    let dense = run(&cat, "sum(<i,_> in 0:m, <j,_> in 0:n, <k,_> in 0:p) {(i,k) -> A(i,j)*B(j,k)}");
    assert!(sugar.value_eq(&dense), "sugar {} != dense {}", sugar, dense);

    // brute-force oracle
    let mut expect = std::collections::BTreeMap::new();
    for i in 0..m {
        for k in 0..p {
            let mut acc = 0.0;
            for j in 0..n {
                acc += a_data[i * n + j] * b_data[j * p + k];
            }
            if acc != 0.0 {
                expect
                    .entry(i as i64)
                    .or_insert_with(std::collections::BTreeMap::new)
                    .insert(k as i64, Value::Real(acc));
            }
        }
    }
    let expect = Value::Dict(expect.into_iter().map(|(k, v)| (k, Value::Dict(v))).collect());
    assert!(sugar.value_eq(&expect), "got {} want {}", sugar, expect);
}

#[test]
fn sum_order_independence() {
    // folding the entries in any order gives the same dictionary
    use sdqlite_core::value::value_add;
    let entries: Vec<(i64, Value)> = vec![
        (3, Value::Real(1.5)),
        (1, Value::Real(-2.0)),
        (7, Value::Real(0.25)),
        (5, Value::Real(4.0)),
    ];
    let singleton = |k: i64, v: &Value| dict_from_iter([(k % 3, v.clone())]);
    let mut orders = vec![entries.clone()];
    let mut rev = entries.clone();
    rev.reverse();
    orders.push(rev);
    let mut rot = entries.clone();
    rot.rotate_left(2);
    orders.push(rot);
    let results: Vec<Value> = orders
        .iter()
        .map(|order| {
            let mut acc = Value::zero();
            for (k, v) in order {
                acc = value_add(&acc, &singleton(*k, v)).unwrap();
            }
            acc
        })
        .collect();
    assert!(results.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn scalar_times_vector_broadcast() {
    let c = catalog(&[("V", PhysicalBuffer::IntArray(vec![3, 0, 0, 0, 5]))]);
    let got = run(&c, "sum(<i,v> in V) {i -> 2 * v}");
    assert_eq!(got, ints(&[(0, 6), (4, 10)]));
}

#[test]
fn zorder_bits() {
    let c = StorageCatalog::new();
    // d = 0b1101 = 13: even bits (0,2) -> 0b11 = 3; odd bits (1,3) -> 0b10 = 2
    assert!(run(&c, "even_bits(13)").value_eq(&Value::Int(3)));
    assert!(run(&c, "odd_bits(13)").value_eq(&Value::Int(2)));
}

#[test]
fn counters_populate() {
    let c = catalog(&[("V", PhysicalBuffer::RealArray(vec![1.0, 2.0, 3.0]))]);
    let e = parse_lower("sum(<i,v> in V) {i -> 2.0 * v}", None).unwrap();
    let (_, ops) = eval(&c, &e).unwrap();
    assert_eq!(ops.iterations, 3);
    assert_eq!(ops.mults, 3);
    assert_eq!(ops.dict_inserts, 3);
}
