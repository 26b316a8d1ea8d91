//! Equality saturation over the rewrite catalog, plus the two-stage
//! optimization pipeline: storage-independent rewriting of the tensor
//! program first, then rewriting of the composed plan against the catalog
//! with fusion and physical-annotation rules enabled.

pub mod egraph;
pub mod extract;
pub mod pattern;
pub mod rules;

use std::rc::Rc;
use std::time::Instant;

use crate::costing::{CostCoefficients, LogicalDictCost, Stats};
use crate::error::OptError;
use crate::expr::Expr;
use crate::storage::{compose, StorageCatalog};

pub use egraph::{ClassId, EGraph};
pub use extract::extract_best;
pub use rules::{rule_catalog, stage1_rules, Rule, ShapeCtx};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub iters: u32,
    pub nodes: usize,
    pub time_ms: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { iters: 64, nodes: 100_000, time_ms: 2_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Saturated,
    IterLimit,
    NodeLimit,
    TimeLimit,
}

impl StopReason {
    pub fn name(&self) -> &'static str {
        match self {
            StopReason::Saturated => "saturated",
            StopReason::IterLimit => "iter_limit",
            StopReason::NodeLimit => "node_limit",
            StopReason::TimeLimit => "time_limit",
        }
    }
}

/// Metrics of one saturation run, one row per stage in the metrics CSV.
#[derive(Debug, Clone)]
pub struct SaturationReport {
    pub time_ms: u64,
    pub iterations: u32,
    pub node_count: usize,
    pub class_count: usize,
    pub memo_count: usize,
    pub stop_reason: StopReason,
    /// (memo size, classes created) after each iteration; both are
    /// nondecreasing while the run proceeds
    pub history: Vec<(usize, usize)>,
}

impl SaturationReport {
    pub fn csv_header() -> &'static str {
        "Time(ms),Iters,Nodes,Classes,Memos"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.time_ms, self.iterations, self.node_count, self.class_count, self.memo_count
        )
    }
}

/// Run the rules to fixpoint or until a limit trips.
pub fn saturate(
    root: &Expr,
    rules: &[Rule],
    limits: &Limits,
    shapes: &ShapeCtx,
) -> (EGraph, ClassId, SaturationReport) {
    let start = Instant::now();
    let mut eg = EGraph::new();
    let root_id = eg.add_expr(root);
    let mut iterations = 0;
    let mut history = Vec::new();
    let mut stop = StopReason::IterLimit;
    // rules that re-insert shifted representative terms fire once per
    // distinct canonical match; re-running them as representatives shrink
    // would regenerate near-duplicates forever
    let mut applied: std::collections::HashSet<(usize, Vec<ClassId>)> = std::collections::HashSet::new();

    while iterations < limits.iters {
        if start.elapsed().as_millis() as u64 >= limits.time_ms {
            stop = StopReason::TimeLimit;
            break;
        }
        if eg.memo_count() >= limits.nodes {
            stop = StopReason::NodeLimit;
            break;
        }
        iterations += 1;

        // search phase on the clean graph
        let mut matches: Vec<(usize, ClassId, pattern::Subst)> = Vec::new();
        for (ri, rule) in rules.iter().enumerate() {
            for (class, subst) in rule.searcher.search(&eg) {
                matches.push((ri, class, subst));
            }
        }

        // apply phase; guards are re-checked against current representatives
        let mut changed = false;
        for (ri, class, subst) in matches {
            let rule = &rules[ri];
            if eg.memo_count() >= limits.nodes {
                break;
            }
            let key = if matches!(rule.applier, rules::Applier::Fn(_)) {
                let mut k: Vec<ClassId> = vec![eg.find(class)];
                k.extend(subst.iter().flatten().map(|c| eg.find(*c)));
                Some((ri, k))
            } else {
                None
            };
            if let Some(k) = &key {
                if applied.contains(k) {
                    continue;
                }
            }
            if !rule.check_guards(&eg, &subst, shapes) {
                continue;
            }
            if let Some((new_class, added)) = rule.apply(&mut eg, &subst) {
                let (_, merged) = eg.union(class, new_class);
                changed |= added || merged;
                if let Some(k) = key {
                    applied.insert(k);
                }
            }
        }
        eg.rebuild();
        // unions may have re-canonicalized the ids inside recorded matches
        applied = applied
            .into_iter()
            .map(|(ri, k)| (ri, k.into_iter().map(|c| eg.find(c)).collect()))
            .collect();
        if std::env::var_os("SDQL_SAT_DEBUG").is_some() {
            eprintln!(
                "  saturate iter {}: nodes={} classes={}",
                iterations,
                eg.memo_count(),
                eg.class_count()
            );
        }
        history.push((eg.memo_count(), eg.class_count()));

        if !changed {
            stop = StopReason::Saturated;
            break;
        }
    }

    let report = SaturationReport {
        time_ms: start.elapsed().as_millis() as u64,
        iterations,
        node_count: eg.node_count(),
        class_count: eg.class_count(),
        memo_count: eg.memo_count(),
        stop_reason: stop,
        history,
    };
    (eg, root_id, report)
}

/// Shape context (dictionary depths of globals) for a catalog.
pub fn shape_ctx(catalog: &StorageCatalog) -> ShapeCtx {
    let mut ctx = ShapeCtx::new();
    for (name, ty) in catalog.type_env() {
        ctx.insert(name, ty.depth());
    }
    ctx
}

/// Everything the optimizer returns.
#[derive(Debug, Clone)]
pub struct OptimizedPlan {
    pub plan: Rc<Expr>,
    pub cost: f64,
    pub stage1: SaturationReport,
    pub stage2: SaturationReport,
    pub stage1_plan: Rc<Expr>,
    pub naive_plan: Rc<Expr>,
}

/// Two-stage pipeline: rewrite the tensor program alone, compose the result
/// with the storage mappings, then rewrite again with fusion and
/// annotation rules and extract the cheapest physical plan.
pub fn two_stage_optimize(
    tp: &Expr,
    catalog: &StorageCatalog,
    limits: &Limits,
    coeffs: &CostCoefficients,
) -> Result<OptimizedPlan, crate::error::Error> {
    two_stage_optimize_with(tp, catalog, limits, coeffs, &rule_catalog())
}

pub fn two_stage_optimize_with(
    tp: &Expr,
    catalog: &StorageCatalog,
    limits: &Limits,
    coeffs: &CostCoefficients,
    all_rules: &[Rule],
) -> Result<OptimizedPlan, crate::error::Error> {
    let shapes = shape_ctx(catalog);
    let stats = Stats::from_catalog(catalog);
    let stage1_rules: Vec<Rule> = all_rules.iter().filter(|r| r.stage1).cloned().collect();

    // stage 1: the program alone, logical dictionaries allowed
    let (eg1, root1, report1) = saturate(tp, &stage1_rules, limits, &shapes);
    let model1 = crate::costing::CostModel {
        stats: &stats,
        coeffs,
        catalog: Some(catalog),
        logical_dicts: LogicalDictCost::AsHash,
    };
    let (stage1_plan, _) = extract_best(&eg1, root1, &model1).ok_or(OptError::ExtractionFailed)?;

    // stage 2: compose with the storage mappings and go physical
    let naive = compose(&stage1_plan, catalog)?;
    let (eg2, root2, report2) = saturate(&naive, all_rules, limits, &shapes);
    let model2 = crate::costing::CostModel {
        stats: &stats,
        coeffs,
        catalog: Some(catalog),
        logical_dicts: LogicalDictCost::Infinite,
    };
    let (plan, cost) = extract_best(&eg2, root2, &model2).ok_or(OptError::ExtractionFailed)?;
    if !cost.is_finite() {
        return Err(OptError::ExtractionFailed.into());
    }

    Ok(OptimizedPlan {
        plan,
        cost,
        stage1: report1,
        stage2: report2,
        stage1_plan,
        naive_plan: Rc::new(naive),
    })
}
