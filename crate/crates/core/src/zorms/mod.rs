//! The ZO-RMS loop, its planner, and an equal-budget random-search baseline.

mod bench;
mod plan;
mod run;
mod search;

pub use bench::{bench_convex, median_f_opt, BenchConfig, BenchRow, METHOD_RANDOM, METHOD_ZORMS};
pub use plan::{
    baseline_bound_vectorized, bound_ratio, c_mu, convex_iteration_bound, plan_convex,
    plan_nonconvex, Plan, PlanInputs, Provenance, StepSchedule,
};
pub use run::{
    optimize, run_repeated, IterationRow, OptimizeError, RepeatOutcome, RepeatSummary, RunRecord,
    CSV_HEADER, FEASIBILITY_TOL,
};
pub use search::{random_search, SearchResult};
