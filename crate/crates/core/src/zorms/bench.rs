use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::{plan_convex, StepSchedule};
use super::run::optimize;
use super::search::random_search;
use crate::error::{Error, Result};
use crate::problems::PsdDistanceProblem;
use crate::stats::median;

/// Equal-budget comparison on [`PsdDistanceProblem`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub n: usize,
    pub problem_seed: u64,
    /// Cost evaluations per run and method; must be even and at least 2.
    pub budget: u64,
    pub seeds: Vec<u64>,
    /// Accuracy handed to the convex planner (sets `μ`).
    pub epsilon: f64,
    /// Random-search box half-width. The default makes the RMS Frobenius
    /// length of a perturbation equal `‖X_0 - X*‖_F`, i.e. `r̄·√3/n`.
    pub radius: Option<f64>,
    /// Replaces the planner's constant step for ZO-RMS.
    pub schedule: Option<StepSchedule>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n: 3,
            problem_seed: 0,
            budget: 20,
            seeds: (0..100).collect(),
            epsilon: 0.5,
            radius: None,
            schedule: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub seed: u64,
    pub f_opt: f64,
    pub evals: u64,
    pub wall_time: f64,
}

pub const METHOD_ZORMS: &str = "zo-rms";
pub const METHOD_RANDOM: &str = "random-search";

/// Runs ZO-RMS (convex plan with `L0 = 1`, `N = budget/2 - 1`) and uniform random
/// search once per seed, from the same start and with the same budget.
pub fn bench_convex(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.budget == 0 || !cfg.budget.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "budget must be a positive even count, got {}",
            cfg.budget
        )));
    }
    if cfg.seeds.is_empty() {
        return Err(Error::invalid("bench needs at least one seed"));
    }
    let problem = PsdDistanceProblem::new(cfg.n, cfg.problem_seed)?;
    let r_bar = problem.r_bar();
    let mut plan =
        plan_convex(1.0, cfg.epsilon, r_bar, problem.n())?.with_iterations(cfg.budget / 2 - 1);
    if let Some(s) = cfg.schedule {
        plan = plan.with_schedule(s)?;
    }
    let radius = cfg.radius.unwrap_or(r_bar * 3f64.sqrt() / cfg.n as f64);
    let per_seed = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let started = Instant::now();
            let mut f = problem.cost();
            let rec = optimize(&mut f, &problem.x0, &plan, seed).map_err(|e| e.into_cause())?;
            let zo = BenchRow {
                method: METHOD_ZORMS.into(),
                seed,
                f_opt: rec.best_cost,
                evals: f.eval_count(),
                wall_time: started.elapsed().as_secs_f64(),
            };
            let started = Instant::now();
            let mut f = problem.cost();
            let rs = random_search(&mut f, &problem.x0, radius, cfg.budget, seed)?;
            let rs = BenchRow {
                method: METHOD_RANDOM.into(),
                seed,
                f_opt: rs.best_cost,
                evals: rs.evals,
                wall_time: started.elapsed().as_secs_f64(),
            };
            Ok([zo, rs])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_seed.into_iter().flatten().collect())
}

/// Median `f_opt` for one method.
pub fn median_f_opt(rows: &[BenchRow], method: &str) -> Option<f64> {
    let v: Vec<f64> = rows
        .iter()
        .filter(|r| r.method == method)
        .map(|r| r.f_opt)
        .collect();
    (!v.is_empty()).then(|| median(&v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_budget_accounting() {
        let cfg = BenchConfig {
            seeds: vec![1, 2],
            ..BenchConfig::default()
        };
        let rows = bench_convex(&cfg).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().all(|r| r.evals == 20));
    }

    #[test]
    fn bad_budgets_rejected() {
        for budget in [0, 7] {
            let cfg = BenchConfig {
                budget,
                seeds: vec![1],
                ..BenchConfig::default()
            };
            assert!(bench_convex(&cfg).is_err());
        }
    }
}
