use serde::Serialize;
use zorms::zorms::{bench_convex, median_f_opt, BenchConfig, METHOD_RANDOM, METHOD_ZORMS};
use zorms::StepSchedule;

use crate::config::RunConfig;
use crate::output::sink;
use crate::{invalid_input, usage, BenchArgs};

#[derive(Serialize)]
struct Row<'a> {
    method: &'a str,
    f_opt: f64,
    evals: u64,
    wall_time: f64,
}

pub fn run(a: BenchArgs) -> anyhow::Result<()> {
    let cfg = RunConfig::load(a.common.config.as_deref())?;
    let base = a.common.seed.unwrap_or(0);
    let seeds = match (a.runs, cfg.seeds) {
        (Some(0), _) => return Err(usage("--runs must be at least 1")),
        (Some(r), _) => (base..base + r).collect(),
        (None, Some(s)) if a.common.seed.is_none() => s,
        _ => (base..base + 100).collect(),
    };
    let defaults = BenchConfig::default();
    let bench = BenchConfig {
        n: a.n.or(cfg.n).unwrap_or(defaults.n),
        problem_seed: a
            .problem_seed
            .or(cfg.problem_seed)
            .unwrap_or(defaults.problem_seed),
        budget: a.budget.unwrap_or(defaults.budget),
        seeds,
        epsilon: a.epsilon.or(cfg.plan.epsilon).unwrap_or(defaults.epsilon),
        radius: a.radius,
        schedule: a
            .step_c
            .map(|c| StepSchedule::InvSqrt { c })
            .or(cfg.plan.schedule),
    };
    let rows = bench_convex(&bench).map_err(invalid_input)?;
    let mut w = csv::Writer::from_writer(sink(a.out.as_deref(), a.force)?);
    for r in &rows {
        w.serialize(Row {
            method: &r.method,
            f_opt: r.f_opt,
            evals: r.evals,
            wall_time: r.wall_time,
        })?;
    }
    w.flush()?;
    for m in [METHOD_ZORMS, METHOD_RANDOM] {
        if let Some(med) = median_f_opt(&rows, m) {
            eprintln!(
                "{m}: median f_opt {med:.6} over {} seeds",
                bench.seeds.len()
            );
        }
    }
    Ok(())
}
