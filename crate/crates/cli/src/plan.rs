use std::io::Write;

use serde::Serialize;
use zorms::zorms::{
    baseline_bound_vectorized, convex_iteration_bound, plan_convex, plan_nonconvex, Plan,
};
use zorms::StepSchedule;

use crate::config::{PlanConfig, PlanSource, RunConfig};
use crate::output::sink;
use crate::{invalid_input, usage, PlanArgs};

/// Defaults a caller can supply for unset planner constants.
#[derive(Clone, Copy, Debug, Default)]
pub struct PlanDefaults {
    pub source: Option<PlanSource>,
    pub l0: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub r_bar: Option<f64>,
    pub mu: Option<f64>,
    pub schedule: Option<StepSchedule>,
    pub iterations: Option<u64>,
}

fn require(name: &str, v: Option<f64>) -> anyhow::Result<f64> {
    v.ok_or_else(|| usage(format!("plan needs --{name}")))
}

/// Builds the plan from `cfg` (already merged with flags), falling back to
/// `defaults`.
pub fn build(
    cfg: &PlanConfig,
    iterations: Option<u64>,
    n: usize,
    defaults: PlanDefaults,
) -> anyhow::Result<Plan> {
    let source = cfg
        .source
        .or(defaults.source)
        .unwrap_or(PlanSource::Corollary1);
    let l0 = cfg.l0.or(defaults.l0);
    let epsilon = cfg.epsilon.or(defaults.epsilon);
    let r_bar = cfg.r_bar.or(defaults.r_bar);
    let iterations = iterations.or(defaults.iterations);
    let plan = match source {
        PlanSource::Corollary1 => {
            let p = plan_convex(
                require("l0", l0)?,
                require("epsilon", epsilon)?,
                require("r-bar", r_bar)?,
                n,
            )
            .map_err(invalid_input)?;
            match iterations {
                Some(k) => p.with_iterations(k),
                None => p,
            }
        }
        PlanSource::Corollary2 => plan_nonconvex(
            require("l0", l0)?,
            require("epsilon", epsilon)?,
            require("delta", cfg.delta.or(defaults.delta))?,
            require("r-bar", r_bar)?,
            n,
            iterations,
        )
        .map_err(invalid_input)?,
        PlanSource::Manual => {
            let mu = require("mu", cfg.mu.or(defaults.mu))?;
            let schedule = cfg
                .schedule
                .or(defaults.schedule)
                .ok_or_else(|| usage("manual plan needs a step schedule"))?;
            let k = iterations.ok_or_else(|| usage("manual plan needs --iterations"))?;
            Plan::manual(mu, schedule, k).map_err(invalid_input)?
        }
    };
    // A manual schedule in the config replaces the bound-derived step.
    match (source, cfg.schedule) {
        (PlanSource::Corollary1 | PlanSource::Corollary2, Some(s)) => {
            plan.with_schedule(s).map_err(invalid_input)
        }
        _ => Ok(plan),
    }
}

#[derive(Serialize)]
struct PlanOutput {
    plan: Plan,
    /// Vectorized-baseline iteration bound at the same constants.
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ratio: Option<f64>,
}

#[derive(Serialize)]
struct SweepRow {
    n: usize,
    #[serde(rename = "N_ours")]
    n_ours: f64,
    #[serde(rename = "N_baseline")]
    n_baseline: f64,
    ratio: f64,
}

pub fn run(a: PlanArgs) -> anyhow::Result<()> {
    let mut cfg = RunConfig::load(a.common.config.as_deref())?;
    let p = &mut cfg.plan;
    p.source = a.source.or(p.source);
    p.l0 = a.l0.or(p.l0).or(Some(1.0));
    p.epsilon = a.epsilon.or(p.epsilon);
    p.delta = a.delta.or(p.delta);
    p.r_bar = a.r_bar.or(p.r_bar);
    let iterations = a.iterations.or(cfg.iterations);

    if let Some(max_n) = a.sweep {
        if max_n == 0 {
            return Err(usage("--sweep needs at least n = 1"));
        }
        let (l0, eps, r) = (
            p.l0.unwrap(),
            require("epsilon", p.epsilon)?,
            require("r-bar", p.r_bar)?,
        );
        let mut w = csv::Writer::from_writer(sink(a.out.as_deref(), a.force)?);
        for n in 1..=max_n {
            let ours = convex_iteration_bound(l0, eps, r, n).map_err(invalid_input)?;
            let base = baseline_bound_vectorized(l0, eps, r, n).map_err(invalid_input)?;
            w.serialize(SweepRow {
                n,
                n_ours: ours,
                n_baseline: base,
                ratio: base / ours,
            })?;
        }
        w.flush()?;
        return Ok(());
    }

    let n = a.n.or(cfg.n).ok_or_else(|| usage("plan needs --n"))?;
    let plan = build(&cfg.plan, iterations, n, PlanDefaults::default())?;
    let (baseline_bound, ratio) = match (
        cfg.plan.source.unwrap_or(PlanSource::Corollary1),
        plan.inputs,
    ) {
        (PlanSource::Corollary1, Some(i)) => {
            let base = baseline_bound_vectorized(i.l0, i.epsilon, i.r_bar, n)?;
            let ours = convex_iteration_bound(i.l0, i.epsilon, i.r_bar, n)?;
            (Some(base), Some(base / ours))
        }
        _ => (None, None),
    };
    let mut w = sink(a.out.as_deref(), a.force)?;
    serde_json::to_writer_pretty(
        &mut w,
        &PlanOutput {
            plan,
            baseline_bound,
            ratio,
        },
    )?;
    writeln!(w)?;
    Ok(())
}
