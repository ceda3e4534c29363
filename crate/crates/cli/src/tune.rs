use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use zorms::mpc::{
    blocks_to_weights, make_tuning_cost, Constraints, LtiPlant, MpcWeights, TrackingTask,
    TunedBlocks, TuningOptions, TuningSetup, DEMO_ITERATIONS, DEMO_MU, DEMO_STEP_C,
};
use zorms::problems::{PsdDistanceProblem, WavyPsdProblem};
use zorms::zorms::{OptimizeError, RepeatSummary};
use zorms::{
    optimize, run_repeated, BlackBoxCost, BlockMat, Plan, RunRecord, StepSchedule, SymMat,
};

use crate::config::{read_fixture, PlanSource, ProblemKind, RunConfig};
use crate::output::{create_file, prepare_dir, print_json, write_json};
use crate::plan::{build, PlanDefaults};
use crate::{invalid_input, usage, TuneArgs};

const DEFAULT_OUT: &str = "zorms-out";

/// Percentage improvement `100 · (f_base - f_best) / f_base`.
pub fn improvement_pct(baseline: f64, best: f64) -> f64 {
    100.0 * (baseline - best) / baseline
}

#[derive(Serialize)]
struct SeedResult {
    seed: u64,
    best_cost: f64,
    best_k: u64,
    improvement_pct: f64,
    evaluations: u64,
    wall_time_s: f64,
}

#[derive(Serialize)]
struct Summary {
    problem: ProblemKind,
    plan: Option<Plan>,
    baseline_cost: f64,
    best_cost: f64,
    improvement_pct: f64,
    evaluations_per_run: u64,
    /// Evaluations that fell back to the failure penalty (MPC only).
    #[serde(skip_serializing_if = "Option::is_none")]
    penalties: Option<usize>,
    runs: Vec<SeedResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    repeat: Option<RepeatSummary>,
}

fn merge(a: &TuneArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = RunConfig::load(a.common.config.as_deref())?;
    cfg.problem = a.problem.unwrap_or(cfg.problem);
    let p = &mut cfg.plan;
    p.source = a.source.or(p.source);
    p.l0 = a.l0.or(p.l0);
    p.epsilon = a.epsilon.or(p.epsilon);
    p.delta = a.delta.or(p.delta);
    p.r_bar = a.r_bar.or(p.r_bar);
    p.mu = a.mu.or(p.mu);
    if let Some(c) = a.step_c {
        p.schedule = Some(StepSchedule::InvSqrt { c });
    }
    cfg.iterations = a.iterations.or(cfg.iterations);
    cfg.n = a.n.or(cfg.n);
    cfg.problem_seed = a.problem_seed.or(cfg.problem_seed);
    cfg.horizon = a.horizon.or(cfg.horizon);
    cfg.out_dir = a.out.clone().or(cfg.out_dir);
    let f = &mut cfg.fixtures;
    for (slot, flag) in [
        (&mut f.plant, &a.plant),
        (&mut f.model, &a.model),
        (&mut f.task, &a.task),
        (&mut f.constraints, &a.constraints),
        (&mut f.weights, &a.weights),
    ] {
        if flag.is_some() {
            slot.clone_from(flag);
        }
    }
    if a.dare_terminal.is_some() || a.tune.is_some() {
        let t = cfg.tuning.get_or_insert_with(TuningOptions::demo);
        if let Some(d) = a.dare_terminal {
            t.dare_terminal = d;
        }
        if let Some(blocks) = &a.tune {
            t.tuned = parse_blocks(blocks)?;
        }
    }
    let base = a.common.seed.unwrap_or(0);
    let seeds = match (a.runs, cfg.seeds.take()) {
        (Some(0), _) => return Err(usage("--runs must be at least 1")),
        (Some(r), _) => (base..base + r).collect(),
        (None, Some(s)) if a.common.seed.is_none() => s,
        _ => vec![base],
    };
    if seeds.is_empty() {
        return Err(usage("config lists no seeds"));
    }
    cfg.seeds = Some(seeds);
    Ok(cfg)
}

fn parse_blocks(names: &[String]) -> anyhow::Result<TunedBlocks> {
    let mut t = TunedBlocks {
        p: false,
        q: false,
        r: false,
    };
    for name in names {
        match name.trim().to_ascii_lowercase().as_str() {
            "p" => t.p = true,
            "q" => t.q = true,
            "r" => t.r = true,
            other => {
                return Err(usage(format!(
                    "unknown weight block `{other}`; use p, q, r"
                )))
            }
        }
    }
    Ok(t)
}

/// MPC setup from fixtures, falling back to the built-in demo.
pub fn mpc_setup(cfg: &RunConfig) -> anyhow::Result<TuningSetup> {
    let mut setup = TuningSetup::demo();
    let f = &cfg.fixtures;
    if let Some(path) = &f.plant {
        let plant: LtiPlant = read_fixture(path)?;
        let nz = plant.nx() + plant.ny();
        setup.template.plant = plant.clone();
        setup.template.weights = MpcWeights {
            p: SymMat::identity(nz),
            q: SymMat::identity(nz),
            r: SymMat::identity(plant.nu()),
        };
        setup.template.constraints = None;
        setup.task = TrackingTask::step(plant.ny(), setup.task.len(), 5, 1.0);
        setup.true_plant = plant;
    }
    if let Some(path) = &f.model {
        setup.template.plant = read_fixture(path)?;
    }
    if let Some(path) = &f.task {
        let task: TrackingTask = read_fixture(path)?;
        task.validate()
            .map_err(|e| usage(format!("invalid fixture {}: {e}", path.display())))?;
        setup.task = task;
    }
    if let Some(path) = &f.constraints {
        setup.template.constraints = Some(read_fixture::<Constraints>(path)?);
    }
    if let Some(path) = &f.weights {
        setup.template.weights = read_fixture(path)?;
    }
    if let Some(h) = cfg.horizon {
        setup.template.horizon = h;
    }
    setup
        .template
        .compile()
        .map_err(|e| usage(format!("invalid MPC setup: {e}")))?;
    Ok(setup)
}

struct Outcome {
    plan: Option<Plan>,
    baseline_cost: f64,
    records: Vec<RunRecord<f64>>,
    repeat: Option<RepeatSummary>,
    penalties: Option<usize>,
}

fn seeds(cfg: &RunConfig) -> &[u64] {
    cfg.seeds.as_deref().unwrap_or(&[0])
}

fn run_all<'a, F>(
    factory: F,
    x0: &BlockMat<f64>,
    plan: &Plan,
    seeds: &[u64],
) -> anyhow::Result<(Vec<RunRecord<f64>>, Option<RepeatSummary>)>
where
    F: Fn(u64) -> zorms::Result<BlackBoxCost<'a, f64>> + Sync,
{
    if let [seed] = seeds {
        let mut f = factory(*seed)?;
        let rec = optimize(&mut f, x0, plan, *seed).map_err(|e| match e {
            OptimizeError::Invalid(e) => invalid_input(e),
            aborted => anyhow::anyhow!("{aborted}"),
        })?;
        return Ok((vec![rec], None));
    }
    let out = run_repeated(factory, x0, plan, seeds)?;
    Ok((out.records, Some(out.summary)))
}

fn synthetic(cfg: &RunConfig, baseline_only: bool) -> anyhow::Result<(Outcome, BlockMat<f64>)> {
    let n = cfg.n.unwrap_or(3);
    let problem_seed = cfg.problem_seed.unwrap_or(0);
    let convex = cfg.problem == ProblemKind::SyntheticConvex;
    let wavy = if convex {
        None
    } else {
        Some(WavyPsdProblem::new(n, problem_seed).map_err(invalid_input)?)
    };
    let base = match &wavy {
        Some(w) => w.base.clone(),
        None => PsdDistanceProblem::new(n, problem_seed).map_err(invalid_input)?,
    };
    let l0 = wavy.as_ref().map_or(1.0, WavyPsdProblem::lipschitz);
    let make = |_seed: u64| Ok(wavy.as_ref().map_or_else(|| base.cost(), |w| w.cost()));
    let baseline_cost = make(0)?.evaluate(&base.x0)?;
    if baseline_only {
        let o = Outcome {
            plan: None,
            baseline_cost,
            records: vec![],
            repeat: None,
            penalties: None,
        };
        return Ok((o, base.x0.clone()));
    }
    let defaults = PlanDefaults {
        source: Some(if convex {
            PlanSource::Corollary1
        } else {
            PlanSource::Corollary2
        }),
        l0: Some(l0),
        epsilon: Some(0.5),
        delta: Some(1.0),
        r_bar: Some(base.r_bar()),
        ..PlanDefaults::default()
    };
    let plan = build(&cfg.plan, cfg.iterations, n, defaults)?;
    let (records, repeat) = run_all(make, &base.x0, &plan, seeds(cfg))?;
    Ok((
        Outcome {
            plan: Some(plan),
            baseline_cost,
            records,
            repeat,
            penalties: None,
        },
        base.x0.clone(),
    ))
}

fn mpc(
    cfg: &RunConfig,
    baseline_only: bool,
    out: &Path,
) -> anyhow::Result<(Outcome, BlockMat<f64>)> {
    let setup = mpc_setup(cfg)?;
    let opts = cfg.tuning.clone().unwrap_or_else(TuningOptions::demo);
    let session = make_tuning_cost(&setup, &opts)
        .map_err(|e| usage(format!("baseline experiment failed: {e}")))?;
    let (_, base_traj) = setup.experiment(&session.baseline, &opts)?;
    base_traj.write_csv(create_file(&out.join("baseline_trajectory.csv"), true)?)?;
    if baseline_only {
        let o = Outcome {
            plan: None,
            baseline_cost: session.baseline_cost,
            records: vec![],
            repeat: None,
            penalties: Some(0),
        };
        return Ok((o, session.baseline));
    }
    let defaults = PlanDefaults {
        source: Some(PlanSource::Manual),
        mu: Some(DEMO_MU),
        schedule: Some(StepSchedule::InvSqrt { c: DEMO_STEP_C }),
        iterations: Some(DEMO_ITERATIONS),
        ..PlanDefaults::default()
    };
    let n = session.cost.spec().total_dim();
    let plan = build(&cfg.plan, cfg.iterations, n, defaults)?;
    let penalties = std::sync::atomic::AtomicUsize::new(0);
    let factory = |_seed: u64| -> zorms::Result<BlackBoxCost<'static, f64>> {
        Ok(make_tuning_cost(&setup, &opts)?.cost)
    };
    let (records, repeat) = if let [seed] = seeds(cfg) {
        let mut s = make_tuning_cost(&setup, &opts)?;
        let rec = optimize(&mut s.cost, &session.baseline, &plan, *seed)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        penalties.store(s.penalty_count(), std::sync::atomic::Ordering::Relaxed);
        (vec![rec], None)
    } else {
        run_all(factory, &session.baseline, &plan, seeds(cfg))?
    };
    let best = records
        .iter()
        .min_by(|a, b| a.best_cost.total_cmp(&b.best_cost))
        .expect("at least one run");
    if let Ok((_, traj)) = setup.experiment(&best.best, &opts) {
        traj.write_csv(create_file(&out.join("best_trajectory.csv"), true)?)?;
    }
    let weights = setup.weights_at(&best.best, &opts)?;
    write_json(&out.join("best_weights.json"), &weights)?;
    let penalties = (records.len() == 1).then(|| penalties.into_inner());
    Ok((
        Outcome {
            plan: Some(plan),
            baseline_cost: session.baseline_cost,
            records,
            repeat,
            penalties,
        },
        session.baseline,
    ))
}

pub fn run(a: TuneArgs) -> anyhow::Result<()> {
    let cfg = merge(&a)?;
    let out: PathBuf = cfg
        .out_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    prepare_dir(&out, a.force)?;
    let (outcome, x0) = match cfg.problem {
        ProblemKind::MpcTune => mpc(&cfg, a.baseline_only, &out)?,
        _ => synthetic(&cfg, a.baseline_only)?,
    };

    for rec in &outcome.records {
        let name = if outcome.records.len() == 1 {
            "run.csv".to_string()
        } else {
            format!("run_{}.csv", rec.seed)
        };
        let mut w = create_file(&out.join(name), true)?;
        rec.write_csv(&mut w)?;
        w.flush()?;
    }
    if cfg.problem != ProblemKind::MpcTune {
        let best = outcome
            .records
            .iter()
            .min_by(|a, b| a.best_cost.total_cmp(&b.best_cost));
        write_json(&out.join("best_point.json"), best.map_or(&x0, |r| &r.best))?;
    } else if a.baseline_only {
        write_json(&out.join("best_weights.json"), &blocks_to_weights(&x0)?)?;
    }

    let runs: Vec<SeedResult> = outcome
        .records
        .iter()
        .map(|r| SeedResult {
            seed: r.seed,
            best_cost: r.best_cost,
            best_k: r.best_k,
            improvement_pct: improvement_pct(outcome.baseline_cost, r.best_cost),
            evaluations: r.evaluations(),
            wall_time_s: r.wall_time_s,
        })
        .collect();
    let best_cost = runs
        .iter()
        .map(|r| r.best_cost)
        .fold(outcome.baseline_cost, f64::min);
    let summary = Summary {
        problem: cfg.problem,
        evaluations_per_run: outcome.plan.as_ref().map_or(0, |p| 2 * (p.iterations + 1)),
        plan: outcome.plan,
        baseline_cost: outcome.baseline_cost,
        best_cost,
        improvement_pct: improvement_pct(outcome.baseline_cost, best_cost),
        penalties: outcome.penalties,
        runs,
        repeat: outcome.repeat,
    };
    write_json(&out.join("summary.json"), &summary)?;
    print_json(&summary)
}
