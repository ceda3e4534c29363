use std::fmt;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::plan::Plan;
use crate::error::{Error, Result};
use crate::goe::GoeSampler;
use crate::projections::project_feasible;
use crate::scalar::Real;
use crate::smoothing::{oracle, BlackBoxCost};
use crate::stats::{median, MeanAccumulator};
use crate::symmat::BlockMat;

/// Relative distance-to-feasible-set tolerance for the initial point.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// One logged iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub k: u64,
    /// `f(X_k)`.
    pub f_xk: f64,
    /// `f(X_k + μU_k)`.
    pub f_perturbed: f64,
    pub h_k: f64,
    pub best_so_far: f64,
    /// Cumulative cost evaluations, `2(k + 1)`.
    pub evals: u64,
    /// `‖(X_k - X_{k+1}) / h_k‖_F²`, the squared gradient mapping at this step.
    #[serde(skip)]
    pub mapping_norm_sq: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct RunRecord<T> {
    pub seed: u64,
    pub plan: Plan,
    pub rows: Vec<IterationRow>,
    /// `X̂_N`, the earliest iterate attaining the lowest logged `f(X_k)`.
    pub best: BlockMat<T>,
    pub best_cost: f64,
    pub best_k: u64,
    pub wall_time_s: f64,
}

pub const CSV_HEADER: &str = "k,f_xk,f_perturbed,h_k,best_so_far,evals";

impl<T: Real> RunRecord<T> {
    pub fn evaluations(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.evals)
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{:e},{:e},{:e},{:e},{}",
                r.k, r.f_xk, r.f_perturbed, r.h_k, r.best_so_far, r.evals
            )?;
        }
        Ok(())
    }

    /// Same run up to wall-clock time.
    pub fn same_run(&self, other: &RunRecord<T>) -> bool {
        self.seed == other.seed
            && self.rows == other.rows
            && self.best == other.best
            && self.best_k == other.best_k
    }
}

#[derive(Debug)]
pub enum OptimizeError<T> {
    /// Rejected before any evaluation.
    Invalid(Error),
    /// Stopped mid-run; `partial` holds every completed iteration.
    Aborted {
        partial: Box<RunRecord<T>>,
        cause: Error,
    },
}

impl<T> OptimizeError<T> {
    pub fn cause(&self) -> &Error {
        match self {
            OptimizeError::Invalid(e) | OptimizeError::Aborted { cause: e, .. } => e,
        }
    }

    pub fn into_cause(self) -> Error {
        match self {
            OptimizeError::Invalid(e) | OptimizeError::Aborted { cause: e, .. } => e,
        }
    }
}

impl<T> fmt::Display for OptimizeError<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimizeError::Invalid(e) => write!(f, "{e}"),
            OptimizeError::Aborted { partial, cause } => {
                write!(
                    f,
                    "run aborted after {} iterations: {cause}",
                    partial.rows.len()
                )
            }
        }
    }
}

impl<T: fmt::Debug> std::error::Error for OptimizeError<T> {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(self.cause())
    }
}

/// Runs ZO-RMS: for `k = 0..=N`, draw `U_k`, query the oracle, and step
/// `X_{k+1} = π(X_k - h_k O_μ(X_k, U_k))`. Returns the best visited iterate
/// among `X_0..X_N`. Uses exactly `2(N + 1)` cost evaluations.
pub fn optimize<T: Real>(
    f: &mut BlackBoxCost<'_, T>,
    x0: &BlockMat<T>,
    plan: &Plan,
    seed: u64,
) -> std::result::Result<RunRecord<T>, OptimizeError<T>> {
    let started = Instant::now();
    let spec = f.spec().clone();
    plan.validate().map_err(OptimizeError::Invalid)?;
    let distance = spec.distance(x0).map_err(OptimizeError::Invalid)?.as_f64();
    if distance > FEASIBILITY_TOL * (1.0 + x0.frob_norm().as_f64()) {
        return Err(OptimizeError::Invalid(Error::Infeasible { distance }));
    }

    let dims = spec.dims();
    let active = spec.active_mask();
    let mu = T::lit(plan.mu);
    let mut sampler = GoeSampler::new(1, seed);
    let mut record = RunRecord {
        seed,
        plan: plan.clone(),
        rows: Vec::new(),
        best: x0.clone(),
        best_cost: f64::INFINITY,
        best_k: 0,
        wall_time_s: 0.0,
    };
    let evals_before = f.eval_count();
    let mut x = x0.clone();

    for k in 0..=plan.iterations {
        let step = (|| -> Result<(IterationRow, BlockMat<T>)> {
            let u = sampler.sample_blocks::<T>(&dims, &active);
            let o = oracle(f, &x, &u, mu)?;
            let h = plan.schedule.step(k);
            let next = project_feasible(&x.axpy(-T::lit(h), &o.estimate)?, &spec)?;
            let mapping_norm_sq = x.sub(&next)?.frob_norm_sq().as_f64() / (h * h);
            let row = IterationRow {
                k,
                f_xk: o.f_base.as_f64(),
                f_perturbed: o.f_perturbed.as_f64(),
                h_k: h,
                best_so_far: 0.0,
                evals: f.eval_count() - evals_before,
                mapping_norm_sq,
            };
            Ok((row, next))
        })();
        match step {
            Ok((mut row, next)) => {
                if row.f_xk < record.best_cost {
                    record.best_cost = row.f_xk;
                    record.best = x.clone();
                    record.best_k = k;
                }
                row.best_so_far = record.best_cost;
                record.rows.push(row);
                x = next;
            }
            Err(cause) => {
                record.wall_time_s = started.elapsed().as_secs_f64();
                return Err(OptimizeError::Aborted {
                    partial: Box::new(record),
                    cause,
                });
            }
        }
    }
    record.wall_time_s = started.elapsed().as_secs_f64();
    Ok(record)
}

/// Aggregate over independent seeded runs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub seeds: Vec<u64>,
    pub final_best: Vec<f64>,
    pub mean_best: f64,
    pub median_best: f64,
    pub variance_best: f64,
    pub evaluations_per_run: Vec<u64>,
    /// Seed-averaged `f(X_k)`, an estimate of `E f(X_k)`.
    pub mean_trajectory: Vec<f64>,
    pub mean_best_so_far: Vec<f64>,
}

#[derive(Debug)]
pub struct RepeatOutcome<T> {
    pub summary: RepeatSummary,
    pub records: Vec<RunRecord<T>>,
}

/// Runs [`optimize`] once per seed (in parallel) on fresh costs from
/// `factory(seed)`. Results are ordered as `seeds` and do not depend on
/// scheduling.
pub fn run_repeated<'a, T, F>(
    factory: F,
    x0: &BlockMat<T>,
    plan: &Plan,
    seeds: &[u64],
) -> Result<RepeatOutcome<T>>
where
    T: Real,
    F: Fn(u64) -> Result<BlackBoxCost<'a, T>> + Sync,
{
    if seeds.len() < 2 {
        return Err(Error::invalid("repeated runs need at least two seeds"));
    }
    let records = seeds
        .par_iter()
        .map(|&seed| {
            let attribute = |e: Error| Error::SeedFailed {
                seed,
                source: Box::new(e),
            };
            let mut f = factory(seed).map_err(attribute)?;
            optimize(&mut f, x0, plan, seed).map_err(|e| attribute(e.into_cause()))
        })
        .collect::<Result<Vec<_>>>()?;

    let final_best: Vec<f64> = records.iter().map(|r| r.best_cost).collect();
    let mut acc = MeanAccumulator::default();
    final_best.iter().for_each(|&v| acc.push(v));
    let len = records.iter().map(|r| r.rows.len()).min().unwrap_or(0);
    let column_mean = |pick: fn(&IterationRow) -> f64| -> Vec<f64> {
        (0..len)
            .map(|k| records.iter().map(|r| pick(&r.rows[k])).sum::<f64>() / records.len() as f64)
            .collect()
    };
    let summary = RepeatSummary {
        seeds: seeds.to_vec(),
        mean_best: acc.mean(),
        median_best: median(&final_best),
        variance_best: acc.variance(),
        evaluations_per_run: records.iter().map(RunRecord::evaluations).collect(),
        mean_trajectory: column_mean(|r| r.f_xk),
        mean_best_so_far: column_mean(|r| r.best_so_far),
        final_best,
    };
    Ok(RepeatOutcome { summary, records })
}
