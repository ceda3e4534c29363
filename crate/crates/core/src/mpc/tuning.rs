//! MPC weight tuning as a black-box cost over `(P, Q, R)`.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::controller::{dmatrix_to_sym, sym_to_dmatrix, Constraints, MpcProblem, MpcWeights};
use super::dare::solve_dare;
use super::plant::LtiPlant;
use super::sim::{simulate_closed_loop, tracking_cost, TrackingTask, Trajectory};
use crate::error::{Error, Result};
use crate::projections::{Block, BlockSpec, ConeKind, DEFAULT_PD_FLOOR};
use crate::smoothing::BlackBoxCost;
use crate::symmat::{BlockMat, SymMat};
use crate::zorms::{Plan, StepSchedule};

/// Which of `P`, `Q`, `R` the optimizer may move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TunedBlocks {
    pub p: bool,
    pub q: bool,
    pub r: bool,
}

impl TunedBlocks {
    pub const ALL: TunedBlocks = TunedBlocks {
        p: true,
        q: true,
        r: true,
    };
    pub const Q_R: TunedBlocks = TunedBlocks {
        p: false,
        q: true,
        r: true,
    };
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningOptions {
    pub tuned: TunedBlocks,
    /// Recompute `P` from the DARE at every evaluation (`P` is then held).
    pub dare_terminal: bool,
    pub pd_floor: f64,
    /// Failed experiments cost `penalty_factor × baseline cost`.
    pub penalty_factor: f64,
    pub noise_seed: Option<u64>,
}

impl Default for TuningOptions {
    fn default() -> Self {
        TuningOptions {
            tuned: TunedBlocks::ALL,
            dare_terminal: false,
            pd_floor: DEFAULT_PD_FLOOR,
            penalty_factor: 10.0,
            noise_seed: None,
        }
    }
}

impl TuningOptions {
    /// Settings of the built-in demo: `Q`, `R` tuned, `P` from the DARE.
    pub fn demo() -> Self {
        TuningOptions {
            tuned: TunedBlocks::Q_R,
            dare_terminal: true,
            ..TuningOptions::default()
        }
    }
}

/// Smoothing parameter of the demo plan.
pub const DEMO_MU: f64 = 0.1;
/// Step constant of the demo schedule `h_k = c / sqrt(k + 1)`.
pub const DEMO_STEP_C: f64 = 2.0;
/// Iterations of the demo plan.
pub const DEMO_ITERATIONS: u64 = 11;

/// Plan used by the built-in demo.
pub fn demo_plan() -> Plan {
    Plan::manual(
        DEMO_MU,
        StepSchedule::InvSqrt { c: DEMO_STEP_C },
        DEMO_ITERATIONS,
    )
    .expect("valid constants")
}

/// Everything a tuning experiment needs besides the weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningSetup {
    pub template: MpcProblem,
    pub task: TrackingTask,
    pub true_plant: LtiPlant,
}

impl TuningSetup {
    /// Double integrator tracking a unit step with a 10-step horizon, an
    /// input box of ±2, and a deliberately sluggish baseline (`R` large
    /// relative to `Q`). `P` is the Riccati solution for the baseline `Q`, `R`.
    pub fn demo() -> TuningSetup {
        let plant = LtiPlant::double_integrator();
        let q = SymMat::from_diag(&[1.0, 1.0, 0.1]);
        let r = SymMat::from_diag(&[10.0]);
        let model = plant.augment().expect("fixture is not augmented");
        let p = solve_dare(&model.a, &model.b, &sym_to_dmatrix(&q), &sym_to_dmatrix(&r))
            .and_then(|p| dmatrix_to_sym(&p))
            .expect("double integrator is stabilizable");
        let template = MpcProblem {
            horizon: 10,
            weights: MpcWeights { p, q, r },
            constraints: Some(Constraints::input_box(3, &[-2.0], &[2.0])),
            integrator_augmented: true,
            plant: plant.clone(),
        };
        TuningSetup {
            template,
            task: TrackingTask::step(1, 100, 5, 1.0),
            true_plant: plant,
        }
    }

    /// Block layout `[P, Q, R]` with held blocks marked `FIXED`.
    pub fn spec(&self, opts: &TuningOptions) -> Result<BlockSpec> {
        let w = &self.template.weights;
        let pick = |tuned: bool, cone: ConeKind| if tuned { cone } else { ConeKind::Fixed };
        BlockSpec::new(vec![
            Block::new(
                w.p.n(),
                pick(opts.tuned.p && !opts.dare_terminal, ConeKind::Psd),
            )?,
            Block::new(w.q.n(), pick(opts.tuned.q, ConeKind::Psd))?,
            Block::new(
                w.r.n(),
                pick(opts.tuned.r, ConeKind::PdFloor(opts.pd_floor)),
            )?,
        ])
    }

    /// Template weights as a block point (`P` from the DARE if requested).
    pub fn baseline_point(&self, opts: &TuningOptions) -> Result<BlockMat<f64>> {
        let w = self.resolve_weights(&self.template.weights, opts.dare_terminal)?;
        Ok(weights_to_blocks(&w))
    }

    fn resolve_weights(&self, w: &MpcWeights, dare_terminal: bool) -> Result<MpcWeights> {
        if !dare_terminal {
            return Ok(w.clone());
        }
        let model = self.template.prediction_model()?;
        let p = solve_dare(
            &model.a,
            &model.b,
            &sym_to_dmatrix(&w.q),
            &sym_to_dmatrix(&w.r),
        )?;
        Ok(MpcWeights {
            p: dmatrix_to_sym(&p)?,
            q: w.q.clone(),
            r: w.r.clone(),
        })
    }

    /// Runs one closed-loop experiment with the weights in `x`. Held blocks
    /// always come from the template.
    pub fn experiment(&self, x: &BlockMat<f64>, opts: &TuningOptions) -> Result<(f64, Trajectory)> {
        let w = self.weights_at(x, opts)?;
        let prob = MpcProblem {
            weights: w,
            ..self.template.clone()
        };
        let traj = simulate_closed_loop(&prob, &self.task, &self.true_plant, opts.noise_seed)?;
        if let Some(why) = &traj.failure {
            return Err(Error::invalid(format!("closed loop failed at {why}")));
        }
        let cost = tracking_cost(&traj, &self.task)?;
        if !cost.is_finite() {
            return Err(Error::NonFinite("tracking cost"));
        }
        Ok((cost, traj))
    }

    /// Weights used by [`TuningSetup::experiment`] at `x`.
    pub fn weights_at(&self, x: &BlockMat<f64>, opts: &TuningOptions) -> Result<MpcWeights> {
        if x.blocks.len() != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                found: x.blocks.len(),
            });
        }
        let t = &self.template.weights;
        let take = |tuned: bool, i: usize, held: &SymMat<f64>| {
            if tuned {
                x.blocks[i].clone()
            } else {
                held.clone()
            }
        };
        let w = MpcWeights {
            p: take(opts.tuned.p && !opts.dare_terminal, 0, &t.p),
            q: take(opts.tuned.q, 1, &t.q),
            r: take(opts.tuned.r, 2, &t.r),
        };
        self.resolve_weights(&w, opts.dare_terminal)
    }
}

pub fn weights_to_blocks(w: &MpcWeights) -> BlockMat<f64> {
    BlockMat::new(vec![w.p.clone(), w.q.clone(), w.r.clone()])
}

pub fn blocks_to_weights(x: &BlockMat<f64>) -> Result<MpcWeights> {
    match x.blocks.as_slice() {
        [p, q, r] => Ok(MpcWeights {
            p: p.clone(),
            q: q.clone(),
            r: r.clone(),
        }),
        other => Err(Error::DimensionMismatch {
            expected: 3,
            found: other.len(),
        }),
    }
}

/// A tuning cost plus its reference point.
pub struct TuningSession {
    pub cost: BlackBoxCost<'static, f64>,
    pub baseline: BlockMat<f64>,
    pub baseline_cost: f64,
    pub penalty: f64,
    penalties: Arc<AtomicUsize>,
}

impl TuningSession {
    /// Number of evaluations that fell back to the penalty.
    pub fn penalty_count(&self) -> usize {
        self.penalties.load(Ordering::Relaxed)
    }
}

/// Builds the black-box tuning cost over `[P, Q, R]`. Failed experiments
/// (infeasible QP, DARE divergence, non-PD Hessian) return the penalty.
pub fn make_tuning_cost(setup: &TuningSetup, opts: &TuningOptions) -> Result<TuningSession> {
    if !(opts.penalty_factor > 0.0 && opts.penalty_factor.is_finite()) {
        return Err(Error::invalid("penalty factor must be positive and finite"));
    }
    let spec = setup.spec(opts)?;
    let baseline = setup.baseline_point(opts)?;
    let (baseline_cost, _) = setup.experiment(&baseline, opts)?;
    let penalty = opts.penalty_factor * baseline_cost;
    let penalties = Arc::new(AtomicUsize::new(0));
    let counter = Arc::clone(&penalties);
    let setup = setup.clone();
    let opts = opts.clone();
    let cost = BlackBoxCost::new(spec, move |x: &BlockMat<f64>| {
        match setup.experiment(x, &opts) {
            Ok((c, _)) => c,
            Err(err) => {
                counter.fetch_add(1, Ordering::Relaxed);
                log::warn!("tuning experiment failed, charging penalty {penalty}: {err}");
                penalty
            }
        }
    });
    Ok(TuningSession {
        cost,
        baseline,
        baseline_cost,
        penalty,
        penalties,
    })
}
