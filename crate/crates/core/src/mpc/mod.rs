//! Integrator-augmented linear MPC, closed-loop simulation, and the
//! tracking cost used for weight tuning.

mod controller;
mod dare;
mod plant;
mod qp;
mod sim;
mod tuning;

pub use controller::{
    solve_mpc_step, Constraints, MpcController, MpcProblem, MpcWeights, StageBound,
};
pub use dare::{dare_residual, riccati_map, solve_dare, DARE_MAX_ITERATIONS};
pub use plant::{random_stable_plant, LtiPlant, FOUR_STATE_SEED};
pub use qp::{
    kkt_stats, solve_qp, solve_qp_factored, QpSolution, QpStats, KKT_TOL, QP_MAX_ITERATIONS,
};
pub use sim::{simulate_closed_loop, simulate_with, tracking_cost, TrackingTask, Trajectory};
pub use tuning::{
    blocks_to_weights, demo_plan, make_tuning_cost, weights_to_blocks, TunedBlocks, TuningOptions,
    TuningSession, TuningSetup, DEMO_ITERATIONS, DEMO_MU, DEMO_STEP_C,
};
