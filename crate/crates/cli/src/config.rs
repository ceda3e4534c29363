//! JSON run configuration. Command-line flags override file values.

use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use zorms::mpc::TuningOptions;
use zorms::StepSchedule;

use crate::UsageError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
#[value(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ProblemKind {
    SyntheticConvex,
    SyntheticNonconvex,
    #[default]
    MpcTune,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PlanSource {
    Corollary1,
    Corollary2,
    Manual,
}

/// Planner inputs. Which fields are required depends on `source`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    pub source: Option<PlanSource>,
    pub l0: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub r_bar: Option<f64>,
    pub mu: Option<f64>,
    pub schedule: Option<StepSchedule>,
}

/// Plant, model, task and constraint files for MPC tuning. Missing entries
/// fall back to the built-in demo.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fixtures {
    /// Plant the closed loop runs against.
    pub plant: Option<PathBuf>,
    /// Prediction model; defaults to the plant.
    pub model: Option<PathBuf>,
    pub task: Option<PathBuf>,
    pub constraints: Option<PathBuf>,
    /// Baseline weights `{"p":…,"q":…,"r":…}`.
    pub weights: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemKind,
    pub plan: PlanConfig,
    /// Executed iteration count, overriding the plan's.
    pub iterations: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub out_dir: Option<PathBuf>,
    /// Synthetic problems: matrix dimension and target seed.
    pub n: Option<usize>,
    pub problem_seed: Option<u64>,
    pub horizon: Option<usize>,
    pub fixtures: Fixtures,
    pub tuning: Option<TuningOptions>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<RunConfig> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| UsageError(format!("cannot read config {}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| UsageError(format!("invalid config {}: {e}", path.display())).into())
    }
}

/// Reads a JSON fixture, naming the path on failure.
pub fn read_fixture<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read fixture {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| UsageError(format!("invalid fixture {}: {e}", path.display())).into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let json = r#"{
            "problem": "SYNTHETIC_CONVEX",
            "plan": {"source": "corollary1", "l0": 1.0, "epsilon": 0.5},
            "iterations": 40,
            "seeds": [1, 2],
            "n": 3,
            "fixtures": {"plant": "plant.json"},
            "tuning": {"dare_terminal": true}
        }"#;
        let cfg: RunConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.problem, ProblemKind::SyntheticConvex);
        assert_eq!(cfg.plan.source, Some(PlanSource::Corollary1));
        assert!(cfg.tuning.unwrap().dare_terminal);
    }

    #[test]
    fn manual_schedule_shape() {
        let json = r#"{"plan": {"source": "manual", "mu": 0.1, "schedule": {"kind": "inv_sqrt", "c": 2.0}}}"#;
        let cfg: RunConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.plan.schedule, Some(StepSchedule::InvSqrt { c: 2.0 }));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"problme": "MPC_TUNE"}"#).is_err());
    }
}
