use clap::Args;
use serde::Serialize;
use zorms::verify;

use crate::output::print_json;
use crate::{invalid_input, CheckFailed, CommonArgs};

#[derive(Args, Debug)]
pub struct MomentsArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 11)]
    n: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 3)]
    n: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 0.01)]
    mu: f64,
}

#[derive(Args, Debug)]
pub struct GapArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.1])]
    mu: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct SecondMomentArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 0.1)]
    mu: f64,
}

#[derive(Args, Debug)]
pub struct ProjectionArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
}

fn seed(c: &CommonArgs) -> u64 {
    c.seed.unwrap_or(0)
}

/// Prints the report and turns failed checks into [`CheckFailed`].
fn finish(report: &impl Serialize, failed: Vec<String>) -> anyhow::Result<()> {
    print_json(report)?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CheckFailed(failed.join(", ")).into())
    }
}

fn named(checks: &[(&str, bool)]) -> Vec<String> {
    checks
        .iter()
        .filter(|(_, ok)| !ok)
        .map(|(name, _)| name.to_string())
        .collect()
}

pub fn moments(a: MomentsArgs) -> anyhow::Result<()> {
    let r = verify::verify_moments(a.n, a.samples, seed(&a.common)).map_err(invalid_input)?;
    let failed = named(&[
        ("m1 <= bound", r.m1_pass),
        ("m2 exact", r.m2_pass),
        ("m4 exact", r.m4_pass),
    ]);
    finish(&r, failed)
}

pub fn oracle(a: OracleArgs) -> anyhow::Result<()> {
    let r = verify::verify_oracle(a.n, a.samples, a.mu, seed(&a.common)).map_err(invalid_input)?;
    let failed = named(&[("oracle mean equals gradient", r.pass)]);
    finish(&r, failed)
}

pub fn smoothing_gap(a: GapArgs) -> anyhow::Result<()> {
    let r = verify::verify_smoothing_gap(a.n, &a.mu, a.samples, seed(&a.common))
        .map_err(invalid_input)?;
    let failed = r
        .rows
        .iter()
        .filter(|g| !g.pass)
        .map(|g| format!("smoothing gap at mu={}", g.mu))
        .collect();
    finish(&r, failed)
}

pub fn second_moment(a: SecondMomentArgs) -> anyhow::Result<()> {
    let r = verify::verify_second_moment(a.n, a.mu, a.samples, seed(&a.common))
        .map_err(invalid_input)?;
    let failed = named(&[("oracle second moment <= bound", r.pass)]);
    finish(&r, failed)
}

pub fn projection(a: ProjectionArgs) -> anyhow::Result<()> {
    let r = verify::verify_projection(a.n, a.pairs, seed(&a.common)).map_err(invalid_input)?;
    let mut failed = Vec::new();
    for c in &r.cones {
        let cone = serde_json::to_string(&c.spec.blocks)?;
        for (what, count) in [
            ("non-expansiveness", c.nonexpansive_failures),
            ("idempotence", c.idempotence_failures),
            ("nearest point", c.nearest_point_failures),
        ] {
            if count > 0 {
                failed.push(format!("{what} on {cone} ({count} pairs)"));
            }
        }
    }
    finish(&r, failed)
}
