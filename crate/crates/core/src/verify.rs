//! Statistical verifier suites for the GOE moments, the oracle, the
//! smoothing gap, the oracle second moment, and the projections.
//!
//! Every statistical check passes at [`SE_THRESHOLD`] standard errors;
//! deterministic checks use [`PROJECTION_TOL`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goe::GoeSampler;
pub use crate::goe::{verify_moments, MomentReport, SE_THRESHOLD};
use crate::problems::{linear_cost, norm_cost, random_psd, random_sym};
use crate::projections::{project_feasible, Block, BlockSpec, ConeKind};
use crate::smoothing::{
    f_mu_estimate, grad_fmu_estimate, oracle_second_moment_bound, oracle_second_moment_estimate,
    smoothing_gap_bound,
};
use crate::symmat::BlockMat;

/// Absolute-plus-relative tolerance for projection property checks.
pub const PROJECTION_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleReport {
    pub n: usize,
    pub samples: u64,
    pub mu: f64,
    /// Largest entrywise `|mean - G| / SE`.
    pub max_z: f64,
    pub pass: bool,
}

/// Mean oracle estimate of a linear cost `<G, X>` against `G`.
pub fn verify_oracle(n: usize, samples: u64, mu: f64, seed: u64) -> Result<OracleReport> {
    let g = BlockMat::from(random_sym::<f64>(n, 1.0, seed));
    let spec = BlockSpec::single(n, ConeKind::Sym)?;
    let mut f = linear_cost(g.clone(), spec);
    let x = BlockMat::from(random_sym::<f64>(n, 1.0, seed.wrapping_add(1)));
    let est = grad_fmu_estimate(&mut f, &x, mu, samples, seed)?;
    let max_z = est.max_z_score(&g)?;
    Ok(OracleReport {
        n,
        samples,
        mu,
        max_z,
        pass: max_z <= SE_THRESHOLD,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapRow {
    pub mu: f64,
    pub f_x: f64,
    pub f_mu_hat: f64,
    pub std_err: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SmoothingGapReport {
    pub n: usize,
    pub samples: u64,
    pub rows: Vec<GapRow>,
    pub pass: bool,
}

/// `|f_μ(x) - f(x)| <= μ L0 sqrt((n²+n)/2)` for `f = ‖·‖_F` at a random
/// PSD point.
pub fn verify_smoothing_gap(
    n: usize,
    mus: &[f64],
    samples: u64,
    seed: u64,
) -> Result<SmoothingGapReport> {
    let spec = BlockSpec::single(n, ConeKind::Psd)?;
    let x = BlockMat::from(random_psd::<f64>(n, seed));
    let mut f = norm_cost::<f64>(spec);
    let f_x = f.evaluate(&x)?;
    let mut rows = Vec::with_capacity(mus.len());
    for (i, &mu) in mus.iter().enumerate() {
        let est = f_mu_estimate(&mut f, &x, mu, samples, seed.wrapping_add(i as u64))?;
        let bound = smoothing_gap_bound(1.0, mu, n);
        let pass = (est.mean - f_x).abs() <= bound + SE_THRESHOLD * est.std_err;
        rows.push(GapRow {
            mu,
            f_x,
            f_mu_hat: est.mean,
            std_err: est.std_err,
            bound,
            pass,
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(SmoothingGapReport {
        n,
        samples,
        rows,
        pass,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SecondMomentReport {
    pub n: usize,
    pub samples: u64,
    pub mu: f64,
    pub estimate: f64,
    pub std_err: f64,
    pub bound: f64,
    pub pass: bool,
}

/// `E‖O_μ‖_F² <= L0² (n⁴+2n³+5n²+4n)/4` for `f = ‖·‖_F`.
pub fn verify_second_moment(
    n: usize,
    mu: f64,
    samples: u64,
    seed: u64,
) -> Result<SecondMomentReport> {
    let spec = BlockSpec::single(n, ConeKind::Psd)?;
    let x = BlockMat::from(random_psd::<f64>(n, seed));
    let mut f = norm_cost::<f64>(spec);
    let est = oracle_second_moment_estimate(&mut f, &x, mu, samples, seed)?;
    let bound = oracle_second_moment_bound(1.0, n);
    Ok(SecondMomentReport {
        n,
        samples,
        mu,
        estimate: est.mean,
        std_err: est.std_err,
        bound,
        pass: est.at_most(bound, SE_THRESHOLD),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeCheck {
    pub spec: BlockSpec,
    pub pairs: usize,
    pub nonexpansive_failures: usize,
    pub idempotence_failures: usize,
    pub nearest_point_failures: usize,
    /// Largest violation margin seen across all three properties.
    pub worst_violation: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub cones: Vec<ConeCheck>,
    pub pass: bool,
}

/// For random `x` and random feasible `y`, checks
/// `‖π(x) - y‖ <= ‖x - y‖`, `π(π(x)) = π(x)` and `‖x - π(x)‖ <= ‖x - y‖`.
pub fn verify_projection(n: usize, pairs: usize, seed: u64) -> Result<ProjectionReport> {
    if pairs == 0 {
        return Err(Error::invalid("need at least one pair"));
    }
    let specs = vec![
        BlockSpec::single(n, ConeKind::Sym)?,
        BlockSpec::single(n, ConeKind::Psd)?,
        BlockSpec::single(n, ConeKind::PdFloor(0.1))?,
        BlockSpec::new(vec![
            Block::new(n, ConeKind::Psd)?,
            Block::new(n, ConeKind::PdFloor(1e-6))?,
        ])?,
    ];
    let mut cones = Vec::new();
    for (ci, spec) in specs.into_iter().enumerate() {
        let dims = spec.dims();
        let active = spec.active_mask();
        let mut sampler = GoeSampler::with_stream(1, seed, ci as u64);
        let mut check = ConeCheck {
            spec: spec.clone(),
            pairs,
            nonexpansive_failures: 0,
            idempotence_failures: 0,
            nearest_point_failures: 0,
            worst_violation: 0.0,
        };
        for _ in 0..pairs {
            let x = sampler.sample_blocks::<f64>(&dims, &active).scale(3.0);
            let y = project_feasible(
                &sampler.sample_blocks::<f64>(&dims, &active).scale(3.0),
                &spec,
            )?;
            let px = project_feasible(&x, &spec)?;
            let ppx = project_feasible(&px, &spec)?;
            let dxy = x.sub(&y)?.frob_norm();
            let tol = PROJECTION_TOL * (1.0 + dxy);
            let nonexp = px.sub(&y)?.frob_norm() - dxy;
            let idem = ppx.sub(&px)?.frob_norm();
            let nearest = x.sub(&px)?.frob_norm() - dxy;
            check.nonexpansive_failures += usize::from(nonexp > tol);
            check.idempotence_failures += usize::from(idem > tol);
            check.nearest_point_failures += usize::from(nearest > tol);
            check.worst_violation = check.worst_violation.max(nonexp).max(idem).max(nearest);
        }
        cones.push(check);
    }
    let pass = cones
        .iter()
        .all(|c| c.nonexpansive_failures + c.idempotence_failures + c.nearest_point_failures == 0);
    Ok(ProjectionReport { cones, pass })
}
