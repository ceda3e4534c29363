//! Dense convex QP `min ½zᵀHz + cᵀz  s.t.  Gz <= h` with `H` positive definite.
//!
//! The unconstrained minimizer is returned directly when it is feasible;
//! otherwise a Mehrotra predictor-corrector interior-point method runs.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const QP_MAX_ITERATIONS: usize = 500;
/// Required KKT residual on every returned solution.
pub const KKT_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct QpStats {
    pub iterations: usize,
    /// `‖Hz + c + Gᵀλ‖_∞`.
    pub stationarity: f64,
    /// `max(0, max(Gz - h))`.
    pub primal_infeasibility: f64,
    /// `max |λᵢ (h - Gz)ᵢ|`.
    pub complementarity: f64,
    pub active_constraints: usize,
}

impl QpStats {
    pub fn kkt_residual(&self) -> f64 {
        self.stationarity
            .max(self.primal_infeasibility)
            .max(self.complementarity)
    }
}

#[derive(Clone, Debug)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub lambda: DVector<f64>,
    pub stats: QpStats,
}

/// KKT residuals of a candidate primal-dual pair.
pub fn kkt_stats(
    h: &DMatrix<f64>,
    c: &DVector<f64>,
    g: &DMatrix<f64>,
    hv: &DVector<f64>,
    z: &DVector<f64>,
    lambda: &DVector<f64>,
) -> QpStats {
    let stat = h * z + c + g.transpose() * lambda;
    let slack = hv - g * z;
    let active = lambda.iter().filter(|&&l| l > 1e-9).count();
    QpStats {
        iterations: 0,
        stationarity: stat.amax(),
        primal_infeasibility: slack.iter().fold(0.0f64, |m, &s| m.max(-s)),
        complementarity: slack
            .iter()
            .zip(lambda.iter())
            .fold(0.0f64, |m, (s, l)| m.max((s * l).abs())),
        active_constraints: active,
    }
}

/// Solves with a precomputed Cholesky factor of `H`.
pub fn solve_qp_factored(
    h: &DMatrix<f64>,
    chol: &Cholesky<f64, Dyn>,
    c: &DVector<f64>,
    g: &DMatrix<f64>,
    hv: &DVector<f64>,
) -> Result<QpSolution> {
    let n = h.nrows();
    let m = g.nrows();
    if c.len() != n || g.ncols() != n || hv.len() != m {
        return Err(Error::invalid("inconsistent QP dimensions"));
    }
    let z0 = -chol.solve(c);
    let lambda0 = DVector::zeros(m);
    if m == 0 || (g * &z0 - hv).iter().all(|&v| v <= 0.0) {
        let stats = kkt_stats(h, c, g, hv, &z0, &lambda0);
        return Ok(QpSolution {
            z: z0,
            lambda: lambda0,
            stats,
        });
    }
    interior_point(h, c, g, hv, z0)
}

/// Dense QP solve. Fails with [`Error::NotPositiveDefinite`] if `H` is not
/// positive definite and [`Error::QpInfeasible`] if no feasible point exists.
pub fn solve_qp(
    h: &DMatrix<f64>,
    c: &DVector<f64>,
    g: &DMatrix<f64>,
    hv: &DVector<f64>,
) -> Result<QpSolution> {
    let chol = h
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { block: "H" })?;
    solve_qp_factored(h, &chol, c, g, hv)
}

fn max_step(v: &DVector<f64>, dv: &DVector<f64>) -> f64 {
    v.iter()
        .zip(dv.iter())
        .filter(|(_, &d)| d < 0.0)
        .fold(1.0f64, |a, (&x, &d)| a.min(-x / d))
}

fn interior_point(
    h: &DMatrix<f64>,
    c: &DVector<f64>,
    g: &DMatrix<f64>,
    hv: &DVector<f64>,
    mut z: DVector<f64>,
) -> Result<QpSolution> {
    let m = g.nrows();
    let mf = m as f64;
    let scale_d = 1.0 + c.amax();
    let scale_p = 1.0 + hv.amax();
    let mut s = (hv - g * &z).map(|v| v.max(1.0));
    let mut lambda = DVector::from_element(m, 1.0);
    let gt = g.transpose();
    let mut last_rp = f64::INFINITY;

    for it in 1..=QP_MAX_ITERATIONS {
        let r_d = h * &z + c + &gt * &lambda;
        let r_p = g * &z + &s - hv;
        let mu = s.dot(&lambda) / mf;
        let rp_norm = r_p.amax();
        if r_d.amax() <= 1e-10 * scale_d && rp_norm <= 1e-10 * scale_p && mu <= 1e-12 {
            let mut stats = kkt_stats(h, c, g, hv, &z, &lambda);
            stats.iterations = it - 1;
            if stats.kkt_residual() > KKT_TOL {
                return Err(Error::QpNoConvergence {
                    iterations: it - 1,
                    residual: stats.kkt_residual(),
                });
            }
            return Ok(QpSolution { z, lambda, stats });
        }
        if lambda.amax() > 1e12 && rp_norm > 1e-6 * scale_p {
            return Err(Error::QpInfeasible);
        }
        last_rp = rp_norm;

        let w = lambda.component_div(&s);
        let mut kkt = h.clone();
        for i in 0..m {
            let gi = g.row(i);
            kkt += gi.transpose() * gi * w[i];
        }
        let chol = kkt.cholesky().ok_or(Error::QpNoConvergence {
            iterations: it,
            residual: r_d.amax().max(rp_norm),
        })?;
        let solve = |r_c: &DVector<f64>| {
            // dλ = W(G dz + r_p) - S⁻¹ r_c ; ds = -r_p - G dz
            let rhs = -&r_d - &gt * (w.component_mul(&r_p) - r_c.component_div(&s));
            let dz = chol.solve(&rhs);
            let gdz = g * &dz;
            let dl = w.component_mul(&(&gdz + &r_p)) - r_c.component_div(&s);
            let ds = -&r_p - gdz;
            (dz, ds, dl)
        };

        let r_aff = s.component_mul(&lambda);
        let (_, ds_a, dl_a) = solve(&r_aff);
        let alpha_a = max_step(&s, &ds_a).min(max_step(&lambda, &dl_a));
        let mu_aff = (&s + &ds_a * alpha_a).dot(&(&lambda + &dl_a * alpha_a)) / mf;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);
        let r_c = &r_aff + ds_a.component_mul(&dl_a) - DVector::from_element(m, sigma * mu);
        let (dz, ds, dl) = solve(&r_c);
        let alpha = (0.99 * max_step(&s, &ds).min(max_step(&lambda, &dl))).min(1.0);
        z += &dz * alpha;
        s += &ds * alpha;
        lambda += &dl * alpha;
    }
    if last_rp > 1e-6 * scale_p {
        return Err(Error::QpInfeasible);
    }
    let stats = kkt_stats(h, c, g, hv, &z, &lambda);
    Err(Error::QpNoConvergence {
        iterations: QP_MAX_ITERATIONS,
        residual: stats.kkt_residual(),
    })
}
