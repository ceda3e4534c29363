//! Parameter planning from the complexity bounds.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goe::fourth_moment_poly;
use crate::smoothing::{oracle_second_moment_bound, smoothed_gradient_lipschitz};
use crate::symmat::half_vec_dim;

/// Step size rule `h_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    Constant {
        h: f64,
    },
    /// `h_k = c / sqrt(k + 1)`.
    InvSqrt {
        c: f64,
    },
}

impl StepSchedule {
    pub fn step(&self, k: u64) -> f64 {
        match *self {
            StepSchedule::Constant { h } => h,
            StepSchedule::InvSqrt { c } => c / ((k + 1) as f64).sqrt(),
        }
    }

    fn validate(&self) -> Result<()> {
        let v = match *self {
            StepSchedule::Constant { h } => h,
            StepSchedule::InvSqrt { c } => c,
        };
        positive("step parameter", v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Convex bound; constant step.
    Corollary1,
    /// Non-convex gradient-mapping bound; constant step.
    Corollary2,
    Manual,
}

/// Constants a bound-driven plan was computed from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanInputs {
    pub l0: f64,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub r_bar: f64,
    pub n: usize,
}

/// Algorithm parameters for one ZO-RMS run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub mu: f64,
    pub schedule: StepSchedule,
    /// Iterations executed; the run visits `k = 0..=iterations`.
    pub iterations: u64,
    /// Bound-derived iteration count (before rounding to an integer it may
    /// exceed any practical budget).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theoretical_iterations: Option<f64>,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inputs: Option<PlanInputs>,
    /// Oracle variance constant `σ²` for the non-convex guarantee.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_sq: Option<f64>,
    /// `C(μ)` from the non-convex bound.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_mu: Option<f64>,
    /// Lipschitz constant of `∇f_μ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grad_lipschitz: Option<f64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(format!(
            "{name} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

fn saturating_count(n: f64) -> u64 {
    if n >= u64::MAX as f64 {
        u64::MAX
    } else {
        n as u64
    }
}

fn nn(n: usize) -> f64 {
    let n = n as f64;
    n * n + n
}

/// Real-valued convex iteration bound `L0² r̄² / ε² · (n⁴+2n³+5n²+4n)`.
pub fn convex_iteration_bound(l0: f64, epsilon: f64, r_bar: f64, n: usize) -> Result<f64> {
    for (name, v) in [("L0", l0), ("epsilon", epsilon), ("r_bar", r_bar)] {
        positive(name, v)?;
    }
    if n == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    Ok(l0 * l0 * r_bar * r_bar / (epsilon * epsilon) * fourth_moment_poly(n))
}

/// Iteration bound for random search on the half-vectorized problem,
/// `4 L0² r̄² / ε² · (n(n+1)/2 + 4)²`.
pub fn baseline_bound_vectorized(l0: f64, epsilon: f64, r_bar: f64, n: usize) -> Result<f64> {
    for (name, v) in [("L0", l0), ("epsilon", epsilon), ("r_bar", r_bar)] {
        positive(name, v)?;
    }
    if n == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let m = half_vec_dim(n) as f64 + 4.0;
    Ok(4.0 * l0 * l0 * r_bar * r_bar / (epsilon * epsilon) * m * m)
}

/// `N_baseline / N_ours`; independent of `L0`, `ε`, `r̄`.
pub fn bound_ratio(n: usize) -> Result<f64> {
    Ok(baseline_bound_vectorized(1.0, 1.0, 1.0, n)? / convex_iteration_bound(1.0, 1.0, 1.0, n)?)
}

fn convex_step(l0: f64, r_bar: f64, n: usize, iterations: u64) -> f64 {
    2.0 * r_bar / (l0 * fourth_moment_poly(n).sqrt() * (iterations as f64 + 1.0).sqrt())
}

fn nonconvex_step(l0: f64, epsilon: f64, r_bar: f64, n: usize, iterations: u64) -> f64 {
    (8.0 * epsilon * r_bar
        / ((iterations as f64 + 1.0) * l0.powi(3) * nn(n) * fourth_moment_poly(n)))
    .sqrt()
}

/// Parameters guaranteeing `E f(X̂_N) - f* <= ε` for convex, `L0`-Lipschitz
/// costs with `‖X_0 - X*‖_F <= r̄`.
pub fn plan_convex(l0: f64, epsilon: f64, r_bar: f64, n: usize) -> Result<Plan> {
    let bound = convex_iteration_bound(l0, epsilon, r_bar, n)?;
    let theoretical = bound.ceil();
    let iterations = saturating_count(theoretical);
    Ok(Plan {
        mu: epsilon / (l0 * (2.0 * nn(n)).sqrt()),
        schedule: StepSchedule::Constant {
            h: convex_step(l0, r_bar, n, iterations),
        },
        iterations,
        theoretical_iterations: Some(theoretical),
        provenance: Provenance::Corollary1,
        inputs: Some(PlanInputs {
            l0,
            epsilon,
            delta: None,
            r_bar,
            n,
        }),
        sigma_sq: None,
        c_mu: None,
        grad_lipschitz: None,
    })
}

/// Parameters bounding the best expected squared gradient mapping by
/// `δ + σ²` for non-convex, `L0`-Lipschitz costs.
pub fn plan_nonconvex(
    l0: f64,
    epsilon: f64,
    delta: f64,
    r_bar: f64,
    n: usize,
    iterations_override: Option<u64>,
) -> Result<Plan> {
    for (name, v) in [
        ("L0", l0),
        ("epsilon", epsilon),
        ("delta", delta),
        ("r_bar", r_bar),
    ] {
        positive(name, v)?;
    }
    if n == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let poly = fourth_moment_poly(n);
    let mu = epsilon / (l0 * (nn(n) / 2.0).sqrt());
    let theoretical = (l0.powi(5) * r_bar * nn(n) * poly / (2.0 * epsilon * delta * delta)).ceil();
    let iterations = iterations_override.unwrap_or_else(|| saturating_count(theoretical));
    Ok(Plan {
        mu,
        schedule: StepSchedule::Constant {
            h: nonconvex_step(l0, epsilon, r_bar, n, iterations),
        },
        iterations,
        theoretical_iterations: Some(theoretical),
        provenance: Provenance::Corollary2,
        inputs: Some(PlanInputs {
            l0,
            epsilon,
            delta: Some(delta),
            r_bar,
            n,
        }),
        sigma_sq: Some(oracle_second_moment_bound(l0, n)),
        c_mu: Some(c_mu(l0, mu, n)),
        grad_lipschitz: Some(smoothed_gradient_lipschitz(l0, mu, n)?),
    })
}

/// `C(μ) = L0³ / (4μ) · sqrt((n²+n)/2) · (n⁴+2n³+5n²+4n)`.
pub fn c_mu(l0: f64, mu: f64, n: usize) -> f64 {
    l0.powi(3) / (4.0 * mu) * (nn(n) / 2.0).sqrt() * fourth_moment_poly(n)
}

impl Plan {
    /// Hand-picked parameters.
    pub fn manual(mu: f64, schedule: StepSchedule, iterations: u64) -> Result<Plan> {
        positive("mu", mu)?;
        schedule.validate()?;
        Ok(Plan {
            mu,
            schedule,
            iterations,
            theoretical_iterations: None,
            provenance: Provenance::Manual,
            inputs: None,
            sigma_sq: None,
            c_mu: None,
            grad_lipschitz: None,
        })
    }

    /// Overrides the executed iteration count. Bound-derived constant steps
    /// are recomputed for the new horizon, since they depend on `N + 1`.
    pub fn with_iterations(mut self, iterations: u64) -> Plan {
        self.iterations = iterations;
        if let (Some(inp), StepSchedule::Constant { .. }) = (self.inputs, self.schedule) {
            let h = match self.provenance {
                Provenance::Corollary1 => convex_step(inp.l0, inp.r_bar, inp.n, iterations),
                Provenance::Corollary2 => {
                    nonconvex_step(inp.l0, inp.epsilon, inp.r_bar, inp.n, iterations)
                }
                Provenance::Manual => return self,
            };
            self.schedule = StepSchedule::Constant { h };
        }
        self
    }

    /// Replaces the step rule, keeping `μ` and `N`.
    pub fn with_schedule(mut self, schedule: StepSchedule) -> Result<Plan> {
        schedule.validate()?;
        self.schedule = schedule;
        Ok(self)
    }

    pub fn with_sigma_sq(mut self, sigma_sq: f64) -> Result<Plan> {
        positive("sigma^2", sigma_sq)?;
        self.sigma_sq = Some(sigma_sq);
        Ok(self)
    }

    /// Whether the step rule is the one the originating bound assumes.
    pub fn schedule_covered_by_bound(&self) -> bool {
        matches!(
            self.provenance,
            Provenance::Corollary1 | Provenance::Corollary2
        ) && matches!(self.schedule, StepSchedule::Constant { .. })
    }

    pub fn validate(&self) -> Result<()> {
        positive("mu", self.mu)?;
        self.schedule.validate()
    }
}
