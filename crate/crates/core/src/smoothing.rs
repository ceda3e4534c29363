//! Zeroth-order random oracle and Monte-Carlo views of the Gaussian
//! smoothing `f_μ(X) = E_U f(X + μU)`.
//!
//! The optimizer only ever calls [`oracle`]. The `*_estimate` functions are
//! verification tools; they spend many cost evaluations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::goe::{fourth_moment_poly, GoeSampler};
use crate::projections::BlockSpec;
use crate::scalar::Real;
use crate::stats::{Estimate, MeanAccumulator};
use crate::symmat::{BlockMat, SymMat};

type EvalFn<'a, T> = Box<dyn FnMut(&BlockMat<T>) -> T + 'a>;

/// A black-box cost over block-diagonal symmetric matrices that counts its
/// own evaluations.
pub struct BlackBoxCost<'a, T> {
    spec: BlockSpec,
    eval: EvalFn<'a, T>,
    eval_count: u64,
    lipschitz_l0: Option<f64>,
}

impl<T> fmt::Debug for BlackBoxCost<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BlackBoxCost")
            .field("spec", &self.spec)
            .field("eval_count", &self.eval_count)
            .field("lipschitz_l0", &self.lipschitz_l0)
            .finish_non_exhaustive()
    }
}

impl<'a, T: Real> BlackBoxCost<'a, T> {
    pub fn new(spec: BlockSpec, eval: impl FnMut(&BlockMat<T>) -> T + 'a) -> Self {
        BlackBoxCost {
            spec,
            eval: Box::new(eval),
            eval_count: 0,
            lipschitz_l0: None,
        }
    }

    /// Attaches a known Lipschitz constant (cost units per Frobenius unit).
    pub fn with_lipschitz(mut self, l0: f64) -> Self {
        self.lipschitz_l0 = Some(l0);
        self
    }

    pub fn spec(&self) -> &BlockSpec {
        &self.spec
    }

    pub fn eval_count(&self) -> u64 {
        self.eval_count
    }

    pub fn lipschitz_l0(&self) -> Option<f64> {
        self.lipschitz_l0
    }

    /// One cost evaluation. Non-finite values are passed through.
    pub fn evaluate(&mut self, x: &BlockMat<T>) -> Result<T> {
        self.spec.check_conforms(x)?;
        self.eval_count += 1;
        Ok((self.eval)(x))
    }

    /// One cost evaluation; a non-finite value is an error carrying `x`.
    pub fn evaluate_finite(&mut self, x: &BlockMat<T>) -> Result<T> {
        let v = self.evaluate(x)?;
        if !v.is_finite() {
            return Err(Error::NonFiniteCost {
                value: v.as_f64(),
                input: x.flatten().into_iter().map(Real::as_f64).collect(),
            });
        }
        Ok(v)
    }
}

/// One evaluation of `O_μ(X, U) = (f(X + μU) - f(X)) / μ · U`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct OracleEval<T> {
    pub direction: BlockMat<T>,
    pub f_base: T,
    pub f_perturbed: T,
    pub mu: T,
    pub estimate: BlockMat<T>,
}

impl<T: Real> OracleEval<T> {
    /// The scalar `(f_perturbed - f_base) / μ` multiplying the direction.
    pub fn slope(&self) -> T {
        (self.f_perturbed - self.f_base) / self.mu
    }
}

/// Zeroth-order random oracle. Consumes exactly two cost evaluations.
pub fn oracle<T: Real>(
    f: &mut BlackBoxCost<'_, T>,
    x: &BlockMat<T>,
    u: &BlockMat<T>,
    mu: T,
) -> Result<OracleEval<T>> {
    if !(mu > T::zero()) {
        return Err(Error::invalid(format!(
            "smoothing radius must be positive, got {mu}"
        )));
    }
    f.spec().check_conforms(u)?;
    let f_base = f.evaluate_finite(x)?;
    let f_perturbed = f.evaluate_finite(&x.axpy(mu, u)?)?;
    let slope = (f_perturbed - f_base) / mu;
    Ok(OracleEval {
        direction: u.clone(),
        f_base,
        f_perturbed,
        mu,
        estimate: u.scale(slope),
    })
}

fn check_mc(mu: f64, samples: u64) -> Result<()> {
    if !(mu > 0.0) {
        return Err(Error::invalid(format!(
            "smoothing radius must be positive, got {mu}"
        )));
    }
    if samples < 1000 {
        return Err(Error::invalid(
            "Monte-Carlo estimates need at least 1000 samples",
        ));
    }
    Ok(())
}

fn direction_sampler(
    f: &BlackBoxCost<'_, impl Real>,
    seed: u64,
) -> (GoeSampler, Vec<usize>, Vec<bool>) {
    let spec = f.spec();
    (GoeSampler::new(1, seed), spec.dims(), spec.active_mask())
}

/// Monte-Carlo estimate of `f_μ(x)`.
pub fn f_mu_estimate<T: Real>(
    f: &mut BlackBoxCost<'_, T>,
    x: &BlockMat<T>,
    mu: T,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    check_mc(mu.as_f64(), samples)?;
    let (mut sampler, dims, active) = direction_sampler(f, seed);
    let mut acc = MeanAccumulator::default();
    for _ in 0..samples {
        let u = sampler.sample_blocks::<T>(&dims, &active);
        acc.push(f.evaluate_finite(&x.axpy(mu, &u)?)?.as_f64());
    }
    Ok(acc.estimate())
}

/// Entrywise mean and standard error of a stream of oracle estimates.
#[derive(Clone, Debug)]
pub struct GradientEstimate {
    pub mean: BlockMat<f64>,
    pub std_err: BlockMat<f64>,
    pub samples: u64,
}

impl GradientEstimate {
    /// Largest `|mean - target| / std_err` over all packed entries.
    pub fn max_z_score(&self, target: &BlockMat<f64>) -> Result<f64> {
        let diff = self.mean.sub(target)?.flatten();
        Ok(diff
            .iter()
            .zip(self.std_err.flatten())
            .map(|(d, se)| {
                if se > 0.0 {
                    d.abs() / se
                } else if *d == 0.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            })
            .fold(0.0, f64::max))
    }
}

/// Monte-Carlo average of oracle estimates, an unbiased estimate of `∇f_μ(x)`.
pub fn grad_fmu_estimate<T: Real>(
    f: &mut BlackBoxCost<'_, T>,
    x: &BlockMat<T>,
    mu: T,
    samples: u64,
    seed: u64,
) -> Result<GradientEstimate> {
    check_mc(mu.as_f64(), samples)?;
    let (mut sampler, dims, active) = direction_sampler(f, seed);
    let mut acc: Vec<MeanAccumulator> = vec![MeanAccumulator::default(); x.flatten().len()];
    for _ in 0..samples {
        let u = sampler.sample_blocks::<T>(&dims, &active);
        let o = oracle(f, x, &u, mu)?;
        for (a, v) in acc.iter_mut().zip(o.estimate.flatten()) {
            a.push(v.as_f64());
        }
    }
    let rebuild = |pick: &dyn Fn(&MeanAccumulator) -> f64| -> BlockMat<f64> {
        let mut it = acc.iter();
        BlockMat::new(
            dims.iter()
                .map(|&n| {
                    let vals = it.by_ref().take(n * (n + 1) / 2).map(pick).collect();
                    SymMat::from_lower(n, vals).expect("finite estimates")
                })
                .collect(),
        )
    };
    Ok(GradientEstimate {
        mean: rebuild(&|a| a.mean()),
        std_err: rebuild(&|a| a.std_err()),
        samples,
    })
}

/// Monte-Carlo estimate of `E‖O_μ(x, U)‖_F²`.
pub fn oracle_second_moment_estimate<T: Real>(
    f: &mut BlackBoxCost<'_, T>,
    x: &BlockMat<T>,
    mu: T,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    check_mc(mu.as_f64(), samples)?;
    let (mut sampler, dims, active) = direction_sampler(f, seed);
    let mut acc = MeanAccumulator::default();
    for _ in 0..samples {
        let u = sampler.sample_blocks::<T>(&dims, &active);
        acc.push(oracle(f, x, &u, mu)?.estimate.frob_norm_sq().as_f64());
    }
    Ok(acc.estimate())
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::invalid(format!(
            "{name} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

/// Bound on `|f_μ(X) - f(X)|`: `μ L0 sqrt((n²+n)/2)`.
pub fn smoothing_gap_bound(l0: f64, mu: f64, n: usize) -> f64 {
    let nf = n as f64;
    mu * l0 * ((nf * nf + nf) / 2.0).sqrt()
}

/// Bound on `E‖O_μ‖_F²`: `L0² (n⁴+2n³+5n²+4n) / 4`. Also the default
/// oracle-variance constant `σ²`.
pub fn oracle_second_moment_bound(l0: f64, n: usize) -> f64 {
    0.25 * l0 * l0 * fourth_moment_poly(n)
}

/// Lipschitz constant of `∇f_μ`: `(2 L0 / μ) sqrt((n²+n)/2)`.
pub fn smoothed_gradient_lipschitz(l0: f64, mu: f64, n: usize) -> Result<f64> {
    check_positive("L0", l0)?;
    check_positive("mu", mu)?;
    let nf = n as f64;
    Ok(2.0 * l0 / mu * ((nf * nf + nf) / 2.0).sqrt())
}
