//! Gaussian orthogonal ensemble sampling and its norm moments.
//!
//! A draw `U` has independent entries with `U_ii ~ N(0, 1)` and
//! `U_ij ~ N(0, 1/2)` for `i > j`. Its squared Frobenius norm is then a sum
//! of `n(n+1)/2` unit-variance terms, which is what makes the closed-form
//! moments in [`moment_exact`] work.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::stats::MeanAccumulator;
use crate::symmat::{half_vec_dim, BlockMat, SymMat};

/// Number of independent streams used by parallel Monte-Carlo loops.
pub(crate) const MC_STREAMS: u64 = 16;

/// Pass threshold, in standard errors, for every statistical check.
pub const SE_THRESHOLD: f64 = 4.0;

/// Deterministic GOE sampler. Identical `(seed, stream)` pairs yield identical
/// draw sequences.
#[derive(Clone, Debug)]
pub struct GoeSampler {
    n: usize,
    seed: u64,
    counter: u64,
    rng: ChaCha8Rng,
}

impl GoeSampler {
    pub fn new(n: usize, seed: u64) -> Self {
        Self::with_stream(n, seed, 0)
    }

    /// Sampler on an independent sub-stream of `seed`.
    pub fn with_stream(n: usize, seed: u64, stream: u64) -> Self {
        assert!(n >= 1, "GOE dimension must be positive");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        GoeSampler {
            n,
            seed,
            counter: 0,
            rng,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Draws taken so far.
    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn sample<T: Real>(&mut self) -> SymMat<T> {
        self.sample_dim(self.n)
    }

    /// Draws from the ensemble of a different dimension, sharing this
    /// sampler's stream. Used for block-diagonal directions.
    pub fn sample_dim<T: Real>(&mut self, n: usize) -> SymMat<T> {
        let off_scale = std::f64::consts::FRAC_1_SQRT_2;
        let mut data = Vec::with_capacity(half_vec_dim(n));
        for i in 0..n {
            for j in 0..=i {
                let z: f64 = self.rng.sample(StandardNormal);
                data.push(T::lit(if i == j { z } else { z * off_scale }));
            }
        }
        self.counter += 1;
        SymMat::from_lower(n, data).expect("finite normal draws")
    }

    /// One independent draw per block; blocks with `active[i] == false` get
    /// the zero matrix and consume no randomness.
    pub fn sample_blocks<T: Real>(&mut self, dims: &[usize], active: &[bool]) -> BlockMat<T> {
        let blocks = dims
            .iter()
            .zip(active)
            .map(|(&n, &on)| {
                if on {
                    self.sample_dim(n)
                } else {
                    SymMat::zeros(n)
                }
            })
            .collect();
        BlockMat::new(blocks)
    }
}

/// `E‖U‖_F^p` for `p ∈ {2, 4}`; for `p = 1` returns the upper bound
/// `sqrt((n²+n)/2)`.
pub fn moment_exact(n: usize, p: u32) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let nf = n as f64;
    let m2 = (nf * nf + nf) / 2.0;
    match p {
        1 => Ok(m2.sqrt()),
        2 => Ok(m2),
        4 => Ok(fourth_moment_poly(n) / 4.0),
        _ => Err(Error::invalid(format!(
            "unsupported moment order {p}; expected 1, 2 or 4"
        ))),
    }
}

/// `n⁴ + 2n³ + 5n² + 4n`, the polynomial shared by the fourth moment, the
/// oracle second-moment bound, and the iteration bounds.
pub fn fourth_moment_poly(n: usize) -> f64 {
    let n = n as f64;
    n.powi(4) + 2.0 * n.powi(3) + 5.0 * n * n + 4.0 * n
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentReport {
    pub n: usize,
    pub samples: u64,
    pub seed: u64,
    pub m1_hat: f64,
    pub m1_se: f64,
    /// Upper bound only; `m1_hat` is checked one-sided against it.
    pub m1_bound: f64,
    pub m2_hat: f64,
    pub m2_se: f64,
    pub m2_exact: f64,
    pub m4_hat: f64,
    pub m4_se: f64,
    pub m4_exact: f64,
    pub m1_pass: bool,
    pub m2_pass: bool,
    pub m4_pass: bool,
    pub pass: bool,
}

/// Monte-Carlo check of the GOE norm moments against their closed forms.
pub fn verify_moments(n: usize, samples: u64, seed: u64) -> Result<MomentReport> {
    if samples < 1000 {
        return Err(Error::invalid(
            "moment verification needs at least 1000 samples",
        ));
    }
    if n == 0 {
        return Err(Error::invalid("dimension must be at least 1"));
    }
    let per_stream: Vec<[MeanAccumulator; 3]> = (0..MC_STREAMS)
        .into_par_iter()
        .map(|stream| {
            let count = samples / MC_STREAMS + u64::from(stream < samples % MC_STREAMS);
            let mut sampler = GoeSampler::with_stream(n, seed, stream);
            let mut acc = [MeanAccumulator::default(); 3];
            for _ in 0..count {
                let sq = sampler.sample::<f64>().frob_norm_sq();
                acc[0].push(sq.sqrt());
                acc[1].push(sq);
                acc[2].push(sq * sq);
            }
            acc
        })
        .collect();
    let mut acc = [MeanAccumulator::default(); 3];
    for s in &per_stream {
        for (a, b) in acc.iter_mut().zip(s) {
            a.merge(b);
        }
    }
    let [m1, m2, m4] = acc.map(|a| a.estimate());
    let m1_bound = moment_exact(n, 1)?;
    let m2_exact = moment_exact(n, 2)?;
    let m4_exact = moment_exact(n, 4)?;
    let m1_pass = m1.at_most(m1_bound, SE_THRESHOLD);
    let m2_pass = m2.within(m2_exact, SE_THRESHOLD);
    let m4_pass = m4.within(m4_exact, SE_THRESHOLD);
    Ok(MomentReport {
        n,
        samples,
        seed,
        m1_hat: m1.mean,
        m1_se: m1.std_err,
        m1_bound,
        m2_hat: m2.mean,
        m2_se: m2.std_err,
        m2_exact,
        m4_hat: m4.mean,
        m4_se: m4.std_err,
        m4_exact,
        m1_pass,
        m2_pass,
        m4_pass,
        pass: m1_pass && m2_pass && m4_pass,
    })
}
