//! Cyclic Jacobi eigensolver for small dense symmetric matrices.

use super::SymMat;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sweep cap for the cyclic Jacobi iteration.
pub const MAX_SWEEPS: usize = 100;

/// `a = V diag(values) Vᵀ` with `values` ascending.
#[derive(Clone, Debug)]
pub struct EigenDecomposition<T> {
    pub values: Vec<T>,
    /// Row-major `n × n`; column `k` is the eigenvector of `values[k]`.
    pub vectors: Vec<T>,
    pub sweeps: usize,
}

impl<T: Real> EigenDecomposition<T> {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<T> {
        let n = self.n();
        (0..n).map(|i| self.vectors[i * n + k]).collect()
    }

    /// Assembles `V diag(f(λ)) Vᵀ`.
    pub fn reconstruct_with(&self, f: impl Fn(T) -> T) -> SymMat<T> {
        let n = self.n();
        let lam: Vec<T> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = SymMat::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let mut acc = T::zero();
                for k in 0..n {
                    acc = acc + self.vectors[i * n + k] * lam[k] * self.vectors[j * n + k];
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn reconstruct(&self) -> SymMat<T> {
        self.reconstruct_with(|l| l)
    }
}

fn off_diagonal_norm<T: Real>(a: &[T], n: usize) -> T {
    let mut acc = T::zero();
    for i in 0..n {
        for j in 0..i {
            acc = acc + a[i * n + j] * a[i * n + j];
        }
    }
    (acc + acc).sqrt()
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Iterates until the off-diagonal Frobenius mass is below
/// `T::eig_tolerance() * ‖a‖_F`, at most [`MAX_SWEEPS`] sweeps.
pub fn eig_sym<T: Real>(a: &SymMat<T>) -> Result<EigenDecomposition<T>> {
    if !a.is_finite() {
        return Err(Error::NonFinite("eigensolver input"));
    }
    let n = a.n();
    let mut m: Vec<T> = a.to_dense().into_iter().flatten().collect();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }
    let scale = a.frob_norm();
    let tol = T::eig_tolerance() * scale;

    let mut sweeps = 0;
    loop {
        let off = off_diagonal_norm(&m, n);
        if off <= tol || scale == T::zero() {
            break;
        }
        if sweeps == MAX_SWEEPS {
            return Err(Error::EigenNoConvergence {
                sweeps,
                residual: off.as_f64(),
            });
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let app = m[p * n + p];
                let aqq = m[q * n + q];
                let theta = (aqq - app) / (apq + apq);
                let t = {
                    let denom = theta.abs() + (theta * theta + T::one()).sqrt();
                    let t = T::one() / denom;
                    if theta < T::zero() {
                        -t
                    } else {
                        t
                    }
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[k * n + p];
                    let mkq = m[k * n + q];
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p * n + k];
                    let mqk = m[q * n + k];
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = T::zero();
                m[q * n + p] = T::zero();
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[i * n + i]
            .partial_cmp(&m[j * n + j])
            .expect("finite eigenvalues")
    });
    let values = order.iter().map(|&k| m[k * n + k]).collect();
    let mut vectors = vec![T::zero(); n * n];
    for (dst, &src) in order.iter().enumerate() {
        for i in 0..n {
            vectors[i * n + dst] = v[i * n + src];
        }
    }
    Ok(EigenDecomposition {
        values,
        vectors,
        sweeps,
    })
}
