use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Iteration cap for the Riccati recursion.
pub const DARE_MAX_ITERATIONS: usize = 100_000;

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Frobenius norm without intermediate overflow.
fn frob(m: &DMatrix<f64>) -> f64 {
    let s = m.amax();
    if s == 0.0 || !s.is_finite() {
        return s;
    }
    s * (m / s).norm()
}

/// One Riccati map `AᵀPA - AᵀPB(R + BᵀPB)⁻¹BᵀPA + Q`.
pub fn riccati_map(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let pa = p * a;
    let pb = p * b;
    let s = r + b.transpose() * &pb;
    let chol = s
        .cholesky()
        .ok_or(Error::NotPositiveDefinite { block: "R" })?;
    let k = chol.solve(&(pb.transpose() * a));
    Ok(symmetrize(
        &(a.transpose() * &pa - a.transpose() * &pb * k + q),
    ))
}

/// `‖P - riccati_map(P)‖_F`.
pub fn dare_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> Result<f64> {
    Ok(frob(&(p - riccati_map(a, b, q, r, p)?)))
}

/// Stabilizing solution of the discrete algebraic Riccati equation by
/// fixed-point iteration from `P₀ = Q`. Converges when `(A, B)` is
/// stabilizable; the returned `P` has residual `<= 1e-8 (1 + ‖P‖_F)`.
pub fn solve_dare(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n
        || b.nrows() != n
        || q.shape() != (n, n)
        || r.shape() != (b.ncols(), b.ncols())
    {
        return Err(Error::invalid("inconsistent DARE dimensions"));
    }
    let mut p = symmetrize(q);
    let mut residual = f64::INFINITY;
    for _ in 0..DARE_MAX_ITERATIONS {
        let next = riccati_map(a, b, q, r, &p)?;
        residual = frob(&(&next - &p));
        p = next;
        if !residual.is_finite() {
            break;
        }
        if residual <= 1e-12 * (1.0 + frob(&p)) {
            return Ok(p);
        }
    }
    if residual.is_finite() && residual <= 1e-8 * (1.0 + frob(&p)) {
        return Ok(p);
    }
    Err(Error::DareNoConvergence {
        iterations: DARE_MAX_ITERATIONS,
        residual,
    })
}
