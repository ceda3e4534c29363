//! Packed symmetric matrices and block-diagonal composites.
//!
//! Only the lower triangle is stored (row-major: row `i` holds columns
//! `0..=i`), so a [`SymMat`] is symmetric by construction. All geometry is
//! Frobenius: `<A, B> = tr(AᵀB) = Σ aᵢᵢbᵢᵢ + 2 Σ_{i>j} aᵢⱼbᵢⱼ`.

mod eigen;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use eigen::{eig_sym, EigenDecomposition, MAX_SWEEPS};

/// Length of the half-vectorization of an `n × n` symmetric matrix.
pub const fn half_vec_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

#[inline]
fn packed_index(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

/// Real symmetric `n × n` matrix in packed lower-triangular storage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymMatRepr<T>", into = "SymMatRepr<T>")]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct SymMat<T> {
    n: usize,
    data: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct SymMatRepr<T> {
    n: usize,
    lower: Vec<T>,
}

impl<T: Real> TryFrom<SymMatRepr<T>> for SymMat<T> {
    type Error = Error;

    fn try_from(r: SymMatRepr<T>) -> Result<Self> {
        SymMat::from_lower(r.n, r.lower)
    }
}

impl<T: Real> From<SymMat<T>> for SymMatRepr<T> {
    fn from(m: SymMat<T>) -> Self {
        SymMatRepr {
            n: m.n,
            lower: m.data,
        }
    }
}

impl<T: Real> SymMat<T> {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 1, "symmetric matrix dimension must be positive");
        SymMat {
            n,
            data: vec![T::zero(); half_vec_dim(n)],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_diag(&vec![T::one(); n])
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m.set(i, i, d);
        }
        m
    }

    /// Builds from the packed row-major lower triangle.
    pub fn from_lower(n: usize, lower: Vec<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if lower.len() != half_vec_dim(n) {
            return Err(Error::DimensionMismatch {
                expected: half_vec_dim(n),
                found: lower.len(),
            });
        }
        if lower.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("symmetric matrix entries"));
        }
        Ok(SymMat { n, data: lower })
    }

    /// Builds from a dense square matrix, which must be symmetric to `tol`.
    /// The stored entries are the averages `(aᵢⱼ + aⱼᵢ)/2`.
    pub fn from_dense(rows: &[Vec<T>], tol: T) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
        }
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let (a, b) = (rows[i][j], rows[j][i]);
                if !a.is_finite() || !b.is_finite() {
                    return Err(Error::NonFinite("dense matrix entries"));
                }
                if (a - b).abs() > tol {
                    return Err(Error::invalid(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
                m.set(i, j, (a + b) / T::lit(2.0));
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Packed lower triangle, row-major.
    #[inline]
    pub fn lower(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[packed_index(i, j)]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[packed_index(i, j)] = v;
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> T {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }

    pub fn frob_inner(&self, other: &Self) -> Result<T> {
        self.check_dim(other)?;
        Ok(self.frob_inner_unchecked(other))
    }

    pub(crate) fn frob_inner_unchecked(&self, other: &Self) -> T {
        let two = T::lit(2.0);
        let mut acc = T::zero();
        let mut k = 0;
        for i in 0..self.n {
            for j in 0..=i {
                let p = self.data[k] * other.data[k];
                acc = acc + if i == j { p } else { two * p };
                k += 1;
            }
        }
        acc
    }

    pub fn frob_norm_sq(&self) -> T {
        self.frob_inner_unchecked(self)
    }

    pub fn frob_norm(&self) -> T {
        self.frob_norm_sq().sqrt()
    }

    pub fn scale(&self, alpha: T) -> Self {
        SymMat {
            n: self.n,
            data: self.data.iter().map(|&v| v * alpha).collect(),
        }
    }

    /// `self + alpha * other`.
    pub fn axpy(&self, alpha: T, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(SymMat {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + alpha * b)
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.axpy(T::one(), other)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-T::one(), other)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        SymMat {
            n: self.n,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Simultaneous row/column permutation: `out[i][j] = self[perm[i]][perm[j]]`.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: perm.len(),
            });
        }
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..=i {
                out.set(i, j, self.get(perm[i], perm[j]));
            }
        }
        Ok(out)
    }

    /// Converts the scalar type.
    pub fn cast<U: Real>(&self) -> SymMat<U> {
        SymMat {
            n: self.n,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }
}

/// Block-diagonal matrix `diag(blocks)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct BlockMat<T> {
    pub blocks: Vec<SymMat<T>>,
}

impl<T: Real> BlockMat<T> {
    pub fn new(blocks: Vec<SymMat<T>>) -> Self {
        BlockMat { blocks }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        BlockMat {
            blocks: dims.iter().map(|&n| SymMat::zeros(n)).collect(),
        }
    }

    pub fn zeros_like(&self) -> Self {
        BlockMat {
            blocks: self.blocks.iter().map(|b| SymMat::zeros(b.n())).collect(),
        }
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(SymMat::n).collect()
    }

    /// Total dimension of the assembled square matrix.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(SymMat::n).sum()
    }

    fn check_shape(&self, other: &Self) -> Result<()> {
        if self.blocks.len() != other.blocks.len() {
            return Err(Error::DimensionMismatch {
                expected: self.blocks.len(),
                found: other.blocks.len(),
            });
        }
        for (a, b) in self.blocks.iter().zip(&other.blocks) {
            a.check_dim(b)?;
        }
        Ok(())
    }

    pub fn frob_inner(&self, other: &Self) -> Result<T> {
        self.check_shape(other)?;
        Ok(self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.frob_inner_unchecked(b))
            .sum())
    }

    pub fn frob_norm_sq(&self) -> T {
        self.blocks.iter().map(SymMat::frob_norm_sq).sum()
    }

    pub fn frob_norm(&self) -> T {
        self.frob_norm_sq().sqrt()
    }

    pub fn scale(&self, alpha: T) -> Self {
        BlockMat {
            blocks: self.blocks.iter().map(|b| b.scale(alpha)).collect(),
        }
    }

    pub fn axpy(&self, alpha: T, other: &Self) -> Result<Self> {
        self.check_shape(other)?;
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.axpy(alpha, b))
            .collect::<Result<_>>()?;
        Ok(BlockMat { blocks })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-T::one(), other)
    }

    pub fn is_finite(&self) -> bool {
        self.blocks.iter().all(SymMat::is_finite)
    }

    /// All packed entries concatenated block by block.
    pub fn flatten(&self) -> Vec<T> {
        self.blocks
            .iter()
            .flat_map(|b| b.lower().iter().copied())
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.dim();
        let mut out = vec![vec![T::zero(); n]; n];
        let mut off = 0;
        for b in &self.blocks {
            for i in 0..b.n() {
                for j in 0..b.n() {
                    out[off + i][off + j] = b.get(i, j);
                }
            }
            off += b.n();
        }
        out
    }

    pub fn cast<U: Real>(&self) -> BlockMat<U> {
        BlockMat {
            blocks: self.blocks.iter().map(SymMat::cast).collect(),
        }
    }
}

impl<T: Real> From<SymMat<T>> for BlockMat<T> {
    fn from(m: SymMat<T>) -> Self {
        BlockMat { blocks: vec![m] }
    }
}

/// Frobenius inner product `tr(aᵀb)`.
pub fn frob_inner<T: Real>(a: &SymMat<T>, b: &SymMat<T>) -> Result<T> {
    a.frob_inner(b)
}
