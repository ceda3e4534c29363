//! Euclidean projection onto block-diagonal products of symmetric cones, and
//! the projected-step gradient mapping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::symmat::{eig_sym, BlockMat, SymMat};

/// Default eigenvalue floor for positive-definite blocks.
pub const DEFAULT_PD_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConeKind {
    /// All of Sⁿ; projection is the identity.
    Sym,
    /// Positive semidefinite cone.
    Psd,
    /// `{X : λ_min(X) >= d}` with `d > 0`.
    PdFloor(f64),
    /// Held constant; projection is the identity and search directions are zero.
    Fixed,
}

impl ConeKind {
    pub fn is_fixed(&self) -> bool {
        matches!(self, ConeKind::Fixed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BlockRepr", into = "BlockRepr")]
pub struct Block {
    pub dim: usize,
    pub cone: ConeKind,
}

#[derive(Serialize, Deserialize)]
struct BlockRepr {
    dim: usize,
    cone: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    d: Option<f64>,
}

impl TryFrom<BlockRepr> for Block {
    type Error = Error;

    fn try_from(r: BlockRepr) -> Result<Self> {
        let cone = match (r.cone.as_str(), r.d) {
            ("SYM", None) => ConeKind::Sym,
            ("PSD", None) => ConeKind::Psd,
            ("FIXED", None) => ConeKind::Fixed,
            ("PD_FLOOR", Some(d)) => ConeKind::PdFloor(d),
            ("PD_FLOOR", None) => ConeKind::PdFloor(DEFAULT_PD_FLOOR),
            (other, Some(_)) if other != "PD_FLOOR" => {
                return Err(Error::invalid(format!("cone {other} takes no floor `d`")))
            }
            (other, _) => return Err(Error::invalid(format!("unknown cone kind {other}"))),
        };
        Block::new(r.dim, cone)
    }
}

impl From<Block> for BlockRepr {
    fn from(b: Block) -> Self {
        let (cone, d) = match b.cone {
            ConeKind::Sym => ("SYM", None),
            ConeKind::Psd => ("PSD", None),
            ConeKind::PdFloor(d) => ("PD_FLOOR", Some(d)),
            ConeKind::Fixed => ("FIXED", None),
        };
        BlockRepr {
            dim: b.dim,
            cone: cone.to_string(),
            d,
        }
    }
}

impl Block {
    pub fn new(dim: usize, cone: ConeKind) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("block dimension must be at least 1"));
        }
        if let ConeKind::PdFloor(d) = cone {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::invalid(format!(
                    "PD floor must be positive, got {d}"
                )));
            }
        }
        Ok(Block { dim, cone })
    }
}

/// The feasible set as an ordered product of cones, one per diagonal block.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub blocks: Vec<Block>,
}

impl BlockSpec {
    pub fn new(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::invalid("block spec needs at least one block"));
        }
        Ok(BlockSpec { blocks })
    }

    /// Single-block spec.
    pub fn single(dim: usize, cone: ConeKind) -> Result<Self> {
        Self::new(vec![Block::new(dim, cone)?])
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    /// `true` for blocks that move during the search.
    pub fn active_mask(&self) -> Vec<bool> {
        self.blocks.iter().map(|b| !b.cone.is_fixed()).collect()
    }

    pub fn check_conforms<T: Real>(&self, x: &BlockMat<T>) -> Result<()> {
        if x.blocks.len() != self.blocks.len() {
            return Err(Error::NonConforming(format!(
                "expected {} blocks, found {}",
                self.blocks.len(),
                x.blocks.len()
            )));
        }
        for (i, (b, m)) in self.blocks.iter().zip(&x.blocks).enumerate() {
            if b.dim != m.n() {
                return Err(Error::NonConforming(format!(
                    "block {i} has dimension {}, spec says {}",
                    m.n(),
                    b.dim
                )));
            }
        }
        Ok(())
    }

    /// `‖x - π(x)‖_F`.
    pub fn distance<T: Real>(&self, x: &BlockMat<T>) -> Result<T> {
        Ok(project_feasible(x, self)?.sub(x)?.frob_norm())
    }
}

/// Nearest positive semidefinite matrix: negative eigenvalues clamped to zero.
pub fn project_psd<T: Real>(a: &SymMat<T>) -> Result<SymMat<T>> {
    let e = eig_sym(a)?;
    if e.values[0] >= T::zero() {
        return Ok(a.clone());
    }
    Ok(e.reconstruct_with(|l| l.max(T::zero())))
}

/// Nearest matrix with every eigenvalue at least `d`.
pub fn project_pd_floor<T: Real>(a: &SymMat<T>, d: T) -> Result<SymMat<T>> {
    if !(d > T::zero()) {
        return Err(Error::invalid(format!(
            "PD floor must be positive, got {d}"
        )));
    }
    let e = eig_sym(a)?;
    if e.values[0] >= d {
        return Ok(a.clone());
    }
    Ok(e.reconstruct_with(|l| l.max(d)))
}

fn project_block<T: Real>(m: &SymMat<T>, cone: ConeKind) -> Result<SymMat<T>> {
    match cone {
        ConeKind::Sym | ConeKind::Fixed => Ok(m.clone()),
        ConeKind::Psd => project_psd(m),
        ConeKind::PdFloor(d) => project_pd_floor(m, T::lit(d)),
    }
}

/// Blockwise projection onto the feasible set.
pub fn project_feasible<T: Real>(x: &BlockMat<T>, spec: &BlockSpec) -> Result<BlockMat<T>> {
    spec.check_conforms(x)?;
    let blocks = x
        .blocks
        .iter()
        .zip(&spec.blocks)
        .map(|(m, b)| project_block(m, b.cone))
        .collect::<Result<_>>()?;
    Ok(BlockMat::new(blocks))
}

/// `(x - π(x - h g)) / h`.
pub fn gradient_mapping<T: Real>(
    x: &BlockMat<T>,
    g: &BlockMat<T>,
    h: T,
    spec: &BlockSpec,
) -> Result<BlockMat<T>> {
    if !(h > T::zero()) {
        return Err(Error::invalid(format!(
            "step size must be positive, got {h}"
        )));
    }
    let stepped = project_feasible(&x.axpy(-h, g)?, spec)?;
    Ok(x.sub(&stepped)?.scale(T::one() / h))
}
