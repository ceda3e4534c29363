//! Synthetic costs with known structure, used by the verifiers, the bench
//! harness, and tests.

use crate::error::Result;
use crate::goe::GoeSampler;
use crate::projections::{BlockSpec, ConeKind};
use crate::scalar::Real;
use crate::smoothing::BlackBoxCost;
use crate::symmat::{BlockMat, SymMat};

/// `B·B / n` for a GOE draw `B`; positive semidefinite with `O(1)` spectrum.
pub fn random_psd<T: Real>(n: usize, seed: u64) -> SymMat<T> {
    let b = GoeSampler::with_stream(n, seed, 7).sample::<T>();
    let inv_n = T::one() / T::lit(n as f64);
    let mut out = SymMat::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let v = (0..n).map(|k| b.get(i, k) * b.get(k, j)).sum::<T>() * inv_n;
            out.set(i, j, v);
        }
    }
    out
}

/// Random symmetric matrix with GOE entries scaled by `scale`.
pub fn random_sym<T: Real>(n: usize, scale: T, seed: u64) -> SymMat<T> {
    GoeSampler::with_stream(n, seed, 3)
        .sample::<T>()
        .scale(scale)
}

/// `f(X) = ‖X - A‖_F`; convex with `L0 = 1`, minimum 0 at `A`.
pub fn distance_cost<T: Real>(target: BlockMat<T>, spec: BlockSpec) -> BlackBoxCost<'static, T> {
    BlackBoxCost::new(spec, move |x: &BlockMat<T>| {
        x.sub(&target)
            .map(|d| d.frob_norm())
            .unwrap_or_else(|_| T::nan())
    })
    .with_lipschitz(1.0)
}

/// `f(X) = ‖X - A‖_F + amp · sin(<B, X>_F)`; non-convex with
/// `L0 = 1 + amp ‖B‖_F`.
pub fn wavy_distance_cost<T: Real>(
    target: BlockMat<T>,
    wave: BlockMat<T>,
    amp: T,
    spec: BlockSpec,
) -> BlackBoxCost<'static, T> {
    let l0 = 1.0 + amp.as_f64().abs() * wave.frob_norm().as_f64();
    BlackBoxCost::new(spec, move |x: &BlockMat<T>| {
        let d = x
            .sub(&target)
            .map(|d| d.frob_norm())
            .unwrap_or_else(|_| T::nan());
        let s = wave.frob_inner(x).unwrap_or_else(|_| T::nan());
        d + amp * s.sin()
    })
    .with_lipschitz(l0)
}

/// `f(X) = <G, X>_F`; `L0 = ‖G‖_F`.
pub fn linear_cost<T: Real>(g: BlockMat<T>, spec: BlockSpec) -> BlackBoxCost<'static, T> {
    let l0 = g.frob_norm().as_f64();
    BlackBoxCost::new(spec, move |x: &BlockMat<T>| {
        g.frob_inner(x).unwrap_or_else(|_| T::nan())
    })
    .with_lipschitz(l0)
}

/// `f(X) = ‖X‖_F`; `L0 = 1`.
pub fn norm_cost<T: Real>(spec: BlockSpec) -> BlackBoxCost<'static, T> {
    BlackBoxCost::new(spec, |x: &BlockMat<T>| x.frob_norm()).with_lipschitz(1.0)
}

/// The PSD-distance test problem: minimize `‖X - A‖_F` over one PSD block
/// from `X_0 = 0`, with `A` a random PSD target.
#[derive(Clone, Debug)]
pub struct PsdDistanceProblem {
    pub spec: BlockSpec,
    pub target: BlockMat<f64>,
    pub x0: BlockMat<f64>,
}

impl PsdDistanceProblem {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        Ok(PsdDistanceProblem {
            spec: BlockSpec::single(n, ConeKind::Psd)?,
            target: BlockMat::from(random_psd(n, seed)),
            x0: BlockMat::zeros(&[n]),
        })
    }

    /// `‖X_0 - X*‖_F`.
    pub fn r_bar(&self) -> f64 {
        self.target.frob_norm()
    }

    pub fn n(&self) -> usize {
        self.spec.total_dim()
    }

    pub fn cost(&self) -> BlackBoxCost<'static, f64> {
        distance_cost(self.target.clone(), self.spec.clone())
    }
}

/// [`PsdDistanceProblem`] plus a `0.1 · sin(<B, X>_F)` ripple.
#[derive(Clone, Debug)]
pub struct WavyPsdProblem {
    pub base: PsdDistanceProblem,
    pub wave: BlockMat<f64>,
    pub amplitude: f64,
}

impl WavyPsdProblem {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        Ok(WavyPsdProblem {
            base: PsdDistanceProblem::new(n, seed)?,
            wave: BlockMat::from(random_sym(n, 1.0, seed ^ 0x5eed)),
            amplitude: 0.1,
        })
    }

    pub fn lipschitz(&self) -> f64 {
        1.0 + self.amplitude * self.wave.frob_norm()
    }

    pub fn cost(&self) -> BlackBoxCost<'static, f64> {
        wavy_distance_cost(
            self.base.target.clone(),
            self.wave.clone(),
            self.amplitude,
            self.base.spec.clone(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmat::eig_sym;

    #[test]
    fn random_psd_is_psd_and_reproducible() {
        let a = random_psd::<f64>(4, 3);
        assert!(eig_sym(&a).unwrap().values[0] >= -1e-12);
        assert_eq!(a, random_psd::<f64>(4, 3));
    }

    #[test]
    fn costs_at_known_points() {
        let p = PsdDistanceProblem::new(3, 1).unwrap();
        let mut f = p.cost();
        assert_eq!(f.evaluate(&p.target).unwrap(), 0.0);
        assert!((f.evaluate(&p.x0).unwrap() - p.r_bar()).abs() < 1e-15);
        let w = WavyPsdProblem::new(3, 1).unwrap();
        assert!(w.lipschitz() > 1.0);
        let v = w.cost().evaluate(&w.base.target).unwrap();
        assert!(v.abs() <= 0.1);
    }
}
