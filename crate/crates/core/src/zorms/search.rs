use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projections::project_feasible;
use crate::scalar::Real;
use crate::smoothing::BlackBoxCost;
use crate::symmat::{BlockMat, SymMat};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct SearchResult<T> {
    pub best: BlockMat<T>,
    pub best_cost: f64,
    pub evals: u64,
}

/// Uniform random search with a fixed evaluation budget.
///
/// The first evaluation is `x0`; every later candidate perturbs each packed
/// entry of the non-fixed blocks of `x0` uniformly in `[-radius, radius]`
/// and is projected onto the feasible set before evaluation.
pub fn random_search<T: Real>(
    f: &mut BlackBoxCost<'_, T>,
    x0: &BlockMat<T>,
    radius: f64,
    budget: u64,
    seed: u64,
) -> Result<SearchResult<T>> {
    if budget == 0 {
        return Err(Error::invalid("evaluation budget must be positive"));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::invalid(format!(
            "search radius must be positive, got {radius}"
        )));
    }
    let spec = f.spec().clone();
    let active = spec.active_mask();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let before = f.eval_count();
    let mut best = x0.clone();
    let mut best_cost = f.evaluate_finite(x0)?.as_f64();
    for _ in 1..budget {
        let blocks = x0
            .blocks
            .iter()
            .zip(&active)
            .map(|(b, &on)| {
                if !on {
                    return b.clone();
                }
                let data = b
                    .lower()
                    .iter()
                    .map(|&v| v + T::lit(rng.random_range(-radius..=radius)))
                    .collect();
                SymMat::from_lower(b.n(), data).expect("finite perturbation")
            })
            .collect();
        let candidate = project_feasible(&BlockMat::new(blocks), &spec)?;
        let c = f.evaluate_finite(&candidate)?.as_f64();
        if c < best_cost {
            best_cost = c;
            best = candidate;
        }
    }
    Ok(SearchResult {
        best,
        best_cost,
        evals: f.eval_count() - before,
    })
}
