use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) fn matrix_from_rows(
    name: &str,
    rows: &[Vec<f64>],
    cols_if_empty: usize,
) -> Result<DMatrix<f64>> {
    if rows.is_empty() {
        return Ok(DMatrix::zeros(0, cols_if_empty));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(Error::invalid(format!("matrix {name} has ragged rows")));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("plant matrix"));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Discrete-time LTI system `x⁺ = Ax + Bu`, `y = Cx + Du`, in deviation
/// coordinates around optional steady-state offsets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlantRepr", into = "PlantRepr")]
pub struct LtiPlant {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub x_bar: Option<DVector<f64>>,
    pub u_bar: Option<DVector<f64>>,
    pub y_bar: Option<DVector<f64>>,
    /// Set once integrator states have been appended.
    pub augmented: bool,
}

#[derive(Serialize, Deserialize)]
struct PlantRepr {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    d: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    x_bar: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    u_bar: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y_bar: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    augmented: bool,
}

impl TryFrom<PlantRepr> for LtiPlant {
    type Error = Error;

    fn try_from(r: PlantRepr) -> Result<Self> {
        let a = matrix_from_rows("A", &r.a, 0)?;
        let b = matrix_from_rows("B", &r.b, 0)?;
        let c = matrix_from_rows("C", &r.c, a.ncols())?;
        let d = match r.d {
            Some(d) => matrix_from_rows("D", &d, b.ncols())?,
            None => DMatrix::zeros(c.nrows(), b.ncols()),
        };
        let mut plant = LtiPlant::new(a, b, c, d)?;
        plant.x_bar = r.x_bar.map(DVector::from_vec);
        plant.u_bar = r.u_bar.map(DVector::from_vec);
        plant.y_bar = r.y_bar.map(DVector::from_vec);
        plant.augmented = r.augmented;
        plant.validate()?;
        Ok(plant)
    }
}

impl From<LtiPlant> for PlantRepr {
    fn from(p: LtiPlant) -> Self {
        PlantRepr {
            a: matrix_to_rows(&p.a),
            b: matrix_to_rows(&p.b),
            c: matrix_to_rows(&p.c),
            d: Some(matrix_to_rows(&p.d)),
            x_bar: p.x_bar.map(|v| v.iter().copied().collect()),
            u_bar: p.u_bar.map(|v| v.iter().copied().collect()),
            y_bar: p.y_bar.map(|v| v.iter().copied().collect()),
            augmented: p.augmented,
        }
    }
}

impl LtiPlant {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, c: DMatrix<f64>, d: DMatrix<f64>) -> Result<Self> {
        let p = LtiPlant {
            a,
            b,
            c,
            d,
            x_bar: None,
            u_bar: None,
            y_bar: None,
            augmented: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b.ncols()
    }

    pub fn ny(&self) -> usize {
        self.c.nrows()
    }

    pub fn validate(&self) -> Result<()> {
        let nx = self.a.nrows();
        let mismatch = |what: &str, expected: usize, found: usize| -> Result<()> {
            if expected != found {
                return Err(Error::invalid(format!(
                    "{what}: expected {expected}, found {found}"
                )));
            }
            Ok(())
        };
        if nx == 0 {
            return Err(Error::invalid("plant needs at least one state"));
        }
        mismatch("A columns", nx, self.a.ncols())?;
        mismatch("B rows", nx, self.b.nrows())?;
        mismatch("C columns", nx, self.c.ncols())?;
        mismatch("D rows", self.c.nrows(), self.d.nrows())?;
        mismatch("D columns", self.b.ncols(), self.d.ncols())?;
        if self.nu() == 0 || self.ny() == 0 {
            return Err(Error::invalid(
                "plant needs at least one input and one output",
            ));
        }
        if let Some(v) = &self.x_bar {
            mismatch("x_bar length", nx, v.len())?;
        }
        if let Some(v) = &self.u_bar {
            mismatch("u_bar length", self.nu(), v.len())?;
        }
        if let Some(v) = &self.y_bar {
            mismatch("y_bar length", self.ny(), v.len())?;
        }
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        if !(finite(&self.a) && finite(&self.b) && finite(&self.c) && finite(&self.d)) {
            return Err(Error::NonFinite("plant matrices"));
        }
        Ok(())
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u
    }

    pub fn output(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.c * x + &self.d * u
    }

    /// Appends integrator states `e⁺ = e - Cx`:
    /// `A_aug = [[A, 0], [-C, I]]`, `B_aug = [[B], [0]]`, `C_aug = [C, 0]`.
    pub fn augment(&self) -> Result<LtiPlant> {
        if self.augmented {
            return Err(Error::invalid("plant is already integrator-augmented"));
        }
        let (nx, nu, ny) = (self.nx(), self.nu(), self.ny());
        let mut a = DMatrix::zeros(nx + ny, nx + ny);
        a.view_mut((0, 0), (nx, nx)).copy_from(&self.a);
        a.view_mut((nx, 0), (ny, nx)).copy_from(&(-&self.c));
        a.view_mut((nx, nx), (ny, ny)).fill_with_identity();
        let mut b = DMatrix::zeros(nx + ny, nu);
        b.view_mut((0, 0), (nx, nu)).copy_from(&self.b);
        let mut c = DMatrix::zeros(ny, nx + ny);
        c.view_mut((0, 0), (ny, nx)).copy_from(&self.c);
        Ok(LtiPlant {
            a,
            b,
            c,
            d: self.d.clone(),
            x_bar: None,
            u_bar: self.u_bar.clone(),
            y_bar: self.y_bar.clone(),
            augmented: true,
        })
    }

    /// Discretized double integrator with sample time 0.1:
    /// `A = [[1, 0.1], [0, 1]]`, `B = [[0.005], [0.1]]`, `C = [1, 0]`.
    pub fn double_integrator() -> LtiPlant {
        serde_json::from_str(include_str!("../../fixtures/double_integrator.json"))
            .expect("bundled fixture is valid")
    }

    /// 4-state, 3-input, 2-output stable plant from [`random_stable_plant`]
    /// with seed [`FOUR_STATE_SEED`].
    pub fn four_state() -> LtiPlant {
        serde_json::from_str(include_str!("../../fixtures/four_state.json"))
            .expect("bundled fixture is valid")
    }

    pub fn from_json(s: &str) -> Result<LtiPlant> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Seed of the bundled 4-state fixture.
pub const FOUR_STATE_SEED: u64 = 2021;

/// Random plant with Gaussian `B`, `C`, zero `D`, and `A` scaled to
/// spectral norm `radius` (so spectral radius at most `radius`).
pub fn random_stable_plant(
    nx: usize,
    nu: usize,
    ny: usize,
    radius: f64,
    seed: u64,
) -> Result<LtiPlant> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gauss =
        |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.sample::<f64, _>(StandardNormal));
    let a = gauss(nx, nx);
    let b = gauss(nx, nu);
    let c = gauss(ny, nx);
    let norm = a.clone().svd(false, false).singular_values.max();
    let a = a * (radius / norm);
    LtiPlant::new(a, b, c, DMatrix::zeros(ny, nu))
}
