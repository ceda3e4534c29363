//! Condensed linear MPC over the input sequence.
//!
//! Cost `J = x_Hᵀ P x_H + Σ_{i<H} (x_iᵀ Q x_i + u_iᵀ R u_i)` subject to
//! `S_x x_i + S_u u_i <= b_i` for `i < H` and `S_H x_H <= b_H`. With the
//! integrator enabled, the state is `(x, e)` with `e⁺ = e - Cx`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use super::plant::{matrix_from_rows, matrix_to_rows, LtiPlant};
use super::qp::{solve_qp_factored, QpStats};
use crate::error::{Error, Result};
use crate::symmat::{eig_sym, SymMat};

/// Terminal, stage-state and stage-input weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcWeights {
    pub p: SymMat<f64>,
    pub q: SymMat<f64>,
    pub r: SymMat<f64>,
}

pub(crate) fn sym_to_dmatrix(m: &SymMat<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.n(), m.n(), |i, j| m.get(i, j))
}

pub(crate) fn dmatrix_to_sym(m: &DMatrix<f64>) -> Result<SymMat<f64>> {
    let rows: Vec<Vec<f64>> = matrix_to_rows(m);
    SymMat::from_dense(&rows, 1e-9 * (1.0 + m.amax()))
}

impl MpcWeights {
    /// Stage-state weight built from separate state and integrator blocks,
    /// `Q = diag(Q̄, Q̄_e)`.
    pub fn with_integrator_blocks(
        p: SymMat<f64>,
        q_state: &SymMat<f64>,
        q_int: &SymMat<f64>,
        r: SymMat<f64>,
    ) -> Self {
        let (ns, ni) = (q_state.n(), q_int.n());
        let mut q = SymMat::zeros(ns + ni);
        for i in 0..ns {
            for j in 0..=i {
                q.set(i, j, q_state.get(i, j));
            }
        }
        for i in 0..ni {
            for j in 0..=i {
                q.set(ns + i, ns + j, q_int.get(i, j));
            }
        }
        MpcWeights { p, q, r }
    }

    /// Names the first weight block that breaks `P, Q ⪰ 0`, `R ≻ 0`.
    pub fn offending_block(&self) -> Option<&'static str> {
        let min_eig = |m: &SymMat<f64>| eig_sym(m).map(|e| e.values[0]).unwrap_or(f64::NAN);
        let r = min_eig(&self.r);
        if !(r > 0.0) {
            return Some("R");
        }
        let tol = |m: &SymMat<f64>| -1e-10 * (1.0 + m.frob_norm());
        let q = min_eig(&self.q);
        if !(q >= tol(&self.q)) {
            return Some("Q");
        }
        let p = min_eig(&self.p);
        if !(p >= tol(&self.p)) {
            return Some("P");
        }
        None
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StageBound {
    /// Same right-hand side at every stage.
    Shared(Vec<f64>),
    /// One right-hand side per stage `i = 0..H-1`.
    PerStage(Vec<Vec<f64>>),
}

/// Polyhedral stage and terminal constraints. Matrices are dense row lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraints {
    #[serde(rename = "S_x")]
    pub s_x: Vec<Vec<f64>>,
    #[serde(rename = "S_u")]
    pub s_u: Vec<Vec<f64>>,
    pub b: StageBound,
    #[serde(rename = "S_H", default)]
    pub s_h: Vec<Vec<f64>>,
    #[serde(rename = "b_H", default)]
    pub b_h: Vec<f64>,
}

impl Constraints {
    /// `lo <= u_i <= hi` elementwise at every stage.
    pub fn input_box(nz: usize, lo: &[f64], hi: &[f64]) -> Constraints {
        let nu = lo.len();
        let mut s_u = Vec::with_capacity(2 * nu);
        let mut b = Vec::with_capacity(2 * nu);
        for i in 0..nu {
            let mut row = vec![0.0; nu];
            row[i] = 1.0;
            s_u.push(row.clone());
            b.push(hi[i]);
            row[i] = -1.0;
            s_u.push(row);
            b.push(-lo[i]);
        }
        Constraints {
            s_x: vec![vec![0.0; nz]; 2 * nu],
            s_u,
            b: StageBound::Shared(b),
            s_h: Vec::new(),
            b_h: Vec::new(),
        }
    }

    fn stage_rows(&self) -> usize {
        self.s_x.len()
    }

    fn stage_bound(&self, i: usize) -> Result<DVector<f64>> {
        let v = match &self.b {
            StageBound::Shared(v) => v,
            StageBound::PerStage(vs) => vs
                .get(i)
                .ok_or_else(|| Error::invalid(format!("no constraint bound for stage {i}")))?,
        };
        if v.len() != self.stage_rows() {
            return Err(Error::invalid("stage bound length differs from S_x rows"));
        }
        Ok(DVector::from_column_slice(v))
    }
}

/// One MPC design: prediction model, horizon, weights and constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MpcProblem {
    /// Prediction model, without integrator states.
    pub plant: LtiPlant,
    pub horizon: usize,
    pub weights: MpcWeights,
    #[serde(default)]
    pub constraints: Option<Constraints>,
    pub integrator_augmented: bool,
}

impl MpcProblem {
    /// The model the controller predicts with (augmented if `integrator`).
    pub fn prediction_model(&self) -> Result<LtiPlant> {
        if self.integrator_augmented {
            self.plant.augment()
        } else {
            Ok(self.plant.clone())
        }
    }

    /// Dimension of the controller state.
    pub fn nz(&self) -> usize {
        self.plant.nx()
            + if self.integrator_augmented {
                self.plant.ny()
            } else {
                0
            }
    }

    pub fn compile(&self) -> Result<MpcController> {
        MpcController::new(self)
    }
}

/// Condensed QP data for a fixed [`MpcProblem`]. For state `z`, the QP is
/// `min ½uᵀHu + (Fz)ᵀu  s.t.  Gu <= w - Ez`.
#[derive(Clone, Debug)]
pub struct MpcController {
    nz: usize,
    nu: usize,
    horizon: usize,
    hess: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    f_mat: DMatrix<f64>,
    g: DMatrix<f64>,
    w: DVector<f64>,
    e_mat: DMatrix<f64>,
}

impl MpcController {
    pub fn new(prob: &MpcProblem) -> Result<Self> {
        if prob.horizon == 0 {
            return Err(Error::invalid("MPC horizon must be at least 1"));
        }
        let model = prob.prediction_model()?;
        let (nz, nu, hz) = (model.nx(), model.nu(), prob.horizon);
        let w = &prob.weights;
        if w.p.n() != nz || w.q.n() != nz || w.r.n() != nu {
            return Err(Error::invalid(format!(
                "weights must be P,Q: {nz}x{nz}, R: {nu}x{nu}; got P {}, Q {}, R {}",
                w.p.n(),
                w.q.n(),
                w.r.n()
            )));
        }
        let p = sym_to_dmatrix(&w.p);
        let q = sym_to_dmatrix(&w.q);
        let r = sym_to_dmatrix(&w.r);
        let nv = hz * nu;

        // x_i = Φ_i z + Γ_i u for i = 0..=H
        let mut phi = Vec::with_capacity(hz + 1);
        let mut gamma = Vec::with_capacity(hz + 1);
        phi.push(DMatrix::identity(nz, nz));
        gamma.push(DMatrix::zeros(nz, nv));
        for i in 1..=hz {
            let next_phi = &model.a * &phi[i - 1];
            let mut next_gamma = &model.a * &gamma[i - 1];
            let mut v = next_gamma.view_mut((0, (i - 1) * nu), (nz, nu));
            v += &model.b;
            phi.push(next_phi);
            gamma.push(next_gamma);
        }

        let mut hess = DMatrix::zeros(nv, nv);
        let mut f_mat = DMatrix::zeros(nv, nz);
        for i in 1..=hz {
            let weight = if i == hz { &p } else { &q };
            let gw = gamma[i].transpose() * weight;
            hess += &gw * &gamma[i];
            f_mat += &gw * &phi[i];
        }
        for i in 0..hz {
            let mut v = hess.view_mut((i * nu, i * nu), (nu, nu));
            v += &r;
        }
        hess *= 2.0;
        f_mat *= 2.0;
        hess = (&hess + hess.transpose()) * 0.5;
        let chol = hess
            .clone()
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite {
                block: w.offending_block().unwrap_or("H"),
            })?;

        let (g, w_vec, e_mat) = match &prob.constraints {
            None => (
                DMatrix::zeros(0, nv),
                DVector::zeros(0),
                DMatrix::zeros(0, nz),
            ),
            Some(c) => Self::stack_constraints(c, &phi, &gamma, nz, nu, hz)?,
        };
        Ok(MpcController {
            nz,
            nu,
            horizon: hz,
            hess,
            chol,
            f_mat,
            g,
            w: w_vec,
            e_mat,
        })
    }

    fn stack_constraints(
        c: &Constraints,
        phi: &[DMatrix<f64>],
        gamma: &[DMatrix<f64>],
        nz: usize,
        nu: usize,
        hz: usize,
    ) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
        let nv = hz * nu;
        let rows = c.stage_rows();
        let s_x = matrix_from_rows("S_x", &c.s_x, nz)?;
        let s_u = matrix_from_rows("S_u", &c.s_u, nu)?;
        let s_h = matrix_from_rows("S_H", &c.s_h, nz)?;
        if s_x.ncols() != nz || s_u.ncols() != nu || s_u.nrows() != rows {
            return Err(Error::invalid(format!(
                "stage constraints must be S_x: r x {nz}, S_u: r x {nu} with matching rows"
            )));
        }
        if s_h.ncols() != nz || s_h.nrows() != c.b_h.len() {
            return Err(Error::invalid(format!(
                "terminal constraints must be S_H: r x {nz} with b_H of length r"
            )));
        }
        let total = hz * rows + s_h.nrows();
        let mut g = DMatrix::zeros(total, nv);
        let mut w = DVector::zeros(total);
        let mut e = DMatrix::zeros(total, nz);
        for i in 0..hz {
            let r0 = i * rows;
            let mut gi = &s_x * &gamma[i];
            let mut v = gi.view_mut((0, i * nu), (rows, nu));
            v += &s_u;
            g.view_mut((r0, 0), (rows, nv)).copy_from(&gi);
            w.rows_mut(r0, rows).copy_from(&c.stage_bound(i)?);
            e.view_mut((r0, 0), (rows, nz)).copy_from(&(&s_x * &phi[i]));
        }
        let r0 = hz * rows;
        let nh = s_h.nrows();
        g.view_mut((r0, 0), (nh, nv))
            .copy_from(&(&s_h * &gamma[hz]));
        w.rows_mut(r0, nh)
            .copy_from(&DVector::from_column_slice(&c.b_h));
        e.view_mut((r0, 0), (nh, nz)).copy_from(&(&s_h * &phi[hz]));
        Ok((g, w, e))
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn nu(&self) -> usize {
        self.nu
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Optimal input sequence `(u_0, …, u_{H-1})` stacked, with solver stats.
    pub fn solve_sequence(&self, z: &DVector<f64>) -> Result<(DVector<f64>, QpStats)> {
        if z.len() != self.nz {
            return Err(Error::DimensionMismatch {
                expected: self.nz,
                found: z.len(),
            });
        }
        let c = &self.f_mat * z;
        let rhs = &self.w - &self.e_mat * z;
        // Rows with no decision-variable dependence are pure feasibility checks.
        let keep: Vec<usize> = (0..self.g.nrows())
            .filter(|&i| self.g.row(i).amax() > 0.0)
            .collect();
        for i in 0..self.g.nrows() {
            if !keep.contains(&i) && rhs[i] < -1e-9 * (1.0 + self.w[i].abs()) {
                return Err(Error::QpInfeasible);
            }
        }
        let g = self.g.select_rows(&keep);
        let hv = rhs.select_rows(&keep);
        let sol = solve_qp_factored(&self.hess, &self.chol, &c, &g, &hv)?;
        Ok((sol.z, sol.stats))
    }

    /// First control move.
    pub fn solve_step(&self, z: &DVector<f64>) -> Result<(DVector<f64>, QpStats)> {
        let (u, stats) = self.solve_sequence(z)?;
        Ok((u.rows(0, self.nu).into_owned(), stats))
    }
}

/// Solves the MPC problem at `state` and returns the first control move.
pub fn solve_mpc_step(prob: &MpcProblem, state: &DVector<f64>) -> Result<(DVector<f64>, QpStats)> {
    prob.compile()?.solve_step(state)
}
