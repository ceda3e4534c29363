//! Closed-loop experiments and the normalized tracking cost.

use std::io::Write;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::controller::{MpcController, MpcProblem};
use super::plant::LtiPlant;
use crate::error::{Error, Result};

const MIN_SCALE: f64 = 1e-9;

/// Reference experiment: `y_ref` holds `M` samples of the `n_y` outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackingTask {
    pub y_ref: Vec<Vec<f64>>,
    /// Per-channel normalization; defaults to each channel's reference range.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scales: Option<Vec<f64>>,
    /// Initial plant state (deviation coordinates); zero if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    /// Standard deviation of additive output measurement noise.
    #[serde(default)]
    pub noise_std: f64,
}

impl TrackingTask {
    /// Step of `amplitude` on every channel after `delay` samples.
    pub fn step(ny: usize, m: usize, delay: usize, amplitude: f64) -> TrackingTask {
        let y_ref = (0..m)
            .map(|k| vec![if k >= delay { amplitude } else { 0.0 }; ny])
            .collect();
        TrackingTask {
            y_ref,
            scales: None,
            x0: None,
            noise_std: 0.0,
        }
    }

    pub fn from_json(s: &str) -> Result<TrackingTask> {
        let task: TrackingTask = serde_json::from_str(s)?;
        task.validate()?;
        Ok(task)
    }

    pub fn len(&self) -> usize {
        self.y_ref.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y_ref.is_empty()
    }

    pub fn ny(&self) -> usize {
        self.y_ref.first().map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        if self.y_ref.is_empty() {
            return Err(Error::invalid(
                "tracking task needs at least one reference sample",
            ));
        }
        let ny = self.ny();
        if ny == 0 || self.y_ref.iter().any(|r| r.len() != ny) {
            return Err(Error::invalid(
                "reference rows must share a nonzero channel count",
            ));
        }
        if self.y_ref.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("reference"));
        }
        if let Some(s) = &self.scales {
            if s.len() != ny {
                return Err(Error::DimensionMismatch {
                    expected: ny,
                    found: s.len(),
                });
            }
            if s.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::invalid(
                    "normalization scales must be positive and finite",
                ));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid("noise_std must be finite and non-negative"));
        }
        Ok(())
    }

    /// Effective per-channel scales.
    pub fn resolved_scales(&self) -> Vec<f64> {
        if let Some(s) = &self.scales {
            return s.clone();
        }
        (0..self.ny())
            .map(|j| {
                let (lo, hi) = self
                    .y_ref
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                        (lo.min(r[j]), hi.max(r[j]))
                    });
                (hi - lo).max(MIN_SCALE)
            })
            .collect()
    }
}

/// Recorded closed loop. Row `k` of `y`, `u`, `x`, `y_ref` is sample `k`;
/// `x` has one extra row for the final state.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub y: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub x: Vec<Vec<f64>>,
    pub y_ref: Vec<Vec<f64>>,
    /// Set when a QP failed and the run stopped early.
    pub failure: Option<String>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    /// CSV with columns `t, y0.., u0.., ref0..`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let ny = self.y.first().map_or(0, Vec::len);
        let nu = self.u.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((0..ny).map(|j| format!("y{j}")));
        header.extend((0..nu).map(|j| format!("u{j}")));
        header.extend((0..ny).map(|j| format!("ref{j}")));
        writeln!(w, "{}", header.join(","))?;
        for k in 0..self.len() {
            let mut row = vec![k.to_string()];
            row.extend(self.y[k].iter().map(f64::to_string));
            row.extend(self.u[k].iter().map(f64::to_string));
            row.extend(self.y_ref[k].iter().map(f64::to_string));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

fn offset(v: &Option<DVector<f64>>, n: usize) -> DVector<f64> {
    v.clone().unwrap_or_else(|| DVector::zeros(n))
}

/// Runs the controller against `true_plant` for the task's `M` samples.
///
/// Each step solves the MPC at `(x_k, e_k)`, applies `u_0`, records
/// `y_k = Cx_k + Du_k (+ noise)`, and updates `e_{k+1} = e_k + r_k - Cx_k`.
/// Plant offsets, when present, are added to the recorded signals.
pub fn simulate_closed_loop(
    prob: &MpcProblem,
    task: &TrackingTask,
    true_plant: &LtiPlant,
    noise_seed: Option<u64>,
) -> Result<Trajectory> {
    let ctrl = prob.compile()?;
    simulate_with(&ctrl, prob, task, true_plant, noise_seed)
}

/// As [`simulate_closed_loop`] with an already compiled controller.
pub fn simulate_with(
    ctrl: &MpcController,
    prob: &MpcProblem,
    task: &TrackingTask,
    true_plant: &LtiPlant,
    noise_seed: Option<u64>,
) -> Result<Trajectory> {
    task.validate()?;
    let (nx, nu, ny) = (true_plant.nx(), true_plant.nu(), true_plant.ny());
    if prob.plant.nx() != nx || prob.plant.nu() != nu || prob.plant.ny() != ny || task.ny() != ny {
        return Err(Error::invalid(format!(
            "model ({}x{}x{}), plant ({nx}x{nu}x{ny}) and task ({} channels) disagree",
            prob.plant.nx(),
            prob.plant.nu(),
            prob.plant.ny(),
            task.ny()
        )));
    }
    let mut x = match &task.x0 {
        Some(v) if v.len() == nx => DVector::from_column_slice(v),
        Some(v) => {
            return Err(Error::DimensionMismatch {
                expected: nx,
                found: v.len(),
            })
        }
        None => DVector::zeros(nx),
    };
    let mut e = DVector::zeros(ny);
    let y_bar = offset(&true_plant.y_bar, ny);
    let u_bar = offset(&true_plant.u_bar, nu);
    let mut noise = match (task.noise_std > 0.0, noise_seed) {
        (true, Some(seed)) => Some((
            ChaCha8Rng::seed_from_u64(seed),
            Normal::new(0.0, task.noise_std).unwrap(),
        )),
        (true, None) => return Err(Error::invalid("noisy task needs a noise seed")),
        _ => None,
    };

    let m = task.len();
    let mut traj = Trajectory {
        y: Vec::with_capacity(m),
        u: Vec::with_capacity(m),
        x: Vec::with_capacity(m + 1),
        y_ref: Vec::with_capacity(m),
        failure: None,
    };
    traj.x.push(x.iter().copied().collect());
    for k in 0..m {
        let z = if prob.integrator_augmented {
            let mut z = DVector::zeros(nx + ny);
            z.rows_mut(0, nx).copy_from(&x);
            z.rows_mut(nx, ny).copy_from(&e);
            z
        } else {
            x.clone()
        };
        let u = match ctrl.solve_step(&z) {
            Ok((u, _)) => u,
            Err(err) => {
                traj.failure = Some(format!("step {k}: {err}"));
                break;
            }
        };
        let mut y_meas = &true_plant.c * &x;
        if let Some((rng, dist)) = noise.as_mut() {
            y_meas.iter_mut().for_each(|v| *v += dist.sample(rng));
        }
        let y = &y_meas + &true_plant.d * &u;
        let r = DVector::from_column_slice(&task.y_ref[k]) - &y_bar;
        e += r - &y_meas;
        x = true_plant.step(&x, &u);
        traj.y.push((y + &y_bar).iter().copied().collect());
        traj.u.push((u + &u_bar).iter().copied().collect());
        traj.x.push(x.iter().copied().collect());
        traj.y_ref.push(task.y_ref[k].clone());
    }
    Ok(traj)
}

/// `(1/√M) · sqrt(Σ_k ‖(y_k - ref_k) ⊘ s‖²)`.
pub fn tracking_cost(traj: &Trajectory, task: &TrackingTask) -> Result<f64> {
    if traj.len() != task.len() {
        return Err(Error::DimensionMismatch {
            expected: task.len(),
            found: traj.len(),
        });
    }
    let scales = task.resolved_scales();
    let mut sum = 0.0;
    for (y, r) in traj.y.iter().zip(&task.y_ref) {
        if y.len() != scales.len() {
            return Err(Error::DimensionMismatch {
                expected: scales.len(),
                found: y.len(),
            });
        }
        sum += y
            .iter()
            .zip(r)
            .zip(&scales)
            .map(|((y, r), s)| ((y - r) / s).powi(2))
            .sum::<f64>();
    }
    Ok((sum / task.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::controller::{Constraints, MpcWeights};
    use crate::symmat::SymMat;

    fn di_problem(r: f64) -> MpcProblem {
        MpcProblem {
            plant: LtiPlant::double_integrator(),
            horizon: 10,
            weights: MpcWeights {
                p: SymMat::from_diag(&[10.0, 1.0, 1.0]),
                q: SymMat::from_diag(&[10.0, 1.0, 1.0]),
                r: SymMat::from_diag(&[r]),
            },
            constraints: Some(Constraints::input_box(3, &[-5.0], &[5.0])),
            integrator_augmented: true,
        }
    }

    fn traj(y: Vec<Vec<f64>>) -> Trajectory {
        let m = y.len();
        Trajectory {
            y,
            u: vec![vec![0.0]; m],
            x: vec![],
            y_ref: vec![],
            failure: None,
        }
    }

    #[test]
    fn zero_reference_stays_at_rest() {
        let task = TrackingTask::step(1, 50, 0, 0.0);
        let t = simulate_closed_loop(
            &di_problem(0.1),
            &task,
            &LtiPlant::double_integrator(),
            None,
        )
        .unwrap();
        assert!(t
            .y
            .iter()
            .chain(&t.u)
            .chain(&t.x)
            .flatten()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn integral_action_removes_offset() {
        let task = TrackingTask::step(1, 300, 5, 1.0);
        let t = simulate_closed_loop(
            &di_problem(0.1),
            &task,
            &LtiPlant::double_integrator(),
            None,
        )
        .unwrap();
        assert!(!t.failed());
        let err = (t.y[299][0] - 1.0).abs();
        assert!(err <= 1e-3, "steady-state error {err}");
    }

    #[test]
    fn model_mismatch_changes_cost() {
        let task = TrackingTask::step(1, 150, 5, 1.0);
        let prob = di_problem(0.1);
        let truth = LtiPlant::double_integrator();
        let mut bent = truth.clone();
        bent.b *= 1.2;
        let c0 = tracking_cost(
            &simulate_closed_loop(&prob, &task, &truth, None).unwrap(),
            &task,
        )
        .unwrap();
        let t1 = simulate_closed_loop(&prob, &task, &bent, None).unwrap();
        let c1 = tracking_cost(&t1, &task).unwrap();
        assert!((t1.y[149][0] - 1.0).abs() < 1e-2);
        assert!(c0 != c1);
    }

    #[test]
    fn noisy_runs_repeat_under_a_seed() {
        let mut task = TrackingTask::step(1, 80, 5, 1.0);
        task.noise_std = 0.01;
        let prob = di_problem(0.1);
        let plant = LtiPlant::double_integrator();
        let a = simulate_closed_loop(&prob, &task, &plant, Some(4)).unwrap();
        let b = simulate_closed_loop(&prob, &task, &plant, Some(4)).unwrap();
        let c = simulate_closed_loop(&prob, &task, &plant, Some(5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(simulate_closed_loop(&prob, &task, &plant, None).is_err());
    }

    #[test]
    fn infeasible_step_truncates() {
        let mut prob = di_problem(0.1);
        let mut cons = Constraints::input_box(3, &[-5.0], &[5.0]);
        cons.s_x.push(vec![1.0, 0.0, 0.0]);
        cons.s_u.push(vec![0.0]);
        if let crate::mpc::StageBound::Shared(b) = &mut cons.b {
            b.push(0.5);
        }
        prob.constraints = Some(cons);
        let mut task = TrackingTask::step(1, 50, 0, 1.0);
        task.x0 = Some(vec![0.0, 1.0]);
        let t = simulate_closed_loop(&prob, &task, &LtiPlant::double_integrator(), None).unwrap();
        assert!(t.failed());
        assert!(t.len() < 50);
        assert!(tracking_cost(&t, &task).is_err());
    }

    #[test]
    fn tracking_cost_examples() {
        let mut task = TrackingTask::step(2, 7, 0, 0.0);
        task.scales = Some(vec![1.0, 1.0]);
        assert_eq!(
            tracking_cost(&traj(vec![vec![0.0, 0.0]; 7]), &task).unwrap(),
            0.0
        );
        let offset = traj(vec![vec![1.0, 0.0]; 7]);
        assert!((tracking_cost(&offset, &task).unwrap() - 1.0).abs() < 1e-15);
        task.scales = Some(vec![2.0, 1.0]);
        assert!((tracking_cost(&offset, &task).unwrap() - 0.5).abs() < 1e-15);
        assert!(tracking_cost(&traj(vec![vec![0.0, 0.0]; 6]), &task).is_err());
    }

    #[test]
    fn default_scales_use_reference_range() {
        let task = TrackingTask::from_json(r#"{"y_ref":[[0,3],[2,3]]}"#).unwrap();
        assert_eq!(task.resolved_scales(), vec![2.0, 1e-9]);
    }

    #[test]
    fn trajectory_csv_columns() {
        let task = TrackingTask::step(1, 3, 1, 1.0);
        let t = simulate_closed_loop(
            &di_problem(0.1),
            &task,
            &LtiPlant::double_integrator(),
            None,
        )
        .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,y0,u0,ref0"));
        assert_eq!(lines.count(), 3);
    }
}
