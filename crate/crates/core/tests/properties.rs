use proptest::prelude::*;
use zorms::mpc::{tracking_cost, TrackingTask, Trajectory};
use zorms::problems::{random_sym, PsdDistanceProblem};
use zorms::projections::project_feasible;
use zorms::smoothing::oracle;
use zorms::symmat::eig_sym;
use zorms::zorms::{plan_convex, random_search, StepSchedule};
use zorms::{
    optimize, BlackBoxCost, Block, BlockMat, BlockSpec, ConeKind, GoeSampler, Plan, SymMat,
};

fn cone() -> impl Strategy<Value = ConeKind> {
    prop_oneof![
        Just(ConeKind::Sym),
        Just(ConeKind::Psd),
        (0.01..2.0f64).prop_map(ConeKind::PdFloor),
        Just(ConeKind::Fixed),
    ]
}

fn spec() -> impl Strategy<Value = BlockSpec> {
    prop::collection::vec((1usize..5, cone()), 1..4).prop_map(|bs| {
        BlockSpec::new(
            bs.into_iter()
                .map(|(d, c)| Block::new(d, c).unwrap())
                .collect(),
        )
        .unwrap()
    })
}

fn point(spec: &BlockSpec, seed: u64, scale: f64) -> BlockMat<f64> {
    BlockMat::new(
        spec.dims()
            .iter()
            .enumerate()
            .map(|(i, &d)| random_sym(d, scale, seed + i as u64))
            .collect(),
    )
}

fn frob_inner(a: &BlockMat<f64>, b: &BlockMat<f64>) -> f64 {
    a.blocks
        .iter()
        .zip(&b.blocks)
        .map(|(x, y)| {
            let (x, y) = (x.to_dense(), y.to_dense());
            x.iter()
                .flatten()
                .zip(y.iter().flatten())
                .map(|(p, q)| p * q)
                .sum::<f64>()
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn projection_lands_in_each_cone(spec in spec(), seed in any::<u32>(), scale in 0.1..5.0f64) {
        let x = point(&spec, seed as u64, scale);
        let p = project_feasible(&x, &spec).unwrap();
        for ((m, orig), b) in p.blocks.iter().zip(&x.blocks).zip(&spec.blocks) {
            let lo = eig_sym(m).unwrap().values[0];
            match b.cone {
                ConeKind::Psd => prop_assert!(lo >= -1e-10),
                ConeKind::PdFloor(d) => prop_assert!(lo >= d - 1e-10),
                ConeKind::Sym | ConeKind::Fixed => prop_assert_eq!(m, orig),
            }
        }
    }

    #[test]
    fn linear_oracle_is_exact_projection_onto_direction(n in 1usize..6, seed in any::<u32>(), mu in 1e-3..10.0f64) {
        let spec = BlockSpec::single(n, ConeKind::Sym).unwrap();
        let g = BlockMat::from(random_sym::<f64>(n, 1.0, seed as u64));
        let g2 = g.clone();
        let mut f = BlackBoxCost::new(spec, move |x: &BlockMat<f64>| frob_inner(x, &g2));
        let x = BlockMat::from(random_sym::<f64>(n, 2.0, seed as u64 + 1));
        let u = BlockMat::from(GoeSampler::new(n, seed as u64 + 2).sample::<f64>());
        let o = oracle(&mut f, &x, &u, mu).unwrap();
        prop_assert_eq!(f.eval_count(), 2);
        let slope = frob_inner(&g, &u);
        let expected = u.scale(slope);
        let err = o.estimate.sub(&expected).unwrap().frob_norm();
        prop_assert!(err <= 1e-8 * (1.0 + expected.frob_norm()) / mu.min(1.0));
    }

    #[test]
    fn optimize_accounting_and_feasibility(n in 1usize..5, seed in any::<u64>(), iters in 0u64..30, c in 0.01..2.0f64) {
        let p = PsdDistanceProblem::new(n, 5).unwrap();
        let plan = Plan::manual(0.05, StepSchedule::InvSqrt { c }, iters).unwrap();
        let mut f = p.cost();
        let rec = optimize(&mut f, &p.x0, &plan, seed).unwrap();
        prop_assert_eq!(f.eval_count(), 2 * (iters + 1));
        prop_assert_eq!(rec.rows.len() as u64, iters + 1);
        prop_assert!(rec.rows.windows(2).all(|w| w[1].best_so_far <= w[0].best_so_far));
        prop_assert!(eig_sym(&rec.best.blocks[0]).unwrap().values[0] >= -1e-10);
        let direct = rec.best.sub(&p.target).unwrap().frob_norm();
        prop_assert!((direct - rec.best_cost).abs() <= 1e-12 * (1.0 + direct));
        let mut g = p.cost();
        prop_assert!(optimize(&mut g, &p.x0, &plan, seed).unwrap().same_run(&rec));
    }

    #[test]
    fn random_search_budget(budget in 1u64..40, seed in any::<u64>()) {
        let p = PsdDistanceProblem::new(3, 2).unwrap();
        let mut f = p.cost();
        let r = random_search(&mut f, &p.x0, 0.5, budget, seed).unwrap();
        prop_assert_eq!(r.evals, budget);
        prop_assert!(r.best_cost <= p.r_bar());
    }

    #[test]
    fn tracking_cost_is_homogeneous(
        resid in prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 2), 1..30),
        alpha in 0.0..10.0f64,
    ) {
        let m = resid.len();
        let task = TrackingTask { y_ref: vec![vec![0.5, -1.0]; m], scales: Some(vec![0.7, 2.0]), x0: None, noise_std: 0.0 };
        let traj = |a: f64| Trajectory {
            y: resid.iter().map(|r| vec![0.5 + a * r[0], -1.0 + a * r[1]]).collect(),
            u: vec![vec![0.0]; m],
            x: vec![],
            y_ref: task.y_ref.clone(),
            failure: None,
        };
        let base = tracking_cost(&traj(1.0), &task).unwrap();
        let scaled = tracking_cost(&traj(alpha), &task).unwrap();
        prop_assert!((scaled - alpha * base).abs() <= 1e-12 * (1.0 + alpha * base));
    }

    #[test]
    fn corollary_step_follows_iteration_override(n in 1usize..6, r_bar in 0.1..10.0f64, k in 1u64..10_000) {
        let plan = plan_convex(1.0, 0.5, r_bar, n).unwrap().with_iterations(k);
        let nf = n as f64;
        let poly = nf.powi(4) + 2.0 * nf.powi(3) + 5.0 * nf * nf + 4.0 * nf;
        let h = 2.0 * r_bar / (poly.sqrt() * ((k + 1) as f64).sqrt());
        match plan.schedule {
            StepSchedule::Constant { h: got } => prop_assert!((got - h).abs() <= 1e-14 * h),
            other => prop_assert!(false, "unexpected schedule {other:?}"),
        }
    }

    #[test]
    fn symmat_json_round_trip(n in 1usize..7, seed in any::<u64>()) {
        let m = random_sym::<f64>(n, 3.0, seed);
        let back: SymMat<f64> = serde_json::from_str(&serde_json::to_string(&m).unwrap()).unwrap();
        prop_assert_eq!(back, m);
    }
}
