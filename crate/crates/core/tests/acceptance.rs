//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use zorms::mpc::{
    demo_plan, make_tuning_cost, random_stable_plant, simulate_closed_loop, solve_dare,
    solve_mpc_step, solve_qp, LtiPlant, MpcProblem, MpcWeights, TrackingTask, TuningOptions,
    TuningSetup,
};
use zorms::problems::{random_psd, random_sym, PsdDistanceProblem, WavyPsdProblem};
use zorms::projections::project_feasible;
use zorms::smoothing::oracle;
use zorms::zorms::{
    bench_convex, plan_convex, plan_nonconvex, BenchConfig, METHOD_RANDOM, METHOD_ZORMS,
};
use zorms::{
    optimize, run_repeated, BlackBoxCost, Block, BlockMat, BlockSpec, ConeKind, GoeSampler, SymMat,
};

const SE: f64 = 4.0;

#[derive(Default)]
struct Acc {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Acc {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn se(&self) -> f64 {
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn m2_exact(n: usize) -> f64 {
    let n = n as f64;
    (n * n + n) / 2.0
}

fn poly(n: usize) -> f64 {
    let n = n as f64;
    n.powi(4) + 2.0 * n.powi(3) + 5.0 * n * n + 4.0 * n
}

fn frob(a: &SymMat<f64>) -> f64 {
    let d = a.to_dense();
    d.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

fn dist(a: &BlockMat<f64>, b: &BlockMat<f64>) -> f64 {
    a.blocks
        .iter()
        .zip(&b.blocks)
        .map(|(x, y)| frob(&x.sub(y).unwrap()).powi(2))
        .sum::<f64>()
        .sqrt()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn c1_goe_moments() -> Outcome {
    let samples = 100_000;
    let mut notes = Vec::new();
    let mut pass = true;
    for n in [1, 2, 3, 5, 11] {
        let mut g = GoeSampler::new(n, 100 + n as u64);
        let (mut a1, mut a2, mut a4) = (Acc::default(), Acc::default(), Acc::default());
        for _ in 0..samples {
            let s = frob(&g.sample::<f64>()).powi(2);
            a1.push(s.sqrt());
            a2.push(s);
            a4.push(s * s);
        }
        let (e2, e4) = (m2_exact(n), poly(n) / 4.0);
        let ok = (a2.mean - e2).abs() <= SE * a2.se()
            && (a4.mean - e4).abs() <= SE * a4.se()
            && a1.mean <= e2.sqrt() + SE * a1.se();
        pass &= ok;
        notes.push(format!(
            "n={n}: m2 {:.3}/{e2} m4 {:.1}/{e4}",
            a2.mean, a4.mean
        ));
    }
    check(pass, notes.join("; "))
}

fn c2_bound_ratio() -> Outcome {
    let ratio = |n: usize| {
        let half = m2_exact(n);
        4.0 * (half + 4.0).powi(2) / (4.0 * poly(n) / 4.0)
    };
    let lib = |n| zorms::zorms::bound_ratio(n).unwrap();
    let r3 = lib(3);
    let matches = (1..=100).all(|n| (lib(n) - ratio(n)).abs() <= 1e-12 * ratio(n));
    let pass = format!("{r3:.4}") == "2.0833"
        && (r3 - 400.0 / 192.0).abs() < 1e-12
        && matches
        && (1..=100).all(|n| lib(n) > 1.0)
        && lib(100) < r3;
    check(
        pass,
        format!("ratio(3) = {r3:.6}, ratio(100) = {:.6}", lib(100)),
    )
}

fn c3_oracle_unbiased() -> Outcome {
    let n = 3;
    let g = random_sym::<f64>(n, 1.0, 31);
    let spec = BlockSpec::single(n, ConeKind::Sym).unwrap();
    let g2 = g.clone();
    let mut f = BlackBoxCost::new(spec, move |x: &BlockMat<f64>| {
        x.blocks[0].frob_inner(&g2).unwrap()
    });
    let x = BlockMat::from(random_sym::<f64>(n, 1.0, 32));
    let mut goe = GoeSampler::new(n, 33);
    let mut acc: Vec<Acc> = (0..n * n).map(|_| Acc::default()).collect();
    for _ in 0..100_000 {
        let u = BlockMat::from(goe.sample::<f64>());
        let o = oracle(&mut f, &x, &u, 0.01).unwrap().estimate.blocks[0].to_dense();
        for (a, v) in acc.iter_mut().zip(o.iter().flatten()) {
            a.push(*v);
        }
    }
    let target = g.to_dense();
    let worst = acc
        .iter()
        .zip(target.iter().flatten())
        .map(|(a, t)| (a.mean - t).abs() / a.se())
        .fold(0.0, f64::max);
    check(
        worst <= SE,
        format!("max |mean - G| / SE = {worst:.2} over {} entries", n * n),
    )
}

fn c4_smoothing_gap() -> Outcome {
    let n = 4;
    let x = random_psd::<f64>(n, 41);
    let fx = frob(&x);
    let mut notes = Vec::new();
    let mut pass = true;
    for (i, mu) in [0.01, 0.1].into_iter().enumerate() {
        let mut goe = GoeSampler::new(n, 42 + i as u64);
        let mut acc = Acc::default();
        for _ in 0..100_000 {
            let u = goe.sample::<f64>();
            acc.push(frob(&x.axpy(mu, &u).unwrap()));
        }
        let bound = mu * m2_exact(n).sqrt();
        let gap = (acc.mean - fx).abs();
        pass &= gap <= bound + SE * acc.se();
        notes.push(format!("mu={mu}: gap {gap:.2e} <= {bound:.2e} + 4SE"));
    }
    check(pass, notes.join("; "))
}

fn c5_second_moment() -> Outcome {
    let n = 4;
    let spec = BlockSpec::single(n, ConeKind::Sym).unwrap();
    let mut f = BlackBoxCost::new(spec, |x: &BlockMat<f64>| frob(&x.blocks[0]));
    let x = BlockMat::from(random_psd::<f64>(n, 51));
    let mut goe = GoeSampler::new(n, 52);
    let mut acc = Acc::default();
    for _ in 0..100_000 {
        let u = BlockMat::from(goe.sample::<f64>());
        let o = oracle(&mut f, &x, &u, 0.1).unwrap().estimate;
        acc.push(frob(&o.blocks[0]).powi(2));
    }
    let bound = poly(n) / 4.0;
    check(
        acc.mean <= bound + SE * acc.se(),
        format!("E|O|^2 = {:.3} <= {bound}", acc.mean),
    )
}

fn min_eig(a: &SymMat<f64>) -> f64 {
    let d = a.to_dense();
    let m = DMatrix::from_fn(a.n(), a.n(), |i, j| d[i][j]);
    m.symmetric_eigenvalues().min()
}

fn c6_projections() -> Outcome {
    let n = 4;
    let tol = 1e-8;
    let cones = [
        vec![Block::new(n, ConeKind::Sym).unwrap()],
        vec![Block::new(n, ConeKind::Psd).unwrap()],
        vec![Block::new(n, ConeKind::PdFloor(0.1)).unwrap()],
        vec![
            Block::new(n, ConeKind::Psd).unwrap(),
            Block::new(2, ConeKind::PdFloor(1e-6)).unwrap(),
        ],
    ];
    let mut failures = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(61);
    for blocks in cones {
        let spec = BlockSpec::new(blocks.clone()).unwrap();
        let floor = |b: &Block| match b.cone {
            ConeKind::Psd => 0.0,
            ConeKind::PdFloor(d) => d,
            _ => f64::NEG_INFINITY,
        };
        for _ in 0..1000 {
            let mut draw = || {
                let scale = rng.random_range(0.1..3.0);
                BlockMat::new(
                    blocks
                        .iter()
                        .map(|b| random_sym::<f64>(b.dim, scale, rng.random()))
                        .collect(),
                )
            };
            let (x, y) = (draw(), draw());
            let px = project_feasible(&x, &spec).unwrap();
            let py = project_feasible(&y, &spec).unwrap();
            let ppx = project_feasible(&px, &spec).unwrap();
            let scale = 1.0 + dist(&x, &y);
            let feasible = px
                .blocks
                .iter()
                .zip(&blocks)
                .all(|(m, b)| min_eig(m) >= floor(b) - tol);
            let nonexpansive = dist(&px, &py) <= dist(&x, &y) + tol * scale;
            let idempotent = dist(&ppx, &px) <= tol * (1.0 + dist(&px, &px.scale(0.0)));
            // y's projection is feasible, so it can be no closer to x than π(x).
            let nearest = dist(&x, &px) <= dist(&x, &py) + tol * scale;
            if !(feasible && nonexpansive && idempotent && nearest) {
                failures += 1;
            }
        }
    }
    check(failures == 0, format!("{failures} failing pairs of 4000"))
}

fn c7_convex() -> Outcome {
    let p = PsdDistanceProblem::new(3, 0).unwrap();
    let plan = plan_convex(1.0, 0.5, p.r_bar(), 3).unwrap();
    let mut acc = Acc::default();
    for seed in 0..100 {
        let mut f = p.cost();
        let rec = optimize(&mut f, &p.x0, &plan, seed).unwrap();
        acc.push(dist(&rec.best, &p.target));
    }
    check(
        acc.mean <= 0.5,
        format!(
            "mean f(X_hat) = {:.4} <= 0.5 after N = {}",
            acc.mean, plan.iterations
        ),
    )
}

fn c8_nonconvex() -> Outcome {
    let p = WavyPsdProblem::new(3, 0).unwrap();
    let (eps, delta) = (0.5, 1.0);
    let plan = plan_nonconvex(p.lipschitz(), eps, delta, p.base.r_bar(), 3, Some(500)).unwrap();
    let sigma_sq = poly(3) * p.lipschitz().powi(2) / 4.0;
    let bound = delta + sigma_sq;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut f = p.cost();
        let rec = optimize(&mut f, &p.base.x0, &plan, seed).unwrap();
        let mut acc = Acc::default();
        for row in &rec.rows {
            acc.push(row.mapping_norm_sq);
            worst = worst.max(acc.mean);
        }
    }
    check(
        worst <= bound,
        format!("max running mean |G|^2 = {worst:.4} <= delta + sigma^2 = {bound:.2}"),
    )
}

fn riccati_residual(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    p: &DMatrix<f64>,
) -> f64 {
    let s = r + b.transpose() * p * b;
    let next = a.transpose() * p * a
        - a.transpose() * p * b * s.try_inverse().unwrap() * b.transpose() * p * a
        + q;
    (p - next).norm()
}

fn c9_dare() -> Outcome {
    let one = |v| DMatrix::from_element(1, 1, v);
    let p = solve_dare(&one(0.5), &one(1.0), &one(1.0), &one(1.0)).unwrap()[(0, 0)];
    let exact = (0.25 + 4.0625f64.sqrt()) / 2.0;
    let mut pass = (p - exact).abs() <= 1e-6 && (p - 1.132782).abs() <= 1e-6;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let plant = random_stable_plant(4, 2, 2, 0.95, seed).unwrap();
        let q = DMatrix::identity(4, 4);
        let r = DMatrix::identity(2, 2);
        let sol = solve_dare(&plant.a, &plant.b, &q, &r).unwrap();
        let rel = riccati_residual(&plant.a, &plant.b, &q, &r, &sol) / (1.0 + sol.norm());
        worst = worst.max(rel);
    }
    pass &= worst <= 1e-8;
    check(
        pass,
        format!("p = {p:.7}; worst relative residual {worst:.1e} over 20 plants"),
    )
}

fn kkt(
    h: &DMatrix<f64>,
    c: &DVector<f64>,
    g: &DMatrix<f64>,
    hv: &DVector<f64>,
    z: &DVector<f64>,
    l: &DVector<f64>,
) -> f64 {
    let stat = (h * z + c + g.transpose() * l).amax();
    let slack = hv - g * z;
    let primal = slack.iter().fold(0.0f64, |m, &s| m.max(-s));
    let comp = slack
        .iter()
        .zip(l.iter())
        .fold(0.0f64, |m, (s, l)| m.max((s * l).abs()));
    let dual = l.iter().fold(0.0f64, |m, &v| m.max(-v));
    stat.max(primal).max(comp).max(dual)
}

fn c10_qp_mpc() -> Outcome {
    let s = |v| DMatrix::from_element(1, 1, v);
    let (a, b, p, q, r, x) = (0.8, 0.3, 1.5, 1.0, 0.2, -2.0);
    let prob = MpcProblem {
        plant: LtiPlant::new(s(a), s(b), s(1.0), s(0.0)).unwrap(),
        horizon: 1,
        weights: MpcWeights {
            p: SymMat::from_diag(&[p]),
            q: SymMat::from_diag(&[q]),
            r: SymMat::from_diag(&[r]),
        },
        constraints: None,
        integrator_augmented: false,
    };
    let (u, _) = solve_mpc_step(&prob, &DVector::from_element(1, x)).unwrap();
    let lq_err = (u[0] + b * p * a * x / (r + b * b * p)).abs();

    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let nv = rng.random_range(2..8);
        let m = rng.random_range(1..12);
        let f = DMatrix::from_fn(nv, nv, |_, _| rng.random_range(-1.0..1.0));
        let h = &f * f.transpose() + DMatrix::identity(nv, nv) * 0.1;
        let c = DVector::from_fn(nv, |_, _| rng.random_range(-5.0..5.0));
        let g = DMatrix::from_fn(m, nv, |_, _| rng.random_range(-1.0..1.0));
        // Feasible by construction: z = 0 satisfies every row.
        let hv = DVector::from_fn(m, |_, _| rng.random_range(0.0..1.0));
        let sol = solve_qp(&h, &c, &g, &hv).unwrap();
        worst = worst.max(kkt(&h, &c, &g, &hv, &sol.z, &sol.lambda));
    }

    let setup = TuningSetup::demo();
    let task = TrackingTask::step(1, 400, 5, 1.0);
    let traj = simulate_closed_loop(&setup.template, &task, &setup.true_plant, None).unwrap();
    let ss = (traj.y.last().unwrap()[0] - 1.0).abs();
    check(
        lq_err <= 1e-8 && worst <= 1e-6 && ss <= 1e-3 && !traj.failed(),
        format!("LQ error {lq_err:.1e}; worst KKT {worst:.1e}; steady-state error {ss:.1e}"),
    )
}

fn c11_tuning() -> Outcome {
    let setup = TuningSetup::demo();
    let opts = TuningOptions::demo();
    let plan = demo_plan();
    let session = make_tuning_cost(&setup, &opts).unwrap();
    let seeds: Vec<u64> = (0..100).collect();
    let factory = |_seed| Ok(make_tuning_cost(&setup, &opts)?.cost);
    let out = run_repeated(factory, &session.baseline, &plan, &seeds).unwrap();
    let evals_ok =
        plan.iterations == 11 && out.summary.evaluations_per_run.iter().all(|&e| e == 24);
    let base = session.baseline_cost;
    let wins = out.records.iter().filter(|r| r.best_cost < base).count();
    let mut improvements: Vec<f64> = out
        .records
        .iter()
        .map(|r| 100.0 * (base - r.best_cost) / base)
        .collect();
    let med = median(&mut improvements);
    check(
        wins >= 90 && med >= 5.0 && evals_ok,
        format!("{wins}/100 seeds improve; median improvement {med:.2}%; 24 evaluations per run: {evals_ok}"),
    )
}

fn c12_bench() -> Outcome {
    let rows = bench_convex(&BenchConfig::default()).unwrap();
    let pick = |m: &str| {
        let mut v: Vec<f64> = rows
            .iter()
            .filter(|r| r.method == m)
            .map(|r| r.f_opt)
            .collect();
        assert!(rows.iter().filter(|r| r.method == m).all(|r| r.evals == 20));
        median(&mut v)
    };
    let (zo, rs) = (pick(METHOD_ZORMS), pick(METHOD_RANDOM));
    check(
        zo <= rs,
        format!("median f_opt: zo-rms {zo:.4}, random search {rs:.4} (20 evaluations, 100 seeds)"),
    )
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 12] = [
        ("GOE moments", c1_goe_moments, Duration::from_secs(10)),
        ("bound ratio", c2_bound_ratio, Duration::from_secs(1)),
        (
            "oracle unbiasedness",
            c3_oracle_unbiased,
            Duration::from_secs(10),
        ),
        ("smoothing gap", c4_smoothing_gap, Duration::from_secs(10)),
        (
            "second-moment bound",
            c5_second_moment,
            Duration::from_secs(10),
        ),
        (
            "projection properties",
            c6_projections,
            Duration::from_secs(5),
        ),
        ("convex convergence", c7_convex, Duration::from_secs(120)),
        (
            "non-convex mapping bound",
            c8_nonconvex,
            Duration::from_secs(120),
        ),
        ("DARE", c9_dare, Duration::from_secs(5)),
        ("QP/MPC", c10_qp_mpc, Duration::from_secs(30)),
        ("end-to-end tuning", c11_tuning, Duration::from_secs(300)),
        ("bench harness", c12_bench, Duration::from_secs(120)),
    ];
    let mut failed = 0;
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let out = run();
        let took = started.elapsed();
        let pass = out.pass && took <= *limit;
        if !pass {
            failed += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        println!(
            "{verdict} {:>2} {name}: {} [{:.2}s, limit {}s]",
            i + 1,
            out.detail,
            took.as_secs_f64(),
            limit.as_secs()
        );
    }
    println!(
        "{} of {} acceptance criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
