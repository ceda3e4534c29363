use std::path::Path;
use std::process::{Command, Output};

fn zorms(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_zorms"))
        .args(args)
        .env_remove("ZORMS_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("JSON on stdout")
}

fn read_csv(path: &Path) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    let rows = r.records().map(Result::unwrap).collect();
    (header, rows)
}

#[test]
fn plan_reports_bound_ratio() {
    let o = zorms(&["plan", "--epsilon", "0.5", "--r-bar", "1", "--n", "3"]);
    assert!(o.status.success());
    let v = json(&o);
    assert!((v["ratio"].as_f64().unwrap() - 400.0 / 192.0).abs() < 1e-12);
    assert_eq!(v["plan"]["iterations"], 768);
}

#[test]
fn plan_sweep_csv() {
    let o = zorms(&["plan", "--sweep", "20", "--epsilon", "1", "--r-bar", "1"]);
    assert!(o.status.success());
    let mut r = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(
        r.headers().unwrap(),
        vec!["n", "N_ours", "N_baseline", "ratio"]
    );
    let rows: Vec<Vec<f64>> = r
        .records()
        .map(|rec| rec.unwrap().iter().map(|s| s.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 20);
    assert!((rows[2][3] - 2.0833).abs() < 1e-4);
    assert!(rows.iter().all(|r| r[3] > 1.0));
    assert!(rows.windows(2).all(|w| w[1][3] < w[0][3]));
}

#[test]
fn plan_iteration_override_keeps_theoretical_count() {
    let o = zorms(&[
        "plan",
        "--epsilon",
        "0.5",
        "--r-bar",
        "1",
        "--n",
        "3",
        "--iterations",
        "50",
    ]);
    let v = json(&o);
    assert_eq!(v["plan"]["iterations"], 50);
    assert_eq!(v["plan"]["theoretical_iterations"], 768.0);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(
        zorms(&["plan", "--epsilon", "0", "--r-bar", "1", "--n", "3"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        zorms(&["plan", "--r-bar", "1", "--n", "3"]).status.code(),
        Some(2)
    );
    assert_eq!(zorms(&["bench", "--budget", "0"]).status.code(), Some(2));
    assert_eq!(zorms(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn verify_suites_pass() {
    for args in [
        vec!["verify", "moments", "--n", "3", "--samples", "20000"],
        vec!["verify-moments", "--n", "2", "--samples", "20000"],
        vec!["verify", "oracle", "--samples", "20000"],
        vec!["verify", "smoothing-gap", "--samples", "20000"],
        vec!["verify", "second-moment", "--samples", "20000"],
        vec!["verify", "projection", "--pairs", "200"],
    ] {
        let o = zorms(&args);
        assert!(
            o.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
        assert_eq!(json(&o)["pass"], true);
    }
}

#[test]
fn invalid_verifier_and_config_inputs_exit_2() {
    let o = zorms(&["verify", "smoothing-gap", "--mu", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\"problme\": 1}").unwrap();
    let o = zorms(&["tune", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn seed_from_environment() {
    let run = |env: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_zorms"));
        c.args(["verify", "oracle", "--samples", "2000"]);
        match env {
            Some(s) => c.env("ZORMS_SEED", s),
            None => c.env_remove("ZORMS_SEED"),
        };
        json(&c.output().unwrap())["max_z"].as_f64().unwrap()
    };
    assert_eq!(run(Some("5")), run(Some("5")));
    assert_ne!(run(Some("5")), run(None));
}

#[test]
fn tune_demo_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = zorms(&["tune", "--seed", "7", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = json(&o);
    assert!(summary["improvement_pct"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["evaluations_per_run"], 24);

    let (header, rows) = read_csv(&out.join("run.csv"));
    assert_eq!(
        header,
        vec!["k", "f_xk", "f_perturbed", "h_k", "best_so_far", "evals"]
    );
    assert_eq!(rows.len(), 12);
    let best: Vec<f64> = rows.iter().map(|r| r[4].parse().unwrap()).collect();
    assert!(best.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(&rows[11][5], "24");

    let weights: zorms::mpc::MpcWeights =
        serde_json::from_str(&std::fs::read_to_string(out.join("best_weights.json")).unwrap())
            .unwrap();
    assert_eq!((weights.p.n(), weights.q.n(), weights.r.n()), (3, 3, 1));
    let file: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(file, summary);

    let (header, rows) = read_csv(&out.join("best_trajectory.csv"));
    assert_eq!(header, vec!["t", "y0", "u0", "ref0"]);
    assert_eq!(rows.len(), 100);
}

#[test]
fn tune_is_deterministic_and_refuses_to_clobber() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let first = zorms(&["tune", "--seed", "3", "--out", a.to_str().unwrap()]);
    let second = zorms(&["tune", "--seed", "3", "--out", b.to_str().unwrap()]);
    let strip = |o: &Output| {
        let mut v = json(o);
        v["runs"][0]["wall_time_s"] = serde_json::Value::Null;
        v
    };
    assert_eq!(strip(&first), strip(&second));
    assert_eq!(
        std::fs::read(a.join("run.csv")).unwrap(),
        std::fs::read(b.join("run.csv")).unwrap()
    );

    let again = zorms(&["tune", "--seed", "3", "--out", a.to_str().unwrap()]);
    assert_eq!(again.status.code(), Some(2));
    let forced = zorms(&[
        "tune",
        "--seed",
        "3",
        "--force",
        "--out",
        a.to_str().unwrap(),
    ]);
    assert!(forced.status.success());
}

#[test]
fn baseline_only_runs_no_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("base");
    let o = zorms(&["tune", "--baseline-only", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let v = json(&o);
    assert_eq!(v["evaluations_per_run"], 0);
    assert_eq!(v["runs"].as_array().unwrap().len(), 0);
    assert!(v["baseline_cost"].as_f64().unwrap() > 0.0);
    assert!(!out.join("run.csv").exists());
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"problem": "SYNTHETIC_CONVEX", "plan": {"source": "corollary1", "l0": 1, "epsilon": 0.5},
            "iterations": 30, "n": 2, "seeds": [1, 2, 3]}"#,
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = zorms(&[
        "tune",
        "--config",
        cfg.to_str().unwrap(),
        "--iterations",
        "20",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(&o);
    assert_eq!(v["plan"]["iterations"], 20);
    assert_eq!(v["runs"].as_array().unwrap().len(), 3);
    for seed in 1..=3 {
        assert!(out.join(format!("run_{seed}.csv")).exists());
    }
    assert!(v["repeat"]["mean_best"].as_f64().is_some());
}

#[test]
fn tune_with_plant_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let plant = dir.path().join("plant.json");
    std::fs::write(&plant, r#"{"A": [[0.9]], "B": [[0.5]], "C": [[1.0]]}"#).unwrap();
    let out = dir.path().join("o");
    let o = zorms(&[
        "tune",
        "--plant",
        plant.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let missing = dir.path().join("missing.json");
    let o = zorms(&[
        "tune",
        "--plant",
        missing.to_str().unwrap(),
        "--out",
        dir.path().join("m").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.json"));
}

#[test]
fn bench_equal_budget() {
    let o = zorms(&["bench", "--runs", "10"]);
    assert!(o.status.success());
    let mut r = csv::Reader::from_reader(o.stdout.as_slice());
    assert_eq!(
        r.headers().unwrap(),
        vec!["method", "f_opt", "evals", "wall_time"]
    );
    let rows: Vec<_> = r.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| &r[2] == "20"));
    assert!(stdout(&o).contains("zo-rms") && stdout(&o).contains("random-search"));
}
