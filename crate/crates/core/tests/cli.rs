use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn qrelent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrelent"))
        .args(args)
        .env_remove("QRELENT_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn diag(dir: &TempDir, name: &str, d: &[f64]) -> PathBuf {
    let n = d.len();
    let rows: Vec<String> = (0..n)
        .map(|i| {
            let row: Vec<String> = (0..n)
                .map(|j| format!("[{},0]", if i == j { d[i] } else { 0.0 }))
                .collect();
            format!("[{}]", row.join(","))
        })
        .collect();
    write(
        dir,
        name,
        &format!(r#"{{"rows":{n},"cols":{n},"data":[{}]}}"#, rows.join(",")),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn entropy_of_classical_qubit_pair() {
    let dir = tempfile::tempdir().unwrap();
    let w = diag(&dir, "w.json", &[0.5, 0.5]);
    let v = diag(&dir, "v.json", &[0.75, 0.25]);
    let out = qrelent(&["entropy", "--omega", s(&w), "--nu", s(&v), "--method", "closed"]);
    assert_eq!(out.status.code(), Some(0));
    let value: f64 = stdout(&out).parse().unwrap();
    let kl = 0.5 * (0.5f64 / 0.75).ln() + 0.5 * (0.5f64 / 0.25).ln();
    assert!((value - kl).abs() < 1e-12);
    assert!(stdout(&out).starts_with("0.143841"));

    let out = qrelent(&["entropy", "--omega", s(&w), "--nu", s(&v), "--method", "limit"]);
    assert_eq!(out.status.code(), Some(0));
    let limit: f64 = stdout(&out).parse().unwrap();
    assert!((limit - kl).abs() < 1e-5);
}

#[test]
fn entropy_outside_support_is_infinite() {
    let dir = tempfile::tempdir().unwrap();
    let w = diag(&dir, "w.json", &[0.5, 0.5]);
    let v = diag(&dir, "v.json", &[1.0, 0.0]);
    let out = qrelent(&["entropy", "--omega", s(&w), "--nu", s(&v)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "inf");

    let out = qrelent(&[
        "entropy",
        "--omega",
        s(&w),
        "--nu",
        s(&v),
        "--method",
        "limit",
        "--diagnostics",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let body = json(&out);
    assert_eq!(body["value"], "inf");
    assert_eq!(body["diagnostics"]["diverged"], true);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(&dir, "bad.json", r#"{"rows":2,"cols":2,"data":[[[1,0]]]}"#);
    let ok = diag(&dir, "ok.json", &[0.5, 0.5]);
    let out = qrelent(&["entropy", "--omega", s(&bad), "--nu", s(&ok)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let not_psd = diag(&dir, "neg.json", &[1.0, -1.0]);
    assert_eq!(
        qrelent(&["geomean", "--p", s(&not_psd), "--q", s(&ok)]).status.code(),
        Some(2)
    );
    let missing = dir.path().join("missing.json");
    assert_eq!(
        qrelent(&["entropy", "--omega", s(&missing), "--nu", s(&ok)])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = qrelent(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(qrelent(&["--help"]).status.code(), Some(0));
}

#[test]
fn forms_commands() {
    let dir = tempfile::tempdir().unwrap();
    let p = write(
        &dir,
        "p.json",
        r#"{"rows":2,"cols":2,"data":[[[2.0,0.0],[1.0,0.0]],[[1.0,0.0],[2.0,0.0]]]}"#,
    );
    let q = write(
        &dir,
        "q.json",
        r#"{"rows":2,"cols":2,"data":[[[2,0],[0,1]],[[0,-1],[2,0]]]}"#,
    );
    let p_text = std::fs::read_to_string(&p).unwrap();
    let p_json: Value = serde_json::from_str(&p_text).unwrap();

    let out = qrelent(&["interp", "--p", s(&p), "--q", s(&q), "--t", "0"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out), p_json);

    let out = qrelent(&["geomean", "--p", s(&p), "--q", s(&p)]);
    assert_eq!(out.status.code(), Some(0));
    let g = json(&out);
    for i in 0..2 {
        for j in 0..2 {
            let want = p_json["data"][i][j][0].as_f64().unwrap();
            assert!((g["data"][i][j][0].as_f64().unwrap() - want).abs() < 1e-12);
        }
    }

    let out = qrelent(&["repr", "build", "--p", s(&p), "--q", s(&q)]);
    assert_eq!(out.status.code(), Some(0));
    let rep = json(&out);
    assert_eq!(rep["support_dim"], 2);
    assert!(rep["residuals"]["sum_identity"].as_f64().unwrap() < 1e-12);
    assert!(rep["residuals"]["commutator"].as_f64().unwrap() < 1e-12);
}

#[test]
fn transpose_fails_schwarz_at_e12() {
    let out = qrelent(&["channel", "check-schwarz", "--transpose", "2"]);
    assert_eq!(out.status.code(), Some(1));
    let rep = json(&out);
    assert_eq!(rep["passed"], false);
    let e = &rep["witness"]["element"]["data"];
    assert_eq!(e[0][1], serde_json::json!([1.0, 0.0]));
    assert_eq!(e[0][0], serde_json::json!([0.0, 0.0]));
    assert_eq!(e[1][0], serde_json::json!([0.0, 0.0]));
}

#[test]
fn kraus_channel_commands() {
    let dir = tempfile::tempdir().unwrap();
    // Two Kraus operators K_i = U_i / sqrt(2): a unital mixed-unitary channel on M_2.
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let kraus = write(
        &dir,
        "k.json",
        &format!(
            r#"[{{"rows":2,"cols":2,"data":[[[{h},0],[0,0]],[[0,0],[{h},0]]]}},
               {{"rows":2,"cols":2,"data":[[[0,0],[{h},0]],[[{h},0],[0,0]]]}}]"#
        ),
    );
    let out = qrelent(&["channel", "check-schwarz", "--kraus", s(&kraus), "--trials", "200"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));

    let x = diag(&dir, "x.json", &[1.0, 3.0]);
    let out = qrelent(&["channel", "apply", "--kraus", s(&kraus), "--x", s(&x)]);
    assert_eq!(out.status.code(), Some(0));
    let y = json(&out);
    assert!((y["data"][0][0][0].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!((y["data"][1][1][0].as_f64().unwrap() - 2.0).abs() < 1e-12);

    let w = diag(&dir, "w.json", &[0.9, 0.1]);
    let out = qrelent(&["channel", "pullback", "--kraus", s(&kraus), "--omega", s(&w)]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert!((r["data"][0][0][0].as_f64().unwrap() - 0.5).abs() < 1e-12);

    let bad = write(
        &dir,
        "bad.json",
        r#"[{"rows":2,"cols":2,"data":[[[1,0],[0,0]],[[0,0],[0,0]]]}]"#,
    );
    assert_eq!(
        qrelent(&["channel", "apply", "--kraus", s(&bad), "--x", s(&x)])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn verify_paper_example() {
    let out = qrelent(&["verify", "--suites", "paper_example"]);
    assert_eq!(out.status.code(), Some(0));
    let rep = json(&out);
    assert_eq!(rep["all_passed"], true);
    assert_eq!(rep["seed_source"], "default");
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "cfg.json", r#"{"seed": 11, "suites": ["paper_example"]}"#);
    let run = |args: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_qrelent"));
        cmd.args(args).env_remove("QRELENT_SEED");
        if let Some(e) = env {
            cmd.env("QRELENT_SEED", e);
        }
        let rep: Value = serde_json::from_slice(&cmd.output().unwrap().stdout).unwrap();
        (
            rep["config"]["seed"].as_u64().unwrap(),
            rep["seed_source"].as_str().unwrap().to_string(),
        )
    };
    let base = ["verify", "--suites", "paper_example"];
    assert_eq!(run(&base, Some("5")), (5, "env:QRELENT_SEED".into()));
    assert_eq!(run(&["verify", "--config", s(&cfg)], Some("5")), (11, "config".into()));
    assert_eq!(
        run(&["verify", "--config", s(&cfg), "--seed", "3"], Some("5")),
        (3, "cli".into())
    );
    assert_eq!(run(&base, None), (7, "default".into()));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = qrelent(&["verify", "--suites", "paper_example,axioms", "--trials", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("trials"));

    let cfg = write(&dir, "cfg.json", r#"{"dims": [0, 9], "t_grid": [1.5], "colour": 1}"#);
    assert_eq!(qrelent(&["verify", "--config", s(&cfg)]).status.code(), Some(2));
    let cfg = write(&dir, "cfg2.json", r#"{"dims": [0, 9], "t_grid": [1.5]}"#);
    let out = qrelent(&["verify", "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(
        err.contains("dims[0]") && err.contains("dims[1]") && err.contains("t_grid[0]"),
        "{err}"
    );

    assert_eq!(qrelent(&["verify", "--suites", "nonsense"]).status.code(), Some(2));
}

#[test]
fn failing_run_replays() {
    let dir = tempfile::tempdir().unwrap();
    // A tolerance no floating-point comparison can meet forces a failure.
    let cfg = write(
        &dir,
        "cfg.json",
        r#"{"suites": ["vn_equivalence"], "trials": 3, "tolerances": {"vn_equivalence": 1e-300}}"#,
    );
    let report = dir.path().join("report.json");
    let out = qrelent(&["verify", "--config", s(&cfg), "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("FAIL"));

    let rep: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    let cx = &rep["suites"][0]["counterexample"];
    assert_eq!(cx["suite"], "vn_equivalence");
    assert_eq!(cx["case"]["kind"], "vn_equivalence");
    let cx_path = write(&dir, "cx.json", &cx.to_string());

    let out = qrelent(&["verify", "--replay", s(&cx_path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL"));
    assert_eq!(qrelent(&["verify", "--replay", s(&report)]).status.code(), Some(1));

    // With the default tolerance restored the same inputs pass.
    let mut relaxed = cx.clone();
    relaxed["tolerances"]["vn_equivalence"] = serde_json::json!(1e-5);
    let relaxed_path = write(&dir, "relaxed.json", &relaxed.to_string());
    assert_eq!(
        qrelent(&["verify", "--replay", s(&relaxed_path)]).status.code(),
        Some(0)
    );
}

#[test]
fn identical_config_identical_report() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let path = dir.path().join(name);
        let out = qrelent(&[
            "verify",
            "--suites",
            "axioms,monotonicity,schwarz",
            "--trials",
            "12",
            "--seed",
            "99",
            "--out",
            s(&path),
        ]);
        assert_eq!(out.status.code(), Some(0));
        let mut rep: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        rep.as_object_mut().unwrap().remove("timings");
        serde_json::to_string(&rep).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}
