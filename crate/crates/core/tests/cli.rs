use std::fs;
use std::process::{Command, Output};

use trapwalk::experiment::{CSV_HEADER, CURVE_HEADER};

fn trapwalk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_trapwalk"))
        .args(args)
        .env_remove("TRAPWALK_THREADS")
        .output()
        .expect("spawn trapwalk")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

const SMALL: &[&str] = &["--steps", "20000", "--replicas", "4"];

#[test]
fn bouchaud_row() {
    let mut args = vec!["--model", "bouchaud", "--lambda", "0.5", "--alpha", "2"];
    args.extend(SMALL);
    let o = trapwalk(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 2);
    let cols: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(&cols[..8], &["bouchaud", "0.5", "2", "", "", "20000", "4", "1"]);
    assert_eq!(cols[11], "0.23105857863000487");
    assert_eq!(cols[13], "positive_speed");
    assert_eq!(cols[14], "");
}

#[test]
fn zero_speed_row_is_flagged() {
    let mut args = vec!["--model", "comb_graph", "--lambda", "1.25", "--alpha", "2", "--q", "0.5"];
    args.extend(SMALL);
    let o = trapwalk(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let cols: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(cols[11], "0");
    assert_eq!(cols[13], "zero_speed");
    let ratio: f64 = cols[12].parse().unwrap();
    assert!(ratio > 0.0 && ratio.is_finite());
}

#[test]
fn identical_runs_are_byte_identical_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("grid.cfg");
    fs::write(
        &cfg,
        "model = bouchaud, comb_reduced, ladder_graph\nlambda = 0.25:0.75:0.25\nalpha = 2\nq = 0.3, 0.7\nsteps = 5000\nreplicas = 5\nseed = 42\n",
    )
    .unwrap();
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(format!("out{threads}.csv"));
        let o = trapwalk(&[
            "--config",
            cfg.to_str().unwrap(),
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
        outputs.push(fs::read(out).unwrap());
    }
    let via_env = Command::new(env!("CARGO_BIN_EXE_trapwalk"))
        .args(["--config", cfg.to_str().unwrap()])
        .env("TRAPWALK_THREADS", "2")
        .output()
        .unwrap();
    assert!(via_env.status.success());
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], via_env.stdout);
    // 3 lambdas x (1 bouchaud + 2 q values x 2 trap models) + header
    assert_eq!(String::from_utf8(outputs[0].clone()).unwrap().lines().count(), 1 + 3 * 5);
}

#[test]
fn jsonl_rows_carry_the_full_tuple() {
    let mut args = vec!["--model", "ladder_reduced", "--lambda", "0.3,0.6", "--format", "jsonl", "--seed", "7"];
    args.extend(SMALL);
    let o = trapwalk(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    for key in ["model", "lambda", "alpha", "q", "steps", "replicas", "seed", "v_hat", "v_theory", "regime"] {
        assert!(rows[0].get(key).is_some(), "missing {key}");
    }
    assert_eq!(rows[1]["lambda"], 0.6);
    assert_eq!(rows[0]["seed"], 7);
}

#[test]
fn config_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "model = bouchaud\n# fine so far\nalpha = two\n").unwrap();
    let o = trapwalk(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("line 3") && err.contains("alpha"), "{err}");

    let o = trapwalk(&["--model", "bouchaud", "--replicas", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("replicas"));

    let o = trapwalk(&["--model", "zigzag"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model"));

    let o = trapwalk(&["--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_3_naming_the_point() {
    // w = U^{-1/α} overflows to infinity for tiny α
    let o = trapwalk(&["--model", "bouchaud", "--lambda", "0.5", "--alpha", "0.001", "--steps", "100000", "--replicas", "2"]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("bouchaud lambda=0.5 alpha=0.001"), "{err}");
}

#[test]
fn curve_mode() {
    let o = trapwalk(&["--curve", "--lambda-crit", "1", "--lambda", "0:1.5:0.25"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CURVE_HEADER);
    assert_eq!(lines.len(), 1 + 7);
    assert_eq!(lines[1], "0,0,,,");
    assert!(lines[3].starts_with("0.5,0.23105857863000487,"));
    assert_eq!(lines[5], "1,0,,,");
    assert_eq!(lines[7], "1.5,0,,,");

    let o = trapwalk(&[
        "--curve", "--lambda-crit", "1", "--lambda", "0.25,0.5,1", "--overlay", "0.5,1", "--steps", "20000", "--replicas", "3",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows[0][2], "");
    assert!(rows[1][2].parse::<f64>().unwrap() > 0.0);
    // λ = λ_crit has zero speed and is never simulated
    assert_eq!(rows[2][2], "");
}

#[test]
fn dumps() {
    let dir = tempfile::tempdir().unwrap();
    let env = dir.path().join("env.tsv");
    let trace = dir.path().join("trace.tsv");
    let o = trapwalk(&[
        "--model",
        "comb_reduced",
        "--steps",
        "4096",
        "--replicas",
        "2",
        "--dump-env",
        env.to_str().unwrap(),
        "--dump-trace",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let env_text = fs::read_to_string(&env).unwrap();
    assert!(env_text.lines().count() > 10);
    for line in env_text.lines() {
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols.len(), 3);
        assert!(cols[2].parse::<f64>().unwrap() >= 1.0);
    }
    let trace_text = fs::read_to_string(&trace).unwrap();
    let last = trace_text.lines().last().unwrap();
    assert!(last.starts_with("4096\t"), "{last}");
}
