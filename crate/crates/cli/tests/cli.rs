use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "dim = 3\nsamples_per_user = 20\ntest_size = 200\nroot_size = 50\n";

fn byitfl(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_byitfl"));
    cmd.args(args).env_remove("BYITFL_SEED");
    if let Some(s) = seed {
        cmd.env("BYITFL_SEED", s);
    }
    cmd.output().unwrap()
}

fn ok(out: &Output) -> String {
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {stdout}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    stdout
}

fn write_config(dir: &Path, name: &str, extra: &str) -> String {
    let path = dir.join(name);
    let mut text = format!("{SMALL}{extra}");
    if !extra.contains("n = ") {
        text.push_str("n = 9\n");
    }
    if !extra.contains("rounds = ") {
        text.push_str("rounds = 3\n");
    }
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn train(cfg: &str, out: &Path, seed: Option<&str>) {
    ok(&byitfl(
        &["train", "-c", cfg, "--out-dir", &out.display().to_string()],
        seed,
    ));
}

#[test]
fn train_is_reproducible_and_writes_all_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.txt",
        "aggregator = byitfl-secure\nseed = 11\n",
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    train(&cfg, &a, None);
    train(&cfg, &b, None);
    let metrics = fs::read(a.join("metrics.csv")).unwrap();
    assert_eq!(metrics, fs::read(b.join("metrics.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("transcript.bin")).unwrap(),
        fs::read(b.join("transcript.bin")).unwrap()
    );

    let text = String::from_utf8(metrics).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("round,aggregator,attack,loss,accuracy,excluded_count")
    );
    assert_eq!(lines.count(), 3);
    for r in 1..=3 {
        assert!(a.join(format!("rounds/round_{r:04}.json")).exists());
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("summary.json")).unwrap()).unwrap();
    for key in ["final_accuracy", "excluded", "wall_time_s"] {
        assert!(summary.get(key).is_some(), "summary lacks {key}");
    }
    let index: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("transcript.json")).unwrap()).unwrap();
    assert!(!index["records"].as_array().unwrap().is_empty());
}

#[test]
fn seed_env_overrides_the_config_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.txt", "aggregator = fedavg\nseed = 1\n");
    let other = write_config(dir.path(), "d.txt", "aggregator = fedavg\nseed = 2\n");
    let run = |cfg: &str, name: &str, seed: Option<&str>| {
        let out = dir.path().join(name);
        train(cfg, &out, seed);
        fs::read(out.join("metrics.csv")).unwrap()
    };
    let env2 = run(&cfg, "env2", Some("2"));
    assert_eq!(env2, run(&other, "cfg2", None));
    assert_ne!(env2, run(&cfg, "cfg1", None));
    assert!(fs::read_to_string(dir.path().join("env2/config.txt"))
        .unwrap()
        .contains("seed = 2"));
    assert!(
        !byitfl(&["train", "-c", &cfg, "--out-dir", "unused"], Some("x"))
            .status
            .success()
    );
}

#[test]
fn sweep_runs_each_config() {
    let dir = tempfile::tempdir().unwrap();
    let a = write_config(dir.path(), "fa.txt", "aggregator = fedavg\n");
    let b = write_config(
        dir.path(),
        "fe.txt",
        "aggregator = fltrust-exact\nattack = sign_flip\nn = 11\nb = 1\n",
    );
    let out = dir.path().join("sweep");
    ok(&byitfl(
        &[
            "train",
            "--sweep",
            &a,
            &b,
            "--out-dir",
            &out.display().to_string(),
        ],
        None,
    ));
    assert!(out.join("fa/metrics.csv").exists());
    assert!(out.join("fe/metrics.csv").exists());
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",ok")));
}

#[test]
fn replay_reproduces_a_logged_run_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.txt",
        "n = 11\nb = 1\nattack = random_shares\n",
    );
    let out = dir.path().join("proto");
    ok(&byitfl(
        &[
            "run-protocol",
            "-c",
            &cfg,
            "--out-dir",
            &out.display().to_string(),
        ],
        None,
    ));
    let round: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(round["oracle_match"], serde_json::Value::Bool(true));
    let log = out.join("transcript.bin");
    let stdout = ok(&byitfl(
        &["replay", "--log", &log.display().to_string()],
        None,
    ));
    assert!(stdout.contains("replay OK"), "{stdout}");

    let mut bytes = fs::read(&log).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    fs::write(&log, bytes).unwrap();
    let res = byitfl(&["replay", "--log", &log.display().to_string()], None);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn attack_bench_fills_the_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.txt", "n = 11\nb = 1\nrounds = 2\n");
    let out = dir.path().join("bench");
    ok(&byitfl(
        &[
            "attack-bench",
            "-c",
            &cfg,
            "--attacks",
            "none,sign_flip",
            "--aggregators",
            "fedavg,fltrust-approx",
            "--out-dir",
            &out.display().to_string(),
        ],
        None,
    ));
    let bench = fs::read_to_string(out.join("bench.csv")).unwrap();
    assert_eq!(bench.lines().count(), 5);
    let metrics = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(
        metrics.lines().next(),
        Some("round,aggregator,attack,loss,accuracy,excluded_count")
    );
    assert_eq!(metrics.lines().count(), 1 + 4 * 2);
}

#[test]
fn check_params_exit_codes() {
    let args = |n: &str| {
        byitfl(
            &[
                "check-params",
                "--n",
                n,
                "--b",
                "2",
                "--t",
                "1",
                "--m",
                "1",
                "--k",
                "6",
                "--p-drop",
                "1",
                "--no-prime",
            ],
            None,
        )
    };
    // 2*2 + 8*1 + 1 + 1 = 14
    let good = args("14");
    assert!(ok(&good).contains("n = 14: OK"));
    let bad = args("13");
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("n ≥ 2b+(k+2)(m+t−1)+p+1"));
    assert_eq!(
        byitfl(&["check-params", "--bogus"], None).status.code(),
        Some(2)
    );
}

#[test]
fn fit_relu_writes_json_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    ok(&byitfl(
        &[
            "fit-relu",
            "--k",
            "4",
            "--points",
            "11",
            "--out-dir",
            &dir.path().display().to_string(),
        ],
        None,
    ));
    let fit: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("relu_k4.json")).unwrap()).unwrap();
    assert_eq!(fit["coefficients"].as_array().unwrap().len(), 5);
    let csv = fs::read_to_string(dir.path().join("relu_k4.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("x,relu,h"));
    assert_eq!(csv.lines().count(), 12);
    let err = fit["max_abs_error"].as_f64().unwrap();
    for line in csv.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!((v[1] - v[0].max(0.0)).abs() < 1e-12);
        assert!((v[2] - v[1]).abs() <= err + 1e-12);
    }
}
