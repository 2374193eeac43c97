use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fairshare(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairshare"))
        .args(args)
        .env_remove("FAIRSHARE_CONFIG")
        .env_remove("FAIRSHARE_SEED")
        .env_remove("FAIRSHARE_ITERATIONS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

/// Depot at 0, destinations 1 km and 2 km down a straight road.
const LINE: &str = r#"{"delta": [[0, 1000, 2000], [1000, 0, 1000], [2000, 1000, 0]], "price_per_km": 1.0}"#;

fn payments(o: &Output) -> Vec<f64> {
    let v: Value = serde_json::from_str(&stdout(o)).unwrap();
    v["payments"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p.as_f64().unwrap())
        .collect()
}

#[test]
fn allocate_shapo_on_a_line() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "line.json", LINE);
    let table = fairshare(&["allocate", "--instance", &inst, "--rule", "shapo"]);
    assert!(table.status.success(), "{}", stderr(&table));
    let text = stdout(&table);
    assert!(text.contains("0.50") && text.contains("1.50") && text.contains("2.00"), "{text}");

    let json = fairshare(&["allocate", "--instance", &inst, "--rule", "shapo", "--json"]);
    assert_eq!(payments(&json), vec![0.5, 1.5]);
}

#[test]
fn routing_game_adds_the_return_leg() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "line.json", LINE);
    let o = fairshare(&["allocate", "--instance", &inst, "--rule", "shapo", "--routing-game", "--json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let p = payments(&o);
    assert!((p.iter().sum::<f64>() - 4.0).abs() < 1e-12, "{p:?}");
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cost_model"], "routing-game-prioritized");
}

#[test]
fn exact_and_shapo_agree_on_prioritized_rides() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(
        dir.path(),
        "ride.json",
        r#"{"delta": [[0, 3, 7, 4, 9], [3, 0, 5, 2, 6], [7, 5, 0, 6, 3], [4, 2, 6, 0, 8], [9, 6, 3, 8, 0]],
            "price_per_km": 1000, "cost_model": "prioritized"}"#,
    );
    let exact = payments(&fairshare(&["allocate", "--instance", &inst, "--rule", "exact", "--json"]));
    let shapo = payments(&fairshare(&["allocate", "--instance", &inst, "--rule", "shapo", "--json"]));
    for (a, b) in exact.iter().zip(&shapo) {
        assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "{exact:?} vs {shapo:?}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let n = 25;
    let rows: Vec<Vec<f64>> = (0..=n)
        .map(|a| (0..=n).map(|b| (a as f64 - b as f64).abs()).collect())
        .collect();
    let big = write(
        dir.path(),
        "big.json",
        &serde_json::json!({ "delta": rows }).to_string(),
    );
    let o = fairshare(&["allocate", "--instance", &big, "--rule", "exact"]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains("exceeds"));
    // SHAPO has no coalition table, so the same ride is fine.
    assert!(fairshare(&["allocate", "--instance", &big, "--rule", "shapo"]).status.success());

    let line = write(dir.path(), "line.json", LINE);
    assert_eq!(fairshare(&["allocate", "--instance", &line, "--rule", "median"]).status.code(), Some(1));
    let bad = write(dir.path(), "bad.json", r#"{"delta": [[0, -1], [-1, 0]]}"#);
    assert_eq!(fairshare(&["allocate", "--instance", &bad, "--rule", "depot"]).status.code(), Some(1));
    let missing = dir.path().join("nope.json");
    let o = fairshare(&["allocate", "--instance", missing.to_str().unwrap(), "--rule", "depot"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fairshare(&["allocate", "--rule", "depot"]).status.code(), Some(1));
}

#[test]
fn depot_rule_falls_back_when_everyone_stays_at_the_depot() {
    let dir = tempfile::tempdir().unwrap();
    let inst = write(dir.path(), "same.json", r#"{"delta": [[0, 0, 0], [0, 0, 0], [0, 0, 0]]}"#);
    let o = fairshare(&["allocate", "--instance", &inst, "--rule", "depot", "--json"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("split equally"), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["flags"][0], "equal-split-fallback");
}

#[test]
fn allocate_from_a_graph_instance() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/ride.json");
    let o = fairshare(&["allocate", "--instance", data.to_str().unwrap(), "--rule", "reroute"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 2 + 5 + 1);
}

fn csv_rows(dir: &Path) -> Vec<String> {
    fs::read_to_string(dir.join("report.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(str::to_owned)
        .collect()
}

#[test]
fn bench_defaults_cover_every_size_and_rule() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = fairshare(&["bench", "--out", out.to_str().unwrap(), "--iterations", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 7 * 5);
    assert!(rows[0].starts_with("exact,3,"));
    let report: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["iterations"], 3);
    assert_eq!(report["config"]["seed"], 0);
}

#[test]
fn bench_is_deterministic_and_flags_beat_env_beat_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"passenger_counts": [3, 5], "iterations": 2, "seed": 1, "rules": ["shapo", "depot"]}"#,
    );
    let run = |name: &str, extra: &[&str], env: &[(&str, &str)]| {
        let out = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_fairshare"));
        cmd.args(["bench", "--config", &cfg, "--no-timing", "--out", out.to_str().unwrap()])
            .args(extra)
            .env_remove("FAIRSHARE_SEED")
            .env_remove("FAIRSHARE_ITERATIONS");
        for (k, v) in env {
            cmd.env(k, v);
        }
        let o = cmd.output().unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        (
            fs::read(out.join("report.csv")).unwrap(),
            fs::read(out.join("report.json")).unwrap(),
        )
    };
    let a = run("a", &[], &[]);
    assert_eq!(a, run("b", &[], &[]));

    let env_seed = run("c", &[], &[("FAIRSHARE_SEED", "9")]);
    let flag_seed = run("d", &["--seed", "9"], &[]);
    let both = run("e", &["--seed", "9"], &[("FAIRSHARE_SEED", "4")]);
    assert_ne!(a, env_seed);
    assert_eq!(env_seed, flag_seed);
    assert_eq!(flag_seed, both);

    let json: Value = serde_json::from_slice(&run("f", &[], &[("FAIRSHARE_ITERATIONS", "1")]).1).unwrap();
    assert_eq!(json["config"]["iterations"], 1);
    assert_eq!(json["config"]["seed"], 1);
}

#[test]
fn bench_reroute_costs_more_time_than_depot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"passenger_counts": [9], "iterations": 5, "rules": ["depot", "shortcut", "reroute"]}"#,
    );
    let out = dir.path().join("out");
    let o = fairshare(&["bench", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let seconds: Vec<f64> = csv_rows(&out)
        .iter()
        .map(|r| r.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let (depot, shortcut, reroute) = (seconds[0], seconds[1], seconds[2]);
    assert!(reroute > 10.0 * depot.max(shortcut), "{seconds:?}");
}

#[test]
fn bench_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let zero = write(dir.path(), "zero.json", r#"{"iterations": 0}"#);
    assert_eq!(
        fairshare(&["bench", "--config", &zero, "--out", out.to_str().unwrap()]).status.code(),
        Some(1)
    );
    let big = write(dir.path(), "big.json", r#"{"passenger_counts": [30]}"#);
    assert_eq!(
        fairshare(&["bench", "--config", &big, "--out", out.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn verify_defaults_pass() {
    let o = fairshare(&["verify"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS"));
}

#[test]
fn verify_with_zero_trials_warns() {
    let o = fairshare(&["verify", "--trials", "0", "--json"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("vacuously"));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["failures"].as_array().unwrap().len(), 0);
}

#[test]
fn gen_families() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name).to_str().unwrap().to_owned();

    assert!(fairshare(&["gen", "--family", "line", "--size", "4", "--out", &path("line.csv")]).status.success());
    assert_eq!(
        fs::read_to_string(path("line.csv")).unwrap(),
        "u,v,weight\n0,1,1\n1,2,1\n2,3,1\n"
    );

    assert!(fairshare(&["gen", "--family", "grid", "--size", "3", "--out", &path("grid.csv")]).status.success());
    assert_eq!(fs::read_to_string(path("grid.csv")).unwrap().lines().count(), 1 + 12);

    for name in ["e1.csv", "e2.csv"] {
        let o = fairshare(&["gen", "--family", "euclidean", "--size", "100", "--seed", "7", "--out", &path(name)]);
        assert!(o.status.success());
    }
    assert_eq!(fs::read(path("e1.csv")).unwrap(), fs::read(path("e2.csv")).unwrap());

    let o = fairshare(&["gen", "--family", "hexagonal", "--size", "3", "--out", &path("x.csv")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bundled_toy_graph_is_the_default_benchmark_graph() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("toy.csv");
    fairshare(&["gen", "--family", "euclidean", "--size", "200", "--seed", "42", "--out", out.to_str().unwrap()]);
    let bundled = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy.csv")).unwrap();
    let body: String = bundled.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    assert_eq!(body, fs::read_to_string(out).unwrap());
}
