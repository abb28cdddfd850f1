use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn colt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_colt"))
        .args(args)
        .env_remove("COLT_API_TOKEN")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn example_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/colt2.toml")
}

/// Writes a small variant of the example config into `dir`.
fn small_config(dir: &Path, edit: impl FnOnce(String) -> String) -> PathBuf {
    let text = fs::read_to_string(example_config()).unwrap().replace("trials = 300", "trials = 40");
    let path = dir.join("config.toml");
    fs::write(&path, edit(text)).unwrap();
    path
}

#[test]
fn run_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path(), |t| t);
    let out = tmp.path().join("out");
    let files = ["samples.log", "report.json", "metadata.json", "table.txt"];
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let o = colt(&["run", "--config", config.to_str().unwrap(), "--seed", "9", "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        assert!(stdout(&o).contains("Course Alteration Rate"));
        snapshots.push(files.map(|f| fs::read(out.join(f)).unwrap()));
        fs::remove_dir_all(&out).unwrap();
    }
    for (i, file) in files.iter().enumerate() {
        assert!(!snapshots[0][i].is_empty());
        assert_eq!(snapshots[0][i], snapshots[1][i], "{file}");
    }
    let report: serde_json::Value = serde_json::from_slice(&snapshots[0][1]).unwrap();
    assert_eq!(report["metadata"]["config"]["search"]["seed"], 9);
    assert_eq!(report["report"]["samples"].as_u64().unwrap() as usize, report["report"]["curve"].as_array().unwrap().len());
}

#[test]
fn unknown_root_model_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path(), |t| t.replace("seed = 42", "seed = 42\nroot_model = \"gpt-9\""));
    let o = colt(&["run", "--config", config.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gpt-9"));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn unknown_keys_are_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path(), |t| t.replace("[policy]", "[policy]\ntemperature = 0.3"));
    assert_eq!(colt(&["run", "--config", config.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn remote_backend_without_token_fails_before_search() {
    let tmp = tempfile::tempdir().unwrap();
    let config = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/remote.toml");
    let out = tmp.path().join("o");
    let o = colt(&["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("COLT_API_TOKEN"));
    assert!(!out.exists());
}

#[test]
fn unreachable_remote_backend_exits_as_unavailable() {
    let tmp = tempfile::tempdir().unwrap();
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let config = small_config(tmp.path(), |t| {
        t.replace(
            r#"backend = { kind = "scripted", greedy_prob = 0.9, error_rate = 0.02, self_bias = 0.5 }"#,
            &format!(r#"backend = {{ kind = "remote", endpoint = "http://127.0.0.1:{port}/v1", model_name = "m", timeout_secs = 2 }}"#),
        )
    });
    let out = tmp.path().join("o");
    let o = Command::new(env!("CARGO_BIN_EXE_colt"))
        .args(["run", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("COLT_API_TOKEN", "t")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    // Partial outputs are still written.
    assert!(out.join("samples.log").exists());
}

#[test]
fn oracle_subcommand() {
    let o = colt(&["oracle", "--horizon", "4"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("best_speedup: 36.4\n"), "{text}");
    assert!(text.contains("best_trace: [Parallel, Tile(8), Vectorize, CacheWrite]"));

    let o = colt(&["oracle", "--horizon", "0"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("best_speedup: 1\n"));
    assert!(stdout(&o).contains("best_trace: []"));

    assert_eq!(colt(&["oracle", "--horizon", "9"]).status.code(), Some(5));
}

#[test]
fn sweep_writes_one_directory_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_config(tmp.path(), |t| t);
    let out = tmp.path().join("sweep");
    let o = colt(&["sweep", "--config", config.to_str().unwrap(), "--seeds", "1,2,3", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for (i, seed) in [1, 2, 3].iter().enumerate() {
        assert!(out.join(format!("run-{i:02}-seed-{seed}")).join("table.txt").exists());
    }
    let agg: serde_json::Value = serde_json::from_slice(&fs::read(out.join("sweep_aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["succeeded"], 3);
    assert!(out.join("sweep_curve.csv").exists());
}

#[test]
fn missing_config_file_is_reported() {
    let o = colt(&["run", "--config", "/nonexistent/colt.toml"]);
    assert_eq!(o.status.code(), Some(2));
}
