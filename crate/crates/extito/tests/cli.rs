use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use extito::report::RunManifest;
use tempfile::TempDir;

const PURE_JUMP: &str = r#"
[process]
kind = "truncated_stable"
alpha = 1.2
scale = 1.0
delta = 0.05

[experiment]
dt = [1e-2, 5e-3]
paths = 40
seed_base = 5000

[functions]
f = "tanh"
"#;

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("config.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn extito(config: Option<&Path>, out: &Path, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_extito"));
    cmd.env_remove("EXTITO_SEED_BASE").arg("--out").arg(out).arg("--quiet");
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.args(args).output().unwrap()
}

fn manifest(out: &Path) -> RunManifest {
    serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap()
}

fn report_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn pure_jump_verify_ito_is_exact() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), PURE_JUMP);
    let out = tmp.path().join("out");
    let o = extito(Some(&cfg), &out, &["verify-ito"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = report_rows(&out.join("ito.csv"));
    assert_eq!(rows.len(), 6);
    for r in rows {
        assert!(r[6].parse::<f64>().unwrap() <= 1e-12, "{r:?}");
        assert_eq!(r[7], "true");
    }
    let m = manifest(&out);
    assert_eq!(m.command, "verify-ito");
    assert!(m.results["ito"]);
    assert_eq!(m.config_hash.len(), 64);
}

#[test]
fn table_with_one_step_size_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), PURE_JUMP);
    let o = extito(Some(&cfg), &tmp.path().join("out"), &["table", "--dt", "1e-2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains(">= 2 dt"));
}

#[test]
fn unknown_key_is_named() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[process]\nkind = \"brownian\"\nsigma = 1.0\n");
    let o = extito(Some(&cfg), &tmp.path().join("out"), &["verify-ito"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigma"));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let o = extito(Some(&tmp.path().join("nope.toml")), &tmp.path().join("out"), &["simulate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn failing_check_exits_one() {
    let tmp = TempDir::new().unwrap();
    let text = "[process]\nkind = \"brownian\"\n[experiment]\ndt = [1e-2]\npaths = 40\n\
                [tolerances]\nresidual_mean_abs = 1e-300\n";
    let cfg = write_config(tmp.path(), text);
    let out = tmp.path().join("out");
    let o = extito(Some(&cfg), &out, &["verify-tanaka"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!manifest(&out).results["tanaka"]);
}

#[test]
fn simulate_is_reproducible() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), PURE_JUMP);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = extito(Some(&cfg), out, &["simulate", "--export-csv"]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for dt in ["dt_1e-2", "dt_5e-3"] {
        for f in ["paths.extp", "store.json", "paths.csv"] {
            let x = std::fs::read(a.join(dt).join(f)).unwrap();
            let y = std::fs::read(b.join(dt).join(f)).unwrap();
            assert!(x == y, "{dt}/{f} differs");
        }
    }
    let (_, paths) = extito::store::load_paths(&a.join("dt_1e-2")).unwrap();
    assert_eq!(paths.len(), 40);
    assert_eq!(paths[0].seed(), 5000);
}

#[test]
fn environment_seed_overrides_file_but_not_flag() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), PURE_JUMP);
    let out = tmp.path().join("out");
    let run = |extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_extito"))
            .env("EXTITO_SEED_BASE", "4242")
            .arg("--quiet")
            .arg("--out")
            .arg(&out)
            .arg("--config")
            .arg(&cfg)
            .args(["--paths", "5", "simulate"])
            .args(extra)
            .status()
            .unwrap()
    };
    assert!(run(&[]).success());
    assert_eq!(manifest(&out).seed_base, 4242);
    assert!(run(&["--seed", "7"]).success());
    assert_eq!(manifest(&out).seed_base, 7);
}

#[test]
fn planar_table_runs_multidim_only() {
    let tmp = TempDir::new().unwrap();
    let text = "[process]\nkind = \"diffusion_2d\"\n[experiment]\ndt = [1e-2, 5e-3]\npaths = 30\n";
    let cfg = write_config(tmp.path(), text);
    let out = tmp.path().join("out");
    let o = extito(Some(&cfg), &out, &["table"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m.results.keys().collect::<Vec<_>>(), vec!["multidim"]);
    assert!(report_rows(&out.join("table.csv")).iter().all(|r| r[0] == "multidim"));
}
