use std::path::Path;
use std::process::{Command, Output};

fn smpx(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smpx")).current_dir(dir).args(args).output().expect("spawn smpx")
}

fn write_config(dir: &Path, extra: &str) {
    let text = format!(
        r#"t = 400
{extra}
[instance]
builtin = "eig_min"
seed = 3
params = {{ n = 4, blocks = [2, 2] }}
[seeds]
base = 11
count = 3
[output]
csv = "out.csv"
json = "out.json"
"#
    );
    std::fs::write(dir.join("cfg.toml"), text).unwrap();
}

#[test]
fn run_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "");
    let first = smpx(dir.path(), &["run", "--config", "cfg.toml"]);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    let csv = std::fs::read(dir.path().join("out.csv")).unwrap();
    let json = std::fs::read(dir.path().join("out.json")).unwrap();
    let second = Command::new(env!("CARGO_BIN_EXE_smpx"))
        .current_dir(dir.path())
        .env("SMPX_THREADS", "1")
        .args(["run", "--config", "cfg.toml"])
        .output()
        .unwrap();
    assert!(second.status.success());
    assert_eq!(csv, std::fs::read(dir.path().join("out.csv")).unwrap());
    assert_eq!(json, std::fs::read(dir.path().join("out.json")).unwrap());
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("seed,t_checkpoint,err_nash,err_vi_probe,gamma,oracle_calls,wall_ms\n"));
    let sidecar: serde_json::Value = serde_json::from_slice(&json).unwrap();
    for key in ["L", "M", "mu", "omega", "A", "B"] {
        assert!(sidecar["constants"][key].is_number(), "missing constant {key}");
    }
    assert!(sidecar["K0_star"].is_number() && sidecar["K1_star"].is_number());
    assert_eq!(sidecar["version"], smpx::VERSION);
}

#[test]
fn generate_then_run_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = smpx(dir.path(), &["generate", "--kind", "bilinear_simplex_spectahedron", "--n", "3", "--blocks", "2,2", "-o", "i.json"]);
    assert!(g.status.success());
    let r = smpx(dir.path(), &["run", "--instance", "i.json", "--t", "50", "--seeds", "2", "--csv", "r.csv"]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let s = smpx(dir.path(), &["slope", "r.csv", "--from", "4"]);
    assert!(s.status.success());
    assert!(String::from_utf8_lossy(&s.stdout).starts_with("slope "));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Configuration errors.
    assert_eq!(smpx(dir.path(), &["run", "--builtin", "eig_min", "--t", "0"]).status.code(), Some(2));
    assert_eq!(smpx(dir.path(), &["generate", "--kind", "nope"]).status.code(), Some(2));
    write_config(dir.path(), "bogus_field = 1");
    assert_eq!(smpx(dir.path(), &["run", "--config", "cfg.toml"]).status.code(), Some(2));
    let threads = Command::new(env!("CARGO_BIN_EXE_smpx"))
        .current_dir(dir.path())
        .env("SMPX_THREADS", "zero")
        .args(["run", "--builtin", "eig_min", "--t", "5", "--seeds", "1"])
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
    // Acceptance failure: an impossible slope window.
    write_config(dir.path(), "");
    let v = smpx(dir.path(), &["verify", "--config", "cfg.toml", "--slope-min", "-5", "--slope-max", "-4", "--slope-from", "8"]);
    assert_eq!(v.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&v.stdout).contains("FAIL"));
    // Numerical failure: a degenerate (all-zero) error series.
    std::fs::write(
        dir.path().join("zero.csv"),
        "seed,t_checkpoint,err_nash,err_vi_probe,gamma,oracle_calls,wall_ms\n0,1,0,,0.1,2,\n0,2,0,,0.1,4,\n0,4,0,,0.1,8,\n0,8,0,,0.1,16,\n",
    )
    .unwrap();
    assert_eq!(smpx(dir.path(), &["slope", "zero.csv"]).status.code(), Some(3));
}
