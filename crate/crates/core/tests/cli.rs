use std::path::Path;
use std::process::Command;

fn blochkit(args: &[&str], out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_blochkit"))
        .args(args)
        .arg("--output")
        .arg(out)
        .env_remove("BLOCHKIT_WORKERS")
        .output()
        .unwrap()
}

#[test]
fn info_reports_the_block_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let out = blochkit(&["info", "--preset", "fig3-zero"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let info: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("info.json")).unwrap()).unwrap();
    assert_eq!(info["dimension"], "1440");
    assert_eq!(info["basis"]["dim"], 1440);
    assert!(dir.path().join("config.expanded.json").exists());
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = blochkit::config::preset("toy-decoupled").unwrap().to_json().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_str(&text).unwrap();
    cfg["model"]["truncation"]["kappa_shel"] = 2.into();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let out = blochkit(&["info", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("kappa_shel"));
}

#[test]
fn missing_configuration_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = blochkit(&["bands"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn zero_workers_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = blochkit(&["info", "--preset", "fig1", "--workers", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bands_do_not_depend_on_the_worker_count() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(blochkit(&["bands", "--preset", "toy-decoupled", "--workers", "1"], &a).status.success());
    assert!(blochkit(&["bands", "--preset", "toy-decoupled", "--workers", "3"], &b).status.success());
    let (x, y) = (std::fs::read(a.join("bands.csv")).unwrap(), std::fs::read(b.join("bands.csv")).unwrap());
    assert!(!x.is_empty());
    assert_eq!(x, y);
}

#[test]
fn dielectric_writes_both_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = blochkit(&["dielectric", "--preset", "toy-decoupled"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let eps = std::fs::read_to_string(dir.path().join("dielectric.csv")).unwrap();
    let rows = eps.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 592);
    assert!(dir.path().join("transitions.csv").exists());
}
