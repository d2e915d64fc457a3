use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chemotaxis"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn smoke_with(dir: &Path, from: &str, to: &str) -> PathBuf {
    let src = fs::read_to_string(configs().join("smoke.toml")).unwrap();
    assert!(src.contains(from));
    let path = dir.join("edited.toml");
    fs::write(&path, src.replace(from, to)).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_smoke_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["--output-dir", s(&out), "run", s(&configs().join("smoke.toml"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for f in ["snapshots.csv", "record.json", "report.json", "summary.txt"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let text = stdout(&o);
    assert!(text.contains("H2: satisfied"), "{text}");
    assert!(text.contains("classification: converged") || text.contains("classification: persistent"));
    let csv = fs::read_to_string(out.join("snapshots.csv")).unwrap();
    assert!(csv.starts_with("t,mass,u_min,u_max,v_min,v_max,grad_v_max,lap_v_max\n"));
}

#[test]
fn end_before_start_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_with(dir.path(), "end = 50.0", "end = -1.0");
    let o = run(&["--output-dir", s(&dir.path().join("o")), "run", s(&cfg)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("time.end"), "{}", stderr(&o));
}

#[test]
fn malformed_config_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_with(dir.path(), "chi = 1.0", "chi = one");
    let o = run(&["check", s(&cfg)]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("line"), "{}", stderr(&o));
}

#[test]
fn tau_two_runs_but_fails_check() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = smoke_with(dir.path(), "tau = 1.0", "tau = 2.0");
    let o = run(&["--output-dir", s(&dir.path().join("o")), "run", s(&cfg)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("requires tau = 1"));
    let o = run(&["check", s(&cfg), "--hypothesis", "h2"]);
    assert_eq!(code(&o), 1);
    assert!(stdout(&o).contains("tau = 1"));
}

#[test]
fn check_smoke_passes() {
    let o = run(&["check", s(&configs().join("smoke.toml"))]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["report"]["satisfied"], true);
    assert!(v["report"]["margin_local"].as_f64().unwrap() > 0.0);
    assert!(v["bounds"]["m_tilde_1"].as_f64().unwrap() > 0.0);
}

#[test]
fn h1_without_constants_is_config_error() {
    let o = run(&["check", s(&configs().join("smoke.toml")), "--hypothesis", "h1"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("c_gamma"));
}

#[test]
fn sweep_output_independent_of_parallelism() {
    let dir = tempfile::tempdir().unwrap();
    let spec = configs().join("sweep.toml");
    let mut tables = Vec::new();
    for p in ["1", "8"] {
        let out = dir.path().join(format!("p{p}"));
        let o = run(&["--output-dir", s(&out), "sweep", s(&spec), "--parallelism", p]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        tables.push(fs::read(out.join("phase.csv")).unwrap());
        assert!(out.join("run_0008.json").exists());
    }
    assert_eq!(tables[0], tables[1]);
    assert_eq!(String::from_utf8_lossy(&tables[0]).lines().count(), 10);
}

#[test]
fn sweep_without_axes_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(configs().join("smoke.toml"), dir.path().join("smoke.toml")).unwrap();
    let spec = dir.path().join("sweep.toml");
    fs::write(&spec, "base = \"smoke.toml\"\n").unwrap();
    let o = run(&["sweep", s(&spec)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn pullback_singleton_and_bad_depths() {
    let cfg = configs().join("periodic.toml");
    let o = run(&["pullback", s(&cfg), "--depths", "5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(stdout(&o).contains("eta_entire"));
    let o = run(&["pullback", s(&cfg), "--depths", "10,5"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn pullback_writes_result() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "--output-dir",
        s(dir.path()),
        "pullback",
        s(&configs().join("periodic.toml")),
        "--depths",
        "5,10,20",
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("pullback.json")).unwrap()).unwrap();
    assert_eq!(v["cauchy_gaps"].as_array().unwrap().len(), 2);
}

#[test]
fn seed_override_changes_random_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("nonlocal_2d.toml");
    let mut hashes = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(seed);
        let src = fs::read_to_string(&cfg).unwrap().replace("end = 20.0", "end = 0.5");
        let short = dir.path().join(format!("c{seed}.toml"));
        fs::write(&short, src).unwrap();
        let o = run(&["--output-dir", s(&out), "--seed", seed, "run", s(&short)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        let rec: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("record.json")).unwrap()).unwrap();
        hashes.push(rec["config_hash"].as_str().unwrap().to_string());
    }
    assert_ne!(hashes[0], hashes[1]);
}

#[test]
fn oracle_passes_then_detects_tampering_then_regenerates() {
    let o = run(&["oracle"]);
    assert_eq!(code(&o), 0, "{}{}", stdout(&o), stderr(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 6);

    let dir = tempfile::tempdir().unwrap();
    let shipped = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/goldens/oracle.json");
    let mut goldens: serde_json::Value = serde_json::from_str(&fs::read_to_string(shipped).unwrap()).unwrap();
    goldens[0]["value"] = serde_json::json!(0.5);
    let name = goldens[0]["case"].as_str().unwrap().to_string();
    let tampered = dir.path().join("g.json");
    fs::write(&tampered, serde_json::to_string(&goldens).unwrap()).unwrap();

    let o = run(&["oracle", "--goldens", s(&tampered)]);
    assert_eq!(code(&o), 1);
    let fail: Vec<String> = stdout(&o).lines().filter(|l| l.starts_with("FAIL")).map(String::from).collect();
    assert_eq!(fail.len(), 1);
    assert!(fail[0].contains(&name), "{fail:?}");

    let o = run(&["oracle", "--regenerate", "--goldens", s(&tampered)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains(&format!("golden changed: {name}")), "{}", stdout(&o));
    let o = run(&["oracle", "--goldens", s(&tampered)]);
    assert_eq!(code(&o), 0);
}
