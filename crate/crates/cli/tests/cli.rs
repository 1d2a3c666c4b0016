//! End-to-end checks of the binary: exit codes, output files, determinism.

use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spinroll"))
}

fn temp_dir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spinroll-cli-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const QUICK_CONFIG: &str = r#"
[sphere]
radius = 0.5

[goal]
u_s = 3.0
v_s = 3.2
u_o = -2.3707963267948966
v_o = 0.8
psi = 0.8

[time]
t-f = 2.0

[integrator]
rtol = 1e-6
atol = 1e-9
min-samples = 200

[tuning]
zeta_q = -0.35
r_q = 0.02
"#;

#[test]
fn malformed_config_exits_one_and_names_field() {
    let dir = temp_dir("badcfg");
    let cfg = dir.join("bad.toml");
    write(&cfg, &QUICK_CONFIG.replace("radius = 0.5", "radius = -1.0"));
    let out = bin()
        .args(["plan", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("sphere.radius"), "{stderr}");
}

#[test]
fn infeasible_goal_exits_two_with_distance() {
    let dir = temp_dir("infeasible");
    let cfg = dir.join("cfg.toml");
    // Displacement 1.2 m: below the minimum distance and below the
    // circumference waiver.
    write(
        &cfg,
        &QUICK_CONFIG.replace("u_s = 3.0\nv_s = 3.2", "u_s = 0.8\nv_s = 0.9"),
    );
    let out = bin()
        .args(["plan", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("InfeasibleGoal"), "{stdout}");
    assert!(stdout.contains("minimum distance"), "{stdout}");
    let report = std::fs::read_to_string(dir.join("out/report.json")).unwrap();
    assert!(report.contains("InfeasibleGoal"));
}

#[test]
fn simulate_writes_outputs_and_is_deterministic() {
    let dir = temp_dir("simulate");
    let cfg = dir.join("cfg.toml");
    write(&cfg, QUICK_CONFIG);
    for sub in ["a", "b"] {
        let out = bin()
            .args(["simulate", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.join(sub))
            .args(["--seedless"])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = std::fs::read(dir.join("a/trajectory.csv")).unwrap();
    let b = std::fs::read(dir.join("b/trajectory.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b);

    let text = String::from_utf8(a).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(
        header,
        "t,s_plane,s_sphere,u_s,v_s,u_o,v_o,psi,x_o,y_o,z_o,delta,alpha_s,beta_s,gamma_s,theta,phi,psi_q"
    );
    assert!(dir.join("a/plane_path.csv").exists());
    assert!(dir.join("a/sphere_path.csv").exists());
    assert!(dir.join("a/summary.json").exists());
}

#[test]
fn distance_prints_report() {
    let dir = temp_dir("distance");
    let cfg = dir.join("cfg.toml");
    write(&cfg, QUICK_CONFIG);
    let out = bin().args(["distance", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    let report: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let d = report["d"].as_f64().unwrap();
    assert!((d - 2.15).abs() <= 0.05, "d = {d}");
    assert_eq!(report["feasible"], serde_json::Value::Bool(true));
}

#[test]
fn distance_grid_emits_table_with_missing_cells() {
    let dir = temp_dir("grid");
    let cfg = dir.join("cfg.toml");
    write(&cfg, QUICK_CONFIG);
    let out = bin()
        .args(["distance", "--config"])
        .arg(&cfg)
        .args(["--grid", "--grid-points", "41"])
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let table = std::fs::read_to_string(dir.join("distance_surface.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "u_goal,v_goal,spin_goal,d_over_r");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 41 * 3);
    let finite = rows.iter().filter(|r| !r.ends_with(',')).count();
    assert!(finite > rows.len() / 2, "finite {finite}");
    assert!(finite < rows.len(), "expected some missing cells");
}

#[test]
fn batch_is_deterministic_across_parallelism() {
    let dir = temp_dir("batch");
    write(&dir.join("one.toml"), QUICK_CONFIG);
    write(
        &dir.join("two.toml"),
        &QUICK_CONFIG.replace("zeta_q = -0.35", "zeta_q = -0.40"),
    );
    write(
        &dir.join("scenarios.toml"),
        r#"
[[scenarios]]
name = "one"
config = "one.toml"

[[scenarios]]
name = "two"
config = "two.toml"
"#,
    );
    for (sub, parallel) in [("serial", "1"), ("parallel", "8")] {
        let out = bin()
            .args(["batch", "--scenarios"])
            .arg(dir.join("scenarios.toml"))
            .arg("--out")
            .arg(dir.join(sub))
            .args(["--parallel", parallel])
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let read = |p: PathBuf| std::fs::read(p).unwrap();
    assert_eq!(read(dir.join("serial/summary.csv")), read(dir.join("parallel/summary.csv")));
    for name in ["one", "two"] {
        assert_eq!(
            read(dir.join(format!("serial/{name}/trajectory.csv"))),
            read(dir.join(format!("parallel/{name}/trajectory.csv"))),
        );
    }
}

#[test]
fn empty_scenario_list_succeeds() {
    let dir = temp_dir("empty");
    write(&dir.join("scenarios.toml"), "scenarios = []\n");
    let out = bin()
        .args(["batch", "--scenarios"])
        .arg(dir.join("scenarios.toml"))
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let summary = std::fs::read_to_string(dir.join("out/summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1);
}

#[test]
fn simulate_timescale_override_scales_velocity() {
    let dir = temp_dir("override");
    let cfg = dir.join("cfg.toml");
    write(&cfg, QUICK_CONFIG);
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(["--t-const", "10.0", "--t-f", "20.0"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("out/summary.json")).unwrap()).unwrap();
    assert!(summary["plane_path_length"].as_f64().unwrap() > 0.0);
}
