//! End-to-end checks of the `pf4` binary: subcommand plumbing, exit
//! codes, and the files a run leaves behind.

use std::path::PathBuf;
use std::process::Command;

fn pf4() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pf4"))
}

#[test]
fn presets_lists_all_benchmarks() {
    let out = pf4().arg("presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("beam_3pb_symmetric"));
    assert!(text.contains("l_panel"));
    assert!(text.contains("l_panel_l0_2.5"));
    assert!(text.contains("l_panel_l0_5.0"));
    assert!(text.contains("l_panel_l0_10.0"));
    for h in [80, 160, 320] {
        for a in ["0", "0.3125", "0.625"] {
            assert!(
                text.contains(&format!("beam_3pb_mixed_h{h}_a{a}")),
                "missing mixed preset h{h} a{a}"
            );
        }
    }
}

#[test]
fn presets_emit_round_trips() {
    let out = pf4().args(["presets", "--emit", "beam_3pb_symmetric"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["material"]["e0"], serde_json::json!(20000.0));
    assert_eq!(doc["material"]["l0"], serde_json::json!(2.5));
}

#[test]
fn unknown_subcommand_exits_nonzero() {
    let out = pf4().arg("frobnicate").output().unwrap();
    assert!(!out.status.success());
}

#[test]
fn run_with_invalid_l0_exits_one_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = pf4()
        .args([
            "run",
            "--preset",
            "beam_3pb_symmetric",
            "--override",
            "material.l0=-2.5",
            "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("material.l0"), "stderr: {err}");
}

#[test]
fn oracle_subcommand_emits_profile_and_gamma() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("profile.csv");
    let out = pf4()
        .args(["oracle1d", "--order", "second", "--chi", "2.0", "--l0", "2.5", "--out"])
        .arg(&csv)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("gamma = 1.0000"), "stdout: {stdout}");
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("x_mm,phi,dphi,d2phi\n"));
    assert!(text.lines().count() > 100);
}

#[test]
fn run_produces_curve_and_snapshots() {
    // a fast custom config: tiny elastic strip, a handful of steps
    let config = serde_json::json!({
        "name": "strip",
        "geometry": {
            "lx": 10.0,
            "ly": 2.0,
            "clamps": [
                {"side": "left", "range": [0.0, 2.0], "components": "x"},
                {"side": "bottom", "range": [0.0, 10.0], "components": "y"}
            ],
            "driven": [
                {"at": [10.0, 1.0], "component": "x", "direction": 1.0}
            ]
        },
        "material": {
            "e0": 20000.0, "nu": 0.2, "gc": 0.113, "ft": 2.4, "l0": 1.0,
            "softening": "cornelissen", "order": "fourth",
            "stress_state": "plane_stress", "thickness": 1.0
        },
        "mesh": {"degree": 2, "h_max": [1.0, 1.0]},
        "schedule": {"du_mm": 1e-4, "stop": {"type": "steps", "count": 3}},
        "output": {"snapshot_interval": 2, "dir": "unused", "sample_per_element": 2}
    });
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("strip.json");
    std::fs::write(&cfg_path, config.to_string()).unwrap();
    let out_dir: PathBuf = dir.path().join("results");
    let out = pf4()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let curve = std::fs::read_to_string(out_dir.join("curve.csv")).unwrap();
    assert!(curve.starts_with("step,applied_mm,reaction_N,cmod_mm,iters,status\n"));
    assert_eq!(curve.lines().count(), 4); // header + 3 steps
    assert!(curve.contains(",converged"));
    assert!(out_dir.join("snapshot_000000.vtk").exists());
    assert!(out_dir.join("snapshot_000002.vtk").exists());
    assert!(out_dir.join("snapshot_000003.vtk").exists()); // final state
    assert!(out_dir.join("resolved_config.json").exists());

    // determinism across identical invocations
    let out_dir2: PathBuf = dir.path().join("results2");
    let out2 = pf4()
        .args(["run", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out_dir2)
        .output()
        .unwrap();
    assert!(out2.status.success());
    let curve2 = std::fs::read_to_string(out_dir2.join("curve.csv")).unwrap();
    assert_eq!(curve, curve2);
}
