//! The `gdp-sim` command line: subcommands, config files and error exits.

use std::process::Command;

use gdp_core::milp::read_mps;

fn gdp_sim() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gdp-sim"))
}

#[test]
fn simulate_rtc_writes_the_default_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.csv");
    let status = gdp_sim()
        .args(["simulate", "--mode", "rtc", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 481);
    assert!(text.starts_with("t,minutes,T_indoor,r,s,u_watts,slack,energy_kwh_cum\n"));
}

#[test]
fn config_file_supplies_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sim.cfg");
    let out = dir.path().join("d.csv");
    std::fs::write(
        &cfg,
        format!(
            "# short receding-horizon run\nmode = dmpc\nN = 4\nM = 2\nvariant = bigm\nperiods = 100\nout = {}\nx0 = 20.5, 20.5, 20.5, 20.5\n",
            out.display()
        ),
    )
    .unwrap();
    let status = gdp_sim()
        .args(["simulate", "--periods", "12", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 13);
    assert!(text.lines().nth(1).unwrap().starts_with("0,0.0,20.5,"));
}

#[test]
fn export_writes_a_readable_mps_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("model.mps");
    let status = gdp_sim()
        .args(["export", "--variant", "hull", "--N", "10", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let problem = read_mps(&std::fs::read_to_string(&out).unwrap()).unwrap();
    // One binary per mode and prediction period.
    assert_eq!(problem.num_integer(), 4 * 10);
}

#[test]
fn small_gap_study_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str| {
        let out = dir.path().join(name);
        let status = gdp_sim()
            .env("SIM_THREADS", threads)
            .args([
                "gapstudy",
                "--seed",
                "3",
                "--instances",
                "3",
                "--horizons",
                "8,12",
                "--optimal-node-limit",
                "60",
                "--out",
            ])
            .arg(&out)
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(&out).unwrap()
    };
    let a = run("a.json", "1");
    let b = run("b.json", "1");
    let c = run("c.json", "2");
    assert_eq!(a, b);
    assert_eq!(a, c);
    let report: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(report["config"]["seed"], 3);
    assert_eq!(report["instances"].as_array().unwrap().len(), 6);
    assert_eq!(report["aggregate"].as_array().unwrap().len(), 4);
}

#[test]
fn selftest_passes() {
    let out = gdp_sim().arg("selftest").output().unwrap();
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{stdout}");
    assert!(stdout.contains("oracle equivalence: pass"));
    assert!(stdout.contains("hull tightness:     pass"));
}

#[test]
fn bad_invocations_fail_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<String>> = vec![
        vec!["simulate".into(), "--bogus".into()],
        vec!["simulate".into(), "--mode".into(), "fast".into()],
        vec!["frobnicate".into()],
        vec![
            "simulate".into(),
            "--config".into(),
            dir.path().join("missing.cfg").display().to_string(),
        ],
        vec![
            "simulate".into(),
            "--periods".into(),
            "5".into(),
            "--out".into(),
            "/nonexistent-dir/t.csv".into(),
        ],
        vec![
            "export".into(),
            "--out".into(),
            "/nonexistent-dir/m.mps".into(),
        ],
    ];
    for args in cases {
        let out = gdp_sim().args(&args).output().unwrap();
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(!out.stderr.is_empty(), "{args:?} printed no message");
    }

    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "mode = rtc\ncolour = blue\n").unwrap();
    let out = gdp_sim().args(["simulate", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("colour"));
}
