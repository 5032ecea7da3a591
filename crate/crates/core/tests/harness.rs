use std::process::Command;

use atomic_mimo::crlb::linear_model_nmse;
use atomic_mimo::detect::DetectorKind;
use atomic_mimo::harness::{run_sweep, Series, SweepAxis, SweepSpec, CSV_HEADER};
use atomic_mimo::instance::Instance;
use atomic_mimo::scenario::{generate_trial, ScenarioConfig};

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_atomic-mimo"))
}

#[test]
fn zf_nmse_tracks_linear_model() {
    let cfg = ScenarioConfig::new(36, 3, 16, 6.0, 12.0, 41);
    let trials = 20_000;
    let spec = SweepSpec::new(SweepAxis::SnrDb, vec![6.0], cfg.clone(), vec![Series::Detector(DetectorKind::ZfKnown)], trials);
    let row = &run_sweep(&spec).unwrap()[0];
    let oracle: f64 = (0..trials)
        .map(|t| {
            let sc = generate_trial(&cfg, t).unwrap();
            linear_model_nmse(&sc.channel, sc.sigma2).unwrap()
        })
        .sum::<f64>()
        / trials as f64;
    let nmse = row.nmse.unwrap();
    assert!((nmse / oracle - 1.0).abs() < 0.05, "{nmse} vs {oracle}");
}

#[test]
fn em_never_trails_gs() {
    let spec = SweepSpec::new(
        SweepAxis::SnrDb,
        vec![0.0, 9.0],
        ScenarioConfig::new(36, 3, 16, 0.0, 12.0, 43),
        vec![Series::Detector(DetectorKind::EmGs), Series::Detector(DetectorKind::BiasedGs)],
        20_000,
    );
    let rows = run_sweep(&spec).unwrap();
    for pair in rows.chunks(2) {
        let (gs, em) = (&pair[0], &pair[1]);
        assert_eq!(gs.series.name(), "biased-gs");
        assert!(em.nmse_db().unwrap() <= gs.nmse_db().unwrap() + 0.2, "snr {}", em.snr_db);
    }
}

#[test]
fn sweep_command_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rsr.csv");
    let status = cli()
        .args(["sweep", "--axis", "rsr", "--values", "0:10:20", "--snr-db", "-2", "--n", "8", "--k", "2"])
        .args(["--mod", "4qam", "--detectors", "zf-known,crlb,em-gs", "--trials", "30", "--seed", "5"])
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 1 + 3 * 3);
    assert!(lines[1].starts_with("crlb,-2,0,8,2,4qam,30,"));
    assert!(lines[9].starts_with("zf-known,-2,20,"));

    // same seed, different thread count: identical bytes
    let again = cli()
        .args(["sweep", "--axis", "rsr", "--values", "0,10,20", "--snr-db", "-2", "--n", "8", "--k", "2"])
        .args(["--mod", "4qam", "--detectors", "em-gs,zf-known,crlb", "--trials", "30", "--seed", "5", "--threads", "3"])
        .output()
        .unwrap();
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn detect_command_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    let status = cli()
        .args(["instance", "--n", "12", "--k", "2", "--mod", "4qam", "--snr-db", "15", "--seed", "3", "--out"])
        .arg(&path)
        .status()
        .unwrap();
    assert!(status.success());
    let inst = Instance::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(inst.a.len(), 2);

    for det in ["em-gs", "biased-gs", "zf-known", "exhaustive-ml", "exhaustive-ls"] {
        let out = cli().args(["detect", "--detector", det, "--t0", "20", "--input"]).arg(&path).output().unwrap();
        assert!(out.status.success(), "{det}: {}", String::from_utf8_lossy(&out.stderr));
        let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert_eq!(v["s_soft"].as_array().unwrap().len(), 2);
        assert_eq!(v["bits"].as_str().unwrap().len(), 4);
        let trace = v["objective_trace"].as_array().unwrap().len() as u64;
        assert_eq!(trace, v["iterations"].as_u64().unwrap() + 1);
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = cli().args(["sweep", "--axis", "snr", "--values", "0", "--n", "2", "--k", "3"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    let unknown = cli().args(["sweep", "--axis", "snr", "--values", "0", "--detectors", "magic"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));

    // rank-deficient channel: the Gram matrix cannot be factored
    let path = dir.path().join("singular.json");
    std::fs::write(&path, r#"{"A": [[[1,0],[1,0],[1,0]], [[2,0],[2,0],[2,0]]], "b": [[1,0],[1,0],[1,0]], "z": [1,2,3], "sigma2": 1}"#)
        .unwrap();
    let out = cli().args(["detect", "--detector", "biased-gs", "--input"]).arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("condition"));

    let missing = cli().args(["detect", "--input"]).arg(dir.path().join("none.json")).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn crlb_and_selftest_commands() {
    let out = cli().args(["crlb", "--snr-db", "6", "--n", "10", "--k", "2", "--trials", "20"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "crlb");
    assert!(row[7].parse::<f64>().unwrap() > 0.0);

    let st = cli().args(["selftest", "--instances", "20"]).output().unwrap();
    assert!(st.status.success());
    assert!(String::from_utf8(st.stdout).unwrap().contains("0 failed"));
}
