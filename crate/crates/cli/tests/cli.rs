use std::fs;
use std::path::Path;
use std::process::Command;

use ffnt_cli::config::{ScenarioConfig, DEFAULT_CONFIG};
use ffnt_cli::{cmd_compare, cmd_run, cmd_verify, Overrides, VerifyOptions};

const HEADER: &str = "t,eta1,eta2,y_d,xi1,u,w2,p_hat2,e_F2,s_n2,delta1,delta2,omega_norm2";

fn ffnt(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_ffnt"))
        .args(args)
        .output()
        .expect("spawn");
    (
        out.status.code().expect("exit code"),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn short(dir: &Path) -> Overrides {
    Overrides {
        t_final: Some(2.0),
        out_dir: Some(dir.to_path_buf()),
        ..Overrides::default()
    }
}

fn write_config(dir: &Path, edit: impl FnOnce(&mut serde_json::Value)) -> std::path::PathBuf {
    let mut v: serde_json::Value = serde_json::from_str(DEFAULT_CONFIG).unwrap();
    edit(&mut v);
    let p = dir.join("scenario.json");
    fs::write(&p, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    p
}

#[test]
fn run_writes_trace_and_plots() {
    let tmp = tempfile::tempdir().unwrap();
    let mut log = Vec::new();
    cmd_run(None, &short(tmp.path()), &mut log).unwrap();
    for f in ["trace.csv", "tracking.svg", "approx.svg", "switch.svg"] {
        assert!(tmp.path().join(f).is_file(), "{f}");
    }
    let mut rdr = csv::Reader::from_path(tmp.path().join("trace.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header.join(","), HEADER);
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec.unwrap();
        assert_eq!(rec.len(), 13);
        for field in rec.iter() {
            assert!(field.parse::<f64>().unwrap().is_finite());
        }
        rows += 1;
    }
    assert_eq!(rows, 2001);
    let text = String::from_utf8(log).unwrap();
    assert!(text.contains("rms_tracking="), "{text}");
}

#[test]
fn no_plots_writes_only_the_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let o = Overrides {
        no_plots: true,
        ..short(tmp.path())
    };
    cmd_run(None, &o, &mut Vec::new()).unwrap();
    let names: Vec<_> = fs::read_dir(tmp.path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(names, vec!["trace.csv"]);
}

#[test]
fn log_every_thins_the_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |v| v["log_every"] = 10.into());
    let out = tmp.path().join("out");
    cmd_run(Some(&cfg), &short(&out), &mut Vec::new()).unwrap();
    let rows = csv::Reader::from_path(out.join("trace.csv"))
        .unwrap()
        .records()
        .count();
    assert_eq!(rows, 201);
}

#[test]
fn runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    cmd_run(None, &short(&a), &mut Vec::new()).unwrap();
    cmd_run(None, &short(&b), &mut Vec::new()).unwrap();
    for f in ["trace.csv", "tracking.svg", "approx.svg", "switch.svg"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn invalid_exponent_exits_2_and_names_constraint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |v| v["gains"]["m_c"] = 0.5.into());
    let (code, _, err) = ffnt(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(err.contains("(0.5, 1)"), "{err}");
    assert!(!tmp.path().join("trace.csv").exists());
}

#[test]
fn bad_flag_values_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().to_str().unwrap();
    let (code, _, err) = ffnt(&["run", "--dt", "-1", "--out-dir", dir]);
    assert_eq!(code, 2, "{err}");
    let (code, _, err) = ffnt(&["run", "--variant", "pid", "--out-dir", dir]);
    assert_eq!(code, 2);
    assert!(err.contains("developed-without-composite"), "{err}");
    let (code, _, _) = ffnt(&["compare", "--variant", "developed", "--out-dir", dir]);
    assert_eq!(code, 2);
    let (code, _, _) = ffnt(&["run", "--config", "/nonexistent/scenario.json"]);
    assert_eq!(code, 2);
}

#[test]
fn divergence_exits_3_and_keeps_prefix() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |v| {
        v["initial_state"] = serde_json::json!([3.0, 0.0])
    });
    let out = tmp.path().join("out");
    let (code, _, err) = ffnt(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--t-final",
        "1",
    ]);
    assert_eq!(code, 3);
    assert!(err.contains("aborted at t ="), "{err}");
    let rows = csv::Reader::from_path(out.join("trace.csv"))
        .unwrap()
        .records()
        .count();
    assert!(rows > 0 && rows < 1001, "{rows}");
}

#[test]
fn compare_tabulates_all_variants() {
    let tmp = tempfile::tempdir().unwrap();
    let mut log = Vec::new();
    cmd_compare(None, &short(tmp.path()), &[], &mut log).unwrap();
    let mut rdr = csv::Reader::from_path(tmp.path().join("comparison.csv")).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(
        header,
        [
            "variant",
            "status",
            "rms_tracking",
            "rms_approx_error[1,2]",
            "settle_time",
            "switch_duty[1,2]"
        ]
    );
    let tags: Vec<String> = rdr.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(
        tags,
        ["developed", "developed-without-composite", "fse-rbfnn-cfb"]
    );
    let table = fs::read_to_string(tmp.path().join("comparison.txt")).unwrap();
    assert_eq!(table, String::from_utf8(log).unwrap());
    assert_eq!(table.lines().count(), 4);
}

#[test]
fn compare_subset_in_given_order() {
    let tmp = tempfile::tempdir().unwrap();
    let vs = ["fse-rbfnn-cfb".to_string(), "developed".to_string()];
    cmd_compare(None, &short(tmp.path()), &vs, &mut Vec::new()).unwrap();
    let tags: Vec<String> = csv::Reader::from_path(tmp.path().join("comparison.csv"))
        .unwrap()
        .records()
        .map(|r| r.unwrap()[0].to_string())
        .collect();
    assert_eq!(tags, vs);
}

#[test]
fn compare_marks_failed_rows_and_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), |v| {
        v["initial_state"] = serde_json::json!([3.0, 0.0])
    });
    let out = tmp.path().join("out");
    let err = cmd_compare(
        Some(&cfg),
        &Overrides {
            t_final: Some(0.5),
            out_dir: Some(out.clone()),
            ..Overrides::default()
        },
        &[],
        &mut Vec::new(),
    )
    .unwrap_err();
    assert_eq!(err.code, 3);
    let csv_text = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert!(csv_text.contains(",failed,"), "{csv_text}");
}

#[test]
fn verify_small_budget_passes() {
    let mut log = Vec::new();
    let opts = VerifyOptions {
        samples: 500,
        ..VerifyOptions::default()
    };
    cmd_verify(&opts, &mut log).unwrap();
    let text = String::from_utf8(log).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert!(text.lines().all(|l| l.starts_with("[PASS]")), "{text}");
}

#[test]
fn verify_exit_codes() {
    let (code, _, _) = ffnt(&["verify", "--samples", "0"]);
    assert_eq!(code, 2);
    let (code, out, _) = ffnt(&["verify", "--samples", "1000", "--grad-tolerance", "0"]);
    assert_eq!(code, 1);
    assert!(out.contains("[FAIL] rbf-gradient-fd"), "{out}");
    assert!(out.contains("first counterexample"), "{out}");
    let (code, _, _) = ffnt(&["verify", "--samples", "1000"]);
    assert_eq!(code, 0);
}

#[test]
fn config_roundtrip_through_file() {
    let cfg = ScenarioConfig::parse(DEFAULT_CONFIG).unwrap();
    let again = ScenarioConfig::parse(&cfg.to_json()).unwrap();
    assert_eq!(cfg, again);
}
