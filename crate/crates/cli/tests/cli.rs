use std::path::Path;
use std::process::{Command, Output};

fn hcr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hcr"))
        .args(args)
        .output()
        .unwrap()
}

fn circle(dir: &Path) -> String {
    let path = dir.join("circle.json");
    std::fs::write(
        &path,
        r#"{"origin":[0,0],"constraints":[{"kind":"ball","center":[0,0],"radius":10}]}"#,
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn convert_outside_point_reports_feasibility_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = hcr(&[
        "convert",
        "--region",
        &circle(dir.path()),
        "--point",
        "50,0",
    ]);
    assert_eq!(out.status.code(), Some(6));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[feasibility]"));
}

#[test]
fn convert_origin_maps_to_zero_radius() {
    let dir = tempfile::tempdir().unwrap();
    let out = hcr(&["convert", "--region", &circle(dir.path()), "--point", "0,0"]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("d = (1, 0)") && stdout.contains("r = 0\n"));
}

#[test]
fn input_errors_have_their_own_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let region = circle(dir.path());
    assert_eq!(
        hcr(&["convert", "--region", &region, "--point", "5,x"])
            .status
            .code(),
        Some(3)
    );
    assert_eq!(
        hcr(&["convert", "--region", &region, "--point", "5,0,1"])
            .status
            .code(),
        Some(3)
    );
    let missing = dir.path().join("missing.json");
    assert_eq!(
        hcr(&[
            "convert",
            "--region",
            missing.to_str().unwrap(),
            "--point",
            "5,0"
        ])
        .status
        .code(),
        Some(7)
    );
}

#[test]
fn roundtrip_json_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = hcr(&[
        "roundtrip",
        "--region",
        &circle(dir.path()),
        "--points",
        "200",
        "--json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["points"], 200);
    assert_eq!(v["infeasible"], 0);
    assert!(v["max_error"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn timeseries_from_csv_directory() {
    let dir = tempfile::tempdir().unwrap();
    for s in 0..2 {
        let mut text = String::from("t,value\n");
        for i in 0..80 {
            let v = 10.0 + (i as f64 * 0.7 + s as f64).sin() * 3.0 + (i % 5) as f64 * 0.1;
            text.push_str(&format!("{i},{v}\n"));
        }
        std::fs::write(dir.path().join(format!("s{s}.csv")), text).unwrap();
    }
    let csv = dir.path().join("report.csv");
    let out = hcr(&[
        "bench-timeseries",
        "--series-dir",
        dir.path().to_str().unwrap(),
        "--column",
        "value",
        "--n",
        "8",
        "--epochs",
        "3",
        "--hidden",
        "8",
        "--out-csv",
        csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("R-MSE") && stdout.contains("constraints per region: 30..=30"));
    assert_eq!(std::fs::read_to_string(csv).unwrap().lines().count(), 5);
}

#[test]
fn timeseries_requires_a_source() {
    let out = hcr(&["bench-timeseries"]);
    assert!(!out.status.success());
}
