//! End-to-end tests of the `trigauss` binary: flag handling, config
//! merging, output formats, exit codes, and determinism across worker
//! counts.

use std::process::{Command, Output};

fn run_env(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_trigauss"));
    // Keep the test outcome independent of the ambient environment.
    cmd.env_remove("TRIGAUSS_WORKERS");
    cmd.args(args);
    for (key, value) in envs {
        cmd.env(key, value);
    }
    cmd.output().expect("binary runs")
}

fn run(args: &[&str]) -> Output {
    run_env(args, &[])
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf-8 stderr")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn families_lists_every_family() {
    let out = run(&["families"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    for family in ["vac", "smsv", "thermal", "coherent", "noisy-ghz"] {
        assert!(text.contains(family), "missing {family} in:\n{text}");
    }
}

#[test]
fn check_reports_verdicts_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let json_path = dir.path().join("record.json");
    let out = run(&[
        "check",
        "--family",
        "vac",
        "-r",
        "0.3",
        "--detectors",
        "ppt,single-excitation",
        "--json",
        json_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("vac at r = 0.3"));
    assert!(text.contains("ppt"));
    assert!(text.contains("single-excitation"));

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json_path).unwrap()).unwrap();
    let records = json.as_array().unwrap();
    assert_eq!(records.len(), 1);
    let results = records[0]["results"].as_array().unwrap();
    assert_eq!(results.len(), 2);
    assert_eq!(results[0]["detector"], "ppt");
    assert_eq!(results[0]["verdict"], "detected");
    // 0.3 is past the single-excitation flip point.
    assert_eq!(results[1]["verdict"], "not-detected");
    // Timings are stripped unless --timings is given.
    assert!(results[0].get("time_ms").is_none());
}

#[test]
fn check_requires_the_second_parameter() {
    let out = run(&["check", "--family", "noisy-ghz", "-r", "0.5"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("eta"), "stderr: {}", stderr(&out));
}

#[test]
fn scan_bytes_are_independent_of_worker_count() {
    let args = [
        "scan1d",
        "--family",
        "vac",
        "--r-min",
        "1.0",
        "--r-max",
        "1.5",
        "--r-step",
        "0.1",
        "--detectors",
        "ppt,single-excitation",
    ];
    let one = run_env(&args, &[("TRIGAUSS_WORKERS", "1")]);
    let three = run_env(&args, &[("TRIGAUSS_WORKERS", "3")]);
    assert_eq!(code(&one), 0, "stderr: {}", stderr(&one));
    assert_eq!(stdout(&one), stdout(&three));

    let lines: Vec<String> = stdout(&one).lines().map(String::from).collect();
    assert_eq!(lines[0], "family,r,second_param,detector,verdict,margin,value,trace_d,time_ms");
    assert_eq!(lines.len(), 1 + 6 * 2); // six grid points, two detectors
    assert!(lines[1].starts_with("vac,1,,ppt,detected,"));
    assert!(lines.last().unwrap().starts_with("vac,1.5,,single-excitation,not-detected,"));
}

#[test]
fn bisect_finds_the_ppt_threshold_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("threshold.csv");
    let out = run(&[
        "bisect",
        "--family",
        "vac",
        "--detector",
        "ppt",
        "--low",
        "1.0",
        "--high",
        "1.5",
        "--csv",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("detected below the threshold"));

    let csv = std::fs::read_to_string(&csv_path).unwrap();
    let row = csv.lines().nth(1).unwrap();
    assert!(row.starts_with("vac,ppt,r,,1,1.5,"));
    let threshold: f64 = row.split(',').nth(6).unwrap().parse().unwrap();
    assert!(
        (threshold - 1.24275).abs() < 1e-3,
        "threshold {threshold} too far from 1.24275"
    );
}

#[test]
fn bracket_without_a_flip_exits_with_code_2() {
    let out = run(&[
        "bisect", "--family", "vac", "--detector", "ppt", "--low", "0.2", "--high", "0.4",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nothing to bisect"), "stderr: {}", stderr(&out));
}

#[test]
fn unknown_detector_exits_with_code_2() {
    let out = run(&["scan1d", "--family", "vac", "--detectors", "bogus"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown detector"), "stderr: {}", stderr(&out));
}

#[test]
fn scan2d_rejects_single_parameter_families() {
    let out = run(&["scan2d", "--family", "smsv"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("no second parameter"), "stderr: {}", stderr(&out));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("scan.conf");
    std::fs::write(
        &cfg_path,
        "# coarse vacuum scan\nfamily = vac\nr-min = 1.0\nr_max = 1.4\nr_step = 0.2\ndetectors = ppt\n",
    )
    .unwrap();
    let cfg = cfg_path.to_str().unwrap();

    let from_config = run(&["scan1d", "--config", cfg]);
    assert_eq!(code(&from_config), 0, "stderr: {}", stderr(&from_config));
    // Grid 1.0, 1.2, 1.4 with one detector: header + three rows.
    assert_eq!(stdout(&from_config).lines().count(), 4);

    let overridden = run(&["scan1d", "--config", cfg, "--r-step", "0.4"]);
    assert_eq!(code(&overridden), 0);
    assert_eq!(stdout(&overridden).lines().count(), 3); // 1.0 and 1.4 only

    let bad_cfg = dir.path().join("bad.conf");
    std::fs::write(&bad_cfg, "familly = vac\n").unwrap();
    let rejected = run(&["scan1d", "--config", bad_cfg.to_str().unwrap()]);
    assert_eq!(code(&rejected), 2);
    assert!(stderr(&rejected).contains("unknown key"));
}

#[test]
fn timings_flag_fills_the_time_column() {
    let args = [
        "scan1d", "--family", "vac", "--r-min", "0.5", "--r-max", "0.5", "--r-step", "0.1",
        "--detectors", "ppt",
    ];
    let plain = run(&args);
    let row = stdout(&plain).lines().nth(1).unwrap().to_string();
    assert!(row.ends_with(','), "expected empty time cell: {row}");

    let timed = run_env(&[&args[..], &["--timings"]].concat(), &[]);
    let row = stdout(&timed).lines().nth(1).unwrap().to_string();
    assert!(!row.ends_with(','), "expected a time value: {row}");
}

#[test]
fn quick_noisy_ghz_report_traces_the_biseparability_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "reproduce",
        "noisy-ghz-region",
        "--quick",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    for name in
        ["scan.csv", "scan.json", "regions.svg", "boundary.csv", "boundary.json", "meta.json"]
    {
        assert!(dir.path().join(name).is_file(), "missing artifact {name}");
    }

    // The biseparability boundary sits just above eta = 1/3 across the
    // whole squeezing range.
    let boundary = std::fs::read_to_string(dir.path().join("boundary.csv")).unwrap();
    let mut rows = 0;
    for line in boundary.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let eta: f64 = fields[2].parse().expect("flip found at every r");
        assert!((0.30..0.40).contains(&eta), "boundary {eta} far from 1/3 in: {line}");
        assert_eq!(fields[3], "false"); // not detected at small eta
        rows += 1;
    }
    assert_eq!(rows, 10);

    let svg = std::fs::read_to_string(dir.path().join("regions.svg")).unwrap();
    assert!(svg.contains("GME certified at the covariance level"));
}
