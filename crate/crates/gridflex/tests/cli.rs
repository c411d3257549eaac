//! End-to-end tests of the `gridflex` binary: subcommands, exit codes,
//! determinism of generated files and the report round trip.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gridflex(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridflex"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn write_flat_load_csv(path: &Path, days: usize, kw: f64) {
    let mut body = String::from("timestamp,consumer_id,consumer_type,load_kwh\n");
    for d in 0..days {
        for h in 0..24 {
            let date = chrono::NaiveDate::from_ymd_opt(2021, 1, 4).unwrap()
                + chrono::Duration::days(d as i64);
            body.push_str(&format!("{date}T{h:02}:00:00,c1,household,{kw}\n"));
        }
    }
    fs::write(path, body).unwrap();
}

fn write_spot_csv(path: &Path, days: usize) {
    let mut body = String::from("timestamp,price_nok_per_kwh\n");
    for d in 0..days {
        for h in 0..24 {
            let date = chrono::NaiveDate::from_ymd_opt(2021, 1, 4).unwrap()
                + chrono::Duration::days(d as i64);
            let price = 0.1 + 0.02 * h as f64;
            body.push_str(&format!("{date}T{h:02}:00:00,{price}\n"));
        }
    }
    fs::write(path, body).unwrap();
}

fn small_generator_config(out: &Path) -> String {
    format!(
        r#"
seed = 42
out_dir = "{}"
cases = ["sor", "gt", "gt_sp", "sp"]

[data.generate]
days = 5
start_date = "2021-01-04"
consumer_count = 4
"#,
        out.display()
    )
}

#[test]
fn generate_data_is_deterministic_and_reports_success() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.toml");
    fs::write(
        &config_path,
        small_generator_config(&dir.path().join("out")),
    )
    .unwrap();

    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let result = gridflex(
            &[
                "generate-data",
                "--config",
                "config.toml",
                "--out",
                out.to_str().unwrap(),
            ],
            dir.path(),
        );
        assert!(
            result.status.success(),
            "{}",
            String::from_utf8_lossy(&result.stderr)
        );
    }
    for file in ["loads.csv", "spot.csv"] {
        let a = fs::read(out_a.join(file)).unwrap();
        let b = fs::read(out_b.join(file)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{file} differs between identically seeded runs");
    }

    // A different seed produces different data.
    let out_c = dir.path().join("c");
    let result = gridflex(
        &[
            "generate-data",
            "--config",
            "config.toml",
            "--out",
            out_c.to_str().unwrap(),
            "--seed",
            "43",
        ],
        dir.path(),
    );
    assert!(result.status.success());
    assert_ne!(
        fs::read(out_a.join("loads.csv")).unwrap(),
        fs::read(out_c.join("loads.csv")).unwrap()
    );
}

#[test]
fn generate_data_fails_on_unwritable_directory() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.toml");
    fs::write(&config_path, small_generator_config(dir.path())).unwrap();
    // A path under an existing *file* cannot be created.
    fs::write(dir.path().join("blocker"), "x").unwrap();
    let result = gridflex(
        &[
            "generate-data",
            "--config",
            "config.toml",
            "--out",
            "blocker/sub",
        ],
        dir.path(),
    );
    assert!(!result.status.success());
    assert!(!result.stderr.is_empty());
}

#[test]
fn run_sor_on_flat_load_writes_expected_row() {
    let dir = tempfile::tempdir().unwrap();
    write_flat_load_csv(&dir.path().join("loads.csv"), 2, 10.0);
    write_spot_csv(&dir.path().join("spot.csv"), 2);
    fs::write(
        dir.path().join("config.toml"),
        r#"
out_dir = "out"
cases = ["sor"]
[data]
load_csv = "loads.csv"
spot_csv = "spot.csv"
"#,
    )
    .unwrap();
    let result = gridflex(&["run", "--config", "config.toml"], dir.path());
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let results = fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    let mut lines = results.lines();
    lines.next();
    let row = lines.next().unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[0], "sor");
    let reduction: f64 = fields[4].parse().unwrap();
    assert!((reduction - 2.5).abs() < 1e-9, "reduction {reduction}");
}

#[test]
fn run_flat_tariff_reduces_nothing() {
    let dir = tempfile::tempdir().unwrap();
    write_flat_load_csv(&dir.path().join("loads.csv"), 2, 5.0);
    fs::write(
        dir.path().join("config.toml"),
        r#"
out_dir = "out"
cases = ["gt"]
[data]
load_csv = "loads.csv"
"#,
    )
    .unwrap();
    let result = gridflex(
        &["run", "--config", "config.toml", "--tariff", "flat"],
        dir.path(),
    );
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let results = fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    let row = results.lines().nth(1).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    assert_eq!(fields[0], "gt");
    assert_eq!(fields[1], "flat");
    let reduction: f64 = fields[4].parse().unwrap();
    assert_eq!(reduction, 0.0);
}

#[test]
fn run_without_spot_data_fails_for_spot_cases() {
    let dir = tempfile::tempdir().unwrap();
    write_flat_load_csv(&dir.path().join("loads.csv"), 1, 5.0);
    fs::write(
        dir.path().join("config.toml"),
        r#"
out_dir = "out"
cases = ["sp"]
[data]
load_csv = "loads.csv"
"#,
    )
    .unwrap();
    let result = gridflex(&["run", "--config", "config.toml"], dir.path());
    assert!(!result.status.success());
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("spot"), "{stderr}");
}

#[test]
fn calibrate_prints_unit_ratio_for_matching_reference() {
    let dir = tempfile::tempdir().unwrap();
    write_flat_load_csv(&dir.path().join("loads.csv"), 2, 3.0);
    // Reference equal to the flat tariff itself: ratio exactly 1.
    fs::write(
        dir.path().join("config.toml"),
        r#"
out_dir = "out"
[data]
load_csv = "loads.csv"
[calibration]
reference_energy_rate = 0.25
[tariffs.static_tou]
peak_rate = 1.2
"#,
    )
    .unwrap();
    let result = gridflex(
        &[
            "calibrate",
            "--config",
            "config.toml",
            "--tariff",
            "static_tou",
            "--out",
            "cal",
        ],
        dir.path(),
    );
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let stdout = String::from_utf8_lossy(&result.stdout);
    let flat_line = stdout.lines().find(|l| l.starts_with("flat")).unwrap();
    assert!(flat_line.contains("1.000000000000"), "{flat_line}");
    // The calibrated copy is written and loadable.
    let copy = fs::read_to_string(dir.path().join("cal/calibrated_config.toml")).unwrap();
    assert!(copy.contains("peak_rate"));
}

#[test]
fn calibrate_rejects_zero_reference() {
    let dir = tempfile::tempdir().unwrap();
    write_flat_load_csv(&dir.path().join("loads.csv"), 1, 3.0);
    fs::write(
        dir.path().join("config.toml"),
        r#"
out_dir = "out"
[data]
load_csv = "loads.csv"
[calibration]
reference_energy_rate = 0.0
"#,
    )
    .unwrap();
    let result = gridflex(&["calibrate", "--config", "config.toml"], dir.path());
    assert!(!result.status.success());
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("reference"), "{stderr}");
}

#[test]
fn report_round_trips_and_rejects_bad_input() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.toml");
    fs::write(
        &config_path,
        small_generator_config(&dir.path().join("out")),
    )
    .unwrap();
    let result = gridflex(&["run", "--config", "config.toml"], dir.path());
    assert!(
        result.status.success(),
        "{}",
        String::from_utf8_lossy(&result.stderr)
    );
    let run_stdout = String::from_utf8_lossy(&result.stdout).into_owned();

    let report = gridflex(&["report", "out"], dir.path());
    assert!(report.status.success());
    let report_stdout = String::from_utf8_lossy(&report.stdout);
    assert_eq!(
        run_stdout, report_stdout,
        "report should reproduce the run table"
    );
    assert_eq!(report_stdout.lines().count(), 11); // header + 10 rows

    // Empty directory: missing results.csv.
    fs::create_dir(dir.path().join("empty")).unwrap();
    let missing = gridflex(&["report", "empty"], dir.path());
    assert!(!missing.status.success());

    // Truncated file: parse error naming the line.
    let truncated_dir = dir.path().join("trunc");
    fs::create_dir(&truncated_dir).unwrap();
    let full = fs::read_to_string(dir.path().join("out/results.csv")).unwrap();
    let mut lines: Vec<&str> = full.lines().collect();
    let last = lines.pop().unwrap();
    let cut = &last[..last.len() / 2];
    lines.push(cut);
    fs::write(truncated_dir.join("results.csv"), lines.join("\n")).unwrap();
    let broken = gridflex(&["report", "trunc"], dir.path());
    assert!(!broken.status.success());
    let stderr = String::from_utf8_lossy(&broken.stderr);
    assert!(stderr.contains("line"), "{stderr}");
}

#[test]
fn run_output_is_byte_identical_across_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let config_path = dir.path().join("config.toml");
    fs::write(
        &config_path,
        small_generator_config(&dir.path().join("unused")),
    )
    .unwrap();
    let mut outputs = Vec::new();
    for (out, jobs) in [("j1", "1"), ("j4", "4")] {
        let result = gridflex(
            &[
                "run",
                "--config",
                "config.toml",
                "--out",
                out,
                "--jobs",
                jobs,
            ],
            dir.path(),
        );
        assert!(
            result.status.success(),
            "{}",
            String::from_utf8_lossy(&result.stderr)
        );
        let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir.path().join(out))
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort_by(|a, b| a.0.cmp(&b.0));
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}
