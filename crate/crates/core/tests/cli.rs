use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bates(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bates"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data/fixtures")
        .join(name)
        .display()
        .to_string()
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = fs::read(&p).unwrap();
            (PathBuf::from(p.file_name().unwrap()), bytes)
        })
        .collect();
    out.sort();
    out
}

const SIMULATE: &[&str] = &[
    "simulate", "--mu", "0.44", "--kappa", "1.17", "--theta", "0.06", "--sigma", "0.006", "--rho",
    "-0.41", "--n", "1134", "--dt", "0.003968", "--seed", "7",
];

#[test]
fn simulate_is_deterministic_and_rerunnable_from_its_manifest() {
    let tmp = TempDir::new().unwrap();
    let run = |out: &str| {
        let mut args = SIMULATE.to_vec();
        args.extend(["--out", out]);
        let o = bates(tmp.path(), &args);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run("a");
    run("b");
    let a = files(&tmp.path().join("a"));
    assert_eq!(a, files(&tmp.path().join("b")));
    let names: Vec<_> = a.iter().map(|(n, _)| n.display().to_string()).collect();
    assert_eq!(names, ["manifest.json", "path.csv"]);
    let csv = String::from_utf8(a[1].1.clone()).unwrap();
    assert_eq!(csv.lines().count(), 1136);

    let o = bates(
        tmp.path(),
        &["simulate", "--config", "a/manifest.json", "--out", "c"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(a, files(&tmp.path().join("c")));
}

#[test]
fn missing_flag_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let o = bates(tmp.path(), &["simulate", "--mu", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn corrupted_csv_names_the_line() {
    let tmp = TempDir::new().unwrap();
    fs::write(
        tmp.path().join("bad.csv"),
        "date,close\n2020-01-02,10\n2020-01-03,ten\n",
    )
    .unwrap();
    let o = bates(
        tmp.path(),
        &[
            "calibrate",
            "--input",
            "bad.csv",
            "--iterations",
            "2",
            "--burn-in",
            "0",
        ],
    );
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3"), "{err}");
    assert!(!tmp.path().join("out/estimation.json").exists());
}

#[test]
fn failed_runs_leave_no_partial_outputs() {
    let tmp = TempDir::new().unwrap();
    // A directory squatting on the second output name makes that write fail.
    fs::create_dir_all(tmp.path().join("out/path_001.csv")).unwrap();
    let mut args = SIMULATE.to_vec();
    args.extend(["--paths", "3"]);
    let o = bates(tmp.path(), &args);
    assert!(!o.status.success());
    let left: Vec<_> = fs::read_dir(tmp.path().join("out"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(left, ["path_001.csv"]);
}

#[test]
fn constant_prices_give_zero_return() {
    let tmp = TempDir::new().unwrap();
    let input = fixture("constant.csv");
    let o = bates(
        tmp.path(),
        &[
            "backtest",
            "--input",
            &input,
            "--strategy",
            "passive",
            "--strategy",
            "macd",
            "--strategy",
            "rsi",
        ],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("out/summary.json")).unwrap()).unwrap();
    let records = summary.as_array().unwrap();
    assert_eq!(records.len(), 3);
    for r in records {
        assert_eq!(r["total_return"].as_f64().unwrap(), 0.0);
        assert_eq!(r["gop"].as_f64().unwrap(), 0.0);
    }
}

#[test]
fn backtest_on_index_fixtures_gives_three_by_three_table() {
    let tmp = TempDir::new().unwrap();
    let (a, b, c) = (
        fixture("sp500.csv"),
        fixture("dax.csv"),
        fixture("wig20.csv"),
    );
    let args = [
        "backtest",
        "--input",
        &a,
        "--input",
        &b,
        "--input",
        &c,
        "--strategy",
        "passive",
        "--strategy",
        "macd",
        "--strategy",
        "rsi",
    ];
    let o = bates(tmp.path(), &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(tmp.path().join("out/returns.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 4, "{table}");
    assert_eq!(rows[0].split(',').count(), 4);

    let o = bates(
        tmp.path(),
        &[
            "backtest",
            "--config",
            "out/manifest.json",
            "--out",
            "again",
        ],
    );
    assert!(o.status.success());
    assert_eq!(
        files(&tmp.path().join("out")),
        files(&tmp.path().join("again"))
    );
}

#[test]
fn aspi_grid_shape_and_rerun() {
    let tmp = TempDir::new().unwrap();
    let args = [
        "aspi-grid",
        "--mu-values",
        "0.1,0.9",
        "--lambda-values",
        "0,2",
        "--reps",
        "10",
        "--n",
        "100",
        "--seed",
        "3",
    ];
    let o = bates(tmp.path(), &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let heat = fs::read_to_string(tmp.path().join("out/heatmap.csv")).unwrap();
    assert_eq!(heat.lines().count(), 5);

    let o = bates(
        tmp.path(),
        &[
            "aspi-grid",
            "--config",
            "out/manifest.json",
            "--out",
            "again",
            "--threads",
            "2",
        ],
    );
    assert!(o.status.success());
    assert_eq!(
        files(&tmp.path().join("out")),
        files(&tmp.path().join("again"))
    );
}
