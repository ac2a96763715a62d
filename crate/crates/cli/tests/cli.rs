use std::path::{Path, PathBuf};
use std::process::Command as Proc;

use tradeshock::commands::year_seed;
use tradeshock::{run, Command, RunConfig, RunManifest};
use tradeshock_core::experiments::trial_seed;
use tradeshock_core::{derive_model, link_scan, mea, null_model, ImportMatrix, DEFAULT_ITERATIONS as K};

const M3_FLOWS: [(&str, &str, f64); 6] =
    [("1", "2", 2.0), ("1", "3", 1.0), ("2", "1", 1.0), ("2", "3", 1.0), ("3", "1", 1.0), ("3", "2", 2.0)];

fn write_flows(dir: &Path, years: &[i32], flows: &[(&str, &str, f64)]) -> PathBuf {
    let mut text = String::from("year,importer,exporter,value\n");
    for y in years {
        for (i, e, v) in flows {
            text.push_str(&format!("{y},{i},{e},{v}\n"));
        }
    }
    let path = dir.join("flows.csv");
    std::fs::write(&path, text).unwrap();
    path
}

fn m3() -> ImportMatrix {
    ImportMatrix::from_rows(&[&[0., 2., 1.], &[1., 0., 1.], &[1., 2., 0.]]).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

/// Data rows split into fields, header dropped.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn setup(years: &[i32], flows: &[(&str, &str, f64)]) -> (tempfile::TempDir, RunConfig) {
    let tmp = tempfile::tempdir().unwrap();
    let data = write_flows(tmp.path(), years, flows);
    let cfg = RunConfig::new(data, tmp.path().join("out"));
    (tmp, cfg)
}

#[test]
fn mea_on_two_years_of_m3() {
    let (tmp, mut cfg) = setup(&[2000, 2001], &M3_FLOWS);
    cfg.output_dir = tmp.path().join("fresh/nested/out");
    cfg.null_trials = Some(4);
    let outcome = run(Command::Mea, &cfg).unwrap();
    assert_eq!(outcome.exit_code(), 0);

    let series = rows(&read(&cfg.output_dir, "robustness_timeseries.csv"));
    assert_eq!(series.len(), 2);
    for (row, year) in series.iter().zip(["2000", "2001"]) {
        assert_eq!(row[0], year);
        assert_eq!(row[1].parse::<f64>().unwrap(), 0.375);
    }
    let detail = rows(&read(&cfg.output_dir, "mea_detail.csv"));
    assert_eq!(detail[0], ["2000", "1", "1", "0.6250000000", "0.3750000000"]);

    let files: Vec<_> = std::fs::read_dir(&cfg.output_dir).unwrap().collect();
    assert_eq!(files.len(), 4);
    let manifest: RunManifest = serde_json::from_str(&read(&cfg.output_dir, "manifest.json")).unwrap();
    assert_eq!(manifest.outputs.len(), 3);
    for f in &manifest.outputs {
        let bytes = std::fs::read(cfg.output_dir.join(&f.file)).unwrap();
        assert_eq!(tradeshock::report::sha256_hex(&bytes), f.sha256);
    }
    assert_eq!(manifest.years.len(), 2);
}

#[test]
fn two_trial_band_is_min_and_max_of_the_trials() {
    let (_tmp, mut cfg) = setup(&[2000], &M3_FLOWS);
    cfg.null_trials = Some(2);
    run(Command::Mea, &cfg).unwrap();
    let first = read(&cfg.output_dir, "robustness_timeseries.csv");
    run(Command::Mea, &cfg).unwrap();
    assert_eq!(first, read(&cfg.output_dir, "robustness_timeseries.csv"));

    let m = m3();
    let seed = year_seed(cfg.seed, 2000);
    let trials: Vec<f64> =
        (0..2).map(|t| mea(&null_model(&m, trial_seed(seed, t)), K, 0.5).unwrap().robustness).collect();
    let (lo, hi) = (trials[0].min(trials[1]), trials[0].max(trials[1]));
    let row = &rows(&first)[0];
    let num = |i: usize| row[i].parse::<f64>().unwrap();
    assert_eq!(row[3], format!("{lo:.10}"));
    assert_eq!(row[4], format!("{hi:.10}"));
    assert_eq!((num(5), num(6)), (num(3), num(4)));
}

#[test]
fn identity_perturbation_drops_nobody() {
    let (_tmp, mut cfg) = setup(&[2000, 2001], &M3_FLOWS);
    cfg.import_scale = 1.0;
    cfg.export_scale = 1.0;
    cfg.null_trials = Some(3);
    run(Command::Perturb, &cfg).unwrap();
    for row in rows(&read(&cfg.output_dir, "perturbation.csv")) {
        assert_eq!((row[2].as_str(), row[3].as_str()), ("0.0000", "0.0000"));
    }
    let ranking = rows(&read(&cfg.output_dir, "power_ranking.csv"));
    assert_eq!(ranking.len(), 6);
}

#[test]
fn deletion_scan_power_on_m3() {
    let (_tmp, mut cfg) = setup(&[2000], &M3_FLOWS);
    cfg.import_scale = 0.0;
    cfg.export_scale = 0.0;
    cfg.null_trials = Some(3);
    let outcome = run(Command::Perturb, &cfg).unwrap();
    assert_eq!(outcome.exit_code(), 0);
    let table = rows(&read(&cfg.output_dir, "perturbation.csv"));
    assert_eq!(table[0][..3], ["2000", "1", "66.6667"]);
    let ranking = rows(&read(&cfg.output_dir, "power_ranking.csv"));
    // descending, and the first entry carries the largest value
    let values: Vec<f64> = ranking.iter().map(|r| r[3].parse().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[0] >= w[1]));
}

#[test]
fn balanced_pair_link() {
    let (_tmp, cfg) = setup(&[1990], &[("A", "B", 5.0), ("B", "A", 5.0)]);
    run(Command::Links, &cfg).unwrap();
    let ranked = rows(&read(&cfg.output_dir, "link_impacts.csv"));
    assert_eq!(ranked, vec![vec!["1990", "1", "A", "B", "-100.0000", "1.0000000000"]]);
}

#[test]
fn m3_links_match_the_library() {
    let (_tmp, mut cfg) = setup(&[2000], &M3_FLOWS);
    cfg.report_threshold = f64::NEG_INFINITY;
    // an infinite threshold is rejected; the library's keep-all scan is the reference
    assert!(run(Command::Links, &cfg).is_err());
    cfg.report_threshold = -1.0;
    run(Command::Links, &cfg).unwrap();
    let m = m3();
    let expected = link_scan(&m, &derive_model(&m), K, -1.0).unwrap();
    let got = rows(&read(&cfg.output_dir, "link_impacts.csv"));
    assert_eq!(got.len(), 3);
    for (row, l) in got.iter().zip(&expected) {
        assert_eq!((row[2].as_str(), row[3].as_str()), (l.label_i.as_str(), l.label_j.as_str()));
        assert_eq!(row[4], format!("{:.4}", l.impact));
    }

    cfg.report_threshold = 0.005;
    run(Command::Links, &cfg).unwrap();
    assert_eq!(rows(&read(&cfg.output_dir, "link_impacts.csv")).len(), 1);
    let maxima = rows(&read(&cfg.output_dir, "max_link_timeseries.csv"));
    assert_eq!(maxima[0][..4], ["2000", "1", "3", "-25.0000"]);
}

#[test]
fn metrics_on_constant_series() {
    let (_tmp, cfg) = setup(&[2000, 2001, 2002, 2003], &M3_FLOWS);
    let outcome = run(Command::Metrics, &cfg).unwrap();
    assert_eq!(outcome.exit_code(), 0);
    let table = rows(&read(&cfg.output_dir, "metrics_timeseries.csv"));
    assert_eq!(table.len(), 4);
    for row in &table {
        assert_eq!(row[1..5], ["3", "0.6666666667", "2", "2.0000000000"]);
        assert_eq!(row[8], "0.3750000000");
    }
    let fits = read(&cfg.output_dir, "fits.csv");
    let first = &rows(&fits)[0];
    assert_eq!(first[0], "robustness_vs_connectance");
    assert!(fits.lines().nth(1).unwrap().contains("skipped: regressor is degenerate"));
    assert_eq!((first[3].as_str(), first[4].as_str()), ("2000", "2003"));
}

#[test]
fn excluded_years_are_left_out() {
    let (_tmp, mut cfg) = setup(&[1913, 1914, 1915, 1920], &M3_FLOWS);
    cfg.exclude_years = vec!["1914:1919".parse().unwrap()];
    let outcome = run(Command::Metrics, &cfg).unwrap();
    let years: Vec<String> =
        rows(&read(&cfg.output_dir, "metrics_timeseries.csv")).into_iter().map(|r| r[0].clone()).collect();
    assert_eq!(years, ["1913", "1920"]);
    assert_eq!(outcome.manifest.years_excluded, vec![1914, 1915]);
    assert_eq!(outcome.manifest.diagnostics.years_empty, (1916..=1919).collect::<Vec<_>>());
}

#[test]
fn ingest_check_reports_diagnostics() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("d.csv");
    std::fs::write(
        &data,
        "Year,Importer,Exporter,Value\n2000,A,B,1\n2000,A,B,2\n2000,B,A,-9\n2000,A,A,4\n2000,B,A,3\n",
    )
    .unwrap();
    let cfg = RunConfig::new(&data, tmp.path().join("out"));
    run(Command::IngestCheck, &cfg).unwrap();
    let report: serde_json::Value = serde_json::from_str(&read(&cfg.output_dir, "diagnostics.json")).unwrap();
    let d = &report["diagnostics"];
    assert_eq!(d["rows_read"], 5);
    assert_eq!(d["rows_dropped_missing"], 1);
    assert_eq!(d["rows_dropped_self"], 1);
    assert_eq!(d["rows_summed_duplicates"], 1);
    assert_eq!(report["years"][0]["total_trade"], 6.0);
}

fn binary(args: &[&str], dir: &Path) -> std::process::Output {
    Proc::new(env!("CARGO_BIN_EXE_tradeshock")).args(args).current_dir(dir).output().unwrap()
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = binary(&["mea", "--data", "nope.csv", "--out", "o"], tmp.path());
    assert_eq!(missing.status.code(), Some(1));
    let bad_flag = binary(&["mea", "--data", "nope.csv", "--stop-fraction", "0"], tmp.path());
    assert_eq!(bad_flag.status.code(), Some(1));

    // a year whose flows are all zero has no income to measure
    write_flows(tmp.path(), &[2000], &M3_FLOWS);
    let mut text = std::fs::read_to_string(tmp.path().join("flows.csv")).unwrap();
    text.push_str("2001,1,2,0\n2001,2,1,0\n");
    std::fs::write(tmp.path().join("flows.csv"), text).unwrap();
    let partial = binary(&["mea", "--data", "flows.csv", "--out", "o", "--null-trials", "2"], tmp.path());
    assert_eq!(partial.status.code(), Some(2), "{}", String::from_utf8_lossy(&partial.stderr));
    let manifest: RunManifest = serde_json::from_str(&read(&tmp.path().join("o"), "manifest.json")).unwrap();
    assert_eq!(manifest.failures.len(), 1);
    assert_eq!(manifest.failures[0].year, 2001);
    assert_eq!(rows(&read(&tmp.path().join("o"), "robustness_timeseries.csv")).len(), 1);
}

#[test]
fn flags_override_the_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    write_flows(tmp.path(), &[2000, 2001, 2002], &M3_FLOWS);
    std::fs::write(tmp.path().join("run.conf"), "data = flows.csv\nout = from-file\nyears = 2000:2001\n")
        .unwrap();
    let out = binary(&["metrics", "--config", "run.conf", "--years", "2002:2002"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = rows(&read(&tmp.path().join("from-file"), "metrics_timeseries.csv"));
    assert_eq!(table.len(), 1);
    assert_eq!(table[0][0], "2002");
}
