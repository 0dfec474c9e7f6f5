use std::collections::BTreeMap;
use std::fs;

use sparse_bandit::harness::{self, ExperimentConfig, PolicySpec};
use sparse_bandit::policies::PolicyKind;

fn small_config() -> ExperimentConfig {
    let mut cfg = harness::preset("experiment1-desk").unwrap();
    cfg.environment.d = 10;
    cfg.horizon = 60;
    cfg.replications = 4;
    cfg.threads = Some(2);
    cfg.record_debug = true;
    cfg.policies.retain(|p| ["fs-wlasso", "greedy-lasso", "oracle"].contains(&p.name.as_str()));
    cfg.policies.push(PolicySpec { name: "uniform".into(), kind: PolicyKind::Uniform });
    cfg
}

fn listing(dir: &std::path::Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn emitted_files_are_complete_and_consistent() {
    let cfg = small_config();
    let result = harness::run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    harness::emit_results(&result, &out).unwrap();
    assert_eq!(listing(&out), ["config.json", "debug.csv", "plot.svg", "summary.csv", "traces.csv"]);

    // recompute the per-round mean and sample std straight from traces.csv
    let traces = fs::read_to_string(out.join("traces.csv")).unwrap();
    let mut cum: BTreeMap<(String, usize), Vec<f64>> = BTreeMap::new();
    for line in traces.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 6);
        let t: usize = cells[2].parse().unwrap();
        cum.entry((cells[0].to_string(), t)).or_default().push(cells[4].parse().unwrap());
    }
    assert_eq!(cum.len(), 4 * 60);

    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    let mut rows = 0;
    for line in summary.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        let vals = &cum[&(cells[0].to_string(), cells[1].parse().unwrap())];
        assert_eq!(vals.len(), 4);
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let std = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let mean_csv: f64 = cells[2].parse().unwrap();
        let std_csv: f64 = cells[3].parse().unwrap();
        assert!((mean - mean_csv).abs() <= 1e-9 * (1.0 + mean.abs()), "{line}");
        assert!((std - std_csv).abs() <= 1e-9 * (1.0 + std.abs()), "{line}");
        rows += 1;
    }
    assert_eq!(rows, 4 * 60);

    let reloaded = harness::load_config(&out.join("config.json"), &[]).unwrap();
    assert_eq!(reloaded, result.config);
    let svg = fs::read_to_string(out.join("plot.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 4);
}

#[test]
fn traces_round_trip_bitwise() {
    let cfg = small_config();
    let result = harness::run_experiment(&cfg).unwrap();
    let csv = harness::traces_csv(&result.traces);
    for (line, (tr, t)) in csv
        .lines()
        .skip(1)
        .zip(result.traces.iter().flat_map(|tr| (0..tr.cum_regret.len()).map(move |t| (tr, t))))
    {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[3].parse::<f64>().unwrap().to_bits(), tr.inst_regret[t].to_bits());
        assert_eq!(cells[4].parse::<f64>().unwrap().to_bits(), tr.cum_regret[t].to_bits());
    }
}

#[test]
fn output_path_that_is_a_file_fails_cleanly() {
    let mut cfg = small_config();
    cfg.replications = 1;
    let result = harness::run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("taken");
    fs::write(&blocker, "x").unwrap();
    let err = harness::emit_results(&result, &blocker).unwrap_err();
    assert!(err.to_string().contains("taken"), "{err}");
    assert_eq!(listing(dir.path()), ["taken"]);
}

#[test]
fn failed_rename_leaves_no_partial_output() {
    let mut cfg = small_config();
    cfg.replications = 1;
    let result = harness::run_experiment(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    // a non-empty directory where plot.svg should go makes that rename fail
    fs::create_dir_all(dir.path().join("plot.svg/inner")).unwrap();
    assert!(harness::emit_results(&result, dir.path()).is_err());
    assert_eq!(listing(dir.path()), ["plot.svg"]);
}
