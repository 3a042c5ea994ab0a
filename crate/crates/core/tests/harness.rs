//! Configuration files, experiment CSVs, sweeps, plot data and the CLI.

mod common;

use std::path::Path;
use std::process::Command;

use fgdra_core::fed::Algorithm;
use fgdra_core::harness::config::{ExperimentConfig, SweepAxis};
use fgdra_core::harness::experiment::{run_experiment, MeanSe};
use fgdra_core::harness::metrics::Evaluation;
use fgdra_core::harness::plot::{emit_plot_data, series};
use fgdra_core::harness::sweep::{run_sweep, write_sweep_table};
use fgdra_core::harness::{data::generate, experiment::write_summary_csv};
use rand::Rng;

fn quick(cfg: &mut ExperimentConfig) {
    for (k, v) in [
        ("rounds", "6"),
        ("tau", "2"),
        ("batch_size", "10"),
        ("eval_every", "1"),
        ("seeds", "0,1,2"),
    ] {
        cfg.set(k, v).unwrap();
    }
    cfg.validate().unwrap();
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn config_file_with_comments_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.cfg");
    std::fs::write(&path, "# small run\nrounds = 20  # K\n\nseeds = 3,4\nalgorithms = fgdra, fedavg\n").unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.train.rounds, 20);
    assert_eq!(cfg.seeds, vec![3, 4]);
    assert_eq!(cfg.algorithms, vec![Algorithm::Fgdra, Algorithm::FedAvg]);
    assert_eq!(cfg.train.alpha, 2e-3);
    assert_eq!(cfg.train.sampled, 3);

    std::fs::write(&path, "").unwrap();
    assert_eq!(ExperimentConfig::load(&path).unwrap(), ExperimentConfig::default());

    std::fs::write(&path, "learning_rate = 0.1\n").unwrap();
    let err = ExperimentConfig::load(&path).unwrap_err().to_string();
    assert!(err.contains("learning_rate"), "{err}");
    std::fs::write(&path, "tau = ten\n").unwrap();
    let err = ExperimentConfig::load(&path).unwrap_err().to_string();
    assert!(err.contains("tau"), "{err}");
    assert!(ExperimentConfig::load(&dir.path().join("missing.cfg")).is_err());
}

#[test]
fn run_csv_rows_and_summary_recomputation() {
    let mut cfg = common::small_config(4, 100);
    quick(&mut cfg);
    let data = generate(&cfg).unwrap().1;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    let exp = run_experiment(&cfg, &data, Some(&path)).unwrap();
    let rows = csv_rows(&path);
    assert_eq!(rows.len(), 3 * 3 * 6);

    for s in &exp.summary.algorithms {
        let finals: Vec<f64> = rows
            .iter()
            .filter(|r| &r[0] == s.algorithm.name() && &r[2] == "6")
            .map(|r| r[5].parse().unwrap())
            .collect();
        assert_eq!(finals.len(), 3);
        let mean = finals.iter().sum::<f64>() / 3.0;
        assert!((s.worst.mean - mean).abs() <= 1e-12);
        let expect_comm = 6 * s.algorithm.exchanges_per_round();
        assert_eq!(s.comm_rounds, expect_comm);
    }
    for r in &rows {
        let (avg, worst, sd): (f64, f64, f64) =
            (r[4].parse().unwrap(), r[5].parse().unwrap(), r[6].parse().unwrap());
        assert!((0.0..=100.0).contains(&worst) && worst <= avg + 1e-12 && sd >= 0.0);
    }

    let summary = dir.path().join("summary.csv");
    write_summary_csv(&summary, &exp.summary).unwrap();
    assert_eq!(csv_rows(&summary).len(), 3);
}

#[test]
fn reruns_are_byte_identical_and_threads_do_not_matter() {
    let mut cfg = common::small_config(4, 100);
    quick(&mut cfg);
    let data = generate(&cfg).unwrap().1;
    let dir = tempfile::tempdir().unwrap();
    let paths: Vec<_> = (0..3).map(|i| dir.path().join(format!("run{i}.csv"))).collect();
    run_experiment(&cfg, &data, Some(&paths[0])).unwrap();
    run_experiment(&cfg, &data, Some(&paths[1])).unwrap();
    cfg.set("jobs", "3").unwrap();
    run_experiment(&cfg, &data, Some(&paths[2])).unwrap();
    let bytes: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
    assert_eq!(bytes[0], bytes[1]);
    assert_eq!(bytes[0], bytes[2]);
}

#[test]
fn plot_series_have_standard_error_bands() {
    let mut cfg = common::small_config(4, 100);
    quick(&mut cfg);
    let data = generate(&cfg).unwrap().1;
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run.csv");
    run_experiment(&cfg, &data, Some(&run)).unwrap();
    let files = emit_plot_data(&run, dir.path()).unwrap();
    assert_eq!(files.len(), 3);

    let raw = csv_rows(&run);
    for (file, column) in files.iter().zip([4, 5, 6]) {
        let rows = csv_rows(file);
        let mut algos: Vec<String> = rows.iter().map(|r| r[0].to_string()).collect();
        algos.dedup();
        assert_eq!(algos, vec!["fgdra", "drfa", "fedavg"]);
        for algo in &algos {
            let rounds: Vec<usize> = rows
                .iter()
                .filter(|r| &r[0] == algo)
                .map(|r| r[1].parse().unwrap())
                .collect();
            assert!(rounds.windows(2).all(|w| w[0] < w[1]));
        }
        for r in &rows {
            let values: Vec<f64> = raw
                .iter()
                .filter(|x| x[0] == r[0] && x[2] == r[1])
                .map(|x| x[column].parse().unwrap())
                .collect();
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let (m, se): (f64, f64) = (r[4].parse().unwrap(), r[5].parse().unwrap());
            assert!((m - mean).abs() <= 1e-12);
            assert!((se - sd / n.sqrt()).abs() <= 1e-12);
            assert_eq!(&r[3], "3");
        }
    }
    let drfa = series(&run, "avg_acc").unwrap();
    let last = drfa.iter().rfind(|p| p.algorithm == "drfa").unwrap();
    assert_eq!(last.comm_rounds, 2 * last.round);
}

#[test]
fn tau_sweep_fills_the_table() {
    let mut cfg = common::small_config(4, 80);
    quick(&mut cfg);
    cfg.set("seeds", "0,1").unwrap();
    cfg.set("sweep_axis", "tau").unwrap();
    cfg.set("sweep_values", "1,2,3").unwrap();
    let data = generate(&cfg).unwrap().1;
    let dir = tempfile::tempdir().unwrap();
    let result = run_sweep(&cfg, &data, Some(dir.path())).unwrap();
    assert_eq!(result.axis, SweepAxis::Tau);
    assert_eq!(result.cells.len(), 9);
    for v in [1, 2, 3] {
        assert!(dir.path().join(format!("run_tau{v}.csv")).exists());
    }
    let table = dir.path().join("table.csv");
    write_sweep_table(&table, &result).unwrap();
    let text = std::fs::read_to_string(&table).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "algorithm,tau=1,tau=2,tau=3");
    assert_eq!(lines.len(), 4);
    let cell = result.cell(Algorithm::Drfa, 2).unwrap();
    assert!(lines[2].starts_with("drfa,"));
    assert_eq!(lines[2].split(',').nth(2).unwrap(), cell.label());

    cfg.set("sweep_axis", "none").unwrap();
    assert!(run_sweep(&cfg, &data, None).is_err());
}

#[test]
fn uniform_guessing_scores_a_quarter() {
    // 500 test samples per worker, guesses drawn uniformly at random.
    let mut cfg = common::small_config(4, 2500);
    cfg.set("train_ratio", "0.8").unwrap();
    let data = generate(&cfg).unwrap().1;
    let mut r = fgdra_core::rng::from_seed(99);
    let per_worker: Vec<f64> = data
        .iter()
        .map(|d| {
            assert_eq!(d.test.len(), 500);
            let hits = d
                .test
                .samples
                .iter()
                .filter(|s| r.random_range(0..4) == s.label)
                .count();
            100.0 * hits as f64 / 500.0
        })
        .collect();
    let e = Evaluation::from_accuracies(per_worker);
    assert!((e.avg - 25.0).abs() <= 3.0, "avg {}", e.avg);
    assert!(e.worst <= e.avg);
}

#[test]
fn mean_se_uses_sample_deviation() {
    let m = MeanSe::of(&[70.0, 72.0, 74.0, 76.0, 78.0]);
    assert_eq!(m.mean, 74.0);
    assert!((m.se - (10f64).sqrt() / 5f64.sqrt()).abs() < 1e-12);
}

#[test]
fn cli_generates_trains_and_emits_plot_data() {
    let bin = env!("CARGO_BIN_EXE_fgdra");
    let dir = tempfile::tempdir().unwrap();
    let data_dir = dir.path().join("data");
    let out = dir.path().join("out");
    let common = [
        "--set", "samples_per_worker=60",
        "--set", "rounds=4",
        "--set", "tau=2",
        "--set", "eval_every=2",
        "--seed-list", "0,1",
    ];
    let run = |args: &[&str]| {
        let o = Command::new(bin).args(args).output().unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        String::from_utf8(o.stdout).unwrap()
    };
    run(&[&["gen-data", "--out-dir", data_dir.to_str().unwrap()], &common[..]].concat());
    assert!(data_dir.join("worker3_train.csv").exists());

    let stdout = run(&[
        &["train", "--save-models", "--out-dir", out.to_str().unwrap(), "--data-dir", data_dir.to_str().unwrap()],
        &common[..],
    ]
    .concat());
    assert!(stdout.contains("fgdra") && stdout.contains("fedavg"));
    assert_eq!(csv_rows(&out.join("run.csv")).len(), 3 * 2 * 2);
    assert!(out.join("model_drfa_seed1.bin").exists());
    let used = ExperimentConfig::load(&out.join("config.txt")).unwrap();
    assert_eq!(used.train.rounds, 4);
    assert_eq!(used.seeds, vec![0, 1]);

    run(&["plot-data", "--run-csv", out.join("run.csv").to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    for name in ["plot_avg.csv", "plot_worst.csv", "plot_sd.csv"] {
        assert_eq!(csv_rows(&out.join(name)).len(), 3 * 2);
    }

    let bad = Command::new(bin).args(["train", "--set", "sampled=9"]).output().unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("sampled"));
}
