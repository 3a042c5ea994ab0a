//! Multi-seed runs and the per-round CSV.
//!
//! Run CSV columns: `algorithm,seed,round,comm_rounds,avg_acc,worst_acc,
//! sd_acc`, then `acc_w{n}` and `lambda_{n}` for every worker. One row per
//! evaluated round (every `eval_every` rounds and the last one), in
//! (algorithm, seed, round) order following the config's lists.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use crate::error::{Error, Result};
use crate::fed::{run_with, Algorithm, RoundLog};
use crate::harness::config::ExperimentConfig;
use crate::labeling::WorkerData;
use crate::mlp::ModelParams;

/// Mean and standard error (sample sd over sqrt(n); zero for a single value).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    pub fn of(values: &[f64]) -> MeanSe {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let se = if values.len() > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        MeanSe { mean, se }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedRun {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub logs: Vec<RoundLog>,
    /// Final global model.
    pub theta: ModelParams,
}

impl SeedRun {
    pub fn last(&self) -> &RoundLog {
        self.logs.last().expect("a run has at least one round")
    }
}

/// Final-round statistics of one algorithm across seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub runs: usize,
    pub round: usize,
    pub comm_rounds: usize,
    pub avg: MeanSe,
    pub worst: MeanSe,
    pub sd: MeanSe,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub algorithms: Vec<AlgorithmSummary>,
}

impl RunSummary {
    pub fn from_runs(runs: &[SeedRun]) -> RunSummary {
        let mut order: Vec<Algorithm> = Vec::new();
        for r in runs {
            if !order.contains(&r.algorithm) {
                order.push(r.algorithm);
            }
        }
        let algorithms = order
            .into_iter()
            .map(|algorithm| {
                let finals: Vec<&RoundLog> = runs
                    .iter()
                    .filter(|r| r.algorithm == algorithm)
                    .map(|r| r.last())
                    .collect();
                let col = |f: fn(&RoundLog) -> f64| {
                    MeanSe::of(&finals.iter().map(|l| f(l)).collect::<Vec<_>>())
                };
                AlgorithmSummary {
                    algorithm,
                    runs: finals.len(),
                    round: finals[0].round,
                    comm_rounds: finals[0].comm_rounds,
                    avg: col(|l| l.avg_acc),
                    worst: col(|l| l.worst_acc),
                    sd: col(|l| l.sd_acc),
                }
            })
            .collect();
        RunSummary { algorithms }
    }

    pub fn get(&self, algorithm: Algorithm) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|a| a.algorithm == algorithm)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub runs: Vec<SeedRun>,
    pub summary: RunSummary,
}

pub fn csv_header(workers: usize) -> String {
    let mut cols: Vec<String> = [
        "algorithm",
        "seed",
        "round",
        "comm_rounds",
        "avg_acc",
        "worst_acc",
        "sd_acc",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    cols.extend((0..workers).map(|n| format!("acc_w{n}")));
    cols.extend((0..workers).map(|n| format!("lambda_{n}")));
    cols.join(",")
}

fn write_run(out: &mut impl Write, run: &SeedRun) -> std::io::Result<()> {
    for l in &run.logs {
        write!(
            out,
            "{},{},{},{},{},{},{}",
            run.algorithm, run.seed, l.round, l.comm_rounds, l.avg_acc, l.worst_acc, l.sd_acc
        )?;
        for v in l.per_worker_acc.iter().chain(&l.lambda) {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Runs `jobs` in parallel on `threads` threads and hands results to
/// `sink` in job order as soon as each prefix is complete.
pub(crate) fn run_ordered<J, T, F, S>(jobs: &[J], threads: usize, work: F, mut sink: S) -> Result<Vec<T>>
where
    J: Sync,
    T: Send,
    F: Fn(&J) -> Result<T> + Sync,
    S: FnMut(&T) -> Result<()>,
{
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    let mut done = Vec::with_capacity(jobs.len());
    std::thread::scope(|scope| -> Result<()> {
        for _ in 0..threads.clamp(1, jobs.len().max(1)) {
            let tx = tx.clone();
            let (next, work) = (&next, &work);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= jobs.len() || tx.send((i, work(&jobs[i]))).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        let mut pending = BTreeMap::new();
        for (i, result) in rx {
            pending.insert(i, result);
            while let Some(result) = pending.remove(&done.len()) {
                match result {
                    Ok(value) => {
                        sink(&value)?;
                        done.push(value);
                    }
                    Err(e) => {
                        next.store(jobs.len(), Ordering::SeqCst);
                        return Err(e);
                    }
                }
            }
        }
        Ok(())
    })?;
    Ok(done)
}

/// Runs every (algorithm, seed) pair of `cfg` on `data`, writing the run CSV
/// to `csv_path` when given. Rows of finished runs are flushed even if a
/// later run fails.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    data: &[WorkerData],
    csv_path: Option<&Path>,
) -> Result<Experiment> {
    cfg.validate()?;
    let jobs: Vec<(Algorithm, u64)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let mut out = match csv_path {
        Some(path) => {
            let file = File::create(path).map_err(|e| Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            writeln!(w, "{}", csv_header(cfg.train.workers)).map_err(|e| Error::io(path, e))?;
            Some((path, w))
        }
        None => None,
    };
    let work = |&(algorithm, seed): &(Algorithm, u64)| -> Result<SeedRun> {
        log::info!("running {algorithm} seed {seed}");
        let run = run_with(&cfg.train_config(algorithm, seed), data, &mut ())?;
        Ok(SeedRun {
            algorithm,
            seed,
            logs: run.logs,
            theta: run.theta,
        })
    };
    let sink = |run: &SeedRun| -> Result<()> {
        if let Some((path, w)) = out.as_mut() {
            write_run(w, run)
                .and_then(|_| w.flush())
                .map_err(|e| Error::io(*path, e))?;
        }
        Ok(())
    };
    let runs = run_ordered(&jobs, cfg.jobs, work, sink)?;
    let summary = RunSummary::from_runs(&runs);
    Ok(Experiment { runs, summary })
}

/// Writes `algorithm,runs,round,comm_rounds` and mean/se of the final
/// avg, worst and sd accuracies.
pub fn write_summary_csv(path: &Path, summary: &RunSummary) -> Result<()> {
    let mut text = String::from(
        "algorithm,runs,round,comm_rounds,avg_mean,avg_se,worst_mean,worst_se,sd_mean,sd_se\n",
    );
    for a in &summary.algorithms {
        text += &format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            a.algorithm,
            a.runs,
            a.round,
            a.comm_rounds,
            a.avg.mean,
            a.avg.se,
            a.worst.mean,
            a.worst.se,
            a.sd.mean,
            a.sd.se
        );
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
