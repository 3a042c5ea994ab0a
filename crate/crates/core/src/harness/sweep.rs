//! One-axis hyperparameter sweeps reported as "avg/worst" table cells.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fed::Algorithm;
use crate::harness::config::{ExperimentConfig, SweepAxis};
use crate::harness::experiment::{run_experiment, Experiment, MeanSe};
use crate::labeling::WorkerData;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub value: usize,
    pub algorithm: Algorithm,
    pub avg: MeanSe,
    pub worst: MeanSe,
}

impl SweepCell {
    /// Seed-mean final accuracies as `avg/worst` with two decimals.
    pub fn label(&self) -> String {
        format!("{:.2}/{:.2}", self.avg.mean, self.worst.mean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub cells: Vec<SweepCell>,
    /// One experiment per sweep value, in order.
    pub experiments: Vec<(usize, Experiment)>,
}

impl SweepResult {
    pub fn cell(&self, algorithm: Algorithm, value: usize) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.algorithm == algorithm && c.value == value)
    }
}

/// Runs the full experiment once per sweep value. Run CSVs go to
/// `run_{axis}{value}.csv` under `out_dir` when given.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    data: &[WorkerData],
    out_dir: Option<&Path>,
) -> Result<SweepResult> {
    cfg.validate()?;
    if cfg.sweep_axis == SweepAxis::None || cfg.sweep_values.is_empty() {
        return Err(Error::config("sweep_axis", "a sweep needs an axis and values"));
    }
    let mut cells = Vec::new();
    let mut experiments = Vec::new();
    for &value in &cfg.sweep_values {
        let point = cfg.with_sweep_value(value);
        let csv = out_dir.map(|d| d.join(format!("run_{}{}.csv", cfg.sweep_axis, value)));
        let exp = run_experiment(&point, data, csv.as_deref())?;
        for s in &exp.summary.algorithms {
            cells.push(SweepCell {
                value,
                algorithm: s.algorithm,
                avg: s.avg,
                worst: s.worst,
            });
        }
        experiments.push((value, exp));
    }
    Ok(SweepResult {
        axis: cfg.sweep_axis,
        cells,
        experiments,
    })
}

/// Long form: `axis,value,algorithm,avg_mean,avg_se,worst_mean,worst_se,cell`.
pub fn write_sweep_csv(path: &Path, result: &SweepResult) -> Result<()> {
    let mut text = String::from("axis,value,algorithm,avg_mean,avg_se,worst_mean,worst_se,cell\n");
    for c in &result.cells {
        text += &format!(
            "{},{},{},{},{},{},{},{}\n",
            result.axis,
            c.value,
            c.algorithm,
            c.avg.mean,
            c.avg.se,
            c.worst.mean,
            c.worst.se,
            c.label()
        );
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Table layout: one row per algorithm, one column per sweep value.
pub fn write_sweep_table(path: &Path, result: &SweepResult) -> Result<()> {
    let mut values: Vec<usize> = Vec::new();
    let mut algos: Vec<Algorithm> = Vec::new();
    for c in &result.cells {
        if !values.contains(&c.value) {
            values.push(c.value);
        }
        if !algos.contains(&c.algorithm) {
            algos.push(c.algorithm);
        }
    }
    let mut text = String::from("algorithm");
    for v in &values {
        text += &format!(",{}={}", result.axis, v);
    }
    text.push('\n');
    for a in algos {
        text += a.name();
        for &v in &values {
            let cell = result.cell(a, v).map(SweepCell::label).unwrap_or_default();
            text += &format!(",{cell}");
        }
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
