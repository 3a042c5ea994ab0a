//! Per-worker test accuracy and the three summary statistics plotted
//! against communication rounds: average, worst and spread.

use crate::error::Result;
use crate::labeling::WorkerData;
use crate::mlp::{MiniBatch, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Percent correct on each worker's test split.
    pub per_worker: Vec<f64>,
    pub avg: f64,
    pub worst: f64,
    /// Population standard deviation across workers.
    pub sd: f64,
}

impl Evaluation {
    pub fn from_accuracies(per_worker: Vec<f64>) -> Self {
        let n = per_worker.len() as f64;
        let avg = per_worker.iter().sum::<f64>() / n;
        let worst = per_worker.iter().cloned().fold(f64::INFINITY, f64::min);
        let sd = (per_worker.iter().map(|a| (a - avg).powi(2)).sum::<f64>() / n).sqrt();
        Evaluation {
            per_worker,
            avg,
            worst,
            sd,
        }
    }
}

/// Holds each worker's test split as a ready-made batch.
pub struct Evaluator {
    tests: Vec<MiniBatch>,
}

impl Evaluator {
    pub fn new(data: &[WorkerData]) -> Result<Self> {
        let tests = data
            .iter()
            .map(|d| MiniBatch::full(&d.test))
            .collect::<Result<Vec<_>>>()?;
        Ok(Evaluator { tests })
    }

    pub fn evaluate(&self, theta: &ModelParams) -> Evaluation {
        let per_worker = self
            .tests
            .iter()
            .map(|batch| {
                let correct = theta
                    .predict(&batch.inputs)
                    .iter()
                    .zip(&batch.labels)
                    .filter(|(p, l)| p == l)
                    .count();
                100.0 * correct as f64 / batch.len() as f64
            })
            .collect();
        Evaluation::from_accuracies(per_worker)
    }
}

pub fn evaluate(theta: &ModelParams, data: &[WorkerData]) -> Result<Evaluation> {
    Ok(Evaluator::new(data)?.evaluate(theta))
}
