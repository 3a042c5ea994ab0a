//! Empirical checks of the FGDRA convergence theorem.
//!
//! The theorem bounds the average squared gradient norm of the
//! λ-weighted objective `F(λ, θ) = Σ λ_n ℓ_n(θ)` over `T = K·tau`
//! iterations by
//!
//! ```text
//! (2 F0 + (17/2 + 8/m) σ² + 17 ν²) / √T
//! ```
//!
//! where σ bounds stochastic gradient norms, ν bounds their deviation from
//! the full-batch gradient and F0 is the objective at initialization. The
//! constants are not available in closed form for an MLP, so
//! [`estimate_constants`] takes empirical maxima over random probes.
//!
//! Averaged iterates are only materialized at round boundaries `t = k·tau`,
//! where they equal the global model, so traces sample the theorem's
//! quantity there.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fed::{run_with, DualWeights, RunOutput, TrainConfig};
use crate::labeling::{Dataset, WorkerData};
use crate::mlp::{MiniBatch, ModelParams};

/// Relative size of the perturbation used for smoothness probes.
const SMOOTHNESS_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryEstimates {
    pub sigma_hat: f64,
    pub nu_hat: f64,
    pub l_hat: f64,
    pub f0: f64,
}

/// Global model and dual weights at iteration `t` (a round boundary).
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub t: usize,
    pub theta: ModelParams,
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTrace {
    pub t: Vec<usize>,
    pub grad_norm_sq: Vec<f64>,
}

impl ConvergenceTrace {
    /// Prefix averages of `grad_norm_sq` over the recorded checkpoints.
    pub fn running_mean(&self) -> ConvergenceTrace {
        let mut sum = 0.0;
        let grad_norm_sq = self
            .grad_norm_sq
            .iter()
            .enumerate()
            .map(|(i, v)| {
                sum += v;
                sum / (i + 1) as f64
            })
            .collect();
        ConvergenceTrace {
            t: self.t.clone(),
            grad_norm_sq,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

/// Gradient of the mean loss over all of `ds`.
pub fn full_gradient(ds: &Dataset, theta: &ModelParams) -> Result<ModelParams> {
    Ok(theta.grad(&MiniBatch::full(ds)?))
}

/// `Σ_n λ_n ∇ℓ_n(θ)` with full-batch worker gradients, summed in worker order.
pub fn weighted_gradient(
    train: &[&Dataset],
    theta: &ModelParams,
    lambda: &[f64],
) -> Result<ModelParams> {
    if train.len() != lambda.len() {
        return Err(Error::DimensionMismatch {
            expected: train.len(),
            actual: lambda.len(),
        });
    }
    let mut total = ModelParams::zeros();
    for (ds, &l) in train.iter().zip(lambda) {
        total.axpy(l, &full_gradient(ds, theta)?);
    }
    Ok(total)
}

/// `‖Σ_n λ_n ∇ℓ_n(θ)‖²` at every checkpoint, on the workers' training splits.
pub fn grad_norm_trace(data: &[WorkerData], checkpoints: &[Checkpoint]) -> Result<ConvergenceTrace> {
    if checkpoints.is_empty() {
        return Err(Error::MissingCheckpoints);
    }
    let train: Vec<&Dataset> = data.iter().map(|d| &d.train).collect();
    let mut trace = ConvergenceTrace::default();
    for cp in checkpoints {
        let g = weighted_gradient(&train, &cp.theta, &cp.lambda)?;
        trace.t.push(cp.t);
        trace.grad_norm_sq.push(g.norm_sqr());
    }
    Ok(trace)
}

/// Runs `config` and keeps the global model every `stride` rounds, plus the
/// initial and final ones.
pub fn run_with_checkpoints(
    config: &TrainConfig,
    data: &[WorkerData],
    stride: usize,
) -> Result<(RunOutput, Vec<Checkpoint>)> {
    if stride == 0 {
        return Err(Error::InvalidArgument("checkpoint stride must be positive".into()));
    }
    let mut checkpoints = Vec::new();
    let tau = config.local_steps;
    let last = config.rounds;
    let mut keep = |round: usize, theta: &ModelParams, lambda: &DualWeights| {
        if round.is_multiple_of(stride) || round == last {
            checkpoints.push(Checkpoint {
                t: round * tau,
                theta: theta.clone(),
                lambda: lambda.as_slice().to_vec(),
            });
        }
    };
    let out = run_with(config, data, &mut keep)?;
    Ok((out, checkpoints))
}

/// Probes the assumption constants on the workers' training splits.
///
/// Probe `i` draws a fresh initialization, uses worker `i mod N`, and takes
/// one stochastic batch of size `batch_size` (the whole split when it is at
/// least that large). All probes come from `rng` in sequence, so a run with
/// more probes sees a superset of the probes of a shorter one. `f0` is the
/// uniform-λ objective at the probe points, averaged.
pub fn estimate_constants<R: Rng + ?Sized>(
    data: &[WorkerData],
    n_probes: usize,
    batch_size: usize,
    rng: &mut R,
) -> Result<TheoryEstimates> {
    if n_probes < 100 {
        return Err(Error::InvalidArgument(format!(
            "need at least 100 probes, got {n_probes}"
        )));
    }
    if data.is_empty() || data.iter().any(|d| d.train.is_empty()) || batch_size == 0 {
        return Err(Error::InvalidArgument(
            "need non-empty training splits and a positive batch size".into(),
        ));
    }
    let full: Vec<MiniBatch> = data
        .iter()
        .map(|d| MiniBatch::full(&d.train))
        .collect::<Result<_>>()?;
    let n = data.len() as f64;
    let mut est = TheoryEstimates {
        sigma_hat: 0.0,
        nu_hat: 0.0,
        l_hat: 0.0,
        f0: 0.0,
    };
    for i in 0..n_probes {
        let w = i % data.len();
        let theta = ModelParams::init(rng);
        let batch = MiniBatch::draw(&data[w].train, batch_size, rng)?;
        let g_stoch = theta.grad(&batch);
        let g_full = theta.grad(&full[w]);
        est.sigma_hat = est.sigma_hat.max(g_stoch.norm());
        est.nu_hat = est.nu_hat.max(g_stoch.dist_sqr(&g_full).sqrt());

        let mut dir = ModelParams::zeros();
        for k in 0..crate::mlp::PARAM_COUNT {
            dir.set(k, rng.sample(StandardNormal));
        }
        let step = SMOOTHNESS_STEP * theta.norm() / dir.norm();
        let mut nearby = theta.clone();
        nearby.axpy(step, &dir);
        let gap = nearby.dist_sqr(&theta).sqrt();
        if gap > 0.0 {
            let ratio = nearby.grad(&full[w]).dist_sqr(&g_full).sqrt() / gap;
            est.l_hat = est.l_hat.max(ratio);
        }

        let objective: f64 = full.iter().map(|b| theta.loss(b) / n).sum();
        est.f0 += objective / n_probes as f64;
    }
    Ok(est)
}

/// Right-hand side of the convergence bound.
pub fn theorem_bound(est: &TheoryEstimates, m: usize, t: usize) -> Result<f64> {
    if m == 0 || t == 0 {
        return Err(Error::InvalidArgument("m and T must be at least 1".into()));
    }
    let sigma2 = est.sigma_hat * est.sigma_hat;
    let nu2 = est.nu_hat * est.nu_hat;
    let numerator = 2.0 * est.f0 + (8.5 + 8.0 / m as f64) * sigma2 + 17.0 * nu2;
    Ok(numerator / (t as f64).sqrt())
}

/// Least-squares slope of `ln(value)` against `ln(t)`.
///
/// Fits the values as given; pass [`ConvergenceTrace::running_mean`] to fit
/// the running average. The point at `t = 0` is ignored, nonpositive values
/// are skipped with a warning, and at least five points must remain.
pub fn slope_fit(trace: &ConvergenceTrace) -> Result<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (&t, &v) in trace.t.iter().zip(&trace.grad_norm_sq) {
        if t == 0 {
            continue;
        }
        if !(v > 0.0) {
            log::warn!("slope fit skips nonpositive value {v} at t={t}");
            continue;
        }
        xs.push((t as f64).ln());
        ys.push(v.ln());
    }
    if xs.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "slope fit needs at least 5 usable points, got {}",
            xs.len()
        )));
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidArgument("slope fit needs distinct t values".into()));
    }
    Ok(sxy / sxx)
}

/// Writes `t,grad_norm_sq,running_mean,bound`; the bound column is empty at `t = 0`.
pub fn write_diagnostics_csv(
    path: &Path,
    trace: &ConvergenceTrace,
    est: &TheoryEstimates,
    m: usize,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let running = trace.running_mean();
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "t,grad_norm_sq,running_mean,bound")?;
        for i in 0..trace.len() {
            let t = trace.t[i];
            let bound = match theorem_bound(est, m, t) {
                Ok(b) => b.to_string(),
                Err(_) => String::new(),
            };
            writeln!(
                out,
                "{},{},{},{}",
                t, trace.grad_norm_sq[i], running.grad_norm_sq[i], bound
            )?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64) -> ConvergenceTrace {
        let t: Vec<usize> = (1..=12).map(|i| i * 10).collect();
        let grad_norm_sq = t.iter().map(|&t| f(t as f64)).collect();
        ConvergenceTrace { t, grad_norm_sq }
    }

    #[test]
    fn bound_examples() {
        let zero = TheoryEstimates {
            sigma_hat: 0.0,
            nu_hat: 0.0,
            l_hat: 3.0,
            f0: 0.0,
        };
        assert_eq!(theorem_bound(&zero, 3, 10).unwrap(), 0.0);
        let unit = TheoryEstimates {
            sigma_hat: 1.0,
            ..zero
        };
        assert!((theorem_bound(&unit, 8, 1).unwrap() - 9.5).abs() < 1e-12);
        let est = TheoryEstimates {
            sigma_hat: 1.3,
            nu_hat: 0.4,
            l_hat: 1.0,
            f0: 1.1,
        };
        let b = theorem_bound(&est, 3, 100).unwrap();
        assert!((theorem_bound(&est, 3, 400).unwrap() - b / 2.0).abs() < 1e-12);
        assert!(theorem_bound(&est, 0, 100).is_err());
        assert!(theorem_bound(&est, 3, 0).is_err());
    }

    #[test]
    fn slope_examples() {
        assert!((slope_fit(&synthetic(|t| 3.0 / t.sqrt())).unwrap() + 0.5).abs() < 1e-6);
        assert!((slope_fit(&synthetic(|t| 2.0 / t)).unwrap() + 1.0).abs() < 1e-6);
        assert!(slope_fit(&synthetic(|_| 4.2)).unwrap().abs() < 1e-12);
    }

    #[test]
    fn slope_skips_nonpositive_and_needs_five_points() {
        let mut tr = synthetic(|t| 1.0 / t);
        tr.grad_norm_sq[3] = 0.0;
        tr.grad_norm_sq[5] = -1.0;
        assert!((slope_fit(&tr).unwrap() + 1.0).abs() < 1e-6);
        let short = ConvergenceTrace {
            t: vec![1, 2, 3, 4],
            grad_norm_sq: vec![1.0; 4],
        };
        assert!(slope_fit(&short).is_err());
    }

    #[test]
    fn running_mean_is_prefix_average() {
        let tr = ConvergenceTrace {
            t: vec![0, 10, 20],
            grad_norm_sq: vec![3.0, 1.0, 2.0],
        };
        assert_eq!(tr.running_mean().grad_norm_sq, vec![3.0, 2.0, 2.0]);
    }

    #[test]
    fn empty_checkpoints_rejected() {
        assert!(matches!(grad_norm_trace(&[], &[]), Err(Error::MissingCheckpoints)));
    }
}
