//! Federated training over simulated workers and a parameter server.
//!
//! Three algorithms share the same round skeleton:
//!
//! * **FGDRA**: the server samples `m` workers according to the dual
//!   weights, each sampled worker runs `tau` local SGD steps with step
//!   `alpha * lambda_n`, then multiplies its own `lambda_n` by
//!   `exp(gamma * loss)` on a fresh batch and returns model and weight in
//!   the same exchange. The server averages the models and renormalizes
//!   the weights. One communication round per iteration.
//! * **DRFA**: same sampling and weighted local steps, but the dual update
//!   happens at the server from losses that a second, uniformly sampled set
//!   of workers evaluates at a random intermediate averaged iterate. Two
//!   communication rounds per iteration.
//! * **FedAvg**: uniform sampling, unweighted local steps with step `alpha`,
//!   no dual variables.
//!
//! All randomness comes from [`crate::rng::substream`] keyed by
//! `(seed, purpose, worker, round)`, and server sums run in ascending worker
//! order, so a run does not depend on worker execution order.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::harness::metrics::Evaluator;
use crate::labeling::{Dataset, WorkerData};
use crate::mlp::{MiniBatch, ModelParams};
use crate::rng::{substream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Algorithm {
    Fgdra,
    Drfa,
    FedAvg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Fgdra, Algorithm::Drfa, Algorithm::FedAvg];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Fgdra => "fgdra",
            Algorithm::Drfa => "drfa",
            Algorithm::FedAvg => "fedavg",
        }
    }

    /// Communication rounds consumed by one algorithmic round.
    pub fn exchanges_per_round(self) -> usize {
        match self {
            Algorithm::Drfa => 2,
            Algorithm::Fgdra | Algorithm::FedAvg => 1,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fgdra" => Ok(Algorithm::Fgdra),
            "drfa" => Ok(Algorithm::Drfa),
            "fedavg" => Ok(Algorithm::FedAvg),
            other => Err(Error::InvalidArgument(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// N
    pub workers: usize,
    /// m
    pub sampled: usize,
    /// K
    pub rounds: usize,
    /// Local SGD steps per round (tau).
    pub local_steps: usize,
    pub alpha: f64,
    pub gamma: f64,
    /// B
    pub batch_size: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    /// Evaluate test accuracy every this many rounds (the last round is always evaluated).
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            workers: 4,
            sampled: 3,
            rounds: 800,
            local_steps: 10,
            alpha: 2e-3,
            gamma: 5e-3,
            batch_size: 50,
            seed: 0,
            algorithm: Algorithm::Fgdra,
            eval_every: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.workers == 0 {
            return bad("need at least one worker".into());
        }
        if self.sampled == 0 || self.sampled > self.workers {
            return bad(format!(
                "sampled workers must be in 1..={}, got {}",
                self.workers, self.sampled
            ));
        }
        if self.local_steps == 0 || self.batch_size == 0 || self.eval_every == 0 {
            return bad("local steps, batch size and eval interval must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be non-negative, got {}", self.gamma));
        }
        Ok(())
    }

    /// Total local iterations T = K * tau.
    pub fn total_iterations(&self) -> usize {
        self.rounds * self.local_steps
    }
}

/// Dual weights on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct DualWeights(Vec<f64>);

impl DualWeights {
    pub fn uniform(n: usize) -> Self {
        DualWeights(vec![1.0 / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundLog {
    /// Completed algorithmic rounds.
    pub round: usize,
    pub comm_rounds: usize,
    /// Percent.
    pub per_worker_acc: Vec<f64>,
    pub avg_acc: f64,
    pub worst_acc: f64,
    pub sd_acc: f64,
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub logs: Vec<RoundLog>,
    pub theta: ModelParams,
    pub lambda: DualWeights,
    pub comm_rounds: usize,
}

/// Sees the global model after initialization (round 0) and after every round.
pub trait RoundObserver {
    fn on_round(&mut self, round: usize, theta: &ModelParams, lambda: &DualWeights);
}

impl RoundObserver for () {
    fn on_round(&mut self, _: usize, _: &ModelParams, _: &DualWeights) {}
}

impl<F: FnMut(usize, &ModelParams, &DualWeights)> RoundObserver for F {
    fn on_round(&mut self, round: usize, theta: &ModelParams, lambda: &DualWeights) {
        self(round, theta, lambda)
    }
}

/// `m` distinct workers by sequential proportional draws without replacement.
///
/// Once the remaining weight is exhausted the rest are drawn uniformly from
/// the unchosen workers. Returned in ascending order.
pub fn sample_workers<R: Rng + ?Sized>(lambda: &[f64], m: usize, rng: &mut R) -> Result<Vec<usize>> {
    let n = lambda.len();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {m} of {n} workers"
        )));
    }
    if lambda.iter().any(|&l| !(l >= 0.0)) {
        return Err(Error::InvalidArgument("dual weights must be non-negative".into()));
    }
    let mut chosen = vec![false; n];
    let mut picked = Vec::with_capacity(m);
    for _ in 0..m {
        let total: f64 = (0..n).filter(|&i| !chosen[i]).map(|i| lambda[i]).sum();
        let pick = if total > 0.0 {
            let u = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            let mut last_positive = 0;
            for i in (0..n).filter(|&i| !chosen[i] && lambda[i] > 0.0) {
                acc += lambda[i];
                last_positive = i;
                if u < acc {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or(last_positive)
        } else {
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        picked.push(pick);
    }
    picked.sort_unstable();
    Ok(picked)
}

fn sample_uniform<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Vec<usize> {
    let mut v = index::sample(rng, n, m).into_vec();
    v.sort_unstable();
    v
}

/// `tau` SGD steps from `theta0` with step `alpha * lambda_n` on batches
/// drawn with replacement (the whole split when `batch_size` covers it).
pub fn local_sgd<R: Rng + ?Sized>(
    dataset: &Dataset,
    theta0: &ModelParams,
    lambda_n: f64,
    tau: usize,
    alpha: f64,
    batch_size: usize,
    rng: &mut R,
) -> Result<ModelParams> {
    Ok(local_sgd_with_snapshot(dataset, theta0, lambda_n, tau, alpha, batch_size, None, rng)?.0)
}

/// As [`local_sgd`], also returning the iterate before step `snapshot_at`.
#[allow(clippy::too_many_arguments)]
fn local_sgd_with_snapshot<R: Rng + ?Sized>(
    dataset: &Dataset,
    theta0: &ModelParams,
    lambda_n: f64,
    tau: usize,
    alpha: f64,
    batch_size: usize,
    snapshot_at: Option<usize>,
    rng: &mut R,
) -> Result<(ModelParams, Option<ModelParams>)> {
    let step = alpha * lambda_n;
    let mut theta = theta0.clone();
    let mut snapshot = None;
    for t in 0..tau {
        if snapshot_at == Some(t) {
            snapshot = Some(theta.clone());
        }
        let batch = MiniBatch::draw(dataset, batch_size, rng)?;
        let g = theta.grad(&batch);
        theta.descend(step, &g);
    }
    Ok((theta, snapshot))
}

/// Exponentiated ascent `lambda_n * exp(gamma * loss(theta_n; batch))`.
pub fn dual_update(lambda_n: f64, theta_n: &ModelParams, gamma: f64, batch: &MiniBatch) -> f64 {
    lambda_n * (gamma * theta_n.loss(batch)).exp()
}

/// Unweighted mean, summed in the given order.
pub fn ps_aggregate(thetas: &[ModelParams]) -> Result<ModelParams> {
    let (first, rest) = thetas
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("nothing to aggregate".into()))?;
    if rest.is_empty() {
        return Ok(first.clone());
    }
    let mut sum = first.clone();
    for t in rest {
        sum.axpy(1.0, t);
    }
    sum.scale(1.0 / thetas.len() as f64);
    Ok(sum)
}

/// Projects non-negative weights onto the simplex by rescaling.
/// An all-zero vector is reset to uniform.
pub fn normalize(lambda: &[f64]) -> Result<DualWeights> {
    if lambda.is_empty() {
        return Err(Error::InvalidArgument("empty dual vector".into()));
    }
    if lambda.iter().any(|&l| !(l >= 0.0) || !l.is_finite()) {
        return Err(Error::InvalidArgument(
            "dual weights must be finite and non-negative".into(),
        ));
    }
    let total: f64 = lambda.iter().sum();
    if total == 0.0 {
        log::warn!("all dual weights are zero, resetting to uniform");
        return Ok(DualWeights::uniform(lambda.len()));
    }
    Ok(DualWeights(lambda.iter().map(|l| l / total).collect()))
}

pub fn run_fgdra(config: &TrainConfig, data: &[WorkerData]) -> Result<RunOutput> {
    run_with(&TrainConfig { algorithm: Algorithm::Fgdra, ..config.clone() }, data, &mut ())
}

pub fn run_fedavg(config: &TrainConfig, data: &[WorkerData]) -> Result<RunOutput> {
    run_with(&TrainConfig { algorithm: Algorithm::FedAvg, ..config.clone() }, data, &mut ())
}

pub fn run_drfa(config: &TrainConfig, data: &[WorkerData]) -> Result<RunOutput> {
    run_with(&TrainConfig { algorithm: Algorithm::Drfa, ..config.clone() }, data, &mut ())
}

/// Runs `config.algorithm`, reporting the global model to `observer`.
pub fn run_with(
    config: &TrainConfig,
    data: &[WorkerData],
    observer: &mut dyn RoundObserver,
) -> Result<RunOutput> {
    config.validate()?;
    if data.len() != config.workers {
        return Err(Error::InvalidArgument(format!(
            "config has {} workers but {} datasets were given",
            config.workers,
            data.len()
        )));
    }
    if data.iter().any(|d| d.train.is_empty()) {
        return Err(Error::InvalidArgument("every worker needs training data".into()));
    }

    let evaluator = Evaluator::new(data)?;
    let n = config.workers;
    let seed = config.seed;
    let algo = config.algorithm;
    let mut theta = ModelParams::init(&mut substream(seed, Purpose::Init, 0, 0));
    let mut lambda = DualWeights::uniform(n);
    let mut comm_rounds = 0;
    let mut logs = Vec::new();
    observer.on_round(0, &theta, &lambda);

    for k in 0..config.rounds {
        let round = k as u64;
        let sampling_weights = match algo {
            Algorithm::FedAvg => DualWeights::uniform(n),
            _ => lambda.clone(),
        };
        let selected = sample_workers(
            sampling_weights.as_slice(),
            config.sampled,
            &mut substream(seed, Purpose::Sampling, 0, round),
        )?;
        let snapshot_at = match algo {
            Algorithm::Drfa => Some(
                substream(seed, Purpose::Snapshot, 0, round).random_range(0..config.local_steps),
            ),
            _ => None,
        };

        let mut locals = Vec::with_capacity(selected.len());
        let mut snapshots = Vec::new();
        let mut next_lambda = lambda.as_slice().to_vec();
        for &w in &selected {
            let train = &data[w].train;
            let weight = match algo {
                Algorithm::FedAvg => 1.0,
                _ => lambda.as_slice()[w],
            };
            let (local, snap) = local_sgd_with_snapshot(
                train,
                &theta,
                weight,
                config.local_steps,
                config.alpha,
                config.batch_size,
                snapshot_at,
                &mut substream(seed, Purpose::LocalSgd, w as u64, round),
            )?;
            if algo == Algorithm::Fgdra {
                let mut rng = substream(seed, Purpose::DualBatch, w as u64, round);
                let batch = MiniBatch::draw(train, config.batch_size, &mut rng)?;
                next_lambda[w] = dual_update(next_lambda[w], &local, config.gamma, &batch);
            }
            locals.push(local);
            snapshots.extend(snap);
        }
        theta = ps_aggregate(&locals)?;
        comm_rounds += 1;

        match algo {
            Algorithm::Fgdra => lambda = normalize(&next_lambda)?,
            Algorithm::Drfa => {
                let probe = ps_aggregate(&snapshots)?;
                let mut rng = substream(seed, Purpose::DualSampling, 0, round);
                for w in sample_uniform(n, config.sampled, &mut rng) {
                    let mut rng = substream(seed, Purpose::DualBatch, w as u64, round);
                    let batch = MiniBatch::draw(&data[w].train, config.batch_size, &mut rng)?;
                    next_lambda[w] = dual_update(next_lambda[w], &probe, config.gamma, &batch);
                }
                lambda = normalize(&next_lambda)?;
                comm_rounds += 1;
            }
            Algorithm::FedAvg => {}
        }

        let done = k + 1;
        observer.on_round(done, &theta, &lambda);
        if done % config.eval_every == 0 || done == config.rounds {
            let eval = evaluator.evaluate(&theta);
            logs.push(RoundLog {
                round: done,
                comm_rounds,
                per_worker_acc: eval.per_worker,
                avg_acc: eval.avg,
                worst_acc: eval.worst,
                sd_acc: eval.sd,
                lambda: lambda.as_slice().to_vec(),
            });
        }
    }

    Ok(RunOutput {
        logs,
        theta,
        lambda,
        comm_rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn sampling_edge_cases() {
        let mut r = rng::from_seed(1);
        assert_eq!(sample_workers(&[1.0, 0.0, 0.0, 0.0], 1, &mut r).unwrap(), vec![0]);
        for _ in 0..20 {
            assert_eq!(
                sample_workers(&[0.9, 0.1, 0.0, 0.0], 4, &mut r).unwrap(),
                vec![0, 1, 2, 3]
            );
        }
        let two = sample_workers(&[1.0, 0.0, 0.0, 0.0], 2, &mut r).unwrap();
        assert_eq!(two.len(), 2);
        assert!(two.contains(&0));
        assert!(sample_workers(&[0.5, 0.5], 3, &mut r).is_err());
        assert!(sample_workers(&[0.5, 0.5], 0, &mut r).is_err());
    }

    #[test]
    fn normalize_cases() {
        assert_eq!(normalize(&[2.0; 4]).unwrap().as_slice(), &[0.25; 4]);
        assert_eq!(normalize(&[1.0, 3.0]).unwrap().as_slice(), &[0.25, 0.75]);
        let v = [0.1, 0.2, 0.3, 0.4];
        let n = normalize(&v).unwrap();
        for (a, b) in n.as_slice().iter().zip(&v) {
            assert!((a - b).abs() <= 1e-15);
        }
        assert_eq!(normalize(&[0.0; 3]).unwrap(), DualWeights::uniform(3));
        assert!(normalize(&[-1.0, 2.0]).is_err());
    }

    #[test]
    fn dual_update_cases() {
        let theta = ModelParams::zeros();
        let batch = MiniBatch::new(ndarray::Array2::zeros((2, 400)), vec![0, 3]).unwrap();
        assert_eq!(dual_update(0.3, &theta, 0.0, &batch), 0.3);
        assert_eq!(dual_update(0.0, &theta, 5e-3, &batch), 0.0);
        let v = dual_update(0.25, &theta, 5e-3, &batch);
        assert!((v - 0.25 * (0.005 * 4f64.ln()).exp()).abs() < 1e-15);
        // 0.25 * exp(0.005 * ln 4) = 0.2517389 (quoted elsewhere as ~0.251736)
        assert!((v - 0.251_738_9).abs() < 1e-7);
    }

    #[test]
    fn aggregate_cases() {
        let a = ModelParams::init(&mut rng::from_seed(1));
        assert_eq!(ps_aggregate(std::slice::from_ref(&a)).unwrap(), a);
        let same = ps_aggregate(&[a.clone(), a.clone(), a.clone()]).unwrap();
        assert!(same.dist_sqr(&a).sqrt() < 1e-15 * a.norm());
        let mut neg = a.clone();
        neg.scale(-1.0);
        assert_eq!(ps_aggregate(&[a, neg]).unwrap().norm_sqr(), 0.0);
        assert!(ps_aggregate(&[]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate().is_ok());
        c.sampled = 5;
        assert!(c.validate().is_err());
        let c = TrainConfig { alpha: 0.0, ..Default::default() };
        assert!(c.validate().is_err());
        assert_eq!("DRFA".parse::<Algorithm>().unwrap(), Algorithm::Drfa);
        assert!("sgd".parse::<Algorithm>().is_err());
    }
}
