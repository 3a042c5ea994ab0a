//! Gradient-norm traces, constant estimates and the decay fit.

mod common;

use fgdra_core::diagnostics::{
    estimate_constants, full_gradient, grad_norm_trace, run_with_checkpoints, slope_fit,
    theorem_bound, write_diagnostics_csv, Checkpoint, ConvergenceTrace, TheoryEstimates,
};
use fgdra_core::fed::{Algorithm, TrainConfig};
use fgdra_core::mlp::{MiniBatch, ModelParams, PARAM_COUNT};
use fgdra_core::rng;
use proptest::prelude::*;

/// Mean of single-sample gradients: the full-batch gradient by another route.
fn per_sample_mean_gradient(ds: &fgdra_core::labeling::Dataset, theta: &ModelParams) -> Vec<f64> {
    let mut acc = vec![0.0; PARAM_COUNT];
    for i in 0..ds.len() {
        let g = theta.grad(&MiniBatch::from_indices(ds, &[i]).unwrap()).to_flat();
        for (a, v) in acc.iter_mut().zip(g) {
            *a += v;
        }
    }
    acc.iter().map(|a| a / ds.len() as f64).collect()
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

#[test]
fn single_worker_trace_is_full_gradient_norm() {
    let data = common::small_data(1, 100);
    let mut r = rng::from_seed(11);
    let checkpoints: Vec<Checkpoint> = (0..3)
        .map(|t| Checkpoint { t, theta: ModelParams::init(&mut r), lambda: vec![1.0] })
        .collect();
    let trace = grad_norm_trace(&data, &checkpoints).unwrap();
    for (cp, &v) in checkpoints.iter().zip(&trace.grad_norm_sq) {
        let direct = full_gradient(&data[0].train, &cp.theta).unwrap().norm_sqr();
        let oracle = norm_sq(&per_sample_mean_gradient(&data[0].train, &cp.theta));
        assert_eq!(v, direct);
        assert!((v - oracle).abs() <= 1e-10 * oracle, "{v} vs {oracle}");
    }
}

#[test]
fn weighted_trace_recomposes_worker_gradients() {
    let data = common::small_data(4, 100);
    let mut r = rng::from_seed(12);
    let theta = ModelParams::init(&mut r);
    let grads: Vec<Vec<f64>> = data
        .iter()
        .map(|d| full_gradient(&d.train, &theta).unwrap().to_flat())
        .collect();
    for lambda in [vec![0.25; 4], vec![0.1, 0.2, 0.3, 0.4], vec![0.0, 0.0, 1.0, 0.0]] {
        let cp = Checkpoint { t: 0, theta: theta.clone(), lambda: lambda.clone() };
        let got = grad_norm_trace(&data, &[cp]).unwrap().grad_norm_sq[0];
        let mut mix = vec![0.0; PARAM_COUNT];
        for (g, l) in grads.iter().zip(&lambda) {
            for (m, v) in mix.iter_mut().zip(g) {
                *m += l * v;
            }
        }
        let expect = norm_sq(&mix);
        assert!((got - expect).abs() <= 1e-12 * expect, "{got} vs {expect}");
    }
}

#[test]
fn checkpoints_follow_the_run() {
    let data = common::small_data(4, 60);
    let cfg = TrainConfig {
        rounds: 5,
        local_steps: 2,
        eval_every: 5,
        algorithm: Algorithm::Fgdra,
        ..TrainConfig::default()
    };
    let (out, cps) = run_with_checkpoints(&cfg, &data, 1).unwrap();
    assert_eq!(cps.iter().map(|c| c.t).collect::<Vec<_>>(), vec![0, 2, 4, 6, 8, 10]);
    assert_eq!(cps.last().unwrap().theta, out.theta);
    assert_eq!(cps.last().unwrap().lambda, out.lambda.as_slice());
    assert!(grad_norm_trace(&data, &[]).is_err());
}

#[test]
fn full_batches_have_no_gradient_noise() {
    let data = common::small_data(2, 50);
    let est = estimate_constants(&data, 100, 1000, &mut rng::from_seed(13)).unwrap();
    assert_eq!(est.nu_hat, 0.0);
    assert!(est.sigma_hat > 0.0 && est.l_hat > 0.0 && est.f0 > 0.0);
}

#[test]
fn more_probes_never_lower_the_maxima() {
    let data = common::small_data(2, 50);
    let a = estimate_constants(&data, 100, 10, &mut rng::from_seed(14)).unwrap();
    let b = estimate_constants(&data, 200, 10, &mut rng::from_seed(14)).unwrap();
    assert!(b.sigma_hat >= a.sigma_hat);
    assert!(b.nu_hat >= a.nu_hat);
    assert!(b.l_hat >= a.l_hat);
    assert!(estimate_constants(&data, 99, 10, &mut rng::from_seed(14)).is_err());
}

#[test]
fn diagnostics_csv_layout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let trace = ConvergenceTrace { t: vec![0, 10, 20], grad_norm_sq: vec![4.0, 2.0, 0.0] };
    let est = TheoryEstimates { sigma_hat: 1.0, nu_hat: 0.0, l_hat: 1.0, f0: 0.0 };
    write_diagnostics_csv(&path, &trace, &est, 8).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,grad_norm_sq,running_mean,bound");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].ends_with(','));
    let last: Vec<f64> = lines[3].split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(last[2], 2.0);
    assert!((last[3] - 9.5 / 20f64.sqrt()).abs() < 1e-12);
}

proptest! {
    #[test]
    fn slope_recovers_power_laws(c in 1e-3f64..1e3, p in -2.0f64..1.0, n in 5usize..60) {
        let t: Vec<usize> = (1..=n).map(|i| i * 7).collect();
        let grad_norm_sq = t.iter().map(|&t| c * (t as f64).powf(p)).collect();
        let fit = slope_fit(&ConvergenceTrace { t, grad_norm_sq }).unwrap();
        prop_assert!((fit - p).abs() <= 1e-9, "{fit} vs {p}");
    }

    #[test]
    fn bound_scales_as_inverse_root(
        sigma in 0.0f64..20.0, nu in 0.0f64..20.0, f0 in 0.0f64..5.0,
        m in 1usize..10, t in 1usize..100_000,
    ) {
        let est = TheoryEstimates { sigma_hat: sigma, nu_hat: nu, l_hat: 1.0, f0 };
        let a = theorem_bound(&est, m, t).unwrap();
        let b = theorem_bound(&est, m, 4 * t).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - 2.0 * b).abs() <= 1e-12 * a.max(1e-300));
    }
}
