#![allow(dead_code)]

use fgdra_core::harness::config::ExperimentConfig;
use fgdra_core::harness::data::generate;
use fgdra_core::labeling::{RateParams, WorkerData};
use num_complex::Complex64;

/// Config with `workers` workers (all sampled) and `samples` samples each.
pub fn small_config(workers: usize, samples: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.set("sampled", "1").unwrap();
    cfg.set("workers", &workers.to_string()).unwrap();
    cfg.set("sampled", &workers.to_string()).unwrap();
    cfg.set("samples_per_worker", &samples.to_string()).unwrap();
    cfg.validate().unwrap();
    cfg
}

pub fn small_data(workers: usize, samples: usize) -> Vec<WorkerData> {
    generate(&small_config(workers, samples)).unwrap().1
}

/// Independent scalar re-implementation of the rate: explicit real/imag sums.
pub fn scalar_rate(phi: &[Complex64], h: &[Complex64], g: &[Complex64], p: &RateParams) -> f64 {
    let (mut re, mut im) = (0.0, 0.0);
    for q in 0..phi.len() {
        // conj(g) * phi * h
        let (gr, gi) = (g[q].re, -g[q].im);
        let (fr, fi) = (phi[q].re, phi[q].im);
        let (hr, hi) = (h[q].re, h[q].im);
        let (ar, ai) = (gr * fr - gi * fi, gr * fi + gi * fr);
        re += ar * hr - ai * hi;
        im += ar * hi + ai * hr;
    }
    let snr = (re * re + im * im) * p.tx_power / (p.bandwidth * p.noise_psd);
    p.bandwidth * snr.ln_1p() / std::f64::consts::LN_2
}
