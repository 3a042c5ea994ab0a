//! Downlink rate, configuration codebook, optimal-class labels and
//! per-worker dataset synthesis.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::channel::{array_response, gen_channel_pair, ChannelSample, ScenarioGeometry};
use crate::error::{Error, Result};
use crate::profile::WorkerProfile;

/// Number of configuration classes.
pub const NUM_CLASSES: usize = 4;
/// Elements per RIS; fixed by the 400-feature classifier input.
pub const NUM_ELEMENTS: usize = 100;
pub const FEATURE_DIM: usize = 4 * NUM_ELEMENTS;

/// Azimuth offsets (degrees) of the four codewords relative to the nominal RX direction.
pub const CODEWORD_OFFSETS_DEG: [f64; NUM_CLASSES] = [-20.0, -7.0, 7.0, 20.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    /// Hz
    pub bandwidth: f64,
    /// W
    pub tx_power: f64,
    /// W/Hz
    pub noise_psd: f64,
}

impl Default for RateParams {
    fn default() -> Self {
        RateParams {
            bandwidth: 100.0e6,
            tx_power: 1.0,
            // -174 dBm/Hz
            noise_psd: 10f64.powf(-17.4) * 1.0e-3,
        }
    }
}

impl RateParams {
    pub fn validate(&self) -> Result<()> {
        if self.bandwidth > 0.0 && self.tx_power > 0.0 && self.noise_psd > 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(
                "bandwidth, tx power and noise PSD must be positive".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub codewords: Vec<Vec<Complex64>>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: usize,
    /// Rate (bits/s) achieved by the labeled codeword.
    pub rate_achieved: f64,
}

/// Per-column affine standardization fitted on a training split.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub worker_id: usize,
    pub samples: Vec<LabeledSample>,
    /// Present once the features have been standardized.
    pub standardizer: Option<Standardizer>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_histogram(&self) -> [usize; NUM_CLASSES] {
        let mut hist = [0; NUM_CLASSES];
        for s in &self.samples {
            hist[s.label] += 1;
        }
        hist
    }
}

/// A worker's train/test splits, both standardized with training statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkerData {
    pub train: Dataset,
    pub test: Dataset,
}

/// `omega * log2(1 + |g^H diag(phi) h|^2 p / (omega N0))`.
pub fn rate(
    phi: &[Complex64],
    h: &[Complex64],
    g: &[Complex64],
    params: &RateParams,
) -> Result<f64> {
    for v in [h, g] {
        if v.len() != phi.len() {
            return Err(Error::DimensionMismatch {
                expected: phi.len(),
                actual: v.len(),
            });
        }
    }
    let gain: Complex64 = g
        .iter()
        .zip(phi)
        .zip(h)
        .map(|((gq, pq), hq)| gq.conj() * pq * hq)
        .sum();
    let snr = gain.norm_sqr() * params.tx_power / (params.bandwidth * params.noise_psd);
    Ok(params.bandwidth * snr.ln_1p() / std::f64::consts::LN_2)
}

/// Four steering codewords aimed at the nominal RX azimuth plus a fixed offset.
pub fn build_codebook(geom: &ScenarioGeometry) -> Codebook {
    let tx_steer = array_response(geom.tx.azimuth, geom.tx.elevation, geom);
    let codewords = CODEWORD_OFFSETS_DEG
        .iter()
        .map(|off| {
            let rx_steer =
                array_response(geom.rx.azimuth + off.to_radians(), geom.rx.elevation, geom);
            rx_steer
                .iter()
                .zip(&tx_steer)
                .map(|(r, t)| {
                    let w = r * t.conj();
                    w / w.norm()
                })
                .collect()
        })
        .collect();
    Codebook { codewords }
}

/// Class whose codeword maximizes the rate; ties go to the lowest index.
pub fn label(sample: &ChannelSample, codebook: &Codebook, params: &RateParams) -> Result<usize> {
    Ok(best_codeword(sample, codebook, params)?.0)
}

fn best_codeword(
    sample: &ChannelSample,
    codebook: &Codebook,
    params: &RateParams,
) -> Result<(usize, f64)> {
    let mut best = (0, f64::NEG_INFINITY);
    for (c, phi) in codebook.codewords.iter().enumerate() {
        let r = rate(phi, &sample.h, &sample.g, params)?;
        if r > best.1 {
            best = (c, r);
        }
    }
    Ok(best)
}

/// Raw `[Re h, Im h, Re g, Im g]`.
pub fn encode_features(sample: &ChannelSample) -> Result<Vec<f64>> {
    for v in [&sample.h, &sample.g] {
        if v.len() != NUM_ELEMENTS {
            return Err(Error::DimensionMismatch {
                expected: NUM_ELEMENTS,
                actual: v.len(),
            });
        }
    }
    let mut out = Vec::with_capacity(FEATURE_DIM);
    out.extend(sample.h.iter().map(|z| z.re));
    out.extend(sample.h.iter().map(|z| z.im));
    out.extend(sample.g.iter().map(|z| z.re));
    out.extend(sample.g.iter().map(|z| z.im));
    Ok(out)
}

/// Inverse of [`encode_features`] (after undoing standardization if given).
pub fn decode_features(
    features: &[f64],
    standardizer: Option<&Standardizer>,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    if features.len() != FEATURE_DIM {
        return Err(Error::DimensionMismatch {
            expected: FEATURE_DIM,
            actual: features.len(),
        });
    }
    let raw: Vec<f64> = match standardizer {
        Some(s) => s.invert(features),
        None => features.to_vec(),
    };
    let q = NUM_ELEMENTS;
    let h = (0..q).map(|i| Complex64::new(raw[i], raw[q + i])).collect();
    let g = (0..q)
        .map(|i| Complex64::new(raw[2 * q + i], raw[3 * q + i]))
        .collect();
    Ok((h, g))
}

impl Standardizer {
    /// Column means and population standard deviations. Constant columns get sd 1.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidArgument(
                "cannot standardize an empty set".into(),
            ));
        };
        let dim = first.len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let sd = var
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Standardizer { mean, sd })
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.sd)
            .map(|((x, m), s)| (x - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.mean)
            .zip(&self.sd)
            .map(|((z, m), s)| z * s + m)
            .collect()
    }
}

/// Draws `count` channel samples for the worker and labels them. Features are raw.
pub fn gen_dataset<R: Rng + ?Sized>(
    profile: &WorkerProfile,
    count: usize,
    rng: &mut R,
) -> Result<Dataset> {
    if count == 0 {
        return Err(Error::InvalidArgument("dataset size must be positive".into()));
    }
    profile.validate()?;
    let codebook = build_codebook(&profile.geometry);
    let samples = (0..count)
        .map(|_| {
            let ch = gen_channel_pair(&profile.geometry, rng);
            let (label, rate_achieved) = best_codeword(&ch, &codebook, &profile.rate)?;
            Ok(LabeledSample {
                features: encode_features(&ch)?,
                label,
                rate_achieved,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        worker_id: profile.id,
        samples,
        standardizer: None,
    })
}

/// Seeded shuffle, then the first `ratio` fraction becomes the training split.
pub fn split<R: Rng + ?Sized>(ds: &Dataset, ratio: f64, rng: &mut R) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratio must be in (0, 1), got {ratio}"
        )));
    }
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(rng);
    let n_train = ((ds.len() as f64) * ratio).round() as usize;
    let pick = |ids: &[usize]| Dataset {
        worker_id: ds.worker_id,
        samples: ids.iter().map(|&i| ds.samples[i].clone()).collect(),
        standardizer: ds.standardizer.clone(),
    };
    Ok((pick(&idx[..n_train]), pick(&idx[n_train..])))
}

/// Fits standardization on `train` and applies it to both splits.
pub fn standardize(train: Dataset, test: Dataset) -> Result<WorkerData> {
    let rows: Vec<Vec<f64>> = train.samples.iter().map(|s| s.features.clone()).collect();
    let st = Standardizer::fit(&rows)?;
    let convert = |mut ds: Dataset| {
        for s in &mut ds.samples {
            s.features = st.apply(&s.features);
        }
        ds.standardizer = Some(st.clone());
        ds
    };
    Ok(WorkerData {
        train: convert(train),
        test: convert(test),
    })
}
