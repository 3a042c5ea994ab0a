//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored and
//! list values are comma separated. Omitted keys keep their defaults, which
//! are the reference hyperparameters with K = 800 and five seeds.
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `workers` | N | 4 |
//! | `sampled` | m, workers per round | 3 |
//! | `rounds` | K, algorithmic rounds | 800 |
//! | `tau` | local SGD steps per round | 10 |
//! | `alpha` | primal step | 0.002 |
//! | `gamma` | dual step | 0.005 |
//! | `batch_size` | B | 50 |
//! | `eval_every` | test-accuracy interval in rounds | 10 |
//! | `seeds` | run seeds | 0,1,2,3,4 |
//! | `algorithms` | subset of fgdra, drfa, fedavg | fgdra,drfa,fedavg |
//! | `samples_per_worker` | J_n before the split | 2500 |
//! | `train_ratio` | training fraction | 0.8 |
//! | `data_seed` | channel draws and splits | 1 |
//! | `profile_seed` | per-worker geometry | 2024 |
//! | `spacings` | element spacing per worker, in wavelengths | 0.125,0.25,0.5,1 |
//! | `wavelength` | carrier wavelength, m | c / 28 GHz |
//! | `scatterers` | scatterers per worker | 4 |
//! | `bandwidth` | Hz | 1e8 |
//! | `tx_power` | W | 1 |
//! | `noise_psd` | W/Hz | -174 dBm/Hz |
//! | `sweep_axis` | none, tau, B or m | none |
//! | `sweep_values` | values for the sweep axis | empty |
//! | `jobs` | worker threads for independent runs | 1 |
//!
//! Heterogeneity across workers comes from `spacings` (aperture) and the
//! geometry drawn from `profile_seed`; equal spacings weaken it.

use std::fmt::{self, Display, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fed::{Algorithm, TrainConfig};
use crate::profile::ProfileSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    None,
    Tau,
    BatchSize,
    Sampled,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::None => "none",
            SweepAxis::Tau => "tau",
            SweepAxis::BatchSize => "B",
            SweepAxis::Sampled => "m",
        }
    }
}

impl Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "none" => Ok(SweepAxis::None),
            "tau" => Ok(SweepAxis::Tau),
            "B" => Ok(SweepAxis::BatchSize),
            "m" => Ok(SweepAxis::Sampled),
            other => Err(format!("expected one of none, tau, B, m; got `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Shared hyperparameters. `seed` and `algorithm` are set per run.
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub algorithms: Vec<Algorithm>,
    pub samples_per_worker: usize,
    pub train_ratio: f64,
    pub data_seed: u64,
    /// Worker count is kept equal to `train.workers`.
    pub profile: ProfileSettings,
    pub sweep_axis: SweepAxis,
    pub sweep_values: Vec<usize>,
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            train: TrainConfig::default(),
            seeds: (0..5).collect(),
            algorithms: Algorithm::ALL.to_vec(),
            samples_per_worker: 2500,
            train_ratio: 0.8,
            data_seed: 1,
            profile: ProfileSettings::default(),
            sweep_axis: SweepAxis::None,
            sweep_values: Vec::new(),
            jobs: 1,
        }
    }
}

/// Keys in canonical order.
pub const KEYS: [&str; 23] = [
    "workers",
    "sampled",
    "rounds",
    "tau",
    "alpha",
    "gamma",
    "batch_size",
    "eval_every",
    "seeds",
    "algorithms",
    "samples_per_worker",
    "train_ratio",
    "data_seed",
    "profile_seed",
    "spacings",
    "wavelength",
    "scatterers",
    "bandwidth",
    "tx_power",
    "noise_psd",
    "sweep_axis",
    "sweep_values",
    "jobs",
];

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e: T::Err| Error::config(key, format!("cannot parse `{value}`: {e}")))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| scalar(key, v.trim())).collect()
}

fn join<T: Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    /// Parses `text`, starting from the defaults, and validates the result.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = Vec::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(line, format!("line {}: expected `key = value`", no + 1))
            })?;
            let key = key.trim();
            if seen.contains(&key) {
                return Err(Error::config(key, "set more than once"));
            }
            seen.push(key);
            cfg.set(key, value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Sets one key without validating the whole config.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let t = &mut self.train;
        let p = &mut self.profile;
        match key {
            "workers" => {
                t.workers = scalar(key, value)?;
                p.workers = t.workers;
            }
            "sampled" => t.sampled = scalar(key, value)?,
            "rounds" => t.rounds = scalar(key, value)?,
            "tau" => t.local_steps = scalar(key, value)?,
            "alpha" => t.alpha = scalar(key, value)?,
            "gamma" => t.gamma = scalar(key, value)?,
            "batch_size" => t.batch_size = scalar(key, value)?,
            "eval_every" => t.eval_every = scalar(key, value)?,
            "seeds" => self.seeds = list(key, value)?,
            "algorithms" => self.algorithms = list(key, value)?,
            "samples_per_worker" => self.samples_per_worker = scalar(key, value)?,
            "train_ratio" => self.train_ratio = scalar(key, value)?,
            "data_seed" => self.data_seed = scalar(key, value)?,
            "profile_seed" => p.seed = scalar(key, value)?,
            "spacings" => p.spacings = list(key, value)?,
            "wavelength" => p.wavelength = scalar(key, value)?,
            "scatterers" => p.scatterers = scalar(key, value)?,
            "bandwidth" => p.rate.bandwidth = scalar(key, value)?,
            "tx_power" => p.rate.tx_power = scalar(key, value)?,
            "noise_psd" => p.rate.noise_psd = scalar(key, value)?,
            "sweep_axis" => self.sweep_axis = scalar(key, value)?,
            "sweep_values" => self.sweep_values = list(key, value)?,
            "jobs" => self.jobs = scalar(key, value)?,
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.train;
        let fail = |key: &str, msg: String| Err(Error::config(key, msg));
        if t.workers == 0 {
            return fail("workers", "must be at least 1".into());
        }
        if t.sampled == 0 || t.sampled > t.workers {
            return fail(
                "sampled",
                format!("must be in 1..={} (workers), got {}", t.workers, t.sampled),
            );
        }
        for (key, v) in [
            ("rounds", t.rounds),
            ("tau", t.local_steps),
            ("batch_size", t.batch_size),
            ("eval_every", t.eval_every),
            ("samples_per_worker", self.samples_per_worker),
            ("scatterers", self.profile.scatterers),
            ("jobs", self.jobs),
        ] {
            if v == 0 {
                return fail(key, "must be positive".into());
            }
        }
        for (key, v) in [
            ("alpha", t.alpha),
            ("wavelength", self.profile.wavelength),
            ("bandwidth", self.profile.rate.bandwidth),
            ("tx_power", self.profile.rate.tx_power),
            ("noise_psd", self.profile.rate.noise_psd),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(key, format!("must be positive and finite, got {v}"));
            }
        }
        if !(t.gamma >= 0.0 && t.gamma.is_finite()) {
            return fail("gamma", format!("must be non-negative, got {}", t.gamma));
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return fail("train_ratio", format!("must be in (0, 1), got {}", self.train_ratio));
        }
        let n_train = (self.samples_per_worker as f64 * self.train_ratio).round() as usize;
        if n_train == 0 || n_train == self.samples_per_worker {
            return fail(
                "samples_per_worker",
                "both splits need at least one sample".into(),
            );
        }
        if self.seeds.is_empty() {
            return fail("seeds", "need at least one seed".into());
        }
        if self.algorithms.is_empty() {
            return fail("algorithms", "need at least one algorithm".into());
        }
        if self.profile.spacings.is_empty() || self.profile.spacings.iter().any(|s| !(*s > 0.0)) {
            return fail("spacings", "need one or more positive spacings".into());
        }
        if self.sweep_values.contains(&0) {
            return fail("sweep_values", "values must be positive".into());
        }
        if self.sweep_axis == SweepAxis::Sampled {
            if let Some(v) = self.sweep_values.iter().find(|&&v| v > t.workers) {
                return fail("sweep_values", format!("m = {v} exceeds workers = {}", t.workers));
            }
        }
        Ok(())
    }

    /// Settings for one run.
    pub fn train_config(&self, algorithm: Algorithm, seed: u64) -> TrainConfig {
        TrainConfig {
            algorithm,
            seed,
            ..self.train.clone()
        }
    }

    /// Returns a copy with the sweep axis set to `value`.
    pub fn with_sweep_value(&self, value: usize) -> ExperimentConfig {
        let mut cfg = self.clone();
        match self.sweep_axis {
            SweepAxis::None => {}
            SweepAxis::Tau => cfg.train.local_steps = value,
            SweepAxis::BatchSize => cfg.train.batch_size = value,
            SweepAxis::Sampled => cfg.train.sampled = value,
        }
        cfg
    }

    /// Value of `key` in canonical form.
    pub fn get(&self, key: &str) -> Option<String> {
        let t = &self.train;
        let p = &self.profile;
        Some(match key {
            "workers" => t.workers.to_string(),
            "sampled" => t.sampled.to_string(),
            "rounds" => t.rounds.to_string(),
            "tau" => t.local_steps.to_string(),
            "alpha" => t.alpha.to_string(),
            "gamma" => t.gamma.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "eval_every" => t.eval_every.to_string(),
            "seeds" => join(&self.seeds),
            "algorithms" => join(&self.algorithms),
            "samples_per_worker" => self.samples_per_worker.to_string(),
            "train_ratio" => self.train_ratio.to_string(),
            "data_seed" => self.data_seed.to_string(),
            "profile_seed" => p.seed.to_string(),
            "spacings" => join(&p.spacings),
            "wavelength" => p.wavelength.to_string(),
            "scatterers" => p.scatterers.to_string(),
            "bandwidth" => p.rate.bandwidth.to_string(),
            "tx_power" => p.rate.tx_power.to_string(),
            "noise_psd" => p.rate.noise_psd.to_string(),
            "sweep_axis" => self.sweep_axis.to_string(),
            "sweep_values" => join(&self.sweep_values),
            "jobs" => self.jobs.to_string(),
            _ => return None,
        })
    }

    /// Every key, one per line, in [`KEYS`] order.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let value = self.get(key).expect("every listed key has a value");
            writeln!(out, "{key} = {value}").expect("writing to a String");
        }
        out
    }
}
