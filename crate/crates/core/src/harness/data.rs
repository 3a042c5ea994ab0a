//! Dataset generation from an experiment config, and the on-disk format.
//!
//! Worker `n` is stored as three files in one directory:
//!
//! * `worker{n}_train.csv`, `worker{n}_test.csv`: header
//!   `f0,...,f399,label,rate`, one sample per row. Features are standardized
//!   with the training statistics; `rate` is the achieved rate in bits/s.
//! * `worker{n}.meta`: line-oriented text. The first line is
//!   `fgdra-dataset 1` (format name and version); each following line is a
//!   key and whitespace-separated values: `worker`, `data_seed`,
//!   `profile_seed`, `train_samples`, `test_samples`, `ris` (rows cols),
//!   `element_spacing` and `wavelength` (m), `tx` and `rx` (distance m,
//!   azimuth rad, elevation rad), one `scatterer` line per scatterer
//!   (travel distance, azimuth, elevation), and `mean` / `sd` with the 400
//!   comma-separated standardization values.
//!
//! Floats are written in shortest round-trip form, so reading back is exact.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::labeling::{
    gen_dataset, split, standardize, Dataset, LabeledSample, Standardizer, WorkerData, FEATURE_DIM,
};
use crate::profile::{default_profiles, WorkerProfile};
use crate::rng::{substream, Purpose};

pub const FORMAT_NAME: &str = "fgdra-dataset";
pub const FORMAT_VERSION: u32 = 1;

/// Worker profiles and their standardized splits.
pub fn generate(cfg: &ExperimentConfig) -> Result<(Vec<WorkerProfile>, Vec<WorkerData>)> {
    let profiles = default_profiles(&cfg.profile)?;
    let data = profiles
        .iter()
        .map(|p| {
            let id = p.id as u64;
            let mut rng = substream(cfg.data_seed, Purpose::Data, id, 0);
            let ds = gen_dataset(p, cfg.samples_per_worker, &mut rng)?;
            let mut rng = substream(cfg.data_seed, Purpose::Split, id, 0);
            let (train, test) = split(&ds, cfg.train_ratio, &mut rng)?;
            standardize(train, test)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((profiles, data))
}

pub fn split_path(dir: &Path, worker: usize, part: &str) -> PathBuf {
    dir.join(format!("worker{worker}_{part}.csv"))
}

pub fn meta_path(dir: &Path, worker: usize) -> PathBuf {
    dir.join(format!("worker{worker}.meta"))
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn write_split(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..FEATURE_DIM).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    header.push("rate".into());
    w.write_record(&header)?;
    for s in &ds.samples {
        let mut row: Vec<String> = s.features.iter().map(|v| v.to_string()).collect();
        row.push(s.label.to_string());
        row.push(s.rate_achieved.to_string());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes every worker's splits and meta file into `dir`, which must exist.
pub fn write_datasets(
    dir: &Path,
    cfg: &ExperimentConfig,
    profiles: &[WorkerProfile],
    data: &[WorkerData],
) -> Result<()> {
    for (p, d) in profiles.iter().zip(data) {
        write_split(&split_path(dir, p.id, "train"), &d.train)?;
        write_split(&split_path(dir, p.id, "test"), &d.test)?;
        let st = d
            .train
            .standardizer
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("datasets must be standardized".into()))?;
        let path = meta_path(dir, p.id);
        let g = &p.geometry;
        let mut text = format!("{FORMAT_NAME} {FORMAT_VERSION}\n");
        text += &format!("worker {}\n", p.id);
        text += &format!("data_seed {}\n", cfg.data_seed);
        text += &format!("profile_seed {}\n", cfg.profile.seed);
        text += &format!("train_samples {}\n", d.train.len());
        text += &format!("test_samples {}\n", d.test.len());
        text += &format!("ris {} {}\n", g.ris_rows, g.ris_cols);
        text += &format!("element_spacing {}\n", g.element_spacing);
        text += &format!("wavelength {}\n", g.carrier_wavelength);
        for (name, pl) in [("tx", &g.tx), ("rx", &g.rx)] {
            text += &format!("{name} {} {} {}\n", pl.distance, pl.azimuth, pl.elevation);
        }
        for s in &g.scatterers {
            text += &format!("scatterer {} {} {}\n", s.travel_distance, s.azimuth, s.elevation);
        }
        text += &format!("mean {}\n", join(&st.mean));
        text += &format!("sd {}\n", join(&st.sd));
        let mut out = BufWriter::new(File::create(&path).map_err(|e| Error::io(&path, e))?);
        out.write_all(text.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        what: "dataset",
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn read_split(path: &Path, worker: usize, st: &Standardizer) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path)?;
    if r.headers()?.len() != FEATURE_DIM + 2 {
        return Err(format_err(path, format!("expected {} columns", FEATURE_DIM + 2)));
    }
    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|e| format_err(path, format!("column {i}: {e}")))
        };
        let features = (0..FEATURE_DIM).map(num).collect::<Result<Vec<_>>>()?;
        let label = rec[FEATURE_DIM]
            .parse()
            .map_err(|e| format_err(path, format!("label: {e}")))?;
        samples.push(LabeledSample {
            features,
            label,
            rate_achieved: num(FEATURE_DIM + 1)?,
        });
    }
    Ok(Dataset {
        worker_id: worker,
        samples,
        standardizer: Some(st.clone()),
    })
}

/// Reads back one worker written by [`write_datasets`].
pub fn read_worker(dir: &Path, worker: usize) -> Result<WorkerData> {
    let path = meta_path(dir, worker);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let mut lines = text.lines();
    let expected = format!("{FORMAT_NAME} {FORMAT_VERSION}");
    if lines.next() != Some(expected.as_str()) {
        return Err(format_err(&path, format!("first line must be `{expected}`")));
    }
    let (mut mean, mut sd) = (None, None);
    let (mut n_train, mut n_test) = (None, None);
    for line in lines {
        let (key, value) = line.split_once(' ').unwrap_or((line, ""));
        let floats = || -> Result<Vec<f64>> {
            value
                .split(',')
                .map(|v| v.parse().map_err(|e| format_err(&path, format!("{key}: {e}"))))
                .collect()
        };
        let count = || -> Result<usize> {
            value.parse().map_err(|e| format_err(&path, format!("{key}: {e}")))
        };
        match key {
            "mean" => mean = Some(floats()?),
            "sd" => sd = Some(floats()?),
            "train_samples" => n_train = Some(count()?),
            "test_samples" => n_test = Some(count()?),
            _ => {}
        }
    }
    let (Some(mean), Some(sd)) = (mean, sd) else {
        return Err(format_err(&path, "missing mean or sd"));
    };
    if mean.len() != FEATURE_DIM || sd.len() != FEATURE_DIM {
        return Err(format_err(&path, "standardization vectors must have 400 entries"));
    }
    let st = Standardizer { mean, sd };
    let train = read_split(&split_path(dir, worker, "train"), worker, &st)?;
    let test = read_split(&split_path(dir, worker, "test"), worker, &st)?;
    if n_train != Some(train.len()) || n_test != Some(test.len()) {
        return Err(format_err(&path, "sample counts do not match the csv files"));
    }
    Ok(WorkerData { train, test })
}
