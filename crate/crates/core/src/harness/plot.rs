//! Plot-ready series from a run CSV.
//!
//! Three files, `plot_avg.csv`, `plot_worst.csv` and `plot_sd.csv`, each with
//! columns `algorithm,round,comm_rounds,runs,mean,se,lower,upper`, where the
//! band is mean ± one standard error over seeds. Each file holds one series
//! per algorithm; plot `comm_rounds` on the x axis to compare communication
//! cost.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::experiment::MeanSe;

pub const METRICS: [(&str, &str); 3] = [
    ("avg", "avg_acc"),
    ("worst", "worst_acc"),
    ("sd", "sd_acc"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesPoint {
    pub algorithm: String,
    pub round: usize,
    pub comm_rounds: usize,
    pub runs: usize,
    pub value: MeanSe,
}

fn bad(path: &Path, message: String) -> Error {
    Error::Format {
        what: "run csv",
        path: path.to_path_buf(),
        message,
    }
}

/// Per-(algorithm, round) statistics of `column`, algorithms in order of
/// first appearance and rounds ascending.
pub fn series(run_csv: &Path, column: &str) -> Result<Vec<SeriesPoint>> {
    let mut reader = csv::Reader::from_path(run_csv)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| bad(run_csv, format!("missing column `{name}`")))
    };
    let (ia, ir, ic, iv) = (find("algorithm")?, find("round")?, find("comm_rounds")?, find(column)?);
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<(usize, usize), (usize, Vec<f64>)> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec?;
        let parse_usize = |i: usize| {
            rec[i]
                .parse::<usize>()
                .map_err(|e| bad(run_csv, format!("{}: {e}", &headers[i])))
        };
        let algo = rec[ia].to_string();
        let slot = match order.iter().position(|a| *a == algo) {
            Some(p) => p,
            None => {
                order.push(algo);
                order.len() - 1
            }
        };
        let value: f64 = rec[iv]
            .parse()
            .map_err(|e| bad(run_csv, format!("{column}: {e}")))?;
        let entry = groups
            .entry((slot, parse_usize(ir)?))
            .or_insert((parse_usize(ic)?, Vec::new()));
        entry.1.push(value);
    }
    Ok(groups
        .into_iter()
        .map(|((slot, round), (comm_rounds, values))| SeriesPoint {
            algorithm: order[slot].clone(),
            round,
            comm_rounds,
            runs: values.len(),
            value: MeanSe::of(&values),
        })
        .collect())
}

/// Writes the three series files into `out_dir` and returns their paths.
pub fn emit_plot_data(run_csv: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (name, column) in METRICS {
        let mut text = String::from("algorithm,round,comm_rounds,runs,mean,se,lower,upper\n");
        for p in series(run_csv, column)? {
            let v = p.value;
            text += &format!(
                "{},{},{},{},{},{},{},{}\n",
                p.algorithm,
                p.round,
                p.comm_rounds,
                p.runs,
                v.mean,
                v.se,
                v.mean - v.se,
                v.mean + v.se
            );
        }
        let path = out_dir.join(format!("plot_{name}.csv"));
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}
