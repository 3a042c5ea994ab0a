use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fgdra_core::diagnostics::{
    estimate_constants, grad_norm_trace, run_with_checkpoints, slope_fit, theorem_bound,
    write_diagnostics_csv,
};
use fgdra_core::fed::Algorithm;
use fgdra_core::harness::config::ExperimentConfig;
use fgdra_core::harness::data::{generate, read_worker, write_datasets};
use fgdra_core::labeling::WorkerData;
use fgdra_core::harness::experiment::{run_experiment, write_summary_csv};
use fgdra_core::harness::plot::emit_plot_data;
use fgdra_core::harness::sweep::{run_sweep, write_sweep_csv, write_sweep_table};
use fgdra_core::rng::{substream, Purpose};
use fgdra_core::{Error, Result};

/// Federated distributionally robust training of RIS configuration classifiers.
#[derive(Parser)]
#[command(name = "fgdra", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key = value config file; omitted keys use the defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set rounds=200`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Comma-separated run seeds (same as `--set seeds=...`).
    #[arg(long, value_name = "S1,S2,...")]
    seed_list: Option<String>,
    /// Directory for all outputs; created if missing.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Read datasets written by `gen-data` instead of regenerating them.
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

impl Common {
    fn data(&self, cfg: &ExperimentConfig) -> Result<Vec<WorkerData>> {
        match &self.data_dir {
            Some(dir) => (0..cfg.train.workers).map(|n| read_worker(dir, n)).collect(),
            None => Ok(generate(cfg)?.1),
        }
    }

    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        for o in &self.overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("--set expects KEY=VALUE, got `{o}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(seeds) = &self.seed_list {
            cfg.set("seeds", seeds)?;
        }
        cfg.validate()?;
        std::fs::create_dir_all(&self.out_dir).map_err(|e| io(&self.out_dir, e))?;
        let used = self.out_dir.join("config.txt");
        std::fs::write(&used, cfg.to_canonical_string()).map_err(|e| io(&used, e))?;
        Ok(cfg)
    }
}

fn io(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate and store every worker's standardized train/test splits.
    GenData(Common),
    /// Run every configured algorithm for every seed.
    Train {
        #[command(flatten)]
        common: Common,
        /// Also save each run's final model as a checkpoint.
        #[arg(long)]
        save_models: bool,
    },
    /// Run the configured one-axis sweep (`sweep_axis`, `sweep_values`).
    Sweep(Common),
    /// Estimate the theorem constants and trace the gradient norm of FGDRA runs.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Random probes for the constant estimates.
        #[arg(long, default_value_t = 100)]
        probes: usize,
        /// Replace alpha, gamma and tau by the theorem's schedule for the configured rounds.
        #[arg(long)]
        theorem_schedule: bool,
    },
    /// Turn a run CSV into mean and standard-error series.
    PlotData {
        /// Run CSV written by `train`.
        #[arg(long, default_value = "out/run.csv")]
        run_csv: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenData(common) => {
            let cfg = common.load()?;
            let (profiles, data) = generate(&cfg)?;
            write_datasets(&common.out_dir, &cfg, &profiles, &data)?;
            for d in &data {
                log::info!(
                    "worker {}: {} train, {} test, classes {:?}",
                    d.train.worker_id,
                    d.train.len(),
                    d.test.len(),
                    d.train.class_histogram()
                );
            }
        }
        Command::Train {
            common,
            save_models,
        } => {
            let cfg = common.load()?;
            let data = common.data(&cfg)?;
            let exp = run_experiment(&cfg, &data, Some(&common.out_dir.join("run.csv")))?;
            write_summary_csv(&common.out_dir.join("summary.csv"), &exp.summary)?;
            if save_models {
                for r in &exp.runs {
                    let name = format!("model_{}_seed{}.bin", r.algorithm, r.seed);
                    r.theta.save(&common.out_dir.join(name))?;
                }
            }
            for a in &exp.summary.algorithms {
                println!(
                    "{:<7} avg {:.2} ± {:.2}  worst {:.2} ± {:.2}  sd {:.2}  ({} comm rounds)",
                    a.algorithm.name(), a.avg.mean, a.avg.se, a.worst.mean, a.worst.se, a.sd.mean, a.comm_rounds
                );
            }
        }
        Command::Sweep(common) => {
            let cfg = common.load()?;
            let data = common.data(&cfg)?;
            let result = run_sweep(&cfg, &data, Some(&common.out_dir))?;
            write_sweep_csv(&common.out_dir.join("sweep.csv"), &result)?;
            let table = common.out_dir.join("sweep_table.csv");
            write_sweep_table(&table, &result)?;
            print!("{}", std::fs::read_to_string(&table).map_err(|e| io(&table, e))?);
        }
        Command::Diagnose {
            common,
            probes,
            theorem_schedule,
        } => diagnose(&common, probes, theorem_schedule)?,
        Command::PlotData { run_csv, out_dir } => {
            std::fs::create_dir_all(&out_dir).map_err(|e| io(&out_dir, e))?;
            for path in emit_plot_data(&run_csv, &out_dir)? {
                log::info!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn diagnose(common: &Common, probes: usize, theorem_schedule: bool) -> Result<()> {
    let cfg = common.load()?;
    let data = common.data(&cfg)?;
    let mut rng = substream(cfg.data_seed, Purpose::Probe, 0, 0);
    let est = estimate_constants(&data, probes, cfg.train.batch_size, &mut rng)?;
    let constants = common.out_dir.join("constants.csv");
    let text = format!(
        "sigma_hat,nu_hat,l_hat,f0\n{},{},{},{}\n",
        est.sigma_hat, est.nu_hat, est.l_hat, est.f0
    );
    std::fs::write(&constants, text).map_err(|e| io(&constants, e))?;
    println!(
        "sigma {:.4}  nu {:.4}  L {:.4}  F0 {:.4}",
        est.sigma_hat, est.nu_hat, est.l_hat, est.f0
    );

    for &seed in &cfg.seeds {
        let mut tc = cfg.train_config(Algorithm::Fgdra, seed);
        if theorem_schedule {
            tc.local_steps = ((tc.rounds as f64).cbrt().round() as usize).max(1);
            let t = tc.total_iterations() as f64;
            tc.alpha = 1.0 / (est.l_hat * t.sqrt());
            tc.gamma = 1.0 / ((tc.workers as f64).sqrt() * t);
        }
        let (_, checkpoints) = run_with_checkpoints(&tc, &data, 1)?;
        let trace = grad_norm_trace(&data, &checkpoints)?;
        let path = common.out_dir.join(format!("diagnostics_seed{seed}.csv"));
        write_diagnostics_csv(&path, &trace, &est, tc.sampled)?;
        let running = trace.running_mean();
        let last = running.grad_norm_sq.last().copied().unwrap_or(0.0);
        let bound = theorem_bound(&est, tc.sampled, tc.total_iterations())?;
        let slope = slope_fit(&running)
            .map(|s| format!("{s:.3}"))
            .unwrap_or_else(|_| "n/a".into());
        println!(
            "seed {seed}: T = {}  running mean {last:.4e}  bound {bound:.4e}  slope {slope}",
            tc.total_iterations()
        );
    }
    Ok(())
}
