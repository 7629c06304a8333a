//! `softpo`: experiment runner for decision-focused training with soft constraints.

mod config;
mod io;
mod manifest;
mod report;
mod study;
mod train;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use softpo_core::datagen::{generate, write_csv_dataset, Split};
use softpo_core::penalty::{RowDistribution, SamplingProtocol};
use softpo_core::training::Method;

use config::{output_root, parse_seeds, Config};
use io::{create_dir, write_problem, DATASET_FILE, PROBLEM_FILE};
use manifest::RunManifest;

#[derive(Parser)]
#[command(name = "softpo", version, about = "Decision-focused learning with soft constraints")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a problem template and prediction dataset.
    Datagen {
        #[command(flatten)]
        source: Source,
        /// Data seed (overrides `data.seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: $SOFTPO_OUTPUT_ROOT/<run.name>/data).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train every configured method on every seed and evaluate on the test split.
    Train {
        #[command(flatten)]
        source: Source,
        /// Seed list: `3`, `0,1,2` or `0..15`.
        #[arg(long)]
        seed: Option<String>,
        /// Method(s) to run; repeatable.
        #[arg(long = "method")]
        methods: Vec<Method>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Output directory (default: $SOFTPO_OUTPUT_ROOT/<run.name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; seeds are distributed across them.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Evaluate a saved model, or the label oracle, on one split.
    Eval {
        #[arg(long)]
        problem: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, conflicts_with = "oracle", required_unless_present = "oracle")]
        model: Option<PathBuf>,
        /// Predict the true labels.
        #[arg(long)]
        oracle: bool,
        #[arg(long, default_value = "test")]
        split: Split,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare methods across runs with paired one-tailed t-tests.
    Report {
        /// `runs.csv` files or directories containing one.
        #[arg(required = true)]
        runs: Vec<PathBuf>,
        #[arg(long, default_value = "surrogate")]
        baseline: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Penalty-multiplier bounds for a problem file.
    Bounds {
        #[arg(long)]
        problem: PathBuf,
        /// Dataset whose training split defines `E`.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Empirical multiplier factor.
        #[arg(long, default_value_t = 10.0)]
        k: f64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte-Carlo study of the top eigenvalue λ_max against n.
    LambdaStudy {
        #[arg(long, default_value_t = 10)]
        n_min: usize,
        #[arg(long, default_value_t = 100)]
        n_max: usize,
        #[arg(long, default_value_t = 10)]
        n_step: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        /// Row distribution(s), comma separated: uniform01, absnormal, beta22.
        #[arg(long, value_delimiter = ',', default_value = "uniform01")]
        distribution: Vec<RowDistribution>,
        /// unit-rows or raw-discard.
        #[arg(long, default_value = "unit-rows")]
        protocol: SamplingProtocol,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct Source {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Rerun from the config snapshot stored in a previous manifest.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

impl Source {
    fn load(&self) -> anyhow::Result<Config> {
        match (&self.config, &self.manifest) {
            (Some(path), _) => Config::load(path),
            (None, Some(path)) => {
                let m = RunManifest::load(path)?;
                serde_json::from_value(m.config).with_context(|| format!("manifest {} has no usable config", path.display()))
            }
            (None, None) => bail!("pass --config or --manifest"),
        }
    }
}

fn cmd_datagen(cfg: &Config, out: &Path) -> anyhow::Result<()> {
    cfg.data.validate().context("[data]")?;
    let start = Instant::now();
    let (problem, dataset) = generate(&cfg.data)?;
    create_dir(out)?;
    write_problem(&out.join(PROBLEM_FILE), &problem)?;
    write_csv_dataset(&out.join(DATASET_FILE), &dataset)?;
    let mut manifest = RunManifest::new("datagen", cfg, vec![cfg.data.seed])?;
    manifest.output(PROBLEM_FILE, Some(cfg.data.seed), None);
    manifest.output(DATASET_FILE, Some(cfg.data.seed), None);
    manifest.time("total", start);
    manifest.write(out)?;
    println!(
        "{} n={} samples={} features={} labels={} -> {}",
        problem.family,
        problem.n,
        dataset.len(),
        dataset.feature_dim(),
        dataset.label_dim(),
        out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<bool> {
    match cli.command {
        Command::Datagen { source, seed, out } => {
            let mut cfg = source.load()?;
            if let Some(s) = seed {
                cfg.data.seed = s;
            }
            let out = out.unwrap_or_else(|| output_root().join(&cfg.run.name).join("data"));
            cmd_datagen(&cfg, &out)?;
        }
        Command::Train {
            source,
            seed,
            methods,
            epochs,
            out,
            jobs,
        } => {
            let mut cfg = source.load()?;
            if let Some(s) = seed {
                cfg.run.seeds = parse_seeds(&s)?;
            }
            if !methods.is_empty() {
                cfg.run.methods = methods;
            }
            if let Some(e) = epochs {
                cfg.train.epochs = e;
            }
            let out = out.unwrap_or_else(|| output_root().join(&cfg.run.name));
            return train::cmd_train(&cfg, &out, jobs);
        }
        Command::Eval {
            problem,
            dataset,
            model,
            oracle: _,
            split,
            tol,
            out,
        } => {
            let args = train::EvalArgs {
                problem: &problem,
                dataset: &dataset,
                model: model.as_deref(),
                split,
                tol,
            };
            train::cmd_eval(&args, out.as_deref())?;
        }
        Command::Report { runs, baseline, out } => {
            report::cmd_report(&runs, &baseline, out.as_deref())?;
        }
        Command::Bounds {
            problem,
            dataset,
            k,
            scale,
            seed,
            out,
        } => {
            let args = study::BoundsArgs {
                problem: &problem,
                dataset: dataset.as_deref(),
                k,
                scale,
                seed,
            };
            study::cmd_bounds(&args, out.as_deref())?;
        }
        Command::LambdaStudy {
            n_min,
            n_max,
            n_step,
            trials,
            distribution,
            protocol,
            seed,
            out,
        } => {
            if n_step == 0 || n_min > n_max {
                bail!("need n_min <= n_max and n_step > 0");
            }
            let args = study::LambdaArgs {
                ns: (n_min..=n_max).step_by(n_step).collect(),
                distributions: distribution,
                trials,
                protocol,
                seed,
            };
            study::cmd_lambda_study(&args, out.as_deref())?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: some runs failed (see the status table and manifest)");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
