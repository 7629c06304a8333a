use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use softpo_core::datagen::{generate, Split};
use softpo_core::predictor::MlpModel;
use softpo_core::training::{
    evaluate, evaluate_with, mean_std, train, train_with_k_selection, write_history_csv, EvalReport, Method, Task, TrainConfig,
};

use crate::config::Config;
use crate::io::{create_dir, f3, print_table, read_data_dir, read_dataset, read_problem};
use crate::manifest::{RunManifest, SeedStatus};

pub const RUNS_FILE: &str = "runs.csv";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

/// One (method, seed) row of `runs.csv`.
#[derive(Debug, Clone, Serialize, serde::Deserialize)]
pub struct RunRow {
    pub method: String,
    pub seed: u64,
    pub status: String,
    #[serde(rename = "K")]
    pub k: Option<f64>,
    pub beta: Option<f64>,
    pub best_epoch: Option<usize>,
    pub epochs_run: Option<usize>,
    pub valid_regret: Option<f64>,
    pub test_regret: Option<f64>,
    pub test_regret_std: Option<f64>,
    pub mse: Option<f64>,
    pub solver_failures: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
struct AggregateRow {
    method: String,
    runs: usize,
    failed: usize,
    mean_regret: f64,
    std_regret: f64,
    mean_mse: f64,
    mean_epochs: f64,
}

struct Finished {
    row: RunRow,
    model: MlpModel,
    history: Vec<softpo_core::training::HistoryRow>,
    report: EvalReport,
}

fn build_task(cfg: &Config, seed: u64) -> anyhow::Result<Task> {
    let (template, dataset) = match &cfg.run.data_dir {
        Some(dir) => read_data_dir(dir)?,
        None => {
            let data = softpo_core::datagen::GenConfig { seed, ..cfg.data.clone() };
            generate(&data)?
        }
    };
    Ok(Task::new(dataset, template, cfg.train.solver_tol)?)
}

fn run_method(cfg: &Config, task: &Task, method: Method, seed: u64) -> anyhow::Result<Finished> {
    let tc = TrainConfig {
        method,
        seed,
        ..cfg.train.clone()
    };
    tc.validate(&task.template)?;
    let (k, outcome) = if method == Method::Surrogate && !cfg.run.k_grid.is_empty() {
        let (k, o) = train_with_k_selection(task, &tc, &cfg.run.k_grid)?;
        (Some(k), o)
    } else {
        (
            (method == Method::Surrogate).then_some(tc.k),
            train(task, &tc)?,
        )
    };
    let mut report = evaluate(&outcome.model, task, Split::Test, tc.solver_tol)?;
    report.epochs_run = outcome.history.len();
    let row = RunRow {
        method: method.to_string(),
        seed,
        status: "ok".into(),
        k,
        beta: (method == Method::Surrogate).then_some(outcome.beta),
        best_epoch: Some(outcome.best_epoch),
        epochs_run: Some(report.epochs_run),
        valid_regret: outcome.best_valid_regret(),
        test_regret: Some(report.mean_regret),
        test_regret_std: Some(report.std_regret),
        mse: Some(report.mean_mse),
        solver_failures: Some(report.solver_failures),
    };
    Ok(Finished {
        row,
        model: outcome.model,
        history: outcome.history,
        report,
    })
}

fn failed_row(method: Method, seed: u64) -> RunRow {
    RunRow {
        method: method.to_string(),
        seed,
        status: "failed".into(),
        k: None,
        beta: None,
        best_epoch: None,
        epochs_run: None,
        valid_regret: None,
        test_regret: None,
        test_regret_std: None,
        mse: None,
        solver_failures: None,
    }
}

type SeedResults = Vec<(Method, anyhow::Result<Finished>, f64)>;

fn run_seed(cfg: &Config, methods: &[Method], seed: u64) -> SeedResults {
    let task = match build_task(cfg, seed) {
        Ok(t) => t,
        Err(e) => {
            let msg = format!("{e:#}");
            return methods.iter().map(|&m| (m, Err(anyhow::anyhow!("data: {msg}")), 0.0)).collect();
        }
    };
    methods
        .iter()
        .map(|&m| {
            let start = Instant::now();
            let r = run_method(cfg, &task, m, seed);
            (m, r, start.elapsed().as_secs_f64())
        })
        .collect()
}

/// Runs every (method, seed) pair and writes per-seed artefacts, `runs.csv`,
/// `aggregate.csv` and the manifest. Returns `false` when any run failed.
pub fn cmd_train(cfg: &Config, out: &Path, jobs: usize) -> anyhow::Result<bool> {
    cfg.validate()?;
    create_dir(out)?;
    let start = Instant::now();
    let methods = cfg.methods();
    let seeds = cfg.run.seeds.clone();
    let mut manifest = RunManifest::new("train", cfg, seeds.clone())?;

    let slots: Vec<Mutex<Option<SeedResults>>> = seeds.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, seeds.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let r = run_seed(cfg, &methods, seeds[i]);
                *slots[i].lock().expect("result slot") = Some(r);
            });
        }
    });

    let mut rows = Vec::new();
    let mut all_ok = true;
    for (slot, &seed) in slots.into_iter().zip(&seeds) {
        let results = slot.into_inner().expect("result slot").expect("every seed ran");
        for (method, result, secs) in results {
            let label = format!("{method}/seed_{seed}");
            manifest.timings.push(crate::manifest::Timing {
                label: label.clone(),
                seconds: secs,
            });
            match result.and_then(|f| write_seed(out, &mut manifest, method, seed, f)) {
                Ok(row) => {
                    manifest.status.push(SeedStatus {
                        seed,
                        method: method.to_string(),
                        ok: true,
                        error: None,
                    });
                    rows.push(row);
                }
                Err(e) => {
                    all_ok = false;
                    eprintln!("{label}: {e:#}");
                    manifest.status.push(SeedStatus {
                        seed,
                        method: method.to_string(),
                        ok: false,
                        error: Some(format!("{e:#}")),
                    });
                    rows.push(failed_row(method, seed));
                }
            }
        }
    }

    write_csv(&out.join(RUNS_FILE), &rows)?;
    manifest.output(RUNS_FILE, None, None);
    let agg = aggregate(&methods, &rows);
    write_csv(&out.join(AGGREGATE_FILE), &agg)?;
    manifest.output(AGGREGATE_FILE, None, None);
    manifest.time("total", start);
    manifest.write(out)?;

    print_table(
        &["method", "runs", "failed", "test regret", "mse", "epochs"],
        &agg.iter()
            .map(|a| {
                vec![
                    a.method.clone(),
                    a.runs.to_string(),
                    a.failed.to_string(),
                    format!("{}±{}", f3(a.mean_regret), f3(a.std_regret)),
                    f3(a.mean_mse),
                    format!("{:.1}", a.mean_epochs),
                ]
            })
            .collect::<Vec<_>>(),
    );
    if !all_ok {
        println!();
        print_table(
            &["method", "seed", "status"],
            &manifest
                .status
                .iter()
                .map(|s| vec![s.method.clone(), s.seed.to_string(), if s.ok { "ok".into() } else { "failed".into() }])
                .collect::<Vec<_>>(),
        );
    }
    println!("results written to {}", out.display());
    Ok(all_ok)
}

fn write_seed(out: &Path, manifest: &mut RunManifest, method: Method, seed: u64, f: Finished) -> anyhow::Result<RunRow> {
    let rel = PathBuf::from(method.to_string()).join(format!("seed_{seed}"));
    let dir = out.join(&rel);
    create_dir(&dir)?;
    f.model.save(&dir.join("model.json"))?;
    write_history_csv(&dir.join("history.csv"), &f.history)?;
    std::fs::write(dir.join("eval.json"), serde_json::to_string_pretty(&f.report)? + "\n")?;
    for name in ["model.json", "history.csv", "eval.json"] {
        manifest.output(rel.join(name).to_string_lossy(), Some(seed), Some(method.to_string()));
    }
    Ok(f.row)
}

fn aggregate(methods: &[Method], rows: &[RunRow]) -> Vec<AggregateRow> {
    methods
        .iter()
        .map(|m| {
            let name = m.to_string();
            let mine: Vec<&RunRow> = rows.iter().filter(|r| r.method == name).collect();
            let ok: Vec<&RunRow> = mine.iter().copied().filter(|r| r.status == "ok").collect();
            let regrets: Vec<f64> = ok.iter().filter_map(|r| r.test_regret).collect();
            let (mean_regret, std_regret) = if regrets.is_empty() { (f64::NAN, f64::NAN) } else { mean_std(&regrets) };
            let avg = |v: Vec<f64>| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
            AggregateRow {
                method: name,
                runs: ok.len(),
                failed: mine.len() - ok.len(),
                mean_regret,
                std_regret,
                mean_mse: avg(ok.iter().filter_map(|r| r.mse).collect()),
                mean_epochs: avg(ok.iter().filter_map(|r| r.epochs_run.map(|e| e as f64)).collect()),
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub struct EvalArgs<'a> {
    pub problem: &'a Path,
    pub dataset: &'a Path,
    pub model: Option<&'a Path>,
    pub split: Split,
    pub tol: f64,
}

/// Scores a saved model (or the label oracle when `model` is `None`).
pub fn cmd_eval(args: &EvalArgs<'_>, out: Option<&Path>) -> anyhow::Result<EvalReport> {
    let start = Instant::now();
    let template = read_problem(args.problem)?;
    let dataset = read_dataset(args.dataset)?;
    let task = Task::new(dataset, template, args.tol)?;
    let report = match args.model {
        Some(path) => {
            let model = MlpModel::load(path).with_context(|| format!("cannot load model {}", path.display()))?;
            evaluate(&model, &task, args.split, args.tol)?
        }
        None => evaluate_with(&task, args.split, args.tol, |i| Ok(task.dataset.labels[i].clone()))?,
    };
    print_table(
        &["split", "samples", "regret", "mse", "max violation", "solver failures"],
        &[vec![
            args.split.as_str().into(),
            report.regrets.len().to_string(),
            format!("{}±{}", f3(report.mean_regret), f3(report.std_regret)),
            f3(report.mean_mse),
            format!("{:.3e}", report.max_violation),
            report.solver_failures.to_string(),
        ]],
    );
    if let Some(dir) = out {
        create_dir(dir)?;
        std::fs::write(dir.join("eval.json"), serde_json::to_string_pretty(&report)? + "\n")?;
        let snapshot = serde_json::json!({
            "problem": args.problem,
            "dataset": args.dataset,
            "model": args.model,
            "split": args.split,
            "solver_tol": args.tol,
        });
        let mut manifest = RunManifest::new("eval", snapshot, Vec::new())?;
        manifest.output("eval.json", None, None);
        manifest.time("total", start);
        manifest.write(dir)?;
    }
    Ok(report)
}
