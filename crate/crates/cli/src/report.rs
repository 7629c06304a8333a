use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use serde::Serialize;
use softpo_core::training::{mean_std, paired_ttest, TTest};
use softpo_core::Error;

use crate::io::{create_dir, f3, print_table};
use crate::manifest::RunManifest;
use crate::train::{write_csv, RunRow, RUNS_FILE};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub method: String,
    pub seeds: usize,
    pub mean_regret: f64,
    pub std_regret: f64,
    pub mean_mse: f64,
}

/// Paired one-tailed test of `method` regret exceeding `baseline` regret.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TTestRow {
    pub method: String,
    pub baseline: String,
    pub pairs: usize,
    pub mean_diff: f64,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub df: usize,
    pub degenerate: bool,
}

fn runs_path(p: &Path) -> PathBuf {
    if p.is_dir() {
        p.join(RUNS_FILE)
    } else {
        p.to_path_buf()
    }
}

/// Successful `(seed → (regret, mse))` per method, merged over every input.
pub fn read_runs(paths: &[PathBuf]) -> anyhow::Result<BTreeMap<String, BTreeMap<u64, (f64, f64)>>> {
    let mut by_method: BTreeMap<String, BTreeMap<u64, (f64, f64)>> = BTreeMap::new();
    for p in paths {
        let path = runs_path(p);
        let mut r = csv::Reader::from_path(&path).with_context(|| format!("cannot read {}", path.display()))?;
        for (i, rec) in r.deserialize::<RunRow>().enumerate() {
            let row = rec.with_context(|| format!("{}:{}: malformed row", path.display(), i + 2))?;
            if row.status != "ok" {
                continue;
            }
            let (Some(regret), Some(mse)) = (row.test_regret, row.mse) else {
                bail!("{}:{}: ok row without regret", path.display(), i + 2);
            };
            if by_method.entry(row.method.clone()).or_default().insert(row.seed, (regret, mse)).is_some() {
                bail!("{}:{}: duplicate result for {} seed {}", path.display(), i + 2, row.method, row.seed);
            }
        }
    }
    Ok(by_method)
}

pub fn compare(
    runs: &BTreeMap<String, BTreeMap<u64, (f64, f64)>>,
    baseline: &str,
) -> anyhow::Result<(Vec<ComparisonRow>, Vec<TTestRow>)> {
    if runs.len() < 2 {
        bail!("report needs at least two methods, found {}", runs.len());
    }
    let Some(base) = runs.get(baseline) else {
        bail!("baseline method `{baseline}` not found (have {})", runs.keys().cloned().collect::<Vec<_>>().join(", "));
    };
    let seeds: Vec<u64> = base.keys().copied().collect();
    let mut table = Vec::new();
    let mut tests = Vec::new();
    for (method, res) in runs {
        let mine: Vec<u64> = res.keys().copied().collect();
        if mine != seeds {
            bail!("seed sets differ: {method} has {mine:?}, {baseline} has {seeds:?}");
        }
        let regrets: Vec<f64> = res.values().map(|v| v.0).collect();
        let (mean_regret, std_regret) = mean_std(&regrets);
        table.push(ComparisonRow {
            method: method.clone(),
            seeds: regrets.len(),
            mean_regret,
            std_regret,
            mean_mse: res.values().map(|v| v.1).sum::<f64>() / regrets.len() as f64,
        });
        if method == baseline {
            continue;
        }
        let base_regrets: Vec<f64> = base.values().map(|v| v.0).collect();
        let diffs: Vec<f64> = regrets.iter().zip(&base_regrets).map(|(a, b)| a - b).collect();
        let (t, p, degenerate) = match paired_ttest(&regrets, &base_regrets) {
            Ok(TTest { t, p, .. }) => (Some(t), Some(p), false),
            Err(Error::Degenerate(_)) => (None, None, true),
            Err(e) => return Err(e.into()),
        };
        tests.push(TTestRow {
            method: method.clone(),
            baseline: baseline.into(),
            pairs: diffs.len(),
            mean_diff: mean_std(&diffs).0,
            t,
            p,
            df: diffs.len() - 1,
            degenerate,
        });
    }
    Ok((table, tests))
}

pub fn cmd_report(paths: &[PathBuf], baseline: &str, out: Option<&Path>) -> anyhow::Result<Vec<TTestRow>> {
    let start = Instant::now();
    let runs = read_runs(paths)?;
    let (table, tests) = compare(&runs, baseline)?;
    print_table(
        &["method", "seeds", "test regret", "mse"],
        &table
            .iter()
            .map(|r| vec![r.method.clone(), r.seeds.to_string(), format!("{}±{}", f3(r.mean_regret), f3(r.std_regret)), f3(r.mean_mse)])
            .collect::<Vec<_>>(),
    );
    println!();
    print_table(
        &["method", "vs", "t", "p (one-tailed)"],
        &tests
            .iter()
            .map(|r| {
                let show = |v: Option<f64>| v.map_or_else(|| "degenerate".to_string(), f3);
                vec![r.method.clone(), r.baseline.clone(), show(r.t), show(r.p)]
            })
            .collect::<Vec<_>>(),
    );
    if let Some(dir) = out {
        create_dir(dir)?;
        write_csv(&dir.join("comparison.csv"), &table)?;
        write_csv(&dir.join("ttest.csv"), &tests)?;
        let inputs: Vec<PathBuf> = paths.iter().map(|p| runs_path(p)).collect();
        let mut manifest = RunManifest::new("report", serde_json::json!({ "inputs": inputs, "baseline": baseline }), Vec::new())?;
        manifest.output("comparison.csv", None, None);
        manifest.output("ttest.csv", None, None);
        manifest.time("total", start);
        manifest.write(dir)?;
    }
    Ok(tests)
}
