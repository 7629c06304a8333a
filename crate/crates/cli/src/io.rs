use std::path::Path;

use anyhow::Context;
use softpo_core::datagen::{load_csv_dataset, CsvSchema, PredictionDataset};
use softpo_core::problem::ProblemFile;
use softpo_core::ProblemInstance;

pub const PROBLEM_FILE: &str = "problem.json";
pub const DATASET_FILE: &str = "dataset.csv";

pub fn write_problem(path: &Path, p: &ProblemInstance) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(&ProblemFile::from(p.clone()))? + "\n";
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn read_problem(path: &Path) -> anyhow::Result<ProblemInstance> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read problem {}", path.display()))?;
    let file: ProblemFile = serde_json::from_str(&text).with_context(|| format!("invalid problem file {}", path.display()))?;
    let p = ProblemInstance::try_from(file).with_context(|| format!("invalid problem file {}", path.display()))?;
    p.validate_shapes().with_context(|| format!("invalid problem file {}", path.display()))?;
    Ok(p)
}

pub fn read_dataset(path: &Path) -> anyhow::Result<PredictionDataset> {
    load_csv_dataset(path, CsvSchema::default()).with_context(|| format!("cannot load dataset {}", path.display()))
}

/// Loads the `problem.json`/`dataset.csv` pair written by `datagen`.
pub fn read_data_dir(dir: &Path) -> anyhow::Result<(ProblemInstance, PredictionDataset)> {
    Ok((read_problem(&dir.join(PROBLEM_FILE))?, read_dataset(&dir.join(DATASET_FILE))?))
}

pub fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

/// Plain-text table with left-aligned columns.
pub fn print_table(header: &[&str], rows: &[Vec<String>]) {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| {
        let parts: Vec<String> = cells.iter().zip(&width).map(|(c, w)| format!("{c:<w$}")).collect();
        println!("{}", parts.join("  ").trim_end());
    };
    line(header.to_vec());
    line(width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect());
    for row in rows {
        line(row.iter().map(String::as_str).collect());
    }
}

pub fn f3(v: f64) -> String {
    format!("{v:.3}")
}
