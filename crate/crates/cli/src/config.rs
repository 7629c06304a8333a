use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use softpo_core::datagen::GenConfig;
use softpo_core::training::{Method, TrainConfig};

/// Experiment configuration: one section per module plus run orchestration.
///
/// ```toml
/// [data]
/// family = "LinearSoft"
/// n = 40
///
/// [train]
/// epochs = 20
/// K = 5.0
///
/// [run]
/// name = "lp"
/// seeds = [0, 1, 2]
/// methods = ["surrogate", "two_stage_l2"]
/// ```
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data: GenConfig,
    pub train: TrainConfig,
    pub run: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Output directory name under the output root.
    pub name: String,
    pub seeds: Vec<u64>,
    /// Methods to compare; empty means `train.method` alone.
    pub methods: Vec<Method>,
    /// When non-empty, surrogate runs pick K from this grid on validation regret.
    pub k_grid: Vec<f64>,
    /// Directory holding `problem.json` and `dataset.csv` from `datagen`.
    /// Without it every seed generates its own data with `data.seed = seed`.
    pub data_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            name: "run".into(),
            seeds: vec![0],
            methods: Vec::new(),
            k_grid: Vec::new(),
            data_dir: None,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: Config = toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        if let Some(dir) = &cfg.run.data_dir {
            if dir.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.run.data_dir = Some(base.join(dir));
            }
        }
        Ok(cfg)
    }

    pub fn methods(&self) -> Vec<Method> {
        if self.run.methods.is_empty() {
            vec![self.train.method]
        } else {
            self.run.methods.clone()
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.data.validate().context("[data]")?;
        if self.run.seeds.is_empty() {
            bail!("[run] seeds: need at least one seed");
        }
        let mut seen = self.run.seeds.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.run.seeds.len() {
            bail!("[run] seeds: duplicate seeds");
        }
        if self.run.name.is_empty() || self.run.name.contains(['/', '\\']) {
            bail!("[run] name: must be a plain directory name");
        }
        if self.run.k_grid.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            bail!("[run] k_grid: entries must be positive");
        }
        Ok(())
    }
}

/// Parses `3`, `0,1,5` or `0..15` (end exclusive) into a seed list.
pub fn parse_seeds(s: &str) -> anyhow::Result<Vec<u64>> {
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().with_context(|| format!("bad seed range start in `{s}`"))?;
        let b: u64 = b.trim().parse().with_context(|| format!("bad seed range end in `{s}`"))?;
        if b <= a {
            bail!("empty seed range `{s}`");
        }
        return Ok((a..b).collect());
    }
    s.split(',')
        .map(|p| p.trim().parse::<u64>().with_context(|| format!("bad seed `{p}`")))
        .collect()
}

/// `SOFTPO_OUTPUT_ROOT`, or `runs` in the working directory.
pub fn output_root() -> PathBuf {
    std::env::var_os("SOFTPO_OUTPUT_ROOT").map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}
