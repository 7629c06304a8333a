//! Synthetic prediction datasets, problem-parameter generators for the three
//! applications, and the CSV dataset format.

use std::path::Path;

use nalgebra::Cholesky;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{stream_rng, Matrix, Vector};
use crate::predictor::MlpModel;
use crate::problem::{ObjectiveFamily, PredictionTarget, ProblemInstance};

// Independent generator streams per component.
const STREAM_SCM: u64 = 1;
const STREAM_SAMPLES: u64 = 2;
const STREAM_LABEL_NET: u64 = 3;
const STREAM_LP: u64 = 10;
const STREAM_PORTFOLIO: u64 = 11;
const STREAM_PROVISIONING: u64 = 12;

/// Rows of the resource-provisioning matrix (hours) and decision size (regions).
pub const HOURS: usize = 24;
pub const REGIONS: usize = 8;

/// `(α₁, α₂)` multiples of the all-ones vector for the provisioning study.
pub const RATIO_PAIRS: [(f64, f64); 5] = [(50.0, 0.5), (5.0, 0.5), (1.0, 1.0), (0.5, 5.0), (0.5, 50.0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "valid" | "validation" => Ok(Split::Valid),
            "test" => Ok(Split::Test),
            _ => Err(Error::validation("split", format!("unknown split `{s}`"))),
        }
    }
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        }
    }
}

/// Feature/label pairs with a split tag per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionDataset {
    pub features: Vec<Vector>,
    pub labels: Vec<Vector>,
    pub split: Vec<Split>,
}

impl PredictionDataset {
    pub fn new(features: Vec<Vector>, labels: Vec<Vector>, split: Vec<Split>) -> Result<Self> {
        if features.len() != labels.len() || features.len() != split.len() {
            return Err(Error::dimension("dataset columns", features.len(), labels.len().min(split.len())));
        }
        if let (Some(f0), Some(l0)) = (features.first(), labels.first()) {
            if let Some(i) = features.iter().position(|f| f.len() != f0.len()) {
                return Err(Error::dimension(format!("features of sample {i}"), f0.len(), features[i].len()));
            }
            if let Some(i) = labels.iter().position(|l| l.len() != l0.len()) {
                return Err(Error::dimension(format!("labels of sample {i}"), l0.len(), labels[i].len()));
            }
        }
        Ok(PredictionDataset { features, labels, split })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.first().map_or(0, |f| f.len())
    }

    pub fn label_dim(&self) -> usize {
        self.labels.first().map_or(0, |l| l.len())
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|i| self.split[*i] == split).collect()
    }
}

/// Consecutive 50/25/25 split (rounded down for the first two parts).
pub fn default_split(len: usize) -> Vec<Split> {
    proportional_split(len, 0.5, 0.25)
}

pub fn proportional_split(len: usize, train: f64, valid: f64) -> Vec<Split> {
    let n_train = (len as f64 * train).floor() as usize;
    let n_valid = (len as f64 * valid).floor() as usize;
    (0..len)
        .map(|i| {
            if i < n_train {
                Split::Train
            } else if i < n_train + n_valid {
                Split::Valid
            } else {
                Split::Test
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub family: ObjectiveFamily,
    /// Decision dimension (ignored for provisioning, which is fixed at 8).
    pub n: usize,
    /// Hard inequality rows (LP only).
    pub m1: usize,
    /// Soft rows (LP only; portfolio uses `round(0.4n)`, provisioning 24).
    pub m3: usize,
    /// Dataset size `N`.
    pub samples: usize,
    pub feature_dim: usize,
    pub latent_dim: usize,
    /// Width of both hidden layers of the label network.
    pub label_hidden: usize,
    pub seed: u64,
    /// Index into [`RATIO_PAIRS`] (provisioning only).
    pub ratio_index: usize,
    /// Shrinkage weight towards the diagonal for the portfolio covariance.
    pub shrinkage: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            family: ObjectiveFamily::LinearSoft,
            n: 40,
            m1: 40,
            m3: 20,
            samples: 1000,
            feature_dim: 8,
            latent_dim: 8,
            label_hidden: 32,
            seed: 0,
            ratio_index: 2,
            shrinkage: 0.1,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("n", self.n),
            ("samples", self.samples),
            ("feature_dim", self.feature_dim),
            ("latent_dim", self.latent_dim),
            ("label_hidden", self.label_hidden),
        ] {
            if v == 0 {
                return Err(Error::validation(field, "must be positive"));
            }
        }
        if self.ratio_index >= RATIO_PAIRS.len() {
            return Err(Error::validation("ratio_index", format!("must be below {}", RATIO_PAIRS.len())));
        }
        if !(0.0..=1.0).contains(&self.shrinkage) {
            return Err(Error::validation("shrinkage", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// `N(0, 1)` truncated to `[0, 1.5]` by rejection.
fn truncated_normal(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let v = normal(rng);
        if (0.0..=1.5).contains(&v) {
            return v;
        }
    }
}

/// Structural causal model: `ξ* ~ N(0, I + QQᵀ)`, `z = sin(2π ξ*B)`,
/// `θ = h(z) + 0.01·ε₂` with `h` a random two-hidden-layer ReLU network whose
/// outputs are min-max scaled per dimension into `(0, 1]`, and
/// `ξ = ξ* + 0.01·ε₁`. `ε₂` is a standard normal truncated to `[0, 1.5]`.
pub fn gen_prediction_dataset(cfg: &GenConfig, label_dim: usize) -> Result<PredictionDataset> {
    cfg.validate()?;
    if label_dim == 0 {
        return Err(Error::validation("label_dim", "must be positive"));
    }
    let k = cfg.feature_dim;
    let mut scm = stream_rng(cfg.seed, STREAM_SCM);
    let q = Matrix::from_fn(k, k, |_, _| scm.random::<f64>());
    let sigma = Matrix::identity(k, k) + &q * q.transpose();
    let chol = Cholesky::new(sigma).ok_or_else(|| Error::Solver("feature covariance is not positive definite".into()))?;
    let l = chol.l();
    let b = Matrix::from_fn(k, cfg.latent_dim, |_, _| if scm.random::<bool>() { 1.0 } else { 0.0 });
    let h = MlpModel::new(&[cfg.latent_dim, cfg.label_hidden, cfg.label_hidden, label_dim], cfg.seed ^ STREAM_LABEL_NET)?;

    let mut rng = stream_rng(cfg.seed, STREAM_SAMPLES);
    let mut features = Vec::with_capacity(cfg.samples);
    let mut raw = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        let e = Vector::from_fn(k, |_, _| normal(&mut rng));
        let xi_star = &l * e;
        let z = (b.tr_mul(&xi_star)).map(|v| (2.0 * std::f64::consts::PI * v).sin());
        raw.push(h.predict(&z)?);
        features.push(xi_star + Vector::from_fn(k, |_, _| 0.01 * normal(&mut rng)));
    }
    let labels = normalize_unit_interval(&raw)
        .into_iter()
        .map(|t| t.map(|v| v + 0.01 * truncated_normal(&mut rng)))
        .collect();
    PredictionDataset::new(features, labels, default_split(cfg.samples))
}

/// Per-dimension min-max scaling into `(0, 1]`: the minimum maps to about
/// 0.0099 (a 1% margin keeps it off zero) and the maximum to exactly 1.
fn normalize_unit_interval(raw: &[Vector]) -> Vec<Vector> {
    let dim = raw[0].len();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for r in raw {
        for j in 0..dim {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }
    raw.iter()
        .map(|r| {
            Vector::from_fn(dim, |j, _| {
                let range = hi[j] - lo[j];
                if range <= 0.0 {
                    1.0
                } else {
                    let margin = 0.01 * range;
                    (r[j] - lo[j] + margin) / (range + margin)
                }
            })
        })
        .collect()
}

fn sparse_uniform(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| {
        let v = rng.random::<f64>();
        if rng.random::<f64>() < 0.5 {
            0.0
        } else {
            v
        }
    })
}

/// Synthetic LP: `A, C ~ U(0, 1)` with each entry zeroed with probability
/// 0.5, `b = 0.5·A·1`, `d = 0.25·C·1`, `α ~ U(0, 0.2)`. All-zero rows of `A`
/// are redrawn, then all-zero columns, so every coordinate is bounded.
/// `θ` is left at zero; it is supplied per sample by the dataset.
pub fn gen_lp_problem(cfg: &GenConfig) -> Result<ProblemInstance> {
    cfg.validate()?;
    if cfg.m1 == 0 {
        return Err(Error::validation("m1", "the synthetic LP needs at least one hard row"));
    }
    let (n, m1, m3) = (cfg.n, cfg.m1, cfg.m3);
    let mut rng = stream_rng(cfg.seed, STREAM_LP);
    let mut a = sparse_uniform(&mut rng, m1, n);
    for i in 0..m1 {
        while a.row(i).iter().all(|v| *v == 0.0) {
            let fresh = sparse_uniform(&mut rng, 1, n);
            a.set_row(i, &fresh.row(0));
        }
    }
    for j in 0..n {
        while a.column(j).iter().all(|v| *v == 0.0) {
            let fresh = sparse_uniform(&mut rng, m1, 1);
            a.set_column(j, &fresh.column(0));
        }
    }
    let c = sparse_uniform(&mut rng, m3, n);
    let alpha = Vector::from_fn(m3, |_, _| 0.2 * rng.random::<f64>());
    let ones = Vector::from_element(n, 1.0);
    let b = &a * &ones * 0.5;
    let d = &c * &ones * 0.25;
    let p = ProblemInstance::linear_soft(Vector::zeros(n))
        .with_inequalities(a, b)
        .with_soft(c, d, alpha)
        .with_target(PredictionTarget::Theta);
    p.validate()?;
    Ok(p)
}

/// Mean-variance portfolio on the simplex `1ᵀx = 1`. `Q` is the training-label
/// covariance shrunk towards its diagonal plus `1e-6·I`; `round(0.4n)` soft
/// rows with Bernoulli(0.1) entries, `α = (15/n)·v`, `v ~ U(0, 1)`,
/// `d = 0.25·C·1`.
pub fn gen_portfolio_problem(cfg: &GenConfig, dataset: &PredictionDataset) -> Result<ProblemInstance> {
    cfg.validate()?;
    let n = cfg.n;
    if dataset.label_dim() != n {
        return Err(Error::dimension("portfolio labels", n, dataset.label_dim()));
    }
    let train = dataset.indices(Split::Train);
    if train.len() < 2 {
        return Err(Error::validation("dataset", "need at least two training samples for a covariance"));
    }
    let mean = train.iter().fold(Vector::zeros(n), |acc, &i| acc + &dataset.labels[i]) / train.len() as f64;
    let mut cov = Matrix::zeros(n, n);
    for &i in &train {
        let c = &dataset.labels[i] - &mean;
        cov += &c * c.transpose();
    }
    cov /= (train.len() - 1) as f64;
    let lam = cfg.shrinkage;
    let diag = Matrix::from_diagonal(&cov.diagonal());
    let q = cov * (1.0 - lam) + diag * lam + Matrix::identity(n, n) * 1e-6;
    let q = (&q + q.transpose()) * 0.5;

    let mut rng = stream_rng(cfg.seed, STREAM_PORTFOLIO);
    let m3 = (0.4 * n as f64).round() as usize;
    let c = Matrix::from_fn(m3, n, |_, _| if rng.random::<f64>() < 0.1 { 1.0 } else { 0.0 });
    let alpha = Vector::from_fn(m3, |_, _| 15.0 / n as f64 * rng.random::<f64>());
    let d = &c * Vector::from_element(n, 1.0) * 0.25;
    let p = ProblemInstance::quadratic_soft(Vector::zeros(n), q)
        .with_equalities(Matrix::from_element(1, n, 1.0), Vector::from_element(1, 1.0))
        .with_soft(c, d, alpha)
        .with_target(PredictionTarget::Theta);
    p.validate()?;
    Ok(p)
}

/// Synthetic hourly loads for eight regions with daily and weekly cycles
/// and AR(1) noise; each sample predicts the next 24×8 block from the
/// previous day's loads and calendar encodings. The split is chronological
/// 70/10/20. The template problem matches `Cx` to
/// `d = 0.5·1 + 0.1·N(0, 1)` over the simplex with the chosen `(α₁, α₂)`.
pub fn gen_resource_provisioning(cfg: &GenConfig) -> Result<(ProblemInstance, PredictionDataset)> {
    cfg.validate()?;
    let mut rng = stream_rng(cfg.seed, STREAM_PROVISIONING);
    let days = cfg.samples + 1;
    let hours = days * HOURS;
    let base: Vec<f64> = (0..REGIONS).map(|_| 0.35 + 0.3 * rng.random::<f64>()).collect();
    let daily_amp: Vec<f64> = (0..REGIONS).map(|_| 0.15 + 0.2 * rng.random::<f64>()).collect();
    let phase: Vec<f64> = (0..REGIONS).map(|_| 12.0 + 6.0 * rng.random::<f64>()).collect();
    let weekly_amp: Vec<f64> = (0..REGIONS).map(|_| 0.05 + 0.1 * rng.random::<f64>()).collect();
    let mut ar = vec![0.0; REGIONS];
    let tau = 2.0 * std::f64::consts::PI;
    let mut load = Matrix::zeros(hours, REGIONS);
    for t in 0..hours {
        let hour = (t % HOURS) as f64;
        let day = (t / HOURS) as f64;
        for r in 0..REGIONS {
            ar[r] = 0.8 * ar[r] + 0.03 * normal(&mut rng);
            let v = base[r]
                * (1.0 + daily_amp[r] * (tau * (hour - phase[r]) / 24.0).cos() + weekly_amp[r] * (tau * day / 7.0).sin())
                + ar[r];
            load[(t, r)] = v.max(0.02);
        }
    }
    let mut features = Vec::with_capacity(cfg.samples);
    let mut labels = Vec::with_capacity(cfg.samples);
    for s in 0..cfg.samples {
        let start = (s + 1) * HOURS;
        let day = (s + 1) as f64;
        let mut f: Vec<f64> = Vec::with_capacity(HOURS * REGIONS + 2);
        for t in start - HOURS..start {
            f.extend(load.row(t).iter());
        }
        f.push((tau * day / 7.0).sin());
        f.push((tau * day / 7.0).cos());
        features.push(Vector::from_vec(f));
        let mut y = Vec::with_capacity(HOURS * REGIONS);
        for t in start..start + HOURS {
            y.extend(load.row(t).iter());
        }
        labels.push(Vector::from_vec(y));
    }
    let dataset = PredictionDataset::new(features, labels, proportional_split(cfg.samples, 0.7, 0.1))?;

    let d = Vector::from_fn(HOURS, |_, _| 0.5 + 0.1 * normal(&mut rng));
    let (a1, a2) = RATIO_PAIRS[cfg.ratio_index];
    let template_c = Matrix::from_fn(HOURS, REGIONS, |i, j| dataset.labels[0][i * REGIONS + j]);
    let p = ProblemInstance::asymmetric_soft(
        template_c,
        d,
        Vector::from_element(HOURS, a1),
        Vector::from_element(HOURS, a2),
    )
    .with_equalities(Matrix::from_element(1, REGIONS, 1.0), Vector::from_element(1, 1.0));
    p.validate()?;
    Ok((p, dataset))
}

/// Generates the template problem and its dataset for any family.
pub fn generate(cfg: &GenConfig) -> Result<(ProblemInstance, PredictionDataset)> {
    match cfg.family {
        ObjectiveFamily::LinearSoft => {
            let ds = gen_prediction_dataset(cfg, cfg.n)?;
            Ok((gen_lp_problem(cfg)?, ds))
        }
        ObjectiveFamily::QuadraticSoft => {
            let ds = gen_prediction_dataset(cfg, cfg.n)?;
            Ok((gen_portfolio_problem(cfg, &ds)?, ds))
        }
        ObjectiveFamily::AsymmetricSoft => gen_resource_provisioning(cfg),
    }
}

/// Shape of a random benchmark instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceShape {
    pub n: usize,
    pub m1: usize,
    pub m3: usize,
}

/// Random LinearSoft instance with the synthetic-LP structure: dense
/// `A ~ U(0.1, 1)`, `b = 0.5·A·1`, `C ~ U(0, 1)`, `d = 0.25·C·1`,
/// `θ ~ U(0.1, 1)` and `α ~ U(0.1, 1)`.
pub fn random_linear_instance(rng: &mut ChaCha8Rng, shape: InstanceShape) -> ProblemInstance {
    let theta = Vector::from_fn(shape.n, |_, _| rng.random_range(0.1..1.0));
    let (a, b, c, d, alpha) = random_blocks(rng, shape);
    ProblemInstance::linear_soft(theta)
        .with_inequalities(a, b)
        .with_soft(c, d, alpha)
}

/// Random QuadraticSoft instance: the linear structure plus `Q = LLᵀ/n + 0.1·I`.
pub fn random_quadratic_instance(rng: &mut ChaCha8Rng, shape: InstanceShape) -> ProblemInstance {
    let n = shape.n;
    let theta = Vector::from_fn(n, |_, _| rng.random_range(0.1..1.0));
    let l = Matrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = &l * l.transpose() / n as f64 + Matrix::identity(n, n) * 0.1;
    let (a, b, c, d, alpha) = random_blocks(rng, shape);
    ProblemInstance::quadratic_soft(theta, q)
        .with_inequalities(a, b)
        .with_soft(c, d, alpha)
}

/// Random AsymmetricSoft instance with `A x ≤ b` instead of the simplex, so
/// the feasible set has full dimension.
pub fn random_asymmetric_instance(rng: &mut ChaCha8Rng, shape: InstanceShape) -> ProblemInstance {
    let (a, b, c, d, alpha) = random_blocks(rng, shape);
    let alpha2 = Vector::from_fn(shape.m3, |_, _| rng.random_range(0.1..1.0));
    ProblemInstance::asymmetric_soft(c, d, alpha, alpha2).with_inequalities(a, b)
}

fn random_blocks(rng: &mut ChaCha8Rng, shape: InstanceShape) -> (Matrix, Vector, Matrix, Vector, Vector) {
    let InstanceShape { n, m1, m3 } = shape;
    let a = Matrix::from_fn(m1, n, |_, _| rng.random_range(0.1..1.0));
    let c = Matrix::from_fn(m3, n, |_, _| rng.random::<f64>());
    let alpha = Vector::from_fn(m3, |_, _| rng.random_range(0.1..1.0));
    let ones = Vector::from_element(n, 1.0);
    let b = &a * &ones * 0.5;
    let d = &c * &ones * 0.25;
    (a, b, c, d, alpha)
}

/// Expected column counts when loading a CSV dataset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsvSchema {
    pub features: Option<usize>,
    pub labels: Option<usize>,
}

/// Writes `f_*`, `y_*` and `split` columns with a header row.
pub fn write_csv_dataset(path: &Path, ds: &PredictionDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, 0, e))?;
    let mut header: Vec<String> = (0..ds.feature_dim()).map(|i| format!("f_{i}")).collect();
    header.extend((0..ds.label_dim()).map(|i| format!("y_{i}")));
    header.push("split".into());
    w.write_record(&header).map_err(|e| csv_error(path, 1, e))?;
    for i in 0..ds.len() {
        let mut rec: Vec<String> = ds.features[i].iter().map(|v| format!("{v:?}")).collect();
        rec.extend(ds.labels[i].iter().map(|v| format!("{v:?}")));
        rec.push(ds.split[i].as_str().into());
        w.write_record(&rec).map_err(|e| csv_error(path, i + 2, e))?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(path: &Path, line: usize, reason: impl std::fmt::Display) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        line,
        reason: reason.to_string(),
    }
}

/// Reads a dataset with a header row of `f_*` feature columns, `y_*` label
/// columns and an optional `split` column (train/valid/test). Without a
/// split column the rows are split 50/25/25 in file order.
pub fn load_csv_dataset(path: &Path, schema: CsvSchema) -> Result<PredictionDataset> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, 0, e))?;
    let header = r.headers().map_err(|e| csv_error(path, 1, e))?.clone();
    let mut fcols = Vec::new();
    let mut ycols = Vec::new();
    let mut split_col = None;
    for (i, name) in header.iter().enumerate() {
        let name = name.trim();
        if name.starts_with("f_") {
            fcols.push(i);
        } else if name.starts_with("y_") {
            ycols.push(i);
        } else if name == "split" {
            split_col = Some(i);
        } else {
            return Err(csv_error(path, 1, format!("unexpected column `{name}`")));
        }
    }
    if fcols.is_empty() || ycols.is_empty() {
        return Err(csv_error(path, 1, "need at least one f_ and one y_ column"));
    }
    for (want, got, what) in [(schema.features, fcols.len(), "feature"), (schema.labels, ycols.len(), "label")] {
        if let Some(w) = want {
            if w != got {
                return Err(csv_error(path, 1, format!("expected {w} {what} columns, found {got}")));
            }
        }
    }
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut split = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| csv_error(path, line, e))?;
        let cell = |i: usize| -> Result<f64> {
            let s = rec.get(i).ok_or_else(|| csv_error(path, line, format!("missing column {}", i + 1)))?;
            let v: f64 = s
                .trim()
                .parse()
                .map_err(|_| csv_error(path, line, format!("`{s}` is not a number")))?;
            if !v.is_finite() {
                return Err(csv_error(path, line, format!("non-finite value `{s}`")));
            }
            Ok(v)
        };
        let f = fcols.iter().map(|&i| cell(i)).collect::<Result<Vec<_>>>()?;
        let y = ycols.iter().map(|&i| cell(i)).collect::<Result<Vec<_>>>()?;
        features.push(Vector::from_vec(f));
        labels.push(Vector::from_vec(y));
        if let Some(c) = split_col {
            let s = rec.get(c).unwrap_or("");
            split.push(s.parse::<Split>().map_err(|e| csv_error(path, line, e))?);
        }
    }
    if split_col.is_none() {
        split = default_split(features.len());
    }
    PredictionDataset::new(features, labels, split)
}
