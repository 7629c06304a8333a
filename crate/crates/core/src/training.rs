//! Training loops (smoothed-surrogate, two-stage and SPO+), evaluation on
//! regret, and the paired t-test used to compare methods.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::datagen::{PredictionDataset, Split};
use crate::error::{Error, Result};
use crate::linalg::{stream_rng, Vector};
use crate::penalty::{default_gradient_bound, empirical_beta, theorem_beta};
use crate::predictor::{Gradients, MlpModel, OptimizerKind, OptimizerState};
use crate::problem::{unify, ObjectiveFamily, PredictionTarget, ProblemInstance};
use crate::solver::{feasible_point, solve_original, SolveStatus, SolverOptions};
use crate::surrogate::{
    breakpoint_gap, segment_state, surrogate_objective, LossContext, SegmentSystem, SEGMENT_STABILITY_GAP,
};

const STREAM_SHUFFLE: u64 = 20;

/// Fraction of singular samples per epoch above which training aborts.
pub const MAX_SINGULAR_FRACTION: f64 = 0.1;

/// Smoothing values searched by [`train_with_k_selection`].
pub const K_GRID: [f64; 5] = [0.2, 1.0, 5.0, 25.0, 125.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Surrogate,
    TwoStageL1,
    TwoStageL2,
    WeightedL1,
    SpoPlus,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "surrogate" => Ok(Method::Surrogate),
            "two_stage_l1" | "l1" => Ok(Method::TwoStageL1),
            "two_stage_l2" | "l2" => Ok(Method::TwoStageL2),
            "weighted_l1" => Ok(Method::WeightedL1),
            "spo_plus" | "spo+" => Ok(Method::SpoPlus),
            _ => Err(Error::validation("method", format!("unknown method `{s}`"))),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Surrogate => "surrogate",
            Method::TwoStageL1 => "two_stage_l1",
            Method::TwoStageL2 => "two_stage_l2",
            Method::WeightedL1 => "weighted_l1",
            Method::SpoPlus => "spo_plus",
        })
    }
}

/// How the hard-constraint multiplier `β` is chosen. `E` is the largest
/// gradient bound over the training samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum BetaPolicy {
    /// `k·E·(√n)^step`.
    Empirical {
        k: f64,
        #[serde(default)]
        step: u32,
    },
    /// Theorem-form bound with an explicit constant.
    Theorem { scale: f64 },
    Fixed { value: f64 },
}

impl Default for BetaPolicy {
    fn default() -> Self {
        BetaPolicy::Empirical { k: 10.0, step: 0 }
    }
}

/// Point at which the true-parameter gradient `∂r/∂x` is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpstreamPoint {
    /// Closed-form optimum of the segment system found at the decision,
    /// i.e. the point whose Jacobian `H⁻¹` describes. At a perfect
    /// prediction the upstream gradient vanishes there.
    #[default]
    SegmentOptimum,
    /// The solver's decision itself. Active hard rows then contribute a
    /// constant `β/2` pull even when the prediction is exact.
    Decision,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub method: Method,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub clip_norm: Option<f64>,
    pub optimizer: OptimizerKind,
    pub hidden: Vec<usize>,
    #[serde(rename = "K")]
    pub k: f64,
    pub beta: BetaPolicy,
    pub upstream: UpstreamPoint,
    pub early_stop_patience: usize,
    pub seed: u64,
    pub solver_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            method: Method::Surrogate,
            epochs: 40,
            batch_size: 50,
            learning_rate: 0.01,
            clip_norm: None,
            optimizer: OptimizerKind::AdaGrad,
            hidden: vec![128, 128],
            k: 1.0,
            beta: BetaPolicy::default(),
            upstream: UpstreamPoint::default(),
            early_stop_patience: 4,
            seed: 0,
            solver_tol: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, template: &ProblemInstance) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size", "must be positive"));
        }
        if self.early_stop_patience == 0 {
            return Err(Error::validation("early_stop_patience", "must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::validation("hidden", "layer widths must be positive"));
        }
        for (field, v) in [("learning_rate", self.learning_rate), ("K", self.k), ("solver_tol", self.solver_tol)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(field, "must be positive and finite"));
            }
        }
        match self.beta {
            BetaPolicy::Empirical { k, .. } if !(k > 0.0 && k.is_finite()) => {
                return Err(Error::validation("beta.k", "must be positive and finite"))
            }
            BetaPolicy::Theorem { scale } if !(scale > 0.0 && scale.is_finite()) => {
                return Err(Error::validation("beta.scale", "must be positive and finite"))
            }
            BetaPolicy::Fixed { value } if !(value > 0.0 && value.is_finite()) => {
                return Err(Error::validation("beta.value", "must be positive and finite"))
            }
            _ => {}
        }
        match self.method {
            Method::SpoPlus
                if template.family != ObjectiveFamily::LinearSoft || template.target != PredictionTarget::Theta =>
            {
                Err(Error::Unsupported("SPO+ needs a LinearSoft instance with a theta target".into()))
            }
            Method::WeightedL1 if template.target != PredictionTarget::C => {
                Err(Error::Unsupported("weighted L1 weights rows of a predicted C".into()))
            }
            _ => Ok(()),
        }
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions::with_tol(self.solver_tol)
    }
}

/// A dataset bound to a problem template, with the true instance and its
/// optimum precomputed for every sample.
#[derive(Debug, Clone)]
pub struct Task {
    pub dataset: PredictionDataset,
    pub template: ProblemInstance,
    pub truths: Vec<ProblemInstance>,
    pub optima: Vec<Vector>,
}

impl Task {
    pub fn new(dataset: PredictionDataset, template: ProblemInstance, solver_tol: f64) -> Result<Self> {
        template.validate_shapes()?;
        if dataset.label_dim() != template.target_len() {
            return Err(Error::dimension("labels vs prediction target", template.target_len(), dataset.label_dim()));
        }
        let opts = SolverOptions::with_tol(solver_tol);
        let mut truths = Vec::with_capacity(dataset.len());
        let mut optima = Vec::with_capacity(dataset.len());
        for (i, label) in dataset.labels.iter().enumerate() {
            let truth = template.with_target_params(label)?;
            let report = solve_original(&truth, &opts)?;
            if report.status != SolveStatus::Optimal {
                return Err(Error::Solver(format!("true instance {i}: status {:?}", report.status)));
            }
            optima.push(report.x_opt);
            truths.push(truth);
        }
        Ok(Task {
            dataset,
            template,
            truths,
            optima,
        })
    }

    /// `E`: the largest default gradient bound over the training samples.
    pub fn gradient_bound(&self) -> f64 {
        self.dataset
            .indices(Split::Train)
            .iter()
            .map(|&i| default_gradient_bound(&self.truths[i]))
            .fold(0.0, f64::max)
    }

    pub fn beta(&self, policy: BetaPolicy, seed: u64) -> Result<f64> {
        let e = self.gradient_bound();
        match policy {
            BetaPolicy::Empirical { k, step } => empirical_beta(&self.template, e, k, step),
            BetaPolicy::Theorem { scale } => theorem_beta(&self.template, e, scale, seed),
            BetaPolicy::Fixed { value } => Ok(value),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryRow {
    pub epoch: usize,
    /// Mean minimized training loss over the epoch.
    pub train_obj: f64,
    pub valid_regret: f64,
    pub test_regret: f64,
    /// Prediction MSE on the test split.
    pub mse: f64,
}

pub fn write_history_csv(path: &Path, history: &[HistoryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io(e.into()))?;
    for row in history {
        w.serialize(row).map_err(|e| Error::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best-validation epoch (or the initial model when no
    /// epoch ran).
    pub model: MlpModel,
    pub history: Vec<HistoryRow>,
    pub best_epoch: usize,
    pub beta: f64,
    pub singular_skipped: usize,
    pub unstable_samples: usize,
    pub stopped_early: bool,
}

impl TrainOutcome {
    pub fn best_valid_regret(&self) -> Option<f64> {
        self.history.iter().find(|h| h.epoch == self.best_epoch).map(|h| h.valid_regret)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_regret: f64,
    pub std_regret: f64,
    pub mean_mse: f64,
    pub epochs_run: usize,
    pub regrets: Vec<f64>,
    pub mean_violation: f64,
    pub max_violation: f64,
    /// Samples whose predicted instance could not be solved; they are scored
    /// at a feasible fallback point.
    pub solver_failures: usize,
}

/// Inference and scoring on one split: predict, solve under the predicted
/// parameters, and measure regret under the true ones.
pub fn evaluate(model: &MlpModel, task: &Task, split: Split, solver_tol: f64) -> Result<EvalReport> {
    evaluate_with(task, split, solver_tol, |i| model.predict(&task.dataset.features[i]))
}

/// [`evaluate`] with an arbitrary predictor, e.g. one returning the labels.
pub fn evaluate_with(
    task: &Task,
    split: Split,
    solver_tol: f64,
    predict: impl Fn(usize) -> Result<Vector>,
) -> Result<EvalReport> {
    let idx = task.dataset.indices(split);
    if idx.is_empty() {
        return Err(Error::validation("split", format!("no {} samples", split.as_str())));
    }
    let opts = SolverOptions::with_tol(solver_tol);
    let mut regrets = Vec::with_capacity(idx.len());
    let mut mse = 0.0;
    let mut violations = Vec::with_capacity(idx.len());
    let mut failures = 0;
    for &i in &idx {
        let p = predict(i)?;
        let label = &task.dataset.labels[i];
        if p.len() != label.len() {
            return Err(Error::dimension("prediction", label.len(), p.len()));
        }
        mse += (&p - label).norm_squared() / p.len() as f64;
        let pred = task.template.with_target_params(&p)?;
        let x_hat = match solve_original(&pred, &opts) {
            Ok(r) if r.is_optimal() => r.x_opt,
            _ => {
                failures += 1;
                feasible_point(&task.truths[i], &opts.simplex)?
                    .ok_or_else(|| Error::Solver(format!("sample {i}: no feasible fallback")))?
            }
        };
        let r = task.truths[i].regret(&x_hat, &task.optima[i])?;
        regrets.push(r.value);
        violations.push(r.violation);
    }
    let (mean, std) = mean_std(&regrets);
    Ok(EvalReport {
        mean_regret: mean,
        std_regret: std,
        mean_mse: mse / idx.len() as f64,
        epochs_run: 0,
        mean_violation: violations.iter().sum::<f64>() / violations.len() as f64,
        max_violation: violations.iter().copied().fold(0.0, f64::max),
        regrets,
        solver_failures: failures,
    })
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-sample loss value and its gradient with respect to the network output.
type SampleLoss = (f64, Vector);

/// Outcome of one sample's gradient computation.
enum SampleStep {
    Ok(SampleLoss, bool),
    Singular,
}

struct LossFn<'a> {
    task: &'a Task,
    cfg: &'a TrainConfig,
    beta: f64,
    opts: SolverOptions,
}

impl LossFn<'_> {
    fn sample(&self, i: usize, out: &Vector) -> Result<SampleStep> {
        let label = &self.task.dataset.labels[i];
        let diff = out - label;
        let d = out.len() as f64;
        match self.cfg.method {
            Method::TwoStageL2 => Ok(SampleStep::Ok((diff.norm_squared() / d, &diff * (2.0 / d)), false)),
            Method::TwoStageL1 => Ok(SampleStep::Ok(
                (diff.iter().map(|v| v.abs()).sum::<f64>() / d, diff.map(|v| v.signum() / d)),
                false,
            )),
            Method::WeightedL1 => Ok(SampleStep::Ok(self.weighted_l1(&diff), false)),
            Method::SpoPlus => self.spo_plus(i, out).map(|l| SampleStep::Ok(l, false)),
            Method::Surrogate => self.surrogate(i, out),
        }
    }

    /// Overestimation of row `r` is weighted by `α₂[r]`, underestimation by
    /// `α₁[r]`, element-wise over the flattened `C`.
    fn weighted_l1(&self, diff: &Vector) -> SampleLoss {
        let t = &self.task.template;
        let a1 = &t.alpha;
        let a2 = t.alpha2.as_ref().unwrap_or(a1);
        let n = t.n;
        let d = diff.len() as f64;
        let mut loss = 0.0;
        let grad = Vector::from_fn(diff.len(), |j, _| {
            let r = j / n;
            let v = diff[j];
            if v > 0.0 {
                loss += a2[r] * v;
                a2[r] / d
            } else {
                loss -= a1[r] * v;
                -a1[r] / d
            }
        });
        (loss / d, grad)
    }

    /// SPO+ on the slack LP: with `θ' = 2θ̂ − θ`, the loss is
    /// `f_θ'(x*(θ')) − f_θ'(x*(θ))` and a subgradient is `2(x*(θ') − x*(θ))`.
    fn spo_plus(&self, i: usize, out: &Vector) -> Result<SampleLoss> {
        let (loss, g) = spo_plus_loss(&self.task.truths[i], &self.task.optima[i], out, &self.opts)?;
        Ok((loss, g))
    }

    fn surrogate(&self, i: usize, out: &Vector) -> Result<SampleStep> {
        let sample = surrogate_sample(
            &self.task.template,
            &self.task.truths[i],
            out,
            &SurrogateSettings {
                k: self.cfg.k,
                beta: self.beta,
                upstream: self.cfg.upstream,
                opts: self.opts,
            },
        )?;
        Ok(match sample {
            Some(s) => SampleStep::Ok((-s.value, -s.grad), s.unstable),
            None => SampleStep::Singular,
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SurrogateSettings {
    pub k: f64,
    pub beta: f64,
    pub upstream: UpstreamPoint,
    pub opts: SolverOptions,
}

/// Decision-loss value and ascent gradient for one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSample {
    /// `r = f̄(x, true parameters)` at the upstream point.
    pub value: f64,
    /// `dr/dp̂` for the flattened predicted block.
    pub grad: Vector,
    /// Some penalty row of the decision lies within the stability gap of a
    /// breakpoint.
    pub unstable: bool,
    /// The upstream point lies on the segment it was computed for, so the
    /// on-segment gradient equals the exact gradient of `f̄` there.
    pub on_segment: bool,
}

/// One sample of surrogate training: solve the original problem under the
/// predicted block `params`, fix the segment from the decision, and
/// differentiate the true-parameter surrogate through that segment's
/// closed form. `None` when the predicted problem is not solved to
/// optimality or the segment system is singular.
pub fn surrogate_sample(
    template: &ProblemInstance,
    truth: &ProblemInstance,
    params: &Vector,
    settings: &SurrogateSettings,
) -> Result<Option<SurrogateSample>> {
    let pred = template.with_target_params(params)?;
    let report = solve_original(&pred, &settings.opts)?;
    if !report.is_optimal() {
        return Ok(None);
    }
    let x_hat = report.x_opt;
    let uf_pred = unify(&pred, settings.beta)?;
    let uf_true = unify(truth, settings.beta)?;
    let k = settings.k;
    let z = uf_pred.z(&x_hat);
    let state = segment_state(&z, k);
    let unstable = breakpoint_gap(&z, k) < SEGMENT_STABILITY_GAP;
    let ctx = LossContext {
        pred: &pred,
        uf_pred: &uf_pred,
        truth,
        uf_true: &uf_true,
        k,
    };
    let point = match settings.upstream {
        UpstreamPoint::Decision => x_hat,
        UpstreamPoint::SegmentOptimum => match SegmentSystem::new(&uf_pred, &pred, &state, k) {
            Ok(sys) => sys.x(),
            Err(Error::SingularSystem { .. }) => return Ok(None),
            Err(e) => return Err(e),
        },
    };
    let upstream = ctx.upstream_on_segment(&point, &state);
    match ctx.grad_target(&point, &state, &upstream) {
        Ok(grad) => Ok(Some(SurrogateSample {
            value: surrogate_objective(&uf_true, truth, &point, k),
            grad,
            unstable,
            on_segment: segment_state(&uf_true.z(&point), k) == state,
        })),
        Err(Error::SingularSystem { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// SPO+ loss and its subgradient with respect to the predicted `θ̂`.
pub fn spo_plus_loss(truth: &ProblemInstance, x_star: &Vector, theta_hat: &Vector, opts: &SolverOptions) -> Result<(f64, Vector)> {
    let theta = truth.theta_or_zero();
    if theta_hat.len() != theta.len() {
        return Err(Error::dimension("theta_hat", theta.len(), theta_hat.len()));
    }
    let shifted = truth.with_target_params(&(theta_hat * 2.0 - &theta))?;
    let x_shift = solve_original(&shifted, opts)?.require_optimal()?.x_opt;
    let loss = shifted.true_objective(&x_shift)? - shifted.true_objective(x_star)?;
    Ok((loss, (x_shift - x_star) * 2.0))
}

/// Trains with the configured method; dispatches to the matching loop.
pub fn train(task: &Task, cfg: &TrainConfig) -> Result<TrainOutcome> {
    match cfg.method {
        Method::Surrogate => train_surrogate(task, cfg),
        Method::SpoPlus => train_spo_plus(task, cfg),
        _ => train_two_stage(task, cfg),
    }
}

/// Decision-focused training through the smoothed penalty surrogate.
pub fn train_surrogate(task: &Task, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.method != Method::Surrogate {
        return Err(Error::validation("method", "train_surrogate needs method = surrogate"));
    }
    run(task, cfg)
}

/// Supervised training on L1, L2 or weighted-L1 prediction loss.
pub fn train_two_stage(task: &Task, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if !matches!(cfg.method, Method::TwoStageL1 | Method::TwoStageL2 | Method::WeightedL1) {
        return Err(Error::validation("method", "train_two_stage needs an L1/L2/weighted-L1 method"));
    }
    run(task, cfg)
}

pub fn train_spo_plus(task: &Task, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if cfg.method != Method::SpoPlus {
        return Err(Error::validation("method", "train_spo_plus needs method = spo_plus"));
    }
    run(task, cfg)
}

fn run(task: &Task, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate(&task.template)?;
    let mut sizes = vec![task.dataset.feature_dim()];
    sizes.extend(&cfg.hidden);
    sizes.push(task.template.target_len());
    let mut model = MlpModel::new(&sizes, cfg.seed)?;
    let mut opt = OptimizerState::new(cfg.optimizer, cfg.learning_rate, cfg.clip_norm, &model)?;
    let beta = match cfg.method {
        Method::Surrogate => task.beta(cfg.beta, cfg.seed)?,
        _ => 0.0,
    };
    let loss = LossFn {
        task,
        cfg,
        beta,
        opts: cfg.solver_options(),
    };
    let mut train_idx = task.dataset.indices(Split::Train);
    if train_idx.is_empty() && cfg.epochs > 0 {
        return Err(Error::validation("dataset", "no training samples"));
    }
    let mut rng = stream_rng(cfg.seed, STREAM_SHUFFLE);
    let mut history = Vec::new();
    let mut best: Option<(f64, usize, MlpModel)> = None;
    let mut since_best = 0;
    let mut singular_total = 0;
    let mut unstable_total = 0;
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        train_idx.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut used = 0usize;
        let mut singular = 0usize;
        for batch in train_idx.chunks(cfg.batch_size) {
            let mut acc = Gradients::zeros_for(&model);
            let mut ok = 0usize;
            for &i in batch {
                let (out, cache) = model.forward(&task.dataset.features[i])?;
                match loss.sample(i, &out)? {
                    SampleStep::Ok((l, g_out), unstable) => {
                        loss_sum += l;
                        ok += 1;
                        unstable_total += usize::from(unstable);
                        acc.add_assign(&model.backward(&cache, &g_out)?);
                    }
                    SampleStep::Singular => singular += 1,
                }
            }
            if ok > 0 {
                acc.scale(1.0 / ok as f64);
                opt.step(&mut model, &acc)?;
            }
            used += ok;
        }
        singular_total += singular;
        if singular as f64 > MAX_SINGULAR_FRACTION * train_idx.len() as f64 {
            return Err(Error::Solver(format!(
                "{singular} of {} training samples were singular in epoch {epoch}; K or beta is badly chosen",
                train_idx.len()
            )));
        }
        let valid = evaluate(&model, task, Split::Valid, cfg.solver_tol)?;
        let test = evaluate(&model, task, Split::Test, cfg.solver_tol)?;
        history.push(HistoryRow {
            epoch,
            train_obj: if used > 0 { loss_sum / used as f64 } else { 0.0 },
            valid_regret: valid.mean_regret,
            test_regret: test.mean_regret,
            mse: test.mean_mse,
        });
        // Ties count as improvements, so a plateau is not a degradation and
        // the latest of equally good epochs is kept.
        if best.as_ref().is_none_or(|(v, _, _)| valid.mean_regret <= *v) {
            best = Some((valid.mean_regret, epoch, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.early_stop_patience {
                stopped_early = true;
                break;
            }
        }
    }
    let (best_epoch, model) = match best {
        Some((_, e, m)) => (e, m),
        None => (0, model),
    };
    Ok(TrainOutcome {
        model,
        history,
        best_epoch,
        beta,
        singular_skipped: singular_total,
        unstable_samples: unstable_total,
        stopped_early,
    })
}

/// Trains one surrogate model per `K` and keeps the one with the lowest
/// best-epoch validation regret.
pub fn train_with_k_selection(task: &Task, cfg: &TrainConfig, ks: &[f64]) -> Result<(f64, TrainOutcome)> {
    let mut best: Option<(f64, f64, TrainOutcome)> = None;
    for &k in ks {
        let run_cfg = TrainConfig { k, ..cfg.clone() };
        let outcome = train(task, &run_cfg)?;
        let v = outcome.best_valid_regret().unwrap_or(f64::INFINITY);
        if best.as_ref().is_none_or(|(bv, _, _)| v < *bv) {
            best = Some((v, k, outcome));
        }
    }
    best.map(|(_, k, o)| (k, o)).ok_or_else(|| Error::validation("ks", "empty K grid"))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    /// One-tailed p-value for `mean(a − b) > 0`.
    pub p: f64,
    pub df: usize,
}

/// One-tailed paired t-test on the differences `a − b`.
pub fn paired_ttest(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() != b.len() {
        return Err(Error::dimension("paired samples", a.len(), b.len()));
    }
    if a.len() < 2 {
        return Err(Error::validation("samples", "need at least two pairs"));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean, sd) = mean_std(&d);
    if sd == 0.0 || !sd.is_finite() {
        return Err(Error::Degenerate("paired differences have zero variance".into()));
    }
    let r = d.len() as f64;
    let t = mean / (sd / r.sqrt());
    let df = d.len() - 1;
    let dist = StudentsT::new(0.0, 1.0, df as f64).map_err(|e| Error::validation("df", e.to_string()))?;
    Ok(TTest { t, p: 1.0 - dist.cdf(t), df })
}
