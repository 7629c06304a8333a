use rand::Rng;
use softpo_core::datagen::{gen_lp_problem, gen_prediction_dataset, gen_resource_provisioning, GenConfig, PredictionDataset, Split};
use softpo_core::linalg::stream_rng;
use softpo_core::predictor::{MlpModel, OptimizerKind};
use softpo_core::solver::{solve_original, SolverOptions};
use softpo_core::training::{
    evaluate, evaluate_with, paired_ttest, spo_plus_loss, surrogate_sample, train, BetaPolicy, Method, SurrogateSettings, Task,
    TrainConfig, UpstreamPoint,
};
use softpo_core::{Matrix, ObjectiveFamily, PredictionTarget, ProblemInstance, Vector};

fn v(x: &[f64]) -> Vector {
    Vector::from_row_slice(x)
}

/// max θx − max(x − 1, 0) subject to x ≤ 2: the decision is 0, 1 or 2 as θ
/// crosses 0 and 1.
fn step_template() -> ProblemInstance {
    ProblemInstance::linear_soft(v(&[0.0]))
        .with_inequalities(Matrix::from_element(1, 1, 1.0), v(&[2.0]))
        .with_soft(Matrix::from_element(1, 1, 1.0), v(&[1.0]), v(&[1.0]))
}

/// Labels equal the single feature, so θ is learnable exactly.
fn identifiable_task(samples: usize) -> Task {
    let mut rng = stream_rng(5, 0);
    let xi: Vec<Vector> = (0..samples).map(|_| v(&[rng.random_range(0.05..1.95)])).collect();
    let ds = PredictionDataset::new(xi.clone(), xi, softpo_core::datagen::default_split(samples)).unwrap();
    Task::new(ds, step_template(), 1e-8).unwrap()
}

fn small_lp_task(seed: u64) -> Task {
    let cfg = GenConfig {
        n: 5,
        m1: 5,
        m3: 3,
        samples: 80,
        seed,
        ..Default::default()
    };
    let ds = gen_prediction_dataset(&cfg, cfg.n).unwrap();
    Task::new(ds, gen_lp_problem(&cfg).unwrap(), 1e-8).unwrap()
}

fn quick(method: Method) -> TrainConfig {
    TrainConfig {
        method,
        epochs: 3,
        batch_size: 10,
        hidden: vec![16],
        ..Default::default()
    }
}

#[test]
fn zero_epochs_returns_initial_model() {
    let task = small_lp_task(1);
    let cfg = TrainConfig { epochs: 0, ..quick(Method::Surrogate) };
    let out = train(&task, &cfg).unwrap();
    assert!(out.history.is_empty());
    assert_eq!(out.best_epoch, 0);
    assert_eq!(out.model, MlpModel::new(&[8, 16, 5], cfg.seed).unwrap());
}

#[test]
fn identifiable_task_reaches_zero_regret() {
    let task = identifiable_task(400);
    let cfg = TrainConfig {
        epochs: 40,
        batch_size: 20,
        hidden: vec![16],
        optimizer: OptimizerKind::Adam,
        k: 5.0,
        ..Default::default()
    };
    let out = train(&task, &cfg).unwrap();
    let valid = out.best_valid_regret().unwrap();
    assert!(valid <= 1e-3, "validation regret {valid}");

    let zero = MlpModel::zeros(&[1, 16, 1]).unwrap();
    let oracle = evaluate_with(&task, Split::Test, 1e-8, |i| Ok(task.dataset.labels[i].clone())).unwrap();
    let constant = evaluate(&zero, &task, Split::Test, 1e-8).unwrap();
    assert!(oracle.mean_regret <= 2e-8);
    assert!(constant.mean_regret > oracle.mean_regret + 0.1);
}

#[test]
fn eval_report_is_self_consistent() {
    let task = small_lp_task(2);
    let model = MlpModel::new(&[8, 16, 5], 3).unwrap();
    let r = evaluate(&model, &task, Split::Test, 1e-8).unwrap();
    assert_eq!(r.regrets.len(), task.dataset.indices(Split::Test).len());
    let mean = r.regrets.iter().sum::<f64>() / r.regrets.len() as f64;
    assert!((r.mean_regret - mean).abs() <= 1e-12);
    assert!(r.regrets.iter().all(|x| *x >= -1e-9));
}

#[test]
fn best_checkpoint_is_restored() {
    let task = small_lp_task(3);
    let cfg = TrainConfig {
        epochs: 12,
        learning_rate: 0.05,
        ..quick(Method::Surrogate)
    };
    let out = train(&task, &cfg).unwrap();
    let min = out.history.iter().map(|h| h.valid_regret).fold(f64::INFINITY, f64::min);
    assert_eq!(out.best_valid_regret().unwrap(), min);
    assert_eq!(evaluate(&out.model, &task, Split::Valid, 1e-8).unwrap().mean_regret, min);
    if out.stopped_early {
        assert_eq!(out.history.len(), out.best_epoch + cfg.early_stop_patience);
        assert!(out.history[out.best_epoch..].iter().all(|h| h.valid_regret > min));
    }
}

#[test]
fn training_is_reproducible() {
    let task = small_lp_task(4);
    for method in [Method::Surrogate, Method::TwoStageL2, Method::SpoPlus] {
        let a = train(&task, &quick(method)).unwrap();
        let b = train(&task, &quick(method)).unwrap();
        assert_eq!(a.history, b.history, "{method}");
        let ja = serde_json::to_string(&a.model.to_checkpoint()).unwrap();
        let jb = serde_json::to_string(&b.model.to_checkpoint()).unwrap();
        assert_eq!(ja, jb, "{method}");
    }
}

/// Constant feature; training labels are 0.1 (60%) and 1.0 (40%), so the
/// L1 minimizer is the median 0.1 and the L2 minimizer the mean 0.46.
/// Validation labels sit where every prediction in (0, 1) has zero regret,
/// so early stopping does not interfere.
#[test]
fn l1_learns_median_and_l2_mean() {
    let n = 100;
    let features = vec![v(&[1.0]); n];
    let mut labels = Vec::new();
    let mut split = Vec::new();
    for i in 0..n {
        let train = i < 60;
        labels.push(v(&[if !train { 0.5 } else if i % 5 < 3 { 0.1 } else { 1.0 }]));
        split.push(if train { Split::Train } else if i < 80 { Split::Valid } else { Split::Test });
    }
    let task = Task::new(PredictionDataset::new(features, labels, split).unwrap(), step_template(), 1e-8).unwrap();
    let fit = |method| {
        let cfg = TrainConfig {
            method,
            epochs: 300,
            batch_size: 60,
            hidden: vec![],
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.01,
            early_stop_patience: 1000,
            ..Default::default()
        };
        train(&task, &cfg).unwrap().model.predict(&v(&[1.0])).unwrap()[0]
    };
    let l1 = fit(Method::TwoStageL1);
    let l2 = fit(Method::TwoStageL2);
    assert!((l1 - 0.1).abs() < 0.03, "L1 fit {l1}");
    assert!((l2 - 0.46).abs() < 0.03, "L2 fit {l2}");
}

#[test]
fn weighted_l1_with_equal_weights_is_l1() {
    let cfg = GenConfig {
        family: ObjectiveFamily::AsymmetricSoft,
        samples: 30,
        ratio_index: 2,
        ..Default::default()
    };
    let (template, ds) = gen_resource_provisioning(&cfg).unwrap();
    assert_eq!(template.alpha, *template.alpha2.as_ref().unwrap());
    let task = Task::new(ds, template, 1e-8).unwrap();
    let a = train(&task, &quick(Method::TwoStageL1)).unwrap();
    let b = train(&task, &quick(Method::WeightedL1)).unwrap();
    let scale = task.template.alpha[0];
    for (ha, hb) in a.history.iter().zip(&b.history) {
        assert!((ha.train_obj * scale - hb.train_obj).abs() <= 1e-12 * hb.train_obj.abs().max(1.0));
    }
}

#[test]
fn spo_plus_examples() {
    let opts = SolverOptions::default();
    // θ̂ = θ gives a zero subgradient.
    let task = small_lp_task(6);
    let g = spo_plus_loss(&task.truths[0], &task.optima[0], &task.dataset.labels[0], &opts).unwrap();
    assert_eq!(g.0, 0.0);
    assert_eq!(g.1.amax(), 0.0);

    // One dimension, x ∈ [0, 1]: θ = 1, θ̂ = −1 sends x*(2θ̂ − θ) = x*(−3) to 0.
    let p = ProblemInstance::linear_soft(v(&[1.0])).with_inequalities(Matrix::from_element(1, 1, 1.0), v(&[1.0]));
    let (loss, g) = spo_plus_loss(&p, &v(&[1.0]), &v(&[-1.0]), &opts).unwrap();
    assert_eq!(loss, 3.0);
    assert_eq!(g, v(&[-2.0]));

    // Positive scaling of θ leaves the argmax of a hard-only LP unchanged.
    let mut rng = stream_rng(7, 0);
    for _ in 0..20 {
        let n = 4;
        let a = Matrix::from_fn(4, n, |_, _| rng.random_range(0.1..1.0));
        let b = &a * Vector::from_element(n, 0.5);
        let theta = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let solve = |t: Vector| {
            let p = ProblemInstance::linear_soft(t).with_inequalities(a.clone(), b.clone());
            solve_original(&p, &opts).unwrap().x_opt
        };
        let base = solve(theta.clone());
        for k in [0.5, 3.0] {
            assert!((solve(&theta * k) - &base).amax() < 1e-9);
        }
    }
}

#[test]
fn spo_plus_rejects_other_families() {
    let cfg = GenConfig {
        family: ObjectiveFamily::AsymmetricSoft,
        samples: 10,
        ..Default::default()
    };
    let (template, ds) = gen_resource_provisioning(&cfg).unwrap();
    let task = Task::new(ds, template, 1e-8).unwrap();
    assert!(train(&task, &quick(Method::SpoPlus)).is_err());
}

fn fd_check(task: &Task, samples: &[usize], noise: f64, k: f64, seed: u64) -> (usize, f64) {
    let settings = SurrogateSettings {
        k,
        beta: 20.0,
        upstream: UpstreamPoint::SegmentOptimum,
        opts: SolverOptions::default(),
    };
    let mut rng = stream_rng(seed, 0);
    let mut checked = 0;
    let mut worst = 0.0_f64;
    let h = 1e-6;
    for &i in samples {
        let truth = &task.truths[i];
        let params = task.dataset.labels[i].map(|x| x + noise * rng.random_range(-1.0..1.0));
        let Some(s) = surrogate_sample(&task.template, truth, &params, &settings).unwrap() else {
            continue;
        };
        if s.unstable || !s.on_segment {
            continue;
        }
        let value = |p: &Vector| surrogate_sample(&task.template, truth, p, &settings).unwrap().map(|s| s.value);
        let mut fd = Vector::zeros(params.len());
        let mut ok = true;
        for j in 0..params.len() {
            let mut up = params.clone();
            up[j] += h;
            let mut dn = params.clone();
            dn[j] -= h;
            match (value(&up), value(&dn)) {
                (Some(a), Some(b)) => fd[j] = (a - b) / (2.0 * h),
                _ => ok = false,
            }
        }
        if ok {
            checked += 1;
            worst = worst.max((&fd - &s.grad).norm() / fd.norm().max(s.grad.norm()).max(1e-12));
        }
    }
    (checked, worst)
}

#[test]
fn end_to_end_gradient_matches_finite_differences() {
    let task = small_lp_task(8);
    let (checked, worst) = fd_check(&task, &(0..20).collect::<Vec<_>>(), 0.2, 5.0, 1);
    assert!(checked >= 15, "only {checked} stable samples");
    assert!(worst <= 1e-3, "theta target: {worst}");

    let cfg = GenConfig {
        family: ObjectiveFamily::AsymmetricSoft,
        samples: 10,
        ..Default::default()
    };
    let (template, ds) = gen_resource_provisioning(&cfg).unwrap();
    assert_eq!(template.target, PredictionTarget::C);
    let task = Task::new(ds, template, 1e-8).unwrap();
    let (checked, worst) = fd_check(&task, &(0..10).collect::<Vec<_>>(), 0.01, 0.2, 2);
    assert!(checked >= 5, "only {checked} stable samples");
    assert!(worst <= 1e-3, "C target: {worst}");
}

#[test]
fn ttest_is_permutation_invariant() {
    let a = [1.3, 2.2, 0.7, 1.9, 1.1];
    let b = [1.0, 2.0, 0.9, 1.2, 0.4];
    let t = paired_ttest(&a, &b).unwrap();
    let order = [3, 0, 4, 2, 1];
    let ap: Vec<f64> = order.iter().map(|&i| a[i]).collect();
    let bp: Vec<f64> = order.iter().map(|&i| b[i]).collect();
    assert!((paired_ttest(&ap, &bp).unwrap().t - t.t).abs() < 1e-12);
}

#[test]
fn theorem_beta_policy_trains() {
    let task = small_lp_task(9);
    let cfg = TrainConfig {
        beta: BetaPolicy::Theorem { scale: 1.0 },
        epochs: 1,
        ..quick(Method::Surrogate)
    };
    let out = train(&task, &cfg).unwrap();
    assert!(out.beta > 0.0 && out.history.len() == 1);
}
