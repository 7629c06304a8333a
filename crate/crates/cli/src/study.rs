use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use softpo_core::penalty::{
    bound_binary, bound_general, bound_inequality_only, bound_with_nonneg, default_gradient_bound, empirical_beta,
    estimate_lambda_max, fit_lambda_curve, instance_lambda_max, loglog_slope, min_hyperplane_angle, theorem_beta,
    RowDistribution, SamplingProtocol,
};
use softpo_core::training::Task;

use crate::io::{create_dir, print_table, read_dataset, read_problem};
use crate::manifest::RunManifest;
use crate::train::write_csv;

#[derive(Debug, Clone, Serialize)]
struct BoundRow {
    quantity: &'static str,
    value: f64,
}

pub struct BoundsArgs<'a> {
    pub problem: &'a Path,
    pub dataset: Option<&'a Path>,
    pub k: f64,
    pub scale: f64,
    pub seed: u64,
}

/// Penalty-multiplier bounds for one problem file. `E` comes from the
/// training split when a dataset is given, else from the file's own θ.
pub fn cmd_bounds(args: &BoundsArgs<'_>, out: Option<&Path>) -> anyhow::Result<()> {
    let start = Instant::now();
    let problem = read_problem(args.problem)?;
    let e = match args.dataset {
        Some(path) => Task::new(read_dataset(path)?, problem.clone(), 1e-8)?.gradient_bound(),
        None => default_gradient_bound(&problem),
    };
    let n = problem.n;
    let mut rows = vec![BoundRow { quantity: "E", value: e }];
    let mut push = |quantity, v: softpo_core::Result<f64>| {
        if let Ok(value) = v {
            rows.push(BoundRow { quantity, value });
        }
    };
    if problem.m1() + problem.m2() == 0 {
        push("bound_inequality_only", bound_inequality_only(e, args.scale));
    }
    if let Ok(sin_p) = min_hyperplane_angle(&problem.ineq_matrix, &problem.eq_matrix) {
        push("sin_p", Ok(sin_p));
        if sin_p > 0.0 {
            push("bound_with_nonneg", bound_with_nonneg(e, n, sin_p, args.scale));
        }
    }
    let binary = |m: &softpo_core::Matrix| m.iter().all(|v| *v == 0.0 || *v == 1.0);
    if binary(&problem.ineq_matrix) && binary(&problem.eq_matrix) {
        push("bound_binary", bound_binary(e, n, args.scale));
    }
    if problem.m1() + problem.m2() > 0 {
        if let Ok(lambda) = instance_lambda_max(&problem, 200, args.seed) {
            push("lambda_max", Ok(lambda));
            push("bound_general", bound_general(e, n, lambda, args.scale));
        }
    }
    push("theorem_beta", theorem_beta(&problem, e, args.scale, args.seed));
    push("empirical_beta", empirical_beta(&problem, e, args.k, 0));

    print_table(
        &["quantity", "value"],
        &rows.iter().map(|r| vec![r.quantity.to_string(), format!("{:.3e}", r.value)]).collect::<Vec<_>>(),
    );
    if let Some(dir) = out {
        create_dir(dir)?;
        write_csv(&dir.join("bounds.csv"), &rows)?;
        let snapshot = serde_json::json!({
            "problem": args.problem,
            "dataset": args.dataset,
            "k": args.k,
            "scale": args.scale,
            "seed": args.seed,
        });
        let mut manifest = RunManifest::new("bounds", snapshot, vec![args.seed])?;
        manifest.output("bounds.csv", None, None);
        manifest.time("total", start);
        manifest.write(dir)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaRow {
    pub n: usize,
    pub distribution: String,
    pub trials: usize,
    pub mean_lambda: f64,
    pub max_lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitRow {
    pub distribution: String,
    pub statistic: &'static str,
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
    pub r_squared: f64,
    pub loglog_slope: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LambdaArgs {
    pub ns: Vec<usize>,
    pub distributions: Vec<RowDistribution>,
    pub trials: usize,
    pub protocol: SamplingProtocol,
    pub seed: u64,
}

/// Top-eigenvalue study over `ns`, with a quadratic fit and log-log slope of
/// both the per-`n` mean and maximum.
pub fn cmd_lambda_study(args: &LambdaArgs, out: Option<&Path>) -> anyhow::Result<(Vec<LambdaRow>, Vec<FitRow>)> {
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    for &dist in &args.distributions {
        let mut means = Vec::new();
        let mut maxes = Vec::new();
        for &n in &args.ns {
            let stats = estimate_lambda_max(n, dist, args.trials, args.seed, args.protocol)?;
            means.push((n as f64, stats.mean));
            maxes.push((n as f64, stats.max));
            rows.push(LambdaRow {
                n,
                distribution: dist.to_string(),
                trials: args.trials,
                mean_lambda: stats.mean,
                max_lambda: stats.max,
            });
        }
        for (statistic, samples) in [("mean", &means), ("max", &maxes)] {
            let fit = fit_lambda_curve(samples)?;
            fits.push(FitRow {
                distribution: dist.to_string(),
                statistic,
                a2: fit.a2,
                a1: fit.a1,
                a0: fit.a0,
                r_squared: fit.r_squared,
                loglog_slope: loglog_slope(samples)?,
            });
        }
    }
    print_table(
        &["distribution", "statistic", "fit", "R²", "log-log slope"],
        &fits
            .iter()
            .map(|f| {
                vec![
                    f.distribution.clone(),
                    f.statistic.to_string(),
                    format!("{:.4}n² {:+.3}n {:+.3}", f.a2, f.a1, f.a0),
                    format!("{:.3}", f.r_squared),
                    format!("{:.3}", f.loglog_slope),
                ]
            })
            .collect::<Vec<_>>(),
    );
    if let Some(dir) = out {
        create_dir(dir)?;
        write_csv(&dir.join("lambda.csv"), &rows)?;
        write_csv(&dir.join("lambda_fit.csv"), &fits)?;
        let mut manifest = RunManifest::new("lambda-study", args, vec![args.seed])?;
        manifest.output("lambda.csv", None, None);
        manifest.output("lambda_fit.csv", None, None);
        manifest.time("total", start);
        manifest.write(dir)?;
    }
    Ok((rows, fits))
}
