use std::path::Path;
use std::process::{Command, Output};

const LP: &str = r#"
[data]
family = "LinearSoft"
n = 6
m1 = 6
m3 = 3
samples = 40

[train]
epochs = 0
hidden = [8]

[run]
name = "lp"
seeds = [0]
"#;

fn softpo(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_softpo"))
        .args(args)
        .env("SOFTPO_OUTPUT_ROOT", root)
        .output()
        .expect("run softpo")
}

fn ok(out: &Output) -> String {
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(out.status.success(), "stdout:\n{stdout}\nstderr:\n{}", String::from_utf8_lossy(&out.stderr));
    stdout
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(Result::unwrap).collect()
}

#[test]
fn datagen_writes_three_files_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), LP);
    ok(&softpo(dir.path(), &["datagen", "--config", s(&cfg)]));
    let data = dir.path().join("lp/data");
    for f in ["problem.json", "dataset.csv", "manifest.json"] {
        assert!(data.join(f).is_file(), "{f} missing");
    }
    let problem: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(data.join("problem.json")).unwrap()).unwrap();
    assert_eq!(problem["objective_family"], "LinearSoft");
    assert_eq!(problem["n"], 6);
    let rows = csv_rows(&data.join("dataset.csv"));
    assert_eq!(rows.len(), 40);

    let again = dir.path().join("again");
    ok(&softpo(dir.path(), &["datagen", "--config", s(&cfg), "--out", s(&again)]));
    for f in ["problem.json", "dataset.csv"] {
        assert_eq!(std::fs::read(data.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn invalid_family_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[data]\nfamily = \"Cubic\"\n");
    let out = softpo(dir.path(), &["datagen", "--config", s(&cfg)]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("family"), "{err}");
}

#[test]
fn zero_epochs_aggregate_matches_untrained_eval() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), LP);
    ok(&softpo(dir.path(), &["datagen", "--config", s(&cfg)]));
    let with_data = LP.replace("seeds = [0]", "seeds = [0]\ndata_dir = \"lp/data\"");
    let cfg = write_config(dir.path(), &with_data);
    ok(&softpo(dir.path(), &["train", "--config", s(&cfg)]));

    let run = dir.path().join("lp");
    let agg = csv_rows(&run.join("aggregate.csv"));
    assert_eq!(agg.len(), 1);
    assert_eq!(&agg[0][0], "surrogate");
    let mean: f64 = agg[0][3].parse().unwrap();

    let out = dir.path().join("eval");
    ok(&softpo(
        dir.path(),
        &[
            "eval",
            "--problem",
            s(&run.join("data/problem.json")),
            "--dataset",
            s(&run.join("data/dataset.csv")),
            "--model",
            s(&run.join("surrogate/seed_0/model.json")),
            "--out",
            s(&out),
        ],
    ));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("eval.json")).unwrap()).unwrap();
    assert_eq!(report["mean_regret"].as_f64().unwrap(), mean);

    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|o| o["path"].as_str().unwrap()).collect();
    for f in ["runs.csv", "aggregate.csv", "surrogate/seed_0/model.json", "surrogate/seed_0/history.csv"] {
        assert!(listed.contains(&f), "{f} not in manifest");
        assert!(run.join(f).is_file());
    }
}

#[test]
fn method_grid_gives_one_aggregate_row_per_method() {
    let dir = tempfile::tempdir().unwrap();
    let body = LP.replace("epochs = 0", "epochs = 2");
    let cfg = write_config(dir.path(), &body);
    let out = ok(&softpo(
        dir.path(),
        &[
            "train", "--config", s(&cfg), "--seed", "0..3", "--method", "two_stage_l1", "--method", "two_stage_l2", "--method",
            "surrogate", "--jobs", "2",
        ],
    ));
    assert!(out.contains("±"));
    let run = dir.path().join("lp");
    let agg = csv_rows(&run.join("aggregate.csv"));
    let methods: Vec<&str> = agg.iter().map(|r| r.get(0).unwrap()).collect();
    assert_eq!(methods, ["two_stage_l1", "two_stage_l2", "surrogate"]);
    assert!(agg.iter().all(|r| &r[1] == "3" && &r[2] == "0"));
    assert_eq!(csv_rows(&run.join("runs.csv")).len(), 9);

    let rep = dir.path().join("report");
    ok(&softpo(dir.path(), &["report", s(&run), "--out", s(&rep)]));
    let tests = csv_rows(&rep.join("ttest.csv"));
    assert_eq!(tests.len(), 2);
    assert!(tests.iter().all(|r| &r[1] == "surrogate"));
}

#[test]
fn failing_seed_is_isolated_and_exit_is_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    // SPO+ needs a θ target on LinearSoft, so every portfolio SPO+ run fails
    // validation while the L2 runs go through.
    let body = r#"
[data]
family = "QuadraticSoft"
n = 5
samples = 40

[train]
epochs = 1
hidden = [8]

[run]
name = "mixed"
seeds = [0, 1]
methods = ["two_stage_l2", "spo_plus"]
"#;
    let cfg = write_config(dir.path(), body);
    let out = softpo(dir.path(), &["train", "--config", s(&cfg)]);
    assert!(!out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("failed"), "{stdout}");
    let rows = csv_rows(&dir.path().join("mixed/runs.csv"));
    let status: Vec<(&str, &str)> = rows.iter().map(|r| (r.get(0).unwrap(), r.get(2).unwrap())).collect();
    assert_eq!(
        status,
        [("two_stage_l2", "ok"), ("spo_plus", "failed"), ("two_stage_l2", "ok"), ("spo_plus", "failed")]
    );
}

fn runs_csv(path: &Path, rows: &[(&str, u64, f64)]) {
    let mut text = String::from("method,seed,status,K,beta,best_epoch,epochs_run,valid_regret,test_regret,test_regret_std,mse,solver_failures\n");
    for (m, seed, r) in rows {
        text += &format!("{m},{seed},ok,,,1,1,{r},{r},0.0,0.5,0\n");
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn report_t_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    runs_csv(&a, &[("surrogate", 0, 0.0), ("surrogate", 1, 0.0), ("surrogate", 2, 0.0)]);
    runs_csv(&b, &[("two_stage_l2", 0, 1.0), ("two_stage_l2", 1, 2.0), ("two_stage_l2", 2, 3.0)]);
    let out = dir.path().join("rep");
    ok(&softpo(dir.path(), &["report", s(&a), s(&b), "--out", s(&out)]));
    let rows = csv_rows(&out.join("ttest.csv"));
    let t: f64 = rows[0][4].parse().unwrap();
    assert!((t - 2.0 * 3f64.sqrt()).abs() < 1e-9);
    assert_eq!(&rows[0][7], "false");

    // Constant differences (1, 1, 1) have zero variance.
    runs_csv(&b, &[("two_stage_l2", 0, 1.0), ("two_stage_l2", 1, 1.0), ("two_stage_l2", 2, 1.0)]);
    ok(&softpo(dir.path(), &["report", s(&a), s(&b), "--out", s(&out)]));
    let rows = csv_rows(&out.join("ttest.csv"));
    assert_eq!(&rows[0][7], "true");
    assert_eq!(&rows[0][4], "");
}

#[test]
fn report_rejects_mismatched_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    runs_csv(&a, &[("surrogate", 0, 0.1), ("surrogate", 1, 0.2)]);
    runs_csv(&b, &[("two_stage_l2", 0, 0.3), ("two_stage_l2", 2, 0.4)]);
    let out = softpo(dir.path(), &["report", s(&a), s(&b)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed sets differ"));
}

#[test]
fn bounds_and_lambda_study_write_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), LP);
    ok(&softpo(dir.path(), &["datagen", "--config", s(&cfg)]));
    let data = dir.path().join("lp/data");
    let out = dir.path().join("bounds");
    ok(&softpo(
        dir.path(),
        &["bounds", "--problem", s(&data.join("problem.json")), "--dataset", s(&data.join("dataset.csv")), "--out", s(&out)],
    ));
    let rows = csv_rows(&out.join("bounds.csv"));
    let names: Vec<&str> = rows.iter().map(|r| r.get(0).unwrap()).collect();
    assert!(names.contains(&"theorem_beta") && names.contains(&"empirical_beta"));

    let out = dir.path().join("lambda");
    ok(&softpo(
        dir.path(),
        &["lambda-study", "--n-min", "4", "--n-max", "12", "--n-step", "4", "--trials", "20", "--out", s(&out)],
    ));
    let mut r = csv::Reader::from_path(out.join("lambda.csv")).unwrap();
    assert_eq!(
        r.headers().unwrap().iter().collect::<Vec<_>>(),
        ["n", "distribution", "trials", "mean_lambda", "max_lambda"]
    );
    assert_eq!(r.records().count(), 3);
    assert_eq!(csv_rows(&out.join("lambda_fit.csv")).len(), 2);
}
