"""Smoke test for the compiled extension.

Build and run from the repository root:

    cargo build --release -p softpo-py
    cp target/release/libsoftpo.so crates/py/python/softpo.so
    python3 crates/py/python/smoke_test.py
"""

import json
import math
import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import softpo  # noqa: E402


def main():
    assert abs(softpo.s_value(0.0, 1.0) - 1.0 / 16.0) < 1e-15
    assert softpo.s_value(-1.0, 1.0) == 0.0
    assert softpo.s_value(2.0, 1.0) == 2.0
    assert softpo.s_grad(0.0, 1.0) == 0.5

    t, p, df = softpo.paired_ttest([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
    assert abs(t - 2.0 * math.sqrt(3.0)) < 1e-9 and df == 2 and 0.0 < p < 0.05
    try:
        softpo.paired_ttest([1.0, 2.0], [1.0, 2.0])
    except ValueError:
        pass
    else:
        raise AssertionError("degenerate t-test not flagged")

    cfg = {"family": "LinearSoft", "n": 6, "m1": 6, "m3": 3, "samples": 40, "seed": 1}
    problem, data = softpo.generate(json.dumps(cfg))
    assert problem.n == 6 and problem.family == "LinearSoft" and len(data) == 40
    assert sorted(set(data.split)) == ["test", "train", "valid"]

    truth = problem.with_target_params(data.labels[0])
    x, obj, status = truth.solve()
    assert status == "Optimal", status
    assert truth.feasibility_violation(x) < 1e-7
    assert abs(truth.true_objective(x) - obj) < 1e-9
    assert truth.regret(x, x) == 0.0

    xs, _, status = truth.solve_surrogate(truth.empirical_beta(), 5.0)
    assert status == "Optimal", status
    assert len(xs) == 6

    oracle = softpo.evaluate(problem, data)
    assert oracle["mean_regret"] <= 2e-8, oracle

    model, history = softpo.train(problem, data, json.dumps({"epochs": 2, "hidden": [8], "K": 5.0}))
    assert [h["epoch"] for h in history] == [1, 2]
    assert model.input_dim == 8 and model.output_dim == 6
    report = softpo.evaluate(problem, data, model)
    assert math.isfinite(report["mean_regret"]) and report["mean_regret"] >= 0.0
    assert len(model.predict(data.features[0])) == 6

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "model.json")
        model.save(path)
        again = softpo.Model.load(path)
        assert again.predict(data.features[3]) == model.predict(data.features[3])
        csv_path = os.path.join(tmp, "data.csv")
        data.write_csv(csv_path)
        loaded = softpo.Dataset.load_csv(csv_path)
        assert loaded.labels == data.labels and loaded.split == data.split

    round_trip = softpo.Problem.from_json(problem.to_json())
    assert round_trip.to_json() == problem.to_json()

    mean, top = softpo.lambda_max(10, 20, seed=0)
    assert 1.0 <= mean <= top <= 10.0 + 1e-9

    print("python smoke test passed")


if __name__ == "__main__":
    main()
