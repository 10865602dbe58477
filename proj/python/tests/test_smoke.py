import math

import numpy as np
import pytest

import tightbound as tb


def test_dataset_round_trip():
    x = np.array([[0.0, 1.0], [2.0, -1.0], [0.5, 0.0]])
    ds = tb.Dataset.from_arrays(x, [0, 1, 1])
    assert len(ds) == 3
    assert ds.n_classes == 2
    assert np.array_equal(ds.features(), x)
    again = tb.parse_libsvm(ds.to_libsvm())
    assert again.labels == ds.labels


def test_bound_is_below_probability_and_tight():
    assert tb.bound_prob(0.3, 0.3) == pytest.approx(0.3, abs=1e-15)
    for p, q in [(0.2, 0.9), (0.9, 0.2), (0.5, 0.01)]:
        assert tb.bound_prob(p, q) <= p


def test_zero_model_meets_global_bound():
    ds = tb.make_synthetic("underfit2d", 200, seed=1)
    zero = tb.ModelParams(ds.n_classes, ds.n_features)
    assert tb.expected_error(zero, ds) == pytest.approx(tb.global_log_bound(zero, ds), abs=1e-12)
    probs = tb.predict_proba(zero, ds)
    assert probs.shape == (200, 2)
    assert np.allclose(probs, 0.5)


def test_training_reduces_error_and_is_deterministic():
    ds = tb.make_synthetic("underfit2d", 2000, seed=3)
    train, valid = tb.split_holdout(ds, 0.2)
    config = tb.TrainConfig(T=5, Z=500, lam=1e-4, seed=2)
    a = tb.train_iterative(train, valid, config)
    b = tb.train_iterative(train, valid, config)
    assert a.params == b.params
    assert a.total_updates == 2500
    assert [m.outer_t for m in a.per_outer_metrics] == [1, 2, 3, 4, 5]
    assert tb.classification_error(a.params, valid) < 0.35
    text = a.params.to_text()
    assert tb.ModelParams.from_text(text) == a.params


def test_decision_extensions():
    sep = tb.make_synthetic("separable", 1000, seed=4)
    _, p_reject = tb.train_undecided(sep, 0.8, tb.TrainConfig(T=30, Z=500, lam=1e-6))
    assert p_reject < 0.05

    bach = tb.make_synthetic("bach_style", 2000, seed=5)
    train, test = tb.split_holdout(bach, 0.5, shuffle=True, seed=1)
    params, dual, fpr = tb.train_constrained_fpr(train, 0.1, tb.TrainConfig(T=20, Z=500, lam=1e-4), dual_step=1.0)
    assert dual >= 0.0
    assert math.isfinite(fpr)
    assert 0.0 <= tb.confusion_binary(params, test)["fpr"] <= 1.0

    curve = tb.roc_sweep(train, test, [0.25, 0.5, 0.75], tb.TrainConfig(T=3, Z=300, lam=1e-4))
    assert curve[0] == (0.0, 0.0) and curve[-1] == (1.0, 1.0)
    assert tb.upper_hull_deviation([(0, 0), (0.5, 0.8), (1, 1)]) == 0.0


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        tb.TrainConfig(batch=0)
    with pytest.raises(ValueError):
        tb.parse_libsvm("1 2:x\n")
    with pytest.raises(ValueError):
        tb.make_synthetic("nope", 10)


def test_cli_in_process(tmp_path):
    if not hasattr(tb, "run_cli"):
        pytest.skip("built without the command-line tool")
    code, out, _ = tb.run_cli(["train", "--data", "synthetic:separable:300", "--T", "2", "--Z", "100",
                               "--out", str(tmp_path)])
    assert code == 0
    assert (tmp_path / "manifest").exists()
    assert tb.run_cli(["train", "--out", str(tmp_path)])[0] == 1
