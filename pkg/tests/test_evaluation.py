import warnings

import numpy as np
import pytest
from scipy.optimize import minimize

from sdgnn.evaluation import (
    MetricsReport,
    auc_score,
    compute_metrics,
    edge_features,
    fit_logistic_regression,
    format_report,
    predict_proba,
    run_experiment,
    write_report_csv,
)
from sdgnn.model import ModelConfig
from sdgnn.synthetic import synthetic_signed_digraph
from sdgnn.trainer import TrainConfig


def test_edge_features():
    np.testing.assert_array_equal(edge_features([1, 2], [3, 4]), [1, 2, 3, 4])
    assert not np.array_equal(edge_features([1, 2], [3, 4]), edge_features([3, 4], [1, 2]))
    assert edge_features(np.ones((5, 3)), np.zeros((5, 3))).shape == (5, 6)


def test_lr_separable():
    X, y = np.array([[-1.0], [1.0]]), np.array([0, 1])
    w, b = fit_logistic_regression(X, y)
    assert np.array_equal(predict_proba(X, w, b) >= 0.5, [False, True])


def test_lr_single_class():
    X = np.random.default_rng(0).normal(size=(20, 3))
    w, b = fit_logistic_regression(X, np.ones(20))
    assert np.all(predict_proba(X, w, b) > 0.5)


def _objective(theta, X, y, reg):
    w, b = theta[:-1], theta[-1]
    t = X @ w + b
    return np.mean(np.logaddexp(0, t) - y * t) + 0.5 * reg / len(y) * w @ w


@pytest.mark.parametrize("seed", range(3))
def test_lr_matches_independent_solver(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(50, 4))
    y = (X @ rng.normal(size=4) + rng.normal(size=50) > 0).astype(float)
    w, b = fit_logistic_regression(X, y, reg=1.0)
    ref = minimize(_objective, rng.normal(size=5), args=(X, y, 1.0), method="L-BFGS-B",
                   options={"ftol": 1e-15, "gtol": 1e-10, "maxiter": 10000})
    ours = _objective(np.append(w, b), X, y, 1.0)
    assert abs(ours - ref.fun) < 1e-6
    assert ours <= ref.fun + 1e-12


def test_lr_matches_sklearn():
    sklearn = pytest.importorskip("sklearn.linear_model")
    rng = np.random.default_rng(4)
    X = rng.normal(size=(200, 6))
    y = (X[:, 0] - X[:, 2] + 0.5 * rng.normal(size=200) > 0).astype(float)
    for reg in (0.1, 1.0, 10.0):
        w, b = fit_logistic_regression(X, y, reg=reg)
        clf = sklearn.LogisticRegression(C=1.0 / reg, tol=1e-12, max_iter=10000).fit(X, y)
        np.testing.assert_allclose(w, clf.coef_[0], atol=1e-5)
        assert b == pytest.approx(clf.intercept_[0], abs=1e-5)


def test_lr_rejects_non_finite():
    with pytest.raises(ValueError):
        fit_logistic_regression(np.array([[np.nan]]), np.array([1]))


def test_metrics_perfect():
    r = compute_metrics([0.9, 0.1, 0.8, 0.3], [1, 0, 1, 0])
    assert r.values() == {"micro_f1": 1.0, "binary_f1": 1.0, "macro_f1": 1.0, "auc": 1.0}


def test_constant_positive_on_alpha_balance():
    labels = np.r_[np.ones(22650), np.zeros(1536)]
    r = compute_metrics(np.full(len(labels), 0.9), labels)
    assert r.micro_f1 == pytest.approx(0.9365, abs=5e-4)
    assert r.binary_f1 == pytest.approx(0.9672, abs=5e-4)
    assert r.macro_f1 == r.binary_f1 / 2
    assert r.auc == 0.5


def test_metrics_match_sklearn():
    skm = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(1)
    labels = rng.random(300) < 0.7
    scores = np.clip(labels * 0.3 + rng.random(300) * 0.7, 0, 1)
    scores[:20] = 0.5  # ties, exactly on the threshold
    r = compute_metrics(scores, labels)
    pred = scores >= 0.5
    assert r.micro_f1 == pytest.approx(skm.f1_score(labels, pred, average="micro"))
    assert r.binary_f1 == pytest.approx(skm.f1_score(labels, pred))
    assert r.macro_f1 == pytest.approx(skm.f1_score(labels, pred, average="macro"))
    assert r.auc == pytest.approx(skm.roc_auc_score(labels, scores), abs=1e-12)


def test_auc_invariant_to_monotone_transform():
    rng = np.random.default_rng(2)
    s, y = rng.random(100), rng.random(100) < 0.5
    assert auc_score(s, y) == pytest.approx(auc_score(np.exp(5 * s) - 3, y), abs=1e-15)


def test_auc_single_class_nan():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        assert np.isnan(auc_score([0.2, 0.4], [1, 1]))
    assert any("single class" in str(w.message) for w in caught)


def test_run_experiment_reproducible_and_csv(tmp_path):
    g = synthetic_signed_digraph(nodes=60, edges=300, seed=1)
    cfg = TrainConfig(epochs=2, batch_size=30, model=ModelConfig(dim=4))
    a = run_experiment(g, cfg, runs=2, seed=7)
    b = run_experiment(g, cfg, runs=2, seed=7)
    assert a.values() == b.values() and a.run_count == 2
    path = tmp_path / "m.csv"
    write_report_csv(a, path, seed=7)
    lines = path.read_text().splitlines()
    assert lines[0] == "run,micro_f1,binary_f1,macro_f1,auc"
    assert lines[1].startswith("7,") and lines[-1].startswith("mean,")
    assert "mean" in format_report(a, seed=7)


def test_run_experiment_random_baseline():
    g = synthetic_signed_digraph(nodes=60, edges=300, seed=2)
    r = run_experiment(g, TrainConfig(model=ModelConfig(dim=4)), runs=2, embedding="random")
    assert isinstance(r, MetricsReport) and 0 <= r.auc <= 1
    with pytest.raises(ValueError):
        run_experiment(g, TrainConfig(), embedding="spectral")


def test_trained_embeddings_beat_chance_on_planted_signal():
    g = synthetic_signed_digraph(nodes=150, edges=1500, seed=0)
    cfg = TrainConfig(epochs=30, batch_size=50, lr=0.01, model=ModelConfig(dim=8))
    r = run_experiment(g, cfg, runs=1)
    assert r.auc > 0.6
