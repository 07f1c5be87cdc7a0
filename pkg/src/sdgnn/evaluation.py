"""Link sign prediction from node embeddings."""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import rankdata

from sdgnn.graph import SignedDigraph, split_edges
from sdgnn.trainer import TrainConfig, train

log = logging.getLogger(__name__)

METRICS = ("micro_f1", "binary_f1", "macro_f1", "auc")


def edge_features(z_i, z_j):
    """``[z_i || z_j]``; works on single vectors or row-aligned matrices."""
    return np.concatenate([np.asarray(z_i), np.asarray(z_j)], axis=-1)


def _log_loss(X, y, w, b, reg):
    t = X @ w + b
    # mean of log(1 + e^t) - y t, written to stay finite for large |t|
    return np.mean(np.logaddexp(0.0, t) - y * t) + 0.5 * reg / len(y) * (w @ w)


def fit_logistic_regression(X, y, reg=1.0, tol=1e-8, max_iter=5000):
    """L2-regularised logistic regression; returns ``(weights, bias)``.

    Minimises ``mean BCE + reg / (2 n) * ||w||^2`` (the bias is not
    penalised), which is the scaling of the usual ``C = 1 / reg`` form.
    Damped Newton steps with Armijo backtracking run until the gradient norm
    drops below ``tol``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y) or len(y) == 0:
        raise ValueError("need a non-empty (n, p) feature matrix and n labels")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain NaN or Inf")
    n, p = X.shape
    A = np.hstack([X, np.ones((n, 1))])
    theta = np.zeros(p + 1)
    penalty = np.full(p + 1, reg / n)
    penalty[-1] = 0.0

    def objective(th):
        return _log_loss(X, y, th[:-1], th[-1], reg)

    f = objective(theta)
    for _ in range(max_iter):
        t = A @ theta
        prob = 0.5 * (1.0 + np.tanh(0.5 * t))
        grad = A.T @ (prob - y) / n + penalty * theta
        if np.linalg.norm(grad) < tol:
            break
        curv = prob * (1.0 - prob)
        H = (A * curv[:, None]).T @ A / n + np.diag(penalty) + 1e-12 * np.eye(p + 1)
        try:
            step = -np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            step = -grad
        slope = grad @ step
        if slope >= 0:  # not a descent direction; fall back to the gradient
            step, slope = -grad, -(grad @ grad)
        alpha = 1.0
        while True:
            cand = theta + alpha * step
            fc = objective(cand)
            if fc <= f + 1e-4 * alpha * slope or alpha < 1e-12:
                break
            alpha *= 0.5
        if fc > f:
            break
        theta, f = cand, fc
    return theta[:-1], float(theta[-1])


def predict_proba(X, weights, bias):
    t = np.asarray(X) @ weights + bias
    return 0.5 * (1.0 + np.tanh(0.5 * t))


def _f1(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return 0.0 if denom == 0 else 2.0 * tp / denom


@dataclass
class MetricsReport:
    micro_f1: float
    binary_f1: float
    macro_f1: float
    auc: float
    run_count: int = 1
    runs: list = field(default_factory=list)

    def values(self):
        return {k: getattr(self, k) for k in METRICS}


def auc_score(scores, labels):
    """Probability a positive outscores a negative, ties counted half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    n_pos = labels.sum()
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        warnings.warn("AUC is undefined with a single class", RuntimeWarning, stacklevel=2)
        return float("nan")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def compute_metrics(scores, labels, threshold=0.5) -> MetricsReport:
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if len(scores) == 0 or len(scores) != len(labels):
        raise ValueError("need equally long, non-empty scores and labels")
    pred = scores >= threshold
    tp = int(np.sum(pred & labels))
    tn = int(np.sum(~pred & ~labels))
    fp = int(np.sum(pred & ~labels))
    fn = int(np.sum(~pred & labels))
    f1_pos = _f1(tp, fp, fn)
    f1_neg = _f1(tn, fn, fp)
    report = MetricsReport(
        micro_f1=(tp + tn) / len(labels),
        binary_f1=f1_pos,
        macro_f1=0.5 * (f1_pos + f1_neg),
        auc=auc_score(scores, labels),
    )
    report.runs = [report.values()]
    return report


def average_reports(reports) -> MetricsReport:
    runs = [r.values() for r in reports]
    means = {k: float(np.mean([r[k] for r in runs])) for k in METRICS}
    return MetricsReport(**means, run_count=len(runs), runs=runs)


def random_embeddings(node_count, dim, seed):
    """Uniform [0, 1) vectors, the sanity baseline."""
    return np.random.default_rng(seed).random((node_count, dim))


def score_split(g: SignedDigraph, Z, train_idx, test_idx, reg=1.0) -> MetricsReport:
    """Fit the classifier on training edges, evaluate on test edges."""
    y = (g.sign > 0).astype(np.float64)
    X_train = edge_features(Z[g.src[train_idx]], Z[g.dst[train_idx]])
    X_test = edge_features(Z[g.src[test_idx]], Z[g.dst[test_idx]])
    w, b = fit_logistic_regression(X_train, y[train_idx], reg=reg)
    return compute_metrics(predict_proba(X_test, w, b), y[test_idx])


def run_experiment(g: SignedDigraph, config: TrainConfig, runs=5, seed=0,
                   embedding="sdgnn", ratio=0.8, reg=1.0, progress=None) -> MetricsReport:
    """Average link-sign metrics over ``runs`` seeded splits.

    For each seed ``seed .. seed + runs - 1``: split edges, train embeddings
    on the training edges only (``embedding="sdgnn"``) or draw random ones,
    fit logistic regression on training edges and score the test edges.
    """
    if embedding not in ("sdgnn", "random"):
        raise ValueError("embedding must be 'sdgnn' or 'random'")
    reports = []
    for s in range(seed, seed + runs):
        split = split_edges(g, ratio, s)
        if embedding == "random":
            Z = random_embeddings(g.node_count, config.model.dim, s)
        else:
            run_config = replace(config, seed=s, model=replace(config.model, seed=s))
            Z = train(g.subgraph(split.train), run_config).embeddings
        report = score_split(g, Z, split.train, split.test, reg=reg)
        log.info("run seed=%d %s", s, report.values())
        if progress is not None:
            progress(s, report)
        reports.append(report)
    return average_reports(reports)


def write_report_csv(report: MetricsReport, path, seed=0):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["run"] + list(METRICS))
        for i, run in enumerate(report.runs):
            w.writerow([seed + i] + [f"{run[k]:.6f}" for k in METRICS])
        w.writerow(["mean"] + [f"{getattr(report, k):.6f}" for k in METRICS])


def format_report(report: MetricsReport, seed=0):
    lines = [f"{'run':>6} " + " ".join(f"{k:>10}" for k in METRICS)]
    for i, run in enumerate(report.runs):
        lines.append(f"{seed + i:>6} " + " ".join(f"{run[k]:>10.4f}" for k in METRICS))
    lines.append(f"{'mean':>6} " + " ".join(f"{getattr(report, k):>10.4f}" for k in METRICS))
    return "\n".join(lines)
