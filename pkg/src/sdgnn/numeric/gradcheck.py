"""Central finite-difference verification of tape gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sdgnn.numeric.autograd import TapeGraph


@dataclass
class FiniteDiffReport:
    worst: float
    analytic: np.ndarray  # per checked coordinate, in flat parameter order
    numeric: np.ndarray
    relative: np.ndarray


def finite_diff_check(loss_fn, params, h=1e-5, max_coords=None, seed=0, details=False):
    """Worst relative error between tape gradients and central differences.

    ``loss_fn()`` must rebuild the scalar loss from the tensors in ``params``
    (it is called once under a tape, then twice per checked coordinate with
    the coordinate nudged by ``+-h``). With ``max_coords`` set, that many
    coordinates are sampled uniformly across all parameters. The relative
    error divides by ``max(|analytic|, |numeric|, 1e-8)``. With ``details``
    a :class:`FiniteDiffReport` is returned instead of the bare maximum.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    with TapeGraph() as tape:
        loss = loss_fn()
    analytic = tape.backward(loss, params)

    sizes = [p.data.size for p in params]
    total = int(np.sum(sizes))
    if total == 0:
        empty = np.zeros(0)
        return FiniteDiffReport(0.0, empty, empty, empty) if details else 0.0
    flat = np.arange(total)
    if max_coords is not None and max_coords < total:
        flat = np.sort(np.random.default_rng(seed).choice(total, size=max_coords, replace=False))
    starts = np.cumsum([0] + sizes[:-1])

    # differences are taken in the parameters' own precision
    dtype = np.result_type(np.float64, *[p.data.dtype for p in params])
    a_all, n_all = np.empty(len(flat), dtype=dtype), np.empty(len(flat), dtype=dtype)
    for j, k in enumerate(flat):
        which = int(np.searchsorted(starts, k, side="right") - 1)
        p, i = params[which], int(k - starts[which])
        view = p.data.reshape(-1)
        saved = view[i]
        view[i] = saved + h
        f_plus = loss_fn().data.astype(dtype)
        view[i] = saved - h
        f_minus = loss_fn().data.astype(dtype)
        view[i] = saved
        n_all[j] = (f_plus - f_minus) / (2.0 * h)
        a_all[j] = analytic[which].reshape(-1)[i]
    rel = np.abs(a_all - n_all) / np.maximum(np.maximum(np.abs(a_all), np.abs(n_all)), 1e-8)
    worst = float(rel.max())
    rel = rel.astype(np.float64)
    if details:
        return FiniteDiffReport(worst, a_all, n_all, rel)
    return worst
