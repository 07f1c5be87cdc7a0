"""Sign, status-direction and triangle objectives."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from sdgnn.numeric import autograd as ops
from sdgnn.numeric.autograd import Tensor, as_tensor

LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class LossWeights:
    direction: float = 1.0  # lambda_1
    triangle: float = 1.0   # lambda_2
    margin: float = 0.5     # gamma

    def __post_init__(self):
        if self.direction < 0 or self.triangle < 0:
            raise ValueError("loss weights must be non-negative")
        if self.margin <= 0:
            raise ValueError("margin must be positive")


def sign_labels(sign):
    """+1 -> 1, -1 -> 0."""
    return (np.asarray(sign) > 0).astype(np.float64)


def _rows(z):
    z = as_tensor(z)
    return z if z.ndim == 2 else ops.reshape(z, (1, -1))


def sign_loss(z_u, z_v, y) -> Tensor:
    """Summed binary cross-entropy of ``sigmoid(z_u . z_v)`` against ``y``.

    Accepts one pair of vectors or two ``(m, d)`` matrices with ``m`` labels.
    """
    z_u, z_v = _rows(z_u), _rows(z_v)
    y = np.atleast_1d(np.asarray(y, dtype=z_u.dtype))
    if len(y) == 0:
        return ops.const(np.zeros((), dtype=z_u.dtype))
    logit = ops.rowdot(z_u, z_v)
    # sigmoid(-x) rather than 1 - sigmoid(x) keeps the negative branch exact
    log_p = ops.log(ops.sigmoid(logit), floor=LOG_FLOOR)
    log_q = ops.log(ops.sigmoid(ops.neg(logit)), floor=LOG_FLOOR)
    per_edge = ops.add(ops.mul(ops.const(y), log_p), ops.mul(ops.const(1.0 - y), log_q))
    return ops.neg(ops.sum(per_edge))


def status_score(z, weight, bias) -> Tensor:
    """``sigmoid(z . w + b)`` for each row of ``z``."""
    return ops.sigmoid(ops.add(ops.matmul(_rows(z), as_tensor(weight)), as_tensor(bias)))


def direction_loss(z_u, z_v, sign, weight, bias, margin=0.5) -> Tensor:
    """Squared hinge on the status gap ``s(z_u) - s(z_v)``.

    The target ``q`` is computed from the current gap and held constant:
    positive edges want the gap at most ``-margin``, negative edges at
    least ``+margin``; satisfied edges contribute nothing.
    """
    sign = np.atleast_1d(np.asarray(sign))
    if len(sign) == 0:
        return ops.const(np.zeros((), dtype=as_tensor(weight).dtype))
    gap = ops.sub(status_score(z_u, weight, bias), status_score(z_v, weight, bias))
    target = np.where(sign > 0, np.minimum(gap.data, -margin), np.maximum(gap.data, margin))
    return ops.sum(ops.square(ops.sub(ops.const(target), gap)))


def triangle_edge_arrays(triangles):
    """Flatten a :class:`~sdgnn.triads.TriadSet` into one row per triad edge."""
    return (triangles.src.reshape(-1), triangles.dst.reshape(-1), triangles.sign.reshape(-1))


def triangle_loss(triangles, Z, row_of=None) -> Tensor:
    """Sign cross-entropy over all three edges of every triangle.

    ``Z`` holds embeddings; ``row_of`` maps node ids to rows of ``Z`` (the
    identity when omitted). An edge shared by ``k`` triangles counts ``k``
    times.
    """
    Z = as_tensor(Z)
    src, dst, sign = triangle_edge_arrays(triangles)
    if row_of is not None:
        src, dst = row_of[src], row_of[dst]
    return sign_loss(ops.gather(Z, src), ops.gather(Z, dst), sign_labels(sign))


@dataclass
class LossParts:
    total: Tensor
    sign: float
    direction: float
    triangle: float


def total_loss(Z, row_of, edges, triangles, status_w, status_b, weights: LossWeights) -> LossParts:
    """``sign + lambda_1 * direction + lambda_2 * triangle`` for one batch.

    ``edges`` is ``(src, dst, sign)`` arrays of the batch's edges;
    ``triangles`` a TriadSet of the batch's triangles (or ``None``).
    """
    Z = as_tensor(Z)
    src, dst, sign = (np.asarray(a) for a in edges)
    zu, zv = ops.gather(Z, row_of[src]), ops.gather(Z, row_of[dst])
    l_sign = sign_loss(zu, zv, sign_labels(sign))
    total = l_sign
    l_dir = l_tri = None
    if weights.direction > 0:
        l_dir = direction_loss(zu, zv, sign, status_w, status_b, weights.margin)
        total = ops.add(total, ops.scale(l_dir, weights.direction))
    if weights.triangle > 0 and triangles is not None and len(triangles):
        l_tri = triangle_loss(triangles, Z, row_of)
        total = ops.add(total, ops.scale(l_tri, weights.triangle))
    return LossParts(
        total=total,
        sign=float(l_sign.data),
        direction=0.0 if l_dir is None else float(l_dir.data),
        triangle=0.0 if l_tri is None else float(l_tri.data),
    )
