"""Hot kernels with a compiled backend and a numpy fallback.

The compiled module ``sdgnn._ext`` is used when it imports; otherwise, or
when ``SDGNN_PURE_PYTHON=1`` is set, the numpy versions below run. Both
backends produce identical outputs; tests run each kernel under both.
"""

from __future__ import annotations

import contextlib
import os

import numpy as np

try:
    from sdgnn import _ext
except ImportError:  # pragma: no cover - depends on the build
    _ext = None

HAVE_EXTENSION = _ext is not None
_backend = "cython" if HAVE_EXTENSION and not os.environ.get("SDGNN_PURE_PYTHON") else "python"


def backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("cython", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "cython" and not HAVE_EXTENSION:
        raise RuntimeError("compiled extension sdgnn._ext is not built")
    _backend = name


@contextlib.contextmanager
def use_backend(name: str):
    previous = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


# -- numpy fallbacks ---------------------------------------------------------

def py_csr_gather(indptr, indices, rows):
    starts = indptr[rows]
    counts = indptr[rows + 1] - starts
    total = int(counts.sum())
    seg = np.repeat(np.arange(len(rows), dtype=np.int64), counts)
    if total == 0:
        return seg, np.empty(0, dtype=np.int64)
    # position of each gathered entry inside the flat indices array
    offsets = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(counts) - counts, counts)
    return seg, indices[np.repeat(starts, counts) + offsets]


def py_segment_sum(values, seg, n):
    out = np.zeros((n, values.shape[1]), dtype=values.dtype)
    np.add.at(out, seg, values)
    return out


def py_segment_max(values, seg, n):
    out = np.full(n, -np.inf, dtype=values.dtype)
    np.maximum.at(out, seg, values)
    return out


def py_list_triangles(indptr, indices):
    n = len(indptr) - 1
    higher = [set(indices[indptr[u]:indptr[u + 1]][indices[indptr[u]:indptr[u + 1]] > u].tolist())
              for u in range(n)]
    found = []
    for u in range(n):
        hu = higher[u]
        for v in sorted(hu):
            for w in sorted(hu & higher[v]):
                found.append((u, v, w))
    return np.array(found, dtype=np.int64).reshape(-1, 3)


# -- dispatch ----------------------------------------------------------------

def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def csr_gather(indptr, indices, rows):
    """Flatten the CSR rows ``rows`` into ``(segment, neighbor)`` pairs, where
    ``segment`` is the position of the row inside ``rows``."""
    indptr, indices, rows = _i64(indptr), _i64(indices), _i64(rows)
    if _backend == "cython":
        return _ext.csr_gather(indptr, indices, rows)
    return py_csr_gather(indptr, indices, rows)


_NATIVE = (np.float32, np.float64)


def _floats(values):
    # other float widths (e.g. longdouble) stay as they are and take the
    # numpy path; everything else becomes float64
    values = np.asarray(values)
    return values if values.dtype.kind == "f" else values.astype(np.float64)


def segment_sum(values, seg, n):
    """Sum rows of ``values`` (m x d) into ``n`` buckets given by ``seg``."""
    values = np.ascontiguousarray(_floats(values))
    seg = _i64(seg)
    if _backend == "cython" and values.dtype in _NATIVE:
        return _ext.segment_sum(values, seg, int(n))
    return py_segment_sum(values, seg, int(n))


def segment_max(values, seg, n):
    """Per-bucket maximum of a 1-D array; empty buckets hold ``-inf``."""
    values = np.ascontiguousarray(_floats(values))
    seg = _i64(seg)
    if _backend == "cython" and values.dtype in _NATIVE:
        return _ext.segment_max(values, seg, int(n))
    return py_segment_max(values, seg, int(n))


def list_triangles(indptr, indices):
    """All closed triples ``i < j < k`` of a simple undirected CSR graph with
    sorted rows, as an ``(t, 3)`` int64 array in lexicographic order."""
    indptr, indices = _i64(indptr), _i64(indices)
    if _backend == "cython":
        return _ext.list_triangles(indptr, indices)
    return py_list_triangles(indptr, indices)
