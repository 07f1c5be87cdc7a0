import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdgnn import kernels

needs_ext = pytest.mark.skipif(not kernels.HAVE_EXTENSION, reason="extension not built")


def _undirected_csr(n, pairs):
    adj = [set() for _ in range(n)]
    for a, b in pairs:
        if a != b:
            adj[a].add(b)
            adj[b].add(a)
    indptr = np.cumsum([0] + [len(s) for s in adj])
    indices = np.array([x for s in adj for x in sorted(s)], dtype=np.int64)
    return indptr, indices, adj


def _brute_triangles(n, adj):
    return sorted((i, j, k) for i, j, k in itertools.combinations(range(n), 3)
                  if j in adj[i] and k in adj[i] and k in adj[j])


pair_lists = st.integers(3, 12).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
                                             max_size=40)))


@given(pair_lists)
@settings(max_examples=60, deadline=None)
def test_triangles_match_brute_force(case):
    n, pairs = case
    indptr, indices, adj = _undirected_csr(n, pairs)
    expected = _brute_triangles(n, adj)
    for name in ["python"] + (["cython"] if kernels.HAVE_EXTENSION else []):
        with kernels.use_backend(name):
            got = [tuple(t) for t in kernels.list_triangles(indptr, indices).tolist()]
        assert got == expected, name


def test_triangles_empty(backend):
    assert kernels.list_triangles(np.zeros(4, dtype=np.int64), np.zeros(0, dtype=np.int64)).shape == (0, 3)


def test_csr_gather(backend):
    indptr = np.array([0, 2, 2, 5])
    indices = np.array([7, 8, 1, 2, 3])
    seg, nbr = kernels.csr_gather(indptr, indices, np.array([2, 1, 0]))
    assert seg.tolist() == [0, 0, 0, 2, 2]
    assert nbr.tolist() == [1, 2, 3, 7, 8]


@needs_ext
@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_segment_backends_agree(dtype):
    rng = np.random.default_rng(0)
    values = rng.normal(size=(500, 7)).astype(dtype)
    seg = rng.integers(0, 40, size=500)
    with kernels.use_backend("python"):
        s_py = kernels.segment_sum(values, seg, 50)
        m_py = kernels.segment_max(values[:, 0].copy(), seg, 50)
    with kernels.use_backend("cython"):
        s_cy = kernels.segment_sum(values, seg, 50)
        m_cy = kernels.segment_max(values[:, 0].copy(), seg, 50)
    assert s_cy.dtype == dtype
    np.testing.assert_allclose(s_cy, s_py, rtol=1e-5 if dtype == np.float32 else 1e-12)
    np.testing.assert_array_equal(m_cy, m_py)
    assert np.isneginf(m_cy[40:]).all()


@needs_ext
def test_csr_gather_backends_agree():
    rng = np.random.default_rng(1)
    counts = rng.integers(0, 6, size=30)
    indptr = np.concatenate([[0], np.cumsum(counts)])
    indices = rng.integers(0, 30, size=indptr[-1])
    rows = rng.integers(0, 30, size=12)
    with kernels.use_backend("python"):
        a = kernels.csr_gather(indptr, indices, rows)
    with kernels.use_backend("cython"):
        b = kernels.csr_gather(indptr, indices, rows)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.set_backend("fortran")


def test_wide_floats_keep_their_dtype(backend):
    values = np.arange(6, dtype=np.longdouble).reshape(3, 2)
    out = kernels.segment_sum(values, np.array([1, 0, 1]), 2)
    assert out.dtype == np.longdouble
    np.testing.assert_array_equal(out, [[2, 3], [4, 6]])
    assert kernels.segment_max(values[:, 0].copy(), np.array([1, 0, 1]), 2).dtype == np.longdouble


def test_pure_python_override():
    import os
    import subprocess
    import sys

    env = dict(os.environ, SDGNN_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import sdgnn; print(sdgnn.backend())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
