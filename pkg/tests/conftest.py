import os
from pathlib import Path

import numpy as np
import pytest

from sdgnn import kernels
from sdgnn.graph import SignedDigraph

DATA_DIR = Path(os.environ.get("SDGNN_DATA_DIR", Path(__file__).resolve().parents[1] / "data"))

BACKENDS = ["python"] + (["cython"] if kernels.HAVE_EXTENSION else [])

_acceptance_lines = []


@pytest.fixture(params=BACKENDS)
def backend(request):
    with kernels.use_backend(request.param):
        yield request.param


@pytest.fixture(scope="session")
def acceptance_log():
    return _acceptance_lines


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)


def random_graph(n, m, seed, p_pos=0.7):
    """Random signed digraph on ``n`` nodes with up to ``m`` distinct edges."""
    rng = np.random.default_rng(seed)
    pairs = set()
    edges = []
    for _ in range(m * 5):
        if len(edges) >= m:
            break
        u, v = rng.integers(n, size=2)
        if u == v or (u, v) in pairs:
            continue
        pairs.add((u, v))
        edges.append((int(u), int(v), 1 if rng.random() < p_pos else -1))
    return SignedDigraph.from_edges(edges, node_count=n)


def find_dataset(*names):
    for name in names:
        for suffix in ("", ".gz"):
            path = DATA_DIR / (name + suffix)
            if path.exists():
                return path
    return None
