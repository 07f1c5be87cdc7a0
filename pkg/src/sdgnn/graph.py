"""Signed directed graph storage, edge-list loaders and train/test splits."""

from __future__ import annotations

import enum
import gzip
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


class GraphFormatError(ValueError):
    """A row of an edge-list file could not be turned into a signed edge."""

    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class Relation(enum.IntEnum):
    """The four signed directed relations, in concatenation order."""

    OUT_POS = 0
    OUT_NEG = 1
    IN_POS = 2
    IN_NEG = 3


FORMATS = ("tsv_sign", "csv_rating")


def _csr(rows, cols, n):
    order = np.lexsort((cols, rows))
    rows, cols = rows[order], cols[order]
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, rows + 1, 1)
    return np.cumsum(indptr), cols.astype(np.int64)


class SignedDigraph:
    """Immutable signed digraph on dense node ids ``0..node_count-1``.

    Edges are kept in three parallel arrays (``src``, ``dst``, ``sign``) in a
    fixed order. Each of the four relations has a CSR neighbor index with
    sorted rows, so ``neighbors(u, Relation.IN_NEG)`` is a slice.
    """

    def __init__(self, node_count, src, dst, sign, labels=None):
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        sign = np.asarray(sign, dtype=np.int8)
        if not (src.shape == dst.shape == sign.shape) or src.ndim != 1:
            raise ValueError("src, dst and sign must be 1-D arrays of equal length")
        if len(src) and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= node_count):
            raise ValueError("edge endpoint outside [0, node_count)")
        if np.any(src == dst):
            raise ValueError("self-loops are not allowed")
        if not np.all(np.isin(sign, (-1, 1))):
            raise ValueError("signs must be +1 or -1")
        keys = src * node_count + dst
        if len(np.unique(keys)) != len(keys):
            raise ValueError("duplicate ordered pair")

        self.node_count = int(node_count)
        self.src, self.dst, self.sign = src, dst, sign
        for a in (self.src, self.dst, self.sign):
            a.setflags(write=False)
        self.labels = list(labels) if labels is not None else None

        pos = sign > 0
        neg = ~pos
        self._csr = (
            _csr(src[pos], dst[pos], self.node_count),
            _csr(src[neg], dst[neg], self.node_count),
            _csr(dst[pos], src[pos], self.node_count),
            _csr(dst[neg], src[neg], self.node_count),
        )
        self._keys = None

    @classmethod
    def from_edges(cls, edges, node_count=None, labels=None):
        """Build from ``(src, dst, sign)`` triples already on dense ids."""
        arr = np.asarray(list(edges), dtype=np.int64).reshape(-1, 3)
        if node_count is None:
            node_count = int(arr[:, :2].max()) + 1 if len(arr) else 0
        return cls(node_count, arr[:, 0], arr[:, 1], arr[:, 2], labels=labels)

    @property
    def edge_count(self):
        return len(self.src)

    @property
    def positive_count(self):
        return int((self.sign > 0).sum())

    @property
    def negative_count(self):
        return int((self.sign < 0).sum())

    def csr(self, relation):
        """``(indptr, indices)`` for one relation."""
        return self._csr[Relation(relation)]

    def neighbors(self, u, relation):
        if not 0 <= u < self.node_count:
            raise IndexError(f"node {u} out of range [0, {self.node_count})")
        indptr, indices = self._csr[Relation(relation)]
        return indices[indptr[u]:indptr[u + 1]]

    def degree(self, relation):
        indptr, _ = self._csr[Relation(relation)]
        return np.diff(indptr)

    def edges(self):
        return list(zip(self.src.tolist(), self.dst.tolist(), self.sign.tolist()))

    def edge_keys(self):
        """Sorted ``src * n + dst`` keys and the edge index of each key."""
        if self._keys is None:
            keys = self.src * self.node_count + self.dst
            order = np.argsort(keys, kind="stable")
            self._keys = (keys[order], order)
        return self._keys

    def find_edges(self, src, dst):
        """Edge index for each ordered pair, -1 where absent."""
        keys, order = self.edge_keys()
        query = np.asarray(src, dtype=np.int64) * self.node_count + np.asarray(dst, dtype=np.int64)
        at = np.searchsorted(keys, query)
        at = np.minimum(at, max(len(keys) - 1, 0))
        if len(keys) == 0:
            return np.full(query.shape, -1, dtype=np.int64)
        return np.where(keys[at] == query, order[at], -1)

    def subgraph(self, edge_index):
        """Same node set, only the selected edges (order preserved)."""
        edge_index = np.asarray(edge_index, dtype=np.int64)
        return SignedDigraph(self.node_count, self.src[edge_index], self.dst[edge_index],
                             self.sign[edge_index], labels=self.labels)

    def undirected_csr(self):
        """Simple undirected skeleton (reciprocal pairs collapse to one)."""
        n = self.node_count
        a = np.concatenate([self.src, self.dst])
        b = np.concatenate([self.dst, self.src])
        keys = np.unique(a * n + b)
        return _csr(keys // n, keys % n, n)

    def __eq__(self, other):
        if not isinstance(other, SignedDigraph):
            return NotImplemented
        return (self.node_count == other.node_count
                and np.array_equal(self.src, other.src)
                and np.array_equal(self.dst, other.dst)
                and np.array_equal(self.sign, other.sign))

    __hash__ = None

    def __repr__(self):
        return (f"SignedDigraph(nodes={self.node_count}, pos={self.positive_count}, "
                f"neg={self.negative_count})")


def relation_neighbors(g: SignedDigraph, u: int, r: Relation) -> list[int]:
    return g.neighbors(u, r).tolist()


def _open_text(path):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, "rt", encoding="utf-8")
    return open(path, encoding="utf-8")


def _parse_rows(path, fmt):
    """Yield ``(lineno, src_label, dst_label, sign)``; sign 0 means drop."""
    delim = "\t" if fmt == "tsv_sign" else ","
    with _open_text(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(delim) if delim in line else line.split()
            if fmt == "tsv_sign":
                if len(parts) != 3:
                    raise GraphFormatError(path, lineno, f"expected 3 fields, got {len(parts)}")
                try:
                    value = int(parts[2])
                except ValueError:
                    raise GraphFormatError(path, lineno, f"bad sign {parts[2]!r}") from None
                if value not in (-1, 0, 1):
                    raise GraphFormatError(path, lineno, f"sign must be 1 or -1, got {value}")
                yield lineno, parts[0].strip(), parts[1].strip(), value
            else:
                if len(parts) not in (3, 4):
                    raise GraphFormatError(path, lineno, f"expected 3 or 4 fields, got {len(parts)}")
                try:
                    rating = float(parts[2])
                except ValueError:
                    raise GraphFormatError(path, lineno, f"bad rating {parts[2]!r}") from None
                if rating == 0:
                    raise GraphFormatError(path, lineno, "rating 0 has no sign")
                yield lineno, parts[0].strip(), parts[1].strip(), 1 if rating > 0 else -1


def load_edge_list(path, format="tsv_sign") -> SignedDigraph:
    """Read a signed edge list.

    Self-loops and zero-sign rows are dropped (and counted in a warning). A
    repeated ordered pair keeps the sign of its last row but its first
    position. Node labels are renumbered by first appearance in the kept
    edge sequence, so writing the graph back with :func:`save_edge_list` and
    reloading reproduces the same arrays.
    """
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {format!r}")
    pairs: dict[tuple[str, str], int] = {}
    self_loops = zero_sign = duplicates = 0
    for _, a, b, s in _parse_rows(path, format):
        if a == b:
            self_loops += 1
            continue
        if s == 0:
            zero_sign += 1
            continue
        if (a, b) in pairs:
            duplicates += 1
        pairs[(a, b)] = s  # dict keeps first insertion position, value is last
    if self_loops or zero_sign:
        log.warning("%s: dropped %d self-loops and %d zero-sign rows", path, self_loops, zero_sign)
    if duplicates:
        log.info("%s: %d duplicate pairs resolved by last record", path, duplicates)

    ids: dict[str, int] = {}
    src, dst, sign = [], [], []
    for (a, b), s in pairs.items():
        src.append(ids.setdefault(a, len(ids)))
        dst.append(ids.setdefault(b, len(ids)))
        sign.append(s)
    return SignedDigraph(len(ids), src, dst, sign, labels=list(ids))


def save_edge_list(g: SignedDigraph, path, use_labels=True):
    """Write the canonical ``src<TAB>dst<TAB>sign`` form."""
    names = g.labels if (use_labels and g.labels is not None) else range(g.node_count)
    names = [str(x) for x in names]
    with open(path, "w", encoding="utf-8") as fh:
        for u, v, s in zip(g.src.tolist(), g.dst.tolist(), g.sign.tolist()):
            fh.write(f"{names[u]}\t{names[v]}\t{s}\n")


@dataclass(frozen=True)
class EdgeSplit:
    train: np.ndarray  # edge indices into the source graph
    test: np.ndarray
    seed: int
    ratio: float


def split_edges(g: SignedDigraph, ratio=0.8, seed=0) -> EdgeSplit:
    """Seeded uniform split; the first ``ceil(ratio * |E|)`` permuted edges
    form the training part."""
    if not 0 < ratio < 1:
        raise ValueError("ratio must lie strictly between 0 and 1")
    m = g.edge_count
    perm = np.random.default_rng(seed).permutation(m)
    # guard against 0.8 * m landing a hair above an integer
    n_train = math.ceil(round(ratio * m, 9))
    return EdgeSplit(train=np.sort(perm[:n_train]), test=np.sort(perm[n_train:]),
                     seed=seed, ratio=ratio)
