"""Closed signed triads: enumeration, balance/status classification, census.

A triad is a node triple ``i < j < k`` plus one directed signed edge per
node pair. A pair connected in both directions contributes one triad per
direction choice, so a triple may yield up to eight triads.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

from sdgnn import kernels
from sdgnn.graph import SignedDigraph

log = logging.getLogger(__name__)

# pair order inside a triad: (i, j), (i, k), (j, k)
_PAIRS = ((0, 1), (0, 2), (1, 2))
POLICIES = ("both", "either", "all")


class Triad(NamedTuple):
    nodes: tuple[int, int, int]
    edges: tuple[tuple[int, int, int], ...]  # (src, dst, sign) per pair

    @property
    def signs(self):
        return tuple(e[2] for e in self.edges)


class TriadSet:
    """Columnar store of triads.

    ``nodes`` is ``(t, 3)``; ``src``, ``dst``, ``sign`` are ``(t, 3)`` with one
    column per node pair in the order ij, ik, jk. ``edge_index`` maps each
    triad edge back to its index in the graph the set was built from.
    """

    def __init__(self, nodes, src, dst, sign, edge_index):
        self.nodes = np.asarray(nodes, dtype=np.int64).reshape(-1, 3)
        self.src = np.asarray(src, dtype=np.int64).reshape(-1, 3)
        self.dst = np.asarray(dst, dtype=np.int64).reshape(-1, 3)
        self.sign = np.asarray(sign, dtype=np.int8).reshape(-1, 3)
        self.edge_index = np.asarray(edge_index, dtype=np.int64).reshape(-1, 3)

    @classmethod
    def empty(cls):
        z = np.zeros((0, 3), dtype=np.int64)
        return cls(z, z, z, z, z)

    def __len__(self):
        return len(self.nodes)

    def __getitem__(self, idx):
        if isinstance(idx, (int, np.integer)):
            edges = tuple((int(a), int(b), int(s)) for a, b, s in
                          zip(self.src[idx], self.dst[idx], self.sign[idx]))
            return Triad(tuple(int(x) for x in self.nodes[idx]), edges)
        return TriadSet(self.nodes[idx], self.src[idx], self.dst[idx],
                        self.sign[idx], self.edge_index[idx])

    def __iter__(self) -> Iterator[Triad]:
        for t in range(len(self)):
            yield self[t]

    def balanced(self):
        return (self.sign < 0).sum(axis=1) % 2 == 0

    def status_consistent(self):
        # Each edge orders its endpoints: u ->+ v puts v above u, u ->- v puts
        # v below u. Three arcs on three pairs are cyclic iff every node is
        # the lower end of exactly one arc.
        low = np.where(self.sign > 0, self.src, self.dst)
        per_node = np.stack([(low == self.nodes[:, [c]]).sum(axis=1) for c in range(3)], axis=1)
        return ~np.all(per_node == 1, axis=1)


def triad_set(g: SignedDigraph) -> TriadSet:
    """Every closed triad of ``g`` in canonical order."""
    indptr, indices = g.undirected_csr()
    triples = kernels.list_triangles(indptr, indices)
    if len(triples) == 0:
        return TriadSet.empty()

    # forward / backward edge index for each of the three pairs
    fwd = np.stack([g.find_edges(triples[:, a], triples[:, b]) for a, b in _PAIRS], axis=1)
    bwd = np.stack([g.find_edges(triples[:, b], triples[:, a]) for a, b in _PAIRS], axis=1)
    # options[p][c]: edge chosen for pair p under bit c (0 -> first available)
    first = np.where(fwd >= 0, fwd, bwd)
    second = np.where((fwd >= 0) & (bwd >= 0), bwd, -1)

    chosen, owner = [], []
    for combo in range(8):
        bits = [(combo >> p) & 1 for p in range(3)]
        pick = np.stack([second[:, p] if bits[p] else first[:, p] for p in range(3)], axis=1)
        ok = np.all(pick >= 0, axis=1)
        chosen.append(pick[ok])
        owner.append(np.nonzero(ok)[0])
    chosen = np.concatenate(chosen)
    owner = np.concatenate(owner)
    # stable order: by triple, then direction choice
    order = np.argsort(owner, kind="stable")
    chosen, owner = chosen[order], owner[order]
    return TriadSet(triples[owner], g.src[chosen], g.dst[chosen], g.sign[chosen], chosen)


def enumerate_triads(g: SignedDigraph) -> Iterator[Triad]:
    return iter(triad_set(g))


def is_balanced(t: Triad) -> bool:
    return sum(1 for s in t.signs if s < 0) % 2 == 0


def satisfies_status(t: Triad) -> bool:
    """True iff the three status constraints admit a consistent ranking."""
    arcs = [(u, v) if s > 0 else (v, u) for u, v, s in t.edges]  # (lower, higher)
    # Kahn's algorithm: peel off nodes nothing remaining points at
    remaining = set(t.nodes)
    while remaining:
        sources = [x for x in remaining if not any(hi == x and lo in remaining for lo, hi in arcs)]
        if not sources:
            return False
        remaining -= set(sources)
    return True


@dataclass(frozen=True)
class CensusReport:
    both: float
    only_balance: float
    only_status: float
    neither: float
    total_triads: int

    def as_dict(self):
        return {"both": self.both, "only_balance": self.only_balance,
                "only_status": self.only_status, "neither": self.neither,
                "total_triads": self.total_triads}


def census(g: SignedDigraph) -> CensusReport:
    ts = triad_set(g)
    total = len(ts)
    if total == 0:
        log.warning("graph has no closed triads; census is all zeros")
        return CensusReport(0.0, 0.0, 0.0, 0.0, 0)
    bal = ts.balanced()
    sta = ts.status_consistent()
    counts = [np.sum(bal & sta), np.sum(bal & ~sta), np.sum(~bal & sta), np.sum(~bal & ~sta)]
    return CensusReport(*(float(c) / total for c in counts), total)


def training_triangle_set(g: SignedDigraph, policy="both") -> TriadSet:
    """Triads of the training graph kept for the triangle loss."""
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}")
    ts = triad_set(g)
    if policy == "all" or len(ts) == 0:
        return ts
    bal, sta = ts.balanced(), ts.status_consistent()
    keep = bal & sta if policy == "both" else bal | sta
    return ts[np.nonzero(keep)[0]]
