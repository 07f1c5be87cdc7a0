"""Synthetic signed digraphs with planted status and reputation signal.

Each node gets a latent status and a latent reputation. Edge sources are
drawn by activity, targets by popularity, with a share of edges closing
two-step paths so the graph has triangles. An edge ``u -> v`` is positive
with probability ``sigmoid(bias + status_gain * (status_v - status_u) +
reputation_gain * reputation_v)``.
"""

from __future__ import annotations

import numpy as np

from sdgnn.graph import SignedDigraph


def synthetic_signed_digraph(nodes=200, edges=1200, seed=0, bias=2.5, status_gain=1.0,
                             reputation_gain=1.5, closure=0.3) -> SignedDigraph:
    if edges > nodes * (nodes - 1):
        raise ValueError("more edges than ordered node pairs")
    rng = np.random.default_rng(seed)
    status = rng.normal(size=nodes)
    reputation = rng.normal(size=nodes)
    activity = rng.lognormal(sigma=1.0, size=nodes)
    popularity = rng.lognormal(sigma=1.0, size=nodes)
    activity /= activity.sum()
    popularity /= popularity.sum()

    seen = set()
    out_adj = [[] for _ in range(nodes)]
    src, dst = [], []
    while len(src) < edges:
        u = int(rng.choice(nodes, p=activity))
        v = None
        if out_adj[u] and rng.random() < closure:
            mid = out_adj[u][rng.integers(len(out_adj[u]))]
            if out_adj[mid]:
                v = out_adj[mid][rng.integers(len(out_adj[mid]))]
        if v is None:
            v = int(rng.choice(nodes, p=popularity))
        if u == v or (u, v) in seen:
            continue
        seen.add((u, v))
        out_adj[u].append(v)
        src.append(u)
        dst.append(v)
    src, dst = np.array(src), np.array(dst)
    logit = bias + status_gain * (status[dst] - status[src]) + reputation_gain * reputation[dst]
    sign = np.where(rng.random(len(src)) < 1.0 / (1.0 + np.exp(-logit)), 1, -1)
    return SignedDigraph(nodes, src, dst, sign)
