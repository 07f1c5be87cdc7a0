"""Signed directed relation GNN encoder.

Each layer computes, for every target node, one message per relation
(OUT_POS, OUT_NEG, IN_POS, IN_NEG) with either a mean or an attention
aggregator, concatenates ``[z_u, m_out_pos, m_out_neg, m_in_pos, m_in_neg]``
and maps the ``5d`` vector back to ``d`` with a two-layer MLP.

Matrices act on row vectors: a message is ``h @ W``.
"""

from __future__ import annotations

import hashlib
import json
from collections import OrderedDict
from dataclasses import asdict, dataclass

import numpy as np

from sdgnn import kernels
from sdgnn.graph import Relation, SignedDigraph
from sdgnn.numeric import autograd as ops
from sdgnn.numeric.autograd import DimensionError, Tensor

AGGREGATORS = ("mean", "attention")
RELATION_NAMES = ("out_pos", "out_neg", "in_pos", "in_neg")


@dataclass(frozen=True)
class ModelConfig:
    dim: int = 20
    layers: int = 2
    aggregator: str = "attention"
    leaky_slope: float = 0.2
    activation: str = "tanh"
    seed: int = 0
    dtype: str = "float64"

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.aggregator not in AGGREGATORS:
            raise ValueError(f"aggregator must be one of {AGGREGATORS}")
        if self.activation not in ops.ACTIVATIONS:
            raise ValueError(f"activation must be one of {tuple(ops.ACTIVATIONS)}")

    def shape_hash(self, node_count):
        """Digest of everything that fixes parameter shapes."""
        key = json.dumps({"dim": self.dim, "layers": self.layers, "aggregator": self.aggregator,
                          "nodes": int(node_count)}, sort_keys=True)
        return hashlib.sha256(key.encode()).hexdigest()[:16]

    def to_dict(self):
        return asdict(self)


def parameter_shapes(config: ModelConfig, node_count):
    d = config.dim
    shapes = OrderedDict(embedding=(node_count, d))
    for layer in range(config.layers):
        for rel in RELATION_NAMES:
            shapes[f"layer{layer}.{rel}.weight"] = (d, d)
            if config.aggregator == "attention":
                shapes[f"layer{layer}.{rel}.attention"] = (2 * d,)
        shapes[f"layer{layer}.mlp1.weight"] = (5 * d, d)
        shapes[f"layer{layer}.mlp1.bias"] = (d,)
        shapes[f"layer{layer}.mlp2.weight"] = (d, d)
        shapes[f"layer{layer}.mlp2.bias"] = (d,)
    shapes["status.weight"] = (d,)
    shapes["status.bias"] = ()
    return shapes


class ParameterSet(OrderedDict):
    """Named parameter arrays in a fixed order."""

    def tensors(self, requires_grad=True):
        # tensors share memory with the arrays, so in-place updates show through
        return OrderedDict((k, Tensor(v, requires_grad=requires_grad, name=k)) for k, v in self.items())

    def copy(self):
        return ParameterSet((k, v.copy()) for k, v in self.items())

    def size(self):
        return int(sum(v.size for v in self.values()))


def init_parameters(config: ModelConfig, node_count) -> ParameterSet:
    """Uniform(-sqrt(1/d), sqrt(1/d)) weights and embeddings, zero biases."""
    rng = np.random.default_rng(config.seed)
    bound = np.sqrt(1.0 / config.dim)
    params = ParameterSet()
    for name, shape in parameter_shapes(config, node_count).items():
        if name.endswith("bias"):
            arr = np.zeros(shape)
        else:
            arr = rng.uniform(-bound, bound, size=shape)
        params[name] = np.asarray(arr, dtype=config.dtype)
    return params


def _activation(config):
    return ops.ACTIVATIONS[config.activation]


def relation_message(H, self_pos, seg, nbr_pos, n, weight, attention, config):
    """Messages for ``n`` targets from one relation.

    ``H`` holds source-layer rows; ``self_pos`` locates each target in ``H``;
    ``(seg, nbr_pos)`` lists every (target, neighbor) pair of the relation.
    """
    dtype = H.dtype
    if config.aggregator == "mean":
        summed = ops.add(ops.segment_sum(ops.gather(H, nbr_pos), seg, n), ops.gather(H, self_pos))
        inv = 1.0 / (np.bincount(seg, minlength=n) + 1.0)
        avg = ops.mul(summed, ops.const(inv[:, None], dtype=dtype))
        return _activation(config)(ops.matmul(avg, weight))
    if len(seg) == 0:
        return ops.const(np.zeros((n, weight.shape[1]), dtype=dtype))
    projected = ops.matmul(H, weight)
    p_nbr = ops.gather(projected, nbr_pos)
    alpha = _attention_weights(projected, self_pos, seg, p_nbr, n, attention, config)
    return ops.segment_sum(ops.mul(p_nbr, ops.reshape(alpha, (-1, 1))), seg, n)


def _attention_weights(projected, self_pos, seg, p_nbr, n, attention, config):
    p_self = ops.gather(projected, self_pos)
    logits = ops.leaky_relu(
        ops.matmul(ops.concat([ops.gather(p_self, seg), p_nbr], axis=1), attention),
        config.leaky_slope,
    )
    return ops.segment_softmax(logits, seg, n)


def combine_messages(messages, T, layer, config):
    """Concatenate self + four relation messages and apply the layer MLP."""
    stacked = ops.concat(messages, axis=1)
    if stacked.shape[1] != 5 * config.dim:
        raise DimensionError(f"combine: expected width {5 * config.dim}, got {stacked.shape[1]}")
    hidden = _activation(config)(ops.add(ops.matmul(stacked, T[f"layer{layer}.mlp1.weight"]),
                                         T[f"layer{layer}.mlp1.bias"]))
    return ops.add(ops.matmul(hidden, T[f"layer{layer}.mlp2.weight"]), T[f"layer{layer}.mlp2.bias"])


def receptive_sets(g: SignedDigraph, nodes, layers):
    """Node sets per layer plus the neighbor pairs each layer consumes.

    Returns ``(sets, pairs)`` where ``sets[0]`` is the input set (all nodes
    within ``layers`` hops), ``sets[layers]`` the sorted targets, and
    ``pairs[l][r]`` the ``(seg, nbr)`` arrays for the targets of layer ``l``.
    """
    current = np.unique(np.asarray(nodes, dtype=np.int64))
    sets, pairs = [current], []
    for _ in range(layers):
        gathered = [kernels.csr_gather(*g.csr(r), current) for r in Relation]
        pairs.append(gathered)
        nbrs = np.concatenate([nbr for _, nbr in gathered] + [current])
        current = np.unique(nbrs)
        sets.append(current)
    sets.reverse()
    pairs.reverse()
    return sets, pairs


def encode(g: SignedDigraph, T, config: ModelConfig, nodes):
    """Layer-``L`` embeddings for ``nodes``.

    ``T`` maps parameter names to tensors. Returns ``(Z, targets)`` where
    ``targets`` is the sorted unique node list and row ``i`` of ``Z`` is the
    embedding of ``targets[i]``.
    """
    sets, pairs = receptive_sets(g, nodes, config.layers)
    H = ops.gather(T["embedding"], sets[0])
    for layer in range(config.layers):
        src_set, tgt_set = sets[layer], sets[layer + 1]
        n = len(tgt_set)
        self_pos = np.searchsorted(src_set, tgt_set)
        messages = [ops.gather(H, self_pos)]
        for r, (seg, nbr) in zip(Relation, pairs[layer]):
            rel = RELATION_NAMES[r]
            messages.append(relation_message(
                H, self_pos, seg, np.searchsorted(src_set, nbr), n,
                T[f"layer{layer}.{rel}.weight"], T.get(f"layer{layer}.{rel}.attention"), config))
        H = combine_messages(messages, T, layer, config)
    return H, sets[-1]


def encode_all(g: SignedDigraph, params: ParameterSet, config: ModelConfig) -> np.ndarray:
    """Final embeddings of every node, as a plain array."""
    Z, _ = encode(g, params.tensors(requires_grad=False), config, np.arange(g.node_count))
    return Z.data


# -- single-node views, used for inspection and tests -------------------------

def _single(g, u, r):
    seg, nbr = kernels.csr_gather(*g.csr(r), np.array([u]))
    return seg, nbr


def mean_aggregate(g, u, r, layer, Z, params, config):
    """Mean-aggregator message of node ``u`` for relation ``r`` at ``layer``,
    where ``Z`` is the full layer-``layer`` embedding table."""
    config = _with(config, aggregator="mean")
    seg, nbr = _single(g, u, r)
    out = relation_message(Tensor(Z), np.array([u]), seg, nbr, 1,
                           Tensor(params[f"layer{layer}.{RELATION_NAMES[r]}.weight"]), None, config)
    return out.data[0]


def attention_coefficients(g, u, r, layer, Z, params, config):
    seg, nbr = _single(g, u, r)
    if len(nbr) == 0:
        raise ValueError(f"node {u} has no {Relation(r).name} neighbors")
    rel = RELATION_NAMES[r]
    projected = ops.matmul(Tensor(Z), Tensor(params[f"layer{layer}.{rel}.weight"]))
    alpha = _attention_weights(projected, np.array([u]), seg, ops.gather(projected, nbr), 1,
                               Tensor(params[f"layer{layer}.{rel}.attention"]), config)
    return alpha.data


def attention_aggregate(g, u, r, layer, Z, params, config):
    config = _with(config, aggregator="attention")
    seg, nbr = _single(g, u, r)
    rel = RELATION_NAMES[r]
    out = relation_message(Tensor(Z), np.array([u]), seg, nbr, 1,
                           Tensor(params[f"layer{layer}.{rel}.weight"]),
                           Tensor(params[f"layer{layer}.{rel}.attention"]), config)
    return out.data[0]


def combine(self_msg, relation_msgs, layer, params, config):
    """Next-layer embedding from one self message and four relation messages."""
    if len(relation_msgs) != 4:
        raise DimensionError(f"combine: need 4 relation messages, got {len(relation_msgs)}")
    rows = [Tensor(np.asarray(m, dtype=config.dtype).reshape(1, -1)) for m in (self_msg, *relation_msgs)]
    return combine_messages(rows, params.tensors(requires_grad=False), layer, config).data[0]


def _with(config, **changes):
    return ModelConfig(**{**config.to_dict(), **changes})


# -- embedding text export ----------------------------------------------------

def export_embeddings(Z, path):
    """One line per node: ``node_id v1 ... vd`` with 9 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, row in enumerate(np.asarray(Z)):
            fh.write(str(i) + " " + " ".join(f"{x:.9g}" for x in row) + "\n")


def load_embeddings(path) -> np.ndarray:
    rows = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if parts:
                rows[int(parts[0])] = [float(x) for x in parts[1:]]
    return np.array([rows[i] for i in range(len(rows))])
