"""Mini-batch training: shuffle nodes, encode, score the batch's edges and
triangles, backpropagate, take one Adam step."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from sdgnn.graph import SignedDigraph
from sdgnn.losses import LossParts, LossWeights, total_loss
from sdgnn.model import ModelConfig, ParameterSet, encode, encode_all, init_parameters, parameter_shapes
from sdgnn.numeric.adam import AdamState, adam_step
from sdgnn.numeric.autograd import TapeGraph, const
from sdgnn.triads import POLICIES, TriadSet, training_triangle_set

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


class TrainingError(RuntimeError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 500
    lr: float = 0.001
    weight_decay: float = 0.001
    decoupled_weight_decay: bool = False
    seed: int = 0
    triangle_policy: str = "both"
    loss: LossWeights = field(default_factory=LossWeights)
    model: ModelConfig = field(default_factory=ModelConfig)

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.triangle_policy not in POLICIES:
            raise ValueError(f"triangle_policy must be one of {POLICIES}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["loss"] = LossWeights(**d.get("loss", {}))
        d["model"] = ModelConfig(**d.get("model", {}))
        return cls(**d)


@dataclass
class Batch:
    nodes: np.ndarray
    edges: np.ndarray      # edge indices owned by this batch
    triangles: np.ndarray  # triangle indices owned by this batch


def assign_to_batches(g: SignedDigraph, triangles: TriadSet, seed, epoch=0, batch_size=500):
    """Partition nodes into shuffled batches; each edge goes with its source
    node's batch and each triangle with its smallest node's batch."""
    perm = np.random.default_rng([seed, epoch]).permutation(g.node_count)
    batch_of = np.empty(g.node_count, dtype=np.int64)
    batch_of[perm] = np.arange(g.node_count) // batch_size
    n_batches = max(math.ceil(g.node_count / batch_size), 1)
    edge_batch = batch_of[g.src]
    tri_batch = batch_of[triangles.nodes[:, 0]] if len(triangles) else np.empty(0, dtype=np.int64)
    edge_order = np.argsort(edge_batch, kind="stable")
    tri_order = np.argsort(tri_batch, kind="stable")
    edge_cuts = np.searchsorted(edge_batch[edge_order], np.arange(n_batches + 1))
    tri_cuts = np.searchsorted(tri_batch[tri_order], np.arange(n_batches + 1))
    return [
        Batch(nodes=perm[b * batch_size:(b + 1) * batch_size],
              edges=edge_order[edge_cuts[b]:edge_cuts[b + 1]],
              triangles=tri_order[tri_cuts[b]:tri_cuts[b + 1]])
        for b in range(n_batches)
    ]


def batch_loss(g, T, config: TrainConfig, triangles: TriadSet, batch: Batch):
    """Forward pass for one batch; returns :class:`~sdgnn.losses.LossParts`.

    Only the endpoints of owned edges and triangles are encoded.
    """
    src, dst, sign = g.src[batch.edges], g.dst[batch.edges], g.sign[batch.edges]
    tris = triangles[batch.triangles] if len(batch.triangles) else None
    needed = [src, dst]
    if tris is not None:
        needed.append(tris.nodes.reshape(-1))
    needed = np.concatenate(needed)
    dtype = T["embedding"].dtype
    if len(needed) == 0:
        return LossParts(total=const(np.zeros((), dtype=dtype)), sign=0.0, direction=0.0, triangle=0.0)
    Z, targets = encode(g, T, config.model, needed)
    row_of = np.full(g.node_count, -1, dtype=np.int64)
    row_of[targets] = np.arange(len(targets))
    return total_loss(Z, row_of, (src, dst, sign), tris,
                      T["status.weight"], T["status.bias"], config.loss)


@dataclass
class TrainState:
    params: ParameterSet
    adam: AdamState
    epoch: int = 0  # completed epochs


@dataclass
class TrainResult:
    params: ParameterSet
    config: TrainConfig
    trace: list            # per epoch: (epoch, sign, direction, triangle, total) batch means
    batch_trace: list      # per step: (epoch, batch, sign, direction, triangle, total)
    embeddings: np.ndarray
    state: TrainState


def new_state(g: SignedDigraph, config: TrainConfig) -> TrainState:
    params = init_parameters(config.model, g.node_count)
    adam = AdamState.for_params(list(params.values()), lr=config.lr,
                                weight_decay=config.weight_decay,
                                decoupled=config.decoupled_weight_decay)
    return TrainState(params=params, adam=adam, epoch=0)


def train(g_train: SignedDigraph, config: TrainConfig, state: TrainState | None = None,
          triangles: TriadSet | None = None, callback=None, step_hook=None) -> TrainResult:
    """Run epochs ``state.epoch + 1 .. config.epochs``.

    Passing a restored ``state`` resumes a run: batch shuffles depend only
    on ``(seed, epoch)``, so the continuation matches an uninterrupted run.
    ``callback(epoch, params)`` is called after each epoch and
    ``step_hook(epoch, batch_index, params)`` before each batch.
    """
    if g_train.edge_count == 0:
        raise TrainingError("training graph has no edges")
    if state is None:
        state = new_state(g_train, config)
    if triangles is None:
        triangles = training_triangle_set(g_train, config.triangle_policy) \
            if config.loss.triangle > 0 else TriadSet.empty()
    names = list(state.params)
    arrays = [state.params[k] for k in names]
    T = state.params.tensors(requires_grad=True)
    leaves = [T[k] for k in names]

    trace, batch_trace = [], []
    for epoch in range(state.epoch + 1, config.epochs + 1):
        sums = np.zeros(4)
        batches = assign_to_batches(g_train, triangles, config.seed, epoch, config.batch_size)
        for b, batch in enumerate(batches):
            if step_hook is not None:
                step_hook(epoch, b, state.params)
            with TapeGraph() as tape:
                parts = batch_loss(g_train, T, config, triangles, batch)
            total = float(parts.total.data)
            if not np.isfinite(total):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {b}: sign={parts.sign} "
                    f"direction={parts.direction} triangle={parts.triangle}")
            grads = tape.backward(parts.total, leaves)
            adam_step(arrays, grads, state.adam)
            row = (parts.sign, parts.direction, parts.triangle, total)
            batch_trace.append((epoch, b) + row)
            sums += row
        means = sums / len(batches)
        trace.append((epoch, *means.tolist()))
        state.epoch = epoch
        log.debug("epoch %d loss %.6f", epoch, means[3])
        if callback is not None:
            callback(epoch, state.params)

    embeddings = encode_all(g_train, state.params, config.model)
    return TrainResult(params=state.params, config=config, trace=trace,
                       batch_trace=batch_trace, embeddings=embeddings, state=state)


def write_trace(trace, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "sign", "direction", "triangle", "total"])
        for epoch, *vals in trace:
            w.writerow([epoch] + [f"{v:.10g}" for v in vals])


# -- checkpoints --------------------------------------------------------------

def checkpoint(path, params: ParameterSet, config: TrainConfig, node_count,
               adam: AdamState | None = None, epoch=0, embeddings=None):
    """Save parameters (and optionally optimizer state and final embeddings)
    to an ``.npz`` container whose ``__meta__`` entry records the version,
    config and shape hash."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "shape_hash": config.model.shape_hash(node_count),
        "node_count": int(node_count),
        "epoch": int(epoch),
        "adam_t": 0 if adam is None else adam.t,
    }
    arrays = {f"param/{k}": v for k, v in params.items()}
    if adam is not None:
        for k, m, v in zip(params, adam.m, adam.v):
            arrays[f"adam_m/{k}"] = m
            arrays[f"adam_v/{k}"] = v
    if embeddings is not None:
        arrays["embeddings"] = np.asarray(embeddings)
    with open(path, "wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(meta)), **arrays)


@dataclass
class Checkpoint:
    params: ParameterSet
    config: TrainConfig
    node_count: int
    epoch: int
    adam: AdamState | None
    embeddings: np.ndarray | None

    def state(self) -> TrainState:
        adam = self.adam or AdamState.for_params(list(self.params.values()), lr=self.config.lr,
                                                 weight_decay=self.config.weight_decay,
                                                 decoupled=self.config.decoupled_weight_decay)
        return TrainState(params=self.params, adam=adam, epoch=self.epoch)


def restore(path, config: TrainConfig | None = None, node_count=None) -> Checkpoint:
    """Load a checkpoint; with ``config``/``node_count`` given, refuse files
    whose parameter shapes would not fit them."""
    try:
        data = np.load(path, allow_pickle=False)
        meta = json.loads(str(data["__meta__"]))
    except (OSError, KeyError, ValueError) as exc:
        raise CheckpointError(f"{path}: not a checkpoint ({exc})") from None
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {meta.get('version')}")
    saved = TrainConfig.from_dict(meta["config"])
    n = meta["node_count"]
    if node_count is not None and node_count != n:
        raise CheckpointError(f"{path}: saved for {n} nodes, graph has {node_count}")
    if config is not None and config.model.shape_hash(n) != meta["shape_hash"]:
        raise CheckpointError(f"{path}: parameter shapes do not match the requested model config")

    params = ParameterSet()
    for name, shape in parameter_shapes(saved.model, n).items():
        key = f"param/{name}"
        if key not in data or data[key].shape != shape:
            raise CheckpointError(f"{path}: parameter {name} missing or misshaped")
        params[name] = data[key].copy()
    adam = None
    if f"adam_m/{next(iter(params))}" in data:
        adam = AdamState(lr=saved.lr, weight_decay=saved.weight_decay,
                         decoupled=saved.decoupled_weight_decay, t=meta["adam_t"],
                         m=[data[f"adam_m/{k}"].copy() for k in params],
                         v=[data[f"adam_v/{k}"].copy() for k in params])
    embeddings = data["embeddings"].copy() if "embeddings" in data else None
    return Checkpoint(params=params, config=saved, node_count=n, epoch=meta["epoch"],
                      adam=adam, embeddings=embeddings)
