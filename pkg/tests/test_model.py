import numpy as np
import pytest

from sdgnn.graph import Relation, SignedDigraph
from sdgnn.model import (
    ModelConfig,
    attention_aggregate,
    attention_coefficients,
    combine,
    encode,
    encode_all,
    export_embeddings,
    init_parameters,
    load_embeddings,
    mean_aggregate,
    parameter_shapes,
    receptive_sets,
)
from sdgnn.numeric import DimensionError

import oracle
from conftest import random_graph


def star(n_nbrs, relation=Relation.OUT_POS):
    """Node 0 with ``n_nbrs`` neighbors under one relation."""
    edges = []
    for v in range(1, n_nbrs + 1):
        if relation in (Relation.OUT_POS, Relation.OUT_NEG):
            edges.append((0, v, 1 if relation == Relation.OUT_POS else -1))
        else:
            edges.append((v, 0, 1 if relation == Relation.IN_POS else -1))
    return SignedDigraph.from_edges(edges, node_count=n_nbrs + 1)


def setup(d=4, n=6, aggregator="attention", seed=0, activation="tanh", layers=1):
    cfg = ModelConfig(dim=d, layers=layers, aggregator=aggregator, seed=seed, activation=activation)
    return cfg, init_parameters(cfg, n)


def test_init_deterministic_and_bounded():
    cfg = ModelConfig(dim=20, seed=3)
    a, b = init_parameters(cfg, 3783), init_parameters(cfg, 3783)
    assert a["embedding"].shape == (3783, 20)
    for k in a:
        assert np.array_equal(a[k], b[k])
        assert np.all(np.abs(a[k]) <= np.sqrt(1 / 20))
    assert a["status.bias"].shape == () and a["layer0.mlp1.bias"].sum() == 0
    assert not np.array_equal(a["embedding"], init_parameters(ModelConfig(dim=20, seed=4), 3783)["embedding"])


def test_parameter_budget():
    d, L = 20, 2
    shapes = parameter_shapes(ModelConfig(dim=d, layers=L, aggregator="mean"), 10)
    per_layer = sum(np.prod(s) for k, s in shapes.items() if k.startswith("layer0.") and k.endswith("weight"))
    assert per_layer == 10 * d * d


def test_mean_no_neighbors_identity():
    cfg, P = setup(d=3, n=2, aggregator="mean", activation="identity")
    P["layer0.out_pos.weight"][:] = np.eye(3)
    Z = np.array([[0.3, -1.0, 2.0], [5.0, 5.0, 5.0]])
    g = SignedDigraph(2, [], [], [])
    np.testing.assert_allclose(mean_aggregate(g, 0, Relation.OUT_POS, 0, Z, P, cfg), Z[0])


def test_mean_one_neighbor():
    cfg, P = setup(d=2, n=2, aggregator="mean", activation="identity")
    P["layer0.out_pos.weight"][:] = np.eye(2)
    Z = np.array([[1.0, 0.0], [0.0, 1.0]])
    g = SignedDigraph.from_edges([(0, 1, 1)])
    np.testing.assert_allclose(mean_aggregate(g, 0, Relation.OUT_POS, 0, Z, P, cfg), [0.5, 0.5])


@pytest.mark.parametrize("relation", list(Relation))
def test_mean_matches_scalar(relation):
    cfg, P = setup(d=5, n=4, aggregator="mean", seed=1)
    g = star(3, relation)
    Z = np.random.default_rng(2).normal(size=(4, 5))
    W = P[f"layer0.{oracle.RELS[relation]}.weight"]
    expect = oracle.mean_message(Z[0], [Z[1], Z[2], Z[3]], W, "tanh")
    np.testing.assert_allclose(mean_aggregate(g, 0, relation, 0, Z, P, cfg), expect, rtol=0, atol=1e-12)


def test_attention_coefficients_simple():
    cfg, P = setup(d=3, n=3)
    Z = np.random.default_rng(0).normal(size=(3, 3))
    np.testing.assert_allclose(attention_coefficients(star(1), 0, Relation.OUT_POS, 0, Z, P, cfg), [1.0])
    Z[2] = Z[1]
    np.testing.assert_allclose(attention_coefficients(star(2), 0, Relation.OUT_POS, 0, Z, P, cfg), [0.5, 0.5])
    with pytest.raises(ValueError):
        attention_coefficients(star(2), 0, Relation.IN_NEG, 0, Z, P, cfg)


@pytest.mark.parametrize("seed", range(4))
def test_attention_coefficients_match_scalar(seed):
    cfg, P = setup(d=4, n=4, seed=seed)
    Z = np.random.default_rng(seed).normal(size=(4, 4))
    W, a = P["layer0.in_neg.weight"], P["layer0.in_neg.attention"]
    got = attention_coefficients(star(3, Relation.IN_NEG), 0, Relation.IN_NEG, 0, Z, P, cfg)
    np.testing.assert_allclose(got, oracle.attention_alphas(Z[0], [Z[1], Z[2], Z[3]], W, a), rtol=0, atol=1e-12)
    assert abs(got.sum() - 1) < 1e-12


def test_attention_aggregate_cases():
    cfg, P = setup(d=3, n=5, seed=9)
    Z = np.random.default_rng(1).normal(size=(5, 3))
    g = SignedDigraph(5, [], [], [])
    np.testing.assert_array_equal(attention_aggregate(g, 0, Relation.OUT_POS, 0, Z, P, cfg), np.zeros(3))
    one = attention_aggregate(star(1), 0, Relation.OUT_POS, 0, Z, P, cfg)
    np.testing.assert_allclose(one, Z[1] @ P["layer0.out_pos.weight"], atol=1e-15)
    W, a = P["layer0.out_neg.weight"], P["layer0.out_neg.attention"]
    got = attention_aggregate(star(4, Relation.OUT_NEG), 0, Relation.OUT_NEG, 0, Z, P, cfg)
    np.testing.assert_allclose(got, oracle.attention_message(Z[0], list(Z[1:5]), W, a), rtol=0, atol=1e-12)


@pytest.mark.parametrize("aggregator", ["mean", "attention"])
def test_aggregators_ignore_neighbor_order(aggregator):
    cfg, P = setup(d=4, n=6, aggregator=aggregator, seed=2)
    Z = np.random.default_rng(5).normal(size=(6, 4))
    fn = mean_aggregate if aggregator == "mean" else attention_aggregate
    base = fn(star(5), 0, Relation.OUT_POS, 0, Z, P, cfg)
    for s in range(3):
        perm = np.concatenate([[0], 1 + np.random.default_rng(s).permutation(5)])
        # relabel neighbors; the message must not change
        g = SignedDigraph.from_edges([(0, int(perm[v]), 1) for v in range(1, 6)], node_count=6)
        Zp = np.empty_like(Z)
        Zp[perm] = Z
        np.testing.assert_allclose(fn(g, 0, Relation.OUT_POS, 0, Zp, P, cfg), base, atol=1e-14)


def test_combine_zero():
    cfg, P = setup(d=3)
    out = combine(np.zeros(3), [np.zeros(3)] * 4, 0, P, cfg)
    np.testing.assert_array_equal(out, np.zeros(3))


def test_combine_one_dimensional():
    cfg, P = setup(d=1)
    P["layer0.mlp1.weight"][:] = np.array([[1.0], [0.5], [-1.0], [2.0], [0.0]])
    P["layer0.mlp1.bias"][:] = 0.1
    P["layer0.mlp2.weight"][:] = 3.0
    P["layer0.mlp2.bias"][:] = -0.2
    out = combine([0.4], [[1.0], [0.3], [-0.5], [7.0]], 0, P, cfg)
    hidden = np.tanh(0.4 + 0.5 - 0.3 - 1.0 + 0.1)
    assert out[0] == pytest.approx(3.0 * hidden - 0.2, abs=1e-15)


def test_combine_shape_errors():
    cfg, P = setup(d=3)
    with pytest.raises(DimensionError):
        combine(np.zeros(3), [np.zeros(3)] * 3, 0, P, cfg)
    with pytest.raises(DimensionError):
        combine(np.zeros(3), [np.zeros(3)] * 3 + [np.zeros(2)], 0, P, cfg)


@pytest.mark.parametrize("aggregator", ["mean", "attention"])
@pytest.mark.parametrize("seed", range(3))
def test_encode_matches_scalar_oracle(aggregator, seed):
    g = random_graph(8, 20, seed)
    cfg = ModelConfig(dim=3, layers=2, aggregator=aggregator, seed=seed)
    P = init_parameters(cfg, 8)
    Z = encode_all(g, P, cfg)
    np.testing.assert_allclose(Z, oracle.encode(g.edges(), 8, P, 2, aggregator), rtol=0, atol=1e-12)
    assert Z.shape == (8, 3)


@pytest.mark.parametrize("aggregator", ["mean", "attention"])
def test_batch_encode_equals_full(aggregator, backend):
    g = random_graph(60, 250, 1)
    cfg = ModelConfig(dim=6, layers=2, aggregator=aggregator)
    P = init_parameters(cfg, 60)
    full = encode_all(g, P, cfg)
    batch = np.array([3, 17, 17, 42, 0])
    Z, targets = encode(g, P.tensors(requires_grad=False), cfg, batch)
    assert targets.tolist() == [0, 3, 17, 42]
    np.testing.assert_allclose(Z.data, full[targets], rtol=0, atol=1e-10)


def test_isolated_node_depends_only_on_itself():
    cfg = ModelConfig(dim=3, layers=1, aggregator="mean")
    P = init_parameters(cfg, 4)
    g1 = SignedDigraph.from_edges([(1, 2, 1)], node_count=4)
    g2 = SignedDigraph.from_edges([(1, 2, -1), (2, 3, 1), (3, 1, -1)], node_count=4)
    np.testing.assert_array_equal(encode_all(g1, P, cfg)[0], encode_all(g2, P, cfg)[0])
    P2 = P.copy()
    P2["embedding"][1:] += 1.0
    np.testing.assert_array_equal(encode_all(g1, P, cfg)[0], encode_all(g1, P2, cfg)[0])


@pytest.mark.parametrize("aggregator", ["mean", "attention"])
def test_two_hop_reach(aggregator):
    u, v, w = 0, 1, 2
    g = SignedDigraph.from_edges([(u, v, 1), (v, w, 1)])
    cfg = ModelConfig(dim=4, layers=2, aggregator=aggregator)
    P = init_parameters(cfg, 3)
    P2 = P.copy()
    P2["embedding"][w] += 0.5
    assert not np.allclose(encode_all(g, P, cfg)[u], encode_all(g, P2, cfg)[u])
    cfg1 = ModelConfig(dim=4, layers=1, aggregator=aggregator)
    Q = init_parameters(cfg1, 3)
    Q2 = Q.copy()
    Q2["embedding"][w] += 0.5
    np.testing.assert_array_equal(encode_all(g, Q, cfg1)[u], encode_all(g, Q2, cfg1)[u])


def test_receptive_field_locality():
    g = random_graph(40, 60, 4)
    cfg = ModelConfig(dim=4, layers=2)
    P = init_parameters(cfg, 40)
    sets, _ = receptive_sets(g, [5], 2)
    outside = np.setdiff1d(np.arange(40), sets[0])
    P2 = P.copy()
    P2["embedding"][outside] = np.random.default_rng(0).normal(size=(len(outside), 4))
    np.testing.assert_array_equal(encode_all(g, P, cfg)[5], encode_all(g, P2, cfg)[5])


def test_float32_mode():
    g = random_graph(20, 60, 0)
    cfg = ModelConfig(dim=4, dtype="float32")
    Z = encode_all(g, init_parameters(cfg, 20), cfg)
    assert Z.dtype == np.float32


def test_export_round_trip(tmp_path):
    Z = np.random.default_rng(0).normal(size=(7, 20)) * 100
    path = tmp_path / "emb.txt"
    export_embeddings(Z, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 7 and all(len(line.split()) == 21 for line in lines)
    np.testing.assert_allclose(load_embeddings(path), Z, rtol=1e-8)


def test_config_validation():
    for bad in (dict(dim=0), dict(layers=0), dict(aggregator="max"), dict(activation="gelu")):
        with pytest.raises(ValueError):
            ModelConfig(**bad)
