import numpy as np
import pytest

from coldstart_research._scheme import EncoderError
from coldstart_research.autodiff import ParamStore, grad_check, ops
from coldstart_research.data import Interaction, build_graph
from coldstart_research.data.neighborhood import Subgraph
from coldstart_research.models import (GnnEncoder, MetaAggregator, PathTransformer, ProjectionHead,
                                       compute_meta_embeddings, gnn_forward, meta_batch, transformer_forward)
from coldstart_research.paths import MASK_TOKEN
from coldstart_research.sampling import sample_random


def _rng(seed=0):
    return np.random.default_rng(seed)


@pytest.mark.parametrize("seed", range(5))
def test_meta_aggregator_ignores_neighbor_order(seed):
    rng = _rng(seed)
    agg = MetaAggregator(ParamStore(), "Rg/meta", 4, rng)
    embs = rng.normal(size=(5, 4))
    perm = rng.permutation(5)
    assert np.max(np.abs(agg(ops.as_tensor(embs)).value - agg(ops.as_tensor(embs[perm])).value)) <= 1e-10


def test_meta_batch_keeps_input_order():
    rng = _rng(1)
    agg = MetaAggregator(ParamStore(), "m", 4, rng)
    table = ops.as_tensor(rng.normal(size=(10, 4)))
    sets = [np.array([1, 2, 3]), np.array([4]), np.array([5, 6, 7]), np.array([8, 9])]
    batched = meta_batch(agg, table, sets).value
    for row, ids in zip(batched, sets):
        assert np.allclose(row, agg(ops.embed_lookup(table, ids)).value, atol=1e-12)
    with pytest.raises(EncoderError):
        meta_batch(agg, table, [np.array([1]), np.zeros(0, dtype=np.int64)])


def test_meta_embeddings_zero_for_isolated_nodes():
    graph = build_graph([Interaction(0, 0), Interaction(1, 0)], num_users=3, num_items=2)
    agg = MetaAggregator(ParamStore(), "m", 4, _rng())
    metas = compute_meta_embeddings(graph, _rng(2).normal(size=(graph.num_nodes, 4)), agg, k=2, seed=0)
    assert np.all(metas[2] == 0.0)
    assert np.all(metas[graph.item_node(1)] == 0.0)
    assert np.any(metas[0] != 0.0)


def test_meta_aggregator_gradients():
    rng = _rng(3)
    store = ParamStore()
    agg = MetaAggregator(store, "m", 3, rng)
    embs = rng.normal(size=(2, 4, 3))
    weights = rng.normal(size=(2, 3))
    report = grad_check(lambda: ops.sum(agg(ops.as_tensor(embs)) * weights), store)
    assert report.passed, report.table


def _gnn_setup(graph, dim=3, n_layers=2, seed=0):
    rng = _rng(seed)
    store = ParamStore()
    table = store.embedding("emb", graph.num_nodes, dim, rng, scale=0.5)
    encoder = GnnEncoder(store, "Rg/gnn", dim, n_layers, rng)
    meta = rng.normal(size=(graph.num_nodes, dim))
    return store, table, encoder, meta


def test_gnn_ignores_nodes_outside_the_tree(dense_graph):
    store, table, encoder, meta = _gnn_setup(dense_graph, n_layers=3)
    sub = sample_random(dense_graph, 0, 2, 3, seed=0)
    before = gnn_forward(sub, encoder, meta, table.value).value
    outside = np.array(sorted(set(range(dense_graph.num_nodes)) - sub.nodes()))
    assert len(outside)
    noisy_table, noisy_meta = table.value.copy(), meta.copy()
    noisy_table[outside] += 5.0
    noisy_meta[outside] -= 5.0
    after = gnn_forward(sub, encoder, noisy_meta, noisy_table).value
    assert np.array_equal(before, after)


def test_gnn_batch_matches_single_targets(dense_graph):
    store, table, encoder, meta = _gnn_setup(dense_graph)
    subs = [sample_random(dense_graph, t, 2, 2, seed=t) for t in (0, 5, 13)]
    batched = encoder(subs, table, meta).value
    for row, sub in zip(batched, subs):
        assert np.allclose(row, gnn_forward(sub, encoder, meta, table.value).value, atol=1e-12)


def test_gnn_single_neighbor_chain():
    rng = _rng(8)
    store = ParamStore()
    encoder = GnnEncoder(store, "g", 2, 2, rng)
    store["g/W1"].value[...] = np.vstack([np.eye(2) * 0.5, np.eye(2), np.eye(2) * 0.25])
    store["g/W2"].value[...] = np.eye(2) * 1.5
    table = rng.normal(size=(3, 2))
    meta = rng.normal(size=(3, 2))
    chain = Subgraph(0, (np.array([0]), np.array([1]), np.array([2])), (np.array([-1]), np.array([0]), np.array([0])))
    hidden = np.tanh(0.5 * meta[1] + table[1] + 0.25 * table[2])
    expected = np.tanh(1.5 * hidden)
    assert np.allclose(gnn_forward(chain, encoder, meta, table).value, expected, atol=1e-12)


def test_gnn_rejects_empty_first_layer(dense_graph):
    store, table, encoder, meta = _gnn_setup(dense_graph)
    empty = np.zeros(0, dtype=np.int64)
    lonely = Subgraph(0, (np.array([0]), empty), (np.array([-1]), empty))
    with pytest.raises(EncoderError):
        encoder([lonely], table, meta)
    with pytest.raises(EncoderError):
        GnnEncoder(ParamStore(), "g", 3, 0, _rng())
    with pytest.raises(EncoderError):
        GnnEncoder(ParamStore(), "g", 3, 2, _rng(), activation="gelu")


def test_gnn_gradients(small_graph):
    store, table, encoder, meta = _gnn_setup(small_graph)
    subs = [sample_random(small_graph, t, 2, 2, seed=0) for t in (0, 4)]
    weights = _rng(4).normal(size=(2, 3))
    report = grad_check(lambda: ops.sum(encoder(subs, table, meta) * weights), store, floor=1e-6)
    assert report.passed, report.table


def _transformer(dim=4, max_len=6, seed=0):
    rng = _rng(seed)
    store = ParamStore()
    table = store.embedding("emb", 10, dim, rng, scale=0.5)
    return store, table, PathTransformer(store, "Rp/tr", dim, max_len, n_blocks=1, n_heads=2, rng=rng)


def test_masked_position_hides_original_node():
    store, table, tr = _transformer()
    tokens = np.array([[1, 6, MASK_TOKEN, 7]])
    before = tr.encode(tokens, table).value
    noisy = table.value.copy()
    # node 2 sat under the mask and appears nowhere else
    noisy[2] += 3.0
    after = tr.encode(tokens, ops.as_tensor(noisy)).value
    assert np.array_equal(before, after)
    changed = tr.encode(np.array([[1, 6, 2, 7]]), table).value
    assert not np.allclose(before, changed)


def test_attention_weights_are_distributions():
    store, table, tr = _transformer()
    _, attention = tr.encode(np.array([[1, 6, 2, 7, 3], [0, 5, 4, 8, MASK_TOKEN]]), table, return_attention=True)
    for block in attention:
        for weights in block:
            assert weights.shape == (2, 5, 5)
            assert np.allclose(weights.value.sum(axis=-1), 1.0, atol=1e-12)


def test_read_out_matches_single_paths():
    store, table, tr = _transformer()
    paths = [[1, 6, 2], [0, 5, 4, 8], [3, 7, 1]]
    positions = [1, 3, 0]
    rows = tr.read_out(paths, positions, table).value
    for row, path, pos in zip(rows, paths, positions):
        assert np.allclose(row, transformer_forward(path, tr, table.value).value[pos], atol=1e-12)


def test_transformer_errors():
    store, table, tr = _transformer(max_len=4)
    with pytest.raises(EncoderError):
        tr.encode(np.array([[1, 2, 3, 4, 5]]), table)
    with pytest.raises(EncoderError):
        tr.encode(np.array([[1, 12]]), table)
    with pytest.raises(EncoderError):
        tr.encode(np.array([[1, -3]]), table)
    with pytest.raises(EncoderError):
        PathTransformer(ParamStore(), "t", 5, 4, n_heads=2)


def test_transformer_gradients():
    store, table, tr = _transformer(dim=4, max_len=3, seed=5)
    weights = _rng(6).normal(size=(1, 3, 4))
    report = grad_check(lambda: ops.sum(tr.encode(np.array([[1, MASK_TOKEN, 7]]), table) * weights), store,
                        floor=1e-6)
    assert report.passed, report.table


def test_projection_gradients():
    rng = _rng(7)
    store = ParamStore()
    head = ProjectionHead(store, "Cg/proj", 3, rng)
    x = store.add("x", rng.normal(size=(4, 3)))
    weights = rng.normal(size=(4, 3))
    report = grad_check(lambda: ops.sum(head(x) * weights), store)
    assert report.passed, report.table
