from collections import Counter

import numpy as np
import pytest
from scipy.stats import chisquare

from coldstart_research._scheme import AugmentationError, PathError
from coldstart_research.data import Interaction, build_graph, mask_neighborhood
from coldstart_research.paths import (MASK_TOKEN, GraphAugmentor, Path, augment_path, augment_subgraph,
                                      dump_paths, generate_paths, generate_positioned_paths, mask_path)
from coldstart_research.sampling import sample_random


def test_walks_alternate_and_have_requested_length(dense_graph):
    paths = generate_paths(dense_graph, 0, 6, 5, seed=1)
    assert len(paths) == 5
    for p in paths:
        assert len(p) == 6
        assert p.nodes[0] == 0
        assert p.alternates(dense_graph.num_users)
        for a, b in zip(p.nodes, p.nodes[1:]):
            assert dense_graph.has_edge(a, b)
    assert [p.nodes for p in paths] == [p.nodes for p in generate_paths(dense_graph, 0, 6, 5, seed=1)]


def test_positioned_paths_place_target(dense_graph):
    result = generate_positioned_paths(dense_graph, 3, 6, seed=2)
    assert not result.incomplete
    assert [p.anchor for p in result.paths] == list(range(6))
    for p in result.paths:
        assert p.nodes[p.anchor] == 3
        assert p.alternates(dense_graph.num_users)


def test_walks_inside_a_tree_stay_on_tree_edges(dense_graph):
    tree = sample_random(dense_graph, 0, 2, 2, seed=0)
    allowed = {frozenset(e) for e in tree.tree_edges()}
    for p in generate_paths(tree, 0, 5, 4, seed=3):
        for a, b in zip(p.nodes, p.nodes[1:]):
            assert frozenset((a, b)) in allowed


def test_isolated_start_and_short_length():
    graph = build_graph([], num_users=2, num_items=2)
    with pytest.raises(PathError):
        generate_paths(graph, 0, 4, 1, seed=0)
    with pytest.raises(PathError):
        generate_positioned_paths(graph, 0, 1)


def test_single_edge_component_never_dead_ends():
    graph = build_graph([Interaction(0, 0)])
    path = generate_paths(graph, 0, 4, 1, seed=0)[0]
    assert path.nodes == (0, 1, 0, 1)
    assert not path.truncated


def test_mask_path_renders_token():
    path = Path((0, 5, 1, 6), origin=0)
    masked = mask_path(path, 2)
    assert masked.rendered == (0, 5, MASK_TOKEN, 6)
    assert masked.original == 1
    assert masked.unmask() == path
    with pytest.raises(PathError):
        mask_path(path, 4)


def test_dump_uses_side_local_ids():
    text = dump_paths([Path((0, 5, 1), origin=0)], num_users=4)
    assert text == "u:0 i:1 u:1\n"


@pytest.mark.parametrize("ratio", [0.2, 0.5])
def test_subgraph_deletion_layer_sizes(dense_graph, ratio):
    sub = mask_neighborhood(dense_graph, 0, 3, 3, seed=4)
    view = augment_subgraph(sub, "delete", ratio, seed=9)
    assert view.layers[0].tolist() == [0]
    for l in range(1, 4):
        n = len(sub.layers[l])
        assert len(view.layers[l]) <= n - int(np.floor(ratio * n + 1e-9))
        kept = set(view.layers[l].tolist())
        assert kept <= set(sub.layers[l].tolist())
    for l in range(2, 4):
        for j in range(len(view.layers[l])):
            assert view.parent_node(l, j) in set(view.layers[l - 1].tolist())


def test_subgraph_substitution_keeps_shape(dense_graph):
    sub = mask_neighborhood(dense_graph, 0, 3, 3, seed=4)
    view = augment_subgraph(sub, "substitute", 0.5, seed=9, graph=dense_graph)
    assert [len(layer) for layer in view.layers] == [len(layer) for layer in sub.layers]
    assert view.target == sub.target
    for l in range(1, 4):
        for j, node in enumerate(view.layers[l].tolist()):
            assert dense_graph.has_edge(view.parent_node(l, j), node)
    with pytest.raises(AugmentationError):
        augment_subgraph(sub, "substitute", 0.5, seed=9)


def test_zero_ratio_is_identity(dense_graph):
    sub = mask_neighborhood(dense_graph, 0, 3, 2, seed=4)
    assert augment_subgraph(sub, "delete", 0.0, seed=1) is sub
    path = Path((0, 12, 1, 13), origin=0)
    assert augment_path(path, "substitute", 0.0, seed=1, graph=dense_graph) is path


def test_both_composes_deletion_then_substitution(dense_graph):
    sub = mask_neighborhood(dense_graph, 0, 3, 3, seed=4)
    view = GraphAugmentor(dense_graph, "both", delete_ratio=0.2, substitute_ratio=0.4).subgraph(sub, seed=5)
    for l in range(1, 4):
        n = len(sub.layers[l])
        assert len(view.layers[l]) <= n - int(np.floor(0.2 * n + 1e-9))


@pytest.mark.parametrize("anchor", range(6))
def test_path_deletion_keeps_anchor(dense_graph, anchor):
    path = generate_positioned_paths(dense_graph, 2, 6, seed=0).paths[anchor]
    view = augment_path(path, "delete", 0.4, seed=anchor)
    assert len(view) == 6 - 2
    assert view.nodes[view.anchor] == 2


def test_path_substitution_keeps_anchor_and_length(dense_graph):
    path = generate_positioned_paths(dense_graph, 2, 6, seed=0).paths[3]
    view = augment_path(path, "substitute", 0.5, seed=1, graph=dense_graph)
    assert len(view) == 6
    assert view.anchor == 3
    assert view.nodes[3] == 2
    for p in range(1, 6):
        if view.nodes[p] != path.nodes[p]:
            assert dense_graph.has_edge(view.nodes[p - 1], view.nodes[p])


def test_path_augmentation_errors(dense_graph):
    path = Path((0, 12), origin=0)
    with pytest.raises(AugmentationError):
        augment_path(path, "delete", 1.0, seed=0)
    with pytest.raises(AugmentationError):
        augment_path(path, "shuffle", 0.2, seed=0)
    with pytest.raises(AugmentationError):
        GraphAugmentor(dense_graph, "delete", delete_ratio=1.5)


def test_substitution_never_reinserts_target_or_grandparent():
    # complete 5x5 bipartite graph: every parent has replacements other than its own parent and the target
    graph = build_graph([Interaction(u, i) for u in range(5) for i in range(5)], 5, 5)
    for seed in range(50):
        sub = mask_neighborhood(graph, 0, 2, 3, seed=seed)
        view = augment_subgraph(sub, "substitute", 1.0, seed=seed, graph=graph)
        for l in range(1, 4):
            assert 0 not in view.layers[l].tolist()
            for j, node in enumerate(view.layers[l].tolist()):
                assert graph.has_edge(view.parent_node(l, j), node)
                if l >= 2:
                    assert node != view.parent_node(l - 1, int(view.parents[l][j]))


def test_four_cycle_walks_are_uniform():
    # users 0, 1 and items 2, 3 with every edge: 8 equally likely walks of 4 nodes from user 0
    graph = build_graph([Interaction(u, i) for u in range(2) for i in range(2)], 2, 2)
    paths = generate_paths(graph, 0, 4, 10000, seed=0)
    counts = Counter(p.nodes for p in paths)
    assert len(counts) == 8
    assert chisquare(list(counts.values())).pvalue > 0.001
