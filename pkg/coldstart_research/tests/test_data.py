import numpy as np
import pandas as pd
import pytest

from coldstart_research._scheme import DatasetError, EmptyDatasetError, InteractionParseError, SamplingError, SplitError
from coldstart_research.config import TOY_DATASET
from coldstart_research.data import (ITEM, USER, Interaction, build_graph, build_splits, extrinsic_split,
                                     first_order_sample, intrinsic_split, load_interactions, make_block_dataset,
                                     mask_neighborhood, meta_split, subsample_interactions)
from coldstart_research.data.reader import _LineReader
from coldstart_research.data.toy import write_tsv


def test_ml1m_single_line(tmp_path):
    path = tmp_path / "ratings.dat"
    path.write_text("1::2::5::978300760\n", encoding="utf-8")
    table = load_interactions(path, "ml1m")
    assert (table.num_users, table.num_items, len(table)) == (1, 1, 1)
    assert table.interactions() == [Interaction(0, 0, 978300760)]


def test_duplicate_pair_keeps_latest_timestamp(tmp_path):
    path = tmp_path / "dup.tsv"
    path.write_text("u1\ti1\t100\nu1\ti1\t300\nu1\ti1\t200\nu2\ti1\t50\n", encoding="utf-8")
    table = load_interactions(path)
    assert len(table) == 2
    assert table.frame.loc[table.frame["user_id"] == 0, "timestamp"].tolist() == [300]


def test_numeric_ids_remap_in_numeric_order(tmp_path):
    path = tmp_path / "num.tsv"
    path.write_text("10\t3\n9\t3\n100\t4\n", encoding="utf-8")
    table = load_interactions(path)
    assert table.user_map["original"].tolist() == ["9", "10", "100"]
    assert not table.has_timestamps


def test_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "bad.dat"
    path.write_text("1::2::5::978300760\n1::3::5\n", encoding="utf-8")
    with pytest.raises(InteractionParseError) as info:
        load_interactions(path, "ml1m")
    assert info.value.line_no == 2


def test_empty_and_missing_files(tmp_path):
    empty = tmp_path / "empty.tsv"
    empty.write_text("\n", encoding="utf-8")
    with pytest.raises(EmptyDatasetError):
        load_interactions(empty)
    with pytest.raises(DatasetError):
        load_interactions(tmp_path / "missing.tsv")
    with pytest.raises(DatasetError):
        load_interactions(empty, "csv")


def test_build_graph_degrees_and_symmetry():
    graph = build_graph([Interaction(0, 0), Interaction(0, 1), Interaction(1, 1)])
    assert graph.degree(0) == 2
    assert graph.degree(graph.num_users + 1) == 2
    for node in range(graph.num_nodes):
        for other in graph.neighbors(node).tolist():
            assert graph.has_edge(other, node)
            assert graph.is_user(node) != graph.is_user(other)
    assert graph.incidence.toarray().tolist() == [[1.0, 1.0], [0.0, 1.0]]


def test_empty_graph():
    graph = build_graph([], num_users=3, num_items=2)
    assert graph.num_edges == 0
    assert graph.degrees.tolist() == [0] * 5
    assert graph.sparsity == 0.0


def test_meta_split_is_strict():
    interactions = [Interaction(0, i) for i in range(30)] + [Interaction(1, i) for i in range(25)]
    graph = build_graph(interactions)
    split = meta_split(graph, USER, 25)
    assert split.d_t.tolist() == [0]
    assert split.d_n.tolist() == [1]
    everyone = meta_split(graph, USER, 0)
    assert everyone.d_t.tolist() == [0, 1]
    with pytest.raises(SplitError):
        meta_split(graph, "group", 1)


def test_meta_split_empty_side():
    with pytest.raises(SplitError):
        meta_split(build_graph([], num_users=0, num_items=2), USER, 1)


def test_intrinsic_split_sizes_and_determinism():
    graph = build_graph([Interaction(u, i) for u in range(10) for i in range(3)])
    split = meta_split(graph, USER, 1)
    train, test = intrinsic_split(split, 0.7, seed=5)
    assert (len(train), len(test)) == (7, 3)
    assert not set(train) & set(test)
    again, _ = intrinsic_split(split, 0.7, seed=5)
    assert train.tolist() == again.tolist()
    single = meta_split(build_graph([Interaction(0, 0), Interaction(0, 1)]), USER, 1)
    with pytest.raises(SplitError):
        intrinsic_split(single, 0.7, seed=0)


def test_extrinsic_split_is_chronological():
    interactions = [Interaction(0, i, ts) for i, ts in zip(range(10), [5, 3, 9, 1, 7, 2, 8, 6, 4, 10])]
    graph = build_graph(interactions)
    split = extrinsic_split(graph, np.array([0]), 0.2)
    assert split.train_n["chrono"].tolist() == [1, 2]
    assert len(split.test_n) == 8
    assert split.test_n["chrono"].min() > split.train_n["chrono"].max()
    assert split.dropped == 0


def test_extrinsic_split_drops_single_interaction_users():
    graph = build_graph([Interaction(0, 0), Interaction(1, 0), Interaction(1, 1)])
    split = extrinsic_split(graph, np.array([0, 1]), 0.2)
    assert split.dropped == 1
    assert set(split.train_n["user"]) == {1}


def test_masked_neighborhood_layer_budget(dense_graph):
    sub = mask_neighborhood(dense_graph, 0, k=2, l_max=3, seed=1)
    for l in range(1, 4):
        assert len(sub.layers[l]) <= 2 ** l
        for j, node in enumerate(sub.layers[l].tolist()):
            assert dense_graph.has_edge(sub.parent_node(l, j), node)
    with pytest.raises(SamplingError):
        mask_neighborhood(dense_graph, 0, k=0, l_max=2, seed=1)


def test_first_order_sample_is_stable(dense_graph):
    node = int(np.argmax(dense_graph.degrees))
    first = first_order_sample(dense_graph, node, 3, seed=4)
    assert len(first) == 3
    assert first.tolist() == sorted(first.tolist())
    assert first.tolist() == first_order_sample(dense_graph, node, 3, seed=4).tolist()
    assert set(first.tolist()) <= set(dense_graph.neighbors(node).tolist())


def test_toy_splits_protocol():
    table = load_interactions(TOY_DATASET)
    assert table.num_users == 200
    assert table.num_items == 100
    graph = table.graph()
    splits = build_splits(graph, 25, 15, 0.7, 0.2, 3, seed=0)
    assert len(splits.user_meta.d_t) + len(splits.user_meta.d_n) == 200
    assert set(splits.cold_users.tolist()) <= set(splits.user_meta.d_n.tolist())
    working = splits.working
    for user, item in splits.extrinsic.test_n[["user", "item"]].itertuples(index=False):
        assert not working.has_edge(user, item)
    for user, item in splits.extrinsic.train_n[["user", "item"]].itertuples(index=False):
        assert working.has_edge(user, item)
    for user in splits.test_t[USER].tolist():
        assert working.degree(user) <= 3
    for side in (USER, ITEM):
        assert not set(splits.train_t[side].tolist()) & set(splits.test_t[side].tolist())


def test_split_manifests_reload():
    from coldstart_research.data.splits import ExperimentSplits
    graph = load_interactions(TOY_DATASET).graph()
    splits = build_splits(graph, 25, 15, 0.7, 0.2, 3, seed=1)
    reloaded = ExperimentSplits.from_manifests(graph, splits.manifests(), (25, 15))
    assert reloaded.targets("train").tolist() == splits.targets("train").tolist()
    assert reloaded.working.num_edges == splits.working.num_edges


def test_subsample_keeps_whole_users():
    table = load_interactions(TOY_DATASET)
    sub = subsample_interactions(table, 0.1, seed=3)
    assert sub.num_users == 20
    assert subsample_interactions(table, 0.1, seed=3).frame.equals(sub.frame)
    assert subsample_interactions(table, 1.0, seed=3) is table


def test_block_dataset_round_trip_through_reader(tmp_path):
    frame = make_block_dataset(n_users=40, n_items=20, n_blocks=2, seed=1)
    assert isinstance(frame, pd.DataFrame)
    table = load_interactions(write_tsv(frame, tmp_path / "toy.tsv"))
    assert table.num_users == 40
    assert table.has_timestamps


def test_line_reader_needs_a_format():
    with pytest.raises(TypeError):
        _LineReader("ratings.dat")
