import json

import pytest

from regae.datasets import (DataError, dataset_stats, format_edge_list, generate_grid_dataset, grid_graph,
                            load_tu_dataset, read_edge_list, split_counts, split_dataset,
                            split_from_manifest)
from regae.graph import Graph


def test_grid_dataset_statistics():
    stats = dataset_stats(generate_grid_dataset())
    assert stats == {"size": 49, "avg_nodes": 25.0, "max_nodes": 64, "avg_edges": 40.0}


@pytest.mark.parametrize("p,q,n,e", [(2, 2, 4, 4), (3, 4, 12, 17), (8, 8, 64, 112)])
def test_grid_sizes(p, q, n, e):
    g = grid_graph(p, q)
    assert (g.n, g.num_edges) == (n, e)
    assert e == p * (q - 1) + q * (p - 1)


def test_edge_list_round_trip(tmp_path):
    g = grid_graph(3, 2)
    f = tmp_path / "g.txt"
    f.write_text(format_edge_list(g))
    assert read_edge_list(f) == g
    assert f.read_text().splitlines()[0] == "6"


def test_edge_list_errors(tmp_path):
    f = tmp_path / "bad.txt"
    f.write_text("3\n0 1\n1 x\n")
    with pytest.raises(DataError, match=r"bad.txt:3"):
        read_edge_list(f)
    f.write_text("3\n0 5\n")
    with pytest.raises(DataError, match=r":2"):
        read_edge_list(f)


def write_tu(root, name, edges, indicator, labels):
    root.mkdir(exist_ok=True)
    (root / f"{name}_A.txt").write_text("".join(f"{u}, {v}\n" for u, v in edges))
    (root / f"{name}_graph_indicator.txt").write_text("".join(f"{g}\n" for g in indicator))
    (root / f"{name}_graph_labels.txt").write_text("".join(f"{c}\n" for c in labels))


def test_tu_collapses_both_directions(tmp_path):
    write_tu(tmp_path, "T", [(1, 2), (2, 1)], [1, 1], [0])
    [(g, label)] = load_tu_dataset(tmp_path, "T")
    assert g == Graph(2, frozenset({(0, 1)}))
    assert label == 0


def test_tu_multiple_graphs_and_self_loops(tmp_path, caplog):
    edges = [(1, 2), (2, 3), (3, 3), (4, 5), (5, 4)]
    write_tu(tmp_path, "T", edges, [1, 1, 1, 2, 2], [1, -1])
    out = load_tu_dataset(tmp_path, "T")
    assert [g.n for g, _ in out] == [3, 2]
    assert out[0][0].edges == {(0, 1), (1, 2)}
    assert out[1][0].edges == {(0, 1)}
    assert [c for _, c in out] == [1, -1]
    assert "self-loops" in caplog.text


def test_tu_missing_file(tmp_path):
    write_tu(tmp_path, "T", [(1, 2)], [1, 1], [0])
    (tmp_path / "T_graph_labels.txt").unlink()
    with pytest.raises(DataError, match="missing file"):
        load_tu_dataset(tmp_path, "T")


def test_tu_cross_graph_edge_reports_line(tmp_path):
    write_tu(tmp_path, "T", [(1, 2), (2, 3)], [1, 1, 2], [0, 0])
    with pytest.raises(DataError, match=r"T_A.txt:2"):
        load_tu_dataset(tmp_path, "T")


def test_tu_non_integer_token(tmp_path):
    write_tu(tmp_path, "T", [(1, 2)], [1, 1], [0])
    (tmp_path / "T_A.txt").write_text("1, 2\n2, b\n")
    with pytest.raises(DataError, match=r"T_A.txt:2"):
        load_tu_dataset(tmp_path, "T")


def test_tu_graph_without_vertices_rejected(tmp_path):
    write_tu(tmp_path, "T", [(1, 2)], [1, 1], [0, 1])
    with pytest.raises(DataError, match="no vertices"):
        load_tu_dataset(tmp_path, "T")


def test_split_counts_100():
    split = split_dataset([Graph(2)] * 100, augmentation_factor=0, seed=1)
    assert (len(split.train), len(split.valid), len(split.test)) == (70, 15, 15)


def test_split_grid_n99():
    assert split_counts(49, (0.7, 0.15, 0.15)) == (34, 7, 8)
    split = split_dataset(generate_grid_dataset(range(2, 5)), augmentation_factor=3, seed=0)
    assert len(split.train) == split_counts(9, (0.7, 0.15, 0.15))[0] * 4


def test_split_grid_train_size_3400():
    # 34 base graphs, each with 99 copies; count without building 3400 orderings twice
    graphs = generate_grid_dataset()
    split = split_dataset(graphs, augmentation_factor=99, seed=0)
    assert len(split.train) == 3400


def test_split_subsets_divisible_by_ten():
    split = split_dataset(generate_grid_dataset(), augmentation_factor=9, seed=3)
    for subset in (split.train, split.valid, split.test):
        assert len(subset) % 10 == 0


def test_split_partition_and_manifest_recreation():
    graphs = generate_grid_dataset(range(2, 6))
    split = split_dataset(graphs, augmentation_factor=2, seed=5)
    ids = split.base_ids
    all_ids = ids["train"] + ids["valid"] + ids["test"]
    assert sorted(all_ids) == list(range(len(graphs)))
    manifest = json.loads(json.dumps(split.manifest()))
    again = split_from_manifest(graphs, manifest)
    assert again.train == split.train and again.test == split.test


def test_split_bad_ratios():
    with pytest.raises(ValueError):
        split_dataset([Graph(2)] * 10, ratios=(0.5, 0.2, 0.2))
    with pytest.raises(ValueError):
        split_dataset([])
