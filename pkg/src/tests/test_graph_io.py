import os
import tempfile

import numpy as np
import pytest

from src.core.errors import ConfigError, GraphFormatError
from src.graph.graph_io import (AttributedGraph, add_isolated_nodes, degree, generate_sbm_attributed,
                                graph_summary, load_cora_format, load_edge_list, save_graph)
from src.utils import logger as log_module


def _write(directory, name, text):
    path = os.path.join(directory, name)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    return path


def test_reversed_edge_is_deduplicated():
    """Reversed pair lines collapse to one undirected edge"""
    with tempfile.TemporaryDirectory() as d:
        edges = _write(d, "g.edges", "0 1\n1 0\n")
        attrs = _write(d, "g.attrs", "1 0\n0 1\n")
        graph = load_edge_list(edges, attrs)
    assert graph.n == 2
    assert graph.num_edges == 1
    assert graph.load_report["duplicates_merged"] == 1
    print("✅ reversed edge dedup test passed")


def test_self_loop_dropped_and_counted():
    with tempfile.TemporaryDirectory() as d:
        edges = _write(d, "g.edges", "0 0\n0 1\n")
        attrs = _write(d, "g.attrs", "1\n1\n")
        graph = load_edge_list(edges, attrs)
    assert graph.num_edges == 1
    assert graph.load_report["self_loops_dropped"] == 1


def test_attribute_row_length_mismatch():
    with tempfile.TemporaryDirectory() as d:
        edges = _write(d, "g.edges", "0 1\n")
        attrs = _write(d, "g.attrs", "1 0 1\n1 0 1 1\n")
        with pytest.raises(GraphFormatError):
            load_edge_list(edges, attrs)


def test_edge_id_out_of_range():
    with tempfile.TemporaryDirectory() as d:
        edges = _write(d, "g.edges", "0 5\n")
        attrs = _write(d, "g.attrs", "1\n1\n")
        with pytest.raises(GraphFormatError):
            load_edge_list(edges, attrs)


def test_unreadable_file():
    with pytest.raises(GraphFormatError):
        load_edge_list("/nonexistent/g.edges", "/nonexistent/g.attrs")


def test_labels_and_unlabeled_nodes():
    with tempfile.TemporaryDirectory() as d:
        edges = _write(d, "g.edges", "0 1\n1 2\n")
        attrs = _write(d, "g.attrs", "1\n1\n1\n")
        labels = _write(d, "g.labels", "0 beta\n2 alpha\n")
        graph = load_edge_list(edges, attrs, labels)
    assert graph.label_names == ("alpha", "beta")
    assert graph.labels.tolist() == [1, -1, 0]
    assert graph.labeled_nodes().tolist() == [0, 2]


def test_cora_format_parse():
    """Ids are sorted, attributes binarised, labels coded by sorted name"""
    content = "31 1 0 2 Theory\n7 0 1 0 Neural\n12 1 1 0 Theory\n"
    cites = "7 31\n12 31\n"
    with tempfile.TemporaryDirectory() as d:
        graph = load_cora_format(_write(d, "c.content", content), _write(d, "c.cites", cites))
    assert graph.n == 3
    assert graph.num_edges == 2
    assert graph.node_ids == ("7", "12", "31")
    np.testing.assert_array_equal(graph.X, [[0, 1, 0], [1, 1, 0], [1, 0, 1]])
    assert graph.label_names == ("Neural", "Theory")
    assert graph.labels.tolist() == [0, 1, 1]
    assert graph.has_edge(0, 2) and graph.has_edge(2, 1)


def test_cora_unknown_citation_dropped():
    content = "1 1 0 A\n2 0 1 B\n"
    cites = "1 2\n99 1\n"
    with tempfile.TemporaryDirectory() as d:
        graph = load_cora_format(_write(d, "c.content", content), _write(d, "c.cites", cites))
    assert graph.num_edges == 1
    assert graph.load_report["unknown_id_citations_dropped"] == 1
    assert graph.load_report["edge_lines"] == 2


def test_cora_empty_content():
    with tempfile.TemporaryDirectory() as d:
        with pytest.raises(GraphFormatError):
            load_cora_format(_write(d, "c.content", ""), _write(d, "c.cites", "1 2\n"))


def test_degree_examples():
    isolated = AttributedGraph.from_pairs(2, [], np.ones((2, 1)))
    assert degree(isolated, 0) == 0
    tri = AttributedGraph.from_pairs(3, [(0, 1), (1, 2), (0, 2)], np.ones((3, 1)))
    assert all(degree(tri, v) == 2 for v in range(3))
    star = AttributedGraph.from_pairs(5, [(0, k) for k in range(1, 5)], np.ones((5, 1)))
    assert degree(star, 0) == 4
    with pytest.raises(ValueError):
        degree(star, 5)


def test_handshake_lemma(sbm_graph):
    assert int(sbm_graph.degrees.sum()) == 2 * sbm_graph.num_edges


def test_sbm_forced_topology():
    graph = generate_sbm_attributed(3, 2, 1.0, 0.0, 4, 0.0, seed=3)
    assert sorted(map(tuple, graph.edges.tolist())) == [(0, 1), (0, 2), (1, 2), (3, 4), (3, 5), (4, 5)]
    assert graph_summary(graph)["components"] == 2


def test_sbm_noise_free_attributes_match_block():
    graph = generate_sbm_attributed(5, 2, 0.5, 0.1, 6, 0.0, seed=1)
    for block in range(2):
        rows = graph.X[graph.labels == block]
        assert np.all(rows == rows[0])


def test_sbm_determinism():
    a = generate_sbm_attributed(10, 3, 0.4, 0.05, 12, 0.2, seed=7)
    b = generate_sbm_attributed(10, 3, 0.4, 0.05, 12, 0.2, seed=7)
    np.testing.assert_array_equal(a.edges, b.edges)
    np.testing.assert_array_equal(a.X, b.X)


def test_sbm_rejects_empty_and_bad_probabilities():
    with pytest.raises(ConfigError):
        generate_sbm_attributed(0, 2, 0.5, 0.1, 4, 0.0, seed=0)
    with pytest.raises(ConfigError):
        generate_sbm_attributed(3, 2, 1.5, 0.1, 4, 0.0, seed=0)


def test_save_then_load_round_trip(sbm_graph):
    with tempfile.TemporaryDirectory() as d:
        paths = save_graph(sbm_graph, d, "sbm")
        loaded = load_edge_list(paths["edges"], paths["attrs"], paths["labels"], paths["ids"])
    np.testing.assert_array_equal(loaded.edges, sbm_graph.edges)
    np.testing.assert_array_equal(loaded.X, sbm_graph.X)
    np.testing.assert_array_equal(loaded.labels, sbm_graph.labels)
    assert loaded.node_ids == sbm_graph.node_ids
    print("✅ graph round trip test passed")


def test_add_isolated_nodes(triangle):
    graph = add_isolated_nodes(triangle, np.array([[1.0, 0.0, 0.0]]))
    assert graph.n == 4
    assert graph.num_edges == 3
    assert degree(graph, 3) == 0
    assert graph_summary(graph)["isolated_nodes"] == 1


def test_graph_is_read_only(triangle):
    with pytest.raises(ValueError):
        triangle.edges[0, 0] = 2


def test_invalid_edges_rejected():
    with pytest.raises(GraphFormatError):
        AttributedGraph(n=2, edges=np.array([[1, 0]]), X=np.ones((2, 1)))
    with pytest.raises(GraphFormatError):
        AttributedGraph(n=2, edges=np.array([[0, 1]]), X=-np.ones((2, 1)))


def test_graph_summary(path3):
    summary = graph_summary(path3)
    assert summary["nodes"] == 3
    assert summary["edges"] == 2
    assert summary["components"] == 1
    assert summary["connected"]
    assert summary["average_degree"] == pytest.approx(4 / 3)
    assert summary["density"] == pytest.approx(2 / 3)
    assert summary["average_clustering"] == 0.0
    assert summary["average_distance"] == pytest.approx(4 / 3)


def test_graph_summary_disconnected(triangle):
    summary = graph_summary(add_isolated_nodes(triangle, np.array([[1.0, 0.0, 0.0]])))
    assert summary["components"] == 2 and not summary["connected"]
    assert summary["largest_component"] == 3
    assert summary["average_clustering"] == pytest.approx(0.75)
    assert summary["average_distance"] == pytest.approx(1.0)
    assert summary["density"] == pytest.approx(3 / 6)


def test_eleven_blocks_keep_label_order():
    graph = generate_sbm_attributed(3, 11, 0.5, 0.0, 22, 0.0, seed=0)
    with tempfile.TemporaryDirectory() as d:
        paths = save_graph(graph, d, "sbm11")
        loaded = load_edge_list(paths["edges"], paths["attrs"], paths["labels"], paths["ids"])
    np.testing.assert_array_equal(loaded.labels, graph.labels)
    assert loaded.label_names == tuple(str(b) for b in range(11))


def test_text_labels_sort_as_strings():
    with tempfile.TemporaryDirectory() as d:
        attrs = _write(d, "g.attrs", "1 0\n0 1\n1 1\n")
        edges = _write(d, "g.edges", "0 1\n")
        labels = _write(d, "g.labels", "0 b\n1 a10\n2 a9\n")
        graph = load_edge_list(edges, attrs, labels)
    assert graph.label_names == ("a10", "a9", "b")
    assert graph.labels.tolist() == [2, 0, 1]


def test_format_errors_are_logged():
    with tempfile.TemporaryDirectory() as d:
        attrs = _write(d, "g.attrs", "1 0\n0 1\n")
        edges = _write(d, "g.edges", "0 7\n")
        with pytest.raises(GraphFormatError, match="line 1"):
            load_edge_list(edges, attrs)
        with open(log_module._daily_log_file("errors"), encoding="utf-8") as f:
            assert "Node id out of range" in f.read()
