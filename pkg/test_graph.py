import numpy as np
import pytest

from core.errors import ContractError, EdgeListParseError, EmptyGraphError
from core.graph import (
    AdjacencyMatrix, degrees, is_connected, largest_component, load_edge_list, save_edge_list,
)
from conftest import edges_graph


def write(tmp_path, text, name="edges.txt"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_load_drops_loops_and_duplicates(tmp_path):
    path = write(tmp_path, "# header\n0 1\n1 0\n1 1\n1 2 0.5\n\n2 0  # trailing comment\n")
    graph = load_edge_list(path)

    assert graph.n == 3
    assert graph.edge_count == 3
    assert graph.ingest.self_loops_dropped == 1
    assert graph.ingest.duplicates_dropped == 1
    assert graph.ingest.lines_read == 5
    for i in range(graph.n):
        assert i not in graph.neighbors(i)
        assert np.all(np.diff(graph.neighbors(i)) > 0)


def test_load_relabels_sparse_ids(tmp_path):
    graph = load_edge_list(write(tmp_path, "10 30\n30 20\n"))
    assert graph.n == 3
    assert graph.labels.tolist() == [10, 20, 30]
    assert graph.upper_edges().tolist() == [[0, 2], [1, 2]]


def test_one_based_ids(tmp_path):
    graph = load_edge_list(write(tmp_path, "1 2\n2 3\n"), one_based=True)
    assert graph.n == 3
    with pytest.raises(EdgeListParseError):
        load_edge_list(write(tmp_path, "0 1\n", "zero.txt"), one_based=True)


def test_parse_error_names_line(tmp_path):
    path = write(tmp_path, "0 1\n1 x\n")
    with pytest.raises(EdgeListParseError) as info:
        load_edge_list(path)
    assert info.value.line == 2

    with pytest.raises(EdgeListParseError):
        load_edge_list(write(tmp_path, "0 1\n7\n", "short.txt"))


def test_empty_inputs(tmp_path):
    with pytest.raises(EmptyGraphError):
        load_edge_list(write(tmp_path, "# nothing here\n"))
    with pytest.raises(EmptyGraphError):
        load_edge_list(write(tmp_path, "3 3\n", "loops.txt"))


def test_save_is_canonical(tmp_path):
    graph = load_edge_list(write(tmp_path, "2 0\n1 0\n2 1\n0 2\n"))
    out = tmp_path / "canonical.txt"
    save_edge_list(graph, out)
    assert out.read_text() == "0 1\n0 2\n1 2\n"

    again = load_edge_list(out)
    assert np.array_equal(again.indptr, graph.indptr)
    assert np.array_equal(again.indices, graph.indices)


def test_storage_is_read_only(c4):
    with pytest.raises(ValueError):
        c4.indices[0] = 3


def test_degrees(k5):
    profile = degrees(k5)
    assert profile.degrees.tolist() == [4] * 5
    assert profile.mean == 4.0
    assert profile.max == profile.min == 4


def test_largest_component_restriction():
    # components {0,1,2} and {3,4,5} tie in size; {6,7} is smaller
    graph = edges_graph(8, [(3, 4), (4, 5), (0, 1), (1, 2), (6, 7)])
    assert not is_connected(graph)

    restriction = largest_component(graph)
    assert restriction.kept.tolist() == [0, 1, 2]
    assert restriction.dropped == 5
    assert restriction.graph.n == 3
    assert restriction.graph.edge_count == 2
    assert restriction.old_to_new.tolist() == [0, 1, 2, -1, -1, -1, -1, -1]
    assert is_connected(restriction.graph)


def test_connected_graph_is_kept_whole(c4):
    restriction = largest_component(c4)
    assert restriction.graph is c4
    assert restriction.dropped == 0


def test_component_queries_need_nodes():
    empty = AdjacencyMatrix(n=0, indptr=np.zeros(1, dtype=np.int64),
                            indices=np.zeros(0, dtype=np.int64))
    with pytest.raises(ContractError):
        is_connected(empty)
    with pytest.raises(ContractError):
        largest_component(empty)
    with pytest.raises(ContractError):
        AdjacencyMatrix.from_edges(3, [0, 1], [1, 5])


def test_from_dense_matches_edges():
    dense = np.array([[0, 1, 1], [1, 0, 0], [1, 0, 0]])
    graph = AdjacencyMatrix.from_dense(dense)
    assert np.array_equal(graph.to_dense(), dense)
