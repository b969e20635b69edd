import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .errors import ContractError, EdgeListParseError, EmptyGraphError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IngestStats:
    """What the loader had to clean up in a raw edge list"""
    lines_read: int = 0
    self_loops_dropped: int = 0
    duplicates_dropped: int = 0


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Undirected simple graph stored as sorted neighbour lists (CSR layout).

    ``indices[indptr[i]:indptr[i + 1]]`` is the strictly increasing neighbour
    list of node ``i``. Storage is symmetric and never holds ``i`` in its own
    list. ``labels`` keeps the node ids of the source file, if any.
    """
    n: int
    indptr: np.ndarray
    indices: np.ndarray
    labels: Optional[np.ndarray] = None
    ingest: IngestStats = field(default_factory=IngestStats)

    def __post_init__(self):
        self.indptr.setflags(write=False)
        self.indices.setflags(write=False)
        if self.labels is not None:
            self.labels.setflags(write=False)

    @property
    def edge_count(self) -> int:
        return len(self.indices) // 2

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def to_csr(self, dtype=np.float64) -> sp.csr_matrix:
        data = np.ones(len(self.indices), dtype=dtype)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))

    def to_dense(self, dtype=np.float64) -> np.ndarray:
        return self.to_csr(dtype).toarray()

    def upper_edges(self) -> np.ndarray:
        """(m, 2) array of pairs u < v in lexicographic order"""
        rows = np.repeat(np.arange(self.n), np.diff(self.indptr))
        keep = rows < self.indices
        return np.column_stack([rows[keep], self.indices[keep]])

    @classmethod
    def from_edges(cls, n: int, rows: Iterable[int], cols: Iterable[int],
                   labels: Optional[np.ndarray] = None,
                   lines_read: int = 0) -> "AdjacencyMatrix":
        """Build a simple graph from endpoint arrays, dropping loops and repeats"""
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        if rows.shape != cols.shape:
            raise ContractError("rows and cols must have the same length")
        if rows.size and (min(rows.min(), cols.min()) < 0 or max(rows.max(), cols.max()) >= n):
            raise ContractError(f"edge endpoint outside 0..{n - 1}")

        loops = rows == cols
        lo = np.minimum(rows[~loops], cols[~loops])
        hi = np.maximum(rows[~loops], cols[~loops])
        keys = np.unique(lo * n + hi)
        lo, hi = keys // n, keys % n

        both_rows = np.concatenate([lo, hi])
        both_cols = np.concatenate([hi, lo])
        matrix = sp.csr_matrix(
            (np.ones(len(both_rows), dtype=np.int8), (both_rows, both_cols)), shape=(n, n)
        )
        matrix.sort_indices()
        stats = IngestStats(
            lines_read=lines_read,
            self_loops_dropped=int(loops.sum()),
            duplicates_dropped=int((~loops).sum() - len(keys)),
        )
        return cls(
            n=n,
            indptr=matrix.indptr.astype(np.int64),
            indices=matrix.indices.astype(np.int64),
            labels=labels,
            ingest=stats,
        )

    @classmethod
    def from_dense(cls, matrix: np.ndarray) -> "AdjacencyMatrix":
        """Graph of the nonzero upper-triangular entries of a square array"""
        matrix = np.asarray(matrix)
        rows, cols = np.nonzero(np.triu(matrix, k=1))
        return cls.from_edges(matrix.shape[0], rows, cols)


@dataclass(frozen=True)
class DegreeProfile:
    degrees: np.ndarray
    mean: float
    max: int
    min: int


@dataclass(frozen=True)
class ComponentRestriction:
    """Largest connected component and the index maps back to the full graph"""
    graph: AdjacencyMatrix
    kept: np.ndarray          # kept[new] = old
    old_to_new: np.ndarray    # -1 for dropped nodes

    @property
    def dropped(self) -> int:
        return int(np.sum(self.old_to_new < 0))


def load_edge_list(path: Union[str, Path], one_based: bool = False) -> AdjacencyMatrix:
    """
    Read a whitespace separated edge list into a simple undirected graph.

    Args:
        path: Text file with one ``u v`` pair per line; ``#`` starts a comment.
            Extra columns (weights) are ignored, so weighted inputs are binarized.
        one_based: Node ids in the file start at 1 instead of 0.

    Returns:
        The graph relabeled to 0..n-1 in increasing order of the file ids, with
        the file ids kept in ``labels``.

    Raises:
        EdgeListParseError: A line holds fewer than two tokens, a non-integer
            token, or an id below the indexing base.
        EmptyGraphError: The file holds no edge.
    """
    path = Path(path)
    base = 1 if one_based else 0
    us, vs = [], []
    lines_read = 0

    with open(path, "r", encoding="utf-8") as handle:
        for number, raw in enumerate(handle, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            if len(tokens) < 2:
                raise EdgeListParseError(str(path), number, f"expected two node ids, got {line!r}")
            try:
                u, v = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise EdgeListParseError(
                    str(path), number, f"node ids must be integers: {line!r}"
                ) from None
            if u < base or v < base:
                raise EdgeListParseError(str(path), number, f"node id below {base}")
            us.append(u)
            vs.append(v)
            lines_read += 1

    if not us:
        raise EmptyGraphError(f"{path} contains no edges")

    ids = np.asarray(us + vs, dtype=np.int64)
    labels, relabeled = np.unique(ids, return_inverse=True)
    half = len(us)
    graph = AdjacencyMatrix.from_edges(
        len(labels), relabeled[:half], relabeled[half:], labels=labels, lines_read=lines_read
    )
    if graph.edge_count == 0:
        raise EmptyGraphError(f"{path} contains only self loops")

    stats = graph.ingest
    if stats.self_loops_dropped or stats.duplicates_dropped:
        logger.warning(
            "%s: dropped %d self loops and %d duplicate edges",
            path, stats.self_loops_dropped, stats.duplicates_dropped,
        )
    logger.info("loaded %s: n=%d, m=%d", path, graph.n, graph.edge_count)
    return graph


def save_edge_list(graph: AdjacencyMatrix, path: Union[str, Path],
                   original_labels: bool = False) -> None:
    """Write the canonical edge list: unique pairs u < v, sorted, one per line"""
    edges = graph.upper_edges()
    if original_labels and graph.labels is not None:
        edges = graph.labels[edges]
    with open(path, "w", encoding="utf-8") as handle:
        handle.writelines(f"{u} {v}\n" for u, v in edges)


def degrees(graph: AdjacencyMatrix) -> DegreeProfile:
    d = np.diff(graph.indptr)
    return DegreeProfile(
        degrees=d,
        mean=2.0 * graph.edge_count / graph.n,
        max=int(d.max()) if graph.n else 0,
        min=int(d.min()) if graph.n else 0,
    )


def _components(graph: AdjacencyMatrix) -> Tuple[int, np.ndarray]:
    return connected_components(graph.to_csr(np.int8), directed=False)


def is_connected(graph: AdjacencyMatrix) -> bool:
    if graph.n < 1:
        raise ContractError("graph has no nodes")
    count, _ = _components(graph)
    return count == 1


def subgraph(graph: AdjacencyMatrix, nodes: np.ndarray) -> AdjacencyMatrix:
    """Induced subgraph on ``nodes`` (ascending), relabeled 0..len(nodes)-1"""
    nodes = np.asarray(nodes, dtype=np.int64)
    block = graph.to_csr(np.int8)[nodes][:, nodes].tocoo()
    labels = graph.labels[nodes] if graph.labels is not None else nodes.copy()
    return AdjacencyMatrix.from_edges(len(nodes), block.row, block.col, labels=labels)


def largest_component(graph: AdjacencyMatrix) -> ComponentRestriction:
    """Restrict to the largest connected component.

    Among components of equal size the one holding the smallest node index wins.
    """
    if graph.n < 1:
        raise ContractError("graph has no nodes")
    count, membership = _components(graph)
    if count == 1:
        identity = np.arange(graph.n)
        return ComponentRestriction(graph=graph, kept=identity, old_to_new=identity.copy())

    sizes = np.bincount(membership, minlength=count)
    first_node = np.full(count, graph.n)
    np.minimum.at(first_node, membership, np.arange(graph.n))
    largest = np.flatnonzero(sizes == sizes.max())
    winner = largest[np.argmin(first_node[largest])]

    kept = np.flatnonzero(membership == winner)
    old_to_new = np.full(graph.n, -1, dtype=np.int64)
    old_to_new[kept] = np.arange(len(kept))
    logger.info("restricted to largest component: %d of %d nodes", len(kept), graph.n)
    return ComponentRestriction(graph=subgraph(graph, kept), kept=kept, old_to_new=old_to_new)
