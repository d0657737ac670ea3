from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd
import scipy.sparse as sp

from src.core.errors import ConfigError, GraphFormatError
from src.utils.logger import get_data_processing_logger, get_error_logger

logger = get_data_processing_logger()
error_logger = get_error_logger()

UNLABELED = -1


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Undirected, unweighted graph with a non-negative node attribute matrix.

    Nodes are dense ids 0..n-1. ``edges`` holds each undirected edge once as a
    (u, v) row with u < v, sorted lexicographically. ``labels`` uses -1 for
    unlabeled nodes. ``node_ids`` maps dense ids back to the ids of the source
    files and ``load_report`` keeps the loader's bookkeeping counters.
    """
    n: int
    edges: np.ndarray
    X: np.ndarray
    labels: Optional[np.ndarray] = None
    label_names: Tuple[str, ...] = ()
    node_ids: Tuple[str, ...] = ()
    load_report: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 0:
            raise _format_error(f"node count must be non-negative, got {self.n}")
        edges = np.array(self.edges, dtype=np.int64).reshape(-1, 2)
        X = np.array(self.X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != self.n:
            raise _format_error(f"attribute matrix must have {self.n} rows, got shape {X.shape}")
        if edges.size:
            if edges.min() < 0 or edges.max() >= self.n:
                raise _format_error(f"edge endpoint out of range [0, {self.n})")
            if np.any(edges[:, 0] >= edges[:, 1]):
                raise _format_error("edges must be stored as (u, v) with u < v and no self-loops")
            if len(np.unique(edges, axis=0)) != len(edges):
                raise _format_error("duplicate edges in edge array")
        if np.any(~np.isfinite(X)) or np.any(X < 0):
            raise _format_error("attribute values must be finite and non-negative")
        labels = self.labels
        if labels is not None:
            labels = np.array(labels, dtype=np.int64)
            if labels.shape != (self.n,):
                raise _format_error(f"label vector must have length {self.n}")
        node_ids = tuple(self.node_ids) if self.node_ids else tuple(str(i) for i in range(self.n))
        if len(node_ids) != self.n:
            raise _format_error(f"node id map must have {self.n} entries")

        edges.setflags(write=False)
        X.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "node_ids", node_ids)
        if labels is not None:
            labels.setflags(write=False)
            object.__setattr__(self, "labels", labels)

    @classmethod
    def from_pairs(cls, n: int, pairs: Iterable[Sequence[int]], X: np.ndarray, **kwargs) -> "AttributedGraph":
        """Build a graph from arbitrary (u, v) pairs: reversed and duplicate pairs collapse, self-loops are dropped."""
        arr = np.asarray(list(pairs), dtype=np.int64).reshape(-1, 2)
        arr = arr[arr[:, 0] != arr[:, 1]]
        arr = np.sort(arr, axis=1)
        arr = np.unique(arr, axis=0) if len(arr) else arr
        return cls(n=n, edges=arr, X=X, **kwargs)

    @property
    def num_edges(self) -> int:
        return int(len(self.edges))

    @property
    def num_attributes(self) -> int:
        return int(self.X.shape[1])

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric binary adjacency in CSR form with sorted column indices."""
        rows = np.concatenate([self.edges[:, 0], self.edges[:, 1]])
        cols = np.concatenate([self.edges[:, 1], self.edges[:, 0]])
        data = np.ones(len(rows), dtype=np.float64)
        A = sp.csr_matrix((data, (rows, cols)), shape=(self.n, self.n))
        A.sort_indices()
        return A

    @cached_property
    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr).astype(np.int64)

    def neighbors(self, v: int) -> np.ndarray:
        A = self.adjacency
        return A.indices[A.indptr[v]:A.indptr[v + 1]]

    def dense_adjacency(self) -> np.ndarray:
        return self.adjacency.toarray()

    @cached_property
    def edge_set(self) -> frozenset:
        return frozenset((int(u), int(v)) for u, v in self.edges)

    def has_edge(self, u: int, v: int) -> bool:
        if u > v:
            u, v = v, u
        return (u, v) in self.edge_set

    def labeled_nodes(self) -> np.ndarray:
        if self.labels is None:
            return np.empty(0, dtype=np.int64)
        return np.flatnonzero(self.labels != UNLABELED)

    def with_edges(self, edges: np.ndarray) -> "AttributedGraph":
        """Same nodes, attributes and labels over a different edge set."""
        return replace(self, edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2).copy(), load_report={})

    def to_networkx(self) -> nx.Graph:
        G = nx.Graph()
        G.add_nodes_from(range(self.n))
        G.add_edges_from(map(tuple, self.edges.tolist()))
        return G


def _format_error(error_msg: str) -> GraphFormatError:
    error_logger.error(error_msg)
    return GraphFormatError(error_msg)


def degree(graph: AttributedGraph, v: int) -> int:
    """Number of distinct neighbours of node ``v``."""
    if not 0 <= v < graph.n:
        raise ValueError(f"node {v} out of range [0, {graph.n})")
    return int(graph.degrees[v])


def _read_table(path: str, what: str, dtype=None) -> pd.DataFrame:
    if not os.path.isfile(path):
        error_msg = f"Cannot read {what} file: {path}"
        error_logger.error(error_msg)
        raise GraphFormatError(error_msg)
    try:
        return pd.read_csv(path, sep=r"\s+", header=None, comment="#", dtype=dtype)
    except pd.errors.EmptyDataError:
        return pd.DataFrame()
    except pd.errors.ParserError as e:
        error_msg = f"Malformed {what} file {path}: {e}"
        error_logger.error(error_msg)
        raise GraphFormatError(error_msg) from e
    except OSError as e:
        error_msg = f"Cannot read {what} file {path}: {e}"
        error_logger.error(error_msg)
        raise GraphFormatError(error_msg) from e


def _read_attributes(attr_path: str) -> np.ndarray:
    df = _read_table(attr_path, "attribute")
    if df.empty:
        raise _format_error(f"Attribute file {attr_path} is empty")
    if df.isna().any().any():
        bad_row = int(np.flatnonzero(df.isna().any(axis=1).to_numpy())[0])
        raise _format_error(
            f"Attribute row-length mismatch in {attr_path}: row {bad_row} is shorter than {df.shape[1]} values")
    try:
        return df.to_numpy(dtype=np.float64)
    except ValueError as e:
        raise _format_error(f"Non-numeric attribute value in {attr_path}: {e}") from e


def _read_edge_pairs(edge_path: str, n: int) -> np.ndarray:
    df = _read_table(edge_path, "edge")
    if df.empty:
        return np.empty((0, 2), dtype=np.int64)
    if df.shape[1] != 2:
        raise _format_error(f"Edge file {edge_path} must hold exactly two ids per line, found {df.shape[1]} columns")
    if df.isna().any().any():
        raise _format_error(f"Edge file {edge_path} has lines with a single id")
    try:
        pairs = df.to_numpy(dtype=np.int64)
    except ValueError as e:
        raise _format_error(f"Non-integer node id in {edge_path}: {e}") from e
    out_of_range = (pairs < 0) | (pairs >= n)
    if out_of_range.any():
        line = int(np.flatnonzero(out_of_range.any(axis=1))[0])
        raise _format_error(
            f"Node id out of range in {edge_path} line {line + 1}: {pairs[line].tolist()} (n={n})")
    return pairs


def _normalize_pairs(pairs: np.ndarray, source: str) -> Tuple[np.ndarray, Dict[str, int]]:
    loops = pairs[:, 0] == pairs[:, 1]
    n_loops = int(loops.sum())
    if n_loops:
        logger.warning(f"Dropped {n_loops} self-loop line(s) from {source}")
    kept = np.sort(pairs[~loops], axis=1)
    unique = np.unique(kept, axis=0) if len(kept) else kept.reshape(0, 2)
    report = {
        "edge_lines": int(len(pairs)),
        "self_loops_dropped": n_loops,
        "duplicates_merged": int(len(kept) - len(unique)),
    }
    return unique, report


def _label_codes(class_strings: Sequence[str]) -> Tuple[np.ndarray, Tuple[str, ...]]:
    # "10" after "9" when every class is an integer, so synth -> save -> load keeps block ids
    names = tuple(_sorted_ids(set(class_strings)))
    index = {name: i for i, name in enumerate(names)}
    return np.array([index[c] for c in class_strings], dtype=np.int64), names


def _read_labels(label_path: str, n: int) -> Tuple[np.ndarray, Tuple[str, ...]]:
    df = _read_table(label_path, "label", dtype=str)
    labels = np.full(n, UNLABELED, dtype=np.int64)
    if df.empty:
        return labels, ()
    if df.shape[1] != 2 or df.isna().any().any():
        raise _format_error(f"Label file {label_path} must hold 'node class' lines")
    try:
        nodes = df[0].astype(np.int64).to_numpy()
    except ValueError as e:
        raise _format_error(f"Non-integer node id in {label_path}: {e}") from e
    if np.any((nodes < 0) | (nodes >= n)):
        raise _format_error(f"Node id out of range in {label_path} (n={n})")
    pairs = df.drop_duplicates()
    if pairs[0].duplicated().any():
        node = pairs[0][pairs[0].duplicated()].iloc[0]
        raise _format_error(f"Node {node} has more than one class in {label_path}")
    codes, names = _label_codes(pairs[1].tolist())
    labels[pairs[0].astype(np.int64).to_numpy()] = codes
    return labels, names


def load_edge_list(edge_path: str, attr_path: str, label_path: Optional[str] = None,
                   ids_path: Optional[str] = None) -> AttributedGraph:
    """
    Load an attributed graph from an edge list, an attribute matrix and an optional label file.

    Args:
        edge_path: "u v" pair per line, ids in [0, n)
        attr_path: one whitespace-separated numeric row per node; n is the row count
        label_path: optional "node class" lines
        ids_path: optional original-id file (one id per line) written by save_graph

    Returns:
        AttributedGraph with reversed and duplicate edges merged and self-loops dropped
    """
    logger.info(f"Loading edge list {edge_path} with attributes {attr_path}")
    X = _read_attributes(attr_path)
    n = X.shape[0]
    pairs = _read_edge_pairs(edge_path, n)
    edges, report = _normalize_pairs(pairs, edge_path)

    labels, label_names = (None, ())
    if label_path:
        labels, label_names = _read_labels(label_path, n)

    node_ids: Tuple[str, ...] = ()
    if ids_path:
        with open(ids_path, "r", encoding="utf-8") as f:
            node_ids = tuple(line.strip() for line in f if line.strip())
        if len(node_ids) != n:
            raise _format_error(f"Id file {ids_path} has {len(node_ids)} ids for {n} nodes")

    graph = AttributedGraph(n=n, edges=edges, X=X, labels=labels, label_names=label_names,
                            node_ids=node_ids, load_report=report)
    logger.info(f"Loaded graph with {graph.n} nodes, {graph.num_edges} edges, {graph.num_attributes} attributes")
    return graph


def _sorted_ids(raw_ids: Sequence[str]) -> List[str]:
    # Numeric ids (Cora) sort as integers, anything else (Citeseer) as strings
    try:
        return sorted(raw_ids, key=int)
    except ValueError:
        return sorted(raw_ids)


def load_cora_format(content_path: str, cites_path: str) -> AttributedGraph:
    """
    Load a citation network distributed as .content / .cites files.

    Args:
        content_path: "id w1 ... wm label" lines
        cites_path: "cited citing" lines

    Returns:
        AttributedGraph with ids remapped to sorted order, binary attributes and sorted label codes
    """
    logger.info(f"Loading citation network {content_path} / {cites_path}")
    # 1. Papers: ids, binary word vectors and classes
    content = _read_table(content_path, "content", dtype=str)
    if content.empty:
        error_msg = f"Content file {content_path} is empty"
        error_logger.error(error_msg)
        raise GraphFormatError(error_msg)
    if content.shape[1] < 3 or content.isna().any().any():
        raise _format_error(f"Content file {content_path} must hold 'id w1 ... wm label' lines of equal length")

    duplicated = content[0].duplicated()
    if duplicated.any():
        logger.warning(f"Ignoring {int(duplicated.sum())} repeated paper id(s) in {content_path}")
        content = content[~duplicated]

    order = _sorted_ids(content[0].tolist())
    content = content.set_index(0).loc[order]
    try:
        values = content.iloc[:, :-1].to_numpy(dtype=np.float64)
    except ValueError as e:
        raise _format_error(f"Non-numeric attribute value in {content_path}: {e}") from e
    X = (values != 0).astype(np.float64)
    labels, label_names = _label_codes(content.iloc[:, -1].tolist())

    # 2. Citations between known papers
    index = {node_id: i for i, node_id in enumerate(order)}
    cites = _read_table(cites_path, "cites", dtype=str)
    pairs: List[Tuple[int, int]] = []
    unknown = 0
    if not cites.empty:
        if cites.shape[1] != 2:
            raise _format_error(f"Cites file {cites_path} must hold 'cited citing' lines")
        for cited, citing in cites.itertuples(index=False):
            u, v = index.get(cited), index.get(citing)
            if u is None or v is None:
                unknown += 1
                continue
            pairs.append((u, v))
    if unknown:
        logger.warning(f"Dropped {unknown} citation(s) referencing unknown paper ids in {cites_path}")

    # 3. Undirected, deduplicated edge set
    edges, report = _normalize_pairs(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), cites_path)
    report["edge_lines"] = int(len(cites))
    report["unknown_id_citations_dropped"] = unknown

    graph = AttributedGraph(n=len(order), edges=edges, X=X, labels=labels, label_names=label_names,
                            node_ids=tuple(order), load_report=report)
    logger.info(f"Loaded citation network with {graph.n} nodes, {graph.num_edges} unique edges "
                f"({report['edge_lines']} citation lines), {len(label_names)} labels")
    return graph


def generate_sbm_attributed(n_per_block: int, n_blocks: int, p_in: float, p_out: float,
                            attr_dim: int, attr_noise: float, seed: int) -> AttributedGraph:
    """
    Stochastic block model graph whose attributes follow the block structure.

    Attribute column c belongs to block c mod n_blocks; a node's row is the indicator of
    its block's columns with every bit flipped independently with probability attr_noise.
    Labels are block ids.
    """
    if n_per_block * n_blocks <= 0:
        raise ConfigError("SBM needs at least one node (n_per_block * n_blocks = 0)")
    for name, p in (("p_in", p_in), ("p_out", p_out), ("attr_noise", attr_noise)):
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"{name} must be in [0, 1], got {p}")
    if attr_dim < 1:
        raise ConfigError(f"attr_dim must be >= 1, got {attr_dim}")

    sizes = [n_per_block] * n_blocks
    probs = [[p_in if a == b else p_out for b in range(n_blocks)] for a in range(n_blocks)]
    G = nx.stochastic_block_model(sizes, probs, seed=seed)
    n = n_per_block * n_blocks
    blocks = np.repeat(np.arange(n_blocks), n_per_block)

    rng = np.random.default_rng([seed, 1])
    column_block = np.arange(attr_dim) % n_blocks
    X = (column_block[None, :] == blocks[:, None]).astype(np.float64)
    flips = rng.random((n, attr_dim)) < attr_noise
    X = np.where(flips, 1.0 - X, X)

    graph = AttributedGraph.from_pairs(n, G.edges(), X, labels=blocks,
                                       label_names=tuple(str(b) for b in range(n_blocks)))
    logger.info(f"Generated SBM graph: {n} nodes, {graph.num_edges} edges, seed={seed}")
    return graph


def add_isolated_nodes(graph: AttributedGraph, X_new: np.ndarray,
                       labels_new: Optional[Sequence[int]] = None) -> AttributedGraph:
    """Append attribute-bearing nodes without edges."""
    X_new = np.atleast_2d(np.asarray(X_new, dtype=np.float64))
    if X_new.shape[1] != graph.num_attributes:
        raise _format_error(f"new attribute rows must have {graph.num_attributes} columns")
    k = X_new.shape[0]
    labels = None
    if graph.labels is not None or labels_new is not None:
        old = graph.labels if graph.labels is not None else np.full(graph.n, UNLABELED)
        new = np.asarray(labels_new if labels_new is not None else [UNLABELED] * k, dtype=np.int64)
        labels = np.concatenate([old, new])
    node_ids = graph.node_ids + tuple(f"isolated_{i}" for i in range(k))
    return AttributedGraph(n=graph.n + k, edges=graph.edges.copy(), X=np.vstack([graph.X, X_new]),
                           labels=labels, label_names=graph.label_names, node_ids=node_ids)


def save_graph(graph: AttributedGraph, directory: str, prefix: str) -> Dict[str, str]:
    """
    Write a graph in the edge-list formats read by load_edge_list.

    Returns:
        Mapping of file role (edges, attrs, labels, ids) to written path
    """
    os.makedirs(directory, exist_ok=True)
    paths = {
        "edges": os.path.join(directory, f"{prefix}.edges"),
        "attrs": os.path.join(directory, f"{prefix}.attrs"),
        "ids": os.path.join(directory, f"{prefix}.ids"),
    }
    pd.DataFrame(graph.edges).to_csv(paths["edges"], sep=" ", header=False, index=False)
    np.savetxt(paths["attrs"], graph.X, fmt="%.17g")
    with open(paths["ids"], "w", encoding="utf-8") as f:
        f.writelines(f"{node_id}\n" for node_id in graph.node_ids)
    if graph.labels is not None:
        paths["labels"] = os.path.join(directory, f"{prefix}.labels")
        labeled = graph.labeled_nodes()
        names = graph.label_names or tuple(str(c) for c in range(int(graph.labels.max()) + 1))
        pd.DataFrame({
            "node": labeled,
            "label": [names[c] for c in graph.labels[labeled]],
        }).to_csv(paths["labels"], sep=" ", header=False, index=False)
    logger.info(f"Saved graph with {graph.n} nodes to {directory}/{prefix}.*")
    return paths


def graph_summary(graph: AttributedGraph) -> Dict[str, object]:
    """
    Dataset statistics: sizes, average degree, density, clustering, distances, components and isolated nodes.

    ``average_distance`` is the mean shortest-path length inside the largest connected
    component, so it stays defined on disconnected graphs.
    """
    G = graph.to_networkx()
    components = list(nx.connected_components(G)) if graph.n else []
    largest = G.subgraph(max(components, key=len)) if components else G
    labeled = graph.labeled_nodes()
    return {
        "nodes": graph.n,
        "edges": graph.num_edges,
        "attributes": graph.num_attributes,
        "labels": int(len(np.unique(graph.labels[labeled]))) if len(labeled) else 0,
        "labeled_nodes": int(len(labeled)),
        "average_degree": float(2.0 * graph.num_edges / graph.n) if graph.n else 0.0,
        "density": float(nx.density(G)) if graph.n > 1 else 0.0,
        "average_clustering": float(nx.average_clustering(G)) if graph.n else 0.0,
        "average_distance": float(nx.average_shortest_path_length(largest)) if largest.number_of_nodes() > 1 else 0.0,
        "largest_component": int(largest.number_of_nodes()),
        "components": len(components),
        "isolated_nodes": int(np.sum(graph.degrees == 0)),
        "connected": len(components) == 1,
    }
