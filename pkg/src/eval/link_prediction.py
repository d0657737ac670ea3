from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import networkx as nx
import numpy as np

from src.eval.metrics import auc, score_pairs
from src.eval.report import EvalReport
from src.graph.graph_io import AttributedGraph
from src.model.config import ModelConfig
from src.model.trainer import train
from src.utils.logger import get_error_logger, get_eval_logger

logger = get_eval_logger()
error_logger = get_error_logger()


@dataclass
class LinkSplit:
    train_graph: AttributedGraph
    positives: np.ndarray   # (P, 2) held-out edges
    negatives: np.ndarray   # (P, 2) non-edges of the original graph
    requested: int
    shortfall: int
    negative_shortfall: int = 0  # removable edges kept because the graph ran out of non-edges


def _removable_edges(graph: AttributedGraph, order: np.ndarray) -> np.ndarray:
    """
    Edges, in ``order``, that sequential non-bridge removal would take out.

    Walking the shuffled edges and deleting each one that is not currently a
    bridge keeps exactly a spanning forest: the one Kruskal builds when edges
    later in the order are preferred. Everything outside that forest is
    removable, and the first k of them are what k sequential removals yield.
    """
    m = len(order)
    G = nx.Graph()
    G.add_nodes_from(range(graph.n))
    for pos, idx in enumerate(order):
        u, v = graph.edges[idx]
        G.add_edge(int(u), int(v), weight=m - pos)
    forest = {(min(u, v), max(u, v)) for u, v in nx.minimum_spanning_edges(G, algorithm="kruskal", data=False)}
    keep = np.array([(int(graph.edges[idx, 0]), int(graph.edges[idx, 1])) not in forest for idx in order], dtype=bool)
    return order[keep]


def sample_non_edges(graph: AttributedGraph, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` distinct node pairs (u < v) uniformly from the non-edges of ``graph``."""
    available = graph.n * (graph.n - 1) // 2 - graph.num_edges
    if count > available:
        error_msg = f"cannot draw {count} negatives: graph has only {available} non-edges"
        error_logger.error(error_msg)
        raise ValueError(error_msg)
    edge_set = graph.edge_set
    chosen = set()
    out = []
    while len(out) < count:
        need = count - len(out)
        u = rng.integers(0, graph.n, size=2 * need + 8)
        v = rng.integers(0, graph.n, size=2 * need + 8)
        for a, b in zip(u.tolist(), v.tolist()):
            if a == b:
                continue
            pair = (a, b) if a < b else (b, a)
            if pair in edge_set or pair in chosen:
                continue
            chosen.add(pair)
            out.append(pair)
            if len(out) == count:
                break
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def split_link_prediction(graph: AttributedGraph, fraction: float = 0.5, seed: int = 0) -> LinkSplit:
    """
    Hold out up to floor(fraction * |E|) edges without disconnecting any component.

    Removed edges are the positives; an equal number of non-edges of the
    original graph are the negatives. When fewer edges are removable than
    requested, the split keeps what it can and records the shortfall. Positives
    never outnumber the non-edges of the original graph; removable edges beyond
    that stay in the training graph and are counted in ``negative_shortfall``.
    """
    if not 0 < fraction < 1:
        error_msg = f"fraction must be in (0, 1), got {fraction}"
        error_logger.error(error_msg)
        raise ValueError(error_msg)
    if graph.num_edges == 0:
        error_msg = "link prediction split needs a graph with at least one edge"
        error_logger.error(error_msg)
        raise ValueError(error_msg)

    # 1. Non-forest edges in shuffled order; removing them never splits a component
    rng = np.random.default_rng(seed)
    order = rng.permutation(graph.num_edges)
    requested = int(np.floor(fraction * graph.num_edges))
    removable = _removable_edges(graph, order)[:requested]
    shortfall = requested - len(removable)
    if shortfall:
        logger.warning(f"Only {len(removable)} of {requested} requested edges are removable without disconnecting "
                       f"a component; shortfall {shortfall}")
    # 2. Cap positives at the available non-edges
    non_edges = graph.n * (graph.n - 1) // 2 - graph.num_edges
    negative_shortfall = max(len(removable) - non_edges, 0)
    if negative_shortfall:
        logger.warning(f"Graph has only {non_edges} non-edges; keeping {negative_shortfall} removable edge(s) "
                       f"in training so positives and negatives stay balanced")
    held = np.sort(removable[:len(removable) - negative_shortfall])

    # 3. Residual training graph and uniform non-edge negatives
    mask = np.ones(graph.num_edges, dtype=bool)
    mask[held] = False
    positives = graph.edges[held]
    negatives = sample_non_edges(graph, len(positives), np.random.default_rng([seed, 1]))
    logger.info(f"Link split: {len(positives)} positives, {len(negatives)} negatives, "
                f"{int(mask.sum())} training edges")
    return LinkSplit(train_graph=graph.with_edges(graph.edges[mask]), positives=positives,
                     negatives=negatives, requested=requested, shortfall=shortfall,
                     negative_shortfall=negative_shortfall)


def score_link_split(Y: np.ndarray, split: LinkSplit) -> float:
    """AUC of cosine scores for the held-out positives against the negatives."""
    if not len(split.positives):
        error_msg = f"no held-out positives to score (requested {split.requested}, shortfall {split.shortfall})"
        error_logger.error(error_msg)
        raise ValueError(error_msg)
    return auc(score_pairs(Y, split.positives), score_pairs(Y, split.negatives))


def link_prediction_eval(graph: AttributedGraph, config: ModelConfig, fraction: float = 0.5,
                         split_seed: Optional[int] = None, log_path: Optional[str] = None) -> EvalReport:
    """Split, train on the residual graph with its attributes, then score held-out pairs."""
    seed = config.seed if split_seed is None else split_seed
    split = split_link_prediction(graph, fraction, seed)
    result = train(split.train_graph, config, log_path=log_path)
    value = score_link_split(result.embeddings, split)
    logger.info(f"Link prediction AUC={value:.4f} after {result.epochs_run} epoch(s)")
    return EvalReport(task="lp", seed=seed, auc=value, config=config.to_dict(),
                      details={"fraction": fraction, "positives": len(split.positives),
                               "negatives": len(split.negatives), "requested": split.requested,
                               "shortfall": split.shortfall, "negative_shortfall": split.negative_shortfall,
                               "epochs_run": result.epochs_run})
