from __future__ import annotations

import os
from typing import Dict, Optional

import numpy as np

from src.core.errors import ConfigError, GraphFormatError
from src.core.run_config import RunConfig
from src.eval.classification import node_classification_eval
from src.eval.link_prediction import link_prediction_eval
from src.eval.report import EvalReport
from src.graph.graph_io import AttributedGraph
from src.graph.preprocess import ReconstructedAdjacency, load_r_cache, load_r_cache_meta, save_r_cache
from src.graph.walks import generate_walks, save_corpus
from src.model.trainer import load_embeddings, prepare_inputs, train
from src.utils.logger import get_app_logger, get_error_logger

logger = get_app_logger()
error_logger = get_error_logger()


def require_labels(graph: AttributedGraph) -> None:
    if graph.labels is None or not len(graph.labeled_nodes()):
        error_msg = "node classification needs labels, but this dataset has none; use task=lp"
        error_logger.error(error_msg)
        raise ConfigError(error_msg)


def aligned_embeddings(graph: AttributedGraph, path: str) -> np.ndarray:
    """Embeddings from an exported file, reordered to the graph's node order."""
    Y, ids = load_embeddings(path)
    index = {node_id: row for row, node_id in enumerate(ids)}
    missing = [node_id for node_id in graph.node_ids if node_id not in index]
    if missing:
        error_msg = f"{path} has no embedding for {len(missing)} node(s), e.g. {missing[0]!r}"
        error_logger.error(error_msg)
        raise ValueError(error_msg)
    return Y[[index[node_id] for node_id in graph.node_ids]]


def r_cache_settings(config: RunConfig) -> Dict[str, object]:
    """The settings R depends on, stored next to the cache and compared on reuse."""
    return {"eta": float(config.eta), "psi": float(config.psi),
            "similarity_top_k": int(config.similarity_top_k or 0)}


def cached_adjacency(graph: AttributedGraph, config: RunConfig) -> ReconstructedAdjacency:
    """
    R from ``config.r_cache`` when that file exists and was built with the run's settings.

    A cache whose sidecar is missing or records other eta / psi / similarity_top_k values
    is ignored with a warning and R is rebuilt from the graph.
    """
    if not (config.r_cache and os.path.isfile(config.r_cache)):
        return prepare_inputs(graph, config.model_config())

    expected = r_cache_settings(config)
    meta = load_r_cache_meta(config.r_cache)
    stored = {key: meta.get(key) for key in expected} if meta else None
    if stored != expected:
        logger.warning(f"R cache {config.r_cache} was built with {stored or 'unknown settings'}, "
                       f"this run uses {expected}; rebuilding R")
        return prepare_inputs(graph, config.model_config())

    R = load_r_cache(config.r_cache)
    if R.shape[0] != graph.n:
        error_msg = f"R cache {config.r_cache} has {R.shape[0]} rows for a {graph.n}-node graph"
        error_logger.error(error_msg)
        raise GraphFormatError(error_msg)
    logger.info(f"Using cached R from {config.r_cache}")
    return ReconstructedAdjacency(R=R, eta=config.eta, psi=config.psi, chi=config.chi)


def prepare(graph: AttributedGraph, config: RunConfig) -> Dict[str, str]:
    """Write the R cache and the walk corpus that training with this config would use."""
    adj = prepare_inputs(graph, config.model_config())
    save_r_cache(adj.R, config.r_cache_path, meta=r_cache_settings(config))
    corpus = generate_walks(graph, config.r, config.l, config.seed, config.window, config.neg)
    save_corpus(corpus, config.walks_path)
    return {"r_cache": config.r_cache_path, "walks": config.walks_path}


def evaluate(graph: AttributedGraph, config: RunConfig, log_path: Optional[str] = None) -> EvalReport:
    """Run the configured task: link prediction on a held-out split, or classification on trained embeddings."""
    model_config = config.model_config()
    if config.task == "lp":
        return link_prediction_eval(graph, model_config, fraction=config.lp_fraction, log_path=log_path)

    require_labels(graph)
    if config.embeddings:
        logger.info(f"Evaluating stored embeddings {config.embeddings}")
        Y = aligned_embeddings(graph, config.embeddings)
    else:
        Y = train(graph, model_config, log_path=log_path).embeddings
    return node_classification_eval(Y, graph.labels, config.train_frac, config.repeats, config.seed,
                                    l2=config.clf_l2, epochs=config.clf_epochs, config=model_config.to_dict())
