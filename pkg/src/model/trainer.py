from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import psutil

from src.core.errors import DivergenceError, GraphFormatError
from src.graph.graph_io import AttributedGraph
from src.graph.preprocess import (ReconstructedAdjacency, attribute_similarity, reconstructed_adjacency,
                                  sparsify_similarity)
from src.graph.walks import WalkCorpus, context_pairs, generate_walks, sample_negative_matrix
from src.model.config import ModelConfig
from src.model.danrl import (BatchBundle, ModelParams, branch_weights, encode_all, init_params,
                             loss_and_gradients)
from src.model.optimizers import make_optimizer
from src.utils.logger import get_error_logger, get_training_logger

logger = get_training_logger()
error_logger = get_error_logger()

HISTORY_COLUMNS = ["epoch", "L_total", "L_sg", "L_ae", "L_fop", "L_reg"]


@dataclass
class TrainingResult:
    embeddings: np.ndarray
    params: ModelParams
    history: pd.DataFrame
    epochs_run: int
    converged: bool


def prepare_inputs(graph: AttributedGraph, config: ModelConfig) -> ReconstructedAdjacency:
    """Attribute similarity, optional sparsification and the reconstructed adjacency R."""
    S = attribute_similarity(graph.X)
    if config.similarity_top_k:
        S = sparsify_similarity(S, config.similarity_top_k)
    return reconstructed_adjacency(graph.adjacency, S, config.eta, config.psi, config.chi)


def _epoch_pairs(corpus: WalkCorpus, epoch: int, cap: int, rng: np.random.Generator) -> np.ndarray:
    """Context pairs of the epoch's walk round, at most ``cap`` per center when cap > 0."""
    pairs = context_pairs(corpus, corpus.round_indices(epoch))
    if not cap or not len(pairs):
        return pairs
    pairs = pairs[rng.permutation(len(pairs))]
    pairs = pairs[np.argsort(pairs[:, 0], kind="stable")]
    starts = np.searchsorted(pairs[:, 0], pairs[:, 0], side="left")
    rank = np.arange(len(pairs)) - starts
    return pairs[rank < cap]


def _check_finite(terms: Dict[str, float], epoch: int, batch: int, step: str) -> None:
    if not all(np.isfinite(v) for v in terms.values()):
        error_msg = f"Training diverged at epoch {epoch}, batch {batch}, {step} step: {terms}"
        error_logger.error(error_msg)
        raise DivergenceError(error_msg, diagnostics={"epoch": epoch, "batch": batch, "step": step, **terms})


def train(graph: AttributedGraph, config: ModelConfig, log_path: Optional[str] = None,
          resume_from: Optional[str] = None, checkpoint_path: Optional[str] = None,
          adjacency: Optional[ReconstructedAdjacency] = None) -> TrainingResult:
    """
    Learn node embeddings with the alternating three-branch procedure.

    Each mini-batch of center nodes contributes its R rows to the autoencoder loss,
    its context pairs from the epoch's walk round to the skip-gram loss and the edges
    among its nodes to the first-order loss. In alternating mode the first-order,
    autoencoder (+ regularizer) and skip-gram branches are stepped in that order, each
    with its own optimizer state; combined mode takes one step on the full objective.

    Args:
        graph: training graph
        config: model configuration
        log_path: optional CSV path for the per-epoch loss history
        resume_from: optional checkpoint to continue from
        checkpoint_path: optional checkpoint written after the last epoch
        adjacency: precomputed R (built from the graph when omitted)

    Returns:
        TrainingResult with embeddings Y = y^(K) for every node
    """
    # 1. Inputs: R and the walk corpus
    config.validate()
    adj = adjacency if adjacency is not None else prepare_inputs(graph, config)
    if adj.n != graph.n:
        error_msg = f"reconstructed adjacency has {adj.n} rows for a {graph.n}-node graph"
        error_logger.error(error_msg)
        raise GraphFormatError(error_msg)
    corpus = generate_walks(graph, config.r, config.l, config.seed, config.window, config.neg)

    # 2. Parameters, fresh or from a checkpoint
    start_epoch = 0
    if resume_from:
        params, _, start_epoch = load_checkpoint(resume_from)
        params.validate()
        if params.encoder_dims != config.encoder_dims(graph.n):
            error_msg = f"checkpoint dims {params.encoder_dims} do not match {config.encoder_dims(graph.n)}"
            error_logger.error(error_msg)
            raise GraphFormatError(error_msg)
        logger.info(f"Resuming from {resume_from} at epoch {start_epoch}")
    else:
        params = init_params(config.encoder_dims(graph.n), config.seed)

    # 3. One optimizer per branch step
    weights = branch_weights(config)
    step_weights = {
        "fop": {"fop": weights["fop"]},
        "ae": {"ae": weights["ae"], "reg": weights["reg"]},
        "sg": {"sg": weights["sg"]},
    }
    optimizers = {name: make_optimizer(config.optimizer, config.learning_rate, config.momentum)
                  for name in (*step_weights, "combined")}

    rng = np.random.default_rng([config.seed, 2])
    edges = graph.edges
    R = adj.R
    rows: List[Dict[str, float]] = []
    converged = False
    logger.info(f"Training on {graph.n} nodes, {graph.num_edges} edges, dims={config.encoder_dims(graph.n)}, "
                f"optimizer={config.optimizer}, mode={config.update_mode}, epochs={config.epochs}")

    # 4. Epochs: one walk round each, mini-batches of center nodes
    for epoch in range(start_epoch, config.epochs):
        pairs = _epoch_pairs(corpus, epoch, config.sg_pairs_per_node, rng)
        perm = rng.permutation(graph.n)
        sums = dict.fromkeys(("total", "sg", "ae", "fop", "reg"), 0.0)
        counts = dict.fromkeys(("sg", "ae", "fop", "reg"), 0)
        n_batches = 0
        fop_skips = 0
        for batch_no, start in enumerate(range(0, graph.n, config.batch_size)):
            batch = np.sort(perm[start:start + config.batch_size])
            in_batch = np.zeros(graph.n, dtype=bool)
            in_batch[batch] = True
            batch_edges = edges[in_batch[edges[:, 0]] & in_batch[edges[:, 1]]] if len(edges) else edges
            batch_pairs = pairs[in_batch[pairs[:, 0]]] if len(pairs) else pairs
            if len(batch_pairs) and config.neg and corpus.sampler is not None:
                negatives = sample_negative_matrix(corpus.sampler, batch_pairs[:, 1], config.neg, rng,
                                                   centers=batch_pairs[:, 0] if config.exclude_center else None)
            else:
                negatives = np.empty((len(batch_pairs), 0), dtype=np.int64)
            bundle = BatchBundle(R=R, rows=batch, B_rows=adj.penalty_rows(batch), edges=batch_edges,
                                 pairs=batch_pairs, negatives=negatives)

            # Terms of the steps actually taken; a batch without edges or pairs has no L_fop or L_sg
            batch_terms: Dict[str, float] = {}
            if config.update_mode == "combined":
                terms, grads = loss_and_gradients(params, bundle, weights, config.activation)
                _check_finite(terms, epoch + 1, batch_no, "combined")
                optimizers["combined"].step(params, grads)
                batch_terms = {k: terms[k] for k in ("ae", "reg")}
                if len(batch_edges):
                    batch_terms["fop"] = terms["fop"]
                if len(batch_pairs):
                    batch_terms["sg"] = terms["sg"]
            else:
                for step, w in step_weights.items():
                    if not any(w.values()):
                        continue
                    if step == "fop" and not len(batch_edges):
                        fop_skips += 1
                        continue
                    if step == "sg" and not len(batch_pairs):
                        continue
                    terms, grads = loss_and_gradients(params, bundle, w, config.activation)
                    _check_finite(terms, epoch + 1, batch_no, step)
                    optimizers[step].step(params, grads)
                    for k in w:
                        batch_terms[k] = terms[k]
            batch_total = sum(weights[k] * v for k, v in batch_terms.items())
            for k, v in batch_terms.items():
                sums[k] += v
                counts[k] += 1
            sums["total"] += batch_total
            n_batches += 1

        if fop_skips:
            logger.warning(f"Epoch {epoch + 1}: first-order step skipped for {fop_skips} batch(es) without edges")
        means = {k: sums[k] / counts[k] if counts[k] else 0.0 for k in counts}
        means["total"] = sums["total"] / max(n_batches, 1)
        rows.append({"epoch": epoch + 1, "L_total": means["total"], "L_sg": means["sg"],
                     "L_ae": means["ae"], "L_fop": means["fop"], "L_reg": means["reg"]})
        logger.info(f"Epoch {epoch + 1}/{config.epochs}: L_total={means['total']:.6g} L_sg={means['sg']:.6g} "
                    f"L_ae={means['ae']:.6g} L_fop={means['fop']:.6g} L_reg={means['reg']:.6g} "
                    f"rss={psutil.Process().memory_info().rss / 2**20:.0f}MB")

        # 5. Relative change of L_total over the patience window
        if len(rows) > config.patience:
            old = rows[-1 - config.patience]["L_total"]
            new = rows[-1]["L_total"]
            if old and abs(new - old) / abs(old) < config.tol:
                converged = True
                logger.info(f"Converged at epoch {epoch + 1}: relative change {abs(new - old) / abs(old):.2e} "
                            f"over {config.patience} epochs")
                break
    epochs_run = len(rows)
    last_epoch = start_epoch + epochs_run

    # 6. Embeddings, history and checkpoint
    Y = encode_all(params, R, config.activation)
    history = pd.DataFrame(rows, columns=HISTORY_COLUMNS)
    if log_path:
        os.makedirs(os.path.dirname(log_path) or ".", exist_ok=True)
        history.to_csv(log_path, index=False)
    if checkpoint_path:
        save_checkpoint(params, config, last_epoch, checkpoint_path)
    logger.info(f"Training finished after {epochs_run} epoch(s); embeddings {Y.shape[0]}x{Y.shape[1]}")
    return TrainingResult(embeddings=Y, params=params, history=history, epochs_run=epochs_run, converged=converged)


def export_embeddings(Y: np.ndarray, id_map: Sequence[str], path: str) -> None:
    """Header "n d", then one "orig_id v1 ... vd" line per node."""
    Y = np.asarray(Y, dtype=np.float64)
    if len(id_map) != Y.shape[0]:
        error_msg = f"id map has {len(id_map)} entries for {Y.shape[0]} embeddings"
        error_logger.error(error_msg)
        raise ValueError(error_msg)
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    df = pd.DataFrame(Y)
    df.insert(0, "id", list(id_map))
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"{Y.shape[0]} {Y.shape[1]}\n")
        df.to_csv(f, sep=" ", header=False, index=False, float_format="%.17g", lineterminator="\n")
    logger.info(f"Wrote {Y.shape[0]} embeddings of dimension {Y.shape[1]} to {path}")


def load_embeddings(path: str) -> Tuple[np.ndarray, List[str]]:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().split()
        if len(header) != 2:
            error_msg = f"{path}: embedding header must be 'n d'"
            error_logger.error(error_msg)
            raise GraphFormatError(error_msg)
        n, d = int(header[0]), int(header[1])
        if n == 0:
            return np.empty((0, d)), []
        df = pd.read_csv(f, sep=" ", header=None, dtype={0: str})
    if df.shape != (n, d + 1):
        error_msg = f"{path}: expected {n} rows of {d + 1} fields, found {df.shape}"
        error_logger.error(error_msg)
        raise GraphFormatError(error_msg)
    return df.iloc[:, 1:].to_numpy(dtype=np.float64), df[0].tolist()


def save_checkpoint(params: ModelParams, config: ModelConfig, epoch: int, path: str) -> None:
    """All parameter matrices (row-major .npz members with shape headers) plus config and epoch."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "wb") as f:
        np.savez(f, **params.arrays(), __config__=np.array(json.dumps(config.to_dict())),
                 __epoch__=np.array(epoch))
    logger.info(f"Saved checkpoint at epoch {epoch} to {path}")


def load_checkpoint(path: str) -> Tuple[ModelParams, ModelConfig, int]:
    with np.load(path, allow_pickle=False) as data:
        arrays = {k: data[k] for k in data.files if not k.startswith("__")}
        config = ModelConfig.from_dict(json.loads(str(data["__config__"])))
        epoch = int(data["__epoch__"])
    return ModelParams.from_arrays(arrays), config, epoch
