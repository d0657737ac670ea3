from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np

from src.eval.classifier import train_linear_classifier
from src.eval.metrics import macro_f1, micro_f1
from src.eval.report import EvalReport, mean_std
from src.graph.graph_io import UNLABELED
from src.utils.logger import get_error_logger, get_eval_logger

logger = get_eval_logger()
error_logger = get_error_logger()

MAX_RESAMPLES = 50


def _split_labeled(nodes: np.ndarray, labels: np.ndarray, train_frac: float,
                   rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    perm = rng.permutation(nodes)
    n_train = min(max(int(np.floor(train_frac * len(nodes))), 1), len(nodes) - 1)
    return perm[:n_train], perm[n_train:]


def node_classification_eval(Y: np.ndarray, labels: Sequence[int], train_frac: float = 0.3,
                             repeats: int = 10, seed: int = 0, l2: float = 1e-3, epochs: int = 300,
                             config: Optional[dict] = None) -> EvalReport:
    """
    Mean Micro/Macro-F1 over ``repeats`` uniform train/test splits of the labeled nodes.

    Nodes labeled -1 are ignored. A repeat whose training split holds one class is
    drawn again, up to MAX_RESAMPLES times.
    """
    Y = np.asarray(Y, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if not 0 < train_frac < 1:
        raise ValueError(f"train_frac must be in (0, 1), got {train_frac}")
    if repeats < 1:
        raise ValueError(f"repeats must be >= 1, got {repeats}")
    if len(labels) != Y.shape[0]:
        raise ValueError(f"{len(labels)} labels for {Y.shape[0]} embeddings")
    nodes = np.flatnonzero(labels != UNLABELED)
    if len(nodes) < 2:
        error_msg = f"node classification needs at least two labeled nodes, found {len(nodes)}"
        error_logger.error(error_msg)
        raise ValueError(error_msg)
    if len(np.unique(labels[nodes])) < 2:
        error_msg = "node classification needs at least two classes among labeled nodes"
        error_logger.error(error_msg)
        raise ValueError(error_msg)

    micro_runs, macro_runs = [], []
    resamples = 0
    for repeat, child in enumerate(np.random.SeedSequence(seed).spawn(repeats)):
        rng = np.random.default_rng(child)
        for _ in range(MAX_RESAMPLES + 1):
            train_idx, test_idx = _split_labeled(nodes, labels, train_frac, rng)
            if len(np.unique(labels[train_idx])) >= 2:
                break
            resamples += 1
        else:
            error_msg = f"repeat {repeat}: training split kept a single class after {MAX_RESAMPLES} resamples"
            error_logger.error(error_msg)
            raise ValueError(error_msg)
        clf = train_linear_classifier(Y[train_idx], labels[train_idx], l2=l2, epochs=epochs,
                                      seed=int(rng.integers(2**31)))
        pred = clf.predict(Y[test_idx])
        micro_runs.append(micro_f1(pred, labels[test_idx]))
        macro_runs.append(macro_f1(pred, labels[test_idx]))
        logger.info(f"Repeat {repeat + 1}/{repeats}: micro-F1={micro_runs[-1]:.4f} macro-F1={macro_runs[-1]:.4f}")

    micro_mean, micro_std = mean_std(micro_runs)
    macro_mean, macro_std = mean_std(macro_runs)
    logger.info(f"Node classification over {repeats} repeats: micro-F1={micro_mean:.4f}±{micro_std:.4f} "
                f"macro-F1={macro_mean:.4f}±{macro_std:.4f}")
    return EvalReport(task="nc", seed=seed, micro_f1_mean=micro_mean, macro_f1_mean=macro_mean,
                      micro_f1_std=micro_std, macro_f1_std=macro_std, micro_f1_runs=micro_runs,
                      macro_f1_runs=macro_runs, repeats=repeats, config=dict(config or {}),
                      details={"train_frac": train_frac, "labeled_nodes": len(nodes), "resamples": resamples})
