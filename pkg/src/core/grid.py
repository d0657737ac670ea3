from __future__ import annotations

import itertools
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Dict, List, Mapping, Optional, Sequence

import pandas as pd
import psutil

from src.core.errors import ConfigError
from src.core.pipeline import evaluate
from src.core.run_config import GRID_KEYS, RunConfig
from src.graph.graph_io import AttributedGraph
from src.utils.logger import get_app_logger, get_error_logger

logger = get_app_logger()
error_logger = get_error_logger()


def grid_combinations(spec: Mapping[str, Sequence[float]]) -> List[Dict[str, float]]:
    """Cartesian product of the candidate lists, in key order then candidate order."""
    if not spec or any(len(values) == 0 for values in spec.values()):
        empty = [key for key, values in spec.items() if not len(values)] if spec else list(GRID_KEYS)
        error_msg = f"empty grid: no candidates for {', '.join(empty)}"
        error_logger.error(error_msg)
        raise ConfigError(error_msg)
    keys = list(spec)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(spec[k] for k in keys))]


def default_workers() -> int:
    env = os.getenv("DANRL_WORKERS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError as e:
            error_msg = f"DANRL_WORKERS must be an integer, got {env!r}"
            error_logger.error(error_msg)
            raise ConfigError(error_msg) from e
    return psutil.cpu_count(logical=False) or 1


def _evaluate_combo(graph: AttributedGraph, config: RunConfig, log_path: Optional[str]) -> Dict[str, object]:
    report = evaluate(graph, config, log_path=log_path)
    return {"metric": report.metric, **report.summary()}


def run_grid(graph: AttributedGraph, config: RunConfig, spec: Optional[Mapping[str, Sequence[float]]] = None,
             workers: Optional[int] = None, log_dir: Optional[str] = None) -> pd.DataFrame:
    """
    Evaluate every hyperparameter combination from scratch with the configured seed.

    Combinations may run in parallel worker processes; each writes its own
    training history when ``log_dir`` is given. Returns the results ranked by
    the task metric (AUC or mean Micro-F1), best first.
    """
    combos = grid_combinations(spec if spec is not None else config.grid_spec())
    configs = [replace(config, **combo).validate() for combo in combos]
    log_paths = [os.path.join(log_dir, f"combo_{i:04d}.history.csv") if log_dir else None
                 for i in range(len(combos))]
    workers = min(workers or config.workers or default_workers(), len(combos))
    logger.info(f"Grid search: {len(combos)} combination(s), task={config.task}, workers={workers}")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_evaluate_combo, [graph] * len(configs), configs, log_paths))
    else:
        rows = [_evaluate_combo(graph, cfg, path) for cfg, path in zip(configs, log_paths)]

    table = pd.DataFrame([{"combo": i, **combo, **row} for i, (combo, row) in enumerate(zip(combos, rows))])
    table = table.sort_values(["metric", "combo"], ascending=[False, True], kind="stable").reset_index(drop=True)
    table.insert(0, "rank", range(1, len(table) + 1))
    best = table.iloc[0]
    logger.info(f"Best combination {best['combo']}: " + ", ".join(f"{k}={best[k]}" for k in combos[0])
                + f" -> {best['metric']:.4f}")
    return table


def write_results(table: pd.DataFrame, path: str) -> None:
    """CSV by default; .xlsx paths go through openpyxl."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    if path.lower().endswith(".xlsx"):
        table.to_excel(path, index=False, engine="openpyxl", sheet_name="grid")
    else:
        table.to_csv(path, index=False)
    logger.info(f"Wrote {len(table)} grid result row(s) to {path}")
