from __future__ import annotations

import os
import typing
from dataclasses import dataclass, fields
from typing import Any, Dict, Literal, Mapping, Optional, Tuple

from dotenv import dotenv_values

from src.core.errors import ConfigError
from src.graph.graph_io import AttributedGraph, load_cora_format, load_edge_list
from src.model.config import ModelConfig
from src.utils.logger import get_app_logger, get_error_logger

logger = get_app_logger()
error_logger = get_error_logger()

Task = Literal["lp", "nc"]

GRID_KEYS = ("eta", "psi", "chi", "alpha", "beta", "gamma")
_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class RunConfig(ModelConfig):
    """ModelConfig plus dataset, task and output settings for one CLI run."""
    # Dataset: edges + attrs (+ labels, ids), or content + cites
    edges: Optional[str] = None
    attrs: Optional[str] = None
    labels: Optional[str] = None
    ids: Optional[str] = None
    content: Optional[str] = None
    cites: Optional[str] = None

    task: Task = "lp"
    output: str = "out/embeddings.txt"
    train_log: Optional[str] = None     # defaults to <output>.history.csv
    results: str = "out/results.txt"
    checkpoint: Optional[str] = None
    resume: Optional[str] = None
    embeddings: Optional[str] = None    # nc only: evaluate these instead of training
    r_cache: Optional[str] = None       # binary R written by prepare and reused by train
    walks_output: Optional[str] = None  # walk corpus written by prepare

    lp_fraction: float = 0.5
    train_frac: float = 0.3
    repeats: int = 10
    clf_l2: float = 1e-3
    clf_epochs: int = 300

    grid_eta: Optional[Tuple[float, ...]] = None
    grid_psi: Optional[Tuple[float, ...]] = None
    grid_chi: Optional[Tuple[float, ...]] = None
    grid_alpha: Optional[Tuple[float, ...]] = None
    grid_beta: Optional[Tuple[float, ...]] = None
    grid_gamma: Optional[Tuple[float, ...]] = None
    grid_output: str = "out/grid.csv"
    workers: int = 0                    # 0: DANRL_WORKERS or physical cores

    @property
    def history_path(self) -> str:
        return self.train_log or f"{os.path.splitext(self.output)[0]}.history.csv"

    @property
    def r_cache_path(self) -> str:
        return self.r_cache or f"{os.path.splitext(self.output)[0]}.R.bin"

    @property
    def walks_path(self) -> str:
        return self.walks_output or f"{os.path.splitext(self.output)[0]}.walks.txt"

    def model_config(self) -> ModelConfig:
        return ModelConfig.from_dict(self.to_dict())

    def grid_spec(self) -> Dict[str, Tuple[float, ...]]:
        """Candidate lists per grid key; keys without candidates keep the configured value."""
        return {key: (getattr(self, f"grid_{key}") if getattr(self, f"grid_{key}") is not None
                      else (getattr(self, key),)) for key in GRID_KEYS}

    def validate(self) -> "RunConfig":
        super().validate()
        if self.task not in ("lp", "nc"):
            raise ConfigError(f"task must be 'lp' or 'nc', got {self.task!r}")
        if not 0 < self.lp_fraction < 1 or not 0 < self.train_frac < 1:
            raise ConfigError("lp_fraction and train_frac must be in (0, 1)")
        if self.repeats < 1 or self.clf_epochs < 1 or self.clf_l2 < 0:
            raise ConfigError("repeats and clf_epochs must be >= 1 and clf_l2 >= 0")
        if self.workers < 0:
            raise ConfigError(f"workers must be >= 0, got {self.workers}")
        return self

    def dataset_paths(self) -> Dict[str, str]:
        if self.content or self.cites:
            required = {"content": self.content, "cites": self.cites}
        else:
            required = {"edges": self.edges, "attrs": self.attrs}
        missing = [name for name, path in required.items() if not path]
        if missing:
            raise ConfigError(f"dataset needs {' and '.join(required)} paths; missing {', '.join(missing)}")
        optional = {"labels": self.labels, "ids": self.ids} if "edges" in required else {}
        return {**required, **{k: v for k, v in optional.items() if v}}

    def check_paths(self) -> None:
        """Every referenced input must exist when the command starts."""
        inputs = dict(self.dataset_paths())
        if self.resume:
            inputs["resume"] = self.resume
        if self.embeddings:
            inputs["embeddings"] = self.embeddings
        for name, path in inputs.items():
            if not os.path.isfile(path):
                error_msg = f"{name} file not found: {path}"
                error_logger.error(error_msg)
                raise ConfigError(error_msg)

    def load_graph(self) -> AttributedGraph:
        paths = self.dataset_paths()
        if "content" in paths:
            return load_cora_format(paths["content"], paths["cites"])
        return load_edge_list(paths["edges"], paths["attrs"], paths.get("labels"), paths.get("ids"))


def _coerce(name: str, raw: Any, hint: Any) -> Any:
    """Turn a config-file or CLI string into the field's declared type."""
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    args = typing.get_args(hint)
    if typing.get_origin(hint) is typing.Union:
        if text.lower() in ("", "none"):
            # an explicit empty candidate list is kept so the grid can reject it
            return () if typing.get_origin(args[0]) is tuple else None
        hint = args[0]
        args = typing.get_args(hint)
    origin = typing.get_origin(hint)
    try:
        if origin is tuple:
            item = args[0]
            return tuple(item(v) for v in text.replace(" ", "").split(",") if v)
        if origin is Literal:
            return text
        if hint is bool:
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(text)
        return hint(text)
    except ValueError as e:
        raise ConfigError(f"invalid value for {name}: {raw!r}") from e


def load_run_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    Build a RunConfig from a key=value file and command-line overrides.

    Keys may use dashes or underscores; list values are comma separated.
    Overrides win over file values. Unknown keys are rejected.
    """
    values: Dict[str, Any] = {}
    if path:
        if not os.path.isfile(path):
            error_msg = f"config file not found: {path}"
            error_logger.error(error_msg)
            raise ConfigError(error_msg)
        values.update({k: v for k, v in dotenv_values(path).items() if v is not None})
        logger.info(f"Loaded run config {path}")
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})

    hints = typing.get_type_hints(RunConfig)
    known = {f.name for f in fields(RunConfig)}
    kwargs = {}
    for key, raw in values.items():
        name = key.strip().lower().replace("-", "_")
        if name not in known:
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[name] = _coerce(name, raw, hints[name])
    return RunConfig(**kwargs).validate()
