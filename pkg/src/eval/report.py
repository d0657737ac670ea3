from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional

import numpy as np
import pandas as pd

Task = Literal["lp", "nc"]


@dataclass
class EvalReport:
    """Result of one evaluation run. Metric fields not used by the task stay None."""
    task: Task
    seed: int
    auc: Optional[float] = None
    micro_f1_mean: Optional[float] = None
    macro_f1_mean: Optional[float] = None
    micro_f1_std: Optional[float] = None
    macro_f1_std: Optional[float] = None
    micro_f1_runs: List[float] = field(default_factory=list)
    macro_f1_runs: List[float] = field(default_factory=list)
    repeats: int = 0
    details: Dict[str, Any] = field(default_factory=dict)
    config: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in ("lp", "nc"):
            raise ValueError(f"unknown task {self.task!r}")
        values = [self.auc, self.micro_f1_mean, self.macro_f1_mean, *self.micro_f1_runs, *self.macro_f1_runs]
        for value in values:
            if value is not None and not 0.0 <= value <= 1.0:
                raise ValueError(f"metric {value} outside [0, 1]")
        if self.task == "nc" and len(self.micro_f1_runs) != self.repeats:
            raise ValueError(f"{self.repeats} repeats but {len(self.micro_f1_runs)} per-run values")

    @property
    def metric_name(self) -> str:
        return "auc" if self.task == "lp" else "micro_f1_mean"

    @property
    def metric(self) -> float:
        return float(getattr(self, self.metric_name))

    def summary(self) -> Dict[str, Any]:
        """Flat scalar view used for text blocks, tables and grid rows."""
        out: Dict[str, Any] = {"task": self.task, "seed": self.seed}
        if self.task == "lp":
            out["auc"] = self.auc
        else:
            out.update(micro_f1_mean=self.micro_f1_mean, macro_f1_mean=self.macro_f1_mean,
                       micro_f1_std=self.micro_f1_std, macro_f1_std=self.macro_f1_std, repeats=self.repeats)
        out.update(self.details)
        return out

    def to_text(self) -> str:
        lines = [f"{key}={value}" for key, value in self.summary().items()]
        if self.task == "nc":
            lines.append(f"micro_f1_runs={','.join(repr(v) for v in self.micro_f1_runs)}")
            lines.append(f"macro_f1_runs={','.join(repr(v) for v in self.macro_f1_runs)}")
        if self.config:
            lines.append(f"config={json.dumps(self.config, sort_keys=True)}")
        return "\n".join(lines) + "\n"

    def append_to(self, path: str) -> None:
        """Append the key=value block to a results log, blocks separated by a blank line."""
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "a", encoding="utf-8") as f:
            f.write(self.to_text() + "\n")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"value": pd.Series(self.summary(), dtype=object)})

    def to_table(self) -> str:
        return self.to_frame().to_string()


def mean_std(values: List[float]) -> tuple:
    arr = np.asarray(values, dtype=np.float64)
    return float(arr.mean()), float(arr.std())
