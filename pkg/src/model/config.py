from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from typing import Any, Dict, Literal, Tuple

from src.core.errors import ConfigError

Activation = Literal["tanh", "sigmoid"]
OptimizerName = Literal["sgd", "momentum", "adam"]
UpdateMode = Literal["alternating", "combined"]

ACTIVATIONS = ("tanh", "sigmoid")
OPTIMIZERS = ("sgd", "momentum", "adam")
UPDATE_MODES = ("alternating", "combined")


@dataclass
class ModelConfig:
    # Encoder widths after the input layer; the input width is the node count n
    layer_dims: Tuple[int, ...] = (1000, 500, 128)
    alpha: float = 1.0          # weight of the autoencoder loss
    beta: float = 1.0           # weight of the first-order loss
    gamma: float = 1e-4         # regularizer coefficient
    chi: float = 5.0            # Hadamard penalty on non-zero entries of R
    eta: float = 1.0            # weight on A in R
    psi: float = 1.0            # weight on X^(S) in R
    similarity_top_k: int = 0   # 0 keeps X^(S) dense
    r: int = 10
    l: int = 80
    window: int = 10
    neg: int = 10
    exclude_center: bool = False
    sg_pairs_per_node: int = 0  # 0 uses every pair of the epoch's walk round
    learning_rate: float = 0.01
    momentum: float = 0.9
    optimizer: OptimizerName = "adam"
    update_mode: UpdateMode = "alternating"
    activation: Activation = "tanh"
    batch_size: int = 128
    epochs: int = 200
    tol: float = 1e-4
    patience: int = 10
    seed: int = 0

    @property
    def d(self) -> int:
        return int(self.layer_dims[-1])

    def encoder_dims(self, n: int) -> Tuple[int, ...]:
        return (int(n),) + tuple(int(k) for k in self.layer_dims)

    def validate(self) -> "ModelConfig":
        if not self.layer_dims or any(int(k) < 1 for k in self.layer_dims):
            raise ConfigError(f"layer dims must be positive, got {self.layer_dims}")
        for name in ("alpha", "beta", "gamma"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.chi <= 1:
            raise ConfigError(f"chi must be > 1, got {self.chi}")
        if self.eta < 0 or self.psi < 0 or (self.eta == 0 and self.psi == 0):
            raise ConfigError(f"eta and psi must be >= 0 and not both zero, got eta={self.eta}, psi={self.psi}")
        if self.r < 1 or self.l < 1 or self.window < 1 or self.neg < 0:
            raise ConfigError("walk parameters need r, l, window >= 1 and neg >= 0")
        if self.similarity_top_k < 0 or self.sg_pairs_per_node < 0:
            raise ConfigError("similarity_top_k and sg_pairs_per_node must be >= 0")
        if self.learning_rate <= 0 or not 0 <= self.momentum < 1:
            raise ConfigError("learning_rate must be > 0 and momentum in [0, 1)")
        if self.batch_size < 1 or self.epochs < 0 or self.patience < 1 or self.tol < 0:
            raise ConfigError("batch_size and patience must be >= 1, epochs and tol >= 0")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        if self.update_mode not in UPDATE_MODES:
            raise ConfigError(f"update_mode must be one of {UPDATE_MODES}, got {self.update_mode!r}")
        return self

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["layer_dims"] = list(self.layer_dims)
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        values = {k: v for k, v in data.items() if k in known}
        if "layer_dims" in values:
            values["layer_dims"] = tuple(int(k) for k in values["layer_dims"])
        return cls(**values)
