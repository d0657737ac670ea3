from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from src.utils.logger import get_error_logger

error_logger = get_error_logger()


@dataclass
class LinearClassifier:
    """One-vs-rest logistic regression; one weight column and bias per class."""
    classes: np.ndarray
    W: np.ndarray
    b: np.ndarray

    def decision_function(self, features: np.ndarray) -> np.ndarray:
        return np.asarray(features, dtype=np.float64) @ self.W + self.b

    def predict(self, features: np.ndarray) -> np.ndarray:
        # argmax returns the first maximum, so ties go to the lowest class id
        scores = self.decision_function(features)
        return self.classes[np.argmax(scores, axis=1)]


def train_linear_classifier(features: np.ndarray, labels: np.ndarray, l2: float = 1e-3,
                            epochs: int = 300, seed: int = 0, learning_rate: float = 0.5) -> LinearClassifier:
    """
    Fit one binary logistic model per class by full-batch gradient descent.

    Features are used as given; the L2 penalty applies to weights only. Weights
    start from a small seeded perturbation so that runs are reproducible.

    Raises:
        ValueError: fewer than two classes in ``labels`` or shape mismatch
    """
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        error_msg = f"features {X.shape} and labels {y.shape} do not line up"
        error_logger.error(error_msg)
        raise ValueError(error_msg)
    classes = np.unique(y)
    if len(classes) < 2:
        error_msg = f"training set holds a single class {classes.tolist()}"
        error_logger.error(error_msg)
        raise ValueError(error_msg)

    n, m = X.shape
    rng = np.random.default_rng(seed)
    W = rng.normal(0.0, 1e-3, size=(m, len(classes)))
    b = np.zeros(len(classes))
    T = (y[:, None] == classes[None, :]).astype(np.float64)
    for _ in range(epochs):
        P = expit(X @ W + b)
        G = (P - T) / n
        W -= learning_rate * (X.T @ G + l2 * W)
        b -= learning_rate * G.sum(axis=0)
    return LinearClassifier(classes=classes, W=W, b=b)
