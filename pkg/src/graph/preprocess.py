from __future__ import annotations

import json
import os
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Optional

import numpy as np
import scipy.sparse as sp

from src.core.errors import ConfigError, GraphFormatError
from src.utils.logger import get_data_processing_logger, get_error_logger

logger = get_data_processing_logger()
error_logger = get_error_logger()

# Binary R cache: magic, uint64 n, uint64 float width (bytes), then n*n little-endian floats row-major.
# A JSON sidecar <cache>.json records n, the float width and the settings R was built with.
R_CACHE_MAGIC = b"DANRLR1\x00"


def attribute_similarity(X: np.ndarray) -> np.ndarray:
    """
    Cosine similarity between every pair of attribute rows.

    The diagonal is 0 and rows with zero norm are 0 against every node. The result is
    exactly symmetric: the upper triangle is computed and mirrored.

    Args:
        X: n x m attribute matrix (dense or scipy sparse)

    Returns:
        n x n dense similarity matrix X^(S)
    """
    if sp.issparse(X):
        X = X.toarray()
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 1:
        error_msg = f"attribute matrix must be n x m with m >= 1, got shape {X.shape}"
        error_logger.error(error_msg)
        raise GraphFormatError(error_msg)
    norms = np.linalg.norm(X, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    Xn = X / safe[:, None]
    Xn[norms == 0] = 0.0
    S = Xn @ Xn.T
    S = np.triu(S, k=1)
    S = S + S.T
    # float round-off can push identical rows marginally above 1
    np.clip(S, -1.0, 1.0, out=S)
    return S


def sparsify_similarity(S: np.ndarray, top_k: int) -> np.ndarray:
    """Keep each row's top_k largest entries, then re-symmetrize with the elementwise max of S and S^T."""
    if top_k < 1:
        error_msg = f"top_k must be >= 1, got {top_k}"
        error_logger.error(error_msg)
        raise ConfigError(error_msg)
    S = np.asarray(S, dtype=np.float64)
    n = S.shape[0]
    if top_k >= n:
        kept = S.copy()
    else:
        kept = np.zeros_like(S)
        idx = np.argpartition(-S, top_k - 1, axis=1)[:, :top_k]
        rows = np.arange(n)[:, None]
        kept[rows, idx] = S[rows, idx]
    return np.maximum(kept, kept.T)


@dataclass(frozen=True, eq=False)
class ReconstructedAdjacency:
    """R = eta * A + psi * X^(S) with the Hadamard penalty mask derived from chi."""
    R: np.ndarray
    eta: float
    psi: float
    chi: float

    @property
    def n(self) -> int:
        return int(self.R.shape[0])

    def penalty_rows(self, rows: np.ndarray) -> np.ndarray:
        """b_i for the given node ids: 1 where r_ij = 0, chi elsewhere."""
        return np.where(self.R[rows] != 0, self.chi, 1.0)

    @cached_property
    def B(self) -> np.ndarray:
        return np.where(self.R != 0, self.chi, 1.0)


def reconstructed_adjacency(A, S: np.ndarray, eta: float, psi: float, chi: float = 5.0) -> ReconstructedAdjacency:
    """
    Blend the adjacency matrix with the attribute similarity matrix.

    Args:
        A: n x n adjacency (dense or scipy sparse)
        S: n x n attribute similarity matrix
        eta: weight on A
        psi: weight on X^(S)
        chi: penalty applied to non-zero entries of R in the reconstruction loss

    Returns:
        ReconstructedAdjacency
    """
    if sp.issparse(A):
        A = A.toarray()
    A = np.asarray(A, dtype=np.float64)
    S = np.asarray(S, dtype=np.float64)
    if A.shape != S.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        error_msg = f"dimension mismatch: A is {A.shape}, X^(S) is {S.shape}"
        error_logger.error(error_msg)
        raise GraphFormatError(error_msg)
    if eta < 0 or psi < 0:
        error_msg = f"eta and psi must be non-negative, got eta={eta}, psi={psi}"
        error_logger.error(error_msg)
        raise ConfigError(error_msg)
    if eta == 0 and psi == 0:
        error_msg = "eta and psi cannot both be zero"
        error_logger.error(error_msg)
        raise ConfigError(error_msg)
    if chi <= 1:
        error_msg = f"chi must be > 1, got {chi}"
        error_logger.error(error_msg)
        raise ConfigError(error_msg)
    R = eta * A + psi * S
    R.setflags(write=False)
    logger.info(f"Built reconstructed adjacency: n={R.shape[0]}, eta={eta}, psi={psi}, "
                f"non-zero fraction={np.count_nonzero(R) / max(R.size, 1):.4f}")
    return ReconstructedAdjacency(R=R, eta=float(eta), psi=float(psi), chi=float(chi))


def r_cache_meta_path(path: str) -> str:
    return f"{path}.json"


def save_r_cache(R: np.ndarray, path: str, float_width: int = 8, meta: Optional[Dict] = None) -> None:
    """
    Write R in the binary cache layout plus a JSON sidecar describing how it was built.

    Args:
        R: n x n reconstructed adjacency
        path: cache file; the sidecar goes to ``<path>.json``
        float_width: 4 or 8 byte floats
        meta: build settings (eta, psi, similarity_top_k) checked again on reuse
    """
    if float_width not in (4, 8):
        error_msg = f"float width must be 4 or 8 bytes, got {float_width}"
        error_logger.error(error_msg)
        raise ConfigError(error_msg)
    R = np.ascontiguousarray(R, dtype=f"<f{float_width}")
    n = R.shape[0]
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "wb") as f:
        f.write(R_CACHE_MAGIC)
        f.write(np.array([n, float_width], dtype="<u8").tobytes())
        f.write(R.tobytes(order="C"))
    with open(r_cache_meta_path(path), "w") as f:
        json.dump({"n": int(n), "float_width": float_width, **(meta or {})}, f, indent=2, sort_keys=True)
    logger.info(f"Wrote R cache ({n}x{n}, {float_width}-byte floats) to {path}")


def load_r_cache_meta(path: str) -> Optional[Dict]:
    """The sidecar written next to an R cache, or None when there is none."""
    meta_path = r_cache_meta_path(path)
    if not os.path.isfile(meta_path):
        return None
    with open(meta_path) as f:
        return json.load(f)


def load_r_cache(path: str) -> np.ndarray:
    header_size = len(R_CACHE_MAGIC) + 16
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < header_size or raw[:len(R_CACHE_MAGIC)] != R_CACHE_MAGIC:
        error_msg = f"{path} is not an R cache file"
        error_logger.error(error_msg)
        raise GraphFormatError(error_msg)

    # 1. Header
    n, width = (int(v) for v in np.frombuffer(raw[len(R_CACHE_MAGIC):header_size], dtype="<u8"))
    if width not in (4, 8):
        error_msg = f"R cache {path} declares a {width}-byte float width"
        error_logger.error(error_msg)
        raise GraphFormatError(error_msg)

    # 2. Values
    body = raw[header_size:]
    if len(body) != n * n * width:
        error_msg = f"R cache {path} is truncated: expected {n * n} values, found {len(body) // width}"
        error_logger.error(error_msg)
        raise GraphFormatError(error_msg)
    return np.frombuffer(body, dtype=f"<f{width}").reshape(n, n).astype(np.float64)
