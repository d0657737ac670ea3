"""
Three-branch coupled network: a shared encoder feeding an autoencoder branch
(second-order proximity), a first-order branch over edges and a skip-gram branch
with negative sampling (high-order proximity). Forward and backward passes are
written out by hand over numpy arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from src.core.errors import DivergenceError
from src.model.config import ModelConfig


@dataclass
class ModelParams:
    """Encoder W/b, decoder W_hat/b_hat (encoder widths reversed) and the skip-gram output matrix H."""
    W: List[np.ndarray]
    b: List[np.ndarray]
    W_hat: List[np.ndarray]
    b_hat: List[np.ndarray]
    H: np.ndarray

    @property
    def K(self) -> int:
        return len(self.W)

    @property
    def encoder_dims(self) -> Tuple[int, ...]:
        return (self.W[0].shape[0],) + tuple(w.shape[1] for w in self.W)

    def arrays(self) -> Dict[str, np.ndarray]:
        """Every parameter by a stable name; the arrays are the live ones, not copies."""
        out: Dict[str, np.ndarray] = {}
        for k in range(self.K):
            out[f"W{k + 1}"] = self.W[k]
            out[f"b{k + 1}"] = self.b[k]
        for k in range(len(self.W_hat)):
            out[f"W_hat{k + 1}"] = self.W_hat[k]
            out[f"b_hat{k + 1}"] = self.b_hat[k]
        out["H"] = self.H
        return out

    @classmethod
    def from_arrays(cls, arrays: Dict[str, np.ndarray]) -> "ModelParams":
        K = sum(1 for name in arrays if name.startswith("W") and not name.startswith("W_hat"))
        return cls(
            W=[np.array(arrays[f"W{k + 1}"], dtype=np.float64) for k in range(K)],
            b=[np.array(arrays[f"b{k + 1}"], dtype=np.float64) for k in range(K)],
            W_hat=[np.array(arrays[f"W_hat{k + 1}"], dtype=np.float64) for k in range(K)],
            b_hat=[np.array(arrays[f"b_hat{k + 1}"], dtype=np.float64) for k in range(K)],
            H=np.array(arrays["H"], dtype=np.float64),
        )

    def copy(self) -> "ModelParams":
        return ModelParams.from_arrays(self.arrays())

    def zeros_like(self) -> "ModelParams":
        return ModelParams.from_arrays({k: np.zeros_like(v) for k, v in self.arrays().items()})

    def validate(self) -> "ModelParams":
        dims = self.encoder_dims
        for k, (w, bias) in enumerate(zip(self.W, self.b)):
            if w.shape != (dims[k], dims[k + 1]) or bias.shape != (dims[k + 1],):
                raise ValueError(f"encoder layer {k + 1} has shapes {w.shape}/{bias.shape}, expected chain {dims}")
        rev = dims[::-1]
        if len(self.W_hat) != self.K:
            raise ValueError("decoder must mirror the encoder layer count")
        for k, (w, bias) in enumerate(zip(self.W_hat, self.b_hat)):
            if w.shape != (rev[k], rev[k + 1]) or bias.shape != (rev[k + 1],):
                raise ValueError(f"decoder layer {k + 1} has shapes {w.shape}/{bias.shape}, expected chain {rev}")
        if self.H.shape != (dims[0], dims[-1]):
            raise ValueError(f"H must be {dims[0]} x {dims[-1]}, got {self.H.shape}")
        if not all(np.all(np.isfinite(a)) for a in self.arrays().values()):
            raise ValueError("parameters contain non-finite values")
        return self


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    s = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=(fan_in, fan_out))


def init_params(encoder_dims: Sequence[int], seed: int) -> ModelParams:
    """Uniform [-s, s] init with s = sqrt(6 / (fan_in + fan_out)); biases start at 0."""
    dims = tuple(int(k) for k in encoder_dims)
    if len(dims) < 2:
        raise ValueError(f"encoder needs an input and at least one layer, got {dims}")
    rng = np.random.default_rng(seed)
    W = [_glorot(rng, dims[k], dims[k + 1]) for k in range(len(dims) - 1)]
    b = [np.zeros(dims[k + 1]) for k in range(len(dims) - 1)]
    rev = dims[::-1]
    W_hat = [_glorot(rng, rev[k], rev[k + 1]) for k in range(len(rev) - 1)]
    b_hat = [np.zeros(rev[k + 1]) for k in range(len(rev) - 1)]
    H = _glorot(rng, dims[0], dims[-1])
    return ModelParams(W=W, b=b, W_hat=W_hat, b_hat=b_hat, H=H)


def _activate(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == "sigmoid":
        return expit(z)
    return np.tanh(z)


def _activation_grad(a: np.ndarray, activation: str) -> np.ndarray:
    """Derivative expressed through the activation output."""
    if activation == "sigmoid":
        return a * (1.0 - a)
    return 1.0 - a * a


def _encoder_forward(params: ModelParams, X: np.ndarray, activation: str) -> List[np.ndarray]:
    acts = [X]
    for w, bias in zip(params.W, params.b):
        acts.append(_activate(acts[-1] @ w + bias, activation))
    return acts


def _decoder_forward(params: ModelParams, Y: np.ndarray, activation: str) -> List[np.ndarray]:
    acts = [Y]
    last = len(params.W_hat) - 1
    for k, (w, bias) in enumerate(zip(params.W_hat, params.b_hat)):
        z = acts[-1] @ w + bias
        # Final decoder layer is linear: R entries can exceed the activation range
        acts.append(z if k == last else _activate(z, activation))
    return acts


def encode(params: ModelParams, R_rows: np.ndarray, activation: str = "tanh") -> np.ndarray:
    """y^(K) for one R row (1-D) or a stack of rows (2-D)."""
    R_rows = np.asarray(R_rows, dtype=np.float64)
    single = R_rows.ndim == 1
    X = R_rows[None, :] if single else R_rows
    if X.shape[1] != params.W[0].shape[0]:
        raise ValueError(f"input has {X.shape[1]} columns, encoder expects {params.W[0].shape[0]}")
    Y = _encoder_forward(params, X, activation)[-1]
    if not np.all(np.isfinite(Y)):
        raise DivergenceError("encoder produced non-finite output; parameters have diverged")
    return Y[0] if single else Y


def decode(params: ModelParams, y: np.ndarray, activation: str = "tanh") -> np.ndarray:
    """Reconstruction R_hat for one embedding (1-D) or a stack (2-D)."""
    y = np.asarray(y, dtype=np.float64)
    single = y.ndim == 1
    Y = y[None, :] if single else y
    if Y.shape[1] != params.W_hat[0].shape[0]:
        raise ValueError(f"embedding has {Y.shape[1]} values, decoder expects {params.W_hat[0].shape[0]}")
    out = _decoder_forward(params, Y, activation)[-1]
    return out[0] if single else out


def encode_all(params: ModelParams, R: np.ndarray, activation: str = "tanh", chunk: int = 4096) -> np.ndarray:
    """Embeddings for every row of R, computed in row chunks."""
    parts = [encode(params, R[i:i + chunk], activation) for i in range(0, R.shape[0], chunk)]
    return np.vstack(parts) if parts else np.empty((0, params.W[-1].shape[1]))


@dataclass
class BatchBundle:
    """
    Aligned inputs of one mini-batch.

    rows/B_rows feed the autoencoder loss, edges the first-order loss and
    pairs/negatives the skip-gram loss. Any of them may be empty.
    """
    R: np.ndarray
    rows: np.ndarray = field(default_factory=lambda: np.empty(0, dtype=np.int64))
    B_rows: Optional[np.ndarray] = None
    edges: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=np.int64))
    pairs: np.ndarray = field(default_factory=lambda: np.empty((0, 2), dtype=np.int64))
    negatives: np.ndarray = field(default_factory=lambda: np.empty((0, 0), dtype=np.int64))

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64).reshape(-1)
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.pairs = np.asarray(self.pairs, dtype=np.int64).reshape(-1, 2)
        self.negatives = _negative_matrix(self.negatives, len(self.pairs))
        if self.B_rows is None:
            self.B_rows = np.ones((len(self.rows), self.R.shape[1]))
        if self.B_rows.shape != (len(self.rows), self.R.shape[1]):
            raise ValueError(f"penalty rows have shape {self.B_rows.shape}, expected {(len(self.rows), self.R.shape[1])}")


def _negative_matrix(negatives, n_pairs: int) -> np.ndarray:
    negatives = np.asarray(negatives, dtype=np.int64)
    if negatives.size == 0:
        return np.empty((n_pairs, 0), dtype=np.int64)
    return negatives.reshape(n_pairs, -1)


def _fop_value(s: np.ndarray) -> float:
    # -log sigmoid(s), averaged over the batch
    return float(np.mean(np.logaddexp(0.0, -s)))


def _sg_counts(center_rows: np.ndarray, pairs: np.ndarray, negatives: np.ndarray,
               n_rows: int, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Positive and negative occurrence counts per (center row, node).

    The skip-gram loss only depends on how often each center meets each node as a
    context or as a noise draw, so both passes work on these n_rows x n matrices.
    """
    shape = (n_rows, n)
    pos = sp.coo_matrix((np.ones(len(pairs)), (center_rows, pairs[:, 1])), shape=shape).toarray()
    if negatives.size:
        rows = np.repeat(center_rows, negatives.shape[1])
        neg = sp.coo_matrix((np.ones(negatives.size), (rows, negatives.reshape(-1))), shape=shape).toarray()
    else:
        neg = np.zeros(shape)
    return pos, neg


def _sg_value(S: np.ndarray, pos: np.ndarray, neg: np.ndarray) -> float:
    # -log sigmoid(s) per context occurrence, -log sigmoid(-s) per noise draw
    return float(np.sum(pos * np.logaddexp(0.0, -S)) + np.sum(neg * np.logaddexp(0.0, S)))


def loss_fop(params: ModelParams, R: np.ndarray, edges: np.ndarray, activation: str = "tanh") -> float:
    """Mean over existing edges of -log sigmoid(y_i . y_j)."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if not len(edges):
        raise ValueError("first-order loss needs at least one edge")
    nodes, inv = np.unique(edges, return_inverse=True)
    Y = encode(params, R[nodes], activation)
    inv = inv.reshape(-1, 2)
    return _fop_value(np.sum(Y[inv[:, 0]] * Y[inv[:, 1]], axis=1))


def loss_ae(params: ModelParams, R_rows: np.ndarray, B_rows: np.ndarray, activation: str = "tanh") -> float:
    """Sum over rows of ||(R_hat_i - R_i) * b_i||^2."""
    R_rows = np.atleast_2d(np.asarray(R_rows, dtype=np.float64))
    B_rows = np.atleast_2d(np.asarray(B_rows, dtype=np.float64))
    if R_rows.shape != B_rows.shape:
        raise ValueError(f"row batch {R_rows.shape} and penalty rows {B_rows.shape} differ in shape")
    R_hat = decode(params, encode(params, R_rows, activation), activation)
    return float(np.sum(((R_hat - R_rows) * B_rows) ** 2))


def loss_sg(params: ModelParams, R: np.ndarray, pairs: np.ndarray, negatives: np.ndarray,
            activation: str = "tanh") -> float:
    """-sum over pairs of [log sigmoid(h_ctx . y_center) + sum_s log sigmoid(-h_s . y_center)]."""
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    if not len(pairs):
        raise ValueError("skip-gram loss needs at least one (center, context) pair")
    negatives = _negative_matrix(negatives, len(pairs))
    nodes, inv = np.unique(pairs[:, 0], return_inverse=True)
    Y = encode(params, R[nodes], activation)
    pos, neg = _sg_counts(inv.reshape(-1), pairs, negatives, len(nodes), params.H.shape[0])
    return _sg_value(Y @ params.H.T, pos, neg)


def loss_reg(params: ModelParams) -> float:
    """Half the squared Frobenius norms of encoder and decoder weights; biases and H excluded."""
    return 0.5 * float(sum(np.sum(w * w) for w in params.W) + sum(np.sum(w * w) for w in params.W_hat))


def branch_weights(config: ModelConfig) -> Dict[str, float]:
    return {"sg": 1.0, "ae": config.alpha, "fop": config.beta, "reg": config.gamma}


def loss_and_gradients(params: ModelParams, bundle: BatchBundle, weights: Dict[str, float],
                       activation: str = "tanh") -> Tuple[Dict[str, float], ModelParams]:
    """
    Weighted loss terms and the exact gradient of their weighted sum.

    Branches with weight 0 or an empty batch are skipped and contribute 0. The shared
    encoder receives the gradient of every active branch in a single backward pass.

    Args:
        params: model parameters
        bundle: batch inputs
        weights: coefficient per branch, keys sg, ae, fop, reg

    Returns:
        (unweighted branch values plus "total", gradient set shaped like params)
    """
    w_sg, w_ae = weights.get("sg", 0.0), weights.get("ae", 0.0)
    w_fop, w_reg = weights.get("fop", 0.0), weights.get("reg", 0.0)
    use_sg = w_sg != 0 and len(bundle.pairs) > 0
    use_ae = w_ae != 0 and len(bundle.rows) > 0
    use_fop = w_fop != 0 and len(bundle.edges) > 0

    grads = params.zeros_like()
    terms = {"sg": 0.0, "ae": 0.0, "fop": 0.0, "reg": 0.0}

    parts = []
    if use_sg:
        parts.append(bundle.pairs[:, 0])
    if use_ae:
        parts.append(bundle.rows)
    if use_fop:
        parts.append(bundle.edges.reshape(-1))

    if parts:
        nodes = np.unique(np.concatenate(parts))
        acts = _encoder_forward(params, bundle.R[nodes], activation)
        Y = acts[-1]
        dY = np.zeros_like(Y)

        if use_fop:
            ei = np.searchsorted(nodes, bundle.edges)
            s = np.sum(Y[ei[:, 0]] * Y[ei[:, 1]], axis=1)
            terms["fop"] = _fop_value(s)
            g = -w_fop * expit(-s) / len(s)
            np.add.at(dY, ei[:, 0], g[:, None] * Y[ei[:, 1]])
            np.add.at(dY, ei[:, 1], g[:, None] * Y[ei[:, 0]])

        if use_ae:
            ri = np.searchsorted(nodes, bundle.rows)
            dec = _decoder_forward(params, Y[ri], activation)
            B = bundle.B_rows
            diff = dec[-1] - bundle.R[bundle.rows]
            terms["ae"] = float(np.sum((diff * B) ** 2))
            delta = w_ae * 2.0 * diff * B * B
            last = len(params.W_hat) - 1
            for k in range(last, -1, -1):
                if k != last:
                    delta = delta * _activation_grad(dec[k + 1], activation)
                grads.W_hat[k] += dec[k].T @ delta
                grads.b_hat[k] += delta.sum(axis=0)
                delta = delta @ params.W_hat[k].T
            np.add.at(dY, ri, delta)

        if use_sg:
            ci = np.searchsorted(nodes, bundle.pairs[:, 0])
            pos, neg = _sg_counts(ci, bundle.pairs, bundle.negatives, len(nodes), params.H.shape[0])
            S = Y @ params.H.T
            terms["sg"] = _sg_value(S, pos, neg)
            G = w_sg * (neg * expit(S) - pos * expit(-S))
            dY += G @ params.H
            grads.H += G.T @ Y

        delta = dY
        for k in range(params.K - 1, -1, -1):
            delta = delta * _activation_grad(acts[k + 1], activation)
            grads.W[k] += acts[k].T @ delta
            grads.b[k] += delta.sum(axis=0)
            if k:
                delta = delta @ params.W[k].T

    if w_reg != 0:
        terms["reg"] = loss_reg(params)
        for k in range(params.K):
            grads.W[k] += w_reg * params.W[k]
            grads.W_hat[k] += w_reg * params.W_hat[k]

    terms["total"] = w_sg * terms["sg"] + w_ae * terms["ae"] + w_fop * terms["fop"] + w_reg * terms["reg"]
    return terms, grads


def loss_terms(params: ModelParams, bundle: BatchBundle, config: ModelConfig) -> Dict[str, float]:
    """Unweighted branch values and the weighted total for one bundle."""
    terms = {"sg": 0.0, "ae": 0.0, "fop": 0.0, "reg": loss_reg(params)}
    if len(bundle.pairs):
        terms["sg"] = loss_sg(params, bundle.R, bundle.pairs, bundle.negatives, config.activation)
    if len(bundle.rows):
        terms["ae"] = loss_ae(params, bundle.R[bundle.rows], bundle.B_rows, config.activation)
    if len(bundle.edges):
        terms["fop"] = loss_fop(params, bundle.R, bundle.edges, config.activation)
    w = branch_weights(config)
    terms["total"] = sum(w[k] * terms[k] for k in ("sg", "ae", "fop", "reg"))
    return terms


def total_loss(params: ModelParams, bundle: BatchBundle, config: ModelConfig) -> float:
    """L = L_sg + alpha * L_ae + beta * L_fop + gamma * L_reg; empty branches contribute 0."""
    return loss_terms(params, bundle, config)["total"]


def gradients(params: ModelParams, bundle: BatchBundle, config: ModelConfig) -> ModelParams:
    """Analytic gradient of total_loss with respect to every parameter."""
    terms, grads = loss_and_gradients(params, bundle, branch_weights(config), config.activation)
    if not np.isfinite(terms["total"]) or not all(np.all(np.isfinite(g)) for g in grads.arrays().values()):
        raise DivergenceError("non-finite gradient", diagnostics=terms)
    return grads
