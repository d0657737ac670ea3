from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence

import numpy as np

from src.core.errors import ConfigError
from src.graph.graph_io import AttributedGraph
from src.utils.logger import get_data_processing_logger

logger = get_data_processing_logger()

NEGATIVE_SAMPLING_POWER = 0.75


@dataclass(frozen=True, eq=False)
class NegativeSampler:
    """Noise distribution P_n(v) proportional to d_v^(3/4) with its cumulative table."""
    probs: np.ndarray
    cdf: np.ndarray

    @property
    def n(self) -> int:
        return int(len(self.probs))

    def draw(self, count: int, rng: np.random.Generator) -> np.ndarray:
        return np.searchsorted(self.cdf, rng.random(count), side="right").astype(np.int64)


@dataclass(frozen=True, eq=False)
class WalkCorpus:
    """
    Random-walk corpus stored as a padded (r*n) x l array.

    Walk ``k * n + v`` is the k-th walk started at node v, so the walks of round k
    are one contiguous slice. Unused tail positions hold -1.
    """
    walks: np.ndarray
    lengths: np.ndarray
    n: int
    r: int
    l: int
    window: int
    neg: int
    sampler: Optional[NegativeSampler] = None

    def __len__(self) -> int:
        return int(len(self.walks))

    def walk(self, i: int) -> List[int]:
        return self.walks[i, :self.lengths[i]].tolist()

    def __iter__(self) -> Iterator[List[int]]:
        for i in range(len(self)):
            yield self.walk(i)

    def round_indices(self, k: int) -> np.ndarray:
        """Walk indices of round k (one walk per start node)."""
        k = k % self.r
        return np.arange(k * self.n, (k + 1) * self.n)


def generate_walks(graph: AttributedGraph, r: int = 10, l: int = 80, seed: int = 0,
                   window: int = 10, neg: int = 10) -> WalkCorpus:
    """
    Uniform random walks: r walks of at most l nodes from every node.

    The next node is drawn uniformly from the current node's neighbours; a walk started
    at an isolated node stops at length 1. All walks advance together, drawing from one
    generator seeded with ``seed``, so the corpus depends only on the seed.
    """
    if r < 1 or l < 1:
        raise ConfigError(f"walks per node and walk length must be >= 1, got r={r}, l={l}")
    if window < 1 or neg < 0:
        raise ConfigError(f"window must be >= 1 and neg >= 0, got window={window}, neg={neg}")
    rng = np.random.default_rng(seed)
    n = graph.n
    A = graph.adjacency
    indptr, indices = A.indptr, A.indices
    deg = graph.degrees

    starts = np.tile(np.arange(n, dtype=np.int64), r)
    walks = np.full((len(starts), l), -1, dtype=np.int64)
    walks[:, 0] = starts
    lengths = np.ones(len(starts), dtype=np.int64)
    # Every step lands on a node with degree >= 1, so only isolated starts are dead ends
    moving = np.flatnonzero(deg[starts] > 0)
    current = starts[moving]
    for t in range(1, l):
        if not len(moving):
            break
        offsets = (rng.random(len(moving)) * deg[current]).astype(np.int64)
        current = indices[indptr[current] + offsets].astype(np.int64)
        walks[moving, t] = current
        lengths[moving] += 1

    sampler = build_negative_sampler(deg) if np.any(deg > 0) else None
    walks.setflags(write=False)
    lengths.setflags(write=False)
    logger.info(f"Generated {len(walks)} walks (r={r}, l={l}) over {n} nodes, seed={seed}")
    return WalkCorpus(walks=walks, lengths=lengths, n=n, r=r, l=l, window=window, neg=neg, sampler=sampler)


def context_pairs(corpus: WalkCorpus, walk_indices: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    (center, context) pairs inside a window of corpus.window positions.

    Pairs are ordered by walk, then position, then offset from -b to b.

    Args:
        corpus: walk corpus
        walk_indices: restrict to these walks (all walks when None)

    Returns:
        P x 2 int64 array
    """
    if walk_indices is None:
        walks, lengths = corpus.walks, corpus.lengths
    else:
        walk_indices = np.asarray(walk_indices, dtype=np.int64)
        walks, lengths = corpus.walks[walk_indices], corpus.lengths[walk_indices]
    if not len(walks):
        return np.empty((0, 2), dtype=np.int64)

    b = corpus.window
    width = walks.shape[1]
    offsets = np.concatenate([np.arange(-b, 0), np.arange(1, b + 1)])
    positions = np.arange(width)
    ctx_positions = positions[:, None] + offsets[None, :]
    limit = lengths[:, None, None]
    valid = (ctx_positions[None, :, :] >= 0) & (ctx_positions[None, :, :] < limit) & (positions[None, :, None] < limit)
    contexts = walks[:, np.clip(ctx_positions, 0, width - 1)]
    centers = np.broadcast_to(walks[:, :, None], contexts.shape)
    return np.stack([centers[valid], contexts[valid]], axis=1)


def build_negative_sampler(degrees: Sequence[int]) -> NegativeSampler:
    """P(v) = d_v^(3/4) / sum_u d_u^(3/4); zero-degree nodes are never drawn."""
    degrees = np.asarray(degrees, dtype=np.float64)
    if degrees.size == 0 or not np.any(degrees > 0):
        raise ValueError("cannot build a negative sampler: every node has degree 0")
    if np.any(degrees < 0):
        raise ValueError("degrees must be non-negative")
    weights = degrees ** NEGATIVE_SAMPLING_POWER
    probs = weights / weights.sum()
    cdf = np.cumsum(probs)
    cdf[np.flatnonzero(probs)[-1]:] = 1.0
    probs.setflags(write=False)
    cdf.setflags(write=False)
    return NegativeSampler(probs=probs, cdf=cdf)


def sample_negatives(sampler: NegativeSampler, count: int, exclude: int,
                     rng: np.random.Generator) -> List[int]:
    """Draw ``count`` nodes from P_n, redrawing any draw equal to ``exclude``."""
    if count <= 0:
        return []
    if 1.0 - sampler.probs[exclude] <= 1e-15:
        raise ValueError(f"cannot exclude node {exclude}: it carries the whole noise distribution")
    draws = sampler.draw(count, rng)
    clash = draws == exclude
    while clash.any():
        draws[clash] = sampler.draw(int(clash.sum()), rng)
        clash = draws == exclude
    return draws.tolist()


def sample_negative_matrix(sampler: NegativeSampler, contexts: np.ndarray, neg: int,
                           rng: np.random.Generator, centers: Optional[np.ndarray] = None) -> np.ndarray:
    """
    |neg| negatives for each positive pair, redrawn while equal to the pair's context
    (and to its center when ``centers`` is given).

    Returns:
        len(contexts) x neg int64 array
    """
    contexts = np.asarray(contexts, dtype=np.int64)
    out = np.empty((len(contexts), neg), dtype=np.int64)
    if neg == 0 or not len(contexts):
        return out
    remaining = 1.0 - sampler.probs[contexts]
    if centers is not None:
        centers = np.asarray(centers, dtype=np.int64)
        remaining = remaining - np.where(centers != contexts, sampler.probs[centers], 0.0)
    if np.any(remaining <= 1e-15):
        raise ValueError("cannot draw negatives: an excluded node carries the whole noise distribution")

    out[:] = sampler.draw(out.size, rng).reshape(out.shape)

    def clashes():
        bad = out == contexts[:, None]
        if centers is not None:
            bad |= out == centers[:, None]
        return bad

    bad = clashes()
    while bad.any():
        out[bad] = sampler.draw(int(bad.sum()), rng)
        bad = clashes()
    return out


def save_corpus(corpus: WalkCorpus, path: str) -> None:
    """One walk per line, space-separated node ids."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for walk in corpus:
            f.write(" ".join(map(str, walk)) + "\n")
    logger.info(f"Wrote {len(corpus)} walks to {path}")
