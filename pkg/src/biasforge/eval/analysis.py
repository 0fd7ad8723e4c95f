"""Embedding-space analyses: mean-shift distance and a 3-d projection.

project3 deliberately avoids the closed-form eigendecomposition: the top
components come from deterministic power iteration with deflation, so the
test suite can check it against numpy's eigensolver as an independent
oracle instead of testing a function against itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..core.sampling import SplitMix64
from ..llm_client import EmbeddingSet
from ..mitigation import compute_alignment_loss
from .report import EvalError


def embedding_distance(orig: EmbeddingSet, aug: EmbeddingSet) -> float:
    """Euclidean distance between mean embeddings; by definition the
    square root of the alignment loss."""
    return math.sqrt(compute_alignment_loss(orig, aug))


@dataclass(frozen=True)
class Projection3:
    coords: np.ndarray          # (n, 3) per-vector coordinates
    components: np.ndarray      # (3, dim) principal directions
    shares: tuple               # explained-variance share per component
    ids: tuple                  # pooled record ids, input order
    sources: tuple              # provenance tag per vector
    warnings: tuple = ()


_POWER_TOL = 1e-13
_MAX_ITERS = 10_000


def _start_vector(dim: int, component: int) -> np.ndarray:
    """Deterministic pseudo-random unit start; fixed seed keeps the whole
    projection reproducible across runs and platforms."""
    rng = SplitMix64(0x9E37 + component)
    v = np.array([rng.below(1 << 30) / float(1 << 30) - 0.5 for _ in range(dim)])
    norm = np.linalg.norm(v)
    if norm == 0:
        v = np.ones(dim)
        norm = np.linalg.norm(v)
    return v / norm


def _power_iterate(cov: np.ndarray, component: int) -> tuple:
    """Dominant eigenpair of a symmetric PSD matrix by power iteration."""
    dim = cov.shape[0]
    v = _start_vector(dim, component)
    eigenvalue = 0.0
    for _ in range(_MAX_ITERS):
        w = cov @ v
        norm = np.linalg.norm(w)
        if norm < 1e-300:
            return 0.0, np.zeros(dim)
        w /= norm
        # Convergence up to sign: |<v, w>| -> 1.
        if abs(abs(float(np.dot(v, w))) - 1.0) < _POWER_TOL:
            v = w
            break
        v = w
    eigenvalue = float(v @ cov @ v)
    # Sign convention: the largest-magnitude coefficient is positive.
    pivot = int(np.argmax(np.abs(v)))
    if v[pivot] < 0:
        v = -v
    return eigenvalue, v


def project3(sets: Sequence[EmbeddingSet]) -> Projection3:
    """Center the pooled vectors and project onto the top-3 principal
    directions; returns coordinates plus explained-variance shares."""
    sets = list(sets)
    if not sets:
        raise EvalError("project3 needs at least one embedding set")
    dims = {s.dim for s in sets}
    if len(dims) != 1:
        raise EvalError(f"embedding dims disagree: {sorted(dims)}")
    dim = dims.pop()
    if dim < 3:
        raise EvalError(f"project3 needs dim >= 3, got {dim}")

    rows, ids, sources = [], [], []
    for s in sets:
        for rid, vec in zip(s.ids, s.vectors):
            rows.append(vec)
            ids.append(rid)
            sources.append(s.source)
    x = np.asarray(rows, dtype=np.float64)
    n = x.shape[0]
    if n < 3:
        raise EvalError(f"project3 needs at least 3 vectors, got {n}")

    centered = x - x.mean(axis=0)
    cov = (centered.T @ centered) / (n - 1)
    trace = float(np.trace(cov))

    warnings = []
    components = np.zeros((3, dim))
    eigenvalues = [0.0, 0.0, 0.0]
    deflated = cov.copy()
    rank_tol = max(trace, 1.0) * 1e-12
    for k in range(3):
        value, vector = _power_iterate(deflated, k)
        if value <= rank_tol:
            warnings.append(
                f"covariance rank < {k + 1}; component {k + 1} padded with zeros"
            )
            break
        components[k] = vector
        eigenvalues[k] = value
        deflated = deflated - value * np.outer(vector, vector)

    coords = centered @ components.T
    shares = tuple(
        (v / trace) if trace > 0 else 0.0 for v in eigenvalues
    )
    if trace == 0:
        warnings.append("all vectors identical; projection is all zeros")
    return Projection3(
        coords=coords,
        components=components,
        shares=shares,
        ids=tuple(ids),
        sources=tuple(sources),
        warnings=tuple(warnings),
    )
