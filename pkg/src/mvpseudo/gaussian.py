"""Gaussian summaries of embedding sets and the Frechet distance between them.

The distance between two Gaussians ``N(mu_a, S_a)`` and ``N(mu_b, S_b)`` is::

    d^2 = ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2))

The trace of the non-symmetric square root is evaluated through the
symmetric product ``S_a^(1/2) S_b S_a^(1/2)``, which has the same spectrum
and lets every square root go through ``numpy.linalg.eigh``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    InsufficientSamples,
    InvalidData,
    NotPositiveSemiDefinite,
    NotSymmetric,
    NumericalFailure,
)

__all__ = [
    "DEFAULT_RIDGE",
    "EmbeddingSet",
    "GaussianSummary",
    "estimate_gaussian",
    "sqrt_psd",
    "frechet_distance",
]

DEFAULT_RIDGE = 1e-6
SYMMETRY_TOL = 1e-9
EIGEN_TOL = 1e-9
RESIDUAL_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """Rows of embedding vectors (frames or pooled items) from one encoder."""

    vectors: np.ndarray
    items: tuple[str, ...] = ()
    encoder_id: str = ""

    def __post_init__(self):
        v = np.asarray(self.vectors)
        if v.ndim == 1:
            v = v[None, :]
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise InvalidData(f"expected a non-empty 2-D matrix, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidData(f"non-finite values in embeddings of {self.encoder_id!r}")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "items", tuple(self.items))

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @classmethod
    def concat(cls, sets: Sequence["EmbeddingSet"], encoder_id: str = "") -> "EmbeddingSet":
        if not sets:
            raise InsufficientSamples("no embedding sets to pool")
        dims = {s.dim for s in sets}
        if len(dims) != 1:
            raise DimensionMismatch(f"cannot pool embeddings of dimensions {sorted(dims)}")
        items = tuple(i for s in sets for i in s.items)
        return cls(np.vstack([s.vectors for s in sets]), items, encoder_id or sets[0].encoder_id)


@dataclass(frozen=True, eq=False)
class GaussianSummary:
    """Mean and (symmetrized) covariance of an embedding set."""

    mean: np.ndarray
    covariance: np.ndarray
    sample_count: int = 0

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64).reshape(-1)
        cov = np.array(self.covariance, dtype=np.float64)
        if cov.ndim == 0 and mean.size == 1:
            cov = cov.reshape(1, 1)
        if cov.shape != (mean.size, mean.size):
            raise DimensionMismatch(
                f"covariance shape {cov.shape} does not match mean length {mean.size}"
            )
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise InvalidData("non-finite Gaussian parameters")
        cov = 0.5 * (cov + cov.T)
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def dim(self) -> int:
        return self.mean.size

    @cached_property
    def sqrt_covariance(self) -> np.ndarray:
        return sqrt_psd(self.covariance)


def estimate_gaussian(x: EmbeddingSet | np.ndarray, ridge: float = DEFAULT_RIDGE) -> GaussianSummary:
    """Fit a Gaussian to the rows of ``x``.

    Uses the unbiased (n - 1) covariance estimator and adds ``ridge * I``.
    """
    if not isinstance(x, EmbeddingSet):
        x = EmbeddingSet(np.asarray(x))
    if ridge < 0 or not np.isfinite(ridge):
        raise InvalidData(f"ridge must be a finite non-negative number, got {ridge}")
    if x.n < 2:
        raise InsufficientSamples(f"need at least 2 rows to estimate a covariance, got {x.n}")
    v = x.vectors.astype(np.float64)
    mean = v.mean(axis=0)
    dev = v - mean
    cov = dev.T @ dev / (x.n - 1)
    if ridge:
        cov = cov + ridge * np.eye(x.dim)
    return GaussianSummary(mean, cov, x.n)


def _check_symmetric(m: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(m))) if m.size else 1.0)
    if np.max(np.abs(m - m.T)) > SYMMETRY_TOL * scale:
        raise NotSymmetric("matrix is not symmetric within tolerance")
    return scale


def sqrt_psd(m: np.ndarray) -> np.ndarray:
    """Principal square root of a symmetric positive semi-definite matrix.

    Eigenvalues in ``[-tol, 0)`` are treated as round-off and clamped to zero;
    anything more negative raises :class:`NotPositiveSemiDefinite`.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    scale = _check_symmetric(m)
    m = 0.5 * (m + m.T)
    w, v = np.linalg.eigh(m)
    if w.size and w[0] < -EIGEN_TOL * scale:
        raise NotPositiveSemiDefinite(f"smallest eigenvalue {w[0]:.3e} is negative")
    root = np.sqrt(np.clip(w, 0.0, None))
    out = (v * root) @ v.T
    return 0.5 * (out + out.T)


def frechet_distance(g_l: GaussianSummary, g_u: GaussianSummary) -> float:
    """Frechet distance between two Gaussian summaries (always >= 0)."""
    if g_l.dim != g_u.dim:
        raise DimensionMismatch(f"dimension {g_l.dim} != {g_u.dim}")
    diff = g_l.mean - g_u.mean
    s = g_l.sqrt_covariance
    inner = s @ g_u.covariance @ s
    inner = 0.5 * (inner + inner.T)
    tr_cross = float(np.trace(sqrt_psd(inner)))
    value = float(diff @ diff) + float(np.trace(g_l.covariance)) + float(np.trace(g_u.covariance)) - 2.0 * tr_cross
    if value < 0.0:
        if value < -RESIDUAL_TOL:
            raise NumericalFailure(f"negative Frechet distance {value:.3e}")
        value = 0.0
    return value
