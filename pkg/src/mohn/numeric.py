"""Small numerically careful primitives shared by the rest of the package."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyInput, ZeroNorm

EPS = 1e-12


def _as_vector(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("vector contains non-finite entries")
    return arr


def l2_normalize(v) -> np.ndarray:
    """Return ``v / ||v||``; raises :class:`ZeroNorm` when ``||v|| <= 1e-12``."""
    arr = _as_vector(v)
    norm = float(np.sqrt(np.dot(arr, arr)))
    if norm <= EPS:
        raise ZeroNorm(f"cannot normalize vector with norm {norm:.3g}")
    return arr / norm


def l2_normalize_rows(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise normalization. Returns (unit rows, row norms)."""
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    if np.any(norms <= EPS):
        bad = int(np.argmax(norms <= EPS))
        raise ZeroNorm(f"row {bad} has norm {norms[bad]:.3g}")
    return x / norms[:, None], norms


def cosine_similarity(a, b) -> float:
    a = _as_vector(a)
    b = _as_vector(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"dimension {a.shape[0]} vs {b.shape[0]}")
    na = math.sqrt(float(np.dot(a, a)))
    nb = math.sqrt(float(np.dot(b, b)))
    if na <= EPS or nb <= EPS:
        raise ZeroNorm("cosine similarity of a zero vector is undefined")
    # product of norms is symmetric, so the result is exactly symmetric in (a, b)
    s = float(np.dot(a, b)) / (na * nb)
    return min(1.0, max(-1.0, s))


def log_sum_exp(xs: Sequence[float]) -> float:
    arr = np.asarray(xs, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyInput("log_sum_exp of an empty sequence")
    if not np.all(np.isfinite(arr)):
        raise ValueError("log_sum_exp requires finite entries")
    if arr.size == 1:
        return float(arr[0])
    top = float(arr.max())
    return top + math.log(float(np.sum(np.exp(arr - top))))


def is_unit_rows(x: np.ndarray, tol: float = 1e-6) -> bool:
    x = np.atleast_2d(x)
    norms = np.sqrt(np.einsum("ij,ij->i", x, x))
    return bool(np.all(np.abs(norms - 1.0) <= tol))


def pairwise_dots(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """(N, D) x (M, D) -> (N, M) dot products with a fixed per-entry summation order.

    BLAS gemm may round identical rows differently depending on where they sit
    in a block; callers that break ties by index need bit-equal values for
    bit-equal rows, so this avoids BLAS.
    """
    return np.einsum("id,jd->ij", a, b, optimize=False)
