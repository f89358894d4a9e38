"""Circular queue of key embeddings used as the negative pool."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (BatchTooLarge, DimensionMismatch, IndivisibleCapacity, InvalidCapacity,
                     InvalidSubsetSize, NotNormalized)
from .numeric import is_unit_rows, pairwise_dots
from .rng import make_rng

BASES = ("query", "key")
UNIT_TOL = 1e-6


@dataclass
class MemoryBank:
    capacity: int
    dim: int
    storage: np.ndarray  # (capacity, dim), unit rows
    write_ptr: int = 0
    filled: int = 0
    total_enqueued: int = 0

    def rows(self) -> np.ndarray:
        return self.storage[: self.filled]

    def copy(self) -> "MemoryBank":
        return MemoryBank(self.capacity, self.dim, self.storage.copy(), self.write_ptr,
                          self.filled, self.total_enqueued)


@dataclass(frozen=True)
class NegativeSelection:
    indices: np.ndarray  # ascending similarity to the anchor, ties by index
    basis: str

    @property
    def size(self) -> int:
        return len(self.indices)


def init_bank(capacity: int, dim: int, seed: int) -> MemoryBank:
    """Bank pre-filled with random unit vectors (zero rows would break cosine similarity)."""
    if capacity < 1 or dim < 1:
        raise InvalidCapacity(f"capacity and dim must be >= 1, got K={capacity}, D={dim}")
    rng = make_rng(seed)
    raw = rng.standard_normal((capacity, dim))
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    # a Gaussian draw of exactly zero norm is not a practical concern
    return MemoryBank(capacity, dim, raw / norms, write_ptr=0, filled=capacity)


def enqueue(bank: MemoryBank, keys) -> MemoryBank:
    """Write a batch of unit keys at the write pointer, overwriting the oldest rows."""
    keys = np.asarray(keys, dtype=np.float64)
    if keys.ndim != 2 or keys.shape[1] != bank.dim:
        raise DimensionMismatch(f"keys shape {keys.shape} vs bank dim {bank.dim}")
    b = keys.shape[0]
    if b > bank.capacity:
        raise BatchTooLarge(f"batch {b} exceeds capacity {bank.capacity}")
    if b == 0 or bank.capacity % b:
        raise IndivisibleCapacity(f"capacity {bank.capacity} not divisible by batch {b}")
    if not is_unit_rows(keys, UNIT_TOL):
        raise NotNormalized("enqueued keys must be unit-norm")
    ptr = bank.write_ptr
    # divisibility means a batch never straddles the end of the ring
    bank.storage[ptr: ptr + b] = keys
    bank.write_ptr = (ptr + b) % bank.capacity
    bank.filled = min(bank.capacity, bank.filled + b)
    bank.total_enqueued += b
    return bank


def hard_negative_count(fraction: float, filled: int) -> int:
    """ceil(fraction * filled), guarded against float error like 0.1 * 30 = 3.0000000000000004."""
    return max(1, math.ceil(fraction * filled - 1e-9))


def select_hard_negatives_batch(bank: MemoryBank, anchors, f_n: int) -> np.ndarray:
    """Row-wise :func:`select_hard_negatives` for a (B, D) array of anchors; (B, f_n) indices."""
    if not 1 <= f_n <= bank.filled:
        raise InvalidSubsetSize(f"f_n={f_n} outside [1, {bank.filled}]")
    sims = pairwise_dots(np.atleast_2d(anchors), bank.rows())
    return kernels.select_smallest(sims, f_n)


def select_hard_negatives(bank: MemoryBank, anchor, f_n: int, basis: str = "query") -> NegativeSelection:
    """The ``f_n`` stored rows least similar (cosine) to ``anchor``.

    ``basis`` only labels which embedding the anchor is (query or key); the
    bank is not modified.
    """
    if basis not in BASES:
        raise ValueError(f"basis must be one of {BASES}")
    anchor = np.asarray(anchor, dtype=np.float64)
    if anchor.shape != (bank.dim,):
        raise DimensionMismatch(f"anchor shape {anchor.shape} vs bank dim {bank.dim}")
    if not is_unit_rows(anchor, UNIT_TOL):
        raise NotNormalized("anchor must be unit-norm")
    idx = select_hard_negatives_batch(bank, anchor[None, :], f_n)[0]
    return NegativeSelection(idx, basis)
