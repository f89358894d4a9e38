"""Contrastive objectives: InfoNCE, dual-view, and hard-negative-filtered dual-view.

All three share one batched core. Every denominator includes the positive
logit (logits are ``[positive, negatives...]`` with label 0). Keys and
negatives are constants: only the gradient with respect to ``q`` is produced.
Per-sample losses are averaged over the batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DimensionMismatch, NotNormalized
from .memory_bank import BASES, MemoryBank, hard_negative_count, select_hard_negatives_batch
from .numeric import is_unit_rows

UNIT_TOL = 1e-6


@dataclass(frozen=True)
class LossConfig:
    temperature: float = 0.2
    view_weight: float = 0.1  # weight on the key-view term; not the EMA coefficient
    hard_fraction: float = 0.2
    basis: str = "query"

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        if not 0.0 <= self.view_weight <= 1.0:
            raise ValueError(f"view_weight must lie in [0, 1], got {self.view_weight}")
        if not 0.0 < self.hard_fraction <= 1.0:
            raise ValueError(f"hard_fraction must lie in (0, 1], got {self.hard_fraction}")
        if self.basis not in BASES:
            raise ValueError(f"basis must be one of {BASES}, got {self.basis!r}")


@dataclass(frozen=True)
class LossOutput:
    total: float
    query_term: float
    key_term: float
    grad_q: np.ndarray  # same shape as the q passed in


def _check_unit(name, x):
    if not np.all(np.isfinite(x)):
        raise NotNormalized(f"{name} has non-finite entries")
    if not is_unit_rows(x, UNIT_TOL):
        raise NotNormalized(f"{name} rows must be unit-norm")


def _prepare(q, k, negatives):
    q = np.asarray(q, dtype=np.float64)
    single = q.ndim == 1
    q2 = np.atleast_2d(q)
    k2 = np.atleast_2d(np.asarray(k, dtype=np.float64))
    neg = np.atleast_2d(np.asarray(negatives, dtype=np.float64))
    if q2.ndim != 2 or k2.shape != q2.shape:
        raise DimensionMismatch(f"q shape {q.shape} vs k shape {np.shape(k)}")
    if neg.shape[1] != q2.shape[1] or neg.shape[0] < 1:
        raise DimensionMismatch(f"negatives shape {neg.shape} vs embedding dim {q2.shape[1]}")
    _check_unit("q", q2)
    _check_unit("k", k2)
    _check_unit("negatives", neg)
    return q2, k2, neg, single


def _dual_core(q, k, negatives, tau, weight, key_neg_idx=None, need_key_term=True):
    """Batched dual-view loss.

    ``key_neg_idx`` (B, F) restricts each key-view denominator to a subset of
    ``negatives``; ``None`` uses all of them.
    """
    b = q.shape[0]
    pos = np.einsum("ij,ij->i", q, k)[:, None]
    loss_q, p_q = kernels.softmax_xent_rows(np.hstack([pos, q @ negatives.T]) / tau)
    query_term = float(loss_q.mean())
    # d(loss_q)/dq = ((p0 - 1) k + sum_i p_i n_i) / tau
    grad = ((p_q[:, :1] - 1.0) * k + p_q[:, 1:] @ negatives) / tau
    if need_key_term:
        sims_k = k @ negatives.T
        if key_neg_idx is not None:
            sims_k = np.take_along_axis(sims_k, key_neg_idx, axis=1)
        loss_k, p_k = kernels.softmax_xent_rows(np.hstack([pos, sims_k]) / tau)
        key_term = float(loss_k.mean())
        # q enters the key view only through the positive logit k.q
        grad_key = (p_k[:, :1] - 1.0) * k / tau
    else:
        key_term, grad_key = 0.0, 0.0
    total = (1.0 - weight) * query_term + weight * key_term
    grad_q = ((1.0 - weight) * grad + weight * grad_key) / b
    return total, query_term, key_term, grad_q


def _output(total, qt, kt, grad, single):
    return LossOutput(total, qt, kt, grad[0] if single else grad)


def info_nce(q, k_pos, negatives, temperature: float):
    """InfoNCE loss against one positive and a set of negatives. Returns (loss, dloss/dq)."""
    if not temperature > 0:
        raise ValueError("temperature must be > 0")
    q2, k2, neg, single = _prepare(q, k_pos, negatives)
    total, _, _, grad = _dual_core(q2, k2, neg, temperature, 0.0, need_key_term=False)
    return total, (grad[0] if single else grad)


def dual_view_loss(q, k, negatives, cfg: LossConfig) -> LossOutput:
    """``(1 - w) * InfoNCE(q; k, negatives) + w * InfoNCE(k; q, negatives)``."""
    q2, k2, neg, single = _prepare(q, k, negatives)
    return _output(*_dual_core(q2, k2, neg, cfg.temperature, cfg.view_weight), single)


def filtered_dual_view_loss(q, k, bank: MemoryBank, cfg: LossConfig) -> LossOutput:
    """Dual-view loss whose key-view denominator keeps only the hard negatives.

    The query view contrasts against every bank row. The key view keeps the
    ``ceil(hard_fraction * filled)`` rows with the lowest cosine similarity to
    the anchor (``q`` or ``k`` depending on ``cfg.basis``).
    """
    q2, k2, neg, single = _prepare(q, k, bank.rows())
    f_n = hard_negative_count(cfg.hard_fraction, bank.filled)
    anchors = q2 if cfg.basis == "query" else k2
    idx = select_hard_negatives_batch(bank, anchors, f_n)
    return _output(*_dual_core(q2, k2, neg, cfg.temperature, cfg.view_weight, idx), single)
