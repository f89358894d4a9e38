"""Finite-difference check of the analytic gradient of the full filtered loss."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import EncoderSpec, backward, forward, init_params
from .errors import UsageError
from .memory_bank import init_bank
from .numeric import l2_normalize_rows
from .objective import LossConfig, filtered_dual_view_loss
from .rng import make_rng

MAX_DIM = 32
MAX_BATCH = 8


def relative_error(analytic, numeric, floor=1e-8):
    """Entry-wise |a - n| / max(|a|, |n|, floor)."""
    a = np.asarray(analytic)
    n = np.asarray(numeric)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


@dataclass
class GradCheckResult:
    max_rel_error: float
    per_tensor: list[float]
    loss: float


def grad_check(seed=0, dim=8, batch=4, queue=32, step=1e-5, loss_cfg: LossConfig | None = None,
               activation="relu", corrupt=False) -> GradCheckResult:
    """Compare backward() against central differences on an [dim, 2*dim, dim] encoder.

    ``corrupt`` adds 1e-2 to one analytic entry, to confirm the check fails.
    """
    if dim > MAX_DIM or batch > MAX_BATCH or dim < 2 or batch < 1 or queue < 1:
        raise UsageError(f"grad-check sizes must satisfy 2 <= dim <= {MAX_DIM}, "
                         f"1 <= batch <= {MAX_BATCH}, queue >= 1")
    cfg = loss_cfg or LossConfig()
    spec = EncoderSpec((dim, 2 * dim, dim), activation)
    params = init_params(spec, seed)
    rng = make_rng(seed, stream=7)
    x = rng.standard_normal((batch, dim))
    k, _ = l2_normalize_rows(rng.standard_normal((batch, dim)))
    bank = init_bank(queue, dim, seed + 1)

    def loss_of(p):
        q, cache = forward(p, x, activation)
        return filtered_dual_view_loss(q, k, bank, cfg), cache

    out, cache = loss_of(params)
    grads = backward(params, cache, out.grad_q).tensors()
    if corrupt:
        grads[0] = grads[0].copy()
        grads[0].flat[0] += 1e-2
    errors = []
    for t, g in zip(params.tensors(), grads):
        numeric = np.zeros_like(t)
        for i in range(t.size):
            orig = t.flat[i]
            t.flat[i] = orig + step
            plus = loss_of(params)[0].total
            t.flat[i] = orig - step
            minus = loss_of(params)[0].total
            t.flat[i] = orig
            numeric.flat[i] = (plus - minus) / (2 * step)
        errors.append(float(relative_error(g, numeric).max()))
    return GradCheckResult(max(errors), errors, out.total)
