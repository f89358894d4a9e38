import math

import mpmath
import numpy as np
import pytest

from mohn.errors import NotNormalized
from mohn.memory_bank import MemoryBank
from mohn.objective import LossConfig, dual_view_loss, filtered_dual_view_loss, info_nce

from conftest import random_unit


def hand_loss(pos, negs, tau):
    """-log softmax_0 of [pos, negs] / tau in 50-digit arithmetic."""
    mpmath.mp.dps = 50
    terms = [mpmath.exp(mpmath.mpf(v) / tau) for v in [pos] + list(negs)]
    return float(-mpmath.log(terms[0] / sum(terms)))


def toy_bank():
    return MemoryBank(2, 2, np.array([[0.0, 1.0], [-1.0, 0.0]]), 0, 2)


def test_info_nce_uniform_logits():
    q = np.array([1.0, 0.0])
    k = np.array([0.0, 1.0])
    negs = np.array([[0.0, 1.0]] * 3)
    for tau in (0.05, 0.2, 1.0, 7.0):
        loss, _ = info_nce(q, k, negs, tau)
        assert loss == pytest.approx(math.log(4), abs=1e-12)


def test_info_nce_hand_values():
    q = [1.0, 0.0]
    loss1, _ = info_nce(q, q, [[0.0, 1.0]], 1.0)
    loss05, _ = info_nce(q, q, [[0.0, 1.0]], 0.5)
    assert loss1 == pytest.approx(hand_loss(1, [0], 1), abs=1e-12)
    assert loss1 == pytest.approx(0.3132617, abs=1e-7)
    assert loss05 == pytest.approx(hand_loss(1, [0], 0.5), abs=1e-12)
    assert loss05 == pytest.approx(0.1269280, abs=1e-7)


def test_info_nce_rejects_unnormalized():
    with pytest.raises(NotNormalized):
        info_nce([2.0, 0.0], [1.0, 0.0], [[0.0, 1.0]], 1.0)


def test_dual_view_reductions(rng):
    q, k = random_unit(rng, 2, 8)
    negs = random_unit(rng, 5, 8)
    plain, grad = info_nce(q, k, negs, 0.2)
    out0 = dual_view_loss(q, k, negs, LossConfig(0.2, 0.0))
    assert abs(out0.total - plain) < 1e-15
    np.testing.assert_allclose(out0.grad_q, grad, atol=1e-15)
    out1 = dual_view_loss(q, k, negs, LossConfig(0.2, 1.0))
    assert out1.total == out1.key_term
    mpmath.mp.dps = 50
    key_logits = [float(np.dot(k, n)) for n in negs]
    assert out1.key_term == pytest.approx(hand_loss(float(np.dot(q, k)), key_logits, 0.2), abs=1e-12)


def test_dual_view_symmetric_toy():
    q = [1.0, 0.0]
    out = dual_view_loss(q, q, [[0.0, 1.0]], LossConfig(1.0, 0.5))
    assert out.query_term == pytest.approx(0.3132617, abs=1e-7)
    assert out.key_term == pytest.approx(0.3132617, abs=1e-7)
    assert out.total == pytest.approx(0.3132617, abs=1e-7)


def test_filtered_toy_matches_hand_oracle():
    q = np.array([1.0, 0.0])
    out = filtered_dual_view_loss(q, q, toy_bank(), LossConfig(1.0, 0.5, 0.5, "query"))
    qt = hand_loss(1, [0, -1], 1)  # ln(1 + e^-1 + e^-2)
    kt = hand_loss(1, [-1], 1)  # hardest-negative subset is {[-1, 0]}
    assert out.query_term == pytest.approx(qt, abs=1e-12)
    assert out.key_term == pytest.approx(kt, abs=1e-12)
    assert out.total == pytest.approx(0.5 * (qt + kt), abs=1e-12)
    assert out.total == pytest.approx(0.2672670, abs=1e-6)
    assert out.query_term == pytest.approx(0.4076060, abs=1e-7)
    assert out.key_term == pytest.approx(0.1269280, abs=1e-7)


def test_filtered_key_basis_selects_by_key():
    bank = MemoryBank(3, 2, np.array([[0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]), 0, 3)
    q = np.array([1.0, 0.0])
    k = np.array([0.0, 1.0])
    out_k = filtered_dual_view_loss(q, k, bank, LossConfig(1.0, 1.0, 0.3, "key"))
    # farthest from k is [0, -1]: logits k.q = 0, k.[0,-1] = -1
    assert out_k.key_term == pytest.approx(hand_loss(0, [-1], 1), abs=1e-12)
    out_q = filtered_dual_view_loss(q, k, bank, LossConfig(1.0, 1.0, 0.3, "query"))
    # farthest from q is [-1, 0]: k.[-1,0] = 0
    assert out_q.key_term == pytest.approx(hand_loss(0, [0], 1), abs=1e-12)


def test_reduction_chain_random(rng):
    for _ in range(20):
        b, d, n = 3, 16, 12
        q = random_unit(rng, b, d)
        k = random_unit(rng, b, d)
        bank = MemoryBank(n, d, random_unit(rng, n, d), 0, n)
        w = float(rng.uniform(0, 1))
        filt = filtered_dual_view_loss(q, k, bank, LossConfig(0.2, w, 1.0))
        dual = dual_view_loss(q, k, bank.storage, LossConfig(0.2, w))
        assert abs(filt.total - dual.total) < 1e-12
        np.testing.assert_allclose(filt.grad_q, dual.grad_q, atol=1e-12)
        assert filt.total == pytest.approx((1 - w) * filt.query_term + w * filt.key_term, abs=1e-12)
        m0 = filtered_dual_view_loss(q, k, bank, LossConfig(0.2, 0.0, 0.2))
        plain, _ = info_nce(q, k, bank.storage, 0.2)
        assert abs(m0.total - plain) < 1e-12


@pytest.mark.parametrize("basis", ["query", "key"])
def test_grad_q_tangent_finite_differences(basis, rng):
    d, n = 6, 20
    bank = MemoryBank(n, d, random_unit(rng, n, d), 0, n)
    cfg = LossConfig(0.2, 0.3, 0.25, basis)
    for _ in range(5):
        q = random_unit(rng, 1, d)[0]
        k = random_unit(rng, 1, d)[0]
        out = filtered_dual_view_loss(q, k, bank, cfg)
        projected = out.grad_q - np.dot(out.grad_q, q) * q

        def f(x):
            return filtered_dual_view_loss(x / np.linalg.norm(x), k, bank, cfg).total

        h = 1e-5
        num = np.array([(f(q + h * e) - f(q - h * e)) / (2 * h) for e in np.eye(d)])
        rel = np.abs(num - projected) / np.maximum(np.maximum(np.abs(num), np.abs(projected)), 1e-8)
        assert rel.max() < 1e-4


def test_loss_near_uniform_in_high_dim(rng):
    d, n = 256, 64
    q, k = random_unit(rng, 2, d)
    negs = random_unit(rng, n, d)
    loss, _ = info_nce(q, k, negs, 1.0)
    assert loss >= 0
    assert abs(loss - math.log(n + 1)) < 0.5


def test_small_temperature_no_overflow(rng):
    tau = 0.05
    q, k = random_unit(rng, 2, 8)
    negs = random_unit(rng, 30, 8)
    stable, _ = info_nce(q, k, negs, tau)
    logits = np.concatenate([[q @ k], negs @ q]) / tau
    naive = -math.log(math.exp(logits[0]) / sum(math.exp(v) for v in logits))
    assert math.isfinite(stable) and abs(stable - naive) < 1e-9


def test_query_term_monotone_in_positive_logit():
    # negatives fixed at q.n = 0; raise q.k by rotating k toward q
    q = np.array([1.0, 0.0, 0.0])
    negs = np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
    prev = math.inf
    for angle in np.linspace(np.pi / 2, 0, 12):
        k = np.array([np.cos(angle), np.sin(angle), 0.0])
        loss, _ = info_nce(q, k, negs, 0.2)
        assert loss < prev
        prev = loss


def test_only_query_gradient_is_produced():
    q = [1.0, 0.0]
    out = filtered_dual_view_loss(q, q, toy_bank(), LossConfig(1.0, 0.5, 0.5))
    assert set(vars(out)) == {"total", "query_term", "key_term", "grad_q"}
    assert np.shape(out.grad_q) == (2,)
