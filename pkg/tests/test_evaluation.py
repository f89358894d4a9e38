import numpy as np
import pytest

from mohn.data import gen_clusters
from mohn.encoder import EncoderSpec, init_params
from mohn.errors import DimensionMismatch, EmptyIndex, KTooLarge
from mohn.evaluation import (EmbeddingIndex, KnnConfig, clamp_k, embed_dataset, knn_predict,
                             knn_top1)

from conftest import random_unit


def brute_predict(emb, labels, query, k, tau):
    sims = [(float(np.dot(e, query)), i) for i, e in enumerate(emb)]
    top = sorted(sims, key=lambda t: (-t[0], t[1]))[:k]
    scores = {}
    for s, i in top:
        scores[int(labels[i])] = scores.get(int(labels[i]), 0.0) + np.exp(s / tau)
    best = max(scores.values())
    return min(c for c, v in scores.items() if v == best)


def test_hand_weighted_vote():
    emb = np.array([[1.0, 0.0], [0.8, 0.6], [0.0, 1.0]])
    index = EmbeddingIndex(emb, [0, 1, 1])
    # score(A) = e^10, score(B) = e^8 + e^0
    assert np.exp(10) > np.exp(8) + 1
    assert knn_predict(index, [1.0, 0.0], KnnConfig(3, 0.1)) == 0


def test_nearest_point_and_guards(rng):
    emb = random_unit(rng, 10, 4)
    labels = np.arange(10) % 3
    index = EmbeddingIndex(emb, labels)
    assert knn_predict(index, emb[7], KnnConfig(1, 0.1)) == labels[7]
    with pytest.raises(KTooLarge):
        knn_predict(index, emb[0], KnnConfig(11, 0.1))
    with pytest.raises(EmptyIndex):
        knn_predict(EmbeddingIndex(np.zeros((0, 4)), []), emb[0], KnnConfig(1, 0.1))


def test_self_retrieval(rng):
    emb = random_unit(rng, 80, 16)
    index = EmbeddingIndex(emb, rng.integers(0, 5, 80))
    assert knn_top1(index, index, KnnConfig(1, 0.1)) == 1.0


def test_random_null_model(rng):
    n = 4000
    train = EmbeddingIndex(random_unit(rng, n, 32), np.arange(n) % 2)
    test = EmbeddingIndex(random_unit(rng, 2000, 32), rng.integers(0, 2, 2000))
    acc = knn_top1(train, test, KnnConfig(200, 0.1))
    assert abs(acc - 0.5) <= 0.05


def test_matches_brute_force_and_permutation_invariance(rng):
    for _ in range(40):
        n = int(rng.integers(1, 101))
        emb = random_unit(rng, n, 3)
        labels = rng.integers(0, 4, n)
        k = int(rng.integers(1, n + 1))
        index = EmbeddingIndex(emb, labels, 4)
        perm = rng.permutation(n)
        shuffled = EmbeddingIndex(emb[perm], labels[perm], 4)
        for q in random_unit(rng, 5, 3):
            got = knn_predict(index, q, KnnConfig(k, 0.1))
            assert got == brute_predict(emb, labels, q, k, 0.1)
            if k == n:
                assert knn_predict(shuffled, q, KnnConfig(k, 0.1)) == got


def test_duplicate_query_never_lowers_its_class(rng):
    emb = random_unit(rng, 30, 4)
    labels = rng.integers(0, 3, 30)
    q = random_unit(rng, 1, 4)[0]

    def score(e, lab, c, k):
        sims = e @ q
        top = sorted(range(len(sims)), key=lambda i: (-sims[i], i))[:k]
        return sum(np.exp(sims[i] / 0.1) for i in top if lab[i] == c)

    for c in range(3):
        before = score(emb, labels, c, 10)
        after = score(np.vstack([emb, q]), np.append(labels, c), c, 10)
        assert after >= before


def test_embed_dataset():
    ds = gen_clusters(3, 5, 6, 0.1, 0)
    params = init_params(EncoderSpec((6, 8, 4)), 0)
    index = embed_dataset(params, ds)
    np.testing.assert_allclose(np.linalg.norm(index.embeddings, axis=1), 1.0, atol=1e-9)
    assert np.array_equal(index.embeddings, embed_dataset(params, ds).embeddings)
    assert len(embed_dataset(params, ds.subset([]))) == 0
    with pytest.raises(DimensionMismatch):
        embed_dataset(init_params(EncoderSpec((5, 4)), 0), ds)


def test_clamp_k():
    assert clamp_k(KnnConfig(200, 0.1), 900).k == 200
    assert clamp_k(KnnConfig(200, 0.1), 50).k == 50
