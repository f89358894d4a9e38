"""Weighted k-nearest-neighbor evaluation of frozen embeddings."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import kernels
from .encoder import EncoderParams, forward
from .errors import DimensionMismatch, EmptyIndex, KTooLarge
from .numeric import pairwise_dots

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class KnnConfig:
    k: int = 200
    temperature: float = 0.1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.temperature > 0:
            raise ValueError(f"temperature must be > 0, got {self.temperature}")


@dataclass
class EmbeddingIndex:
    embeddings: np.ndarray  # (N, D) unit rows
    labels: np.ndarray
    class_count: int = 0

    def __post_init__(self):
        self.embeddings = np.asarray(self.embeddings, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.embeddings) != len(self.labels):
            raise DimensionMismatch("embedding rows and labels differ in count")
        if not self.class_count:
            self.class_count = int(self.labels.max()) + 1 if len(self.labels) else 0

    def __len__(self):
        return len(self.labels)


def embed_dataset(params: EncoderParams, dataset, activation="relu", preprocess=None) -> EmbeddingIndex:
    """Embed every item with no augmentation; ``preprocess`` maps raw flat features first."""
    x = dataset.flat()
    if x.shape[1] != params.weights[0].shape[1]:
        raise DimensionMismatch(f"data dim {x.shape[1]} vs encoder input {params.weights[0].shape[1]}")
    if len(x) == 0:
        emb = np.zeros((0, params.weights[-1].shape[0]))
    else:
        emb, _ = forward(params, preprocess(x) if preprocess else x, activation)
    return EmbeddingIndex(emb, dataset.labels, dataset.class_count)


def _check(index: EmbeddingIndex, cfg: KnnConfig):
    if len(index) == 0:
        raise EmptyIndex("cannot classify against an empty index")
    if cfg.k > len(index):
        raise KTooLarge(f"k={cfg.k} exceeds index size {len(index)}")


def knn_predict_batch(index: EmbeddingIndex, queries, cfg: KnnConfig, class_count=None) -> np.ndarray:
    _check(index, cfg)
    queries = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    n_classes = max(class_count or 0, index.class_count)
    sims = pairwise_dots(queries, index.embeddings)
    return kernels.knn_vote(sims, index.labels, cfg.k, cfg.temperature, n_classes)


def knn_predict(index: EmbeddingIndex, query, cfg: KnnConfig) -> int:
    """Class with the largest sum of exp(sim / tau) over the top-k neighbors."""
    return int(knn_predict_batch(index, query, cfg)[0])


def knn_top1(train: EmbeddingIndex, test: EmbeddingIndex, cfg: KnnConfig) -> float:
    if len(test) == 0:
        return 0.0
    preds = knn_predict_batch(train, test.embeddings, cfg, test.class_count)
    return float(np.mean(preds == test.labels))


def clamp_k(cfg: KnnConfig, train_size: int) -> KnnConfig:
    if cfg.k <= train_size:
        return cfg
    log.info("clamping knn k from %d to train size %d", cfg.k, train_size)
    return KnnConfig(train_size, cfg.temperature)
