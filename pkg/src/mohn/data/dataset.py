from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidShape
from ..rng import make_rng


@dataclass
class Dataset:
    """Images as an (N, H, W, C) float array in [0, 1] plus integer labels.

    Synthetic feature vectors are stored as 1 x dim x 1 images.
    """

    images: np.ndarray
    labels: np.ndarray
    class_count: int
    split: str = "train"

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4 or len(self.images) != len(self.labels):
            raise InvalidShape(
                f"images {self.images.shape} / labels {self.labels.shape} are inconsistent")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise InvalidShape("labels outside [0, class_count)")

    def __len__(self):
        return len(self.labels)

    @property
    def is_vector(self) -> bool:
        return self.images.shape[1] == 1 and self.images.shape[3] == 1

    @property
    def feature_dim(self) -> int:
        return int(np.prod(self.images.shape[1:]))

    def flat(self) -> np.ndarray:
        return self.images.reshape(len(self), self.feature_dim)

    def subset(self, idx, split=None) -> "Dataset":
        idx = np.asarray(idx, dtype=np.int64)
        return Dataset(self.images[idx], self.labels[idx], self.class_count, split or self.split)


def stratified_split(ds: Dataset, holdout_fraction: float, seed: int):
    """Hold out ``round(holdout_fraction * n_c)`` items of every class. Returns (train, test)."""
    rng = make_rng(seed, stream=1)
    train_idx, test_idx = [], []
    for c in range(ds.class_count):
        members = np.flatnonzero(ds.labels == c)
        members = members[rng.permutation(len(members))]
        n_test = int(round(holdout_fraction * len(members)))
        test_idx.append(members[:n_test])
        train_idx.append(members[n_test:])
    train = np.sort(np.concatenate(train_idx))
    test = np.sort(np.concatenate(test_idx))
    return ds.subset(train, "train"), ds.subset(test, "test")


@dataclass
class Normalizer:
    """Affine ``(x - mean) / std``; mean/std broadcast over the trailing image axes."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def per_channel(cls, ds: Dataset) -> "Normalizer":
        mean = ds.images.mean(axis=(0, 1, 2))
        std = ds.images.std(axis=(0, 1, 2))
        return cls(mean, np.where(std > 0, std, 1.0))

    @classmethod
    def per_coordinate(cls, ds: Dataset) -> "Normalizer":
        """Zero mean, unit variance for every feature coordinate (vector datasets)."""
        mean = ds.images.mean(axis=0)
        std = ds.images.std(axis=0)
        return cls(mean, np.where(std > 0, std, 1.0))

    @classmethod
    def fit(cls, ds: Dataset) -> "Normalizer":
        return cls.per_coordinate(ds) if ds.is_vector else cls.per_channel(ds)

    def __call__(self, images):
        return (images - self.mean) / self.std
