from __future__ import annotations

import csv

import numpy as np

from ..errors import InvalidShape, IoFailure, MissingFile
from ..rng import make_rng
from .dataset import Dataset


def gen_clusters(class_count: int, per_class: int, dim: int, spread: float, seed: int) -> Dataset:
    """Gaussian clusters around random unit centers, affinely squeezed into [0, 1]."""
    if class_count < 2 or per_class < 1 or dim < 2 or not spread > 0:
        raise InvalidShape(
            f"need class_count >= 2, per_class >= 1, dim >= 2, spread > 0; got "
            f"{class_count}, {per_class}, {dim}, {spread}")
    rng = make_rng(seed)
    centers = rng.standard_normal((class_count, dim))
    centers /= np.linalg.norm(centers, axis=1, keepdims=True)
    labels = np.repeat(np.arange(class_count), per_class)
    x = centers[labels] + spread * rng.standard_normal((len(labels), dim))
    lo, hi = x.min(), x.max()
    x = (x - lo) / (hi - lo)
    return Dataset(x.reshape(len(labels), 1, dim, 1), labels, class_count)


def write_csv(ds: Dataset, path) -> None:
    flat = ds.flat()
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["label"] + [f"x{i}" for i in range(flat.shape[1])])
            for label, row in zip(ds.labels, flat):
                w.writerow([int(label)] + [repr(float(v)) for v in row])
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_csv(path, class_count: int | None = None) -> Dataset:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except FileNotFoundError as exc:
        raise MissingFile(f"no such dataset file: {path}") from exc
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if not rows or rows[0][:1] != ["label"]:
        raise InvalidShape(f"{path}: missing 'label,...' header")
    body = rows[1:]
    dim = len(rows[0]) - 1
    if any(len(r) != dim + 1 for r in body):
        raise InvalidShape(f"{path}: ragged rows")
    labels = np.array([int(r[0]) for r in body], dtype=np.int64)
    x = np.array([[float(v) for v in r[1:]] for r in body], dtype=np.float64).reshape(-1, dim)
    n_classes = class_count or (int(labels.max()) + 1 if len(labels) else 0)
    return Dataset(x.reshape(len(labels), 1, dim, 1), labels, n_classes)
