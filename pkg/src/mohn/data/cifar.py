"""CIFAR binary batch files: per record, label byte(s) then 1024 R, 1024 G, 1024 B bytes."""

from __future__ import annotations

import os

import numpy as np

from ..errors import LabelOutOfRange, MissingFile, TruncatedRecord
from .dataset import Dataset

SIDE = 32
PIXELS = 3 * SIDE * SIDE
TRAIN_FILES = [f"data_batch_{i}.bin" for i in range(1, 6)]
TEST_FILE = "test_batch.bin"


def read_batch_file(path, label_bytes: int = 1, class_count: int = 10, label_index: int = -1):
    """Parse one batch file into (uint8 pixels (N, 3072), labels (N,)).

    ``label_index`` picks which label byte to keep when a record carries
    several (CIFAR-100: coarse then fine; the default keeps the fine label).
    """
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except FileNotFoundError as exc:
        raise MissingFile(f"missing CIFAR batch file {path}") from exc
    record = label_bytes + PIXELS
    if len(raw) == 0 or len(raw) % record:
        raise TruncatedRecord(f"{path}: {len(raw)} bytes is not a multiple of {record}")
    arr = np.frombuffer(raw, dtype=np.uint8).reshape(-1, record)
    labels = arr[:, label_index if label_index >= 0 else label_bytes + label_index].astype(np.int64)
    bad = np.flatnonzero(labels >= class_count)
    if bad.size:
        raise LabelOutOfRange(f"{path}: record {bad[0]} has label {labels[bad[0]]}")
    return arr[:, label_bytes:].copy(), labels


def to_dataset(pixels, labels, class_count=10, split="train") -> Dataset:
    images = pixels.reshape(-1, 3, SIDE, SIDE).transpose(0, 2, 3, 1) / 255.0
    return Dataset(images, labels, class_count, split)


def to_bytes(ds: Dataset) -> np.ndarray:
    """Inverse of :func:`to_dataset`: (N, 3072) uint8 in channel-planar order."""
    planar = ds.images.transpose(0, 3, 1, 2).reshape(len(ds), PIXELS)
    return np.rint(planar * 255.0).astype(np.uint8)


def write_batch_file(path, ds: Dataset, extra_labels=None) -> None:
    """Serialize in the 1-label-byte layout; ``extra_labels`` (N, j) are written first."""
    cols = [ds.labels.astype(np.uint8)[:, None], to_bytes(ds)]
    if extra_labels is not None:
        cols.insert(0, np.asarray(extra_labels, dtype=np.uint8).reshape(len(ds), -1))
    with open(path, "wb") as fh:
        fh.write(np.hstack(cols).tobytes())


def load_cifar10(directory):
    """Read the five training batches and the test batch. Returns (train, test)."""
    parts = [read_batch_file(os.path.join(directory, name)) for name in TRAIN_FILES]
    pixels = np.concatenate([p for p, _ in parts])
    labels = np.concatenate([lab for _, lab in parts])
    test_pixels, test_labels = read_batch_file(os.path.join(directory, TEST_FILE))
    return (to_dataset(pixels, labels, 10, "train"),
            to_dataset(test_pixels, test_labels, 10, "test"))


def load_cifar100(directory):
    """CIFAR-100 binary version (``train.bin`` / ``test.bin``), fine labels."""
    out = []
    for name, split in (("train.bin", "train"), ("test.bin", "test")):
        pixels, labels = read_batch_file(os.path.join(directory, name), label_bytes=2,
                                         class_count=100)
        out.append(to_dataset(pixels, labels, 100, split))
    return tuple(out)
