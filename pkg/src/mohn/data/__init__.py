"""Datasets, CIFAR binary I/O, synthetic clusters, and two-view augmentation."""

from .augment import (AugmentDraw, AugmentPolicy, VectorAugmentPolicy, apply_augment,
                      augment_vector, augment_view, sample_augment_params, two_views,
                      two_vector_views)
from .cifar import load_cifar10, load_cifar100, read_batch_file, write_batch_file
from .dataset import Dataset, Normalizer, stratified_split
from .synthetic import gen_clusters, read_csv, write_csv

__all__ = [
    "AugmentDraw", "AugmentPolicy", "Dataset", "Normalizer", "VectorAugmentPolicy",
    "apply_augment", "augment_vector", "augment_view", "gen_clusters", "load_cifar10",
    "load_cifar100", "read_batch_file", "read_csv", "sample_augment_params",
    "stratified_split", "two_vector_views", "two_views", "write_batch_file", "write_csv",
]
