"""Numpy implementations of the hot row-wise kernels.

Semantics are shared with the compiled ``_ckernels`` module; see
``mohn.kernels`` for the selection logic and contracts.
"""

import numpy as np

NAME = "python"


def select_smallest(values, f_n):
    values = np.ascontiguousarray(values, dtype=np.float64)
    # stable sort keeps ascending index order among equal values
    order = np.argsort(values, axis=1, kind="stable")
    return np.ascontiguousarray(order[:, :f_n], dtype=np.int64)


def softmax_xent_rows(logits):
    logits = np.ascontiguousarray(logits, dtype=np.float64)
    top = logits.max(axis=1, keepdims=True)
    shifted = logits - top
    lse = np.log(np.exp(shifted).sum(axis=1))
    probs = np.exp(shifted - lse[:, None])
    loss = lse - shifted[:, 0]
    return loss, probs


def knn_vote(sims, labels, k, tau, n_classes):
    sims = np.ascontiguousarray(sims, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    order = np.argsort(-sims, axis=1, kind="stable")[:, :k]
    top = np.take_along_axis(sims, order, axis=1)
    weights = np.exp(top / tau)
    scores = np.zeros((sims.shape[0], n_classes))
    rows = np.repeat(np.arange(sims.shape[0]), k)
    np.add.at(scores, (rows, labels[order].ravel()), weights.ravel())
    return np.argmax(scores, axis=1).astype(np.int64)
