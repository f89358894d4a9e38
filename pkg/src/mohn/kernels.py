"""Hot row-wise kernels with a compiled backend and a numpy fallback.

The compiled extension ``mohn._ckernels`` is used when it imports; otherwise
the numpy module ``mohn._pykernels`` is used. Setting ``MOHN_KERNELS=python``
forces the fallback. The row softmax always uses numpy: the vectorized
version outpaces the compiled loop (see ``benchmarks/bench_kernels.py``).

Kernels
-------
select_smallest(values, f_n)
    For each row of a (B, N) array, the indices of the ``f_n`` smallest
    entries, ordered by ascending value with ties broken by ascending index.
softmax_xent_rows(logits)
    Row-wise cross-entropy against label 0 and the softmax probabilities,
    both computed with max-shift stabilization.
knn_vote(sims, labels, k, tau, n_classes)
    Weighted top-k vote: the ``k`` largest similarities per row (ties by lower
    index) vote for their label with weight ``exp(sim / tau)``; the argmax
    class wins, ties by lower class id.
"""

import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)


def _load_backend(preference=None):
    preference = preference or os.environ.get("MOHN_KERNELS", "auto")
    if preference == "python":
        return _pykernels
    try:
        from . import _ckernels
    except ImportError:
        if preference == "cython":
            raise
        log.debug("compiled kernels unavailable; using numpy fallback")
        return _pykernels
    return _ckernels


_backend = _load_backend()

BACKEND = _backend.NAME
select_smallest = _backend.select_smallest
softmax_xent_rows = _pykernels.softmax_xent_rows
knn_vote = _backend.knn_vote


def available_backends():
    """Kernel modules importable in this environment, fallback first."""
    mods = [_pykernels]
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        mods.append(_ckernels)
    return mods
