"""Scoring and pooling kernels with a compiled core and a numpy fallback.

The compiled extension (``sensegraft.kernels._fast``) is selected at import
when present; set ``SENSEGRAFT_PURE_PYTHON=1`` to force the numpy reference.
``BACKEND`` records which one is active.  Public entry points normalize
inputs to C-contiguous float64 so both implementations see identical data.

Routing is per kernel: the extension fuses cosine scoring and softmax into
single passes and beats numpy there, while plain matrix products
(dot_scores, pool_span) stay on BLAS, which handwritten loops cannot match
(see benchmarks/bench_kernels.py).
"""

import os

import numpy as np

from . import _ref

if os.environ.get("SENSEGRAFT_PURE_PYTHON"):
    _impl = _ref
    BACKEND = "numpy"
else:
    try:
        from . import _fast as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _ref
        BACKEND = "numpy"


def _as_c64(a, ndim):
    a = np.ascontiguousarray(a, dtype=np.float64)
    if a.ndim != ndim:
        raise ValueError(f"expected {ndim}-d array, got {a.ndim}-d")
    return a


def dot_scores(matrix, query):
    """scores[i] = <matrix[i], query> for a (n, d) matrix and (d,) query."""
    matrix = _as_c64(matrix, 2)
    query = _as_c64(query, 1)
    if matrix.shape[1] != query.shape[0]:
        raise ValueError("matrix/query dimension mismatch")
    return np.asarray(_ref.dot_scores(matrix, query))  # BLAS path


def cosine_scores(matrix, query):
    """Cosine similarity of each row to query; zero-norm rows score -inf."""
    matrix = _as_c64(matrix, 2)
    query = _as_c64(query, 1)
    if matrix.shape[1] != query.shape[0]:
        raise ValueError("matrix/query dimension mismatch")
    return np.asarray(_impl.cosine_scores(matrix, query))


def softmax(logits):
    """Stable softmax of a non-empty 1-d logit vector."""
    logits = _as_c64(logits, 1)
    if logits.shape[0] == 0:
        raise ValueError("softmax over empty logits")
    return np.asarray(_impl.softmax(logits))


def pool_span(hidden, weights, start, end):
    """Layer-weighted mean of hidden[(L+1), T, D] over token span [start, end)."""
    hidden = _as_c64(hidden, 3)
    weights = _as_c64(weights, 1)
    if weights.shape[0] != hidden.shape[0]:
        raise ValueError("weights length must be L+1")
    if not (0 <= start < end <= hidden.shape[1]):
        raise ValueError(f"span [{start}, {end}) out of bounds for T={hidden.shape[1]}")
    return np.asarray(_ref.pool_span(hidden, weights, int(start), int(end)))  # BLAS path
