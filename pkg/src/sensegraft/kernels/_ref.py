"""Pure-numpy reference kernels.

These define the semantics; the compiled extension in ``_fast`` must agree
with them to floating-point roundoff.  All inputs are C-contiguous float64.
"""

import numpy as np


def dot_scores(matrix, query):
    """Row-wise dot products: scores[i] = <matrix[i], query>."""
    return matrix @ query


def cosine_scores(matrix, query):
    """Row-wise cosine similarity to query; zero-norm rows (or a zero-norm
    query) score -inf."""
    dots = matrix @ query
    norms = np.sqrt(np.einsum("ij,ij->i", matrix, matrix))
    qnorm = float(np.sqrt(query @ query))
    out = np.full(matrix.shape[0], -np.inf)
    if qnorm > 0.0:
        nz = norms > 0.0
        out[nz] = dots[nz] / (norms[nz] * qnorm)
    return out


def softmax(logits):
    """Numerically stable softmax over a 1-D logit vector."""
    shifted = logits - logits.max()
    e = np.exp(shifted)
    return e / e.sum()


def pool_span(hidden, weights, start, end):
    """Layer-weighted mean over a token span.

    hidden: (L+1, T, D); weights: (L+1,); span [start, end).
    Returns sum_l weights[l] * mean_{t in span} hidden[l, t].
    """
    return weights @ hidden[:, start:end, :].mean(axis=1)
