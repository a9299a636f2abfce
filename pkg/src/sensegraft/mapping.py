"""Least-squares alignment from the pooled hidden-state space into the
model's input-embedding space, plus the ranking-degradation report.

The map W minimizes ||AW - B||_F^2 + lambda ||W||_F^2 over anchor tokens
represented in both spaces.  Solved by pivoted orthogonal factorization
(LAPACK gelsy) on the (optionally ridge-augmented) system, which is stable
where raw normal equations are not.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .errors import DimensionError, SensegraftError, SingularFitError
from .senses import LayerWeightProfile, pool_hidden_states, _pool_positions
from .vectors import EmbeddingTable


@dataclass
class AnchorSet:
    """Tokens represented in both spaces: rows of source align with rows of target."""

    keys: list[str]
    source: np.ndarray  # (n, d_src)
    target: np.ndarray  # (n, d_tgt)
    min_count: int

    def __post_init__(self):
        if len(self.keys) != len(set(self.keys)):
            raise ValueError("anchor keys must be unique")
        if self.source.shape[0] != len(self.keys) or self.target.shape[0] != len(self.keys):
            raise ValueError("anchor arrays must have one row per key")

    def __len__(self):
        return len(self.keys)

    def pairs(self):
        for i, key in enumerate(self.keys):
            yield key, self.source[i], self.target[i]


@dataclass
class LinearMap:
    W: np.ndarray  # (d_src, d_tgt)
    ridge_lambda: float
    fit_residual: float
    anchor_count: int = 0

    @property
    def d_src(self) -> int:
        return self.W.shape[0]

    @property
    def d_tgt(self) -> int:
        return self.W.shape[1]


def select_anchors(
    backend,
    corpus_counts: dict[str, int],
    min_count: int = 100,
    profile: LayerWeightProfile | None = None,
    contexts: dict[str, list] | None = None,
) -> AnchorSet:
    """Anchor pairs for every vocabulary token occurring strictly more than
    ``min_count`` times.

    The source vector applies the sense-representation pooling to the token's
    occurrences: entries of ``contexts`` are (text, (char_start, char_end))
    pairs; tokens without contexts are pooled from the token encoded alone.
    The target vector is the model's input embedding.
    """
    if profile is None:
        raise ValueError("a layer-weight profile is required")
    vocab = backend.vocab()
    qualifying = [(i, tok) for i, tok in enumerate(vocab) if corpus_counts.get(tok, 0) > min_count]
    d_src = None
    keys, sources, targets = [], [], []
    for token_id, token in qualifying:
        occ = (contexts or {}).get(token)
        if occ:
            pooled = []
            for text, char_span in occ:
                tok = backend.tokenize(text)
                hits = [
                    i
                    for i, (s, e) in enumerate(tok.offsets)
                    if not tok.special_mask[i] and s < char_span[1] and e > char_span[0]
                ]
                if not hits:
                    continue
                span = (min(hits), max(hits) + 1)
                pooled.append(pool_hidden_states(backend.hidden_states(text), profile, span))
            if not pooled:
                continue
            src = np.stack(pooled).mean(axis=0)
        else:
            tok = backend.tokenize(token)
            positions = [i for i in range(len(tok.offsets)) if not tok.special_mask[i]]
            src = _pool_positions(backend.hidden_states(token), profile, positions)
        keys.append(token)
        sources.append(src)
        targets.append(np.asarray(backend.input_embedding(token_id), dtype=np.float64))
        d_src = len(src)
    if d_src is None or len(keys) < d_src:
        raise SingularFitError(
            f"only {len(keys)} anchors qualify (need at least the source dimension); "
            "lower --min-count or fit with ridge regularization (--ridge > 0)"
        )
    return AnchorSet(keys, np.vstack(sources), np.vstack(targets), min_count)


def fit_linear_map(anchors: AnchorSet, ridge_lambda: float = 0.0) -> LinearMap:
    """W = argmin ||AW - B||_F^2 + lambda ||W||_F^2 over the anchor pairs."""
    if len(anchors) == 0:
        raise ValueError("empty anchor set")
    if ridge_lambda < 0:
        raise ValueError("ridge_lambda must be non-negative")
    A = np.asarray(anchors.source, dtype=np.float64)
    B = np.asarray(anchors.target, dtype=np.float64)
    d_src = A.shape[1]
    if ridge_lambda == 0.0:
        rank = int(np.linalg.matrix_rank(A))
        if rank < d_src:
            raise SingularFitError(
                f"anchor matrix is rank-deficient (rank {rank} < {d_src}); "
                "fit with ridge_lambda > 0"
            )
        W, _res, _rank, _sv = linalg.lstsq(A, B, lapack_driver="gelsy")
    else:
        # Ridge as row augmentation keeps the solve a single stable factorization.
        A_aug = np.vstack([A, np.sqrt(ridge_lambda) * np.eye(d_src)])
        B_aug = np.vstack([B, np.zeros((d_src, B.shape[1]))])
        W, _res, _rank, _sv = linalg.lstsq(A_aug, B_aug, lapack_driver="gelsy")
    residual = float(np.linalg.norm(A @ W - B))
    return LinearMap(W=W, ridge_lambda=float(ridge_lambda), fit_residual=residual, anchor_count=len(anchors))


def apply_map(m: LinearMap, table: EmbeddingTable, space_name: str | None = None) -> EmbeddingTable:
    """Map every vector v -> v @ W into the target space; keys and order kept."""
    if table.dim != m.d_src:
        raise DimensionError(f"table dim {table.dim} != map source dim {m.d_src}")
    mapped = table.matrix.astype(np.float64) @ m.W
    out = EmbeddingTable(
        space_name or f"{table.space_name}-mapped", m.d_tgt, order=table.order
    )
    for i, key in enumerate(table.keys()):
        out.add(key, mapped[i])
    return out


def save_map(m: LinearMap, path) -> None:
    """Binary little-endian float32 W plus a JSON sidecar at path + '.json'."""
    path = Path(path)
    path.write_bytes(np.asarray(m.W, dtype="<f4").tobytes())
    sidecar = {
        "d_src": m.d_src,
        "d_tgt": m.d_tgt,
        "ridge_lambda": m.ridge_lambda,
        "fit_residual": m.fit_residual,
        "anchor_count": m.anchor_count,
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")


def load_map(path) -> LinearMap:
    path = Path(path)
    sidecar = json.loads(Path(str(path) + ".json").read_text(encoding="utf-8"))
    d_src, d_tgt = sidecar["d_src"], sidecar["d_tgt"]
    raw = np.frombuffer(path.read_bytes(), dtype="<f4")
    if raw.size != d_src * d_tgt:
        raise DimensionError(f"map file holds {raw.size} floats, sidecar says {d_src}x{d_tgt}")
    return LinearMap(
        W=raw.reshape(d_src, d_tgt).astype(np.float64),
        ridge_lambda=sidecar["ridge_lambda"],
        fit_residual=sidecar["fit_residual"],
        anchor_count=sidecar["anchor_count"],
    )


@dataclass
class MetricsPair:
    """k-NN metrics before/after mapping plus relative percentage deltas."""

    original: "MetricsReport"
    mapped: "MetricsReport"
    deltas: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "original": self.original.to_json(),
            "mapped": self.mapped.to_json(),
            "deltas_pct": self.deltas,
        }


def degradation_report(
    original: EmbeddingTable,
    mapped: EmbeddingTable,
    probe_ds,
    subset: str = "core",
    ks=(1, 10),
) -> MetricsPair:
    """Run the k-NN probe evaluation on both tables and report deltas."""
    from .probe import knn_evaluate

    rep_orig = knn_evaluate(original, probe_ds, subset, ks=ks)
    rep_mapped = knn_evaluate(mapped, probe_ds, subset, ks=ks)
    row_o = rep_orig.row("All")
    row_m = rep_mapped.row("All")
    deltas = {}
    for k in ks:
        deltas[f"P@{k}"] = _rel_delta(row_o.p_at[k], row_m.p_at[k])
    deltas["MRR"] = _rel_delta(row_o.mrr, row_m.mrr)
    return MetricsPair(rep_orig, rep_mapped, deltas)


def _rel_delta(before: float, after: float) -> float:
    if before == 0.0:
        return 0.0 if after == 0.0 else float("inf")
    return (after - before) / before * 100.0
