"""Sense embeddings in the pooled hidden-state space.

Vectors are built as layer-weighted centroids of contextual states: centroids
over sense-annotated occurrences, centroids over gloss renderings, or their
1:1 average.  Summation order is canonicalized everywhere so results are
bit-reproducible regardless of input order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ParseError, SensegraftError
from .ontology import Ontology, Synset, SynsetId

COMBINE_MODES = ("annot_only", "gloss_only", "average")


@dataclass(frozen=True)
class LayerWeightProfile:
    """Non-negative weights over the embedding layer + L transformer layers,
    normalized to sum 1 at load time."""

    weights: tuple[float, ...]

    def __post_init__(self):
        if not self.weights:
            raise ValueError("empty layer-weight profile")
        if any(w < 0 for w in self.weights):
            raise ValueError("layer weights must be non-negative")
        if not any(w > 0 for w in self.weights):
            raise ValueError("at least one layer weight must be positive")

    @classmethod
    def from_weights(cls, weights) -> "LayerWeightProfile":
        w = np.asarray(list(weights), dtype=np.float64)
        return cls(tuple(float(x) for x in w / w.sum()))

    @classmethod
    def uniform(cls, n_layers: int) -> "LayerWeightProfile":
        return cls.from_weights([1.0] * n_layers)

    @classmethod
    def one_hot(cls, n_layers: int, layer: int) -> "LayerWeightProfile":
        w = [0.0] * n_layers
        w[layer] = 1.0
        return cls(tuple(w))

    @classmethod
    def load(cls, path) -> "LayerWeightProfile":
        path = Path(path)
        values = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                for tok in line.split():
                    try:
                        values.append(float(tok))
                    except ValueError:
                        raise ParseError(f"bad weight {tok!r}", path, lineno) from None
        return cls.from_weights(values)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=np.float64)

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True)
class AnnotatedOccurrence:
    """One sense-annotated mention: word tokens, [start, end) word span, synset."""

    sentence: tuple[str, ...]
    span: tuple[int, int]
    synset: SynsetId

    def __post_init__(self):
        start, end = self.span
        if not (0 <= start < end <= len(self.sentence)):
            raise ValueError(f"span {self.span} out of bounds for {len(self.sentence)} tokens")

    def text(self) -> str:
        return " ".join(self.sentence)

    def char_span(self) -> tuple[int, int]:
        """Character range of the annotated words inside text()."""
        start, end = self.span
        cs = sum(len(t) + 1 for t in self.sentence[:start])
        ce = cs + len(" ".join(self.sentence[start:end]))
        return cs, ce

    def sort_key(self):
        return (self.sentence, self.span, str(self.synset))


def read_annotations(path) -> list[AnnotatedOccurrence]:
    """JSONL records {sentence_tokens, span: [start, end), synset}."""
    path = Path(path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                occ = AnnotatedOccurrence(
                    sentence=tuple(rec["sentence_tokens"]),
                    span=(int(rec["span"][0]), int(rec["span"][1])),
                    synset=SynsetId.parse(rec["synset"]),
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"bad annotation record ({exc})", path, lineno) from None
            out.append(occ)
    return out


def pool_hidden_states(hidden, profile: LayerWeightProfile, span) -> np.ndarray:
    """Layer-weighted mean over a contiguous token span of hidden [(L+1), T, D]."""
    hidden = np.asarray(hidden, dtype=np.float64)
    if hidden.ndim != 3:
        raise ValueError(f"hidden states must be (L+1, T, D), got shape {hidden.shape}")
    if len(profile) != hidden.shape[0]:
        raise ValueError(f"profile has {len(profile)} weights, hidden has {hidden.shape[0]} layers")
    start, end = span
    if not (0 <= start < end <= hidden.shape[1]):
        raise ValueError(f"span [{start}, {end}) out of bounds for T={hidden.shape[1]}")
    window = hidden[:, start:end, :]
    if not np.all(np.isfinite(window)):
        raise ValueError("non-finite values in hidden states")
    return kernels.pool_span(hidden, profile.array, start, end)


def _pool_positions(hidden, profile: LayerWeightProfile, positions) -> np.ndarray:
    """pool_hidden_states generalized to an arbitrary position set."""
    hidden = np.asarray(hidden, dtype=np.float64)
    window = hidden[:, sorted(positions), :]
    if not np.all(np.isfinite(window)):
        raise ValueError("non-finite values in hidden states")
    return profile.array @ window.mean(axis=1)


def _subtoken_range(tokenization, char_span) -> tuple[int, int]:
    """Smallest contiguous subtoken range overlapping a character span."""
    cs, ce = char_span
    hits = [
        i
        for i, (s, e) in enumerate(tokenization.offsets)
        if not tokenization.special_mask[i] and s < ce and e > cs
    ]
    if not hits:
        raise SensegraftError(f"no tokens overlap character span [{cs}, {ce})")
    return min(hits), max(hits) + 1


def encode_occurrence(backend, occ: AnnotatedOccurrence, profile: LayerWeightProfile) -> np.ndarray:
    """Pooled vector for one annotated occurrence via the backend."""
    text = occ.text()
    tok = backend.tokenize(text)
    span = _subtoken_range(tok, occ.char_span())
    return pool_hidden_states(backend.hidden_states(text), profile, span)


def build_annotation_centroid(occs, backend, profile: LayerWeightProfile) -> np.ndarray:
    """Mean of the pooled vectors of all occurrences of one synset."""
    occs = list(occs)
    if not occs:
        raise SensegraftError("no occurrences; caller should fall back to gloss-only")
    synsets = {occ.synset for occ in occs}
    if len(synsets) != 1:
        raise SensegraftError(f"occurrences cover multiple synsets: {sorted(map(str, synsets))}")
    occs.sort(key=AnnotatedOccurrence.sort_key)
    pooled = np.stack([encode_occurrence(backend, occ, profile) for occ in occs])
    return pooled.mean(axis=0)


def gloss_sentence(synset: Synset) -> str:
    """Gloss rendering pooled by build_gloss_embedding: lemmas, ' - ', gloss."""
    lemmas = " , ".join(lemma.lower().replace("_", " ") for lemma in synset.lemmas)
    return f"{lemmas} - {synset.gloss}"


def build_gloss_embedding(synset: Synset, backend, profile: LayerWeightProfile) -> np.ndarray:
    """Pooled centroid over all content-token positions of the gloss rendering."""
    if not synset.gloss:
        raise SensegraftError(f"{synset.id}: empty gloss")
    text = gloss_sentence(synset)
    tok = backend.tokenize(text)
    positions = [i for i in range(len(tok.offsets)) if not tok.special_mask[i]]
    if not positions:
        raise SensegraftError(f"{synset.id}: gloss tokenizes to zero content tokens")
    return _pool_positions(backend.hidden_states(text), profile, positions)


def sense_key(sid: SynsetId) -> str:
    """Vector-store / vocabulary key for a synset."""
    return f"<WN:{sid}>"


def build_sense_table(
    onto: Ontology,
    annotations,
    backend,
    profile: LayerWeightProfile,
    combine: str = "average",
):
    """One vector per covered synset, keyed '<WN:lemma.pos.NN>', sorted keys.

    Under ``average``, synsets lacking annotations fall back to gloss-only and
    are flagged in ``table.meta['gloss_only']``; synsets lacking both are
    skipped and counted in ``table.meta['skipped']``.
    """
    if combine not in COMBINE_MODES:
        raise ValueError(f"combine must be one of {COMBINE_MODES}")
    by_synset: dict[SynsetId, list[AnnotatedOccurrence]] = {}
    for occ in annotations:
        by_synset.setdefault(occ.synset, []).append(occ)

    from .vectors import EmbeddingTable

    dim = None
    items = []
    gloss_only = []
    skipped = 0
    for sid in sorted(onto.synsets, key=str):
        synset = onto.synsets[sid]
        occs = by_synset.get(sid)
        has_gloss = bool(synset.gloss)
        if combine == "annot_only":
            if not occs:
                skipped += 1
                continue
            vec = build_annotation_centroid(occs, backend, profile)
        elif combine == "gloss_only":
            if not has_gloss:
                skipped += 1
                continue
            vec = build_gloss_embedding(synset, backend, profile)
        else:
            if occs and has_gloss:
                v_annot = build_annotation_centroid(occs, backend, profile)
                v_gloss = build_gloss_embedding(synset, backend, profile)
                vec = (v_annot + v_gloss) / 2.0
            elif occs:
                vec = build_annotation_centroid(occs, backend, profile)
            elif has_gloss:
                vec = build_gloss_embedding(synset, backend, profile)
                gloss_only.append(sense_key(sid))
            else:
                skipped += 1
                continue
        dim = len(vec) if dim is None else dim
        items.append((sense_key(sid), vec))

    if dim is None:
        raise SensegraftError("no synset could be embedded")
    table = EmbeddingTable.from_items("pooled", dim, items, order="sorted")
    table.meta["gloss_only"] = gloss_only
    table.meta["skipped"] = skipped
    table.meta["combine"] = combine
    return table
