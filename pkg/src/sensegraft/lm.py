"""Masked-LM backend contract, sense-token injection, filtered prediction.

Backends expose tokenization, per-layer hidden states, input embeddings, and
the prediction-head-transformed state at the mask position.  Two concrete
backends ship here: a fully deterministic synthetic one for desk-scale runs,
and a file backend reading pre-exported tensors (see the hidden-state
exchange format below), so nothing in this package needs an ML runtime.

Exchange format (directory): ``manifest.json`` with
``{model_name, L, D, dtype: "f32le", entries: [...]}`` where each entry is
``{id, text, T, ids, tokens, offsets, special_mask, files}``, plus one raw
little-endian float32 tensor file per entry of exactly (L+1)*T*D values,
layer-major.  Optional: vocab file, input-embedding matrix, output biases,
and per-query transformed mask states in the same binary convention.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol, runtime_checkable

import numpy as np

from . import kernels
from .errors import DimensionError, NotFoundError, QueryError, SensegraftError
from .ontology import SynsetId
from .senses import sense_key
from .vectors import EmbeddingTable, Ranking

MASK = "[MASK]"
SEP = "[SEP]"
SENSE_TOKEN_RE = re.compile(r"<WN:([^<>\s]+)>")


@dataclass(frozen=True)
class Tokenization:
    ids: tuple[int, ...]
    tokens: tuple[str, ...]
    offsets: tuple[tuple[int, int], ...]
    special_mask: tuple[bool, ...]

    def __post_init__(self):
        n = len(self.ids)
        if not (len(self.tokens) == len(self.offsets) == len(self.special_mask) == n):
            raise ValueError("tokenization fields must have equal length")

    def __len__(self):
        return len(self.ids)


@runtime_checkable
class BackendContract(Protocol):
    """Interface every masked-LM backend satisfies."""

    input_dim: int
    n_layers: int
    hidden_dim: int
    concurrency_limit: int | None  # None = unlimited
    whole_text_tokenizer: bool  # True when tokenize() handles sense tokens itself

    def tokenize(self, text: str) -> Tokenization: ...

    def hidden_states(self, text: str) -> np.ndarray: ...

    def input_embedding(self, token_id: int) -> np.ndarray: ...

    def mask_transformed_state(self, text: str) -> np.ndarray: ...

    def output_bias(self, token_id: int) -> float: ...

    def vocab(self) -> list[str]: ...


def _stable_u64(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def _require_one_mask(text: str) -> None:
    n = text.count(MASK)
    if n != 1:
        raise QueryError(f"query must contain exactly one {MASK}, found {n}: {text!r}")


@dataclass
class SyntheticSpec:
    """Deterministic rules for a desk-scale test double.

    hidden_rule: "bag" repeats each token's embedding at every layer;
    "layered" scales it by (layer_index + 1).  mask_states maps exact query
    texts to planted vectors; mask_rule is a fallback callable; with neither,
    mask states are seeded from a hash of the query text.
    """

    vocab: list[str]
    dim: int
    layers: int
    seed: int = 0
    hidden_rule: str = "bag"
    mask_states: dict[str, np.ndarray] = field(default_factory=dict)
    mask_rule: Callable[[str], np.ndarray] | None = None

    @classmethod
    def from_json(cls, path) -> "SyntheticSpec":
        rec = json.loads(Path(path).read_text(encoding="utf-8"))
        mask_states = {
            text: np.asarray(vec, dtype=np.float64)
            for text, vec in rec.get("mask_states", {}).items()
        }
        if "planted_table" in rec:
            from .vectors import load_table

            table = load_table(Path(path).parent / rec["planted_table"])
            for text, key in rec.get("planted", {}).items():
                mask_states[text] = np.asarray(table[key], dtype=np.float64)
        return cls(
            vocab=list(rec["vocab"]),
            dim=int(rec["dim"]),
            layers=int(rec["layers"]),
            seed=int(rec.get("seed", 0)),
            hidden_rule=rec.get("hidden_rule", "bag"),
            mask_states=mask_states,
        )


class SyntheticBackend:
    """Deterministic backend: same input, bit-identical output, any platform.

    Tokenizes on whitespace; token embeddings are seeded from a stable hash
    of the token string, so unknown tokens still embed reproducibly.
    """

    whole_text_tokenizer = False
    concurrency_limit = None

    def __init__(self, spec: SyntheticSpec):
        self.spec = spec
        self.input_dim = spec.dim
        self.hidden_dim = spec.dim
        self.n_layers = spec.layers
        self._vocab = list(spec.vocab)
        self._ids = {tok: i for i, tok in enumerate(self._vocab)}
        self._embed_cache: dict[str, np.ndarray] = {}

    def vocab(self) -> list[str]:
        return list(self._vocab)

    def token_embedding(self, token: str) -> np.ndarray:
        vec = self._embed_cache.get(token)
        if vec is None:
            rng = np.random.default_rng(_stable_u64(token) ^ self.spec.seed)
            vec = rng.standard_normal(self.spec.dim)
            vec.flags.writeable = False
            self._embed_cache[token] = vec
        return vec

    def input_embedding(self, token_id: int) -> np.ndarray:
        if not (0 <= token_id < len(self._vocab)):
            raise NotFoundError(f"token id {token_id} out of range")
        return self.token_embedding(self._vocab[token_id])

    def output_bias(self, token_id: int) -> float:
        return 0.0

    def tokenize(self, text: str) -> Tokenization:
        ids, tokens, offsets = [], [], []
        pos = 0
        for tok in text.split():
            start = text.index(tok, pos)
            tokens.append(tok)
            offsets.append((start, start + len(tok)))
            ids.append(self._ids.get(tok, -1))
            pos = start + len(tok)
        return Tokenization(
            ids=tuple(ids),
            tokens=tuple(tokens),
            offsets=tuple(offsets),
            special_mask=tuple(False for _ in tokens),
        )

    def hidden_states(self, text: str) -> np.ndarray:
        tok = self.tokenize(text)
        base = np.stack([self.token_embedding(t) for t in tok.tokens])
        if self.spec.hidden_rule == "bag":
            return np.repeat(base[None, :, :], self.spec.layers + 1, axis=0)
        if self.spec.hidden_rule == "layered":
            scale = np.arange(1, self.spec.layers + 2, dtype=np.float64)
            return scale[:, None, None] * base[None, :, :]
        raise ValueError(f"unknown hidden rule {self.spec.hidden_rule!r}")

    def mask_transformed_state(self, text: str) -> np.ndarray:
        _require_one_mask(text)
        planted = self.spec.mask_states.get(text)
        if planted is not None:
            return np.asarray(planted, dtype=np.float64)
        if self.spec.mask_rule is not None:
            return np.asarray(self.spec.mask_rule(text), dtype=np.float64)
        rng = np.random.default_rng(_stable_u64("mask::" + text) ^ self.spec.seed)
        return rng.standard_normal(self.input_dim)


class FileBackend:
    """Backend reading a pre-exported hidden-state directory (no ML runtime)."""

    whole_text_tokenizer = True
    concurrency_limit = None

    def __init__(self, export_dir):
        self.dir = Path(export_dir)
        manifest_path = self.dir / "manifest.json"
        if not manifest_path.exists():
            raise NotFoundError(f"missing manifest: {manifest_path}")
        self.manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        if self.manifest.get("dtype") != "f32le":
            raise SensegraftError(f"unsupported dtype {self.manifest.get('dtype')!r}")
        self.n_layers = int(self.manifest["L"])
        self.hidden_dim = int(self.manifest["D"])
        self.input_dim = int(self.manifest.get("embedding_dim") or self.manifest["D"])
        self._entries = {}
        for entry in self.manifest["entries"]:
            if entry["text"] in self._entries:
                raise SensegraftError(f"duplicate export text: {entry['text']!r}")
            self._entries[entry["text"]] = entry
        self._vocab = None
        if self.manifest.get("vocab_file"):
            self._vocab = (self.dir / self.manifest["vocab_file"]).read_text(
                encoding="utf-8"
            ).splitlines()
        self._embeddings = None
        if self.manifest.get("embedding_file"):
            raw = np.frombuffer((self.dir / self.manifest["embedding_file"]).read_bytes(), dtype="<f4")
            self._embeddings = raw.reshape(-1, self.input_dim)
        self._bias = None
        if self.manifest.get("output_bias_file"):
            self._bias = np.frombuffer((self.dir / self.manifest["output_bias_file"]).read_bytes(), dtype="<f4")

    def _entry(self, text: str) -> dict:
        entry = self._entries.get(text)
        if entry is None:
            raise NotFoundError(f"text not present in export: {text!r}")
        return entry

    def vocab(self) -> list[str]:
        if self._vocab is None:
            raise SensegraftError("export carries no vocabulary file")
        return list(self._vocab)

    def tokenize(self, text: str) -> Tokenization:
        entry = self._entry(text)
        return Tokenization(
            ids=tuple(entry["ids"]),
            tokens=tuple(entry["tokens"]),
            offsets=tuple((s, e) for s, e in entry["offsets"]),
            special_mask=tuple(bool(x) for x in entry["special_mask"]),
        )

    def hidden_states(self, text: str) -> np.ndarray:
        entry = self._entry(text)
        path = self.dir / entry["files"]["hidden"]
        raw = np.frombuffer(path.read_bytes(), dtype="<f4")
        expected = (self.n_layers + 1) * entry["T"] * self.hidden_dim
        if raw.size != expected:
            raise SensegraftError(
                f"tensor file {path.name} holds {raw.size} floats, expected {expected}"
            )
        return raw.reshape(self.n_layers + 1, entry["T"], self.hidden_dim)

    def input_embedding(self, token_id: int) -> np.ndarray:
        if self._embeddings is None:
            raise SensegraftError("export carries no input-embedding matrix")
        return self._embeddings[token_id]

    def output_bias(self, token_id: int) -> float:
        if self._bias is None:
            return 0.0
        return float(self._bias[token_id])

    def mask_transformed_state(self, text: str) -> np.ndarray:
        _require_one_mask(text)
        entry = self._entry(text)
        name = entry["files"].get("mask_state")
        if name is None:
            raise NotFoundError(f"no mask state exported for {text!r}")
        return np.frombuffer((self.dir / name).read_bytes(), dtype="<f4")


@dataclass(frozen=True)
class SensePrediction:
    ranking: Ranking  # keys are SynsetId
    probabilities: dict


class EnrichedModel:
    """A backend plus injected sense vocabulary (input-space vectors)."""

    def __init__(self, backend, sense_vocab: EmbeddingTable, sense_bias: float = 0.0):
        self.backend = backend
        self.sense_vocab = sense_vocab
        self.sense_bias = sense_bias
        try:
            base = len(backend.vocab())
        except SensegraftError:
            base = 0
        self._sense_ids = {key: base + i for i, key in enumerate(sense_vocab.keys())}

    # Backend pass-through: injection is non-destructive.
    def hidden_states(self, text: str) -> np.ndarray:
        return self.backend.hidden_states(text)

    def mask_transformed_state(self, text: str) -> np.ndarray:
        return self.backend.mask_transformed_state(text)

    def vocab_size(self) -> int:
        return len(self.backend.vocab()) + len(self.sense_vocab)

    def tokenize(self, text: str) -> Tokenization:
        """Tokenize with every ``<WN:...>`` string as a single atomic token."""
        if self.backend.whole_text_tokenizer:
            return self.backend.tokenize(text)
        ids, tokens, offsets, special = [], [], [], []
        pos = 0
        for m in SENSE_TOKEN_RE.finditer(text):
            if m.start() > pos:
                self._extend(text, pos, m.start(), ids, tokens, offsets, special)
            key = m.group(0)
            sid = self._sense_ids.get(key)
            if sid is None:
                raise NotFoundError(f"sense token {key!r} not injected")
            ids.append(sid)
            tokens.append(key)
            offsets.append((m.start(), m.end()))
            special.append(False)
            pos = m.end()
        if pos < len(text):
            self._extend(text, pos, len(text), ids, tokens, offsets, special)
        return Tokenization(tuple(ids), tuple(tokens), tuple(offsets), tuple(special))

    def _extend(self, text, start, end, ids, tokens, offsets, special):
        segment = text[start:end]
        if not segment.strip():
            return
        tok = self.backend.tokenize(segment)
        for i in range(len(tok)):
            ids.append(tok.ids[i])
            tokens.append(tok.tokens[i])
            s, e = tok.offsets[i]
            offsets.append((start + s, start + e))
            special.append(tok.special_mask[i])


def _has_vocab(backend) -> bool:
    try:
        backend.vocab()
        return True
    except SensegraftError:
        return False


def inject_senses(backend, mapped_table: EmbeddingTable, sense_bias: float = 0.0) -> EnrichedModel:
    """Add the mapped sense vectors to the model vocabulary as special tokens."""
    if mapped_table.dim != backend.input_dim:
        raise DimensionError(
            f"sense table dim {mapped_table.dim} != backend input dim {backend.input_dim}"
        )
    base_vocab = set(backend.vocab()) if _has_vocab(backend) else set()
    for key in mapped_table.keys():
        m = SENSE_TOKEN_RE.fullmatch(key)
        if m is None:
            raise ValueError(f"sense key {key!r} is not of the form '<WN:lemma.pos.NN>'")
        SynsetId.parse(m.group(1))  # raises on malformed ids
        if key in base_vocab:
            raise ValueError(f"sense key {key!r} collides with the base vocabulary")
    return EnrichedModel(backend, mapped_table, sense_bias)


def predict_senses(
    model: EnrichedModel,
    query: str,
    candidates,
    exclude_head: SynsetId | None = None,
) -> SensePrediction:
    """Rank candidate senses for the masked slot of ``query``.

    Logits are dot products of the prediction-head-transformed mask state
    with the injected input-space vectors; softmax is taken after filtering,
    so probability mass lies exclusively on the candidates.
    """
    _require_one_mask(query)
    cands = sorted({c for c in candidates if c != exclude_head})
    if not cands:
        raise QueryError("no candidates remain after excluding the head")
    keys = [sense_key(c) for c in cands]
    missing = [k for k in keys if k not in model.sense_vocab]
    if missing:
        raise NotFoundError(f"candidates missing from sense vocabulary: {missing[:10]}")
    state = np.asarray(model.mask_transformed_state(query), dtype=np.float64)
    if state.shape[0] != model.sense_vocab.dim:
        raise DimensionError(
            f"mask state has {state.shape[0]} components, sense table dim is {model.sense_vocab.dim}"
        )
    logits = kernels.dot_scores(model.sense_vocab.rows_for(keys), state) + model.sense_bias
    probs = kernels.softmax(logits)
    order = np.argsort(-probs, kind="stable")  # cands sorted => key-asc tie-break
    ranking = Ranking(tuple((cands[i], float(probs[i])) for i in order))
    return SensePrediction(ranking, {cands[i]: float(probs[i]) for i in range(len(cands))})


def render_with_gloss(s: SynsetId, gloss: str, assertion: str) -> str:
    """Default query shape: sense token defined by its gloss, then the assertion."""
    if not gloss:
        raise QueryError(f"gloss required to render {s} with definition")
    _require_one_mask(assertion)
    return f"<WN:{s}> can be defined as : {gloss} . {SEP} {assertion}"


def synthetic_backend(spec: SyntheticSpec) -> SyntheticBackend:
    """Construct the deterministic test-double backend from its spec."""
    return SyntheticBackend(spec)
