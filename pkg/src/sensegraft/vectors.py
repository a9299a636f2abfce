"""Named embedding spaces: typed storage, text/binary I/O, exact ranking.

Text format is word2vec-style: optional ``# space=... order=...`` metadata
line, a ``count dim`` header, then ``key v1 ... vD`` rows with full-precision
decimal floats.  The binary variant stores little-endian float32 vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .errors import DimensionError, NotFoundError, ParseError

_ORDERS = ("insertion", "sorted")


class EmbeddingTable:
    """Ordered map key -> fixed-dimension finite vector."""

    def __init__(self, space_name: str, dim: int, order: str = "insertion", dtype=np.float64):
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        if order not in _ORDERS:
            raise ValueError(f"order must be one of {_ORDERS}")
        self.space_name = space_name
        self.dim = dim
        self.order = order
        self.dtype = np.dtype(dtype)
        self.meta: dict = {}
        self._keys: list[str] = []
        self._index: dict[str, int] = {}
        self._rows: list[np.ndarray] = []
        self._matrix: np.ndarray | None = None

    def add(self, key: str, vector) -> None:
        if key in self._index:
            raise ValueError(f"duplicate key {key!r}")
        vec = np.asarray(vector, dtype=self.dtype).reshape(-1)
        if vec.shape[0] != self.dim:
            raise DimensionError(f"vector for {key!r} has {vec.shape[0]} components, expected {self.dim}")
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"non-finite value in vector for {key!r}")
        self._index[key] = len(self._keys)
        self._keys.append(key)
        self._rows.append(vec)
        self._matrix = None

    @classmethod
    def from_items(cls, space_name, dim, items, order="insertion", dtype=np.float64):
        table = cls(space_name, dim, order=order, dtype=dtype)
        items = list(items)
        if order == "sorted":
            items.sort(key=lambda kv: kv[0])
        for key, vec in items:
            table.add(key, vec)
        return table

    def keys(self) -> list[str]:
        return list(self._keys)

    def items(self):
        for key in self._keys:
            yield key, self[key]

    @property
    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            if self._rows:
                self._matrix = np.vstack(self._rows)
            else:
                self._matrix = np.empty((0, self.dim), dtype=self.dtype)
        return self._matrix

    def rows_for(self, keys) -> np.ndarray:
        idx = [self._index[k] for k in keys]
        return self.matrix[idx]

    def __len__(self) -> int:
        return len(self._keys)

    def __contains__(self, key: str) -> bool:
        return key in self._index

    def __getitem__(self, key: str) -> np.ndarray:
        i = self._index.get(key)
        if i is None:
            raise NotFoundError(f"no vector for key {key!r} in space {self.space_name!r}")
        return self._rows[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingTable):
            return NotImplemented
        return (
            self.space_name == other.space_name
            and self.dim == other.dim
            and self._keys == other._keys
            and all(np.array_equal(a, b) for a, b in zip(self._rows, other._rows))
        )


@dataclass(frozen=True)
class Ranking:
    """Items strictly ordered by (score desc, key asc); keys unique."""

    items: tuple

    def __post_init__(self):
        seen = set()
        prev = None
        for key, score in self.items:
            if key in seen:
                raise ValueError(f"duplicate key {key!r} in ranking")
            seen.add(key)
            if prev is not None:
                p_key, p_score = prev
                if score > p_score or (score == p_score and key < p_key):
                    raise ValueError("ranking not sorted by (score desc, key asc)")
            prev = (key, score)

    def __len__(self):
        return len(self.items)

    def keys(self):
        return [k for k, _ in self.items]

    def top(self, k: int):
        return self.items[:k]

    def rank_of(self, key) -> int | None:
        """1-based rank, or None when absent."""
        for i, (k, _) in enumerate(self.items, start=1):
            if k == key:
                return i
        return None


def rank_by_score(keys, scores) -> Ranking:
    """Build a Ranking from parallel keys/scores with the canonical tie-break."""
    order = sorted(range(len(keys)), key=lambda i: keys[i])
    keys = [keys[i] for i in order]
    scores = np.asarray(scores, dtype=np.float64)[order]
    # Stable sort on descending score keeps the key-ascending pre-order on ties.
    out = np.argsort(-scores, kind="stable")
    return Ranking(tuple((keys[i], float(scores[i])) for i in out))


def rank_neighbors(table: EmbeddingTable, query, candidates, exclude=()) -> Ranking:
    """Rank candidates minus exclude by cosine similarity to query.

    Zero-norm vectors (and every candidate, when the query has zero norm)
    score -inf and sort last, key-ascending.
    """
    query = np.asarray(query, dtype=np.float64).reshape(-1)
    if query.shape[0] != table.dim:
        raise DimensionError(f"query has {query.shape[0]} components, expected {table.dim}")
    keys = sorted(set(candidates) - set(exclude))
    missing = [k for k in keys if k not in table]
    if missing:
        raise NotFoundError(f"candidates missing from table: {missing[:10]}")
    if not keys:
        return Ranking(())
    scores = kernels.cosine_scores(table.rows_for(keys), query)
    out = np.argsort(-scores, kind="stable")
    return Ranking(tuple((keys[i], float(scores[i])) for i in out))


# ---------------------------------------------------------------------------
# File formats


def _format_float(x: float) -> str:
    return repr(float(x))


def save_table(table: EmbeddingTable, path, fmt: str = "text") -> None:
    path = Path(path)
    if fmt == "text":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# space={table.space_name} order={table.order}\n")
            fh.write(f"{len(table)} {table.dim}\n")
            for key, vec in table.items():
                fh.write(key + " " + " ".join(_format_float(v) for v in vec) + "\n")
    elif fmt == "binary":
        with open(path, "wb") as fh:
            fh.write(f"# space={table.space_name} order={table.order}\n".encode())
            fh.write(f"{len(table)} {table.dim}\n".encode())
            for key, vec in table.items():
                fh.write(key.encode() + b" ")
                fh.write(np.asarray(vec, dtype="<f4").tobytes())
                fh.write(b"\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")


def _parse_meta(line: str):
    meta = {}
    for part in line[1:].split():
        if "=" in part:
            k, v = part.split("=", 1)
            meta[k] = v
    return meta


def load_table(path, fmt: str | None = None) -> EmbeddingTable:
    path = Path(path)
    if fmt is None:
        fmt = "binary" if path.suffix == ".bin" else "text"
    if fmt == "text":
        return _load_text(path)
    if fmt == "binary":
        return _load_binary(path)
    raise ValueError(f"unknown format {fmt!r}")


def _load_text(path: Path) -> EmbeddingTable:
    with open(path, encoding="utf-8") as fh:
        lineno = 0
        line = fh.readline()
        lineno += 1
        meta = {}
        if line.startswith("#"):
            meta = _parse_meta(line)
            line = fh.readline()
            lineno += 1
        try:
            count, dim = (int(x) for x in line.split())
        except ValueError:
            raise ParseError("bad header, expected 'count dim'", path, lineno) from None
        table = EmbeddingTable(
            meta.get("space", path.stem), dim, order=meta.get("order", "insertion")
        )
        for _ in range(count):
            line = fh.readline()
            lineno += 1
            if not line:
                raise ParseError(f"expected {count} rows, file ended early", path, lineno)
            parts = line.rstrip("\n").split(" ")
            if len(parts) != dim + 1:
                raise ParseError(
                    f"row has {len(parts) - 1} components, expected {dim}", path, lineno
                )
            try:
                vec = [float(v) for v in parts[1:]]
            except ValueError as exc:
                raise ParseError(f"bad float ({exc})", path, lineno) from None
            if not all(math.isfinite(v) for v in vec):
                raise ParseError("non-finite value", path, lineno)
            table.add(parts[0], vec)
    return table


def _load_binary(path: Path) -> EmbeddingTable:
    data = path.read_bytes()
    pos = 0

    def _readline():
        nonlocal pos
        end = data.index(b"\n", pos)
        line = data[pos:end].decode()
        pos = end + 1
        return line

    line = _readline()
    meta = {}
    if line.startswith("#"):
        meta = _parse_meta(line)
        line = _readline()
    try:
        count, dim = (int(x) for x in line.split())
    except ValueError:
        raise ParseError("bad header, expected 'count dim'", path) from None
    table = EmbeddingTable(
        meta.get("space", path.stem), dim, order=meta.get("order", "insertion"), dtype=np.float32
    )
    vec_bytes = 4 * dim
    for row in range(count):
        try:
            sep = data.index(b" ", pos)
        except ValueError:
            raise ParseError(f"expected {count} rows, file ended early", path, line=row + 1) from None
        key = data[pos:sep].decode()
        start = sep + 1
        raw = data[start : start + vec_bytes]
        if len(raw) != vec_bytes:
            raise ParseError(f"truncated vector for {key!r}", path, line=row + 1)
        vec = np.frombuffer(raw, dtype="<f4")
        if not np.all(np.isfinite(vec)):
            raise ParseError(f"non-finite value in vector for {key!r}", path, line=row + 1)
        table.add(key, vec)
        pos = start + vec_bytes
        if pos < len(data) and data[pos : pos + 1] == b"\n":
            pos += 1
    return table
