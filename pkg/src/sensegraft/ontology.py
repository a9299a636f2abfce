"""WordNet 3.0 database parsing and the in-memory synset graph.

Reads the classic ``data.{noun,verb,adj,adv}`` / ``index.{noun,verb,adj,adv}``
database files (byte-offset cross references, ``|``-delimited glosses) plus
``index.sense`` for sense-key lookups.  The loaded graph is immutable and
safe for concurrent reads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import LoadError, NotFoundError, ParseError

# Part-of-speech letter -> database file class.  Satellite adjectives ("s")
# live in the adj files and fold into "a" for rendering.
POS_FILES = {"n": "noun", "v": "verb", "a": "adj", "s": "adj", "r": "adv"}

# Data-file pointer symbols for the semantic relations we keep.
_SYMBOL_RELATIONS = {
    "@": "hypernym",
    "@i": "hypernym_instance",
    "#m": "holonym_member",
    "#p": "holonym_part",
    "#s": "holonym_substance",
    "%m": "meronym_member",
    "%p": "meronym_part",
    "%s": "meronym_substance",
}
_ANTONYM_SYMBOL = "!"

# The six relations that feed triple extraction, with display labels.
RELATION_LABELS = {
    "hypernym": "Hypernym",
    "holonym_member": "Holonym (Member)",
    "holonym_part": "Holonym (Part)",
    "antonym": "Antonym",
    "hypernym_instance": "Hypernym (Instance)",
    "meronym_substance": "Meronym (Substance)",
}
EXTRACTABLE_RELATIONS = tuple(RELATION_LABELS)

# Sense-key ss_type digit -> pos letter.
_SS_TYPE_POS = {"1": "n", "2": "v", "3": "a", "4": "r", "5": "s"}

# Adjective syntactic markers appended to data-file words, e.g. "galore(ip)".
_ADJ_MARKER = re.compile(r"\((a|p|ip)\)$")

CAP_SAMPLER = "splitmix64-fisher-yates/v1"

_M64 = (1 << 64) - 1


@dataclass(frozen=True, order=True)
class SynsetId:
    """Canonical grounded concept identifier, rendered ``lemma.pos.NN``."""

    lemma_key: str
    pos: str
    sense_no: int

    def __post_init__(self):
        if self.pos not in "nvars":
            raise ValueError(f"bad pos {self.pos!r}")
        if self.sense_no < 1:
            raise ValueError(f"sense number must be positive, got {self.sense_no}")

    def __str__(self) -> str:
        pos = "a" if self.pos == "s" else self.pos
        return f"{self.lemma_key}.{pos}.{self.sense_no:02d}"

    @classmethod
    def parse(cls, text: str) -> "SynsetId":
        # Lemmas may contain dots ("u.s.a."), so split from the right.
        parts = text.rsplit(".", 2)
        if len(parts) != 3 or not parts[0]:
            raise ValueError(f"not a synset id: {text!r}")
        lemma, pos, num = parts
        if pos not in "nvars" or not num.isdigit():
            raise ValueError(f"not a synset id: {text!r}")
        return cls(lemma.lower(), pos, int(num))


@dataclass(frozen=True)
class Synset:
    id: SynsetId
    lemmas: tuple[str, ...]
    gloss: str
    pos: str

    def __post_init__(self):
        if not self.lemmas:
            raise ValueError(f"{self.id}: empty lemma list")
        if not self.gloss:
            raise ValueError(f"{self.id}: empty gloss")
        folded = "a" if self.pos == "s" else self.pos
        if self.id.pos != folded:
            raise ValueError(f"{self.id}: id pos does not match synset pos {self.pos}")


@dataclass(frozen=True)
class GroundedTriple:
    head: SynsetId
    relation: str
    tail: SynsetId
    score: float | None = None
    provenance: str = ""


class Ontology:
    """Immutable synset graph: glosses, lemmas, relation edges, core subset."""

    def __init__(
        self,
        synsets: dict[SynsetId, Synset],
        relations: dict[str, set[tuple[SynsetId, SynsetId]]],
        core_set: set[SynsetId] | None = None,
        warnings: dict[str, int] | None = None,
    ):
        for name, pairs in relations.items():
            for h, t in pairs:
                if h not in synsets or t not in synsets:
                    raise ValueError(f"relation {name}: edge ({h}, {t}) has unknown endpoint")
        if core_set:
            missing = {s for s in core_set if s not in synsets}
            if missing:
                raise ValueError(f"core set contains unknown synsets: {sorted(map(str, missing))[:5]}")
        self.synsets = synsets
        self.relations = {name: frozenset(pairs) for name, pairs in relations.items()}
        self.core_set = frozenset(core_set or ())
        self.warnings = dict(warnings or {})
        self._hypernyms: dict[SynsetId, set[SynsetId]] = {}
        self._hyponyms: dict[SynsetId, set[SynsetId]] = {}
        for h, t in self.relations.get("hypernym", ()):
            self._hypernyms.setdefault(h, set()).add(t)
            self._hyponyms.setdefault(t, set()).add(h)
        self._by_text = {str(sid): sid for sid in synsets}

    @property
    def full_set(self) -> frozenset[SynsetId]:
        return frozenset(self.synsets)

    def __contains__(self, sid: SynsetId) -> bool:
        return sid in self.synsets

    def __len__(self) -> int:
        return len(self.synsets)

    def resolve(self, text: str) -> SynsetId:
        """Look up a ``lemma.pos.NN`` string; raises NotFoundError."""
        sid = self._by_text.get(text)
        if sid is None:
            raise NotFoundError(f"unknown synset {text!r}")
        return sid

    def hypernyms_of(self, sid: SynsetId) -> set[SynsetId]:
        return self._hypernyms.get(sid, set())

    def hyponyms_of(self, sid: SynsetId) -> set[SynsetId]:
        return self._hyponyms.get(sid, set())

    def gloss(self, sid: SynsetId) -> str:
        return self.synsets[sid].gloss


def _fold(pos: str) -> str:
    return "a" if pos == "s" else pos


def co_hyponyms(onto: Ontology, s: SynsetId) -> set[SynsetId]:
    """Synsets sharing at least one direct hypernym with s (same pos, s excluded)."""
    if s not in onto:
        raise NotFoundError(f"unknown synset {s}")
    pos = _fold(onto.synsets[s].pos)
    out: set[SynsetId] = set()
    for parent in onto.hypernyms_of(s):
        out |= onto.hyponyms_of(parent)
    out.discard(s)
    return {c for c in out if _fold(onto.synsets[c].pos) == pos}


def most_frequent_lemma(onto: Ontology, s: SynsetId, freq_table: dict[str, int]) -> str:
    """Highest-frequency lemma of s, rendered lowercase with spaces.

    Ties and lemmas absent from the table break lexicographically ascending.
    """
    if s not in onto:
        raise NotFoundError(f"unknown synset {s}")
    rendered = [lemma.lower().replace("_", " ") for lemma in onto.synsets[s].lemmas]
    return min(rendered, key=lambda r: (-freq_table.get(r, 0), r))


class _SplitMix64:
    """Named, versioned PRNG for cap sampling (see CAP_SAMPLER)."""

    def __init__(self, seed: int):
        self._state = seed & _M64

    def next_u64(self) -> int:
        self._state = (self._state + 0x9E3779B97F4A7C15) & _M64
        z = self._state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
        return z ^ (z >> 31)

    def below(self, bound: int) -> int:
        # Rejection sampling keeps the draw unbiased.
        limit = ((1 << 64) // bound) * bound
        while True:
            z = self.next_u64()
            if z < limit:
                return z % bound


def sample_indices(n: int, k: int, seed: int) -> list[int]:
    """k distinct indices from range(n), uniform, reproducible across platforms."""
    rng = _SplitMix64(seed)
    arr = list(range(n))
    for i in range(k):
        j = i + rng.below(n - i)
        arr[i], arr[j] = arr[j], arr[i]
    return sorted(arr[:k])


def extract_relation_triples(
    onto: Ontology,
    relation: str,
    cap: int | None = None,
    seed: int = 0,
) -> list[GroundedTriple]:
    """All (head, relation, tail) pairs, canonically sorted; uniformly
    subsampled to exactly ``cap`` when the population exceeds it."""
    if relation not in EXTRACTABLE_RELATIONS:
        raise NotFoundError(
            f"unknown relation {relation!r}; supported: {', '.join(EXTRACTABLE_RELATIONS)}"
        )
    pairs = sorted(onto.relations.get(relation, ()), key=lambda p: (str(p[0]), str(p[1])))
    if cap is not None and len(pairs) > cap:
        pairs = [pairs[i] for i in sample_indices(len(pairs), cap, seed)]
    return [GroundedTriple(h, relation, t, provenance="WordNet") for h, t in pairs]


# ---------------------------------------------------------------------------
# Database file parsing


def _data_lines(path: Path):
    # Copyright header lines begin with whitespace and carry no synsets.
    with open(path, encoding="utf-8", errors="strict") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line[0] == " ":
                continue
            yield lineno, line.rstrip("\n")


def _parse_data_file(path: Path, fileclass: str):
    """Yield raw synset records from one data.<pos> file."""
    for lineno, line in _data_lines(path):
        if "|" not in line:
            raise ParseError("data line has no gloss separator", path, lineno)
        head, gloss = line.split("|", 1)
        gloss = gloss.strip()
        parts = head.split()
        try:
            offset = int(parts[0])
            ss_type = parts[2]
            w_cnt = int(parts[3], 16)
            words = [parts[4 + 2 * i] for i in range(w_cnt)]
            lex_ids = [parts[5 + 2 * i] for i in range(w_cnt)]
            p_idx = 4 + 2 * w_cnt
            p_cnt = int(parts[p_idx])
            pointers = []
            for k in range(p_cnt):
                base = p_idx + 1 + 4 * k
                symbol = parts[base]
                tgt_offset = int(parts[base + 1])
                tgt_pos = parts[base + 2]
                src_tgt = parts[base + 3]
                pointers.append((symbol, tgt_offset, tgt_pos, int(src_tgt[:2], 16), int(src_tgt[2:], 16)))
        except (IndexError, ValueError) as exc:
            raise ParseError(f"malformed data line ({exc})", path, lineno) from None
        yield {
            "fileclass": fileclass,
            "offset": offset,
            "pos": ss_type,
            "words": words,
            "lex_ids": lex_ids,
            "pointers": pointers,
            "gloss": gloss,
            "lineno": lineno,
            "path": path,
        }


def _parse_index_file(path: Path):
    """Yield (lemma, pos, sense-ordered synset offsets) from one index.<pos> file."""
    for lineno, line in _data_lines(path):
        parts = line.split()
        try:
            lemma, pos = parts[0], parts[1]
            synset_cnt = int(parts[2])
            p_cnt = int(parts[3])
            offsets = [int(x) for x in parts[4 + p_cnt + 2 : 4 + p_cnt + 2 + synset_cnt]]
            if len(offsets) != synset_cnt:
                raise ValueError("offset count mismatch")
        except (IndexError, ValueError) as exc:
            raise ParseError(f"malformed index line ({exc})", path, lineno) from None
        yield lemma, pos, offsets


def _strip_adj_marker(word: str) -> str:
    return _ADJ_MARKER.sub("", word)


def load_wordnet(data_dir, core_list=None) -> Ontology:
    """Parse a WordNet 3.0 database directory into an Ontology.

    ``core_list`` is a plain-text file with one sense key per line; entries
    that fail to map are dropped and counted in ``Ontology.warnings``.
    """
    data_dir = Path(data_dir)
    records: dict[tuple[str, int], dict] = {}
    index: dict[tuple[str, str], list[int]] = {}
    warnings = {"core_unmapped": 0}

    for fileclass in ("noun", "verb", "adj", "adv"):
        data_path = data_dir / f"data.{fileclass}"
        index_path = data_dir / f"index.{fileclass}"
        for p in (data_path, index_path):
            if not p.exists():
                raise LoadError(f"missing WordNet file: {p}")
        for rec in _parse_data_file(data_path, fileclass):
            records[(fileclass, rec["offset"])] = rec
        for lemma, _pos, offsets in _parse_index_file(index_path):
            index[(lemma, fileclass)] = offsets

    # Assign lemma.pos.NN ids: first word of the synset, sense number from
    # the position of the synset in that word's index entry.
    ids: dict[tuple[str, int], SynsetId] = {}
    synsets: dict[SynsetId, Synset] = {}
    for key, rec in records.items():
        first = _strip_adj_marker(rec["words"][0]).lower()
        entry = index.get((first, rec["fileclass"]))
        if entry is None or rec["offset"] not in entry:
            raise ParseError(
                f"synset offset {rec['offset']} not in index entry for {first!r}",
                rec["path"],
                rec["lineno"],
            )
        sense_no = entry.index(rec["offset"]) + 1
        sid = SynsetId(first, _fold(rec["pos"]), sense_no)
        ids[key] = sid
        synsets[sid] = Synset(
            id=sid,
            lemmas=tuple(_strip_adj_marker(w) for w in rec["words"]),
            gloss=rec["gloss"],
            pos=rec["pos"],
        )

    relations: dict[str, set[tuple[SynsetId, SynsetId]]] = {
        name: set() for name in set(_SYMBOL_RELATIONS.values()) | {"antonym"}
    }
    for key, rec in records.items():
        sid = ids[key]
        for symbol, tgt_offset, tgt_pos, src_no, tgt_no in rec["pointers"]:
            rel = _SYMBOL_RELATIONS.get(symbol)
            if rel is None and symbol != _ANTONYM_SYMBOL:
                continue
            tgt_key = (POS_FILES.get(tgt_pos, tgt_pos), tgt_offset)
            tgt_id = ids.get(tgt_key)
            if tgt_id is None:
                raise ParseError(
                    f"pointer {symbol} references unknown offset {tgt_offset} ({tgt_pos})",
                    rec["path"],
                    rec["lineno"],
                )
            if symbol == _ANTONYM_SYMBOL:
                # Lemma-level antonymy lifted to the containing synset pair.
                relations["antonym"].add((sid, tgt_id))
            else:
                relations[rel].add((sid, tgt_id))

    core: set[SynsetId] = set()
    if core_list is not None:
        core_path = Path(core_list)
        if not core_path.exists():
            raise LoadError(f"missing core list: {core_path}")
        sense_index = _load_sense_index(data_dir)
        with open(core_path, encoding="utf-8") as fh:
            for raw in fh:
                sense_key = raw.strip().split()[0] if raw.strip() else ""
                if not sense_key:
                    continue
                sid = _resolve_sense_key(sense_key, sense_index, ids)
                if sid is None:
                    warnings["core_unmapped"] += 1
                else:
                    core.add(sid)

    return Ontology(synsets, relations, core, warnings)


def _load_sense_index(data_dir: Path) -> dict[str, tuple[str, int]]:
    """sense key -> (fileclass, offset), from index.sense."""
    path = data_dir / "index.sense"
    if not path.exists():
        raise LoadError(f"missing WordNet file: {path}")
    out: dict[str, tuple[str, int]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            try:
                key, offset = parts[0], int(parts[1])
                ss_type = key.split("%", 1)[1].split(":", 1)[0]
                pos = _SS_TYPE_POS[ss_type]
            except (IndexError, ValueError, KeyError) as exc:
                raise ParseError(f"malformed sense index line ({exc})", path, lineno) from None
            out[key] = (POS_FILES[pos], offset)
    return out


def _resolve_sense_key(sense_key, sense_index, ids):
    loc = sense_index.get(sense_key)
    if loc is None:
        return None
    return ids.get(loc)


def load_freq_table(path) -> dict[str, int]:
    """TSV ``term<TAB>count`` -> dict; later duplicates win."""
    path = Path(path)
    if not path.exists():
        raise LoadError(f"missing frequency table: {path}")
    table: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                term, count = line.rstrip("\n").split("\t")
                table[term] = int(count)
            except ValueError as exc:
                raise ParseError(f"malformed frequency line ({exc})", path, lineno) from None
    return table
