"""Generate miniature WordNet 3.0 database directories for tests.

Writes data.{noun,verb,adj,adv}, index.{noun,verb,adj,adv}, and index.sense
in the real file format, including correct byte-offset cross references, so
the production parser is exercised end to end.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

POS_FILE = {"n": "noun", "v": "verb", "a": "adj", "s": "adj", "r": "adv"}
INDEX_POS = {"noun": "n", "verb": "v", "adj": "a", "adv": "r"}
SS_DIGIT = {"n": "1", "v": "2", "a": "3", "r": "4", "s": "5"}

_HEADER = "  1 fixture database file; lines starting with whitespace are skipped\n"


@dataclass
class WSynset:
    ref: str  # handle used for pointer targets within the fixture
    pos: str  # n / v / a / s / r
    lemmas: tuple
    gloss: str
    pointers: list = field(default_factory=list)  # (symbol, target_ref) semantic links
    lemma_pointers: list = field(default_factory=list)  # (symbol, src_word_no, target_ref, tgt_word_no)
    frames: int = 0  # verbs only


@dataclass
class WordNetFixture:
    root: Path
    ids: dict  # ref -> rendered synset id string ("lemma.pos.NN")
    sense_keys: dict  # (ref, lemma) -> sense key
    offsets: dict  # ref -> byte offset in its data file
    glosses: dict  # ref -> gloss text

    def write_core_list(self, path, refs, bogus=()):
        """Core list of sense keys (first lemma of each ref) plus bogus keys."""
        lines = [self.sense_keys[(ref, None)] for ref in refs]
        lines += list(bogus)
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path


def write_wordnet(root, synsets) -> WordNetFixture:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    by_file = {"noun": [], "verb": [], "adj": [], "adv": []}
    for s in synsets:
        by_file[POS_FILE[s.pos]].append(s)
    pos_of = {s.ref: s.pos for s in synsets}

    # lex_ids keep sense keys unique for repeated (lemma, fileclass)
    lex_counter: dict = {}
    lexids: dict = {}
    for s in synsets:
        fc = POS_FILE[s.pos]
        for lemma in s.lemmas:
            key = (lemma.lower(), fc)
            lexids[(s.ref, lemma)] = lex_counter.get(key, 0)
            lex_counter[key] = lex_counter.get(key, 0) + 1

    def render(s: WSynset, own: int, offsets: dict) -> str:
        words = " ".join(f"{lemma} {lexids[(s.ref, lemma)]:x}" for lemma in s.lemmas)
        ptrs = []
        for sym, tgt in s.pointers:
            ptrs.append(f"{sym} {offsets[tgt]:08d} {'a' if pos_of[tgt] == 's' else pos_of[tgt]} 0000")
        for sym, src_no, tgt, tgt_no in s.lemma_pointers:
            ptrs.append(
                f"{sym} {offsets[tgt]:08d} {'a' if pos_of[tgt] == 's' else pos_of[tgt]} "
                f"{src_no:02x}{tgt_no:02x}"
            )
        body = f" {len(ptrs):03d}"
        if ptrs:
            body += " " + " ".join(ptrs)
        if s.pos == "v" and s.frames:
            body += f" {s.frames:02d}" + "".join(f" + {i + 1:02d} 00" for i in range(s.frames))
        return f"{own:08d} 03 {s.pos} {len(s.lemmas):02x} {words}{body} | {s.gloss}  \n"

    # Offsets are fixed-width, so line lengths do not depend on their values:
    # one zero-offset pass determines the layout.
    zero = {s.ref: 0 for s in synsets}
    offsets: dict = {}
    for fc, group in by_file.items():
        cursor = len(_HEADER.encode())
        for s in group:
            offsets[s.ref] = cursor
            cursor += len(render(s, 0, zero).encode())

    for fc, group in by_file.items():
        lines = [render(s, offsets[s.ref], offsets) for s in group]
        (root / f"data.{fc}").write_text(_HEADER + "".join(lines), encoding="utf-8")

    # index.<pos>: sense order is fixture declaration order.
    entries: dict = {fc: {} for fc in by_file}
    for s in synsets:
        fc = POS_FILE[s.pos]
        for lemma in s.lemmas:
            entries[fc].setdefault(lemma.lower(), []).append(s.ref)
    for fc, lemma_map in entries.items():
        lines = []
        for lemma in sorted(lemma_map):
            refs = lemma_map[lemma]
            offs = " ".join(f"{offsets[r]:08d}" for r in refs)
            lines.append(f"{lemma} {INDEX_POS[fc]} {len(refs)} 0 {len(refs)} 0 {offs}  \n")
        (root / f"index.{fc}").write_text(_HEADER + "".join(lines), encoding="utf-8")

    sense_no: dict = {}
    for fc, lemma_map in entries.items():
        for lemma, refs in lemma_map.items():
            for i, ref in enumerate(refs, start=1):
                sense_no[(ref, lemma)] = i

    sense_keys: dict = {}
    sense_lines = []
    for s in synsets:
        for lemma in s.lemmas:
            key = f"{lemma.lower()}%{SS_DIGIT[s.pos]}:03:{lexids[(s.ref, lemma)]}::"
            sense_keys[(s.ref, lemma)] = key
            sense_lines.append(f"{key} {offsets[s.ref]:08d} {sense_no[(s.ref, lemma.lower())]} 0\n")
        sense_keys[(s.ref, None)] = sense_keys[(s.ref, s.lemmas[0])]
    (root / "index.sense").write_text("".join(sorted(sense_lines)), encoding="utf-8")

    ids = {}
    for s in synsets:
        first = s.lemmas[0].lower()
        pos = "a" if s.pos == "s" else s.pos
        ids[s.ref] = f"{first}.{pos}.{sense_no[(s.ref, first)]:02d}"
    glosses = {s.ref: s.gloss for s in synsets}
    return WordNetFixture(root=root, ids=ids, sense_keys=sense_keys, offsets=offsets, glosses=glosses)


def mini_synsets() -> list[WSynset]:
    """A 16-synset ontology covering every relation and pos the parser handles."""
    return [
        WSynset("entity", "n", ("entity",), "that which is perceived to exist"),
        WSynset("animal", "n", ("animal", "beast"), "a living organism that feeds on organic matter",
                [("@", "entity")]),
        WSynset("dog", "n", ("dog", "domestic_dog"), "a domesticated canine kept as a pet",
                [("@", "animal"), ("%s", "fur")]),
        WSynset("wolf", "n", ("wolf",), "a wild canine that hunts in packs",
                [("@", "animal"), ("#m", "pack")]),
        WSynset("cat", "n", ("cat",), "a small feline mammal",
                [("@", "animal")]),
        WSynset("pack", "n", ("pack",), "a group of animals that hunt together"),
        WSynset("tail", "n", ("tail",), "the rear appendage of an animal",
                [("#p", "dog")]),
        WSynset("fur", "n", ("fur",), "the thick hairy coat of a mammal"),
        WSynset("medicine", "n", ("medicine",), "something that treats or prevents disease",
                [("@", "drug")]),
        WSynset("drug", "n", ("drug",), "a substance used as a medication"),
        WSynset("good", "a", ("good",), "having desirable or positive qualities",
                lemma_pointers=[("!", 1, "bad", 1)]),
        WSynset("bad", "a", ("bad",), "lacking desirable or positive qualities",
                lemma_pointers=[("!", 1, "good", 1)]),
        WSynset("fast", "s", ("fast", "quick"), "acting or moving with great speed"),
        WSynset("run", "v", ("run",), "move fast by using the legs",
                [("@", "move")], frames=2),
        WSynset("move", "v", ("move",), "change position or place", frames=1),
        WSynset("quickly", "r", ("quickly",), "with rapid movements"),
    ]


def chain_synsets(n: int = 8) -> list[WSynset]:
    """n noun synsets forming one hypernym chain (n-1 edges)."""
    out = [WSynset("c0", "n", ("node0",), "the root of the chain")]
    for i in range(1, n):
        out.append(
            WSynset(f"c{i}", "n", (f"node{i}",), f"link {i} of the chain", [("@", f"c{i - 1}")])
        )
    return out


def taxonomy_synsets(parents: int = 60, children: int = 6) -> list[WSynset]:
    """A wide taxonomy for sampling-heavy tests: parents x children nouns."""
    out = [WSynset("root", "n", ("taxroot",), "the shared root concept")]
    for p in range(parents):
        out.append(
            WSynset(f"p{p}", "n", (f"genus{p}",), f"parent concept number {p}", [("@", "root")])
        )
        for c in range(children):
            out.append(
                WSynset(
                    f"p{p}c{c}",
                    "n",
                    (f"species{p}_{c}",),
                    f"child {c} of parent {p}",
                    [("@", f"p{p}")],
                )
            )
    return out
