"""The cloze probe over grounded senses: building, loading, evaluating.

Instances carry a masked assertion with a head slot; heads can be rendered
as the most frequent lemma, the sense token, or the slash combination, with
optional gloss prepending.  Evaluation reports mean P@k and MRR per source
and relation, micro-averaged over instances with exact rational accumulation
so results are independent of instance order.
"""

from __future__ import annotations

import json
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import NotFoundError, ParseError, QueryError, SensegraftError
from .lm import MASK, EnrichedModel, inject_senses, predict_senses, render_with_gloss
from .ontology import (
    EXTRACTABLE_RELATIONS,
    RELATION_LABELS,
    GroundedTriple,
    Ontology,
    SynsetId,
    extract_relation_triples,
    most_frequent_lemma,
)
from .senses import sense_key
from .vectors import EmbeddingTable, rank_neighbors

HEAD_SLOT = "[HEAD]"

SOURCES = ("WordNet", "WikiData", "ConceptNet")
REPR_MODES = ("lemma", "synset", "slash")
GLOSS_COMBOS = ((), ("avg",), ("pre",), ("avg", "pre"))

# Verbalization templates; ConceptNet assertions are taken verbatim from the
# aligned crowd-written sentences and need none.
TEMPLATES = {
    ("WordNet", "hypernym"): "[H] is a type of [T]",
    ("WordNet", "holonym_member"): "[H] is a member of [T]",
    ("WordNet", "holonym_part"): "[H] is part of [T]",
    ("WordNet", "antonym"): "[H] is the opposite of [T]",
    ("WordNet", "hypernym_instance"): "[H] is an example of [T]",
    ("WordNet", "meronym_substance"): "[H] is made of [T]",
    ("WikiData", "P31"): "[H] is an example of [T]",
    ("WikiData", "P361"): "[H] is part of [T]",
    ("WikiData", "P366"): "[H] is used for [T]",
    ("WikiData", "P186"): "[H] is made from [T]",
    ("WikiData", "P461"): "[H] is the opposite of [T]",
    ("WikiData", "P737"): "[H] is influenced by [T]",
    ("WikiData", "P2283"): "[H] uses [T]",
    ("WikiData", "P463"): "[H] is a member of [T]",
    ("WikiData", "P1535"): "[H] is used by [T]",
    ("WikiData", "P279"): "[H] is a type of [T]",
}

WIKIDATA_LABELS = {
    "P31": "P31 (Instance of)",
    "P361": "P361 (Part of)",
    "P366": "P366 (Use)",
    "P186": "P186 (Made from)",
    "P461": "P461 (Opposite of)",
    "P737": "P737 (Influenced by)",
    "P2283": "P2283 (Uses)",
    "P463": "P463 (Member of)",
    "P1535": "P1535 (Used by)",
    "P279": "P279 (Subclass of)",
}

_RELATION_ORDER = {
    "WordNet": list(EXTRACTABLE_RELATIONS),
    "WikiData": list(WIKIDATA_LABELS),
    "ConceptNet": [
        "AtLocation", "UsedFor", "IsA", "Causes", "HasSubevent",
        "HasPrerequisite", "HasProperty", "CapableOf", "MotivatedByGoal",
        "HasA", "PartOf", "CausesDesire", "ReceivesAction", "MadeOf",
        "Desires", "CreatedBy", "HasFirstSubevent", "HasLastSubevent",
    ],
}

DETERMINERS = frozenset(
    {"a", "an", "the", "some", "any", "every", "each",
     "this", "that", "these", "those", "no"}
)


def relation_label(source: str, relation: str) -> str:
    if source == "WordNet":
        return RELATION_LABELS.get(relation, relation)
    if source == "WikiData":
        return WIKIDATA_LABELS.get(relation, relation)
    return relation


@dataclass(frozen=True)
class ProbeInstance:
    """One masked assertion with its grounded head and gold tails."""

    id: str
    source: str
    relation: str
    assertion: str
    head: SynsetId
    head_lemma: str
    gloss: str
    gold_tails: frozenset[SynsetId]
    in_core: bool

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")
        if self.assertion.count(MASK) != 1:
            raise ValueError(f"{self.id}: assertion must contain exactly one {MASK}")
        if self.assertion.count(HEAD_SLOT) != 1:
            raise ValueError(f"{self.id}: assertion must contain exactly one {HEAD_SLOT}")
        if not self.gold_tails:
            raise ValueError(f"{self.id}: empty gold tail set")
        if self.head in self.gold_tails:
            raise ValueError(f"{self.id}: gold tails must not contain the head")


@dataclass
class ProbeDataset:
    instances: list[ProbeInstance]
    candidates: dict[str, frozenset[SynsetId]] = field(default_factory=dict)
    skipped: int = 0

    def subset(self, which: str) -> list[ProbeInstance]:
        which = _norm_subset(which)
        if which == "core":
            return [i for i in self.instances if i.in_core]
        return list(self.instances)

    @property
    def counts(self) -> dict:
        per_group: dict[tuple[str, str], Counter] = {}
        total = Counter()
        for inst in self.instances:
            g = per_group.setdefault((inst.source, inst.relation), Counter())
            g["full"] += 1
            total["full"] += 1
            if inst.in_core:
                g["core"] += 1
                total["core"] += 1
        return {
            "All": dict(total),
            "groups": {
                f"{src}/{rel}": dict(cnt) for (src, rel), cnt in sorted(per_group.items())
            },
        }


def _norm_subset(which: str) -> str:
    w = which.lower()
    if w not in ("core", "full"):
        raise ValueError(f"subset must be 'core' or 'full', got {which!r}")
    return w


@dataclass
class ProbeBuildConfig:
    default_cap: int | None = 10_000
    caps: dict[str, int] = field(default_factory=dict)
    seed: int = 0
    core_min_instances: int = 10
    apply_determiners: bool = True
    freq_table: dict[str, int] = field(default_factory=dict)


def learn_determiners(records) -> dict[str, str]:
    """Modal determiner immediately preceding each head/tail surface term.

    The empty determiner participates in the mode; ties break to the
    lexicographically smaller determiner.
    """
    counts: dict[str, Counter] = {}
    for rec in records:
        sentence = rec["sentence"]
        for span_field in ("head_span", "tail_span"):
            s, e = rec[span_field]
            term = sentence[s:e].lower()
            prefix = sentence[:s].split()
            det = prefix[-1].lower() if prefix else ""
            if det not in DETERMINERS:
                det = ""
            counts.setdefault(term, Counter())[det] += 1
    return {
        term: min(cnt.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        for term, cnt in counts.items()
    }


def _read_conceptnet(path, onto: Ontology):
    """Yield validated ConceptNet records; count unresolvable ones."""
    path = Path(path)
    records, skipped = [], 0
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                sentence = rec["sentence"]
                hs, he = (int(x) for x in rec["head_span"])
                ts, te = (int(x) for x in rec["tail_span"])
                relation = rec["relation"]
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"bad ConceptNet record ({exc})", path, lineno) from None
            try:
                head = onto.resolve(rec["head_synset"])
                tail = onto.resolve(rec["tail_synset"])
            except NotFoundError:
                skipped += 1
                continue
            if head == tail:
                skipped += 1
                continue
            dedupe = (sentence, head, relation, tail)
            if dedupe in seen:
                continue
            seen.add(dedupe)
            records.append(
                {
                    "sentence": sentence,
                    "head_span": (hs, he),
                    "tail_span": (ts, te),
                    "head": head,
                    "tail": tail,
                    "relation": relation,
                }
            )
    return records, skipped


def _read_wikidata(path, onto: Ontology):
    path = Path(path)
    triples, skipped = [], 0
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise ParseError("expected 'head<TAB>relation<TAB>tail'", path, lineno)
            head_text, relation, tail_text = parts
            if ("WikiData", relation) not in TEMPLATES:
                raise NotFoundError(f"no template for WikiData relation {relation!r}")
            try:
                head = onto.resolve(head_text)
                tail = onto.resolve(tail_text)
            except NotFoundError:
                skipped += 1
                continue
            if head == tail or (head, relation, tail) in seen:
                continue
            seen.add((head, relation, tail))
            triples.append(GroundedTriple(head, relation, tail, provenance="WikiData"))
    return triples, skipped


def _templated_assertion(source, relation, head_surface, tail_surface, determiners):
    template = TEMPLATES.get((source, relation))
    if template is None:
        raise NotFoundError(f"no template for {source} relation {relation!r}")
    det_h = determiners.get(head_surface, "")
    det_t = determiners.get(tail_surface, "")
    head_slot = f"{det_h} {HEAD_SLOT}" if det_h else HEAD_SLOT
    mask_slot = f"{det_t} {MASK}" if det_t else MASK
    return template.replace("[H]", head_slot).replace("[T]", mask_slot)


def build_probe(
    onto: Ontology,
    wikidata_file=None,
    conceptnet_file=None,
    config: ProbeBuildConfig | None = None,
) -> ProbeDataset:
    """Compile the probe from WordNet relations plus precomputed
    synset-linked WikiData and sense-annotated ConceptNet files."""
    config = config or ProbeBuildConfig()
    skipped = 0

    cn_records: list[dict] = []
    if conceptnet_file is not None:
        cn_records, cn_skipped = _read_conceptnet(conceptnet_file, onto)
        skipped += cn_skipped
    determiners = learn_determiners(cn_records) if config.apply_determiners else {}

    # (source, relation, head, tail, assertion, head_lemma) rows, one per triple.
    rows = []
    for relation in EXTRACTABLE_RELATIONS:
        cap = config.caps.get(relation, config.default_cap)
        for triple in extract_relation_triples(onto, relation, cap=cap, seed=config.seed):
            head_surface = most_frequent_lemma(onto, triple.head, config.freq_table)
            tail_surface = most_frequent_lemma(onto, triple.tail, config.freq_table)
            assertion = _templated_assertion(
                "WordNet", relation, head_surface, tail_surface, determiners
            )
            rows.append(("WordNet", relation, triple.head, triple.tail, assertion, head_surface))

    if wikidata_file is not None:
        wd_triples, wd_skipped = _read_wikidata(wikidata_file, onto)
        skipped += wd_skipped
        for triple in wd_triples:
            head_surface = most_frequent_lemma(onto, triple.head, config.freq_table)
            tail_surface = most_frequent_lemma(onto, triple.tail, config.freq_table)
            assertion = _templated_assertion(
                "WikiData", triple.relation, head_surface, tail_surface, determiners
            )
            rows.append(("WikiData", triple.relation, triple.head, triple.tail, assertion, head_surface))

    for rec in cn_records:
        sentence = rec["sentence"]
        (hs, he), (ts, te) = rec["head_span"], rec["tail_span"]
        if hs < te and ts < he:  # overlapping spans cannot be slotted
            skipped += 1
            continue
        head_lemma = sentence[hs:he]
        if hs < ts:
            assertion = (
                sentence[:hs] + HEAD_SLOT + sentence[he:ts] + MASK + sentence[te:]
            )
        else:
            assertion = (
                sentence[:ts] + MASK + sentence[te:hs] + HEAD_SLOT + sentence[he:]
            )
        rows.append(("ConceptNet", rec["relation"], rec["head"], rec["tail"], assertion, head_lemma))

    # Gold sets merge every tail admitted for the same (source, relation, head).
    golds: dict[tuple[str, str, SynsetId], set[SynsetId]] = {}
    for source, relation, head, tail, _a, _l in rows:
        golds.setdefault((source, relation, head), set()).add(tail)

    core_counts: Counter = Counter()
    for source, relation, head, tail, _a, _l in rows:
        if head in onto.core_set and tail in onto.core_set:
            core_counts[(source, relation)] += 1

    src_idx = {s: i for i, s in enumerate(SOURCES)}
    rows.sort(key=lambda r: (src_idx[r[0]], r[1], str(r[2]), str(r[3]), r[4]))

    instances: list[ProbeInstance] = []
    seq: Counter = Counter()
    for source, relation, head, tail, assertion, head_lemma in rows:
        gold = golds[(source, relation, head)] - {head}
        if not gold:
            skipped += 1
            continue
        in_core = (
            head in onto.core_set
            and tail in onto.core_set
            and core_counts[(source, relation)] >= config.core_min_instances
        )
        n = seq[(source, relation)]
        seq[(source, relation)] += 1
        instances.append(
            ProbeInstance(
                id=f"{source}:{relation}:{n:05d}",
                source=source,
                relation=relation,
                assertion=assertion,
                head=head,
                head_lemma=head_lemma,
                gloss=onto.gloss(head),
                gold_tails=frozenset(gold),
                in_core=in_core,
            )
        )

    candidates = {"core": frozenset(onto.core_set), "full": onto.full_set}
    return ProbeDataset(instances, candidates, skipped)


def render_query(inst: ProbeInstance, repr: str = "synset", gloss_mode=("avg", "pre")) -> str:
    """Fill the head slot per the representation mode; optionally prepend the
    gloss.  ('avg' is consumed by the embedding side and ignored here.)"""
    if repr not in REPR_MODES:
        raise ValueError(f"repr must be one of {REPR_MODES}")
    if repr == "lemma":
        if not inst.head_lemma:
            raise QueryError(f"{inst.id}: lemma representation requires a head lemma")
        head_text = inst.head_lemma
    elif repr == "synset":
        head_text = f"<WN:{inst.head}>"
    else:
        if not inst.head_lemma:
            raise QueryError(f"{inst.id}: slash representation requires a head lemma")
        head_text = f"{inst.head_lemma} / <WN:{inst.head}>"
    text = inst.assertion.replace(HEAD_SLOT, head_text)
    if "pre" in gloss_mode:
        text = render_with_gloss(inst.head, inst.gloss, text)
    return text


# ---------------------------------------------------------------------------
# Metrics


@dataclass
class MetricsRow:
    group: str  # "All", source name, or "source/relation"
    label: str
    n: int
    n_excluded: int
    p_at: dict[int, float]
    mrr: float


@dataclass
class MetricsReport:
    subset: str
    ks: tuple[int, ...]
    rows: list[MetricsRow]

    def row(self, group: str) -> MetricsRow:
        for row in self.rows:
            if row.group == group:
                return row
        raise NotFoundError(f"no metrics row for group {group!r}")

    def to_json(self) -> dict:
        return {
            "subset": self.subset,
            "ks": list(self.ks),
            "rows": [
                {
                    "group": r.group,
                    "label": r.label,
                    "n": r.n,
                    "n_excluded": r.n_excluded,
                    "p_at": {str(k): v for k, v in r.p_at.items()},
                    "mrr": r.mrr,
                }
                for r in self.rows
            ],
        }

    @classmethod
    def from_json(cls, rec: dict) -> "MetricsReport":
        return cls(
            subset=rec["subset"],
            ks=tuple(rec["ks"]),
            rows=[
                MetricsRow(
                    group=r["group"],
                    label=r["label"],
                    n=r["n"],
                    n_excluded=r["n_excluded"],
                    p_at={int(k): v for k, v in r["p_at"].items()},
                    mrr=r["mrr"],
                )
                for r in rec["rows"]
            ],
        )

    def to_tsv(self) -> str:
        header = ["Group", *(f"P@{k}" for k in self.ks), "MRR", "N", "Excluded"]
        lines = ["\t".join(header)]
        for r in self.rows:
            cells = [r.label]
            cells += [f"{100.0 * r.p_at[k]:.2f}" for k in self.ks]
            cells.append(f"{100.0 * r.mrr:.2f}")
            cells.append(str(r.n))
            cells.append(str(r.n_excluded))
            lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"


_DEFAULT_KS = {"core": (1, 3, 10, 100), "full": (1, 3, 10, 100, 1000)}


def _aggregate(instances, best_ranks, ks, subset) -> MetricsReport:
    """Micro-averaged P@k / MRR rows from per-instance best gold ranks.

    best_ranks[i] is the 1-based rank of the best-ranked gold tail, or None
    when every gold tail was excluded (counted, not averaged).  Rational
    accumulation makes the result independent of instance order.
    """
    groups: dict[str, dict] = {}

    def _bucket(key):
        return groups.setdefault(
            key, {"n": 0, "excluded": 0, "hits": Counter(), "rr": Fraction(0)}
        )

    for inst, rank in zip(instances, best_ranks):
        for key in ("All", inst.source, f"{inst.source}/{inst.relation}"):
            b = _bucket(key)
            if rank is None:
                b["excluded"] += 1
                continue
            b["n"] += 1
            b["rr"] += Fraction(1, rank)
            for k in ks:
                if rank <= k:
                    b["hits"][k] += 1

    def _row(key, label):
        b = groups[key]
        n = b["n"]
        p_at = {k: (b["hits"][k] / n if n else 0.0) for k in ks}
        mrr = float(b["rr"] / n) if n else 0.0
        return MetricsRow(group=key, label=label, n=n, n_excluded=b["excluded"], p_at=p_at, mrr=mrr)

    rows = [_row("All", "All")] if "All" in groups else []
    for source in SOURCES:
        if source not in groups:
            continue
        rows.append(_row(source, source))
        known = _RELATION_ORDER[source]
        rels = [g.split("/", 1)[1] for g in groups if g.startswith(f"{source}/")]
        rels.sort(key=lambda r: (known.index(r) if r in known else len(known), r))
        for rel in rels:
            rows.append(_row(f"{source}/{rel}", relation_label(source, rel)))
    return MetricsReport(subset=subset, ks=tuple(ks), rows=rows)


def _best_rank(ranking, golds) -> int | None:
    best = None
    for pos, (key, _score) in enumerate(ranking.items, start=1):
        if key in golds:
            best = pos
            break
    return best


def evaluate(
    model: EnrichedModel,
    ds: ProbeDataset,
    subset: str,
    repr: str = "synset",
    gloss_mode=("avg", "pre"),
    ks=None,
    candidates=None,
    jobs: int = 1,
) -> MetricsReport:
    """Masked-prediction evaluation over the subset's candidate synsets."""
    subset = _norm_subset(subset)
    ks = tuple(ks) if ks else _DEFAULT_KS[subset]
    if candidates is None:
        candidates = ds.candidates.get(subset)
    if not candidates:
        raise SensegraftError(f"no candidate set recorded for subset {subset!r}")
    instances = ds.subset(subset)

    def _one(inst: ProbeInstance):
        golds = {t for t in inst.gold_tails if t in candidates and t != inst.head}
        if not golds:
            return None
        query = render_query(inst, repr, gloss_mode)
        pred = predict_senses(model, query, candidates, exclude_head=inst.head)
        return _best_rank(pred.ranking, golds)

    best_ranks = _map(_one, instances, jobs, model.backend.concurrency_limit)
    return _aggregate(instances, best_ranks, ks, subset)


def knn_evaluate(
    table: EmbeddingTable,
    ds: ProbeDataset,
    subset: str,
    ks=None,
    candidates=None,
    jobs: int = 1,
) -> MetricsReport:
    """Relation-blind nearest-neighbor baseline over the same candidates."""
    subset = _norm_subset(subset)
    ks = tuple(ks) if ks else _DEFAULT_KS[subset]
    if candidates is None:
        candidates = ds.candidates.get(subset)
    if not candidates:
        raise SensegraftError(f"no candidate set recorded for subset {subset!r}")
    instances = ds.subset(subset)
    cand_keys = {sense_key(c) for c in candidates}
    missing = sorted(k for k in cand_keys if k not in table)
    for inst in instances:
        hk = sense_key(inst.head)
        if hk not in table:
            missing.append(hk)
    if missing:
        raise NotFoundError(f"vectors missing from table: {sorted(set(missing))[:10]}")

    def _one(inst: ProbeInstance):
        head_key = sense_key(inst.head)
        golds = {sense_key(t) for t in inst.gold_tails if t in candidates and t != inst.head}
        if not golds:
            return None
        ranking = rank_neighbors(table, table[head_key], cand_keys, exclude={head_key})
        return _best_rank(ranking, golds)

    best_ranks = _map(_one, instances, jobs, None)
    return _aggregate(instances, best_ranks, ks, subset)


def _map(fn, items, jobs, limit):
    if limit is not None:
        jobs = max(1, min(jobs, limit))
    if jobs <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


@dataclass
class AblationGrid:
    """MRR per head representation x gloss usage (Core subset)."""

    cells: dict  # (repr, gloss_combo) -> {"All": mrr, source: mrr, ...}

    def cell(self, repr: str, combo) -> dict:
        return self.cells[(repr, tuple(combo))]

    def to_tsv(self) -> str:
        lines = ["Lem\tSyn\tAvg\tPre\tWN\tWD\tCN\tALL"]
        for repr_mode in REPR_MODES:
            for combo in GLOSS_COMBOS:
                row = self.cells[(repr_mode, combo)]
                flags = [
                    "x" if repr_mode in ("lemma", "slash") else "",
                    "x" if repr_mode in ("synset", "slash") else "",
                    "x" if "avg" in combo else "",
                    "x" if "pre" in combo else "",
                ]
                vals = [
                    f"{100.0 * row.get(src, 0.0):.2f}"
                    for src in ("WordNet", "WikiData", "ConceptNet")
                ]
                vals.append(f"{100.0 * row['All']:.2f}")
                lines.append("\t".join(flags + vals))
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        return {
            f"{repr_mode}|{'+'.join(combo)}": row
            for (repr_mode, combo), row in sorted(self.cells.items())
        }


def ablation_grid(
    backend,
    table_avg: EmbeddingTable,
    table_annot: EmbeddingTable,
    ds: ProbeDataset,
    candidates=None,
    jobs: int = 1,
) -> AblationGrid:
    """12-cell MRR grid: {lemma, synset, slash} x {none, avg, pre, avg+pre}.

    Cells with 'avg' score against the gloss-averaged sense table, the rest
    against the annotation-only table; every cell sees the same instances.
    """
    models = {
        True: inject_senses(backend, table_avg),
        False: inject_senses(backend, table_annot),
    }
    cells = {}
    for repr_mode in REPR_MODES:
        for combo in GLOSS_COMBOS:
            model = models["avg" in combo]
            report = evaluate(
                model, ds, "core", repr=repr_mode, gloss_mode=combo,
                ks=(1,), candidates=candidates, jobs=jobs,
            )
            row = {"All": report.row("All").mrr}
            for source in SOURCES:
                try:
                    row[source] = report.row(source).mrr
                except NotFoundError:
                    pass
            cells[(repr_mode, combo)] = row
    return AblationGrid(cells)


# ---------------------------------------------------------------------------
# Serialization


def save_probe(ds: ProbeDataset, path) -> None:
    """Instances as JSONL plus a '<path>.manifest.json' sidecar with counts
    and candidate sets."""
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for inst in ds.instances:
            fh.write(
                json.dumps(
                    {
                        "id": inst.id,
                        "source": inst.source,
                        "relation": inst.relation,
                        "assertion": inst.assertion,
                        "head": str(inst.head),
                        "head_lemma": inst.head_lemma,
                        "gloss": inst.gloss,
                        "gold_tails": sorted(str(t) for t in inst.gold_tails),
                        "in_core": inst.in_core,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    manifest = {
        "counts": ds.counts,
        "skipped": ds.skipped,
        "candidates": {
            name: sorted(str(s) for s in ids) for name, ids in ds.candidates.items()
        },
    }
    Path(str(path) + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def load_probe(path) -> ProbeDataset:
    path = Path(path)
    instances = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                instances.append(
                    ProbeInstance(
                        id=rec["id"],
                        source=rec["source"],
                        relation=rec["relation"],
                        assertion=rec["assertion"],
                        head=SynsetId.parse(rec["head"]),
                        head_lemma=rec["head_lemma"],
                        gloss=rec["gloss"],
                        gold_tails=frozenset(SynsetId.parse(t) for t in rec["gold_tails"]),
                        in_core=bool(rec["in_core"]),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"bad probe record ({exc})", path, lineno) from None
    candidates = {}
    manifest_path = Path(str(path) + ".manifest.json")
    if manifest_path.exists():
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        candidates = {
            name: frozenset(SynsetId.parse(s) for s in ids)
            for name, ids in manifest.get("candidates", {}).items()
        }
    return ProbeDataset(instances, candidates)
