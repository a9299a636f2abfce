"""Novel grounded triple extraction by co-hyponym substitution.

ConceptNet-sourced probe assertions are re-targeted at the head's
co-hyponyms; every candidate whose filtered-softmax probability clears a
calibrated threshold (median score of correct predictions on the Full probe)
becomes a triple, minus anything already known.
"""

from __future__ import annotations

import json
import statistics
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .errors import CalibrationError, QueryError
from .lm import EnrichedModel, predict_senses, render_with_gloss
from .ontology import GroundedTriple, Ontology, SynsetId, co_hyponyms
from .probe import HEAD_SLOT, ProbeDataset, ProbeInstance, _map, render_query

# The same relation may appear under different labels across sources; the
# novelty check compares canonicalized names.
RELATION_CANON = {
    "hypernym": "IsA",
    "hypernym_instance": "IsA",
    "P31": "IsA",
    "P279": "IsA",
    "holonym_part": "PartOf",
    "P361": "PartOf",
    "holonym_member": "MemberOf",
    "P463": "MemberOf",
    "meronym_substance": "MadeOf",
    "P186": "MadeOf",
    "antonym": "OppositeOf",
    "P461": "OppositeOf",
    "P366": "UsedFor",
    "P1535": "UsedBy",
    "P2283": "Uses",
}


def canonical_relation(relation: str) -> str:
    return RELATION_CANON.get(relation, relation)


@dataclass(frozen=True)
class ExtractionQuery:
    id: str
    origin_instance: str
    head: SynsetId
    relation: str
    assertion: str  # fully rendered, one mask, contains the substitute's token


@dataclass
class ExtractedCKG:
    triples: list[GroundedTriple]
    threshold: float
    query_count: int

    def relation_counts(self) -> dict[str, int]:
        counts = Counter(t.relation for t in self.triples)
        return dict(sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])))

    def to_jsonl(self) -> str:
        lines = []
        for t in self.triples:
            query_id, _, origin = t.provenance.partition("|")
            lines.append(
                json.dumps(
                    {
                        "head": str(t.head),
                        "relation": t.relation,
                        "tail": str(t.tail),
                        "score": t.score,
                        "query_id": query_id,
                        "origin_instance": origin,
                    },
                    ensure_ascii=False,
                )
            )
        return "\n".join(lines) + ("\n" if lines else "")

    def counts_tsv(self) -> str:
        lines = ["Relation\tCount"]
        lines += [f"{rel}\t{n}" for rel, n in self.relation_counts().items()]
        return "\n".join(lines) + "\n"


def generate_queries(cn_instances, onto: Ontology) -> list[ExtractionQuery]:
    """One query per (ConceptNet instance, co-hyponym of its head), fully
    rendered with the default representation (sense token, gloss prepended),
    deduplicated by (head, relation, assertion)."""
    queries = []
    seen = set()
    for inst in sorted(cn_instances, key=lambda i: i.id):
        if inst.source != "ConceptNet":
            raise ValueError(f"{inst.id}: extraction queries come from ConceptNet instances")
        for sub in sorted(co_hyponyms(onto, inst.head), key=str):
            body = inst.assertion.replace(HEAD_SLOT, f"<WN:{sub}>")
            assertion = render_with_gloss(sub, onto.gloss(sub), body)
            dedupe = (sub, inst.relation, assertion)
            if dedupe in seen:
                continue
            seen.add(dedupe)
            queries.append(
                ExtractionQuery(
                    id=f"xq:{inst.id}:{sub}",
                    origin_instance=inst.id,
                    head=sub,
                    relation=inst.relation,
                    assertion=assertion,
                )
            )
    return queries


def calibrate_threshold(
    model: EnrichedModel,
    ds: ProbeDataset,
    repr: str = "synset",
    gloss_mode=("avg", "pre"),
    candidates=None,
    jobs: int = 1,
) -> float:
    """Median probability assigned to gold tails over the Full probe."""
    if candidates is None:
        candidates = ds.candidates.get("full")
    if not candidates:
        raise CalibrationError("no Full candidate set available")
    instances = ds.subset("full")

    def _one(inst: ProbeInstance):
        golds = {t for t in inst.gold_tails if t in candidates and t != inst.head}
        if not golds:
            return []
        query = render_query(inst, repr, gloss_mode)
        pred = predict_senses(model, query, candidates, exclude_head=inst.head)
        return [pred.probabilities[g] for g in sorted(golds) if g in pred.probabilities]

    scores = [s for chunk in _map(_one, instances, jobs, model.backend.concurrency_limit) for s in chunk]
    if not scores:
        raise CalibrationError("no correct predictions; threshold undefined")
    return float(statistics.median(scores))


def extract_ckg(
    model: EnrichedModel,
    queries,
    threshold: float,
    known,
    candidates=None,
    jobs: int = 1,
) -> ExtractedCKG:
    """Every candidate scoring >= threshold becomes a triple; known triples
    are dropped and duplicates keep the maximum score."""
    if not (0.0 < threshold <= 1.0):
        raise QueryError(f"threshold must lie in (0, 1], got {threshold}")
    if candidates is None:
        candidates = {SynsetId.parse(k[4:-1]) for k in model.sense_vocab.keys()}
    known_canon = {(h, canonical_relation(r), t) for h, r, t in known}
    queries = sorted(queries, key=lambda q: q.id)

    def _one(query: ExtractionQuery):
        pred = predict_senses(model, query.assertion, candidates, exclude_head=query.head)
        hits = []
        for key, prob in pred.ranking.items:
            if prob < threshold:
                break
            hits.append((key, prob))
        return hits

    best: dict[tuple, GroundedTriple] = {}
    for query, hits in zip(queries, _map(_one, queries, jobs, model.backend.concurrency_limit)):
        for tail, prob in hits:
            ident = (query.head, canonical_relation(query.relation), tail)
            if ident in known_canon:
                continue
            prev = best.get(ident)
            if prev is None or prob > prev.score:
                best[ident] = GroundedTriple(
                    head=query.head,
                    relation=query.relation,
                    tail=tail,
                    score=prob,
                    provenance=f"{query.id}|{query.origin_instance}",
                )
    triples = sorted(best.values(), key=lambda t: (t.relation, str(t.head), str(t.tail)))
    return ExtractedCKG(triples=triples, threshold=threshold, query_count=len(queries))


def known_from_probe(ds: ProbeDataset) -> set[tuple[SynsetId, str, SynsetId]]:
    """All (head, relation, tail) triples the probe already asserts."""
    out = set()
    for inst in ds.instances:
        for tail in inst.gold_tails:
            out.add((inst.head, inst.relation, tail))
    return out


def save_ckg(ckg: ExtractedCKG, path) -> None:
    path = Path(path)
    path.write_text(ckg.to_jsonl(), encoding="utf-8")
    Path(str(path) + ".counts.tsv").write_text(ckg.counts_tsv(), encoding="utf-8")
