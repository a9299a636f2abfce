import json
import random

import numpy as np
import pytest

from oracles import brute_cosine_order, brute_metrics
from probefix import (
    basis_table,
    candidate_ids,
    make_instance,
    plant_rankings,
    planted_dataset,
)

from sensegraft.errors import NotFoundError, ParseError, QueryError
from sensegraft.lm import SyntheticBackend, SyntheticSpec, inject_senses
from sensegraft.ontology import SynsetId
from sensegraft.probe import (
    HEAD_SLOT,
    ProbeBuildConfig,
    ablation_grid,
    build_probe,
    evaluate,
    knn_evaluate,
    learn_determiners,
    load_probe,
    render_query,
    save_probe,
)
from sensegraft.senses import sense_key
from sensegraft.vectors import EmbeddingTable

S = SynsetId.parse


def cn_record(sentence, head_word, head_sid, tail_word, tail_sid, relation):
    hs = sentence.index(head_word)
    ts = sentence.index(tail_word)
    return {
        "sentence": sentence,
        "head_span": [hs, hs + len(head_word)],
        "head_synset": head_sid,
        "tail_span": [ts, ts + len(tail_word)],
        "tail_synset": tail_sid,
        "relation": relation,
    }


@pytest.fixture(scope="module")
def source_files(tmp_path_factory, mini_wn):
    root = tmp_path_factory.mktemp("probe_sources")
    ids = mini_wn.ids
    cn = [
        cn_record("You are likely to find a dog in a pack .", "dog", ids["dog"], "pack", ids["pack"], "AtLocation"),
        cn_record("A dog is a kind of animal .", "dog", ids["dog"], "animal", ids["animal"], "IsA"),
        cn_record("A wolf lives in a pack .", "wolf", ids["wolf"], "pack", ids["pack"], "AtLocation"),
        cn_record("A tail is part of a dog .", "tail", ids["tail"], "dog", ids["dog"], "PartOf"),
        cn_record("The cat is an animal .", "cat", ids["cat"], "animal", ids["animal"], "IsA"),
        cn_record("In a pack lives a wolf .", "wolf", ids["wolf"], "pack", ids["pack"], "AtLocation"),
        cn_record("A dog sleeps in a fur .", "dog", ids["dog"], "fur", ids["fur"], "AtLocation"),
    ]
    cn_path = root / "conceptnet.jsonl"
    cn_path.write_text("".join(json.dumps(r) + "\n" for r in cn), encoding="utf-8")
    wd_rows = [
        f"{ids['medicine']}\tP31\t{ids['drug']}",
        f"{ids['fur']}\tP361\t{ids['dog']}",
        f"nosuch.n.01\tP31\t{ids['drug']}",  # unresolvable: skipped, counted
    ]
    wd_path = root / "wikidata.tsv"
    wd_path.write_text("\n".join(wd_rows) + "\n", encoding="utf-8")
    return {"cn": cn_path, "wd": wd_path, "cn_records": cn}


@pytest.fixture(scope="module")
def built(mini_onto, source_files):
    cfg = ProbeBuildConfig(core_min_instances=2, seed=0)
    return build_probe(mini_onto, source_files["wd"], source_files["cn"], cfg)


class TestLearnDeterminers:
    def test_mode_wins(self, source_files):
        dets = learn_determiners(
            [
                {"sentence": s, "head_span": r["head_span"], "tail_span": r["tail_span"]}
                for r in source_files["cn_records"]
                for s in [r["sentence"]]
            ]
        )
        assert dets["dog"] == "a"  # a, A, a, a -> "a"
        assert dets["wolf"] == "a"
        assert dets["cat"] == "the"

    def test_no_determiner_is_empty(self):
        recs = [{"sentence": "dogs chase cats .", "head_span": [0, 4], "tail_span": [11, 15]}]
        dets = learn_determiners(recs)
        assert dets["dogs"] == "" and dets["cats"] == ""

    def test_tie_breaks_lexicographically(self):
        recs = [
            {"sentence": "a pen writes .", "head_span": [2, 5], "tail_span": [6, 12]},
            {"sentence": "the pen writes .", "head_span": [4, 7], "tail_span": [8, 14]},
        ]
        assert learn_determiners(recs)["pen"] == "a"  # "a" < "the" on a 1-1 tie

    def test_empty_corpus(self):
        assert learn_determiners([]) == {}


class TestBuildProbe:
    def test_counts(self, built, mini_onto):
        counts = built.counts
        # WordNet: 6 hypernym + 1 member + 1 part + 2 antonym + 1 substance
        assert counts["groups"]["WordNet/hypernym"]["full"] == 6
        assert counts["groups"]["WordNet/antonym"]["full"] == 2
        assert counts["groups"]["WikiData/P31"]["full"] == 1
        assert counts["groups"]["ConceptNet/AtLocation"]["full"] == 4
        assert counts["All"]["full"] == 11 + 2 + 7
        assert built.skipped == 1  # the unresolvable WikiData row

    def test_core_rule_at_boundary(self, mini_onto, source_files):
        # hypernym has 4 core-core triples; a threshold above that discards it
        ds_lo = build_probe(mini_onto, None, None, ProbeBuildConfig(core_min_instances=4))
        assert ds_lo.counts["groups"]["WordNet/hypernym"].get("core", 0) == 4
        ds_hi = build_probe(mini_onto, None, None, ProbeBuildConfig(core_min_instances=5))
        assert ds_hi.counts["groups"]["WordNet/hypernym"].get("core", 0) == 0

    def test_template_fill_matches_published_example(self, built, mini_wn):
        inst = next(
            i for i in built.instances
            if i.source == "WordNet" and i.relation == "hypernym" and str(i.head) == mini_wn.ids["medicine"]
        )
        assert inst.assertion == f"{HEAD_SLOT} is a type of [MASK]"
        assert render_query(inst, "lemma", ()) == "medicine is a type of [MASK]"

    def test_determiner_augmentation_on_templates(self, built, mini_wn):
        inst = next(
            i for i in built.instances
            if i.source == "WordNet" and i.relation == "hypernym" and str(i.head) == mini_wn.ids["dog"]
        )
        # "dog" learned determiner "a"; "animal" learned none
        assert inst.assertion == f"a {HEAD_SLOT} is a type of [MASK]"

    def test_conceptnet_assertions_verbatim_with_slots(self, built, mini_wn):
        at = [i for i in built.instances if i.relation == "AtLocation" and i.head_lemma == "dog"]
        assert any(i.assertion == f"You are likely to find a {HEAD_SLOT} in a [MASK] ." for i in at)
        rev = next(i for i in built.instances if i.assertion.startswith("In a"))
        assert rev.assertion == f"In a [MASK] lives a {HEAD_SLOT} ."

    def test_gold_merging_within_source_relation_head(self, built, mini_wn):
        dog_at = [i for i in built.instances if i.relation == "AtLocation" and i.head_lemma == "dog"]
        assert len(dog_at) == 2  # one instance per triple/sentence
        for inst in dog_at:
            assert {str(t) for t in inst.gold_tails} == {mini_wn.ids["pack"], mini_wn.ids["fur"]}

    def test_gold_never_contains_head(self, built):
        for inst in built.instances:
            assert inst.head not in inst.gold_tails

    def test_candidates_recorded(self, built, mini_onto):
        assert built.candidates["full"] == mini_onto.full_set
        assert built.candidates["core"] == mini_onto.core_set

    def test_deterministic_rebuild(self, mini_onto, source_files):
        cfg = ProbeBuildConfig(core_min_instances=2, seed=0)
        a = build_probe(mini_onto, source_files["wd"], source_files["cn"], cfg)
        b = build_probe(mini_onto, source_files["wd"], source_files["cn"], cfg)
        assert a.instances == b.instances

    def test_malformed_conceptnet_raises(self, mini_onto, tmp_path):
        bad = tmp_path / "cn.jsonl"
        bad.write_text('{"sentence": "x", "head_span": [0, 1]}\n')
        with pytest.raises(ParseError):
            build_probe(mini_onto, None, bad, ProbeBuildConfig())

    def test_unknown_wikidata_relation_raises(self, mini_onto, tmp_path, mini_wn):
        bad = tmp_path / "wd.tsv"
        bad.write_text(f"{mini_wn.ids['dog']}\tP9999\t{mini_wn.ids['animal']}\n")
        with pytest.raises(NotFoundError, match="template"):
            build_probe(mini_onto, bad, None, ProbeBuildConfig())


class TestRenderQuery:
    @pytest.fixture
    def inst(self):
        return make_instance(
            0, S("pen.n.01"), [S("ink.n.01")],
            assertion=f"a {HEAD_SLOT} is a kind of [MASK] .",
        )

    def test_synset_with_gloss_prepend(self, inst):
        got = render_query(inst, "synset", ("avg", "pre"))
        assert got == (
            "<WN:pen.n.01> can be defined as : fixture gloss for pen.n.01 . [SEP] "
            "a <WN:pen.n.01> is a kind of [MASK] ."
        )

    def test_slash(self, inst):
        got = render_query(inst, "slash", ())
        assert "pen / <WN:pen.n.01>" in got
        assert got.count("[MASK]") == 1

    def test_lemma_has_no_sense_tokens(self, inst):
        got = render_query(inst, "lemma", ())
        assert "<WN:" not in got and got.count("[MASK]") == 1

    def test_avg_alone_does_not_change_text(self, inst):
        assert render_query(inst, "synset", ("avg",)) == render_query(inst, "synset", ())

    def test_lemma_requires_head_lemma(self):
        inst = make_instance(1, S("pen.n.01"), [S("ink.n.01")])
        object.__setattr__(inst, "head_lemma", "")
        with pytest.raises(QueryError):
            render_query(inst, "lemma", ())
        with pytest.raises(ValueError):
            render_query(inst, "bogus", ())


class TestEvaluate:
    def test_all_rank_one_gives_perfect_report(self):
        cands = candidate_ids(20)
        table = basis_table(cands)
        instances, orderings = [], []
        for i in range(8):
            head = cands[i]
            gold = cands[(i + 1) % 20]
            instances.append(make_instance(i, head, [gold]))
            orderings.append([gold])
        ds = planted_dataset(instances, cands)
        model = plant_rankings(table, instances, orderings)
        report = evaluate(model, ds, "core")
        for row in report.rows:
            assert row.p_at[1] == 1.0 and row.mrr == 1.0

    def test_matches_brute_force_oracle(self):
        rng = random.Random(99)
        cands = candidate_ids(30)
        table = basis_table(cands)
        instances, orderings, gold_sets = [], [], []
        relations = ["IsA", "PartOf", "UsedFor"]
        sources = ["ConceptNet", "WordNet", "WikiData"]
        for i in range(20):
            head = cands[rng.randrange(30)]
            others = [c for c in cands if c != head]
            order = rng.sample(others, len(others))
            golds = set(rng.sample(others, rng.randint(1, 4)))
            instances.append(
                make_instance(i, head, golds, source=sources[i % 3], relation=relations[i % 3])
            )
            orderings.append(order)
            gold_sets.append(golds)
        ds = planted_dataset(instances, cands)
        model = plant_rankings(table, instances, orderings)
        ks = (1, 3, 10)
        report = evaluate(model, ds, "core", ks=ks)
        oracle = brute_metrics(gold_sets, orderings, ks)
        row = report.row("All")
        assert row.n == oracle["n"]
        for k in ks:
            assert row.p_at[k] == pytest.approx(oracle["p_at"][k], abs=1e-12)
        assert row.mrr == pytest.approx(oracle["mrr"], abs=1e-12)
        # per-group rows against a filtered oracle
        for gi, source in enumerate(sources):
            sub = [j for j, inst in enumerate(instances) if inst.source == source]
            oracle_g = brute_metrics([gold_sets[j] for j in sub], [orderings[j] for j in sub], ks)
            row_g = report.row(source)
            assert row_g.mrr == pytest.approx(oracle_g["mrr"], abs=1e-12)

    def test_pk_monotone_in_k(self):
        rng = random.Random(5)
        cands = candidate_ids(25)
        table = basis_table(cands)
        instances, orderings = [], []
        for i in range(12):
            head = cands[rng.randrange(25)]
            others = [c for c in cands if c != head]
            instances.append(make_instance(i, head, set(rng.sample(others, 2))))
            orderings.append(rng.sample(others, len(others)))
        ds = planted_dataset(instances, cands)
        model = plant_rankings(table, instances, orderings)
        report = evaluate(model, ds, "core", ks=(1, 3, 10, 100))
        for row in report.rows:
            vals = [row.p_at[k] for k in (1, 3, 10, 100)]
            assert vals == sorted(vals)
            assert row.p_at[1] <= row.mrr <= 1.0

    def test_order_independence_byte_identical(self):
        rng = random.Random(7)
        cands = candidate_ids(15)
        table = basis_table(cands)
        instances, orderings = [], []
        for i in range(10):
            head = cands[rng.randrange(15)]
            others = [c for c in cands if c != head]
            instances.append(make_instance(i, head, {others[0]}))
            orderings.append(rng.sample(others, len(others)))
        ds = planted_dataset(instances, cands)
        model = plant_rankings(table, instances, orderings)
        base = evaluate(model, ds, "core").to_tsv()
        shuffled = list(zip(instances, orderings))
        rng.shuffle(shuffled)
        ds2 = planted_dataset([i for i, _ in shuffled], cands)
        assert evaluate(model, ds2, "core").to_tsv() == base

    def test_jobs_do_not_change_results(self):
        cands = candidate_ids(10)
        table = basis_table(cands)
        instances = [make_instance(i, cands[i], [cands[i + 1]]) for i in range(5)]
        orderings = [[cands[i + 1]] for i in range(5)]
        ds = planted_dataset(instances, cands)
        model = plant_rankings(table, instances, orderings)
        assert evaluate(model, ds, "core", jobs=4).to_tsv() == evaluate(model, ds, "core", jobs=1).to_tsv()

    def test_gold_outside_candidates_counted_excluded(self):
        cands = candidate_ids(5)
        stray = S("stray.n.01")
        table = basis_table(cands)
        instances = [
            make_instance(0, cands[0], [cands[1]]),
            make_instance(1, cands[2], [stray]),  # gold not in candidate set
        ]
        ds = planted_dataset(instances, cands)
        model = plant_rankings(table, instances[:1], [[cands[1]]])
        report = evaluate(model, ds, "core")
        row = report.row("All")
        assert row.n == 1 and row.n_excluded == 1
        assert row.p_at[1] == 1.0


class TestKnnEvaluate:
    def test_head_equal_to_gold_vector_wins(self):
        cands = candidate_ids(6)
        table = EmbeddingTable("s", 6, order="sorted")
        basis = np.eye(6)
        # head vector == its gold's vector; everything else orthogonal
        for i, sid in enumerate(sorted(cands, key=str)):
            table.add(sense_key(sid), basis[i // 2])
        instances = [make_instance(0, cands[0], [cands[1]])]
        ds = planted_dataset(instances, cands)
        report = knn_evaluate(table, ds, "core")
        assert report.row("All").p_at[1] == 1.0

    def test_matches_cosine_plus_metric_oracle(self):
        rng = np.random.default_rng(13)
        cands = candidate_ids(12)
        vectors = {sense_key(c): rng.standard_normal(7) for c in cands}
        table = EmbeddingTable("s", 7, order="sorted")
        for k in sorted(vectors):
            table.add(k, vectors[k])
        pyrandom = random.Random(3)
        instances, gold_sets, rankings = [], [], []
        for i in range(10):
            head = cands[pyrandom.randrange(12)]
            others = [c for c in cands if c != head]
            golds = set(pyrandom.sample(others, pyrandom.randint(1, 3)))
            instances.append(make_instance(i, head, golds))
            order = brute_cosine_order(vectors, vectors[sense_key(head)], exclude={sense_key(head)})
            rankings.append([S(k[4:-1]) for k in order])
            gold_sets.append(golds)
        ds = planted_dataset(instances, cands)
        ks = (1, 3, 10)
        report = knn_evaluate(table, ds, "core", ks=ks)
        oracle = brute_metrics(gold_sets, rankings, ks)
        row = report.row("All")
        for k in ks:
            assert row.p_at[k] == pytest.approx(oracle["p_at"][k], abs=1e-12)
        assert row.mrr == pytest.approx(oracle["mrr"], abs=1e-12)

    def test_missing_vectors_listed(self):
        cands = candidate_ids(3)
        table = basis_table(cands[:2])
        ds = planted_dataset([make_instance(0, cands[0], [cands[1]])], cands)
        with pytest.raises(NotFoundError, match="c0002"):
            knn_evaluate(table, ds, "core")


class TestAblationGrid:
    def test_text_insensitive_backend_gives_equal_cells(self):
        cands = candidate_ids(8)
        table = basis_table(cands)
        instances = [make_instance(i, cands[i], [cands[i + 1]]) for i in range(4)]
        ds = planted_dataset(instances, cands)
        backend = SyntheticBackend(SyntheticSpec(vocab=[], dim=8, layers=1))
        fixed = np.linspace(0.1, 0.9, 8)
        backend.spec.mask_rule = lambda text: fixed
        grid = ablation_grid(backend, table, table, ds)
        values = {tuple(sorted(row.items())) for row in grid.cells.values()}
        assert len(values) == 1

    def test_gloss_prepend_sensitive_backend_orders_pre_above_nonpre(self):
        cands = candidate_ids(10)
        table = basis_table(cands)
        instances, gold_of = [], {}
        for i in range(5):
            head, gold = cands[i], cands[i + 5]
            instances.append(make_instance(i, head, [gold]))
            gold_of[str(head)] = gold
        ds = planted_dataset(instances, cands)
        backend = SyntheticBackend(SyntheticSpec(vocab=[], dim=10, layers=1))
        noise = np.full(10, 1e-3)

        def mask_rule(text):
            # reward only gloss-prepended queries: "<WN:head> can be defined as : ..."
            if text.startswith("<WN:") and " can be defined as : " in text:
                head = text[4 : text.index(">")]
                return np.asarray(table[sense_key(gold_of[head])], dtype=float)
            return noise

        backend.spec.mask_rule = mask_rule
        grid = ablation_grid(backend, table, table, ds)
        for repr_mode in ("lemma", "synset", "slash"):
            for pre_combo, plain_combo in ((("pre",), ()), (("avg", "pre"), ("avg",))):
                pre = grid.cell(repr_mode, pre_combo)["All"]
                plain = grid.cell(repr_mode, plain_combo)["All"]
                assert pre > plain

    def test_cell_lookup(self):
        cands = candidate_ids(4)
        table = basis_table(cands)
        instances = [make_instance(0, cands[0], [cands[1]])]
        ds = planted_dataset(instances, cands)
        backend = SyntheticBackend(SyntheticSpec(vocab=[], dim=4, layers=1))
        backend.spec.mask_rule = lambda text: np.ones(4)
        grid = ablation_grid(backend, table, table, ds)
        assert len(grid.cells) == 12
        tsv = grid.to_tsv()
        assert tsv.splitlines()[0] == "Lem\tSyn\tAvg\tPre\tWN\tWD\tCN\tALL"
        assert len(tsv.splitlines()) == 13


class TestSerialization:
    def test_round_trip(self, built, tmp_path):
        path = tmp_path / "probe.jsonl"
        save_probe(built, path)
        back = load_probe(path)
        assert back.instances == built.instances
        assert back.candidates == built.candidates

    def test_counts_survive(self, built, tmp_path):
        path = tmp_path / "probe.jsonl"
        save_probe(built, path)
        manifest = json.loads((tmp_path / "probe.jsonl.manifest.json").read_text())
        assert manifest["counts"] == json.loads(json.dumps(built.counts))

    def test_bad_record_reports_line(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "x"}\n')
        with pytest.raises(ParseError):
            load_probe(path)

    def test_report_tsv_shape(self):
        cands = candidate_ids(6)
        table = basis_table(cands)
        instances = [make_instance(0, cands[0], [cands[1]])]
        ds = planted_dataset(instances, cands)
        model = plant_rankings(table, instances, [[cands[1]]])
        report = evaluate(model, ds, "core", ks=(1, 10))
        lines = report.to_tsv().splitlines()
        assert lines[0] == "Group\tP@1\tP@10\tMRR\tN\tExcluded"
        assert lines[1].startswith("All\t100.00\t100.00\t100.00")
