"""Command-line entry point.

Every command validates its inputs up front, writes its primary result to
--out (or stdout), and drops a run manifest (inputs, hashes, seed, versions,
effective config) beside every output.  Config precedence: defaults < config
file < flags.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np
from click.core import ParameterSource

from . import __version__, kernels
from .errors import SensegraftError
from .extraction import (
    calibrate_threshold,
    extract_ckg,
    generate_queries,
    known_from_probe,
    save_ckg,
)
from .lm import FileBackend, SyntheticSpec, inject_senses, synthetic_backend
from .mapping import AnchorSet, apply_map, degradation_report, fit_linear_map, load_map, save_map
from .ontology import SynsetId, load_freq_table, load_wordnet
from .probe import (
    ProbeBuildConfig,
    ablation_grid,
    build_probe,
    evaluate,
    knn_evaluate,
    load_probe,
    save_probe,
)
from .senses import LayerWeightProfile, build_sense_table, read_annotations
from .vectors import load_table, save_table


@click.group()
@click.version_option(version=__version__)
def main():
    """Sense-vocabulary grafting, cloze probing, and triple extraction."""


def _fail(message: str) -> None:
    raise click.ClickException(message)


def _effective(ctx, config_path):
    """Apply config-file values to parameters left at their defaults."""
    cfg = {}
    if config_path:
        cfg = json.loads(Path(config_path).read_text(encoding="utf-8"))
    params = {}
    for name, value in ctx.params.items():
        if name == "config":
            continue
        if name in cfg and ctx.get_parameter_source(name) == ParameterSource.DEFAULT:
            params[name] = cfg[name]
        else:
            params[name] = value
    return params


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_path, command, params, inputs, warnings=None):
    manifest = {
        "command": command,
        "config": {k: v for k, v in sorted(params.items()) if not callable(v)},
        "inputs": {str(p): _sha256(p) for p in inputs if p and Path(p).is_file()},
        "versions": {
            "sensegraft": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
            "kernels": kernels.BACKEND,
        },
        "warnings": warnings or [],
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    Path(str(out_path) + ".run.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def _load_backend(spec: str):
    kind, _, path = spec.partition(":")
    if kind == "synthetic":
        return synthetic_backend(SyntheticSpec.from_json(path))
    if kind == "file":
        return FileBackend(path)
    _fail(f"backend must be 'synthetic:PATH' or 'file:PATH', got {spec!r}")


def _parse_gloss(text: str):
    if text in ("", "none"):
        return ()
    modes = tuple(part.strip() for part in text.split(",") if part.strip())
    for m in modes:
        if m not in ("avg", "pre"):
            _fail(f"gloss mode must be avg and/or pre, got {m!r}")
    return modes


def _parse_ks(text: str):
    if not text:
        return None
    return tuple(int(k) for k in text.split(","))


def _load_model(backend_spec: str, table_path):
    backend = _load_backend(backend_spec)
    table = load_table(table_path)
    return inject_senses(backend, table)


_jobs_option = click.option(
    "--jobs", type=int, default=os.cpu_count() or 1, show_default="cores",
    help="Worker parallelism; results are independent of this value.",
)


@main.command("build-probe")
@click.option("--wordnet", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--core-list", type=click.Path(exists=True, dir_okay=False))
@click.option("--wikidata", type=click.Path(exists=True, dir_okay=False))
@click.option("--conceptnet", type=click.Path(exists=True, dir_okay=False))
@click.option("--freq", type=click.Path(exists=True, dir_okay=False))
@click.option("--cap", type=int, default=10_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--determiners/--no-determiners", default=True, show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def cmd_build_probe(ctx, **_kw):
    """Compile the probe dataset from WordNet + linked source files."""
    p = _effective(ctx, ctx.params.get("config"))
    try:
        onto = load_wordnet(p["wordnet"], p["core_list"])
        freq = load_freq_table(p["freq"]) if p["freq"] else {}
        cfg = ProbeBuildConfig(
            default_cap=p["cap"], seed=p["seed"],
            apply_determiners=p["determiners"], freq_table=freq,
        )
        ds = build_probe(onto, p["wikidata"], p["conceptnet"], cfg)
        save_probe(ds, p["out"])
    except SensegraftError as exc:
        _fail(str(exc))
    counts = ds.counts
    click.echo(
        f"instances: core={counts['All'].get('core', 0)} full={counts['All'].get('full', 0)} "
        f"skipped={ds.skipped} core_unmapped={onto.warnings.get('core_unmapped', 0)}",
        err=True,
    )
    _write_manifest(
        p["out"], "build-probe", p,
        [p["wikidata"], p["conceptnet"], p["core_list"], p["freq"]],
        warnings=[f"skipped={ds.skipped}"],
    )


@main.command("build-senses")
@click.option("--wordnet", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--core-list", type=click.Path(exists=True, dir_okay=False))
@click.option("--annotations", type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", "backend_spec", required=True)
@click.option("--profile", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--combine", type=click.Choice(["annot_only", "gloss_only", "average"]), default="average", show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def cmd_build_senses(ctx, **_kw):
    """Build pooled-space sense embeddings from annotations and glosses."""
    p = _effective(ctx, ctx.params.get("config"))
    try:
        onto = load_wordnet(p["wordnet"], p["core_list"])
        backend = _load_backend(p["backend_spec"])
        profile = LayerWeightProfile.load(p["profile"])
        annotations = read_annotations(p["annotations"]) if p["annotations"] else []
        table = build_sense_table(onto, annotations, backend, profile, combine=p["combine"])
        fmt = "binary" if str(p["out"]).endswith(".bin") else "text"
        save_table(table, p["out"], fmt=fmt)
    except SensegraftError as exc:
        _fail(str(exc))
    click.echo(
        f"senses: {len(table)} gloss_only={len(table.meta.get('gloss_only', []))} "
        f"skipped={table.meta.get('skipped', 0)}",
        err=True,
    )
    _write_manifest(p["out"], "build-senses", p, [p["annotations"], p["profile"]])


@main.command("fit-map")
@click.option("--anchors", type=click.Path(exists=True, dir_okay=False),
              help="JSON manifest {source, target, min_count} of paired table paths.")
@click.option("--source", "source_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--target", "target_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--ridge", type=float, default=0.0, show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def cmd_fit_map(ctx, **_kw):
    """Fit the pooled-space -> input-space least-squares map."""
    p = _effective(ctx, ctx.params.get("config"))
    min_count = 0
    if p["anchors"]:
        spec = json.loads(Path(p["anchors"]).read_text(encoding="utf-8"))
        base = Path(p["anchors"]).parent
        source_path = base / spec["source"]
        target_path = base / spec["target"]
        min_count = int(spec.get("min_count", 0))
    elif p["source_path"] and p["target_path"]:
        source_path, target_path = p["source_path"], p["target_path"]
    else:
        _fail("provide --anchors or both --source and --target")
    try:
        src = load_table(source_path)
        tgt = load_table(target_path)
        keys = [k for k in src.keys() if k in tgt]
        if not keys:
            _fail("no shared keys between source and target tables")
        anchors = AnchorSet(
            keys=keys,
            source=src.rows_for(keys).astype(np.float64),
            target=tgt.rows_for(keys).astype(np.float64),
            min_count=min_count,
        )
        m = fit_linear_map(anchors, ridge_lambda=p["ridge"])
        save_map(m, p["out"])
    except SensegraftError as exc:
        _fail(str(exc))
    click.echo(
        f"anchors: {len(anchors)}  residual: {m.fit_residual:.6g}  ridge: {m.ridge_lambda}",
        err=True,
    )
    _write_manifest(p["out"], "fit-map", p, [source_path, target_path])


@main.command("inject-check")
@click.option("--backend", "backend_spec", required=True)
@click.option("--table", "table_path", required=True, type=click.Path(exists=True, dir_okay=False))
def cmd_inject_check(backend_spec, table_path):
    """Validate that a mapped sense table injects cleanly into the backend."""
    try:
        backend = _load_backend(backend_spec)
        table = load_table(table_path)
        model = inject_senses(backend, table)
    except (SensegraftError, ValueError) as exc:
        _fail(str(exc))
    base = len(backend.vocab())
    click.echo(
        f"ok: vocabulary {base} -> {base + len(table)} "
        f"(+{len(table)} sense tokens, dim {table.dim})"
    )


@main.command("evaluate")
@click.option("--probe", "probe_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--subset", type=click.Choice(["core", "full"]), default="core", show_default=True)
@click.option("--repr", "repr_mode", type=click.Choice(["lemma", "synset", "slash"]), default="synset", show_default=True)
@click.option("--gloss", default="avg,pre", show_default=True, help="Comma list of avg,pre or 'none'.")
@click.option("--backend", "backend_spec", required=True)
@click.option("--table", "table_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--ks", default="", help="Comma list of cutoffs; default per subset.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False))
@_jobs_option
@click.pass_context
def cmd_evaluate(ctx, **_kw):
    """Masked-prediction evaluation (P@k / MRR per source and relation)."""
    p = _effective(ctx, ctx.params.get("config"))
    try:
        ds = load_probe(p["probe_path"])
        model = _load_model(p["backend_spec"], p["table_path"])
        report = evaluate(
            model, ds, p["subset"], repr=p["repr_mode"],
            gloss_mode=_parse_gloss(p["gloss"]), ks=_parse_ks(p["ks"]), jobs=p["jobs"],
        )
    except SensegraftError as exc:
        _fail(str(exc))
    _emit(report.to_tsv(), p["out"])
    if p["out"]:
        Path(str(p["out"]) + ".json").write_text(
            json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        _write_manifest(p["out"], "evaluate", p, [p["probe_path"], p["table_path"]])


@main.command("knn-eval")
@click.option("--probe", "probe_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--subset", type=click.Choice(["core", "full"]), default="core", show_default=True)
@click.option("--table", "table_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--ks", default="", help="Comma list of cutoffs; default per subset.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False))
@_jobs_option
@click.pass_context
def cmd_knn_eval(ctx, **_kw):
    """Relation-blind nearest-neighbor baseline evaluation."""
    p = _effective(ctx, ctx.params.get("config"))
    try:
        ds = load_probe(p["probe_path"])
        table = load_table(p["table_path"])
        report = knn_evaluate(table, ds, p["subset"], ks=_parse_ks(p["ks"]), jobs=p["jobs"])
    except SensegraftError as exc:
        _fail(str(exc))
    _emit(report.to_tsv(), p["out"])
    if p["out"]:
        Path(str(p["out"]) + ".json").write_text(
            json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        _write_manifest(p["out"], "knn-eval", p, [p["probe_path"], p["table_path"]])


@main.command("ablate")
@click.option("--probe", "probe_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", "backend_spec", required=True)
@click.option("--table-avg", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--table-annot", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False))
@_jobs_option
@click.pass_context
def cmd_ablate(ctx, **_kw):
    """12-cell representation/gloss ablation grid (Core MRR)."""
    p = _effective(ctx, ctx.params.get("config"))
    try:
        ds = load_probe(p["probe_path"])
        backend = _load_backend(p["backend_spec"])
        grid = ablation_grid(
            backend, load_table(p["table_avg"]), load_table(p["table_annot"]), ds, jobs=p["jobs"]
        )
    except SensegraftError as exc:
        _fail(str(exc))
    _emit(grid.to_tsv(), p["out"])
    if p["out"]:
        Path(str(p["out"]) + ".json").write_text(
            json.dumps(grid.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        _write_manifest(p["out"], "ablate", p, [p["probe_path"], p["table_avg"], p["table_annot"]])


@main.command("degradation")
@click.option("--probe", "probe_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--subset", type=click.Choice(["core", "full"]), default="core", show_default=True)
@click.option("--original", "original_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--mapped", "mapped_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--map", "map_path", type=click.Path(exists=True, dir_okay=False),
              help="Apply this linear map to the original table instead of --mapped.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False))
@click.pass_context
def cmd_degradation(ctx, **_kw):
    """k-NN metrics before/after mapping, with relative deltas."""
    p = _effective(ctx, ctx.params.get("config"))
    try:
        ds = load_probe(p["probe_path"])
        original = load_table(p["original_path"])
        if p["mapped_path"]:
            mapped = load_table(p["mapped_path"])
        elif p["map_path"]:
            mapped = apply_map(load_map(p["map_path"]), original)
        else:
            _fail("provide --mapped or --map")
        pair = degradation_report(original, mapped, ds, p["subset"])
    except SensegraftError as exc:
        _fail(str(exc))
    lines = ["\tP@1\tP@10\tMRR"]
    row_o = pair.original.row("All")
    row_m = pair.mapped.row("All")
    lines.append(
        "Original\t" + "\t".join(
            [f"{100 * row_o.p_at[1]:.2f}", f"{100 * row_o.p_at[10]:.2f}", f"{100 * row_o.mrr:.2f}"]
        )
    )
    lines.append(
        "Mapped\t" + "\t".join(
            [f"{100 * row_m.p_at[1]:.2f}", f"{100 * row_m.p_at[10]:.2f}", f"{100 * row_m.mrr:.2f}"]
        )
    )
    lines.append(
        "Delta%\t" + "\t".join(
            f"{pair.deltas[m]:+.1f}" for m in ("P@1", "P@10", "MRR")
        )
    )
    _emit("\n".join(lines) + "\n", p["out"])
    if p["out"]:
        Path(str(p["out"]) + ".json").write_text(
            json.dumps(pair.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        _write_manifest(p["out"], "degradation", p, [p["probe_path"], p["original_path"], p["mapped_path"], p["map_path"]])


@main.command("calibrate")
@click.option("--probe", "probe_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", "backend_spec", required=True)
@click.option("--table", "table_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--repr", "repr_mode", type=click.Choice(["lemma", "synset", "slash"]), default="synset", show_default=True)
@click.option("--gloss", default="avg,pre", show_default=True)
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False))
@_jobs_option
@click.pass_context
def cmd_calibrate(ctx, **_kw):
    """Median gold score on the Full probe: the extraction threshold."""
    p = _effective(ctx, ctx.params.get("config"))
    try:
        ds = load_probe(p["probe_path"])
        model = _load_model(p["backend_spec"], p["table_path"])
        threshold = calibrate_threshold(
            model, ds, repr=p["repr_mode"], gloss_mode=_parse_gloss(p["gloss"]), jobs=p["jobs"]
        )
    except SensegraftError as exc:
        _fail(str(exc))
    text = json.dumps({"threshold": threshold}) + "\n"
    _emit(text, p["out"])
    if p["out"]:
        _write_manifest(p["out"], "calibrate", p, [p["probe_path"], p["table_path"]])


@main.command("extract")
@click.option("--wordnet", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--core-list", type=click.Path(exists=True, dir_okay=False))
@click.option("--probe", "probe_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", "backend_spec", required=True)
@click.option("--table", "table_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", type=float, required=True)
@click.option("--known", "known_path", type=click.Path(exists=True, dir_okay=False),
              help="Extra known triples, TSV head<TAB>relation<TAB>tail.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_jobs_option
@click.pass_context
def cmd_extract(ctx, **_kw):
    """Extract novel triples from co-hyponym queries above the threshold."""
    p = _effective(ctx, ctx.params.get("config"))
    try:
        onto = load_wordnet(p["wordnet"], p["core_list"])
        ds = load_probe(p["probe_path"])
        model = _load_model(p["backend_spec"], p["table_path"])
        cn = [i for i in ds.instances if i.source == "ConceptNet"]
        queries = generate_queries(cn, onto)
        known = known_from_probe(ds)
        if p["known_path"]:
            for line in Path(p["known_path"]).read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                h, r, t = line.split("\t")
                known.add((SynsetId.parse(h), r, SynsetId.parse(t)))
        ckg = extract_ckg(model, queries, p["threshold"], known, jobs=p["jobs"])
        save_ckg(ckg, p["out"])
    except SensegraftError as exc:
        _fail(str(exc))
    click.echo(
        f"queries: {ckg.query_count}  novel triples: {len(ckg.triples)} "
        f"over {len(ckg.relation_counts())} relations",
        err=True,
    )
    _write_manifest(p["out"], "extract", p, [p["probe_path"], p["table_path"], p["known_path"]])


@main.command("report")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--kind", type=click.Choice(["metrics", "ablation", "degradation", "ckg"]))
@click.option("--out", type=click.Path(dir_okay=False))
def cmd_report(in_path, kind, out):
    """Render a metrics/ablation/degradation/CKG file as an aligned table."""
    text = Path(in_path).read_text(encoding="utf-8")
    if kind is None:
        kind = _sniff_kind(text)
    try:
        rendered = _render_report(text, kind)
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        _fail(f"cannot render {in_path} as {kind}: {exc}")
    _emit(rendered, out)


def _sniff_kind(text: str) -> str:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        rec = json.loads(text)
        if "deltas_pct" in rec:
            return "degradation"
        if "rows" in rec:
            return "metrics"
        return "ablation"
    header = stripped.splitlines()[0] if stripped else ""
    if header.startswith("Relation\t"):
        return "ckg"
    if header.startswith("Lem\t"):
        return "ablation"
    return "metrics"


def _grid_lines(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    out = []
    for r in rows:
        out.append("  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip())
    return "\n".join(out) + "\n"


def _render_report(text: str, kind: str) -> str:
    if kind in ("ckg", "ablation") and not text.lstrip().startswith("{"):
        rows = [line.split("\t") for line in text.splitlines() if line]
        return _grid_lines(rows)
    if kind == "ablation":
        rec = json.loads(text)
        rows = [["Cell", "WN", "WD", "CN", "ALL"]]
        for name, cell in sorted(rec.items()):
            rows.append(
                [name]
                + [
                    f"{100 * cell.get(src, 0.0):.2f}"
                    for src in ("WordNet", "WikiData", "ConceptNet")
                ]
                + [f"{100 * cell['All']:.2f}"]
            )
        return _grid_lines(rows)
    if kind == "degradation":
        rec = json.loads(text)
        ks = rec["original"]["ks"]
        header = ["", *(f"P@{k}" for k in ks), "MRR"]
        rows = [header]
        for label in ("original", "mapped"):
            row_all = next(r for r in rec[label]["rows"] if r["group"] == "All")
            rows.append(
                [label.capitalize()]
                + [f"{100 * row_all['p_at'][str(k)]:.2f}" for k in ks]
                + [f"{100 * row_all['mrr']:.2f}"]
            )
        deltas = rec["deltas_pct"]
        rows.append(["Delta%"] + [f"{deltas[f'P@{k}']:+.1f}" for k in ks] + [f"{deltas['MRR']:+.1f}"])
        return _grid_lines(rows)
    # metrics
    rec = json.loads(text)
    ks = rec["ks"]
    rows = [["Group", *(f"P@{k}" for k in ks), "MRR", "N"]]
    for r in rec["rows"]:
        rows.append(
            [r["label"]]
            + [f"{100 * r['p_at'][str(k)]:.2f}" for k in ks]
            + [f"{100 * r['mrr']:.2f}", str(r["n"])]
        )
    return _grid_lines(rows)


if __name__ == "__main__":
    main()
