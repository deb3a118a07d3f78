"""Command-line entry point: segment -> classify -> review -> build -> eval -> score.

The CLI is a thin orchestrator: all logic lives in the library modules.
Exit codes: 0 success, 1 usage error, 2 validation error, 3 backend or
transport error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import config as cfgmod
from . import dataset, harness
from .classifier import ClassifierParams, cluster_tokens, detect_mirror_pairs, load_inventory, save_inventory
from .errors import BackendError, GlyphforgeError, ValidationError
from .ioutil import atomic_write_bytes, atomic_write_json
from .modelclient import make_backend
from .project import (
    corpus_from_lines,
    load_corrections,
    load_segment_record,
    project,
    segment_image,
    write_segment_record,
)
from .segmenter import SegmentationParams
from .sheet import SheetLayout

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_BACKEND = 3

CLI_CONDITIONS = {"picture": "picture", "description": "description", "placeholder": "placeholder_only", "unicode": "unicode"}


class Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> Parser:
    parser = Parser(prog="glyphforge", description="Glyph tokenization and puzzle evaluation toolkit.")
    parser.add_argument("--project", default=".", help="project directory (default: current directory)")
    parser.add_argument("--config", default=None, help="config file (.toml/.json); also GLYPHFORGE_CONFIG")
    parser.add_argument("--format", choices=("human", "json"), default="human")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=Parser)

    p = sub.add_parser("segment", help="segment line images into glyph occurrences")
    p.add_argument("images", nargs="+", help="line image PNGs")
    p.add_argument("--min-gap", type=int, default=None)
    p.add_argument("--band-top", type=float, default=None)
    p.add_argument("--band-bottom", type=float, default=None)
    p.add_argument("--no-bridge-exception", dest="bridge_exception", action="store_false", default=None)
    p.add_argument("--min-glyph-width", type=int, default=None)
    p.add_argument("--binarize", default=None, help='"otsu" or a fixed threshold 0..255')
    p.add_argument("--invert", action="store_true", default=None, help="light-on-dark sources")

    p = sub.add_parser("classify", help="cluster occurrences into token classes")
    p.add_argument("--tau", type=float, default=None, help="similarity threshold")
    p.add_argument("--side", type=int, default=None, help="normalization side in pixels")
    p.add_argument("--mirror-detect", action="store_true", default=None)

    p = sub.add_parser("review", help="serve the review UI")
    p.add_argument("--bind", default=None, help="host:port (default 127.0.0.1:8000)")

    p = sub.add_parser("build", help="assemble a prompt bundle for one condition")
    p.add_argument("puzzle", help="PuzzleDocument JSON path")
    p.add_argument("--condition", required=True, choices=sorted(CLI_CONDITIONS))
    p.add_argument("--template", default=None, help="prompt template file")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--descriptions", default=None, help="description table (.csv or .json)")

    p = sub.add_parser("pairing", help="build the description-pairing bundle")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--descriptions", default=None, help="description table (.csv or .json)")
    p.add_argument("--puzzle-id", default="description-pairing")

    p = sub.add_parser("eval", help="run bundles against a model backend")
    p.add_argument("bundles", nargs="+", help="bundle JSON paths")
    p.add_argument("--backend", default=None, help="backend name from the config registry")
    p.add_argument("--concurrency", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--retries", type=int, default=None)
    p.add_argument("--out", default=None, help="records file (default runs/records.jsonl)")

    p = sub.add_parser("score", help="aggregate records into a report")
    p.add_argument("records", help="records NDJSON path")
    p.add_argument("--report", default=None, help="write the report JSON here")
    return parser


def emit(args, human: str, payload: dict) -> None:
    if args.format == "json":
        print(json.dumps(payload, sort_keys=True, ensure_ascii=False))
    else:
        print(human)


def cmd_segment(args, cfg) -> int:
    layout = project(args.project).ensure()
    r = lambda key, cli: cfgmod.resolve(cfg, "segment", key, cli)
    params = SegmentationParams(
        min_gap_width=r("min_gap", args.min_gap),
        band_top_frac=r("band_top", args.band_top),
        band_bottom_frac=r("band_bottom", args.band_bottom),
        bridge_exception_enabled=r("bridge_exception", args.bridge_exception),
        min_glyph_width=r("min_glyph_width", args.min_glyph_width),
    )
    binarize_method = _parse_binarize(r("binarize", args.binarize))
    inverted = bool(r("invert", args.invert))
    summary = []
    for image in args.images:
        src = Path(image)
        if not src.is_file():
            raise ValidationError("missing-image", f"{src} does not exist")
        dst = layout.images / src.name
        if src.resolve() != dst.resolve():
            atomic_write_bytes(dst, src.read_bytes())
        rec = segment_image(layout, dst, params, binarize_method, inverted, corrections=load_corrections(layout, dst.stem))
        write_segment_record(layout, rec)
        summary.append({"line_id": rec.line_id, "occurrences": len(rec.occurrences), "cuts": len(rec.cuts)})
    human = "\n".join(f"{e['line_id']}: {e['occurrences']} occurrences, {e['cuts']} cuts" for e in summary)
    emit(args, human, {"lines": summary})
    return EXIT_OK


def _parse_binarize(value):
    if isinstance(value, int):
        return value
    if value == "otsu":
        return "otsu"
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ValidationError("bad-threshold", f"--binarize takes 'otsu' or an integer, got {value!r}")


def cmd_classify(args, cfg) -> int:
    layout = project(args.project)
    line_ids = layout.line_ids()
    if not line_ids:
        raise ValidationError("missing-images", f"no line images under {layout.images}; run `glyphforge segment` first")
    lines = {lid: load_segment_record(layout, lid) for lid in line_ids}
    corpus = corpus_from_lines(lines)
    if not corpus:
        raise ValidationError("empty-corpus", "segmentation found no glyphs; check images or corrections")
    r = lambda key, cli: cfgmod.resolve(cfg, "classify", key, cli)
    params = ClassifierParams(
        similarity_threshold=r("tau", args.tau),
        normalize_side=r("side", args.side),
        mirror_detection_enabled=bool(r("mirror_detect", args.mirror_detect)),
    )
    classes, _ = cluster_tokens(corpus, params)
    pairs = []
    if params.mirror_detection_enabled:
        pairs = detect_mirror_pairs(classes, params)
    save_inventory(layout.inventory, classes, params)
    human = f"{len(classes)} token classes -> {layout.inventory}"
    if params.mirror_detection_enabled:
        human += f"\n{len(pairs)} mirror pairs: {pairs}"
    emit(args, human, {"classes": len(classes), "mirror_pairs": pairs})
    return EXIT_OK


def cmd_review(args, cfg) -> int:
    from .service import serve

    bind = cfgmod.resolve(cfg, "review", "bind", args.bind)
    serve(args.project, bind=bind)
    return EXIT_OK


def _load_inventory_or_die(layout):
    if not layout.inventory.is_file():
        raise ValidationError(
            "missing-inventory", f"{layout.inventory} is missing; run `glyphforge classify` first"
        )
    return load_inventory(layout.inventory)


def _load_table(path_str: str | None, layout, puzzle_path: Path | None):
    candidates = []
    if path_str:
        candidates.append(Path(path_str))
    elif puzzle_path is not None:
        candidates.append(puzzle_path.with_suffix(".descriptions.csv"))
        candidates.append(puzzle_path.with_suffix(".descriptions.json"))
    else:
        candidates.append(layout.root / "descriptions.csv")
        candidates.append(layout.root / "descriptions.json")
    for path in candidates:
        if path.is_file():
            if path.suffix == ".csv":
                return dataset.DescriptionTable.load_csv(path)
            return dataset.DescriptionTable.load_json(path)
    return None


def cmd_build(args, cfg) -> int:
    layout = project(args.project).ensure()
    classes, assignment, _ = _load_inventory_or_die(layout)
    puzzle_path = Path(args.puzzle)
    if not puzzle_path.is_file():
        raise ValidationError("missing-puzzle", f"{puzzle_path} does not exist")
    doc = dataset.PuzzleDocument.load(puzzle_path)
    condition = CLI_CONDITIONS[args.condition]
    r = lambda key, cli: cfgmod.resolve(cfg, "build", key, cli)
    seed = r("seed", args.seed)
    template = None
    template_path = r("template", args.template)
    if template_path:
        template = Path(template_path).read_text(encoding="utf-8")
    table = _load_table(r("descriptions", args.descriptions), layout, puzzle_path)
    layout_px = SheetLayout(columns=r("columns", None), cell_px=r("cell_px", None), label_px=r("label_px", None))
    bundle = dataset.build_prompt_bundle(
        doc, classes, assignment, condition, table=table, template=template, seed=seed, layout=layout_px
    )
    out = layout.runs / "bundles" / f"{doc.puzzle_id}.{condition}.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    written = dataset.save_bundle(bundle, out)
    emit(
        args,
        "\n".join(f"wrote {p}" for p in written),
        {"bundle": str(out), "build_hash": bundle.metadata.build_hash},
    )
    return EXIT_OK


def cmd_pairing(args, cfg) -> int:
    layout = project(args.project).ensure()
    classes, _, _ = _load_inventory_or_die(layout)
    table = _load_table(cfgmod.resolve(cfg, "build", "descriptions", args.descriptions), layout, None)
    if table is None:
        raise ValidationError(
            "missing-descriptions", "no description table found; pass --descriptions or add descriptions.csv"
        )
    seed = cfgmod.resolve(cfg, "build", "seed", args.seed)
    task = harness.make_pairing_task(classes, table, seed=seed)
    bundle = harness.pairing_bundle(task, puzzle_id=args.puzzle_id)
    out = layout.runs / "bundles" / f"{args.puzzle_id}.picture.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    written = dataset.save_bundle(bundle, out)
    emit(args, "\n".join(f"wrote {p}" for p in written), {"bundle": str(out), "items": len(task.items)})
    return EXIT_OK


def cmd_eval(args, cfg) -> int:
    layout = project(args.project).ensure()
    r = lambda key, cli: cfgmod.resolve(cfg, "eval", key, cli)
    backend_name = r("backend", args.backend)
    registry = {**cfgmod.DEFAULTS["backends"], **cfg.get("backends", {})}
    if backend_name not in registry:
        raise ValidationError("unknown-backend", f"backend {backend_name!r} is not in the config registry")
    client = make_backend(registry[backend_name])
    run_cfg = harness.RunConfig(
        backend=backend_name,
        concurrency=int(r("concurrency", args.concurrency)),
        retries=int(r("retries", args.retries)),
        backoff_s=float(r("backoff", None)),
        timeout_s=float(r("timeout", None)),
        seed=int(r("seed", args.seed)),
    )
    bundles = []
    for path in args.bundles:
        if not Path(path).is_file():
            raise ValidationError("missing-bundle", f"{path} does not exist; run `glyphforge build` first")
        bundles.append(dataset.load_bundle(path))
    records = harness.run_bundles(bundles, client, run_cfg)
    out = Path(r("out", args.out) or (layout.runs / "records.jsonl"))
    harness.write_records(out, records)
    n_failed = sum(1 for rec in records if rec.failed)
    emit(
        args,
        f"wrote {len(records)} records ({n_failed} failed) -> {out}",
        {"records": len(records), "failed": n_failed, "out": str(out)},
    )
    if records and n_failed == len(records):
        raise BackendError("transport", f"all {n_failed} requests failed; backend {backend_name!r} unreachable")
    return EXIT_OK


def cmd_score(args, cfg) -> int:
    records_path = Path(args.records)
    if not records_path.is_file():
        raise ValidationError("missing-records", f"{records_path} does not exist; run `glyphforge eval` first")
    records = harness.read_records(records_path)
    report = harness.aggregate_report(records)
    if args.report:
        report.save(args.report)
    emit(args, report.render_table().rstrip("\n"), report.to_dict())
    return EXIT_OK


COMMANDS = {
    "segment": cmd_segment,
    "classify": cmd_classify,
    "review": cmd_review,
    "build": cmd_build,
    "pairing": cmd_pairing,
    "eval": cmd_eval,
    "score": cmd_score,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = cfgmod.load_config(args.config)
        return COMMANDS[args.command](args, cfg)
    except BackendError as exc:
        print(f"backend error: {exc.message}", file=sys.stderr)
        return EXIT_BACKEND
    except ValidationError as exc:
        print(f"error: {exc.message}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except GlyphforgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
