"""Command-line entry point.

Exit codes: 0 success, 2 usage or input error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from collections.abc import Sequence
from pathlib import Path

from . import __version__
from .annotations import (
    HUMAN_VERIFIED,
    DatasetBundle,
    Modality,
    dataset_precision_recall,
    filter_invalid,
    load_bundle,
    merge_positive_sources,
    verified_universe,
)
from .correlation import correlation_matrix, kendall_tau_b, load_score_table
from .errors import InputError, NumericError
from .metrics import evaluate, load_class_vectors, parse_metric_specs
from .mitl import (
    NegativeSource,
    bias_curve,
    bias_quantity,
    hits_to_json,
    load_subset_scores,
    package_hits,
    pool_candidates,
    subset_key,
    top_pairs,
)
from .preference import fit_bradley_terry, load_preferences
from .ranking import load_similarity, rank_indices

log = logging.getLogger("xmreval")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NUMERIC = 3

DEFAULT_METRICS = "map_at_r,r_precision,recall@1"


class UsageError(Exception):
    pass


def fmt(value: float, precision: int) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "NA"
    text = f"{value:.{precision}f}"
    if text.startswith("-") and float(text) == 0.0:
        text = text[1:]
    return text


def _write_csv(rows: Sequence[Sequence], path: str | None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    text = buf.getvalue()
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
    return text


def _require_file(path: str | None, flag: str) -> None:
    if path is not None and not Path(path).is_file():
        raise InputError(f"{flag}: file not found", path=path)


def _split(text: str | None) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()] if text else []


def _load_bundle_for(args) -> DatasetBundle:
    bundle = load_bundle(args.bundle)
    if getattr(args, "apply_invalid", False):
        bundle = filter_invalid(bundle, bundle.invalid_captions, bundle.invalid_images)
    if getattr(args, "invalid_list", None):
        path = args.invalid_list
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InputError(f"invalid JSON: {exc.msg}", path=path, line=exc.lineno) from None
        captions = [c for group in ("invalid_captions", "meaningless_captions", "wrong_captions") for c in doc.get(group, [])]
        bundle = filter_invalid(bundle, captions, doc.get("invalid_images", []))
    if bundle.filter_report is not None:
        r = bundle.filter_report
        log.info("filtered %d records touching %d invalid ids (%d unknown ids)", r.records_removed, r.ids_removed, r.unknown_ids)
    return bundle


def _sources(args, bundle: DatasetBundle) -> list[str]:
    return _split(args.sources) or sorted(bundle.sources)


# --- subcommands -------------------------------------------------------------


def cmd_evaluate(args) -> int:
    for path, flag in ((args.bundle, "--bundle"), (args.sims_i2t, "--sims-i2t"),
                       (args.sims_t2i, "--sims-t2i"), (args.classes, "--classes")):
        _require_file(path, flag)
    if args.sims_i2t is None and args.sims_t2i is None:
        raise UsageError("give --sims-i2t and/or --sims-t2i")
    try:
        specs = parse_metric_specs(_split(args.metrics))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not specs:
        raise UsageError("--metrics is empty")
    needs_gt = any(s.kind != "pmrp" for s in specs)
    if needs_gt and args.bundle is None:
        raise UsageError("--bundle is required for ground-truth metrics")
    if any(s.kind == "pmrp" for s in specs) and args.classes is None:
        raise UsageError("pmrp needs --classes")

    gts = {Modality.IMAGE: None, Modality.TEXT: None}
    if args.bundle is not None:
        bundle = _load_bundle_for(args)
        sources = _sources(args, bundle)
        for m in Modality:
            gts[m] = merge_positive_sources(bundle, sources, m)
    sims_i2t = load_similarity(args.sims_i2t) if args.sims_i2t else None
    sims_t2i = load_similarity(args.sims_t2i) if args.sims_t2i else None
    classes = load_class_vectors(args.classes) if args.classes else None

    result = evaluate(sims_i2t, sims_t2i, gts[Modality.IMAGE], gts[Modality.TEXT], specs,
                      classes=classes, zeta=args.zeta, cap=args.pmrp_cap)
    p = args.precision
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    summary = [["direction", "metric", "value", "n_used", "n_degenerate"]]
    for key, report in (("i2t", result.i2t), ("t2i", result.t2i)):
        if report is None:
            continue
        for s in specs:
            summary.append([key, s.name, fmt(report.averaged[s.name], p),
                            report.n_used[s.name], report.n_degenerate[s.name]])
        rows = [["query", *[s.name for s in specs]]]
        for q in sorted(report.per_query):
            rows.append([q, *[fmt(report.per_query[q][s.name], p) for s in specs]])
        _write_csv(rows, str(out / f"{key}_per_query.csv"))
    for s in specs:
        if s.name in result.bidirectional:
            summary.append(["bidirectional", s.name, fmt(result.bidirectional[s.name], p), "", ""])
    text = _write_csv(summary, str(out / "summary.csv"))
    sys.stdout.write(text)
    return EXIT_OK


def cmd_correlate(args) -> int:
    _require_file(args.table, "table")
    table = load_score_table(args.table)
    if args.columns:
        cols = _split(args.columns)
        unknown = [c for c in cols if c not in table.cols]
        if unknown:
            raise UsageError(f"unknown column(s): {', '.join(unknown)}")
        table = table.select(cols)
    if args.pair:
        a, b = args.pair
        for c in (a, b):
            if c not in table.cols:
                raise UsageError(f"unknown column {c!r}")
        tau = kendall_tau_b(list(table.column(a).values()), list(table.column(b).values()))
        if math.isnan(tau):
            raise NumericError(f"tau-b undefined for {a!r} vs {b!r} (constant column)")
        print(fmt(tau, args.precision))
        return EXIT_OK
    if len(table.cols) == 1:
        rows = [["metric", table.cols[0]], [table.cols[0], fmt(1.0, args.precision)]]
    else:
        cm = correlation_matrix(table)
        rows = [["metric", *cm.labels]]
        for i, label in enumerate(cm.labels):
            rows.append([label, *[fmt(v, args.precision) for v in cm.values[i]]])
    _write_csv(rows, args.output)
    return EXIT_OK


def cmd_bt_fit(args) -> int:
    _require_file(args.preferences, "preferences")
    prefs = load_preferences(args.preferences)
    fit = fit_bradley_terry(prefs, tol=args.tol, max_iter=args.max_iter)
    rows = [["option", "score", "raw_mle"]]
    for label, score, raw in zip(fit.labels, fit.scores, fit.raw_mle):
        rows.append([label, fmt(score, args.precision), fmt(raw, max(args.precision, 8))])
    _write_csv(rows, args.output)
    return EXIT_OK


def cmd_bias(args) -> int:
    by_theta, all_scores = load_subset_scores(args.scores_dir, args.metric)
    theta = subset_key(args.theta)
    report = bias_quantity(by_theta, all_scores, theta)
    p = args.precision
    rows = [["theta", "b_theta", "self_bias", "non_self_bias"],
            ["+".join(sorted(theta)), fmt(report.b_theta, p), fmt(report.self_bias, p), fmt(report.non_self_bias, p)]]
    _write_csv(rows, args.output)
    return EXIT_OK


def cmd_bias_curve(args) -> int:
    by_theta, all_scores = load_subset_scores(args.scores_dir, args.metric)
    n = len(all_scores)
    if args.sizes:
        try:
            sizes = [int(s) for s in _split(args.sizes)]
        except ValueError:
            raise UsageError(f"--sizes must be integers, got {args.sizes!r}") from None
    else:
        # sizes with at least one subset file, plus the full set
        sizes = sorted({len(t) for t in by_theta} | {n})
    p = args.precision
    rows = [["subset_size", "b_theta", "self_bias", "non_self_bias", "n_subsets"]]
    for size in sizes:
        pt = bias_curve(by_theta, all_scores, size)
        rows.append([size, fmt(pt.b_theta, p), fmt(pt.self_bias, p), fmt(pt.non_self_bias, p), pt.n_subsets])
    _write_csv(rows, args.output)
    return EXIT_OK


def _parse_rankings(specs: Sequence[str], depth: int | None = None):
    rankings = {}
    universes = ([], [])
    for spec in specs:
        name, sep, path = spec.partition("=")
        if not sep or not name or not path:
            raise UsageError(f"--ranking expects NAME=PATH, got {spec!r}")
        if name in rankings:
            raise UsageError(f"duplicate annotator {name!r}")
        _require_file(path, "--ranking")
        sims = load_similarity(path)
        order = rank_indices(sims.scores, sims.id_order)
        if depth is not None:
            order = order[:, :depth]
        rankings[name] = {q: tuple(sims.gallery[i] for i in row) for q, row in zip(sims.queries, order)}
        universes[0].extend(sims.queries)
        universes[1].extend(sims.gallery)
    return rankings, sorted(set(universes[0])), sorted(set(universes[1]))


def cmd_pool(args) -> int:
    rankings, _, _ = _parse_rankings(args.ranking, depth=args.k)
    pool = pool_candidates(rankings, k=args.k)
    rows = [["query", "candidate", "proposers"]]
    for q, c in sorted(pool.pairs):
        rows.append([q, c, "+".join(sorted(pool.proposers[(q, c)]))])
    _write_csv(rows, args.output)
    print(f"raw_count={pool.raw_count} unique={len(pool.pairs)} duplicates={pool.n_duplicates}", file=sys.stderr)
    return EXIT_OK


def _read_pairs(path: str) -> list[tuple[str, str]]:
    _require_file(path, "pairs file")
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:2] != ["query", "candidate"]:
            raise InputError("expected header starting with query,candidate", path=path, line=1)
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) < 2 or not row[0] or not row[1]:
                raise InputError("expected query,candidate", path=path, line=line)
            out.append((row[0], row[1]))
    return out


def cmd_package_hits(args) -> int:
    from .mitl import CandidatePool

    pairs = _read_pairs(args.pool)
    pool = CandidatePool(frozenset(pairs), {}, len(pairs), {p: frozenset() for p in pairs})
    golden = _read_pairs(args.golden_positives)
    rankings, queries, gallery = _parse_rankings(args.ranking, depth=args.exclusion_depth)
    gt = None
    if args.bundle:
        _require_file(args.bundle, "--bundle")
        bundle = _load_bundle_for(args)
        gt = merge_positive_sources(bundle, _sources(args, bundle), Modality(args.direction))
    source = NegativeSource(queries, gallery, top_pairs(rankings, args.exclusion_depth), gt)
    plan = package_hits(pool, golden, source, seed=args.seed)
    text = hits_to_json(plan)
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text, encoding="utf-8")
    print(f"hits={len(plan.hits)} pairs={plan.n_pairs} padding={plan.n_padding}", file=sys.stderr)
    return EXIT_OK


def cmd_dataset_stats(args) -> int:
    _require_file(args.bundle, "--bundle")
    bundle = _load_bundle_for(args)
    cand_sources = _split(args.candidate_sources)
    ref_sources = _split(args.reference_sources)
    if not cand_sources:
        raise UsageError("--candidate-sources is required")
    p = args.precision
    rows = [["direction", "precision", "recall", "n_used", "n_excluded", "n_degenerate"]]
    directions = [Modality(args.direction)] if args.direction else list(Modality)
    for m in directions:
        cand = merge_positive_sources(bundle, cand_sources, m)
        ref = merge_positive_sources(bundle, ref_sources, m)
        verified = verified_universe(bundle, args.verified_source, m)
        label = "i2t" if m is Modality.IMAGE else "t2i"
        try:
            pr = dataset_precision_recall(cand, ref, verified)
        except ValueError as exc:
            if args.direction:
                raise
            log.warning("%s: %s", label, exc)
            rows.append([label, "NA", "NA", 0, "", ""])
            continue
        rows.append([label, fmt(pr.precision, p), fmt(pr.recall, p), pr.n_used, pr.n_excluded, pr.n_degenerate])
    _write_csv(rows, args.output)
    counts = bundle.source_counts()
    print(" ".join(f"{k}={counts[k]}" for k in sorted(counts)), file=sys.stderr)
    return EXIT_OK


def cmd_merge(args) -> int:
    _require_file(args.bundle, "--bundle")
    bundle = _load_bundle_for(args)
    gt = merge_positive_sources(bundle, _sources(args, bundle), Modality(args.direction))
    rows = [["query", "candidate", "judgment", "sources"]]
    for q in sorted(gt.positives):
        for c in sorted(gt.positives[q]):
            e = gt.positives[q][c]
            rows.append([q, c, e.judgment.value, "+".join(sorted(e.sources))])
    _write_csv(rows, args.output)
    return EXIT_OK


# --- parser --------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, output: bool = True) -> None:
    p.add_argument("--precision", type=int, default=4, help="decimals in numeric output (default 4)")
    if output:
        p.add_argument("-o", "--output", default=None, help="output file (default stdout)")


def _add_bundle_opts(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--bundle", required=required, help="annotation bundle JSON")
    p.add_argument("--sources", help="comma-separated source tags to merge (default: all)")
    p.add_argument("--apply-invalid", action="store_true",
                   help="drop records touching the bundle's own invalid caption/image lists")
    p.add_argument("--invalid-list", help="JSON file with invalid_captions / invalid_images lists to drop")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xmreval", description="Evaluate cross-modal retrieval with many positives per query.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("evaluate", help="retrieval metrics per direction and bidirectional")
    _add_bundle_opts(p, required=False)
    p.add_argument("--sims-i2t", help="image-to-text similarity matrix (CSV or TSV)")
    p.add_argument("--sims-t2i", help="text-to-image similarity matrix (CSV or TSV)")
    p.add_argument("--metrics", default=DEFAULT_METRICS,
                   help="comma-separated: recall@K, r_precision, map_at_r, pmrp; "
                        "':graded' allowed on recall@1 and r_precision")
    p.add_argument("--classes", help="class vectors CSV (item_id,bit_0,...), needed for pmrp")
    p.add_argument("--zeta", type=int, default=0, help="PMRP Hamming tolerance (default 0)")
    p.add_argument("--pmrp-cap", type=int, default=50, help="cap on the PMRP positive count (default 50)")
    p.add_argument("--output-dir", required=True, help="directory for summary and per-query CSVs")
    _add_common(p, output=False)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("correlate", help="Kendall tau-b between metric columns of a score table")
    p.add_argument("table", help="score table CSV: model,<metric>,...")
    p.add_argument("--columns", help="comma-separated subset of columns")
    p.add_argument("--pair", nargs=2, metavar=("A", "B"), help="print a single tau-b value")
    _add_common(p)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("bt-fit", help="Bradley-Terry scores from a win-count matrix")
    p.add_argument("preferences", help="square CSV of win counts")
    p.add_argument("--tol", type=float, default=1e-10, help="relative-change stopping tolerance")
    p.add_argument("--max-iter", type=int, default=10000, help="iteration limit")
    _add_common(p)
    p.set_defaults(func=cmd_bt_fit)

    p = sub.add_parser("bias", help="model bias of one annotator subset")
    p.add_argument("--scores-dir", required=True, help="directory of <A>+<B>.csv tables and ALL.csv")
    p.add_argument("--metric", required=True, help="metric column to use")
    p.add_argument("--theta", required=True, help="'+'-joined annotator names, e.g. PCME+PVSE")
    _add_common(p)
    p.set_defaults(func=cmd_bias)

    p = sub.add_parser("bias-curve", help="bias averaged over all subsets of each size")
    p.add_argument("--scores-dir", required=True, help="directory of <A>+<B>.csv tables and ALL.csv")
    p.add_argument("--metric", required=True, help="metric column to use")
    p.add_argument("--sizes", help="comma-separated subset sizes (default: every size present in the directory)")
    _add_common(p)
    p.set_defaults(func=cmd_bias_curve)

    p = sub.add_parser("pool", help="union of the annotators' top-k candidates")
    p.add_argument("--ranking", action="append", required=True, metavar="NAME=PATH",
                   help="annotator name and similarity matrix; repeat per annotator")
    p.add_argument("--k", type=int, default=5, help="candidates per query and annotator (default 5)")
    _add_common(p)
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("package-hits", help="pack a candidate pool into 20-item HITs")
    p.add_argument("--pool", required=True, help="pool CSV (query,candidate,...)")
    p.add_argument("--golden-positives", required=True, help="CSV of known positive pairs (query,candidate)")
    p.add_argument("--ranking", action="append", required=True, metavar="NAME=PATH",
                   help="annotator similarity matrices; golden negatives avoid their top lists")
    p.add_argument("--exclusion-depth", type=int, default=25, help="top-N excluded from golden negatives")
    p.add_argument("--bundle", help="annotation bundle; its positives are never used as golden negatives")
    p.add_argument("--sources", help="comma-separated source tags (default: all)")
    p.add_argument("--direction", choices=["image", "text"], default="text", help="query modality of the pool")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    _add_common(p)
    p.set_defaults(func=cmd_package_hits)

    p = sub.add_parser("dataset-stats", help="precision/recall of an annotation set against verified labels")
    _add_bundle_opts(p, required=True)
    p.add_argument("--candidate-sources", required=True, help="sources forming the set under test")
    p.add_argument("--reference-sources", default=HUMAN_VERIFIED, help="sources forming the reference")
    p.add_argument("--verified-source", default=HUMAN_VERIFIED, help="source whose judged pairs bound the comparison")
    p.add_argument("--direction", choices=["image", "text"], help="query modality (default: both)")
    _add_common(p)
    p.set_defaults(func=cmd_dataset_stats)

    p = sub.add_parser("merge", help="export merged ground truth for one direction")
    _add_bundle_opts(p, required=True)
    p.add_argument("--direction", choices=["image", "text"], required=True, help="query modality")
    _add_common(p)
    p.set_defaults(func=cmd_merge)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    if getattr(args, "precision", 0) < 0:
        parser.error("--precision must be >= 0")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, ValueError, KeyError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
