"""Command-line interface.

Data goes to stdout, diagnostics to stderr. Exit codes: 0 success,
1 runtime failure (I/O), 2 validation or usage error. Output bytes are
deterministic for fixed inputs and flags: JSON keys are sorted, floats
are formatted at 9 significant digits, and candidate files are
enumerated in lexicographic path order. The DEPARA_THREADS environment
variable optionally caps internal parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .bundles import bundle_checksum, load_bundle, save_bundle
from .errors import DeparaError
from .evaluation import RelevanceSet, pr_curve, precision_at_k, recall_at_k, task_tree
from .formatting import dumps
from .graph import DeparaGraph, build_graph
from .ranking import (
    ASCENDING_BY_RISK,
    DESCENDING_BY_SCORE,
    KnowledgePool,
    RankEntry,
    RankingTable,
    all_pairs_matrix,
    matrix_to_csv,
    rank_by_similarity,
    select_layer,
)
from .refnet import export_bundle, load_refnet
from .similarity import graph_similarity
from .synth import emit_family, generate_family, monotonicity_harness


def _emit(text: str) -> None:
    sys.stdout.write(text)


def _max_workers() -> int | None:
    raw = os.environ.get("DEPARA_THREADS")
    if raw is None:
        return None
    try:
        value = int(raw)
    except ValueError as exc:
        raise DeparaError(f"DEPARA_THREADS must be an integer, got {raw!r}") from exc
    if value < 1:
        raise DeparaError(f"DEPARA_THREADS must be at least 1, got {value}")
    return value


def _load_graph(path: str | Path) -> DeparaGraph:
    try:
        return build_graph(load_bundle(path))
    except DeparaError as exc:
        raise DeparaError(f"{path}: {exc}") from exc


def _load_probe_csv(path: str | Path) -> np.ndarray:
    try:
        probe = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    except ValueError as exc:
        raise DeparaError(f"{path}: not a numeric CSV probe file ({exc})") from exc
    if probe.size == 0:
        raise DeparaError(f"{path}: empty probe file")
    return probe


def _discover_bundles(directory: str | Path) -> list[tuple[str, Path]]:
    root = Path(directory)
    if not root.is_dir():
        raise DeparaError(f"not a directory: {directory}")
    found = sorted(root.rglob("*.depb"), key=lambda p: p.relative_to(root).as_posix())
    if not found:
        raise DeparaError(f"no .depb files under {directory}")
    out = []
    for path in found:
        rel = path.relative_to(root).as_posix()
        out.append((rel[: -len(".depb")], path))
    return out


def _load_pool(directory: str | Path) -> KnowledgePool:
    items = []
    for candidate_id, path in _discover_bundles(directory):
        items.append((candidate_id, _load_graph(path)))
    return KnowledgePool(tuple(items))


def _cmd_export_ref(args) -> int:
    net = load_refnet(args.net)
    probe = _load_probe_csv(args.probe)
    bundle = export_bundle(
        net,
        probe,
        args.tap,
        model_id=args.model_id if args.model_id else Path(args.net).stem,
        probe_id=args.probe_id if args.probe_id else Path(args.probe).stem,
    )
    save_bundle(bundle, args.out)
    _emit(dumps({
        "out": str(args.out),
        "n": bundle.n,
        "d_embed": bundle.d_embed,
        "d_input": bundle.d_input,
        "checksum": bundle_checksum(bundle),
    }))
    return 0


def _cmd_compare(args) -> int:
    graph_a = _load_graph(args.a)
    graph_b = _load_graph(args.b)
    report = graph_similarity(graph_a, graph_b, args.lam, edges_only=args.edges_only)
    _emit(dumps(report.to_dict()))
    return 0


def _cmd_rank(args) -> int:
    target = _load_graph(args.target)
    pool = _load_pool(args.candidates)
    table = rank_by_similarity(pool, target, args.lam, edges_only=args.edges_only,
                               target_id=str(args.target))
    if args.format == "csv":
        _emit(table.to_csv())
    else:
        _emit(dumps(table.to_dict()))
    return 0


def _cmd_select_layer(args) -> int:
    target = _load_graph(args.target_encoder)
    pool = _load_pool(args.layers)
    choice = select_layer(pool, target, args.lam)
    table = rank_by_similarity(pool, target, args.lam, target_id=str(args.target_encoder))
    _emit(dumps({
        "selected": choice.candidate_id,
        "score": choice.score,
        "tied": choice.tied,
        "ranking": table.to_dict(),
    }))
    return 0


def _table_from_dict(raw: dict, source: str) -> RankingTable:
    try:
        target_id = str(raw["target_id"])
        direction = str(raw.get("direction", DESCENDING_BY_SCORE))
        entries = tuple(
            RankEntry(candidate_id=str(e["candidate_id"]), score=float(e["score"]), rank=int(e["rank"]))
            for e in raw["entries"]
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DeparaError(f"{source}: malformed ranking table ({exc})") from exc
    if not entries:
        raise DeparaError(f"{source}: ranking table for '{target_id}' has no entries")
    if direction not in (DESCENDING_BY_SCORE, ASCENDING_BY_RISK):
        raise DeparaError(f"{source}: unknown ranking direction {direction!r}")
    scores = [e.score for e in entries]
    ascending = direction == ASCENDING_BY_RISK
    for prev, cur in zip(scores, scores[1:]):
        if (cur > prev) if ascending else (cur < prev):
            continue
        if cur == prev:
            continue
        raise DeparaError(f"{source}: ranking table for '{target_id}' is not sorted ({direction})")
    return RankingTable(target_id=target_id, direction=direction, entries=entries)


def _load_rankings(path: str | Path) -> list[RankingTable]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except json.JSONDecodeError as exc:
        raise DeparaError(f"{path}: invalid JSON ({exc})") from exc
    if isinstance(raw, dict):
        raw = [raw]
    if not isinstance(raw, list):
        raise DeparaError(f"{path}: expected a ranking table object or a list of them")
    return [_table_from_dict(entry, str(path)) for entry in raw]


def _load_relevance(path: str | Path) -> dict[str, RelevanceSet]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except json.JSONDecodeError as exc:
        raise DeparaError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise DeparaError(f"{path}: expected an object mapping query ids to relevant id lists")
    out = {}
    for query_id, ids in raw.items():
        if not isinstance(ids, list):
            raise DeparaError(f"{path}: relevant ids for '{query_id}' must be a list")
        out[str(query_id)] = RelevanceSet(query_id=str(query_id), relevant_ids=frozenset(ids))
    return out


def _cmd_eval(args) -> int:
    tables = _load_rankings(args.rankings)
    relevance = _load_relevance(args.relevance)
    rels = []
    for table in tables:
        if table.target_id not in relevance:
            raise DeparaError(f"missing relevance set for query '{table.target_id}'")
        rels.append(relevance[table.target_id])
    per_query = {}
    for table, rel in zip(tables, rels):
        per_query[table.target_id] = {
            "precision": precision_at_k(table, rel, args.k),
            "recall": recall_at_k(table, rel, args.k),
        }
    result = {
        "k": args.k,
        "per_query": per_query,
        "macro": {
            "precision": float(np.mean([v["precision"] for v in per_query.values()])),
            "recall": float(np.mean([v["recall"] for v in per_query.values()])),
        },
    }
    if args.curve or args.svg:
        curve = pr_curve(tables, rels)
        if args.curve:
            Path(args.curve).write_text(curve.to_csv(), encoding="utf-8")
            result["curve"] = str(args.curve)
        if args.svg:
            Path(args.svg).write_text(curve.to_svg(), encoding="utf-8")
            result["svg"] = str(args.svg)
    _emit(dumps(result))
    return 0


def _cmd_tree(args) -> int:
    pool = _load_pool(args.bundles)
    matrix = all_pairs_matrix(pool, args.lam, edges_only=args.edges_only,
                              max_workers=_max_workers())
    tree = task_tree(matrix, pool.ids, args.lam)
    if args.format == "newick":
        _emit(tree.to_newick() + "\n")
    else:
        payload = tree.to_dict()
        payload["newick"] = tree.to_newick()
        payload["matrix_csv"] = matrix_to_csv(pool.ids, matrix)
        _emit(dumps(payload))
    return 0


def _cmd_synth(args) -> int:
    family = generate_family(args.seed, args.d_input, args.d_embed, args.n_probe, args.sigmas)
    manifest = emit_family(family, args.out)
    scores = monotonicity_harness(family, args.lam)
    manifest["lambda"] = args.lam
    manifest["scores"] = [{"sigma": sigma, "score": score} for sigma, score in scores]
    _emit(dumps(manifest))
    return 0


def _add_lambda(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lambda", dest="lam", type=float, default=1.0,
                        help="edge term weight (default 1.0)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="depara",
        description="Rank transferable models and layers via attribution-graph similarity.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export-ref", help="run a probe CSV through a DEPN net and write a bundle")
    p.add_argument("--net", required=True, help="DEPN network file")
    p.add_argument("--probe", required=True, help="CSV probe matrix, one probe point per row")
    p.add_argument("--tap", required=True, type=int, help="1-based layer to tap")
    p.add_argument("--out", required=True, help="output .depb path")
    p.add_argument("--model-id", default=None)
    p.add_argument("--probe-id", default=None)
    p.set_defaults(handler=_cmd_export_ref)

    p = sub.add_parser("compare", help="similarity report for two bundles")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    _add_lambda(p)
    p.add_argument("--edges-only", action="store_true", help="skip the node term")
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("rank", help="rank candidate bundles against a target bundle")
    p.add_argument("--target", required=True)
    p.add_argument("--candidates", required=True, help="directory searched for .depb files")
    _add_lambda(p)
    p.add_argument("--edges-only", action="store_true")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(handler=_cmd_rank)

    p = sub.add_parser("select-layer", help="pick the layer most similar to a target encoder")
    p.add_argument("--layers", required=True, help="directory of per-layer .depb files")
    p.add_argument("--target-encoder", required=True)
    _add_lambda(p)
    p.set_defaults(handler=_cmd_select_layer)

    p = sub.add_parser("eval", help="precision/recall of rankings against relevance sets")
    p.add_argument("--rankings", required=True, help="JSON ranking table or list of tables")
    p.add_argument("--relevance", required=True, help="JSON mapping query id to relevant ids")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--curve", default=None, help="write the full PR curve as CSV")
    p.add_argument("--svg", default=None, help="write the PR curve as an SVG plot")
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("tree", help="task similarity tree from a directory of bundles")
    p.add_argument("--bundles", required=True)
    _add_lambda(p)
    p.add_argument("--edges-only", action="store_true")
    p.add_argument("--format", choices=("json", "newick"), default="json")
    p.set_defaults(handler=_cmd_tree)

    p = sub.add_parser("synth", help="generate a synthetic task family and score it")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--sigmas", required=True, type=float, nargs="+")
    p.add_argument("--out", default=".", help="directory for family-<seed>/ output")
    p.add_argument("--n-probe", type=int, default=64)
    p.add_argument("--d-input", type=int, default=32)
    p.add_argument("--d-embed", type=int, default=8)
    _add_lambda(p)
    p.set_defaults(handler=_cmd_synth)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except DeparaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
