"""Command-line entry point.

Exit codes: 0 success, 2 configuration or input error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import asdict
from pathlib import Path

from .env import AdversaryError, RunFailure
from .graph import GraphError, Observability, PartitionError, classify, load_graph
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    bound_report,
    build_graph,
    build_partition_for,
    build_schedule,
    expand_sweep,
    fit_results,
    read_results,
    run_experiment,
    write_outputs,
)
from .lp import LPError
from .mirror import MirrorStepError
from .osmd import InternalError
from .partition import (
    PARTITION_METHODS,
    ConstructionError,
    build_partition,
    load_blocks,
    solve_block_lp,
    validate,
)
from .realizations import ConfigError, exploration_threshold

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
CONFIG_ERRORS = (ConfigError, GraphError, PartitionError, AdversaryError, ConstructionError, OSError, KeyError)
RUNTIME_ERRORS = (RunFailure, MirrorStepError, InternalError, LPError)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


def cmd_graph_info(args) -> int:
    graph = load_graph(args.graph)
    labels = classify(graph)
    info = {
        "num_vertices": graph.num_vertices,
        "num_edges": len(graph.edges),
        "duplicate_edges": graph.duplicate_edges,
        "self_loops": sum(graph.has_self_loop(v) for v in graph.vertices),
        "observability": labels.graph.value,
        "vertex_counts": {lab.value: labels.count(lab) for lab in Observability},
    }
    if labels.graph is not Observability.NON_OBSERVABLE and graph.num_vertices >= 2 and args.lp:
        info["delta_star"] = solve_block_lp(graph, graph.vertices).delta_star
    _emit(info)
    return EXIT_OK


def cmd_partition(args) -> int:
    graph = load_graph(args.graph)
    if args.action == "build":
        part = build_partition(graph, args.method)
        if args.out:
            Path(args.out).write_text(json.dumps(part.to_json()) + "\n")
    else:
        part = validate(graph, load_blocks(args.blocks))
    _emit({**part.summary(), "blocks": [list(b) for b in part.blocks]})
    return EXIT_OK


def _finish(results: list[ExperimentResult]) -> int:
    failed = [f for r in results for f in r.failures]
    for f in failed:
        print(f"run T={f['T']} seed={f['seed']} failed: {f['error']}", file=sys.stderr)
    return EXIT_RUNTIME if failed else EXIT_OK


def _print_summary(summary: dict) -> None:
    for p in summary["per_T"]:
        b = p["bound"].get("value")
        print(
            f"{summary['family']}  T={p['T']}  runs={p['runs']}  "
            f"mean regret={p['mean_regret']:.2f} ± {p['stderr_regret']:.2f}"
            + (f"  bound={b:.2f}" if b is not None else "")
        )
    fit = summary["fit"]
    print(f"fitted exponent: {fit['slope']:.4f}" if fit["defined"] else f"fit undefined: {fit['reason']}")


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    result = run_experiment(cfg)
    _print_summary(result.summary)
    return _finish([result])


def cmd_sweep(args) -> int:
    path = Path(args.config)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    variants = [ExperimentConfig.from_dict(v, path.parent) for v in expand_sweep(data)]
    results = []
    combined_rows = []
    summaries = []
    for cfg in variants:
        res = run_experiment(cfg, write=False)
        results.append(res)
        combined_rows += res.rows
        summaries.append(res.summary)
        _print_summary(res.summary)
    out = dict(data.get("output", {}))
    base = ExperimentConfig.from_dict({**variants[0].to_dict(), "output": out, "family": "sweep"}, path.parent)
    merged = ExperimentResult(rows=combined_rows, summary={"variants": summaries}, failures=[])
    write_outputs(base, merged)
    return _finish(results)


def cmd_fit(args) -> int:
    fits = fit_results(read_results(args.results))
    _emit({fam: asdict(fit) for fam, fit in fits.items()})
    return EXIT_OK


def cmd_bound(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    graph = build_graph(cfg)
    part = build_partition_for(cfg, graph)
    reports = []
    for T in cfg.T:
        sched = build_schedule(cfg, part, T)
        rep = bound_report(part, sched, T, cfg.bound)
        rep["exploration_within_half"] = sched.exploration_ok
        reports.append(rep)
    choice = build_schedule(cfg, part, cfg.T[0]).block_choice or None
    _emit({
        "family": cfg.family,
        "exploration_threshold_T0": exploration_threshold(cfg.realization["mode"], part, choice),
        "bounds": reports,
    })
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphosmd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("graph-info", help="observability summary of a graph file")
    p.add_argument("graph")
    p.add_argument("--lp", action="store_true", help="also solve the whole-graph covering LP")
    p.set_defaults(func=cmd_graph_info)

    p = sub.add_parser("partition", help="build or validate a partition")
    psub = p.add_subparsers(dest="action", required=True)
    b = psub.add_parser("build")
    b.add_argument("--graph", required=True)
    b.add_argument("--method", required=True, choices=PARTITION_METHODS)
    b.add_argument("--out", help="write the blocks JSON here")
    v = psub.add_parser("validate")
    v.add_argument("--graph", required=True)
    v.add_argument("--blocks", required=True)
    p.set_defaults(func=cmd_partition)

    for name, func, helptext in [
        ("run", cmd_run, "run one experiment config"),
        ("sweep", cmd_sweep, "run the cartesian product of a config's 'sweep' entries"),
        ("bound", cmd_bound, "print theoretical bounds for a config"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("-c", "--config", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("fit", help="fit regret exponents from a results CSV")
    p.add_argument("results")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except RUNTIME_ERRORS as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
