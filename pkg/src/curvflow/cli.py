"""Command line entry point.

Results go to standard output or ``--out`` as JSON (the default) or CSV. Logs and
error messages go to standard error. Exit codes are 0 on success, 1 when a
computation rejects its input and 2 on usage errors.
"""

import argparse
import logging
import sys
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
import polars as pl

from curvflow import curvature, flow_analysis, isoperimetry, metric, propagation_engine, spectral
from curvflow.curvature import PairSelection
from curvflow.errors import CurvflowError
from curvflow.graph_core import DirectedWeightedGraph, load_graph
from curvflow.io.graph_files import JsonWriter
from curvflow.io.matrix_files import MatrixCsvReader, MatrixCsvWriter, TableCsvWriter, read_matrix
from curvflow.logger import level_from_env, setup_logging
from curvflow.utils import ensure_list
from curvflow.wl_expressiveness import RefineConfig, distinguishes

logger = logging.getLogger(__name__)

CURVATURE_KINDS = ("curc", "eps", "idle", "idle_alpha", "ollivier", "forman", "lb1", "lb2")


class UsageError(Exception):
    """A flag combination that argparse cannot reject on its own"""


def parse_pairs(text: str) -> PairSelection:
    """Parse ``all``, ``edges`` or ``x:y,x:y,...``"""
    if text in ("all", "edges"):
        return text
    pairs = []
    for item in ensure_list(text):
        x, sep, y = item.partition(":")
        if not sep:
            raise argparse.ArgumentTypeError(f"pair '{item}' must look like x:y")
        try:
            pairs.append((int(x), int(y)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"pair '{item}' must hold two integers")
    if not pairs:
        raise argparse.ArgumentTypeError("no pairs given")
    return pairs


def _matrix_payload(matrix: np.ndarray) -> dict[str, Any]:
    return {"n": int(matrix.shape[0]), "rows": matrix.tolist()}


def _render(args: argparse.Namespace, payload: Any, table: pl.DataFrame | np.ndarray | None = None) -> str:
    if args.format == "json":
        return JsonWriter().render(payload)
    if table is None:
        raise UsageError(f"'{args.command}' has no CSV output")
    if isinstance(table, np.ndarray):
        return MatrixCsvWriter().render(table)
    return TableCsvWriter().render(table)


def _curvature(args: argparse.Namespace) -> str:
    g = load_graph(args.graph)
    pairs = args.pairs
    match args.kind:
        case "curc":
            report = curvature.curc(g, pairs or "all", metric=args.metric)
        case "eps":
            if args.eps is None:
                raise UsageError("--kind eps needs --eps")
            report = curvature.curc_eps(g, args.eps, pairs or "all")
        case "idle":
            report = curvature.idle_curc(g, pairs or "all")
        case "idle_alpha":
            if args.alpha is None:
                raise UsageError("--kind idle_alpha needs --alpha")
            report = curvature.idle_curc_alpha(g, args.alpha, pairs or "all")
        case "ollivier":
            report = curvature.ollivier(g, pairs or "all", alpha=args.alpha or 0.0)
        case "forman":
            report = curvature.forman_report(g, pairs or "edges")
        case "lb1":
            report = curvature.lb1(g, pairs or "all")
        case "lb2":
            report = curvature.lb2(g, pairs or "edges", use_four_cycles=not args.triangles_only)
    return _render(args, report.to_dict(), report.to_frame())


def _perron(args: argparse.Namespace) -> str:
    kernel = spectral.mean_transition_kernel(load_graph(args.graph))
    payload = {
        "m": kernel.m,
        "residual": kernel.residual,
        "W": _matrix_payload(kernel.W),
        "mu": _matrix_payload(kernel.mu),
    }
    tables = {"m": kernel.m[None, :], "W": kernel.W, "mu": kernel.mu}
    return _render(args, payload, tables[args.matrix])


def _distance(args: argparse.Namespace) -> str:
    g = load_graph(args.graph)
    match args.mode:
        case "limit":
            result = metric.limit_distance(g)
        case "eps":
            if args.eps is None:
                raise UsageError("--mode eps needs --eps")
            result = metric.epsilon_distance(g, args.eps)
        case "hop":
            result = metric.hop_distance(g)
    return _render(args, {"mode": str(result.mode), "eps": result.eps, **_matrix_payload(result.d)}, result.d)


def _cheeger(args: argparse.Namespace) -> str:
    result = isoperimetry.dirichlet_constant(load_graph(args.graph), args.x, args.R)
    return _render(args, result.to_dict())


def _wl(args: argparse.Namespace) -> str:
    config = RefineConfig.from_strings(args.cycle or args.feature, args.max_rounds)
    g = load_graph(args.graph)

    if args.pair is None:
        history = config.refine(g)
        payload = {"features": [str(spec) for spec in config.features], "rounds": [c.to_dict() for c in history]}
        return _render(args, payload)

    outcome = distinguishes(g, load_graph(args.pair), config)
    print(outcome.verdict())
    if args.out is None:
        return ""
    payload = {
        "features": [str(spec) for spec in config.features],
        "verdict": outcome.verdict(),
        "distinguishable": outcome.distinguishable,
        "round": outcome.round,
        "rounds": outcome.signatures,
    }
    return _render(args, payload)


def _node_states(path: Path | None, g: DirectedWeightedGraph) -> np.ndarray:
    if path is None:
        return np.ones((g.n, 1))
    if path.suffix.lower() == ".json":
        return read_matrix(path)
    return MatrixCsvReader().read(path)


def _engine(args: argparse.Namespace) -> str:
    g = load_graph(args.graph)
    if args.config is not None:
        cfg = propagation_engine.load_layer_config(args.config)
    else:
        cfg = propagation_engine.preset_config(args.preset, epsilon=args.epsilon)

    h = _node_states(args.states, g)
    heads = propagation_engine.propagation_matrix(g, cfg, h)
    output = propagation_engine.layer_forward(g, cfg, h)

    if args.export_dir is not None:
        args.export_dir.mkdir(parents=True, exist_ok=True)
        for index, omega in enumerate(heads):
            JsonWriter(round_output=False).write(args.export_dir / f"head_{index}.json", _matrix_payload(omega))

    payload: dict[str, Any] = {
        "config": cfg.name,
        "heads": [_matrix_payload(omega) for omega in heads],
        "output": output.tolist(),
    }
    if args.check:
        if args.preset is None:
            raise UsageError("--check needs --preset")
        payload["cast_check"] = propagation_engine.cast_check(args.preset, g, h, cfg)
    return _render(args, payload, output)


def _analyze(args: argparse.Namespace) -> str:
    series = flow_analysis.load_epoch_series(args.manifest)
    report = flow_analysis.trend(series, estimator=args.estimator)
    return _render(args, report.to_dict(), report.to_frame())


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, help="write results here instead of standard output")
    common.add_argument("--format", choices=("json", "csv"), default="json", help="output format (default json)")
    return common


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per analysis"""
    common = _common_options()
    parser = argparse.ArgumentParser(prog="curvflow", description="Curvature of directed weighted graphs")
    commands = parser.add_subparsers(dest="command", required=True)

    def add(name: str, handler: Callable[[argparse.Namespace], str], summary: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, parents=[common], help=summary, description=summary)
        sub.set_defaults(handler=handler)
        return sub

    sub = add("curvature", _curvature, "curvature of ordered vertex pairs")
    sub.add_argument("graph", type=Path)
    sub.add_argument("--kind", choices=CURVATURE_KINDS, default="curc")
    sub.add_argument("--eps", type=float, help="mask threshold for --kind eps")
    sub.add_argument("--alpha", type=float, help="idleness for --kind idle_alpha or ollivier")
    sub.add_argument("--pairs", type=parse_pairs, help="all, edges or x:y,x:y,...")
    sub.add_argument("--triangles-only", action="store_true", help="drop the 4-cycle term of lb2")
    sub.add_argument(
        "--metric", choices=("limit", "hop"), default="limit", help="distance for --kind curc, hop is what lb2 bounds"
    )

    sub = add("perron", _perron, "Perron measure, random walk and mean transition kernel")
    sub.add_argument("graph", type=Path)
    sub.add_argument("--matrix", choices=("m", "W", "mu"), default="mu", help="matrix written in CSV mode")

    sub = add("distance", _distance, "all-pairs distance matrix")
    sub.add_argument("graph", type=Path)
    sub.add_argument("--mode", choices=("limit", "eps", "hop"), default="limit")
    sub.add_argument("--eps", type=float, help="mask threshold for --mode eps")

    sub = add("cheeger", _cheeger, "Dirichlet isoperimetric constant and its curvature bound")
    sub.add_argument("graph", type=Path)
    sub.add_argument("--x", type=int, required=True, help="base vertex")
    sub.add_argument("--R", type=float, required=True, help="radius of the region")

    sub = add("wl", _wl, "colour refinement and graph-pair discrimination")
    sub.add_argument("graph", type=Path)
    features = sub.add_mutually_exclusive_group(required=True)
    features.add_argument("--feature", help="rrwp:K, spd:C, adj, sym_norm or row_norm")
    features.add_argument("--cycle", help="comma-separated features for dynamic refinement")
    sub.add_argument("--pair", type=Path, help="second graph to compare against")
    sub.add_argument("--max-rounds", type=int)

    sub = add("engine", _engine, "run one propagation layer")
    sub.add_argument("graph", type=Path)
    layer = sub.add_mutually_exclusive_group(required=True)
    layer.add_argument("--preset", choices=[str(p) for p in propagation_engine.Preset])
    layer.add_argument("--config", type=Path, help="layer config JSON")
    sub.add_argument("--epsilon", type=float, default=0.0, help="GIN self weight offset")
    sub.add_argument("--states", type=Path, help="node states as CSV or matrix JSON, default all ones")
    sub.add_argument("--export-dir", type=Path, help="write each head's matrix here as matrix JSON")
    sub.add_argument("--check", action="store_true", help="compare the preset with its direct formula")

    sub = add("analyze", _analyze, "curvature trend over training epochs")
    sub.add_argument("--manifest", type=Path, required=True)
    sub.add_argument("--estimator", choices=[str(e) for e in flow_analysis.Estimator], default="curc")

    return parser


def run(argv: Sequence[str] | None = None) -> int:
    """Run one invocation.

    Args:
        argv: Arguments without the program name. Defaults to ``sys.argv[1:]``.

    Returns:
        The exit code.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    try:
        text = args.handler(args)
    except CurvflowError as e:
        logger.debug("Command failed", exc_info=True)
        print(str(e), file=sys.stderr)
        return 1
    except (UsageError, ValueError) as e:
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return 2

    if text:
        if args.out is not None:
            args.out.write_text(text)
        else:
            sys.stdout.write(text)
    return 0


def main() -> None:
    setup_logging(level_from_env())
    sys.exit(run())


if __name__ == "__main__":
    main()
