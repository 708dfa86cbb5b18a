"""``uibcost`` command-line front end.

Exit codes: 0 success, 2 input error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from . import __version__
from .cost import DTYPES, CostReport, network_cost
from .executor import ShapeError, run_network
from .ir import IRError, NetworkSpec
from .latency import CSVFormatError, LatencyMatrix, bundled_latencies, read_latency_csv
from .metrics import DimensionMismatch, NonPositiveLatency, aggregate, pareto_front
from .netspec import ParseError, emit_netspec, load_netspec
from .roofline import DEFAULT_SWEEP, InsufficientData, fit_ridge_point, sweep_ridge_points
from .search import ConfigError, SearchResult, load_search_config, with_seed
from .svg import line_plot, scatter_plot
from .zoo import REGISTRY, lookup

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3
SEED_ENV = "UIBCOST_SEED"


class InputError(Exception):
    pass


@dataclass
class ReportBundle:
    command: str
    args: Dict[str, Any]
    version: str = __version__
    seed: Optional[int] = None
    payload: Any = None
    paths: List[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=str)


def resolve_model(ref: str) -> NetworkSpec:
    """A registry name, a display name such as ``MNv4-Conv-S``, or a NetworkSpec JSON file."""
    if os.path.exists(ref):
        return load_netspec(ref)
    net = lookup(ref)
    if net is None:
        raise InputError(f"unknown model {ref!r}; built-in names: {', '.join(REGISTRY)}")
    return net


def _write(path: Optional[str], text: str, bundle: ReportBundle) -> None:
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)
        bundle.paths.append(str(path))


def _load_latencies(path: Optional[str]) -> LatencyMatrix:
    return read_latency_csv(path) if path else bundled_latencies()


# ---------------------------------------------------------------- commands


def cmd_analyze(args, bundle: ReportBundle) -> CostReport:
    net = resolve_model(args.model)
    report = network_cost(net, DTYPES[args.dtype])
    bundle.payload = report.to_dict()
    if args.json:
        print(report.to_json())
    elif args.csv:
        print(report.to_csv(), end="")
    else:
        print(f"{'#':>3} {'kind':<9} {'MACs':>14} {'params':>11} {'bytes':>11} {'MACs/B':>8}")
        for i, b in enumerate(report.per_block):
            print(f"{i:>3} {b.kind:<9} {b.macs:>14,} {b.params:>11,} {b.bytes:>11,} {b.op_intensity:>8.2f}")
        print(f"{report.name}: params={report.total_params} ({report.total_params / 1e6:.2f}M) "
              f"macs={report.total_macs} ({report.total_macs / 1e9:.3f}G) "
              f"bytes={report.total_bytes} op_intensity={report.op_intensity:.3f} dtype={args.dtype}")
    return report


def _fit_inputs(matrix: LatencyMatrix, target: str, dtype: str):
    if target not in matrix.targets:
        raise InputError(f"target {target!r} not in CSV; available: {', '.join(matrix.targets)}")
    reports, measured, skipped = [], [], []
    for model, ms in matrix.column(target).items():
        net = lookup(model)
        if net is None:
            skipped.append(model)
            continue
        reports.append(network_cost(net, DTYPES[dtype]))
        measured.append(ms)
    return reports, measured, skipped


def cmd_roofline(args, bundle: ReportBundle):
    if args.fit:
        if not args.target:
            raise InputError("--fit requires --target")
        matrix = read_latency_csv(args.fit)
        reports, measured, skipped = _fit_inputs(matrix, args.target, args.dtype)
        if skipped:
            print(f"note: skipping models without a built-in definition: {', '.join(skipped)}", file=sys.stderr)
        fit = fit_ridge_point(reports, measured)
        bundle.payload = asdict(fit)
        if args.json:
            print(json.dumps(asdict(fit), indent=2))
        else:
            print(f"target={args.target} n={len(reports)} rp={fit.ridge_point:g} "
                  f"r_s_roofline={fit.spearman!r} r_s_mac={fit.spearman_macs!r} peak_macs_per_sec={fit.peak_macs_per_sec!r}")
        return fit

    if not args.models:
        raise InputError("roofline needs at least one model (or --fit)")
    rps = args.rp_sweep if args.rp_sweep else list(DEFAULT_SWEEP)
    reports = [network_cost(resolve_model(m), DTYPES[args.dtype]) for m in args.models]
    table = sweep_ridge_points(reports, rps)
    bundle.payload = {"models": table.models, "ridge_points": table.ridge_points, "latency": table.latency_s.tolist()}
    text = table.to_csv()
    print(text, end="")
    _write(args.out, text, bundle)
    if args.svg:
        series = {m: (table.ridge_points, [v / 1e9 for v in table.column(m)]) for m in table.models}
        _write(args.svg, line_plot(series, "Roofline cost vs ridge point", "ridge point (MACs/byte)",
                                   "GMAC-equivalents", log_x=True), bundle)
    return table


def cmd_pareto(args, bundle: ReportBundle):
    matrix = _load_latencies(args.data)
    targets = [t.strip() for t in args.targets.split(",")] if args.targets else list(matrix.targets)
    for t in targets:
        if t not in matrix.targets:
            raise InputError(f"target {t!r} not in CSV; available: {', '.join(matrix.targets)}")
    vectors, dropped = {}, []
    for m in matrix.models:
        v = matrix.vector(m, targets)
        if v is None or m not in matrix.accuracy:
            dropped.append(m)
        else:
            vectors[m] = v
    if dropped:
        print(f"note: {len(dropped)} models lack a latency on some target or an accuracy: {', '.join(dropped)}",
              file=sys.stderr)
    if not vectors:
        raise InputError("no model has latencies on all requested targets")
    if args.norm:
        if args.norm not in vectors:
            raise InputError(f"normalization model {args.norm!r} has no complete latency vector")
        norms = vectors[args.norm]
    else:
        norms = [min(v[j] for v in vectors.values()) for j in range(len(targets))]
    agg = aggregate(vectors, args.agg, norms)
    points = [(agg[m], matrix.accuracy[m], m) for m in vectors]
    front = pareto_front(points)
    bundle.payload = {"targets": targets, "agg": args.agg, "norms": norms,
                      "frontier": [{"model": n, "latency": l, "top1": a} for l, a, n in front]}
    lines = ["model,aggregated_latency,top1"] + [f"{n},{l!r},{a!r}" for l, a, n in front]
    text = "\n".join(lines) + "\n"
    print(text, end="")
    _write(args.out, text, bundle)
    if args.svg:
        _write(args.svg, scatter_plot(points, [p[2] for p in front], f"Pareto frontier ({args.agg} mean)",
                                      "aggregated normalized latency", "top-1 (%)"), bundle)
    return front


def _emit_search(result: SearchResult, out: Path, tag: str, bundle: ReportBundle) -> None:
    _write(str(out / f"best_{tag}.json"), emit_netspec(result.best.net), bundle)
    _write(str(out / f"eval_log_{tag}.csv"), result.log_csv(), bundle)


def cmd_search(args, bundle: ReportBundle):
    cfg = load_search_config(args.config)
    if os.environ.get(SEED_ENV):
        try:
            cfg = with_seed(cfg, int(os.environ[SEED_ENV]))
        except ValueError:
            raise InputError(f"{SEED_ENV} must be an integer") from None
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    bundle.seed = cfg.seed
    mode = args.mode or cfg.mode
    modes = ["one-stage", "two-stage"] if mode == "compare" else [mode]
    out = Path(args.out_dir)
    summary = {}
    for m in modes:
        cfg.mode = m
        result = cfg.run()
        _emit_search(result, out, m, bundle)
        summary[m] = {"best": result.best.id, "quality": result.best.quality, "cost": result.best.cost,
                      "reward": result.best.reward, "evaluations": result.evaluations}
        print(f"{m}: best={result.best.id} reward={result.best.reward!r} quality={result.best.quality!r} "
              f"cost={result.best.cost!r} evals={result.evaluations}")
    bundle.payload = summary
    return summary


def cmd_exec_smoke(args, bundle: ReportBundle):
    net = resolve_model(args.model)
    result = run_network(net, seed=args.seed, resolution=args.resolution)
    logits = result.logits
    if not result.output.finite:
        raise ShapeError("non-finite logits")
    bundle.seed = args.seed
    bundle.payload = {"model": net.name, "blocks": len(result.shapes), "logits": len(logits)}
    print(f"{net.name}: {len(result.shapes)} blocks executed at {args.resolution or net.input_res}px, "
          f"{len(logits)} finite logits, attention layers={len(result.attention_probs)}")
    return result


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uibcost", description="Cost, roofline and search tools for UIB networks.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--report", help="write a JSON report bundle (args, version, payload, outputs) here")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="per-block and total MACs, params and traffic")
    a.add_argument("model", help="built-in name or NetworkSpec JSON file")
    a.add_argument("--dtype", choices=sorted(DTYPES), default="int8")
    fmt = a.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--csv", action="store_true")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("roofline", help="ridge-point sweep or ridge-point fit")
    r.add_argument("models", nargs="*")
    r.add_argument("--rp-sweep", nargs="*", type=float, metavar="RP",
                   help=f"ridge points to evaluate (default {' '.join(f'{x:g}' for x in DEFAULT_SWEEP)})")
    r.add_argument("--fit", metavar="CSV", help="fit a ridge point to measured latencies")
    r.add_argument("--target", help="target column for --fit")
    r.add_argument("--dtype", choices=sorted(DTYPES), default="int8")
    r.add_argument("--json", action="store_true")
    r.add_argument("--out", help="write the sweep CSV here")
    r.add_argument("--svg", help="write a sweep plot here")
    r.set_defaults(func=cmd_roofline)

    q = sub.add_parser("pareto", help="multi-target latency/accuracy frontier")
    q.add_argument("data", nargs="?", help="latency CSV (default: bundled reference table)")
    q.add_argument("--agg", choices=["geo", "arith"], default="geo")
    q.add_argument("--targets", help="comma-separated target names (default: all)")
    q.add_argument("--norm", help="model whose latencies normalise each target (default: per-target minimum)")
    q.add_argument("--out", help="write the frontier CSV here")
    q.add_argument("--svg", help="write a scatter plot here")
    q.set_defaults(func=cmd_pareto)

    s = sub.add_parser("search", help="architecture search from a TOML/JSON config")
    s.add_argument("config")
    s.add_argument("--mode", choices=["one-stage", "two-stage", "compare"])
    s.add_argument("--seed", type=int, help=f"overrides the config and ${SEED_ENV}")
    s.add_argument("--out-dir", default="search_out")
    s.set_defaults(func=cmd_search)

    e = sub.add_parser("exec-smoke", help="run a network on random data and check shapes")
    e.add_argument("model", nargs="?", default="mnv4-conv-s")
    e.add_argument("--resolution", type=int, default=64)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_exec_smoke)
    return p


INPUT_ERRORS = (InputError, ParseError, CSVFormatError, ConfigError, IRError, InsufficientData,
                DimensionMismatch, NonPositiveLatency, FileNotFoundError, IsADirectoryError, KeyError, ValueError)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    bundle = ReportBundle(args.command, {k: v for k, v in vars(args).items() if k != "func"})
    try:
        args.func(args, bundle)
    except ShapeError as e:
        print(f"error: internal invariant violated: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except INPUT_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as e:  # pragma: no cover - defensive
        print(f"error: internal failure: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    if args.command == "search":
        _write(str(Path(args.out_dir) / "report.json"), bundle.to_json(), bundle)
    if args.report:
        _write(args.report, bundle.to_json(), bundle)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
