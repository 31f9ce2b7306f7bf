"""Command-line entry point: generate, analyze, cluster, metrics.

Every option may also come from a ``TF_*`` environment variable (``TF_SEED``,
``TF_WORKERS``, ``TF_D``, ``TF_EPS_SPURIOUS``, ``TF_EPS_MISSING``,
``TF_REPRESENTATION``, ``TF_K_RANGE``, ``TF_DETERMINISTIC``). A flag on the command
line wins over the environment, which wins over the built-in default.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from . import __version__
from .clustering import build_vectors, kmedoids, purity, select_k, silhouette
from .detector import Representation, Thresholds, score_metrics
from .pipeline import (
    CampaignError,
    analyze,
    load_campaign,
    load_ground_truth,
    load_reports,
    mode_labels,
    truth_in_symbols,
    write_reports,
)
from .report import cluster_document, write_cluster_report
from .simulator import SpecError, gen_campaign
from .specfile import load_campaign_spec
from .trace_model import TraceError, UnknownEventError
from .vmm import DEFAULT_ORDER, MAX_ORDER

log = logging.getLogger("tracefault")

EXIT_OK, EXIT_ANALYSIS, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_k_range(text: str) -> tuple[int, int]:
    try:
        a, b = (int(p) for p in text.split("..", 1))
    except ValueError:
        raise UsageError(f"K range must look like A..B, got {text!r}") from None
    if a < 2 or b < a:
        raise UsageError(f"K range needs 2 <= A <= B, got {text!r}")
    return a, b


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass
class RunConfig:
    D: int = DEFAULT_ORDER
    eps_spurious: float = 0.20
    eps_missing: float = 0.80
    representation: str = Representation.VMM.value
    k_range: tuple[int, int] = (2, 20)
    seed: int = 0
    workers: int = 1
    deterministic: bool = False


# option name -> (environment variable, parser)
_SOURCES: dict[str, tuple[str, Callable[[str], object]]] = {
    "D": ("TF_D", int),
    "eps_spurious": ("TF_EPS_SPURIOUS", float),
    "eps_missing": ("TF_EPS_MISSING", float),
    "representation": ("TF_REPRESENTATION", str),
    "k_range": ("TF_K_RANGE", parse_k_range),
    "seed": ("TF_SEED", int),
    "workers": ("TF_WORKERS", int),
    "deterministic": ("TF_DETERMINISTIC", _bool),
}


def resolve_config(args: argparse.Namespace, env: dict[str, str] | None = None) -> RunConfig:
    env = os.environ if env is None else env
    cfg = RunConfig()
    for name, (var, parse) in _SOURCES.items():
        flag = getattr(args, name, None)
        if flag is not None:
            setattr(cfg, name, flag)
        elif var in env:
            try:
                setattr(cfg, name, parse(env[var]))
            except (ValueError, UsageError) as exc:
                raise UsageError(f"{var}: {exc}") from None
    if not 1 <= cfg.D <= MAX_ORDER:
        raise UsageError(f"D must be in 1..{MAX_ORDER}, got {cfg.D}")
    if cfg.workers < 1:
        raise UsageError(f"workers must be at least 1, got {cfg.workers}")
    if cfg.representation not in {r.value for r in Representation}:
        raise UsageError(f"unknown representation {cfg.representation!r}")
    try:
        Thresholds(cfg.eps_spurious, cfg.eps_missing)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return cfg


def _print_json(obj) -> None:
    print(json.dumps(obj, indent=1))


# -- commands -----------------------------------------------------------------


def cmd_generate(args, cfg: RunConfig) -> int:
    spec_path = Path(args.spec)
    if not spec_path.is_file():
        raise UsageError(f"spec not found: {spec_path}")
    seed = args.seed if args.seed is not None else (cfg.seed if "TF_SEED" in os.environ else None)
    camp = load_campaign_spec(spec_path, seed)
    out = Path(args.out) if args.out else Path.cwd() / spec_path.stem
    gt = gen_campaign(camp.workload, camp.catalog, camp.n_faultfree, camp.n_per_fault, out, n_idle=camp.n_idle)
    n_faulty = sum(gt.class_sizes.values())
    print(f"campaign {camp.workload.name!r} written to {out}: {camp.n_faultfree} fault-free, {n_faulty} faulty traces, "
          f"{len(gt.class_sizes)} failure modes")
    return EXIT_OK


def cmd_analyze(args, cfg: RunConfig) -> int:
    campaign = load_campaign(args.campaign)
    result = analyze(campaign, cfg.D, Thresholds(cfg.eps_spurious, cfg.eps_missing), cfg.workers)
    out = Path(args.out) if args.out else Path(args.campaign) / "reports"
    write_reports(result, out, cfg.deterministic)
    failed = [r for r in result.reports if r.error]
    print(f"{len(result.reports)} experiments analyzed, reports in {out}")
    metrics = result.metrics()
    if metrics:
        for rep, m in metrics.items():
            print(f"  {rep}: hit_rate={_fmt(m['hit_rate'])} false_alarm_rate={_fmt(m['false_alarm_rate'])}")
    if failed:
        for r in failed:
            print(f"  {r.experiment_id}: {r.error}", file=sys.stderr)
        return EXIT_ANALYSIS
    return EXIT_OK


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.4f}"


def cmd_cluster(args, cfg: RunConfig) -> int:
    reports, table, _ = load_reports(args.reports)
    usable = [r for r in reports if r.error is None]
    if len(usable) < 2:
        raise CampaignError(f"need at least 2 analyzed experiments to cluster, found {len(usable)}")
    vectors = build_vectors(usable, table.d, cfg.representation)
    k_min, k_max = cfg.k_range
    selected = k_min != k_max
    if selected:
        k, curve, results = select_k(vectors, k_min, k_max, cfg.seed)
        result = results[k]
    else:
        result = kmedoids(vectors, k_min, cfg.seed)
        result.global_silhouette = silhouette(vectors, result)
        curve = [(k_min, result.global_silhouette)]
    gt_path = Path(args.ground_truth) if args.ground_truth else Path(args.reports)
    gt = load_ground_truth(gt_path)
    pur = modes = None
    if gt is not None:
        modes = mode_labels(gt)
        pur = purity(result, modes)
    doc = cluster_document(
        result, curve, usable, representation=cfg.representation, seed=cfg.seed,
        k_range=cfg.k_range, selected=selected, purity=pur, modes=modes,
    )
    out = Path(args.out) if args.out else Path(args.reports) / "cluster"
    labels = [table.label(s) for s in range(table.d)]
    write_cluster_report(doc, usable, labels, out)
    print(f"K* = {result.K} (global silhouette {_fmt(result.global_silhouette)}), report in {out / 'index.html'}")
    if pur is not None:
        print(f"purity = {pur.overall:.4f}")
    return EXIT_OK


def cmd_metrics(args, cfg: RunConfig) -> int:
    reports, table, _ = load_reports(args.reports)
    gt = load_ground_truth(args.ground_truth)
    if gt is None:
        raise UsageError(f"ground truth not found: {args.ground_truth}")
    truth = truth_in_symbols(gt, table)
    ok = [r for r in reports if r.error is None]
    _print_json({rep.value: score_metrics(ok, truth, rep).to_dict() for rep in (Representation.LCS, Representation.VMM)})
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tracefault", description="Trace-diff failure analysis for fault-injection campaigns.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    p.add_argument("--deterministic", action="store_const", const=True, default=None,
                   help="omit wall-clock fields from outputs")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic campaign from a TOML spec")
    g.add_argument("spec")
    g.add_argument("--out", help="campaign directory (default: ./<spec name>)")
    g.add_argument("--seed", type=int, help="override the seed in the spec file")

    a = sub.add_parser("analyze", help="detect anomalies in every faulty trace of a campaign")
    a.add_argument("campaign")
    a.add_argument("--d", dest="D", type=int, help=f"maximum VMM order (default {DEFAULT_ORDER})")
    a.add_argument("--eps-spurious", type=float, help="spurious threshold (default 0.20)")
    a.add_argument("--eps-missing", type=float, help="missing threshold (default 0.80)")
    a.add_argument("--workers", type=int, help="analysis threads (default 1)")
    a.add_argument("--out", help="reports directory (default: <campaign>/reports)")

    c = sub.add_parser("cluster", help="group experiments into failure modes")
    c.add_argument("reports")
    c.add_argument("--k-range", type=_k_range_arg, help="A..B; A == B forces K (default 2..20)")
    c.add_argument("--representation", choices=[r.value for r in Representation])
    c.add_argument("--seed", type=int)
    c.add_argument("--ground-truth", help="ground_truth.json (default: the copy in the reports directory)")
    c.add_argument("--out", help="output directory (default: <reports>/cluster)")

    m = sub.add_parser("metrics", help="hit and false-alarm rates against ground truth")
    m.add_argument("reports")
    m.add_argument("ground_truth")
    return p


def _k_range_arg(text: str) -> tuple[int, int]:
    try:
        return parse_k_range(text)
    except UsageError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


COMMANDS = {"generate": cmd_generate, "analyze": cmd_analyze, "cluster": cmd_cluster, "metrics": cmd_metrics}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except UsageError as exc:
        print(f"tracefault: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SpecError as exc:
        print(f"tracefault: invalid spec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CampaignError, TraceError, UnknownEventError, ValueError, KeyError, OSError) as exc:
        print(f"tracefault: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
