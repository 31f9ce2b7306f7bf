"""Campaign-level orchestration: load a campaign directory, analyze, persist reports."""
from __future__ import annotations

import json
import logging
import shutil
import time
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping

from .detector import (
    AnomalyReport,
    ExperimentTruth,
    Representation,
    Thresholds,
    analyze_campaign,
    score_metrics,
)
from .simulator import GROUND_TRUTH_FILE
from .trace_model import (
    SymbolSequence,
    SymbolTable,
    Trace,
    TraceKind,
    build_symbol_table,
    filter_idle,
    idle_types,
    ingest_traces,
)
from .vmm import DEFAULT_ORDER

log = logging.getLogger(__name__)

SUMMARY_FILE = "summary.json"
SYMBOLS_FILE = "symbols.json"
EXPERIMENTS_DIR = "experiments"


class CampaignError(ValueError):
    pass


@dataclass
class Campaign:
    root: Path
    faultfree: list[Trace]
    faulty: list[Trace]
    idle: list[Trace]
    table: SymbolTable
    ground_truth: dict | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def idle_symbols(self) -> frozenset[int]:
        return idle_types(self.idle, self.table)

    def _filter(self, traces: list[Trace]) -> list[SymbolSequence]:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            out = [filter_idle(t, self.idle, self.table) for t in traces]
        self.warnings.extend(str(w.message) for w in caught)
        return out

    def faultfree_sequences(self) -> list[SymbolSequence]:
        return self._filter(self.faultfree)

    def faulty_sequences(self) -> list[SymbolSequence]:
        return self._filter(self.faulty)


def load_campaign(root: Path | str) -> Campaign:
    root = Path(root)
    if not root.is_dir():
        raise CampaignError(f"campaign directory not found: {root}")
    parts = {}
    for kind in TraceKind:
        sub = root / kind.value
        parts[kind] = ingest_traces(sub, kind) if sub.is_dir() else []
    if not parts[TraceKind.FAULTY]:
        raise CampaignError(f"no faulty traces under {root / 'faulty'}")
    everything = parts[TraceKind.FAULT_FREE] + parts[TraceKind.FAULTY] + parts[TraceKind.IDLE]
    table = build_symbol_table(everything)
    gt_path = root / GROUND_TRUTH_FILE
    gt = json.loads(gt_path.read_text(encoding="utf-8")) if gt_path.exists() else None
    camp = Campaign(root, parts[TraceKind.FAULT_FREE], parts[TraceKind.FAULTY], parts[TraceKind.IDLE], table, gt)
    if camp.idle:
        # idle types also used by the workload are removed all the same
        camp.warnings.append(f"{len(camp.idle_symbols)} idle event type(s) removed from all traces")
    return camp


def truth_in_symbols(ground_truth: Mapping, table: SymbolTable) -> dict[str, ExperimentTruth]:
    """Translate ``ground_truth.json`` (event types by name) into symbol space."""
    ref_origins = {tid: tuple(o) for tid, o in ground_truth.get("faultfree_origins", {}).items()} or None
    out = {}
    for eid, entry in ground_truth["experiments"].items():
        spurious = frozenset(e["position"] for e in entry["spurious"])
        missing = tuple(table.encode((e["sender"], e["api"], e["status"])) for e in entry["missing"])
        origins = frozenset(e["backbone_position"] for e in entry["missing"]) if ref_origins else None
        out[eid] = ExperimentTruth(spurious, missing, entry.get("mode"), origins, ref_origins)
    return out


def mode_labels(ground_truth: Mapping) -> dict[str, str]:
    return {eid: e["mode"] for eid, e in ground_truth["experiments"].items()}


@dataclass
class AnalysisResult:
    campaign: Campaign
    reports: list[AnomalyReport]
    config: dict
    elapsed_s: float

    def metrics(self) -> dict | None:
        if self.campaign.ground_truth is None:
            return None
        truth = truth_in_symbols(self.campaign.ground_truth, self.campaign.table)
        ok = [r for r in self.reports if r.error is None]
        return {rep.value: score_metrics(ok, truth, rep).to_dict() for rep in (Representation.LCS, Representation.VMM)}


def analyze(
    campaign: Campaign | Path | str,
    D: int = DEFAULT_ORDER,
    thresholds: Thresholds = Thresholds(),
    workers: int = 1,
) -> AnalysisResult:
    if not isinstance(campaign, Campaign):
        campaign = load_campaign(campaign)
    pool = campaign.faultfree_sequences()
    if len(pool) < 2:
        raise CampaignError(f"need at least 2 fault-free traces, found {len(pool)}")
    faulty = campaign.faulty_sequences()
    t0 = time.perf_counter()
    reports = analyze_campaign(faulty, pool, thresholds, D, alphabet_size=campaign.table.d, workers=workers)
    elapsed = time.perf_counter() - t0
    config = {"D": D, "eps_spurious": thresholds.eps_spurious, "eps_missing": thresholds.eps_missing}
    return AnalysisResult(campaign, reports, config, elapsed)


def _dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=False) + "\n", encoding="utf-8")


def write_reports(result: AnalysisResult, out_dir: Path | str, deterministic: bool = False) -> Path:
    out = Path(out_dir)
    exp_dir = out / EXPERIMENTS_DIR
    if exp_dir.exists():
        shutil.rmtree(exp_dir)
    exp_dir.mkdir(parents=True)
    camp = result.campaign
    for rep in result.reports:
        _dump(rep.to_dict(), exp_dir / f"{rep.experiment_id}.json")
    _dump({"symbols": camp.table.to_json(), "idle_symbols": sorted(camp.idle_symbols)}, out / SYMBOLS_FILE)
    if camp.ground_truth is not None:
        shutil.copyfile(camp.root / GROUND_TRUTH_FILE, out / GROUND_TRUTH_FILE)
    totals: dict[str, int] = {}
    for rep in result.reports:
        for k, v in rep.counts().items():
            totals[k] = totals.get(k, 0) + v
    summary = {
        "format": "tracefault-summary",
        "version": 1,
        "campaign": camp.root.name,
        "config": result.config,
        "alphabet_size": camp.table.d,
        "n_faultfree": len(camp.faultfree),
        "n_experiments": len(result.reports),
        "failed": [r.experiment_id for r in result.reports if r.error],
        "degenerate": [r.experiment_id for r in result.reports if r.degenerate],
        "totals": totals,
        "per_experiment": {r.experiment_id: r.counts() for r in result.reports},
        "metrics": result.metrics(),
        "warnings": sorted(set(camp.warnings)),
    }
    if not deterministic:
        summary["generated_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
        summary["elapsed_s"] = round(result.elapsed_s, 3)
    _dump(summary, out / SUMMARY_FILE)
    return out


def load_reports(reports_dir: Path | str) -> tuple[list[AnomalyReport], SymbolTable, dict]:
    root = Path(reports_dir)
    summary_path = root / SUMMARY_FILE
    if not summary_path.exists():
        raise CampaignError(f"no {SUMMARY_FILE} under {root}; run analyze first")
    summary = json.loads(summary_path.read_text(encoding="utf-8"))
    table = SymbolTable.from_json(json.loads((root / SYMBOLS_FILE).read_text(encoding="utf-8"))["symbols"])
    reports = []
    for eid in summary["per_experiment"]:
        data = json.loads((root / EXPERIMENTS_DIR / f"{eid}.json").read_text(encoding="utf-8"))
        reports.append(AnomalyReport.from_dict(data))
    return reports, table, summary


def load_ground_truth(path: Path | str) -> dict | None:
    path = Path(path)
    if path.is_dir():
        path = path / GROUND_TRUTH_FILE
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))
