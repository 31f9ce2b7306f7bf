"""Anomaly classification of faulty traces against a fault-free pool.

For each experiment the most similar fault-free trace is selected as reference,
the two are diffed, and a VMM trained on the rest of the pool decides whether each
difference is anomalous: an event only in the faulty trace is spurious when it is
unlikely there (prob < eps_spurious), an event only in the reference is missing
when it is likely there (prob > eps_missing).
"""
from __future__ import annotations

import enum
import logging
import threading
import warnings
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import alignment
from .vmm import DEFAULT_ORDER, VmmModel, train

log = logging.getLogger(__name__)


class Label(str, enum.Enum):
    COMMON = "common"
    SPURIOUS = "spurious"
    MISSING = "missing"
    FILTERED_SPURIOUS = "filtered_spurious"
    FILTERED_MISSING = "filtered_missing"


FAULTY_SIDE = frozenset({Label.COMMON, Label.SPURIOUS, Label.FILTERED_SPURIOUS})
SPURIOUS_SIDE = frozenset({Label.SPURIOUS, Label.FILTERED_SPURIOUS})
MISSING_SIDE = frozenset({Label.MISSING, Label.FILTERED_MISSING})


class Representation(str, enum.Enum):
    VMM = "vmm"
    LCS = "lcs"
    SEQ = "seq"


def is_alarm(label: Label, representation: Representation | str = Representation.VMM) -> bool:
    """Whether ``label`` counts as a raised anomaly under ``representation``.

    Under LCS every alignment difference is an alarm; under VMM only confirmed ones.
    """
    if Representation(representation) is Representation.LCS:
        return label in SPURIOUS_SIDE or label in MISSING_SIDE
    return label in (Label.SPURIOUS, Label.MISSING)


@dataclass(frozen=True)
class Thresholds:
    eps_spurious: float = 0.20
    eps_missing: float = 0.80

    def __post_init__(self):
        for name in ("eps_spurious", "eps_missing"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


class PoolTooSmallError(ValueError):
    pass


@dataclass(frozen=True)
class ReportEvent:
    # faulty index for common/spurious-side labels, reference index for missing-side
    position: int
    symbol: int
    label: Label
    probability: float | None = None
    reference_position: int | None = None

    def to_dict(self) -> dict:
        d = {"position": self.position, "symbol": self.symbol, "label": self.label.value}
        if self.probability is not None:
            d["probability"] = self.probability
        if self.reference_position is not None:
            d["reference_position"] = self.reference_position
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ReportEvent":
        return cls(d["position"], d["symbol"], Label(d["label"]), d.get("probability"), d.get("reference_position"))


@dataclass
class AnomalyReport:
    experiment_id: str
    selected_reference_id: str | None
    events: list[ReportEvent] = field(default_factory=list)
    nlcs: float | None = None
    faulty_length: int = 0
    reference_length: int = 0
    degenerate: bool = False
    error: str | None = None
    warnings: list[str] = field(default_factory=list)

    def count(self, label: Label) -> int:
        return sum(1 for e in self.events if e.label is label)

    def counts(self) -> dict[str, int]:
        c = Counter(e.label.value for e in self.events)
        return {lab.value: c.get(lab.value, 0) for lab in Label}

    def alarms(self, representation: Representation | str = Representation.VMM) -> list[ReportEvent]:
        return [e for e in self.events if is_alarm(e.label, representation)]

    def faulty_symbols(self) -> list[int]:
        side = sorted((e.position, e.symbol) for e in self.events if e.label in FAULTY_SIDE)
        return [s for _, s in side]

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "selected_reference_id": self.selected_reference_id,
            "nlcs": self.nlcs,
            "faulty_length": self.faulty_length,
            "reference_length": self.reference_length,
            "degenerate": self.degenerate,
            "error": self.error,
            "warnings": list(self.warnings),
            "counts": self.counts(),
            "events": [e.to_dict() for e in self.events],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "AnomalyReport":
        return cls(
            experiment_id=d["experiment_id"],
            selected_reference_id=d.get("selected_reference_id"),
            events=[ReportEvent.from_dict(e) for e in d.get("events", [])],
            nlcs=d.get("nlcs"),
            faulty_length=d.get("faulty_length", 0),
            reference_length=d.get("reference_length", 0),
            degenerate=d.get("degenerate", False),
            error=d.get("error"),
            warnings=list(d.get("warnings", [])),
        )


def _symbols(seq) -> tuple[int, ...]:
    return tuple(getattr(seq, "symbols", seq))


def _alphabet_size(faulty, pool) -> int:
    top = max((max(_symbols(s), default=-1) for s in [faulty, *pool]), default=-1)
    return top + 1


class LeaveOneOutModels:
    """Lazily trained VMMs, one per excluded pool index.

    The model used to score an experiment depends only on which pool member was its
    reference, so models are shared across experiments.
    """

    def __init__(self, pool: Sequence, alphabet_size: int, max_order: int = DEFAULT_ORDER):
        if len(pool) < 2:
            raise PoolTooSmallError(f"need at least 2 fault-free traces, got {len(pool)}")
        self.pool = list(pool)
        self.alphabet_size = alphabet_size
        self.max_order = max_order
        self._models: dict[int, VmmModel] = {}
        self._lock = threading.Lock()
        self._key_locks: dict[int, threading.Lock] = {}

    def __getitem__(self, excluded: int) -> VmmModel:
        model = self._models.get(excluded)
        if model is not None:
            return model
        with self._lock:
            key_lock = self._key_locks.setdefault(excluded, threading.Lock())
        with key_lock:
            model = self._models.get(excluded)
            if model is None:
                rest = [s for i, s in enumerate(self.pool) if i != excluded]
                model = train(rest, self.alphabet_size, self.max_order)
                self._models[excluded] = model
            return model


def analyze_experiment(
    faulty,
    faultfree_pool: Sequence,
    thresholds: Thresholds = Thresholds(),
    D: int = DEFAULT_ORDER,
    *,
    alphabet_size: int | None = None,
    models: LeaveOneOutModels | None = None,
    experiment_id: str | None = None,
) -> AnomalyReport:
    if len(faultfree_pool) < 2:
        raise PoolTooSmallError(f"need at least 2 fault-free traces, got {len(faultfree_pool)}")
    if alphabet_size is None:
        alphabet_size = models.alphabet_size if models else _alphabet_size(faulty, faultfree_pool)
    if models is None:
        models = LeaveOneOutModels(faultfree_pool, alphabet_size, D)
    if experiment_id is None:
        experiment_id = getattr(faulty, "trace_id", "")

    x = _symbols(faulty)
    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ref_idx, similarity = alignment.select_reference(x, faultfree_pool)
    notes.extend(sorted({str(w.message) for w in caught}))
    reference = faultfree_pool[ref_idx]
    y = _symbols(reference)
    ref_id = getattr(reference, "trace_id", str(ref_idx))
    model = models[ref_idx]
    D = model.max_order

    delta = alignment.diff(x, y, ref_id)
    events = []
    for kind, i, j in delta.steps:
        if kind == alignment.COMMON:
            events.append(ReportEvent(i, x[i], Label.COMMON, reference_position=j))
        elif kind == alignment.ONLY_FAULTY:
            p = model.prob(x[i], x[max(0, i - D):i])
            label = Label.SPURIOUS if p < thresholds.eps_spurious else Label.FILTERED_SPURIOUS
            events.append(ReportEvent(i, x[i], label, p))
        else:
            p = model.prob(y[j], y[max(0, j - D):j])
            label = Label.MISSING if p > thresholds.eps_missing else Label.FILTERED_MISSING
            events.append(ReportEvent(j, y[j], label, p))

    degenerate = not x
    if degenerate:
        notes.append("faulty sequence is empty; every reference event is a missing candidate")
    return AnomalyReport(
        experiment_id=experiment_id,
        selected_reference_id=ref_id,
        events=events,
        nlcs=similarity,
        faulty_length=len(x),
        reference_length=len(y),
        degenerate=degenerate,
        warnings=notes,
    )


def analyze_campaign(
    faulty_set: Sequence,
    faultfree_pool: Sequence,
    thresholds: Thresholds = Thresholds(),
    D: int = DEFAULT_ORDER,
    *,
    alphabet_size: int | None = None,
    workers: int = 1,
) -> list[AnomalyReport]:
    """One report per faulty sequence, in input order.

    A failing experiment yields a report with ``error`` set; the batch continues.
    """
    if alphabet_size is None:
        alphabet_size = max((_alphabet_size(f, faultfree_pool) for f in faulty_set), default=1)
    models = LeaveOneOutModels(faultfree_pool, alphabet_size, D)

    def one(item):
        idx, faulty = item
        exp_id = getattr(faulty, "trace_id", str(idx))
        try:
            return analyze_experiment(faulty, faultfree_pool, thresholds, D, models=models, experiment_id=exp_id)
        except Exception as exc:  # noqa: BLE001 - recorded per experiment
            log.warning("experiment %s failed: %s", exp_id, exc)
            return AnomalyReport(exp_id, None, error=f"{type(exc).__name__}: {exc}", degenerate=True)

    items = list(enumerate(faulty_set))
    if workers <= 1:
        return [one(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, items))


# -- metrics ------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentTruth:
    """Planted anomalies of one experiment, in symbol space.

    ``spurious_positions`` index the (idle-filtered) faulty sequence. Omissions are
    identified by workload origin when the origin of every reference event is known
    (``missing_origins`` + ``reference_origins``); otherwise a reference event
    counts as an omission while the multiset ``missing_symbols`` still holds its
    symbol.
    """

    spurious_positions: frozenset[int]
    missing_symbols: tuple[int, ...] = ()
    mode_label: str | None = None
    missing_origins: frozenset[int] | None = None
    # reference trace id -> origin of each of its events; shared across experiments
    reference_origins: Mapping[str, Sequence[int | None]] | None = field(default=None, compare=False, repr=False)

    @property
    def n_anomalous(self) -> int:
        return len(self.spurious_positions) + len(self.missing_symbols)


@dataclass(frozen=True)
class Metrics:
    hits: int
    false_alarms: int
    total_anomalous: int
    total_non_anomalous: int

    @property
    def hit_rate(self) -> float | None:
        return self.hits / self.total_anomalous if self.total_anomalous else None

    @property
    def false_alarm_rate(self) -> float | None:
        return self.false_alarms / self.total_non_anomalous if self.total_non_anomalous else None

    def to_dict(self) -> dict:
        return {
            "hit_rate": self.hit_rate,
            "false_alarm_rate": self.false_alarm_rate,
            "hits": self.hits,
            "false_alarms": self.false_alarms,
            "total_anomalous": self.total_anomalous,
            "total_non_anomalous": self.total_non_anomalous,
        }


def event_truth(report: AnomalyReport, truth: ExperimentTruth) -> list[bool]:
    """Ground-truth anomaly flag for every event of ``report``, in order."""
    remaining = Counter(truth.missing_symbols)
    origins = None
    if truth.missing_origins is not None and truth.reference_origins is not None:
        origins = truth.reference_origins.get(report.selected_reference_id)
    pending = set(truth.missing_origins or ())
    flags = []
    for ev in report.events:
        if ev.label in FAULTY_SIDE:
            if ev.position >= report.faulty_length:
                raise ValueError(f"{report.experiment_id}: event position {ev.position} beyond trace")
            flags.append(ev.position in truth.spurious_positions)
        elif origins is not None:
            origin = origins[ev.position]
            flags.append(origin in pending)
            pending.discard(origin)
        elif remaining[ev.symbol] > 0:
            remaining[ev.symbol] -= 1
            flags.append(True)
        else:
            flags.append(False)
    return flags


def score_metrics(
    reports: Sequence[AnomalyReport],
    ground_truth: Mapping[str, ExperimentTruth],
    representation: Representation | str = Representation.VMM,
) -> Metrics:
    hits = false_alarms = anomalous = normal = 0
    for rep in reports:
        try:
            truth = ground_truth[rep.experiment_id]
        except KeyError:
            raise KeyError(f"no ground truth for experiment {rep.experiment_id!r}") from None
        if any(p >= rep.faulty_length for p in truth.spurious_positions):
            raise ValueError(f"{rep.experiment_id}: planted position beyond faulty trace")
        flags = event_truth(rep, truth)
        anomalous += truth.n_anomalous
        for ev, bad in zip(rep.events, flags):
            alarm = is_alarm(ev.label, representation)
            if bad:
                hits += alarm
            else:
                normal += 1
                false_alarms += alarm
    return Metrics(hits, false_alarms, anomalous, normal)
