"""Synthetic fault-injection campaigns with planted, labeled anomalies.

A workload is a fixed backbone of event symbols. Fault-free runs perturb it with
two kinds of benign non-determinism: optional events (each included with
``optional_event_prob``) and adjacent transpositions (``swap_prob`` per eligible
position). Background (idle) events may be interleaved at random; their types never
occur in the workload, so idle filtering removes them exactly. A faulty run is a
fault-free run followed by the edits of one FaultSpec, addressed by backbone index.

Randomness comes from ``random.Random`` (Mersenne Twister) seeded with strings of
the form ``"<seed>:<kind>:<index>"``; outputs are reproducible across platforms.
"""
from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from .trace_model import Event, Trace, TraceKind, write_trace_file

COMPONENTS = ("nova-api", "nova-compute", "nova-scheduler", "neutron-server", "cinder-volume", "glance-api", "keystone")
GROUND_TRUTH_FORMAT = "tracefault-ground-truth"
GROUND_TRUTH_FILE = "ground_truth.json"


class SpecError(ValueError):
    pass


def default_vocabulary(d: int) -> list[tuple[str, str, str]]:
    return [(COMPONENTS[s % len(COMPONENTS)], f"op{s:03d}", "200") for s in range(d)]


@dataclass
class Noise:
    swap_prob: float = 0.0
    optional_event_prob: float = 0.0
    # (backbone position, symbol): inserted just before backbone[position]
    optional_events: list[tuple[int, int]] = field(default_factory=list)
    # backbone positions allowed to swap with their successor; None means all
    swap_positions: list[int] | None = None
    # chance of one background event before each workload event
    idle_event_prob: float = 0.0


@dataclass
class WorkloadSpec:
    name: str
    alphabet_size: int
    backbone: list[int]
    noise: Noise = field(default_factory=Noise)
    idle_types: list[int] = field(default_factory=list)
    seed: int = 0
    vocabulary: list[tuple[str, str, str]] | None = None
    idle_trace_length: int = 20

    def __post_init__(self):
        self.backbone = [int(s) for s in self.backbone]
        self.noise.optional_events = [(int(p), int(s)) for p, s in self.noise.optional_events]
        if self.vocabulary is None:
            self.vocabulary = default_vocabulary(self.alphabet_size)
        self.vocabulary = [tuple(v) for v in self.vocabulary]
        self.validate()

    def validate(self) -> None:
        n = self.noise
        for name in ("swap_prob", "optional_event_prob", "idle_event_prob"):
            v = getattr(n, name)
            if not 0.0 <= v <= 1.0:
                raise SpecError(f"{name} must lie in [0, 1], got {v}")
        if not self.backbone:
            raise SpecError("backbone is empty")
        if len(self.vocabulary) != self.alphabet_size:
            raise SpecError(f"vocabulary has {len(self.vocabulary)} entries for alphabet of size {self.alphabet_size}")
        if len(set(self.vocabulary)) != len(self.vocabulary):
            raise SpecError("vocabulary entries must be distinct event types")
        used = set(self.backbone) | {s for _, s in n.optional_events} | set(self.idle_types)
        bad = [s for s in used if not 0 <= s < self.alphabet_size]
        if bad:
            raise SpecError(f"symbols outside alphabet: {sorted(bad)}")
        clash = set(self.idle_types) & (set(self.backbone) | {s for _, s in n.optional_events})
        if clash:
            raise SpecError(f"idle types overlap workload symbols: {sorted(clash)}")
        for p, _ in n.optional_events:
            if not 0 <= p <= len(self.backbone):
                raise SpecError(f"optional event position {p} outside 0..{len(self.backbone)}")
        if n.idle_event_prob > 0 and not self.idle_types:
            raise SpecError("idle_event_prob > 0 requires idle_types")

    def render(self, symbol: int) -> tuple[str, str, str]:
        return self.vocabulary[symbol]


@dataclass(frozen=True)
class Edit:
    op: str  # "insert" | "delete" | "replace_status"
    position: int
    symbol: int | None = None

    def __post_init__(self):
        if self.op not in ("insert", "delete", "replace_status"):
            raise SpecError(f"unknown edit op {self.op!r}")
        if self.op != "delete" and self.symbol is None:
            raise SpecError(f"{self.op} edit needs a symbol")


def Insert(position: int, symbol: int) -> Edit:
    return Edit("insert", position, symbol)


def Delete(position: int) -> Edit:
    return Edit("delete", position)


def ReplaceStatus(position: int, symbol: int) -> Edit:
    return Edit("replace_status", position, symbol)


@dataclass(frozen=True)
class FaultSpec:
    mode_label: str
    edits: tuple[Edit, ...]

    def validate(self, spec: WorkloadSpec) -> None:
        n = len(spec.backbone)
        touched = set()
        for e in self.edits:
            limit = n if e.op == "insert" else n - 1
            if not 0 <= e.position <= limit:
                raise SpecError(f"{self.mode_label}: {e.op} position {e.position} outside 0..{limit}")
            if e.symbol is not None:
                if not 0 <= e.symbol < spec.alphabet_size:
                    raise SpecError(f"{self.mode_label}: symbol {e.symbol} outside alphabet")
                if e.symbol in spec.idle_types:
                    raise SpecError(f"{self.mode_label}: symbol {e.symbol} is an idle type")
            if e.op != "insert":
                if e.position in touched:
                    raise SpecError(f"{self.mode_label}: position {e.position} edited twice")
                touched.add(e.position)


@dataclass(frozen=True)
class PlantedEvent:
    position: int  # filtered faulty index (spurious) or backbone index (missing)
    symbol: int


@dataclass(frozen=True)
class FaultTruth:
    mode_label: str
    spurious: tuple[PlantedEvent, ...]
    missing: tuple[PlantedEvent, ...]


# -- trace synthesis ------------------------------------------------------------

# (symbol, backbone origin or None, planted spurious?)
_Slot = tuple[int, "int | None", bool]


def _noisy_workload(spec: WorkloadSpec, rng: random.Random) -> list[_Slot]:
    noise = spec.noise
    optional: dict[int, list[int]] = {}
    for p, s in noise.optional_events:
        optional.setdefault(p, []).append(s)
    seq: list[_Slot] = []
    for p in range(len(spec.backbone) + 1):
        for s in optional.get(p, ()):
            if rng.random() < noise.optional_event_prob:
                seq.append((s, None, False))
        if p < len(spec.backbone):
            seq.append((spec.backbone[p], p, False))
    if noise.swap_prob > 0:
        eligible = None if noise.swap_positions is None else set(noise.swap_positions)
        i = 0
        while i < len(seq) - 1:
            origin = seq[i][1]
            if (eligible is None or origin in eligible) and rng.random() < noise.swap_prob:
                seq[i], seq[i + 1] = seq[i + 1], seq[i]
                i += 2
            else:
                i += 1
    return seq


def _apply_edits(seq: list[_Slot], spec: WorkloadSpec, fault: FaultSpec) -> tuple[list[_Slot], list[PlantedEvent]]:
    inserts: dict[int, list[int]] = {}
    changes: dict[int, Edit] = {}
    for e in fault.edits:
        if e.op == "insert":
            inserts.setdefault(e.position, []).append(e.symbol)
        else:
            changes[e.position] = e
    out: list[_Slot] = []
    missing = []
    for sym, origin, planted in seq:
        if origin is not None:
            for s in inserts.pop(origin, ()):
                out.append((s, None, True))
            change = changes.get(origin)
            if change is not None:
                missing.append(PlantedEvent(origin, sym))
                if change.op == "replace_status":
                    out.append((change.symbol, None, True))
                continue
        out.append((sym, origin, planted))
    for s in inserts.pop(len(spec.backbone), ()):
        out.append((s, None, True))
    missing.sort(key=lambda m: m.position)
    return out, missing


def _render(spec: WorkloadSpec, trace_id: str, kind: TraceKind, seq: list[_Slot], rng: random.Random) -> Trace:
    events = []
    t = rng.randint(0, 999)
    for sym, _, _ in seq:
        if spec.noise.idle_event_prob and rng.random() < spec.noise.idle_event_prob:
            t += rng.randint(20, 400)
            events.append(_event(spec, rng.choice(spec.idle_types), t, rng))
        t += rng.randint(20, 400)
        events.append(_event(spec, sym, t, rng))
    return Trace(trace_id, kind, tuple(events))


def _event(spec: WorkloadSpec, sym: int, t: int, rng: random.Random) -> Event:
    sender, api, status = spec.render(sym)
    return Event(t, sender, api, status, rng.randint(5, 300))


def _rng(spec: WorkloadSpec, kind: str, index: int) -> random.Random:
    return random.Random(f"{spec.seed}:{kind}:{index}")


def faultfree_run(spec: WorkloadSpec, index: int) -> tuple[Trace, tuple[int | None, ...]]:
    """One fault-free run and the backbone origin of each of its workload events.

    Origins are listed in idle-filtered order; optional events have origin None.
    """
    rng = _rng(spec, "faultfree", index)
    seq = _noisy_workload(spec, rng)
    trace = _render(spec, f"ff-{index:04d}", TraceKind.FAULT_FREE, seq, rng)
    return trace, tuple(origin for _, origin, _ in seq)


def gen_faultfree(spec: WorkloadSpec, count: int, start: int = 0) -> list[Trace]:
    """``count`` independent noisy runs of the workload."""
    if count < 1:
        raise ValueError("count must be at least 1")
    return [faultfree_run(spec, i)[0] for i in range(start, start + count)]


def gen_idle(spec: WorkloadSpec, index: int = 0) -> Trace:
    """Background activity only: ``idle_trace_length`` random idle-type events."""
    if not spec.idle_types:
        raise SpecError("workload has no idle types")
    rng = _rng(spec, "idle", index)
    events, t = [], rng.randint(0, 999)
    for _ in range(spec.idle_trace_length):
        t += rng.randint(1000, 20000)
        events.append(_event(spec, rng.choice(spec.idle_types), t, rng))
    return Trace(f"idle-{index:04d}", TraceKind.IDLE, tuple(events))


def gen_faulty(spec: WorkloadSpec, fault: FaultSpec, index: int = 0, trace_id: str | None = None) -> tuple[Trace, FaultTruth]:
    """One faulty run: noise first, then the fault's edits.

    Each Insert plants a spurious event, each Delete a missing one, and each
    ReplaceStatus one of each. Spurious positions index the idle-filtered sequence.
    """
    fault.validate(spec)
    rng = _rng(spec, "faulty", index)
    seq, missing = _apply_edits(_noisy_workload(spec, rng), spec, fault)
    spurious = tuple(PlantedEvent(i, sym) for i, (sym, _, planted) in enumerate(seq) if planted)
    trace = _render(spec, trace_id or f"exp-{index:05d}", TraceKind.FAULTY, seq, rng)
    return trace, FaultTruth(fault.mode_label, spurious, tuple(missing))


@dataclass
class GroundTruth:
    campaign: str
    seed: int
    experiments: dict[str, FaultTruth]
    vocabulary: list[tuple[str, str, str]]
    # fault-free trace id -> backbone origin per workload event (None: optional event)
    faultfree_origins: dict[str, tuple[int | None, ...]] = field(default_factory=dict)

    @property
    def class_sizes(self) -> dict[str, int]:
        sizes: dict[str, int] = {}
        for t in self.experiments.values():
            sizes[t.mode_label] = sizes.get(t.mode_label, 0) + 1
        return dict(sorted(sizes.items()))

    def to_dict(self) -> dict:
        def ev(p: PlantedEvent, key: str) -> dict:
            sender, api, status = self.vocabulary[p.symbol]
            return {key: p.position, "sender": sender, "api": api, "status": status}

        return {
            "format": GROUND_TRUTH_FORMAT,
            "version": 1,
            "campaign": self.campaign,
            "seed": self.seed,
            "class_sizes": self.class_sizes,
            "experiments": {
                eid: {
                    "mode": t.mode_label,
                    "spurious": [ev(p, "position") for p in t.spurious],
                    "missing": [ev(p, "backbone_position") for p in t.missing],
                }
                for eid, t in self.experiments.items()
            },
            "faultfree_origins": {tid: list(o) for tid, o in self.faultfree_origins.items()},
        }

    def save(self, path: Path | str) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")


@dataclass
class CampaignSpec:
    workload: WorkloadSpec
    catalog: list[FaultSpec]
    n_faultfree: int = 20
    n_per_fault: int = 25
    n_idle: int = 1


def gen_campaign(
    spec: WorkloadSpec,
    fault_catalog: Sequence[FaultSpec],
    n_faultfree: int,
    n_per_fault: int,
    out_dir: Path | str,
    n_idle: int = 1,
) -> GroundTruth:
    """Write a campaign directory (faultfree/, faulty/, idle/, ground_truth.json)."""
    if not fault_catalog:
        raise SpecError("fault catalog is empty")
    for fault in fault_catalog:
        fault.validate(spec)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if n_faultfree < 1:
            raise SpecError("n_faultfree must be at least 1")
        origins = {}
        for i in range(n_faultfree):
            trace, origins[f"ff-{i:04d}"] = faultfree_run(spec, i)
            write_trace_file(trace, out / "faultfree" / f"{trace.trace_id}.jsonl")
        if spec.idle_types:
            for i in range(n_idle):
                trace = gen_idle(spec, i)
                write_trace_file(trace, out / "idle" / f"{trace.trace_id}.jsonl")
        experiments = {}
        index = 0
        for fault in fault_catalog:
            for _ in range(n_per_fault):
                trace, truth = gen_faulty(spec, fault, index)
                write_trace_file(trace, out / "faulty" / f"{trace.trace_id}.jsonl")
                experiments[trace.trace_id] = truth
                index += 1
        gt = GroundTruth(spec.name, spec.seed, experiments, list(spec.vocabulary), origins)
        gt.save(out / GROUND_TRUTH_FILE)
        (out / "workload.json").write_text(json.dumps(_spec_dict(spec, fault_catalog), indent=1) + "\n", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"failed writing campaign under {out}: {exc}") from exc
    return gt


def _spec_dict(spec: WorkloadSpec, catalog: Sequence[FaultSpec]) -> dict:
    d = asdict(spec)
    d["faults"] = [{"mode": f.mode_label, "edits": [asdict(e) for e in f.edits]} for f in catalog]
    return d


# -- random workloads and fault catalogs ------------------------------------------


def random_workload(
    seed: int,
    *,
    n_symbols: int = 50,
    backbone_length: int = 150,
    noisy_fraction: float = 0.0,
    noisy_block: int = 12,
    swap_prob: float = 0.0,
    optional_density: float = 0.0,
    optional_event_prob: float = 0.0,
    n_idle_types: int = 3,
    idle_event_prob: float = 0.0,
    name: str | None = None,
) -> WorkloadSpec:
    """A random backbone whose non-determinism is confined to asynchronous blocks.

    Roughly ``noisy_fraction`` of backbone positions fall in contiguous blocks of
    ``noisy_block`` events; only those positions may swap, and optional events are
    placed only before them (``optional_density`` slots per noisy position).
    """
    rng = random.Random(f"{seed}:workload")
    backbone = [rng.randrange(n_symbols) for _ in range(backbone_length)]
    noisy: set[int] = set()
    target = int(round(noisy_fraction * backbone_length))
    while len(noisy) < target:
        start = rng.randrange(backbone_length)
        noisy.update(range(start, min(backbone_length, start + noisy_block)))
    noisy_sorted = sorted(noisy)
    optional = []
    if noisy_sorted and optional_density > 0:
        n_opt = max(1, int(round(optional_density * len(noisy_sorted))))
        for p in sorted(rng.sample(noisy_sorted, min(n_opt, len(noisy_sorted)))):
            optional.append((p, rng.randrange(n_symbols)))
    idle = list(range(n_symbols, n_symbols + n_idle_types))
    vocab = default_vocabulary(n_symbols)
    vocab += [("periodic-task", f"sync_info_{i}", "200") for i in range(n_idle_types)]
    return WorkloadSpec(
        name=name or f"random-{seed}",
        alphabet_size=len(vocab),
        backbone=backbone,
        noise=Noise(
            swap_prob=swap_prob,
            optional_event_prob=optional_event_prob,
            optional_events=optional,
            swap_positions=noisy_sorted,
            idle_event_prob=idle_event_prob,
        ),
        idle_types=idle,
        seed=seed,
        vocabulary=vocab,
    )


def stable_positions(spec: WorkloadSpec, margin: int = 6) -> list[int]:
    """Backbone positions with no non-determinism within ``margin`` events before them.

    Also excludes the first ``margin`` positions, whose context is short.
    """
    n = len(spec.backbone)
    swap = set(range(n)) if spec.noise.swap_positions is None else set(spec.noise.swap_positions)
    if spec.noise.swap_prob == 0:
        swap = set()
    unstable = set(swap) | {p + 1 for p in swap}
    if spec.noise.optional_event_prob > 0:
        unstable |= {p for p, _ in spec.noise.optional_events}
    out = []
    for p in range(margin, n - 1):
        if not any(q in unstable for q in range(p - margin, p + 2)):
            out.append(p)
    return out


def _error_variant(spec: WorkloadSpec, sym: int, tag: str) -> int:
    sender, api, _ = spec.vocabulary[sym]
    key = (sender, f"{api}{tag}", "500")
    if key in spec.vocabulary:
        return spec.vocabulary.index(key)
    spec.vocabulary.append(key)
    spec.alphabet_size += 1
    return spec.alphabet_size - 1


def random_fault_catalog(
    spec: WorkloadSpec,
    n_modes: int,
    seed: int,
    *,
    edits_per_mode: tuple[int, int] = (3, 6),
    margin: int = 6,
) -> list[FaultSpec]:
    """Distinct failure modes planted at stable backbone positions.

    Omissions (Delete, ReplaceStatus) are only planted on events whose type does not
    recur within ``3 * margin`` backbone positions, so the omitted event is
    unambiguous to an aligner. Extends ``spec``'s vocabulary with the error events
    the modes emit, so each mode has its own exception signature.
    """
    rng = random.Random(f"{seed}:catalog")
    bb = spec.backbone
    window = 3 * margin

    def recurs(p: int) -> bool:
        return bb[p] in bb[max(0, p - window):p] or bb[p] in bb[p + 1:p + 1 + window]

    stable = stable_positions(spec, margin)
    if len(stable) < n_modes * edits_per_mode[1]:
        raise SpecError(f"only {len(stable)} stable positions for {n_modes} modes")
    free = list(stable)
    rng.shuffle(free)
    catalog = []
    for m in range(n_modes):
        k = rng.randint(*edits_per_mode)
        positions = sorted(free[:k])
        del free[:k]
        edits = []
        for j, p in enumerate(positions):
            op = ("insert", "delete", "replace_status")[rng.randrange(3)] if j else "insert"
            if op != "insert" and recurs(p):
                op = "insert"
            if op == "insert":
                edits.append(Insert(p, _error_variant(spec, spec.backbone[p], f"_exc{m}")))
            elif op == "delete":
                edits.append(Delete(p))
            else:
                edits.append(ReplaceStatus(p, _error_variant(spec, spec.backbone[p], "")))
        catalog.append(FaultSpec(f"mode-{m}", tuple(edits)))
    spec.validate()
    return catalog


def random_campaign(
    seed: int,
    n_modes: int = 4,
    *,
    n_faultfree: int = 20,
    n_per_fault: int = 25,
    edits_per_mode: tuple[int, int] = (3, 6),
    **workload_kw,
) -> CampaignSpec:
    spec = random_workload(seed, **workload_kw)
    catalog = random_fault_catalog(spec, n_modes, seed, edits_per_mode=edits_per_mode)
    return CampaignSpec(spec, catalog, n_faultfree, n_per_fault)


# Noise level under which plain LCS flags roughly a third of the fault-free
# differences as anomalies; used by the detection and clustering benchmarks.
CALIBRATED_NOISE = dict(
    noisy_fraction=0.55,
    swap_prob=0.4,
    optional_density=1.0,
    optional_event_prob=0.5,
    backbone_length=200,
    idle_event_prob=0.03,
)
