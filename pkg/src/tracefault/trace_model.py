"""Events, traces, trace-file ingestion and the campaign symbol dictionary.

Trace files are JSON Lines, one event per line::

    {"ts_us": 120, "sender": "nova-api", "api": "create_server", "status": "202", "dur_us": 35}

and live under ``<campaign>/<kind>/<trace_id>.jsonl`` with kind one of
``faultfree``, ``faulty`` or ``idle``.
"""
from __future__ import annotations

import enum
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

log = logging.getLogger(__name__)

# wire name -> domain name, in the order fields are validated
RECORD_FIELDS = {
    "ts_us": "timestamp_us",
    "sender": "sender",
    "api": "service_api",
    "status": "response_status",
    "dur_us": "duration_us",
}

EventKey = tuple[str, str, str]


class TraceError(ValueError):
    """Malformed or unusable trace input."""


class TraceParseError(TraceError):
    def __init__(self, message: str, path: Path | str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        super().__init__(message)


class UnknownEventError(KeyError):
    """An event type was looked up in a frozen symbol table that does not contain it."""

    def __str__(self) -> str:
        return f"event type not in frozen symbol table: {self.args[0]!r}"


class EmptySequenceWarning(UserWarning):
    pass


class TraceKind(str, enum.Enum):
    FAULT_FREE = "faultfree"
    FAULTY = "faulty"
    IDLE = "idle"


@dataclass(frozen=True)
class Event:
    timestamp_us: int
    sender: str
    service_api: str
    response_status: str
    duration_us: int = 0

    def __post_init__(self):
        if not self.sender:
            raise TraceError("sender must be non-empty")
        if not self.service_api:
            raise TraceError("service_api must be non-empty")
        if self.timestamp_us < 0:
            raise TraceError(f"negative timestamp {self.timestamp_us}")
        if self.duration_us < 0:
            raise TraceError(f"negative duration {self.duration_us}")

    @property
    def key(self) -> EventKey:
        return (self.sender, self.service_api, self.response_status)

    def to_record(self) -> dict:
        return {
            "ts_us": self.timestamp_us,
            "sender": self.sender,
            "api": self.service_api,
            "status": self.response_status,
            "dur_us": self.duration_us,
        }


@dataclass(frozen=True)
class Trace:
    trace_id: str
    kind: TraceKind
    events: tuple[Event, ...]

    @classmethod
    def from_events(cls, trace_id: str, kind: TraceKind | str, events: Iterable[Event]) -> "Trace":
        # sorted() is stable, so equal timestamps keep ingestion order
        ordered = tuple(sorted(events, key=lambda e: e.timestamp_us))
        return cls(trace_id, TraceKind(kind), ordered)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)


@dataclass(frozen=True)
class SymbolSequence:
    trace_id: str
    symbols: tuple[int, ...]

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self) -> Iterator[int]:
        return iter(self.symbols)

    def __getitem__(self, item):
        return self.symbols[item]


def parse_record(line: str, lineno: int, path: Path | str | None = None) -> Event:
    where = f" at line {lineno}"
    try:
        rec = json.loads(line)
    except json.JSONDecodeError as exc:
        raise TraceParseError(f"invalid JSON{where}: {exc.msg}", path, lineno) from None
    if not isinstance(rec, dict):
        raise TraceParseError(f"record is not an object{where}", path, lineno)
    for wire, name in RECORD_FIELDS.items():
        if wire not in rec:
            raise TraceParseError(f"missing field {name}{where}", path, lineno)
    extra = set(rec) - set(RECORD_FIELDS)
    if extra:
        raise TraceParseError(f"unexpected field(s) {sorted(extra)}{where}", path, lineno)
    for wire in ("ts_us", "dur_us"):
        if not isinstance(rec[wire], int) or isinstance(rec[wire], bool):
            raise TraceParseError(f"field {RECORD_FIELDS[wire]} must be an integer{where}", path, lineno)
    for wire in ("sender", "api", "status"):
        if not isinstance(rec[wire], str):
            raise TraceParseError(f"field {RECORD_FIELDS[wire]} must be a string{where}", path, lineno)
    try:
        return Event(rec["ts_us"], rec["sender"], rec["api"], rec["status"], rec["dur_us"])
    except TraceError as exc:
        raise TraceParseError(f"{exc}{where}", path, lineno) from None


def read_trace_file(path: Path | str, kind: TraceKind | str) -> Trace:
    path = Path(path)
    events = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            events.append(parse_record(line, lineno, path))
    if not events:
        raise TraceError(f"empty trace: {path}")
    return Trace.from_events(path.stem, kind, events)


def ingest_traces(path: Path | str, kind: TraceKind | str) -> list[Trace]:
    """Load every ``*.jsonl`` trace under ``path`` (or the single file ``path``).

    Files in a directory are read in lexicographic name order; the trace id is the
    file stem.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    if path.is_file():
        return [read_trace_file(path, kind)]
    return [read_trace_file(p, kind) for p in sorted(path.glob("*.jsonl"))]


def write_trace_file(trace: Trace, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        for ev in trace.events:
            fh.write(json.dumps(ev.to_record(), separators=(", ", ": ")) + "\n")


@dataclass(frozen=True)
class SymbolTable:
    """Frozen bijection between event types and dense symbol ids."""

    keys: tuple[EventKey, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {k: i for i, k in enumerate(self.keys)}
        if len(index) != len(self.keys):
            raise ValueError("duplicate event types in symbol table")
        object.__setattr__(self, "_index", index)

    @property
    def d(self) -> int:
        return len(self.keys)

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, key) -> bool:
        return tuple(key) in self._index

    def encode(self, key: EventKey | Event) -> int:
        if isinstance(key, Event):
            key = key.key
        try:
            return self._index[tuple(key)]
        except KeyError:
            raise UnknownEventError(tuple(key)) from None

    def decode(self, symbol: int) -> EventKey:
        if not 0 <= symbol < len(self.keys):
            raise UnknownEventError(symbol)
        return self.keys[symbol]

    def label(self, symbol: int) -> str:
        sender, api, status = self.decode(symbol)
        return f"{sender}:{api}[{status}]"

    def symbolize(self, trace: Trace) -> SymbolSequence:
        return SymbolSequence(trace.trace_id, tuple(self.encode(e.key) for e in trace.events))

    def to_json(self) -> list[list[str]]:
        return [list(k) for k in self.keys]

    @classmethod
    def from_json(cls, data: Sequence[Sequence[str]]) -> "SymbolTable":
        return cls(tuple(tuple(k) for k in data))


def build_symbol_table(traces: Sequence[Trace]) -> SymbolTable:
    """Assign dense ids to event types in first-occurrence order across ``traces``."""
    if not traces:
        raise ValueError("cannot build a symbol table from zero traces")
    seen: dict[EventKey, None] = {}
    for trace in traces:
        for ev in trace.events:
            seen.setdefault(ev.key, None)
    return SymbolTable(tuple(seen))


def idle_types(idle: Trace | Iterable[Trace] | None, table: SymbolTable) -> frozenset[int]:
    if idle is None:
        return frozenset()
    if isinstance(idle, Trace):
        idle = [idle]
    return frozenset(table.encode(ev.key) for t in idle for ev in t.events)


def filter_idle(trace: Trace, idle: Trace | Iterable[Trace] | None, table: SymbolTable) -> SymbolSequence:
    """Symbolize ``trace`` and drop every event whose type occurs anywhere in ``idle``.

    Removal is by event type (all occurrences); survivors keep their order.
    """
    background = idle_types(idle, table)
    seq = table.symbolize(trace)
    kept = tuple(s for s in seq.symbols if s not in background)
    if not kept and seq.symbols:
        warnings.warn(
            f"trace {trace.trace_id} consists only of idle event types; sequence is empty",
            EmptySequenceWarning,
            stacklevel=2,
        )
    return SymbolSequence(trace.trace_id, kept)


def remove_symbols(seq: SymbolSequence, drop: frozenset[int] | set[int]) -> SymbolSequence:
    return SymbolSequence(seq.trace_id, tuple(s for s in seq.symbols if s not in drop))
