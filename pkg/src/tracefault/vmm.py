"""Variable-order Markov model estimated with PPM, escape method C.

Counts are collected for every context of length 0..D that precedes a symbol in a
training sequence (no update exclusion, contexts never span two sequences).

A query walks from the longest usable context down to the empty one. At a context
``s`` with non-excluded successor counts ``n'`` (total) and ``q'`` (distinct):

* if the target was seen after ``s`` and is not excluded, return
  ``escape * n(target|s) / (n' + q')``;
* otherwise multiply ``escape`` by ``q' / (n' + q')``, exclude the successors of
  ``s``, and go one order down.

Contexts never seen in training (or whose successors are all excluded) are
skipped at no cost. Past the empty context the remaining mass is spread uniformly
over the non-excluded alphabet. When a context's successors already cover every
symbol that is still unexcluded, nothing can be reached by escaping, so the escape
mass there is zero and the estimate is ``n(target|s) / n'``.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

FORMAT = "tracefault-vmm"
FORMAT_VERSION = 1
DEFAULT_ORDER = 5
MAX_ORDER = 8


class AlphabetError(ValueError):
    """Symbol outside the model alphabet."""


def _symbols(seq) -> Sequence[int]:
    return getattr(seq, "symbols", seq)


@dataclass
class ContextStats:
    counts: Counter
    total: int = 0

    @property
    def distinct(self) -> int:
        return len(self.counts)


class VmmModel:
    def __init__(self, alphabet_size: int, max_order: int = DEFAULT_ORDER):
        if alphabet_size < 1:
            raise ValueError("alphabet must contain at least one symbol")
        if not 1 <= max_order <= MAX_ORDER:
            raise ValueError(f"max order must be in 1..{MAX_ORDER}, got {max_order}")
        self.alphabet_size = alphabet_size
        self.max_order = max_order
        self.contexts: dict[tuple[int, ...], ContextStats] = {}

    def _check(self, sym: int) -> None:
        if not (isinstance(sym, int) and 0 <= sym < self.alphabet_size):
            raise AlphabetError(f"symbol {sym!r} outside alphabet of size {self.alphabet_size}")

    def update(self, sequence) -> None:
        seq = tuple(_symbols(sequence))
        for sym in seq:
            self._check(sym)
        D = self.max_order
        for i, sym in enumerate(seq):
            for k in range(min(i, D) + 1):
                ctx = seq[i - k:i]
                stats = self.contexts.get(ctx)
                if stats is None:
                    stats = self.contexts[ctx] = ContextStats(Counter())
                stats.counts[sym] += 1
                stats.total += 1

    def count(self, symbol: int, context: Sequence[int] = ()) -> int:
        stats = self.contexts.get(tuple(context))
        return stats.counts.get(symbol, 0) if stats else 0

    def prob(self, target: int, history: Sequence[int] = ()) -> float:
        """P(target | trailing min(len(history), D) symbols of history)."""
        self._check(target)
        history = tuple(_symbols(history))
        if len(history) > self.max_order:
            history = history[len(history) - self.max_order:]
        excluded: set[int] = set()
        escape = 1.0
        for k in range(len(history), -1, -1):
            stats = self.contexts.get(history[len(history) - k:])
            if stats is None:
                continue
            if excluded:
                live = {s: c for s, c in stats.counts.items() if s not in excluded}
                n = sum(live.values())
            else:
                live, n = stats.counts, stats.total
            q = len(live)
            if q == 0:
                continue
            reachable = self.alphabet_size - len(excluded) - q
            esc_q = q if reachable > 0 else 0
            hit = live.get(target)
            if hit:
                return escape * hit / (n + esc_q)
            escape *= esc_q / (n + esc_q)
            excluded.update(live)
        return escape / (self.alphabet_size - len(excluded))

    def distribution(self, history: Sequence[int] = ()) -> list[float]:
        return [self.prob(s, history) for s in range(self.alphabet_size)]

    def avg_log_loss(self, test) -> float:
        """Mean -log2 P(x_i | x_1..x_{i-1}) over the test sequence, in bits."""
        seq = tuple(_symbols(test))
        if not seq:
            raise ValueError("log-loss of an empty test sequence is undefined")
        total = 0.0
        for i, sym in enumerate(seq):
            total -= math.log2(self.prob(sym, seq[max(0, i - self.max_order):i]))
        return total / len(seq)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        ctxs = sorted(self.contexts.items(), key=lambda kv: (len(kv[0]), kv[0]))
        return {
            "format": FORMAT,
            "version": FORMAT_VERSION,
            "max_order": self.max_order,
            "alphabet_size": self.alphabet_size,
            "contexts": [
                [list(ctx), sorted([s, c] for s, c in stats.counts.items())] for ctx, stats in ctxs
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VmmModel":
        if data.get("format") != FORMAT:
            raise ValueError(f"not a serialized model: format={data.get('format')!r}")
        if data.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model version {data.get('version')!r}")
        model = cls(data["alphabet_size"], data["max_order"])
        for ctx, pairs in data["contexts"]:
            counts = Counter({s: c for s, c in pairs})
            model.contexts[tuple(ctx)] = ContextStats(counts, sum(counts.values()))
        return model

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def loads(cls, text: str) -> "VmmModel":
        return cls.from_dict(json.loads(text))

    def save(self, path: Path | str) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path: Path | str) -> "VmmModel":
        return cls.loads(Path(path).read_text(encoding="utf-8"))

    def __eq__(self, other) -> bool:
        if not isinstance(other, VmmModel):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def train(sequences: Iterable, alphabet_size: int, max_order: int = DEFAULT_ORDER) -> VmmModel:
    """Fit a PPM-C model on independent training sequences."""
    sequences = list(sequences)
    if not sequences:
        raise ValueError("training requires at least one sequence")
    model = VmmModel(alphabet_size, max_order)
    for seq in sequences:
        model.update(seq)
    return model


def prob(model: VmmModel, context: Sequence[int], target: int) -> float:
    return model.prob(target, context)


def avg_log_loss(model: VmmModel, test) -> float:
    return model.avg_log_loss(test)
