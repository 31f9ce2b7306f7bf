"""Longest-common-subsequence alignment of symbol sequences.

``lcs_length`` uses the bit-parallel recurrence of Allison and Dix (one big-int
update per element of ``x``), which keeps reference selection over a pool of
fault-free traces cheap. ``diff`` fills a full suffix table with numpy and walks it
forward to materialize one LCS.
"""
from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

# step kinds in LcsDiff.steps
COMMON = "="
ONLY_FAULTY = "+"
ONLY_FAULTFREE = "-"


class DegenerateSequenceWarning(UserWarning):
    pass


def _symbols(seq) -> Sequence[Hashable]:
    return getattr(seq, "symbols", seq)


def match_masks(y: Sequence[Hashable]) -> dict[Hashable, int]:
    """Bit ``j`` of ``masks[c]`` is set iff ``y[j] == c``."""
    masks: dict[Hashable, int] = {}
    for j, c in enumerate(y):
        masks[c] = masks.get(c, 0) | (1 << j)
    return masks


def _lcs_bits(x: Sequence[Hashable], masks: dict[Hashable, int], ny: int) -> int:
    full = (1 << ny) - 1
    v = full
    for c in x:
        m = masks.get(c)
        if m is None:
            continue
        u = v & m
        v = ((v + u) | (v - u)) & full
    return ny - bin(v).count("1")


def lcs_length(x, y) -> int:
    """Length of a longest common subsequence of ``x`` and ``y``."""
    x, y = _symbols(x), _symbols(y)
    if len(y) > len(x):
        x, y = y, x
    if not y:
        return 0
    return _lcs_bits(x, match_masks(y), len(y))


def _normalize(lcs: int, lx: int, ly: int) -> float:
    if lx == 0 or ly == 0:
        warnings.warn("nLCS of an empty sequence is defined as 0", DegenerateSequenceWarning, stacklevel=3)
        return 0.0
    return lcs / math.sqrt(lx * ly)


def nlcs(x, y) -> float:
    """|LCS(x, y)| / sqrt(len(x) * len(y)); 0.0 (with a warning) if either is empty."""
    x, y = _symbols(x), _symbols(y)
    return _normalize(lcs_length(x, y), len(x), len(y))


def select_reference(faulty, pool: Sequence) -> tuple[int, float]:
    """Index and nLCS of the pool member most similar to ``faulty``.

    Ties go to the lowest index.
    """
    if not pool:
        raise ValueError("reference pool is empty")
    x = _symbols(faulty)
    masks = match_masks(x) if x else {}
    best, best_val = 0, -1.0
    for idx, member in enumerate(pool):
        y = _symbols(member)
        lcs = _lcs_bits(y, masks, len(x)) if x else 0
        val = _normalize(lcs, len(x), len(y))
        if val > best_val:
            best, best_val = idx, val
    return best, best_val


@dataclass(frozen=True)
class LcsDiff:
    selected_fault_free_id: str
    common: tuple[tuple[int, int, Hashable], ...]
    only_faulty: tuple[tuple[int, Hashable], ...]
    only_faultfree: tuple[tuple[int, Hashable], ...]
    # alignment walk in order: ("=", i, j) | ("+", i, None) | ("-", None, j)
    steps: tuple[tuple[str, int | None, int | None], ...] = ()


def suffix_table(x: Sequence[Hashable], y: Sequence[Hashable]) -> np.ndarray:
    """``T[i, j]`` = LCS length of ``x[i:]`` and ``y[j:]``."""
    nx, ny = len(x), len(y)
    dtype = np.uint16 if min(nx, ny) < 2**16 else np.uint32
    table = np.zeros((nx + 1, ny + 1), dtype=dtype)
    if nx == 0 or ny == 0:
        return table
    codes: dict[Hashable, int] = {}
    xa = np.fromiter((codes.setdefault(c, len(codes)) for c in x), dtype=np.int64, count=nx)
    ya = np.fromiter((codes.setdefault(c, len(codes)) for c in y), dtype=np.int64, count=ny)
    for i in range(nx - 1, -1, -1):
        below = table[i + 1]
        cand = np.maximum(below[:-1], below[1:] + (ya == xa[i]))
        # row value at j is the max candidate over j' >= j
        table[i, :-1] = np.maximum.accumulate(cand[::-1])[::-1]
    return table


def diff(faulty, reference, reference_id: str | None = None) -> LcsDiff:
    """Three-way split of two sequences around one LCS.

    Among all maximal common subsequences, the one whose positions in ``faulty``
    are lexicographically earliest is materialized, each matched at the earliest
    reference position that still allows a maximal LCS.
    """
    x, y = _symbols(faulty), _symbols(reference)
    if reference_id is None:
        reference_id = getattr(reference, "trace_id", "")
    table = suffix_table(x, y)
    nx, ny = len(x), len(y)
    where: dict[Hashable, list[int]] = {}
    for j, s in enumerate(y):
        where.setdefault(s, []).append(j)
    common, only_f, only_r, steps = [], [], [], []
    j = 0
    for i in range(nx):
        if j >= ny:
            only_f.append((i, x[i]))
            steps.append((ONLY_FAULTY, i, None))
            continue
        target = int(table[i, j])
        match = None
        slots = where.get(x[i], ())
        for k in slots[bisect.bisect_left(slots, j):]:
            if int(table[i + 1, k + 1]) + 1 == target:
                match = k
                break
            if int(table[i, k]) < target:
                break
        if match is None:
            only_f.append((i, x[i]))
            steps.append((ONLY_FAULTY, i, None))
            continue
        for jj in range(j, match):
            only_r.append((jj, y[jj]))
            steps.append((ONLY_FAULTFREE, None, jj))
        common.append((i, match, x[i]))
        steps.append((COMMON, i, match))
        j = match + 1
    for jj in range(j, ny):
        only_r.append((jj, y[jj]))
        steps.append((ONLY_FAULTFREE, None, jj))
    return LcsDiff(reference_id, tuple(common), tuple(only_f), tuple(only_r), tuple(steps))
