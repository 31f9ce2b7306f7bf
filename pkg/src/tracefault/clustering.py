"""Failure-mode discovery by K-Medoids over anomaly count vectors."""
from __future__ import annotations

import random
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .detector import AnomalyReport, FAULTY_SIDE, Label, MISSING_SIDE, Representation, SPURIOUS_SIDE

MAX_ITER = 100
N_INIT = 10


@dataclass(frozen=True)
class FeatureVector:
    experiment_id: str
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


def build_vectors(
    reports: Sequence[AnomalyReport], d: int, representation: Representation | str = Representation.VMM
) -> list[FeatureVector]:
    """Per-experiment count vectors.

    VMM and LCS give ``2d`` entries (spurious counts per symbol, then missing counts
    per symbol); VMM counts confirmed anomalies only, LCS every alignment difference.
    SEQ gives ``d`` raw occurrence counts of each symbol in the faulty trace.
    """
    rep = Representation(representation)
    out = []
    for r in reports:
        if rep is Representation.SEQ:
            v = np.zeros(d)
            for ev in r.events:
                if ev.label in FAULTY_SIDE:
                    v[ev.symbol] += 1
        else:
            v = np.zeros(2 * d)
            spurious = SPURIOUS_SIDE if rep is Representation.LCS else {Label.SPURIOUS}
            missing = MISSING_SIDE if rep is Representation.LCS else {Label.MISSING}
            for ev in r.events:
                if ev.label in spurious:
                    v[ev.symbol] += 1
                elif ev.label in missing:
                    v[d + ev.symbol] += 1
        out.append(FeatureVector(r.experiment_id, v))
    return out


def _matrix(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        return np.asarray(vectors, dtype=float)
    return np.vstack([v.values if isinstance(v, FeatureVector) else np.asarray(v, float) for v in vectors])


def _ids(vectors) -> list[str]:
    if isinstance(vectors, np.ndarray):
        return [str(i) for i in range(len(vectors))]
    return [v.experiment_id if isinstance(v, FeatureVector) else str(i) for i, v in enumerate(vectors)]


def sq_distances(X: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances (exact zeros on duplicates)."""
    out = np.empty((len(X), len(X)))
    for i, row in enumerate(X):
        delta = X - row
        out[i] = np.einsum("ij,ij->i", delta, delta)
    return out


@dataclass
class ClusterResult:
    K: int
    labels: np.ndarray
    medoid_indices: list[int]
    experiment_ids: list[str]
    objective_history: list[float] = field(default_factory=list)
    iterations: int = 0
    global_silhouette: float | None = None

    @property
    def assignments(self) -> dict[str, int]:
        return {eid: int(c) for eid, c in zip(self.experiment_ids, self.labels)}

    @property
    def medoids(self) -> list[str]:
        return [self.experiment_ids[i] for i in self.medoid_indices]

    @property
    def objective(self) -> float:
        return self.objective_history[-1]

    def members(self, k: int) -> list[int]:
        return [i for i, c in enumerate(self.labels) if c == k]


def _distinct_count(X: np.ndarray) -> int:
    return len(np.unique(X, axis=0))


def _farthest_point_init(dist: np.ndarray, X: np.ndarray, K: int, rng: random.Random) -> list[int]:
    # one representative (lowest index) per distinct vector
    _, first = np.unique(X, axis=0, return_index=True)
    candidates = sorted(int(i) for i in first)
    chosen = [candidates[rng.randrange(len(candidates))]]
    nearest = dist[chosen[0]].copy()
    while len(chosen) < K:
        # argmax returns the lowest index on ties
        nxt = max(candidates, key=lambda i: (nearest[i], -i))
        chosen.append(nxt)
        nearest = np.minimum(nearest, dist[nxt])
    return chosen


def _assign(dist: np.ndarray, medoids: list[int]) -> np.ndarray:
    return np.argmin(dist[:, medoids], axis=1)


def _alternate(dist: np.ndarray, medoids: list[int], K: int, max_iter: int) -> tuple[list[int], np.ndarray, list[float], int]:
    labels = _assign(dist, medoids)
    rows = np.arange(len(dist))
    history = [float(dist[rows, np.asarray(medoids)[labels]].sum())]
    it = 0
    for it in range(1, max_iter + 1):
        new = []
        for k in range(K):
            members = np.flatnonzero(labels == k)
            within = dist[np.ix_(members, members)].sum(axis=1)
            new.append(int(members[np.argmin(within)]))
        if new == medoids:
            break
        medoids = new
        labels = _assign(dist, medoids)
        history.append(float(dist[rows, np.asarray(medoids)[labels]].sum()))
    return medoids, labels, history, it


def kmedoids(vectors, K: int, seed: int = 0, max_iter: int = MAX_ITER, n_init: int = N_INIT) -> ClusterResult:
    """Alternating K-Medoids on squared Euclidean distance.

    Each run starts from a seeded random distinct vector and adds the farthest
    remaining distinct vectors until ``K`` medoids are chosen; it then alternates
    nearest-medoid assignment with per-cluster medoid updates until the medoids stop
    changing. ``n_init`` runs with different starts are made and the one with the
    lowest objective kept (earliest on ties).
    """
    X = _matrix(vectors)
    n_distinct = _distinct_count(X)
    if K < 1:
        raise ValueError("K must be positive")
    if K > n_distinct:
        raise ValueError(f"K={K} exceeds the number of distinct vectors ({n_distinct})")
    if n_init < 1:
        raise ValueError("n_init must be positive")
    dist = sq_distances(X)
    rng = random.Random(seed)
    best = None
    tried = set()
    for _ in range(n_init):
        init = _farthest_point_init(dist, X, K, rng)
        if tuple(init) in tried:
            continue
        tried.add(tuple(init))
        run = _alternate(dist, init, K, max_iter)
        if best is None or run[2][-1] < best[2][-1]:
            best = run
    medoids, labels, history, it = best
    return ClusterResult(K, labels, medoids, _ids(vectors), history, it)


def silhouette_widths(dist: np.ndarray, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    clusters = np.unique(labels)
    n = len(labels)
    s = np.zeros(n)
    sizes = {c: int((labels == c).sum()) for c in clusters}
    # per-point summed distance to each cluster
    sums = np.stack([dist[:, labels == c].sum(axis=1) for c in clusters], axis=1)
    for i in range(n):
        own = np.searchsorted(clusters, labels[i])
        if sizes[labels[i]] == 1:
            continue
        a = sums[i, own] / (sizes[labels[i]] - 1)
        b = min(sums[i, k] / sizes[c] for k, c in enumerate(clusters) if k != own)
        m = max(a, b)
        s[i] = (b - a) / m if m > 0 else 0.0
    return s


def silhouette(vectors, result: ClusterResult | np.ndarray) -> float:
    """Global silhouette: mean over clusters of the mean width within each cluster."""
    X = _matrix(vectors)
    labels = result.labels if isinstance(result, ClusterResult) else np.asarray(result)
    clusters = np.unique(labels)
    if len(clusters) < 2:
        raise ValueError("silhouette needs at least two clusters")
    widths = silhouette_widths(sq_distances(X), labels)
    return float(np.mean([widths[labels == c].mean() for c in clusters]))


def select_k(vectors, k_min: int = 2, k_max: int = 20, seed: int = 0) -> tuple[int, list[tuple[int, float]], dict[int, ClusterResult]]:
    """Run K-Medoids for each K in range and pick the silhouette argmax (smallest K on ties).

    K values above the number of distinct vectors are skipped. Returns the chosen K,
    the (K, silhouette) curve and the clustering for every K tried.
    """
    if k_min < 2 or k_max < k_min:
        raise ValueError(f"invalid K range {k_min}..{k_max}")
    X = _matrix(vectors)
    top = min(k_max, _distinct_count(X))
    if top < k_min:
        raise ValueError(f"only {_distinct_count(X)} distinct vectors; cannot form {k_min} clusters")
    curve, results = [], {}
    for K in range(k_min, top + 1):
        res = kmedoids(vectors, K, seed)
        res.global_silhouette = silhouette(X, res)
        curve.append((K, res.global_silhouette))
        results[K] = res
    best = max(curve, key=lambda kv: (kv[1], -kv[0]))[0]
    return best, curve, results


@dataclass(frozen=True)
class PurityResult:
    overall: float
    per_cluster: dict[int, float]
    majority: dict[int, str]


def purity(result: ClusterResult | Mapping[str, int], ground_truth: Mapping[str, str]) -> PurityResult:
    """Size-weighted mean over clusters of the fraction held by the cluster's majority class."""
    assignments = result.assignments if isinstance(result, ClusterResult) else dict(result)
    by_cluster: dict[int, Counter] = {}
    for eid, k in assignments.items():
        if eid not in ground_truth:
            raise KeyError(f"no ground-truth class for experiment {eid!r}")
        by_cluster.setdefault(k, Counter())[ground_truth[eid]] += 1
    n = len(assignments)
    per, major = {}, {}
    total = 0
    for k in sorted(by_cluster):
        counts = by_cluster[k]
        cls, top = min(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        per[k] = top / sum(counts.values())
        major[k] = cls
        total += top
    return PurityResult(total / n if n else 0.0, per, major)


def cluster_summary(result: ClusterResult, reports: Sequence[AnomalyReport], top: int = 3) -> list[dict]:
    """Most frequent confirmed spurious and missing symbols per cluster."""
    by_id = {r.experiment_id: r for r in reports}
    out = []
    for k in range(result.K):
        members = [result.experiment_ids[i] for i in result.members(k)]
        spur, miss = Counter(), Counter()
        for eid in members:
            for ev in by_id[eid].events:
                if ev.label is Label.SPURIOUS:
                    spur[ev.symbol] += 1
                elif ev.label is Label.MISSING:
                    miss[ev.symbol] += 1
        rank = lambda c: sorted(c.items(), key=lambda kv: (-kv[1], kv[0]))[:top]
        out.append({
            "cluster": k,
            "size": len(members),
            "medoid": result.medoids[k],
            "top_spurious": [[s, c] for s, c in rank(spur)],
            "top_missing": [[s, c] for s, c in rank(miss)],
        })
    return out
