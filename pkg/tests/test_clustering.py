import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_silhouette
from tracefault.clustering import (
    FeatureVector,
    build_vectors,
    cluster_summary,
    kmedoids,
    purity,
    select_k,
    silhouette,
    sq_distances,
)
from tracefault.detector import AnomalyReport, Label, ReportEvent, Representation


def rep(eid, events):
    return AnomalyReport(eid, "ref", [ReportEvent(i, s, lab) for i, (lab, s) in enumerate(events)])


def planted(rng, k, per, dim=6, spread=0.5, gap=30.0):
    centers = rng.normal(scale=gap, size=(k, dim))
    X = np.vstack([c + rng.uniform(-spread, spread, size=(per, dim)) for c in centers])
    labels = np.repeat(np.arange(k), per)
    return X, labels


def test_build_vectors_worked_example():
    S, M = Label.SPURIOUS, Label.MISSING
    r = rep("e", [(S, 0), (S, 1), (M, 1), (M, 1), (M, 2), (M, 2), (M, 2)])
    (v,) = build_vectors([r], 3, Representation.VMM)
    assert v.values.tolist() == [1, 1, 0, 0, 2, 3]
    assert v.values[:3].sum() == r.count(S) and v.values[3:].sum() == r.count(M)


def test_build_vectors_representations():
    C, FS, FM, S = Label.COMMON, Label.FILTERED_SPURIOUS, Label.FILTERED_MISSING, Label.SPURIOUS
    r = rep("e", [(C, 0), (C, 0), (FS, 1), (S, 2), (FM, 0)])
    vmm, lcs, seq = (build_vectors([r], 3, x)[0].values.tolist() for x in ("vmm", "lcs", "seq"))
    assert vmm == [0, 0, 1, 0, 0, 0]
    assert lcs == [0, 1, 1, 1, 0, 0]
    # SEQ counts every event of the faulty trace: AABC
    assert seq == [2, 1, 1]
    empty = rep("z", [(C, 0), (C, 1)])
    assert not build_vectors([empty], 3, "vmm")[0].values.any()
    assert not build_vectors([empty], 3, "lcs")[0].values.any()


def test_kmedoids_two_clouds():
    rng = np.random.default_rng(0)
    X, labels = planted(rng, 2, 15)
    res = kmedoids(X, 2, seed=3)
    assert purity(res, {str(i): int(l) for i, l in enumerate(labels)}).overall == 1.0


def test_kmedoids_structure_and_determinism():
    rng = np.random.default_rng(5)
    X = rng.integers(0, 4, size=(40, 5)).astype(float)
    res = kmedoids(X, 4, seed=1)
    dist = sq_distances(X)
    assert sorted(set(res.labels.tolist())) == [0, 1, 2, 3]
    for k, m in enumerate(res.medoid_indices):
        members = res.members(k)
        assert m in members
        within = dist[np.ix_(members, members)].sum(axis=1)
        assert within[members.index(m)] == within.min()
    assert all(b <= a for a, b in zip(res.objective_history, res.objective_history[1:]))
    assert 1 <= res.iterations <= 100
    again = kmedoids(X, 4, seed=1)
    assert again.labels.tolist() == res.labels.tolist() and again.medoids == res.medoids


def test_kmedoids_duplicates_and_distinct_limit():
    X = np.array([[0, 0], [0, 0], [5, 5], [5, 5], [9, 0]], float)
    res = kmedoids(X, 3, seed=0)
    assert res.labels[0] == res.labels[1] and res.labels[2] == res.labels[3]
    assert len(set(res.medoid_indices)) == 3
    with pytest.raises(ValueError):
        kmedoids(X, 4)


def test_kmedoids_accepts_feature_vectors():
    vecs = [FeatureVector("a", [0, 0]), FeatureVector("b", [0, 1]), FeatureVector("c", [9, 9])]
    res = kmedoids(vecs, 2)
    assert res.assignments["a"] == res.assignments["b"] != res.assignments["c"]


def test_silhouette_examples():
    X = np.array([[0, 0]] * 3 + [[10, 10]] * 3, float)
    assert silhouette(X, np.array([0, 0, 0, 1, 1, 1])) == 1.0
    same = np.zeros((4, 2))
    assert silhouette(same, np.array([0, 0, 1, 1])) == 0.0
    with pytest.raises(ValueError):
        silhouette(X, np.zeros(6, int))


def test_silhouette_singleton_is_zero():
    X = np.array([[0.0], [1.0], [10.0]])
    assert silhouette(X, np.array([0, 0, 1])) == pytest.approx(brute_silhouette(X.tolist(), [0, 0, 1]))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 5))
def test_silhouette_matches_bruteforce(seed, k):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 5, size=(30, 3)).astype(float)
    labels = rng.integers(0, k, size=30)
    if len(set(labels.tolist())) < 2:
        return
    assert silhouette(X, labels) == pytest.approx(brute_silhouette(X.tolist(), labels.tolist()), abs=1e-12)


def test_select_k_planted_four():
    rng = np.random.default_rng(2)
    X, _ = planted(rng, 4, 10)
    k, curve, results = select_k(X, 2, 10, seed=0)
    assert k == 4
    assert [c[0] for c in curve] == list(range(2, 11))
    assert results[4].global_silhouette == dict(curve)[4]


def test_select_k_tight_blob_gives_k_min():
    # a blob with no more distinct vectors than k_min admits only K = k_min
    X = np.array([[1.0, 1.0]] * 12 + [[1.0, 1.5]] * 3)
    k, curve, _ = select_k(X, 2, 20)
    assert k == 2 and len(curve) == 1


def test_select_k_tie_prefers_smallest():
    # both K=2 and K=3 separate identical groups perfectly
    X = np.array([[0.0]] * 4 + [[50.0]] * 4 + [[100.0]] * 4)
    k, curve, _ = select_k(X, 2, 3)
    assert dict(curve)[3] == 1.0
    assert k == (2 if dict(curve)[2] == 1.0 else 3)
    with pytest.raises(ValueError):
        select_k(X, 1, 3)


def test_planted_partition_fifty_seeds():
    dim, spread = 6, 1.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        k = int(rng.integers(2, dim + 1))
        # centers on distinct axes: pairwise gap 60*sqrt(2), cluster diameter <= 2*sqrt(dim)
        centers = 60.0 * np.eye(dim)[rng.permutation(dim)[:k]]
        X = np.vstack([c + rng.uniform(-spread, spread, size=(int(rng.integers(3, 12)), dim)) for c in centers])
        # every point sits within spread of its own center, so nearest center is its class
        truth_labels = np.argmin(((X[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)
        assert 60.0 * np.sqrt(2) >= 10 * 2 * spread * np.sqrt(dim)
        res = kmedoids(X, k, seed=seed)
        truth = {str(i): int(l) for i, l in enumerate(truth_labels)}
        assert purity(res, truth).overall == 1.0, seed


def test_purity_examples():
    truth = {"a": "x", "b": "x", "c": "y", "d": "y", "e": "y"}
    assert purity({"a": 0, "b": 0, "c": 1, "d": 1, "e": 1}, truth).overall == 1.0
    assert purity({k: 0 for k in truth}, truth).overall == pytest.approx(3 / 5)
    # cluster 0 = {a, c}: majority 1 of 2; cluster 1 = {b, d, e}: 2 of 3
    p = purity({"a": 0, "c": 0, "b": 1, "d": 1, "e": 1}, truth)
    assert p.overall == pytest.approx((1 + 2) / 5)
    assert p.per_cluster == {0: 0.5, 1: pytest.approx(2 / 3)}
    with pytest.raises(KeyError):
        purity({"zz": 0}, truth)


@given(st.lists(st.tuples(st.integers(0, 3), st.sampled_from("xyz")), min_size=1, max_size=30), st.permutations([0, 1, 2, 3]))
def test_purity_permutation_invariant(pairs, perm):
    assign = {f"e{i}": k for i, (k, _) in enumerate(pairs)}
    truth = {f"e{i}": c for i, (_, c) in enumerate(pairs)}
    relabeled = {e: perm[k] for e, k in assign.items()}
    assert purity(assign, truth).overall == pytest.approx(purity(relabeled, truth).overall)


def test_cluster_summary_lists_top_anomalies():
    S, M = Label.SPURIOUS, Label.MISSING
    reports = [rep("a", [(S, 4), (S, 4), (M, 1)]), rep("b", [(S, 4)]), rep("c", [(M, 2), (M, 2)])]
    vecs = build_vectors(reports, 5)
    res = kmedoids(vecs, 2, seed=0)
    summary = cluster_summary(res, reports)
    by_size = {s["size"]: s for s in summary}
    assert by_size[2]["top_spurious"][0] == [4, 3]
    assert by_size[1]["top_missing"] == [[2, 2]]
