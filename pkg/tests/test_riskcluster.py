import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from floodprone.model import DataError, ZoneSummary
from floodprone.riskcluster import (ClusterStat, assign_levels, cluster_stats, elbow_curve,
                                    imbalance, kmeans, label_zones, lloyd, merge_minority)

# Initial / merged per-level zone counts and the stated merge partner per metro area.
PUBLISHED = {
    "houston": ({0: 282, 1: 1720, 2: 833, 3: 181, 4: 5}, {4: 3}, [282, 1720, 833, 186]),
    "miami": ({0: 1134, 1: 199, 2: 1915, 3: 156, 4: 16}, {4: 3}, [1134, 199, 1915, 172]),
    "new_orleans": ({0: 14, 1: 602, 2: 304, 3: 165, 4: 25}, {0: 1}, [616, 304, 165, 25]),
    "new_york": ({0: 9301, 1: 3836, 2: 108, 3: 946, 4: 185}, {2: 1}, [9301, 3944, 946, 185]),
}


def _pts(arr):
    return [(f"z{i}", tuple(p)) for i, p in enumerate(np.asarray(arr, dtype=float))]


def test_well_separated_pairs():
    c = kmeans(_pts([(0, 0), (0, 1), (10, 10), (10, 11)]), 2, seed=0, restarts=3)
    a = c.assignment
    assert a["z0"] == a["z1"] and a["z2"] == a["z3"] and a["z0"] != a["z2"]


def test_k_one_and_k_n():
    P = np.random.default_rng(0).normal(size=(12, 2)) * [1, 50]
    c1 = kmeans(_pts(P), 1)
    assert np.allclose(c1.centroids[0], 0, atol=1e-12)
    # z-scored data: total sum of squares is n per dimension
    assert np.isclose(c1.wcss, 2 * len(P))
    assert kmeans(_pts(P), len(P)).wcss == pytest.approx(0.0, abs=1e-20)


def test_wcss_is_recomputable():
    P = np.random.default_rng(1).normal(size=(40, 2))
    c = kmeans(_pts(P), 3, seed=2)
    Z = c.standardize(P)
    lab = np.array([c.assignment[f"z{i}"] for i in range(len(P))])
    assert np.isclose(((Z - c.centroids[lab]) ** 2).sum(), c.wcss, rtol=1e-12)


def test_kmeans_errors():
    with pytest.raises(DataError):
        kmeans([], 1)
    with pytest.raises(DataError):
        kmeans(_pts([(0, 0), (0, 0), (1, 1)]), 3)


def test_lloyd_history_monotone():
    rng = np.random.default_rng(3)
    for _ in range(20):
        Z = rng.normal(size=(60, 2))
        _, _, hist = lloyd(Z, Z[rng.choice(60, 5, replace=False)])
        assert all(b <= a * (1 + 1e-9) for a, b in zip(hist, hist[1:]))


def test_kmeans_deterministic_across_threads():
    P = np.random.default_rng(5).normal(size=(80, 2))
    a = kmeans(_pts(P), 4, seed=9, restarts=6, threads=1)
    b = kmeans(_pts(P), 4, seed=9, restarts=6, threads=4)
    assert a.assignment == b.assignment and a.wcss == b.wcss


def test_elbow_examples():
    P = np.random.default_rng(6).normal(size=(10, 2))
    curve = elbow_curve(_pts(P), range(1, 11), seed=1, restarts=2)
    w = [v for _, v in curve]
    assert all(b <= a for a, b in zip(w, w[1:]))
    assert w[-1] == pytest.approx(0.0, abs=1e-20)
    assert elbow_curve(_pts([(3, 3)] * 5), range(1, 2)) == [(1, 0.0)]


def test_cluster_stats_examples():
    summaries = [ZoneSummary("a", 0.2, 10), ZoneSummary("b", 0.2, 10), ZoneSummary("c", 0.0, 3)]
    c = kmeans([(s.zone_id, (s.mean_damage_ratio, s.claim_count)) for s in summaries], 2, seed=0)
    stats = {s.cluster: s for s in cluster_stats(c, summaries)}
    pair = stats[c.assignment["a"]]
    assert (pair.expected_count, pair.expected_ratio, pair.risk_value, pair.member_count) == (10, 0.2, 2.0, 2)
    single = stats[c.assignment["c"]]
    assert (single.expected_count, single.expected_ratio, single.risk_value) == (3, 0.0, 0.0)
    with pytest.raises(DataError):
        cluster_stats(c, summaries + [ZoneSummary("zz", 0.1, 1)])


class _FakeClustering:
    def __init__(self, assignment, k):
        self.assignment, self.k = assignment, k


def test_assign_levels_examples():
    stats = [ClusterStat(0, 10, 0.2, 2.0, 1), ClusterStat(1, 5, 0.1, 0.5, 1)]
    labels, L = assign_levels(stats, ["none"], _FakeClustering({"a": 0, "b": 1}, 2))
    assert labels == {"a": 2, "b": 1, "none": 0} and L == 3
    tied = [ClusterStat(0, 3, 0.3, 0.9, 1), ClusterStat(1, 9, 0.1, 0.9, 1)]
    labels, _ = assign_levels(tied, [], _FakeClustering({"hi": 0, "lo": 1}, 2))
    assert labels["lo"] < labels["hi"]


def test_assign_levels_relabel_invariant():
    stats = [ClusterStat(0, 1, 0.1, 0.1, 1), ClusterStat(1, 9, 0.9, 8.1, 1), ClusterStat(2, 4, 0.5, 2.0, 1)]
    perm = {0: 2, 1: 0, 2: 1}
    moved = [ClusterStat(perm[s.cluster], *[getattr(s, f) for f in ("expected_count", "expected_ratio", "risk_value", "member_count")]) for s in stats]
    a, _ = assign_levels(stats, [], _FakeClustering({"x": 0, "y": 1, "w": 2}, 3))
    b, _ = assign_levels(moved, [], _FakeClustering({"x": 2, "y": 0, "w": 1}, 3))
    assert a == b


@pytest.mark.parametrize("name", PUBLISHED)
def test_published_merges(name):
    counts, partners, expected = PUBLISHED[name]
    dummy = {o: (float(o), float(o)) for o in counts}
    mapping = merge_minority(counts, 4, dummy, partners)
    merged = [0] * 4
    for old, n in counts.items():
        merged[mapping[old]] += n
    assert merged == expected


def test_nearest_centroid_partner_choice():
    counts = {0: 100, 1: 50, 2: 5, 3: 80}
    near_low = {0: (0, 0), 1: (1, 1), 2: (1.1, 1.1), 3: (5, 5)}
    assert merge_minority(counts, 3, near_low) == {0: 0, 1: 1, 2: 1, 3: 2}
    near_high = {0: (0, 0), 1: (1, 1), 2: (4.9, 4.9), 3: (5, 5)}
    assert merge_minority(counts, 3, near_high) == {0: 0, 1: 1, 2: 2, 3: 2}


def test_non_adjacent_partner_rejected():
    with pytest.raises(DataError):
        merge_minority({0: 10, 1: 10, 2: 1}, 2, {o: (o, o) for o in range(3)}, {2: 0})


@settings(max_examples=100)
@given(st.lists(st.integers(0, 1000), min_size=2, max_size=8), st.integers(2, 8), st.randoms())
def test_merge_preserves_total_and_order(counts, target, rnd):
    target = min(target, len(counts))
    level_counts = dict(enumerate(counts))
    cents = {o: (rnd.random(), rnd.random()) for o in level_counts}
    m = merge_minority(level_counts, target, cents)
    assert sorted(set(m.values())) == list(range(target))
    assert all(m[a] <= m[b] for a, b in zip(range(len(counts)), range(1, len(counts))))
    merged = [0] * target
    for o, n in level_counts.items():
        merged[m[o]] += n
    assert sum(merged) == sum(counts)


@pytest.mark.parametrize("name, ratio", [("houston", 0.003), ("miami", 0.008),
                                         ("new_orleans", 0.023), ("new_york", 0.012)])
def test_published_imbalance_ratios(name, ratio):
    assert round(imbalance(PUBLISHED[name][0])["minority_to_majority"], 3) == ratio


def test_imbalance_report():
    assert imbalance({0: 282, 1: 1720, 2: 833, 3: 181, 4: 5})["high_imbalance"]
    assert not imbalance({0: 10, 1: 20})["high_imbalance"]


def test_label_zones_end_to_end():
    rng = np.random.default_rng(8)
    summaries = [ZoneSummary(f"z{i:03d}", float(r), int(c))
                 for i, (r, c) in enumerate(zip(rng.uniform(0, 1, 120), rng.integers(1, 200, 120)))]
    zones = [s.zone_id for s in summaries] + ["dry1", "dry2"]
    res = label_zones(summaries, zones, k=4, target_levels=4, seed=1)
    assert res.level_count == 4
    assert set(res.labels) == set(zones)
    assert res.labels["dry1"] == 0
    assert sum(lv["count"] for lv in res.report["levels"]) == len(zones)
