"""Zone risk labelling: k-means on (mean damage ratio, claim count), cluster
ordering by expected-count x expected-ratio, and minority-level merging."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .model import DataError, ZoneSummary

log = logging.getLogger(__name__)

MAX_ITER = 300
HIGH_IMBALANCE = 100.0


@dataclass(frozen=True)
class Clustering:
    k: int
    centroids: np.ndarray  # (k, 2), standardized space
    assignment: dict[str, int]
    wcss: float
    mean: np.ndarray
    scale: np.ndarray
    history: tuple[float, ...] = ()  # wcss after each Lloyd iteration

    def standardize(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.mean) / self.scale


@dataclass(frozen=True)
class ClusterStat:
    cluster: int
    expected_count: float
    expected_ratio: float
    risk_value: float
    member_count: int


def _standardize(P: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mean = P.mean(axis=0)
    scale = P.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return (P - mean) / scale, mean, scale


def _sqdist(Z: np.ndarray, C: np.ndarray) -> np.ndarray:
    return ((Z[:, None, :] - C[None, :, :]) ** 2).sum(axis=2)


def _wcss(Z, C, labels) -> float:
    return float(((Z - C[labels]) ** 2).sum())


def _kmeanspp(Z: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(Z)
    centers = [Z[rng.integers(n)]]
    d2 = ((Z - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(np.searchsorted(np.cumsum(d2), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(Z[idx])
        d2 = np.minimum(d2, ((Z - Z[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def lloyd(Z: np.ndarray, centers: np.ndarray, max_iter: int = MAX_ITER):
    """Run Lloyd iterations from ``centers``. Returns (centers, labels, wcss history).

    An emptied cluster keeps its previous centroid.
    """
    C = centers.copy()
    labels = None
    history = []
    for _ in range(max_iter):
        new = np.argmin(_sqdist(Z, C), axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for j in range(len(C)):
            members = Z[labels == j]
            if len(members):
                C[j] = members.mean(axis=0)
        history.append(_wcss(Z, C, labels))
    return C, labels, history


def _prepare(points) -> tuple[list[str], np.ndarray]:
    if not points:
        raise DataError("k-means needs at least one point")
    ids = [p[0] for p in points]
    P = np.array([p[1] for p in points], dtype=float).reshape(len(ids), -1)
    return ids, P


def _check_k(P: np.ndarray, k: int):
    distinct = len(np.unique(P, axis=0))
    if k < 1 or k > distinct:
        raise DataError(f"k={k} must be within [1, {distinct}] (distinct points)")


def _best_run(Z, k, seed, restarts, threads, extra_inits=()):
    def run(r):
        rng = np.random.default_rng(np.random.SeedSequence([seed, k, r]))
        return lloyd(Z, _kmeanspp(Z, k, rng))

    if threads > 1 and restarts > 1:
        with ThreadPoolExecutor(threads) as pool:
            runs = list(pool.map(run, range(restarts)))
    else:
        runs = [run(r) for r in range(restarts)]
    runs += [lloyd(Z, init) for init in extra_inits]
    scored = [(_wcss(Z, C, lab), i) for i, (C, lab, _) in enumerate(runs)]
    _, best = min(scored)
    return runs[best]


def kmeans(points: Sequence[tuple[str, Sequence[float]]], k: int, seed: int = 0,
           restarts: int = 10, threads: int = 1) -> Clustering:
    """Best-of-``restarts`` k-means++ / Lloyd clustering on z-scored points."""
    if restarts < 1:
        raise DataError("restarts must be >= 1")
    ids, P = _prepare(points)
    _check_k(P, k)
    Z, mean, scale = _standardize(P)
    C, labels, history = _best_run(Z, k, seed, restarts, threads)
    return Clustering(k, C, dict(zip(ids, map(int, labels))), _wcss(Z, C, labels),
                      mean, scale, tuple(history))


def elbow_curve(points, k_range: range | Sequence[int], seed: int = 0,
                restarts: int = 10, threads: int = 1) -> list[tuple[int, float]]:
    """WCSS for each k. Each k > min also tries the best (k-1) centroids plus
    the worst-fit point, so the curve cannot rise."""
    ids, P = _prepare(points)
    ks = sorted(k_range)
    for k in ks:
        _check_k(P, k)
    Z, _, _ = _standardize(P)
    out = []
    prev = None
    for k in ks:
        inits = []
        if prev is not None and prev[0].shape[0] == k - 1:
            C, lab = prev
            d2 = ((Z - C[lab]) ** 2).sum(axis=1)
            inits.append(np.vstack([C, Z[int(np.argmax(d2))]]))
        C, lab, _ = _best_run(Z, k, seed, restarts, threads, inits)
        prev = (C, lab)
        out.append((k, _wcss(Z, C, lab)))
    return out


def cluster_stats(clustering: Clustering, summaries: Sequence[ZoneSummary]) -> list[ClusterStat]:
    groups: dict[int, list[ZoneSummary]] = {j: [] for j in range(clustering.k)}
    for s in summaries:
        try:
            groups[clustering.assignment[s.zone_id]].append(s)
        except KeyError:
            raise DataError(f"zone {s.zone_id!r} missing from cluster assignment") from None
    out = []
    for j, members in groups.items():
        if not members:
            out.append(ClusterStat(j, 0.0, 0.0, 0.0, 0))
            continue
        count = float(np.mean([m.claim_count for m in members]))
        ratio = float(np.mean([m.mean_damage_ratio for m in members]))
        out.append(ClusterStat(j, count, ratio, count * ratio, len(members)))
    return out


def level_order(stats: Sequence[ClusterStat]) -> list[int]:
    """Cluster indices in ascending risk order (ties: lower ratio, then lower index)."""
    return [s.cluster for s in sorted(stats, key=lambda s: (s.risk_value, s.expected_ratio, s.cluster))]


def assign_levels(stats: Sequence[ClusterStat], no_claims_zones: Sequence[str],
                  clustering: Clustering) -> tuple[dict[str, int], int]:
    """Ordinal per zone: 0 for no-claims zones, 1..k by ascending risk value."""
    ordinal = {c: i + 1 for i, c in enumerate(level_order(stats))}
    labels = {z: 0 for z in no_claims_zones}
    for z, c in clustering.assignment.items():
        labels[z] = ordinal[c]
    return labels, clustering.k + 1


def merge_minority(level_counts: Mapping[int, int], target_levels: int,
                   centroids: Mapping[int, Sequence[float]],
                   partners: Mapping[int, int] | None = None) -> dict[int, int]:
    """Fold the smallest level into a risk-adjacent neighbour until ``target_levels`` remain.

    The neighbour is the one with the nearer centroid unless ``partners`` names
    one for that (original) ordinal. Merged centroids are membership-weighted.
    Returns old ordinal -> new dense ordinal.
    """
    if target_levels < 2:
        raise DataError("target_levels must be >= 2")
    if len(level_counts) < target_levels:
        raise DataError(f"{len(level_counts)} levels cannot be merged up to {target_levels}")
    partners = dict(partners or {})
    # each group: (representative ordinal, members, count, centroid)
    groups = [
        [o, [o], level_counts[o], np.asarray(centroids[o], dtype=float)]
        for o in sorted(level_counts)
    ]
    while len(groups) > target_levels:
        i = min(range(len(groups)), key=lambda g: (groups[g][2], g))
        neighbours = [j for j in (i - 1, i + 1) if 0 <= j < len(groups)]
        wanted = next((partners[m] for m in groups[i][1] if m in partners), None)
        if wanted is not None:
            hit = [j for j in neighbours if wanted in groups[j][1]]
            if not hit:
                raise DataError(f"merge partner {wanted} is not risk-adjacent to level {groups[i][0]}")
            j = hit[0]
        else:
            dist = [float(np.sum((groups[j][3] - groups[i][3]) ** 2)) for j in neighbours]
            j = neighbours[int(np.argmin(dist))]
        a, b = groups[min(i, j)], groups[max(i, j)]
        n = a[2] + b[2]
        w = (a[2] / n, b[2] / n) if n else (0.5, 0.5)
        merged = [a[0], a[1] + b[1], n, w[0] * a[3] + w[1] * b[3]]
        log.info("merging level(s) %s into %s", groups[i][1], groups[j][1])
        groups[min(i, j)] = merged
        del groups[max(i, j)]
    return {m: new for new, g in enumerate(groups) for m in g[1]}


def imbalance(level_counts: Mapping[int, int]) -> dict:
    counts = list(level_counts.values())
    hi, lo = max(counts), min(counts)
    ratio = lo / hi if hi else 0.0
    return {
        "minority_to_majority": ratio,
        "majority_to_minority": (hi / lo) if lo else None,
        "high_imbalance": lo == 0 or hi / lo >= HIGH_IMBALANCE,
    }


@dataclass
class LabelingResult:
    labels: dict[str, int]
    level_count: int
    report: dict = field(default_factory=dict)


def label_zones(summaries: Sequence[ZoneSummary], all_zones: Sequence[str] = (),
                k: int = 4, target_levels: int = 4, seed: int = 0, restarts: int = 10,
                partners: Mapping[int, int] | None = None, threads: int = 1) -> LabelingResult:
    """Claims summaries to final ordinal labels, with a JSON-ready report."""
    points = [(s.zone_id, (s.mean_damage_ratio, float(s.claim_count))) for s in summaries]
    clustering = kmeans(points, k, seed=seed, restarts=restarts, threads=threads)
    stats = cluster_stats(clustering, summaries)
    claimed = {s.zone_id for s in summaries}
    no_claims = sorted(z for z in all_zones if z not in claimed)
    raw, n_levels = assign_levels(stats, no_claims, clustering)

    order = level_order(stats)
    by_cluster = {s.cluster: s for s in stats}
    counts = {o: 0 for o in range(n_levels)}
    for v in raw.values():
        counts[v] += 1
    centroids = {0: clustering.standardize([0.0, 0.0]).tolist()}
    for i, c in enumerate(order):
        centroids[i + 1] = clustering.centroids[c].tolist()
    risk = {0: 0.0}
    risk.update({i + 1: by_cluster[c].risk_value for i, c in enumerate(order)})

    if target_levels < n_levels:
        mapping = merge_minority(counts, target_levels, centroids, partners)
    else:
        mapping = {o: o for o in counts}
    labels = {z: mapping[v] for z, v in sorted(raw.items())}
    final = max(mapping.values()) + 1
    merged_counts = {o: 0 for o in range(final)}
    for v in labels.values():
        merged_counts[v] += 1

    report = {
        "k": k,
        "wcss": clustering.wcss,
        "standardization": {"mean": clustering.mean.tolist(), "scale": clustering.scale.tolist()},
        "initial_levels": [
            {"level": o, "count": counts[o], "risk_value": risk[o],
             "expected_count": by_cluster[order[o - 1]].expected_count if o else 0.0,
             "expected_ratio": by_cluster[order[o - 1]].expected_ratio if o else 0.0}
            for o in range(n_levels)
        ],
        "initial_imbalance": imbalance(counts),
        "merge_mapping": {str(o): n for o, n in sorted(mapping.items())},
        "levels": [{"level": o, "count": merged_counts[o]} for o in range(final)],
        "imbalance": imbalance(merged_counts),
    }
    return LabelingResult(labels, final, report)
