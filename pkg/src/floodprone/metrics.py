"""ROC / AUC, evaluation splits, cross-validation and cross-dataset transfer."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from . import balance
from .forest import Forest, ForestParams, predict_proba, train_forest
from .model import DataError, LabeledDataset

log = logging.getLogger(__name__)

BALANCE_MODES = ("class_weight", "smote")
TEST_FRACTION = 0.3


def _binary_inputs(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=float)
    t = np.asarray(labels).astype(bool)
    if len(s) != len(t):
        raise DataError("scores and labels differ in length")
    if t.all() or not t.any():
        raise DataError("ROC needs both positive and negative labels")
    return s, t


def _roc_counts(scores, labels):
    """Cumulative (false positives, true positives) at each distinct threshold, descending."""
    s, t = _binary_inputs(scores, labels)
    order = np.argsort(-s, kind="stable")
    s, t = s[order], t[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp = np.cumsum(t)[last]
    fp = (last + 1) - tp
    return np.r_[0, fp], np.r_[0, tp], int(t.sum()), int((~t).sum())


def roc_curve(scores, labels) -> list[tuple[float, float]]:
    fp, tp, P, N = _roc_counts(scores, labels)
    return [(f / N, p / P) for f, p in zip(fp.tolist(), tp.tolist())]


def auc_binary(scores, labels) -> float:
    """Trapezoidal ROC area, evaluated on integer counts so it is exactly the
    pairwise concordance rate (ties count one half) up to a single rounding."""
    fp, tp, P, N = _roc_counts(scores, labels)
    twice_area = int(np.sum(np.diff(fp) * (tp[1:] + tp[:-1])))
    return twice_area / (2 * P * N)


@dataclass(frozen=True)
class AucReport:
    per_class_auc: dict[int, float | None]
    macro_auc: float | None
    n_samples: int
    undefined: tuple[int, ...] = ()

    def as_dict(self) -> dict:
        return {
            "per_class_auc": {str(c): v for c, v in sorted(self.per_class_auc.items())},
            "macro_auc": self.macro_auc,
            "n_samples": self.n_samples,
            "undefined_classes": list(self.undefined),
        }


def auc_ovr(proba, labels, level_count: int | None = None) -> AucReport:
    """One-vs-rest AUC per class (score = that class's probability) and their mean.

    A class that is absent (or is every sample) has no defined AUC; it is
    reported as ``None``, left out of the macro mean, and warned about.
    """
    P = np.atleast_2d(np.asarray(proba, dtype=float))
    y = np.asarray(labels, dtype=np.intp)
    L = level_count if level_count is not None else P.shape[1]
    per, undefined = {}, []
    for c in range(L):
        pos = y == c
        if pos.all() or not pos.any():
            per[c] = None
            undefined.append(c)
            continue
        per[c] = auc_binary(P[:, c], pos)
    if undefined:
        warnings.warn(f"AUC undefined for class(es) {undefined}; excluded from macro average",
                      stacklevel=2)
    defined = [v for v in per.values() if v is not None]
    macro = float(np.mean(defined)) if defined else None
    return AucReport(per, macro, len(y), tuple(undefined))


def stratified_split(labels: Sequence[int], seed: int, test_fraction: float = TEST_FRACTION):
    """Per-class shuffled split; returns sorted (train, test) index arrays."""
    y = np.asarray(labels, dtype=np.intp)
    train, test = [], []
    for c in sorted(set(y.tolist())):
        members = np.flatnonzero(y == c)
        if len(members) < 2:
            raise DataError(f"class {c} has {len(members)} member(s); need at least 2 to split")
        rng = np.random.default_rng(np.random.SeedSequence([seed, c]))
        members = rng.permutation(members)
        n_test = min(len(members) - 1, max(1, int(round(test_fraction * len(members)))))
        test.append(members[:n_test])
        train.append(members[n_test:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def stratified_folds(labels: Sequence[int], folds: int, seed: int) -> list[np.ndarray]:
    y = np.asarray(labels, dtype=np.intp)
    if folds < 2:
        raise DataError("folds must be >= 2")
    assigned = [[] for _ in range(folds)]
    for c in sorted(set(y.tolist())):
        members = np.flatnonzero(y == c)
        if len(members) < folds:
            raise DataError(f"class {c} has {len(members)} member(s); need at least {folds}")
        rng = np.random.default_rng(np.random.SeedSequence([seed, c, folds]))
        for i, m in enumerate(rng.permutation(members)):
            assigned[i % folds].append(m)
    return [np.sort(np.array(a, dtype=np.intp)) for a in assigned]


def fit(X, y, params: ForestParams, balance_mode: str, level_count: int,
        threads: int = 1, k_neighbors: int = balance.DEFAULT_K_NEIGHBORS) -> Forest:
    """Train a forest with the chosen imbalance remedy applied to (X, y)."""
    if balance_mode == "class_weight":
        return train_forest(X, y, balance.balanced_weights(y), params, level_count, threads=threads)
    if balance_mode == "smote":
        Xs, ys = balance.smote(X, y, k_neighbors=k_neighbors, seed=params.seed)
        return train_forest(Xs, ys, None, params, level_count, threads=threads)
    raise DataError(f"unknown balance mode {balance_mode!r}; expected one of {BALANCE_MODES}")


@dataclass(frozen=True)
class SplitResult:
    forest: Forest
    report: AucReport
    train_ids: list[str]
    test_ids: list[str]


def split_dataset(dataset: LabeledDataset, split_seed: int):
    ids, X, y = dataset.arrays()
    tr, te = stratified_split(y, split_seed)
    return ids, X, y, tr, te


def run_split(dataset: LabeledDataset, params: ForestParams, balance_mode: str = "class_weight",
              split_seed: int = 0, threads: int = 1) -> SplitResult:
    ids, X, y, tr, te = split_dataset(dataset, split_seed)
    forest = fit(X[tr], y[tr], params, balance_mode, dataset.level_count, threads)
    report = auc_ovr(predict_proba(forest, X[te]), y[te], dataset.level_count)
    return SplitResult(forest, report, [ids[i] for i in tr], [ids[i] for i in te])


def evaluate_split(dataset: LabeledDataset, params: ForestParams,
                   balance_mode: str = "class_weight", split_seed: int = 0,
                   threads: int = 1) -> AucReport:
    """Stratified 70/30 split, balance the training part, train, score the test part."""
    return run_split(dataset, params, balance_mode, split_seed, threads).report


def compare_balance_modes(dataset: LabeledDataset, params: ForestParams, split_seed: int = 0,
                          threads: int = 1) -> dict[str, AucReport]:
    return {m: evaluate_split(dataset, params, m, split_seed, threads) for m in BALANCE_MODES}


@dataclass(frozen=True)
class CVResult:
    best: ForestParams
    scores: list[tuple[ForestParams, float]] = field(default_factory=list)


def cross_validate(X, y, params_grid: Sequence[ForestParams], level_count: int, folds: int = 5,
                   balance_mode: str = "class_weight", seed: int = 0,
                   threads: int = 1) -> CVResult:
    """Stratified k-fold over the grid; highest mean macro AUC wins, first listed on ties."""
    if not params_grid:
        raise DataError("empty parameter grid")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=np.intp)
    parts = stratified_folds(y, folds, seed)
    scores = []
    for params in params_grid:
        aucs = []
        for i, held in enumerate(parts):
            train = np.sort(np.concatenate([p for j, p in enumerate(parts) if j != i]))
            forest = fit(X[train], y[train], params, balance_mode, level_count, threads)
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                macro = auc_ovr(predict_proba(forest, X[held]), y[held], level_count).macro_auc
            aucs.append(np.nan if macro is None else macro)
        scores.append((params, float(np.nanmean(aucs))))
        log.info("cv %s -> %.4f", params, scores[-1][1])
    best = max(range(len(scores)), key=lambda i: (scores[i][1], -i))
    return CVResult(scores[best][0], scores)


def expand_grid(base: ForestParams, grid: Mapping[str, Sequence[int]]) -> list[ForestParams]:
    """Cartesian product of grid values over ``base``, in listed order."""
    out = [base]
    for key, values in grid.items():
        out = [replace(p, **{key: v}) for p in out for v in values]
    return out


@dataclass(frozen=True)
class TransferMatrix:
    names: tuple[str, ...]
    matrix: tuple[tuple[float | None, ...], ...]

    def to_csv(self) -> str:
        def cell(v):
            return "" if v is None else repr(v)
        lines = ["source," + ",".join(self.names)]
        for name, row in zip(self.names, self.matrix):
            lines.append(name + "," + ",".join(cell(v) for v in row))
        return "\n".join(lines) + "\n"


def transfer_matrix(datasets: Mapping[str, LabeledDataset], params: ForestParams,
                    balance_mode: str = "class_weight", split_seed: int = 0,
                    threads: int = 1) -> TransferMatrix:
    """Train on each source's training split, score every target's test split.

    A dataset that cannot be split leaves its row and column undefined.
    """
    names = tuple(datasets)
    splits, forests = {}, {}
    for name, ds in datasets.items():
        try:
            splits[name] = split_dataset(ds, split_seed)
        except DataError as exc:
            log.warning("dataset %s: %s", name, exc)
            continue
        _, X, y, tr, _ = splits[name]
        forests[name] = fit(X[tr], y[tr], params, balance_mode, ds.level_count, threads)
    rows = []
    for src in names:
        row = []
        for dst in names:
            if src not in forests or dst not in splits:
                row.append(None)
                continue
            _, X, y, _, te = splits[dst]
            forest = forests[src]
            L = max(forest.level_count, datasets[dst].level_count)
            proba = predict_proba(forest, X[te])
            if proba.shape[1] < L:
                proba = np.pad(proba, ((0, 0), (0, L - proba.shape[1])))
            row.append(auc_ovr(proba, y[te], L).macro_auc)
        rows.append(tuple(row))
    return TransferMatrix(names, tuple(rows))
