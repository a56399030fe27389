"""Shared domain types: claims, zone summaries, feature tables and risk levels."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

FEATURES: tuple[str, ...] = (
    "vapor_pressure",
    "hand",
    "elevation",
    "impervious",
    "building_area",
    "distance_to_coast",
    "foundation_height",
    "distance_to_stream",
    "building_age",
    "roughness",
)
N_FEATURES = len(FEATURES)

LEVEL_NAMES: tuple[str, ...] = ("low", "medium", "high", "extreme")


class DataError(ValueError):
    """Input data broke a documented rule. ``location`` points at the offending spot."""

    def __init__(self, message: str, location: str | None = None):
        self.message = message
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


@dataclass(frozen=True)
class ClaimRecord:
    zone_id: str
    loss_year: int
    building_damage_amount: float
    building_property_value: float

    def __post_init__(self):
        if not self.building_property_value > 0:
            raise DataError("building_property_value must be > 0")
        if not self.building_damage_amount >= 0:
            raise DataError("building_damage_amount must be >= 0")
        if not 1900 <= self.loss_year <= 2100:
            raise DataError("loss_year must be within [1900, 2100]")


@dataclass(frozen=True)
class InflationTable:
    base_year: int
    multipliers: Mapping[int, float]

    def __post_init__(self):
        for year, m in self.multipliers.items():
            if not m > 0:
                raise DataError(f"multiplier for {year} must be > 0")
        if self.multipliers.get(self.base_year) != 1.0:
            raise DataError(f"multiplier for base year {self.base_year} must be 1.0")


@dataclass(frozen=True)
class ZoneSummary:
    zone_id: str
    mean_damage_ratio: float
    claim_count: int


@dataclass(frozen=True)
class FeatureTable:
    """Per-zone predictor rows keyed by opaque zone id.

    Rows are kept as given; :func:`validate_feature_table` reports anything
    malformed. ``matrix()`` assumes a valid table.
    """

    rows: Mapping[str, Sequence[float]]
    feature_names: tuple[str, ...] = FEATURES

    @classmethod
    def from_array(cls, zone_ids: Sequence[str], values) -> FeatureTable:
        values = np.asarray(values, dtype=float)
        return cls({z: tuple(float(v) for v in row) for z, row in zip(zone_ids, values)})

    @property
    def zone_ids(self) -> list[str]:
        return list(self.rows)

    def matrix(self, zone_ids: Sequence[str] | None = None) -> np.ndarray:
        ids = self.zone_ids if zone_ids is None else zone_ids
        if not ids:
            return np.zeros((0, len(self.feature_names)))
        return np.array([self.rows[z] for z in ids], dtype=float)

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class RiskLevel:
    ordinal: int
    level_count: int = 4

    @property
    def name(self) -> str | None:
        if self.level_count != len(LEVEL_NAMES):
            return None
        return LEVEL_NAMES[self.ordinal]


@dataclass(frozen=True)
class LabeledDataset:
    features: FeatureTable
    labels: Mapping[str, int]
    level_count: int
    name: str = ""

    def __post_init__(self):
        missing = [z for z in self.labels if z not in self.features.rows]
        if missing:
            raise DataError(f"labelled zone {missing[0]!r} has no feature row")
        bad = [z for z, v in self.labels.items() if not 0 <= v < self.level_count]
        if bad:
            raise DataError(
                f"label {self.labels[bad[0]]} of zone {bad[0]!r} outside [0, {self.level_count})"
            )

    @property
    def zone_ids(self) -> list[str]:
        """Labelled zones in feature-table order."""
        return [z for z in self.features.rows if z in self.labels]

    def arrays(self) -> tuple[list[str], np.ndarray, np.ndarray]:
        ids = self.zone_ids
        X = self.features.matrix(ids)
        y = np.array([self.labels[z] for z in ids], dtype=np.intp)
        return ids, X, y


@dataclass(frozen=True)
class Violation:
    zone_id: str
    column: str
    rule: str


_NONNEGATIVE = ("distance_to_coast", "distance_to_stream")


def validate_feature_table(table: FeatureTable) -> list[Violation]:
    """Return every broken row invariant; an empty list means the table is valid."""
    out: list[Violation] = []
    names = tuple(table.feature_names)
    if names != FEATURES:
        for i, (got, want) in enumerate(zip(names + ("",) * N_FEATURES, FEATURES)):
            if got != want:
                out.append(Violation("*", got or f"column {i}", f"expected column {want!r}"))
                break
    for zone, row in table.rows.items():
        if len(row) != N_FEATURES:
            out.append(Violation(zone, "*", f"arity: expected {N_FEATURES} values, got {len(row)}"))
            continue
        for name, value in zip(FEATURES, row):
            if not math.isfinite(value):
                out.append(Violation(zone, name, "must be finite"))
            elif name == "impervious" and not 0 <= value <= 100:
                out.append(Violation(zone, name, "range: must be within [0, 100]"))
            elif name in _NONNEGATIVE and value < 0:
                out.append(Violation(zone, name, "range: must be >= 0"))
    return out

