"""Development scenarios (relative feature changes) and grid-cell prediction."""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .forest import Forest, predict_level
from .ingest import EARTH_RADIUS_M
from .model import FEATURES, DataError, FeatureTable

log = logging.getLogger(__name__)

# lower/upper physical bounds; None on the lower side means "column minimum"
CLAMPS: dict[str, tuple[float | None, float]] = {name: (0.0, math.inf) for name in FEATURES}
CLAMPS["impervious"] = (0.0, 100.0)
CLAMPS["elevation"] = (None, math.inf)
CLAMPS["hand"] = (None, math.inf)


@dataclass(frozen=True)
class PerturbationSpec:
    changes: tuple[tuple[str, float], ...]

    def __post_init__(self):
        for name, rel in self.changes:
            if name not in FEATURES:
                raise DataError(f"unknown feature {name!r}")
            if not rel > -1:
                raise DataError(f"relative change for {name} must be > -1, got {rel}")

    @classmethod
    def single(cls, feature: str, relative_change: float) -> PerturbationSpec:
        return cls(((feature, relative_change),))

    @classmethod
    def parse(cls, items: Sequence[str]) -> PerturbationSpec:
        """Build from ``name=fraction`` strings, e.g. ``impervious=0.2``."""
        out = []
        for item in items:
            name, sep, value = item.partition("=")
            if not sep:
                raise DataError(f"perturbation {item!r} is not name=fraction")
            try:
                out.append((name.strip(), float(value)))
            except ValueError:
                raise DataError(f"perturbation {item!r} has a non-numeric change") from None
        return cls(tuple(out))


def perturb(features: FeatureTable, spec: PerturbationSpec) -> FeatureTable:
    """Scale each targeted column by ``1 + change`` and clamp to its physical range."""
    ids = features.zone_ids
    X = features.matrix(ids)
    for name, rel in spec.changes:
        j = FEATURES.index(name)
        lo, hi = CLAMPS[name]
        if lo is None:
            lo = float(X[:, j].min()) if len(X) else -math.inf
        col = X[:, j] * (1.0 + rel)
        clamped = np.clip(col, lo, hi)
        for i in np.flatnonzero(clamped != col):
            log.info("zone %s: %s clamped from %r to %r", ids[i], name, col[i], clamped[i])
        X[:, j] = clamped
    return FeatureTable.from_array(ids, X)


@dataclass(frozen=True)
class ScenarioReport:
    zone_ids: tuple[str, ...]
    baseline: tuple[int, ...]
    perturbed: tuple[int, ...]

    @property
    def deltas(self) -> tuple[int, ...]:
        return tuple(p - b for b, p in zip(self.baseline, self.perturbed))

    def delta_counts(self) -> dict[int, int]:
        """Zones per nonzero delta (so +1 and +2 counts are ``counts[1]``, ``counts[2]``)."""
        return dict(sorted(Counter(d for d in self.deltas if d != 0).items()))

    def to_csv(self) -> str:
        lines = ["zone_id,baseline_level,perturbed_level,delta"]
        for z, b, p in sorted(zip(self.zone_ids, self.baseline, self.perturbed)):
            lines.append(f"{z},{b},{p},{p - b}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        counts = self.delta_counts()
        return {
            "zones": len(self.zone_ids),
            "changed": sum(counts.values()),
            "delta_counts": {f"{d:+d}": n for d, n in counts.items()},
        }


def scenario_report(forest: Forest, features: FeatureTable, spec: PerturbationSpec) -> ScenarioReport:
    ids = features.zone_ids
    base = predict_level(forest, features.matrix(ids)) if ids else np.zeros(0, int)
    moved = perturb(features, spec)
    after = predict_level(forest, moved.matrix(ids)) if ids else np.zeros(0, int)
    return ScenarioReport(tuple(ids), tuple(int(v) for v in base), tuple(int(v) for v in after))


@dataclass(frozen=True)
class CellGeometry:
    lat: float
    lon: float
    size_m: float


def cell_ring(cell: CellGeometry) -> list[list[float]]:
    """Closed counterclockwise [lon, lat] ring of a square cell (planar approximation)."""
    half = cell.size_m / 2.0
    dlat = math.degrees(half / EARTH_RADIUS_M)
    dlon = dlat / math.cos(math.radians(cell.lat))
    w, e = cell.lon - dlon, cell.lon + dlon
    s, n = cell.lat - dlat, cell.lat + dlat
    return [[w, s], [e, s], [e, n], [w, n], [w, s]]


def grid_predict(forest: Forest, grid: FeatureTable,
                 cell_geometry: Mapping[str, CellGeometry]) -> tuple[dict[str, int], dict]:
    """Risk level per cell and a GeoJSON FeatureCollection ordered by cell id."""
    ids = sorted(grid.zone_ids)
    missing = [c for c in ids if c not in cell_geometry]
    if missing:
        raise DataError(f"no geometry for cell {missing[0]!r}")
    levels = predict_level(forest, grid.matrix(ids)) if ids else []
    out = {c: int(v) for c, v in zip(ids, levels)}
    features = [
        {
            "type": "Feature",
            "id": c,
            "geometry": {"type": "Polygon", "coordinates": [cell_ring(cell_geometry[c])]},
            "properties": {"cell_id": c, "risk_level": out[c]},
        }
        for c in ids
    ]
    return out, {"type": "FeatureCollection", "features": features}
