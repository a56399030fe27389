"""CSV schemas for feature tables, labels and grid cells."""

from __future__ import annotations

import math
from typing import Mapping

from .ingest import data_lines
from .model import FEATURES, DataError, FeatureTable, validate_feature_table
from .scenario import CellGeometry

GRID_PREFIX = ("cell_id", "lat", "lon", "cell_size_m")


def _header(rows, expected, what):
    first = next(rows, None)
    if first is None:
        raise DataError(f"{what}: missing header")
    lineno, got = first
    got = [g.strip() for g in got]
    for i, want in enumerate(expected):
        name = got[i] if i < len(got) else "<missing>"
        if name != want:
            raise DataError(f"column {i + 1} must be {want!r}, found {name!r}", f"{what} line {lineno}")
    if len(got) > len(expected):
        raise DataError(f"unexpected column {got[len(expected)]!r}", f"{what} line {lineno}")


def _floats(fields, lineno, what):
    try:
        values = [float(v) for v in fields]
    except ValueError:
        raise DataError("non-numeric value", f"{what} line {lineno}") from None
    return values


def parse_features(text: str, what: str = "features") -> FeatureTable:
    rows = data_lines(text)
    _header(rows, ("zone_id", *FEATURES), what)
    table = {}
    for lineno, fields in rows:
        if len(fields) != len(FEATURES) + 1:
            raise DataError(f"expected {len(FEATURES) + 1} fields, got {len(fields)}", f"{what} line {lineno}")
        if fields[0] in table:
            raise DataError(f"duplicate zone {fields[0]!r}", f"{what} line {lineno}")
        table[fields[0]] = tuple(_floats(fields[1:], lineno, what))
    ft = FeatureTable(table)
    problems = validate_feature_table(ft)
    if problems:
        p = problems[0]
        raise DataError(f"zone {p.zone_id!r} column {p.column!r}: {p.rule}", what)
    return ft


def format_features(table: FeatureTable) -> str:
    lines = [",".join(("zone_id", *FEATURES))]
    for z, row in table.rows.items():
        lines.append(",".join([z, *(repr(float(v)) for v in row)]))
    return "\n".join(lines) + "\n"


def parse_labels(text: str, what: str = "labels") -> dict[str, int]:
    rows = data_lines(text)
    _header(rows, ("zone_id", "risk_level"), what)
    out = {}
    for lineno, fields in rows:
        try:
            out[fields[0]] = int(fields[1])
        except (ValueError, IndexError):
            raise DataError("malformed row", f"{what} line {lineno}") from None
        if out[fields[0]] < 0:
            raise DataError("risk_level must be >= 0", f"{what} line {lineno}")
    return out


def format_labels(labels: Mapping[str, int]) -> str:
    return "zone_id,risk_level\n" + "".join(f"{z},{v}\n" for z, v in sorted(labels.items()))


def parse_grid(text: str, what: str = "grid") -> tuple[FeatureTable, dict[str, CellGeometry]]:
    rows = data_lines(text)
    _header(rows, (*GRID_PREFIX, *FEATURES), what)
    table, geometry = {}, {}
    width = len(GRID_PREFIX) + len(FEATURES)
    for lineno, fields in rows:
        if len(fields) != width:
            raise DataError(f"expected {width} fields, got {len(fields)}", f"{what} line {lineno}")
        cell = fields[0]
        lat, lon, size, *feats = _floats(fields[1:], lineno, what)
        if not (-90 <= lat <= 90 and -180 <= lon <= 180 and size > 0 and math.isfinite(size)):
            raise DataError("invalid cell geometry", f"{what} line {lineno}")
        geometry[cell] = CellGeometry(lat, lon, size)
        table[cell] = tuple(feats)
    ft = FeatureTable(table)
    problems = validate_feature_table(ft)
    if problems:
        p = problems[0]
        raise DataError(f"cell {p.zone_id!r} column {p.column!r}: {p.rule}", what)
    return ft, geometry
