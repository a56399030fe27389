"""Claim parsing, inflation adjustment, damage ratios and zone aggregation.

Also hosts the two small feature helpers that need no raster data: nearest
vertex distance (haversine) and Manning roughness lookup.
"""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

from .model import ClaimRecord, DataError, InflationTable, ZoneSummary

CLAIMS_HEADER = ("zone_id", "loss_year", "building_damage_amount", "building_property_value")
EARTH_RADIUS_M = 6371008.8


def data_lines(text: str) -> Iterable[tuple[int, list[str]]]:
    """Yield ``(1-based line number, fields)`` for CSV text, skipping ``#`` comment lines."""
    for lineno, line in enumerate(io.StringIO(text), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        yield lineno, next(csv.reader([line]))


def _expect_header(rows, header: Sequence[str], what: str):
    first = next(rows, None)
    if first is None:
        raise DataError(f"{what}: missing header")
    lineno, got = first
    got = [g.strip() for g in got]
    for i, want in enumerate(header):
        name = got[i] if i < len(got) else "<missing>"
        if name != want:
            raise DataError(f"expected column {want!r}, found {name!r}", f"line {lineno}")
    if len(got) != len(header):
        raise DataError(f"unexpected column {got[len(header)]!r}", f"line {lineno}")


def parse_claims(text: str) -> list[ClaimRecord]:
    rows = data_lines(text)
    _expect_header(rows, CLAIMS_HEADER, "claims")
    out = []
    for lineno, fields in rows:
        if len(fields) != 4:
            raise DataError(f"expected 4 fields, got {len(fields)}", f"line {lineno}")
        try:
            year = int(fields[1])
            damage = float(fields[2])
            value = float(fields[3])
        except ValueError as exc:
            raise DataError(f"malformed number ({exc})", f"line {lineno}") from None
        try:
            out.append(ClaimRecord(fields[0].strip(), year, damage, value))
        except DataError as exc:
            raise DataError(str(exc), f"line {lineno}") from None
    return out


def parse_inflation(text: str, base_year: int | None = None) -> InflationTable:
    """Read a ``year,multiplier`` CSV. Without ``base_year`` the year at 1.0 is used."""
    rows = data_lines(text)
    _expect_header(rows, ("year", "multiplier"), "inflation table")
    multipliers = {}
    for lineno, fields in rows:
        try:
            multipliers[int(fields[0])] = float(fields[1])
        except (ValueError, IndexError):
            raise DataError("malformed row", f"line {lineno}") from None
    if base_year is None:
        unit = [y for y, m in multipliers.items() if m == 1.0]
        if len(unit) != 1:
            raise DataError("inflation table needs exactly one year with multiplier 1.0")
        base_year = unit[0]
    return InflationTable(base_year, multipliers)


def adjust_to_base_year(record: ClaimRecord, table: InflationTable) -> ClaimRecord:
    try:
        m = table.multipliers[record.loss_year]
    except KeyError:
        raise DataError(f"no inflation multiplier for year {record.loss_year}") from None
    return replace(
        record,
        building_damage_amount=record.building_damage_amount * m,
        building_property_value=record.building_property_value * m,
    )


def damage_ratio(record: ClaimRecord) -> float:
    return record.building_damage_amount / record.building_property_value


def aggregate_zones(records: Iterable[ClaimRecord]) -> list[ZoneSummary]:
    ratios: dict[str, list[float]] = defaultdict(list)
    for r in records:
        ratios[r.zone_id].append(damage_ratio(r))
    # math.fsum keeps the mean independent of claim order
    return [
        ZoneSummary(z, math.fsum(v) / len(v), len(v))
        for z, v in sorted(ratios.items())
    ]


def format_summaries(summaries: Sequence[ZoneSummary]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["zone_id", "mean_damage_ratio", "claim_count"])
    for s in summaries:
        w.writerow([s.zone_id, repr(s.mean_damage_ratio), s.claim_count])
    return buf.getvalue()


def parse_summaries(text: str) -> list[ZoneSummary]:
    rows = data_lines(text)
    _expect_header(rows, ("zone_id", "mean_damage_ratio", "claim_count"), "zone summaries")
    out = []
    for lineno, fields in rows:
        try:
            out.append(ZoneSummary(fields[0], float(fields[1]), int(fields[2])))
        except (ValueError, IndexError):
            raise DataError("malformed row", f"line {lineno}") from None
    return out


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and -90 <= self.lat <= 90):
            raise DataError(f"latitude {self.lat} outside [-90, 90]")
        if not (math.isfinite(self.lon) and -180 <= self.lon <= 180):
            raise DataError(f"longitude {self.lon} outside [-180, 180]")


def haversine(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters on a sphere of radius ``EARTH_RADIUS_M``."""
    p1, p2 = math.radians(a.lat), math.radians(b.lat)
    dp = p2 - p1
    dl = math.radians(b.lon - a.lon)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def nearest_distance(point: GeoPoint, vertices: Sequence[GeoPoint]) -> float:
    if not vertices:
        raise DataError("vertex list is empty")
    return min(haversine(point, v) for v in vertices)


def parse_roughness(text: str) -> dict[int, float]:
    rows = data_lines(text)
    _expect_header(rows, ("class_code", "manning_n"), "roughness table")
    table = {}
    for lineno, fields in rows:
        try:
            code, n = int(fields[0]), float(fields[1])
        except (ValueError, IndexError):
            raise DataError("malformed row", f"line {lineno}") from None
        if not n > 0:
            raise DataError(f"Manning coefficient for class {code} must be > 0", f"line {lineno}")
        table[code] = n
    return table


def format_roughness(table: Mapping[int, float]) -> str:
    lines = ["class_code,manning_n"]
    lines += [f"{code},{n!r}" for code, n in sorted(table.items())]
    return "\n".join(lines) + "\n"


def roughness_lookup(class_code: int, table: Mapping[int, float]) -> float:
    try:
        return table[class_code]
    except KeyError:
        raise DataError(f"unknown land-cover class code {class_code}") from None
