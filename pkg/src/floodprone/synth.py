"""Seeded synthetic corpus with a planted risk signal.

Feature ranges (uniform draws unless noted)::

    vapor_pressure      0.5 .. 3.0 kPa
    hand                0 .. 30 m
    elevation           0 .. 100 m
    impervious          0 .. 100 %
    building_area       500 .. 5000 sq ft
    distance_to_coast   0 .. 50000 m
    foundation_height   0 .. 6 ft
    distance_to_stream  0 .. 5000 m
    building_age        1900 .. 2020 (integer year)
    roughness           0.02 .. 0.15

Latent score ``s = signal_strength * sum(sign_f * z_f) + N(0, noise_sd)`` over the
planted features (``sign = -1`` for hand, elevation and the two distances, +1
otherwise). Claim counts are ``Poisson(exp(claim_log_rate + claim_slope * s))``;
each claim's damage ratio is ``sigmoid(ratio_intercept + ratio_slope * s + N(0, noise_sd))``.
Ground truth is the quartile of ``s``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .model import FEATURES, DataError

RANGES = {
    "vapor_pressure": (0.5, 3.0),
    "hand": (0.0, 30.0),
    "elevation": (0.0, 100.0),
    "impervious": (0.0, 100.0),
    "building_area": (500.0, 5000.0),
    "distance_to_coast": (0.0, 50000.0),
    "foundation_height": (0.0, 6.0),
    "distance_to_stream": (0.0, 5000.0),
    "building_age": (1900.0, 2020.0),
    "roughness": (0.02, 0.15),
}
PROTECTIVE = {"hand", "elevation", "distance_to_coast", "distance_to_stream"}
FIRST_YEAR, BASE_YEAR = 2003, 2023
ANNUAL_INFLATION = 0.025


@dataclass(frozen=True)
class SynthConfig:
    n_zones: int = 500
    seed: int = 0
    planted_features: tuple[str, ...] = ("vapor_pressure", "hand")
    signal_strength: float = 1.5
    noise_sd: float = 0.3
    claim_log_rate: float = 0.5
    claim_slope: float = 1.0
    ratio_intercept: float = -1.5
    ratio_slope: float = 0.6

    def __post_init__(self):
        if self.n_zones < 40:
            raise DataError("n_zones must be >= 40")
        if not self.planted_features:
            raise DataError("planted_features must be nonempty")
        unknown = [f for f in self.planted_features if f not in FEATURES]
        if unknown:
            raise DataError(f"unknown planted feature {unknown[0]!r}")
        if self.noise_sd < 0:
            raise DataError("noise_sd must be >= 0")


@dataclass(frozen=True)
class SynthCorpus:
    claims_csv: str
    features_csv: str
    truth_csv: str
    latent: np.ndarray

    def __iter__(self):
        return iter((self.claims_csv, self.features_csv, self.truth_csv))


def _fmt(v: float) -> str:
    return repr(float(v))


def inflation_multiplier(year: int) -> float:
    """Factor taking ``year`` dollars to base-year dollars (exactly 1.0 at the base year)."""
    return (1.0 + ANNUAL_INFLATION) ** (BASE_YEAR - year)


def inflation_csv() -> str:
    lines = ["year,multiplier"]
    lines += [f"{y},{_fmt(inflation_multiplier(y))}" for y in range(FIRST_YEAR, BASE_YEAR + 1)]
    return "\n".join(lines) + "\n"


def zone_id(i: int) -> str:
    return f"Z{i:06d}"


def generate(config: SynthConfig) -> SynthCorpus:
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x5EED]))
    n = config.n_zones
    cols = []
    for name in FEATURES:
        lo, hi = RANGES[name]
        col = rng.uniform(lo, hi, n)
        if name == "building_age":
            col = np.floor(col)
        else:
            col = np.round(col, 4)
        cols.append(col)
    X = np.column_stack(cols)

    s = np.zeros(n)
    for name in config.planted_features:
        col = X[:, FEATURES.index(name)]
        z = (col - col.mean()) / col.std()
        s += -z if name in PROTECTIVE else z
    s = config.signal_strength * s + rng.normal(0.0, 1.0, n) * config.noise_sd

    counts = rng.poisson(np.exp(config.claim_log_rate + config.claim_slope * s))
    claims = io.StringIO()
    w = csv.writer(claims, lineterminator="\n")
    w.writerow(["zone_id", "loss_year", "building_damage_amount", "building_property_value"])
    for i in range(n):
        c = int(counts[i])
        if c == 0:
            continue
        years = rng.integers(FIRST_YEAR, BASE_YEAR + 1, c)
        value_real = rng.uniform(100_000, 500_000, c)
        logit = config.ratio_intercept + config.ratio_slope * s[i] + rng.normal(0.0, 1.0, c) * config.noise_sd
        ratio = 1.0 / (1.0 + np.exp(-logit))
        for y, v, r in zip(years.tolist(), value_real.tolist(), ratio.tolist()):
            nominal = round(v / inflation_multiplier(y), 2)
            w.writerow([zone_id(i), y, _fmt(round(nominal * r, 2)), _fmt(nominal)])

    features = io.StringIO()
    w = csv.writer(features, lineterminator="\n")
    w.writerow(["zone_id", *FEATURES])
    for i in range(n):
        w.writerow([zone_id(i), *(_fmt(v) for v in X[i])])

    edges = np.quantile(s, [0.25, 0.5, 0.75])
    quartile = np.searchsorted(edges, s, side="right")
    truth = ["zone_id,risk_level"] + [f"{zone_id(i)},{int(q)}" for i, q in enumerate(quartile)]
    return SynthCorpus(claims.getvalue(), features.getvalue(), "\n".join(truth) + "\n", s)


def latent_decile_gap(corpus: SynthCorpus) -> tuple[float, float]:
    """Mean zone damage ratio (0 for claim-free zones) in the bottom and top latent deciles."""
    sums: dict[str, list[float]] = {}
    for row in csv.DictReader(io.StringIO(corpus.claims_csv)):
        r = float(row["building_damage_amount"]) / float(row["building_property_value"])
        sums.setdefault(row["zone_id"], []).append(r)
    n = len(corpus.latent)
    zone_mean = np.array([math.fsum(sums[zone_id(i)]) / len(sums[zone_id(i)]) if zone_id(i) in sums else 0.0
                          for i in range(n)])
    order = np.argsort(corpus.latent, kind="stable")
    k = max(1, n // 10)
    return float(zone_mean[order[:k]].mean()), float(zone_mean[order[-k:]].mean())
