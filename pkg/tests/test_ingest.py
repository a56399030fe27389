import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from floodprone.ingest import (EARTH_RADIUS_M, GeoPoint, InflationTable, adjust_to_base_year,
                               aggregate_zones, damage_ratio, format_roughness, haversine,
                               nearest_distance, parse_claims, parse_inflation, parse_roughness,
                               roughness_lookup)
from floodprone.model import ClaimRecord, DataError, ZoneSummary

HEADER = "zone_id,loss_year,building_damage_amount,building_property_value\n"


def test_parse_single_claim():
    assert parse_claims(HEADER + "Z1,2017,50000,200000\n") == [ClaimRecord("Z1", 2017, 50000, 200000)]


def test_parse_header_only():
    assert parse_claims(HEADER) == []


def test_zero_property_value_names_rule():
    with pytest.raises(DataError, match="building_property_value must be > 0"):
        parse_claims(HEADER + "Z1,2017,50000,0\n")


@pytest.mark.parametrize("row, fragment", [
    ("Z1,2017,-5,100\n", "building_damage_amount"),
    ("Z1,2017,5\n", "line 3"),
    ("Z1,20x7,5,100\n", "line 3"),
])
def test_malformed_rows_carry_line_number(row, fragment):
    with pytest.raises(DataError, match=fragment):
        parse_claims(HEADER + "Z0,2010,1,2\n" + row)


def test_bad_header():
    with pytest.raises(DataError, match="zone_id"):
        parse_claims("zone,loss_year,building_damage_amount,building_property_value\n")


TABLE = InflationTable(2023, {2017: 2.0, 2023: 1.0})


def test_adjust_identity_and_product():
    r = ClaimRecord("Z1", 2023, 50000, 200000)
    assert adjust_to_base_year(r, TABLE) == r
    adj = adjust_to_base_year(ClaimRecord("Z1", 2017, 50000, 200000), TABLE)
    assert (adj.building_damage_amount, adj.building_property_value) == (100000, 400000)
    assert (adj.zone_id, adj.loss_year) == ("Z1", 2017)


def test_adjust_missing_year():
    with pytest.raises(DataError, match="2005"):
        adjust_to_base_year(ClaimRecord("Z1", 2005, 1, 2), TABLE)


def test_inflation_table_invariants():
    with pytest.raises(DataError):
        InflationTable(2023, {2023: 1.1})
    with pytest.raises(DataError):
        InflationTable(2023, {2023: 1.0, 2000: 0.0})
    t = parse_inflation("year,multiplier\n2020,1.1\n2023,1.0\n")
    assert t.base_year == 2023 and t.multipliers[2020] == 1.1


def test_damage_ratio():
    assert damage_ratio(ClaimRecord("Z", 2000, 50000, 200000)) == 0.25
    assert damage_ratio(ClaimRecord("Z", 2000, 0, 200000)) == 0.0


@given(st.floats(0, 1e7), st.floats(1, 1e7), st.floats(0.1, 10))
def test_ratio_invariant_under_adjustment(damage, value, m):
    r = ClaimRecord("Z", 2010, damage, value)
    t = InflationTable(2023, {2010: m, 2023: 1.0})
    assert math.isclose(damage_ratio(adjust_to_base_year(r, t)), damage_ratio(r),
                        rel_tol=1e-12, abs_tol=1e-300)


def test_aggregate_examples():
    recs = [ClaimRecord("Z1", 2000, 20, 100), ClaimRecord("Z1", 2000, 40, 100),
            ClaimRecord("Z0", 2001, 25, 100)]
    out = aggregate_zones(recs)
    assert [s.zone_id for s in out] == ["Z0", "Z1"]
    assert out[0] == ZoneSummary("Z0", 0.25, 1)
    assert out[1].claim_count == 2 and math.isclose(out[1].mean_damage_ratio, 0.3)
    assert aggregate_zones([]) == []


def test_aggregate_permutation_invariant():
    rng = random.Random(4)
    recs = [ClaimRecord(f"Z{rng.randrange(5)}", 2000, rng.uniform(0, 1e5), rng.uniform(1e3, 1e6))
            for _ in range(200)]
    base = aggregate_zones(recs)
    for _ in range(5):
        rng.shuffle(recs)
        assert aggregate_zones(recs) == base


def test_haversine_examples():
    assert nearest_distance(GeoPoint(10, 20), [GeoPoint(10, 20)]) == 0.0
    # along the equator the central angle equals the longitude difference
    expected = EARTH_RADIUS_M * math.pi / 180
    got = nearest_distance(GeoPoint(0, 0), [GeoPoint(0, 1)])
    assert math.isclose(got, expected, rel_tol=1e-12)
    assert round(got) == 111195
    assert nearest_distance(GeoPoint(0, 0), [GeoPoint(0, 2), GeoPoint(0, 1)]) == got


def test_nearest_distance_requires_vertices():
    with pytest.raises(DataError):
        nearest_distance(GeoPoint(0, 0), [])


points = st.builds(GeoPoint, st.floats(-89, 89), st.floats(-179, 179))


@settings(max_examples=200)
@given(points, points, points)
def test_haversine_metric_properties(a, b, c):
    assert math.isclose(haversine(a, b), haversine(b, a), abs_tol=1e-6)
    assert haversine(a, c) <= haversine(a, b) + haversine(b, c) + 1e-6


@given(points, st.lists(points, min_size=1, max_size=6), st.lists(points, max_size=6))
def test_more_vertices_never_farther(p, subset, extra):
    assert nearest_distance(p, subset + extra) <= nearest_distance(p, subset)


def test_roughness_lookup_and_roundtrip():
    text = "class_code,manning_n\n21,0.0404\n41,0.035\n"
    table = parse_roughness(text)
    assert roughness_lookup(41, table) == 0.035
    with pytest.raises(DataError, match="99"):
        roughness_lookup(99, table)
    assert parse_roughness(format_roughness(table)) == table
    with pytest.raises(DataError):
        parse_roughness("class_code,manning_n\n11,0\n")
