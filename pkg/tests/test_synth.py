import numpy as np
import pytest

from floodprone import ingest, riskcluster, tables
from floodprone.model import DataError, validate_feature_table
from floodprone.synth import SynthConfig, generate, inflation_multiplier, latent_decile_gap


def test_same_seed_same_bytes():
    a = generate(SynthConfig(n_zones=60, seed=3))
    b = generate(SynthConfig(n_zones=60, seed=3))
    assert tuple(a) == tuple(b)
    assert tuple(generate(SynthConfig(n_zones=60, seed=4))) != tuple(a)


def test_outputs_parse_and_validate():
    c = generate(SynthConfig(n_zones=80, seed=1))
    feats = tables.parse_features(c.features_csv)
    assert len(feats) == 80 and validate_feature_table(feats) == []
    claims = ingest.parse_claims(c.claims_csv)
    assert claims and all(r.building_damage_amount <= r.building_property_value for r in claims)
    truth = tables.parse_labels(c.truth_csv)
    assert sorted(set(truth.values())) == [0, 1, 2, 3]


def test_inflation_base_year():
    assert inflation_multiplier(2023) == 1.0
    assert inflation_multiplier(2022) == pytest.approx(1.025)


def test_noise_free_latent_orders_damage():
    low, high = latent_decile_gap(generate(SynthConfig(n_zones=400, seed=2, noise_sd=0.0)))
    assert high > low


def test_minimum_size_smoke():
    c = generate(SynthConfig(n_zones=40, seed=0))
    summaries = ingest.aggregate_zones(ingest.parse_claims(c.claims_csv))
    zones = tables.parse_features(c.features_csv).zone_ids
    res = riskcluster.label_zones(summaries, zones, k=3, target_levels=3, seed=0)
    assert set(res.labels) == set(zones)


@pytest.mark.parametrize("kwargs", [{"n_zones": 10}, {"planted_features": ("nope",)},
                                    {"planted_features": ()}, {"noise_sd": -1.0}])
def test_config_validation(kwargs):
    with pytest.raises(DataError):
        SynthConfig(**kwargs)


def test_latent_is_exposed():
    c = generate(SynthConfig(n_zones=50))
    assert c.latent.shape == (50,) and np.isfinite(c.latent).all()
