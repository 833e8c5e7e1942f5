import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from risrsma.errors import DuplicateBand, InvalidDimension, NonPositiveQuantity
from risrsma.scenario import (
    BsConfig,
    ScenarioConfig,
    UserConfig,
    build_scenario,
    load_scenario_config,
    make_streams,
    path_loss,
    ring_scenario,
    scenario_config_to_dict,
)


def _config(num_antennas=10, num_users=3, bands=(0, 1, 2), num_bs=3):
    bs = []
    for s in range(num_bs):
        users = tuple(
            UserConfig(position_m=(2.0 * math.cos(0.3 * k + s), 2.0 * math.sin(0.3 * k + s)))
            for k in range(num_users)
        )
        bs.append(
            BsConfig(
                num_antennas=num_antennas,
                total_power_w=1.0,
                rician_factor=1.0,
                carrier_band_id=bands[s],
                position_m=(50.0 * math.cos(2.1 * s), 50.0 * math.sin(2.1 * s)),
                users=users,
            )
        )
    return ScenarioConfig(ris_elements=8, bs=tuple(bs))


def test_reference_setup_is_valid():
    sc = ring_scenario(3, 30, 3, 10, qos_threshold_db=5.0, unit_path_loss=False)
    assert sc.num_bs == 3
    np.testing.assert_allclose(sc.geometry.bs_ris_distance_m, 50.0)
    for s in range(3):
        np.testing.assert_allclose(sc.geometry.ris_user_distance_m[s], 2.0)
        np.testing.assert_allclose(sc.qos_thresholds_db(s), 5.0)


def test_antenna_count_must_cover_users():
    with pytest.raises(InvalidDimension):
        build_scenario(_config(num_antennas=4, num_users=3, num_bs=1, bands=(0,)))
    # N = K + 2 is the smallest legal count
    build_scenario(_config(num_antennas=5, num_users=3, num_bs=1, bands=(0,)))


def test_minimal_scenario():
    sc = build_scenario(_config(num_antennas=3, num_users=1, num_bs=1, bands=(0,)))
    assert sc.ris_elements == 8
    assert sc.bs_conf(0).num_users == 1


def test_duplicate_bands_rejected():
    with pytest.raises(DuplicateBand):
        build_scenario(_config(bands=(0, 1, 1)))


def test_nonpositive_power_rejected():
    cfg = _config(num_bs=1, bands=(0,))
    bad = ScenarioConfig(
        ris_elements=8,
        bs=(
            BsConfig(
                num_antennas=10,
                total_power_w=0.0,
                rician_factor=1.0,
                carrier_band_id=0,
                position_m=(50.0, 0.0),
                users=cfg.bs[0].users,
            ),
        ),
    )
    with pytest.raises(NonPositiveQuantity):
        build_scenario(bad)


def test_build_scenario_is_pure():
    cfg = _config()
    a = build_scenario(cfg)
    b = build_scenario(cfg)
    np.testing.assert_array_equal(a.bs_ris_gain, b.bs_ris_gain)
    np.testing.assert_array_equal(a.geometry.phi_ir_az[1], b.geometry.phi_ir_az[1])


def test_path_loss_reference_values():
    assert path_loss(1.0, 2.2, -30.0) == pytest.approx(1e-3)
    assert path_loss(10.0, 2.2, -30.0) == pytest.approx(1e-3 * 10 ** (-2.2))
    assert path_loss(123.4, 0.0, 0.0) == pytest.approx(1.0)


def test_path_loss_rejects_nonpositive_distance():
    with pytest.raises(NonPositiveQuantity):
        path_loss(0.0, 2.2, -30.0)


@given(
    d1=st.floats(min_value=0.1, max_value=1e4),
    factor=st.floats(min_value=1.01, max_value=100.0),
    exponent=st.floats(min_value=0.1, max_value=4.0),
)
def test_path_loss_decreasing_in_distance(d1, factor, exponent):
    assert path_loss(d1 * factor, exponent, -30.0) < path_loss(d1, exponent, -30.0)


def test_streams_are_reproducible():
    a = make_streams(42, 2)
    b = make_streams(42, 2)
    for sa, sb in zip(a, b):
        np.testing.assert_array_equal(
            sa.generator().standard_normal(64), sb.generator().standard_normal(64)
        )


def test_streams_differ_across_seeds_and_ids():
    x = make_streams(42, 1)[0].generator().standard_normal(64)
    y = make_streams(43, 1)[0].generator().standard_normal(64)
    assert not np.allclose(x, y)


def test_streams_pairwise_uncorrelated():
    s0, s1 = make_streams(7, 2)
    a = s0.generator().standard_normal(10_000)
    b = s1.generator().standard_normal(10_000)
    rho = np.corrcoef(a, b)[0, 1]
    assert abs(rho) < 0.05


def test_substreams_keyed_by_trial():
    s = make_streams(7, 1)[0]
    a1 = s.substream(3).standard_normal(8)
    a2 = s.substream(3).standard_normal(8)
    b = s.substream(4).standard_normal(8)
    np.testing.assert_array_equal(a1, a2)
    assert not np.allclose(a1, b)


def test_config_json_round_trip(tmp_path):
    cfg = _config()
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(scenario_config_to_dict(cfg)))
    loaded = load_scenario_config(path)
    sc_a = build_scenario(cfg)
    sc_b = build_scenario(loaded)
    np.testing.assert_allclose(sc_a.bs_ris_gain, sc_b.bs_ris_gain)
    np.testing.assert_allclose(sc_a.geometry.phi_r_az, sc_b.geometry.phi_r_az)
    assert loaded.bs[2].carrier_band_id == 2


def test_user_rician_inf_round_trip(tmp_path):
    sc = ring_scenario(1, 10, 2, 4, user_rician_factor=math.inf)
    d = scenario_config_to_dict(sc.config)
    assert d["bs"][0]["user_rician_factor"] == "inf"
    loaded = load_scenario_config(d)
    assert math.isinf(loaded.bs[0].user_rician_factor)
