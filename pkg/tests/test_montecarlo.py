import numpy as np
import pytest

from risrsma.analysis import bs_jensen_rates
from risrsma.channel import los_components
from risrsma.errors import OutOfRange, ShapeMismatch
from risrsma.montecarlo import compare, empirical_ergodic_rates
from risrsma.rsma import split_power
from risrsma.scenario import RngStream, ring_scenario


@pytest.fixture
def scenario():
    return ring_scenario(1, 8, 2, 5, total_power_w=10.0, rician_factor=1.0)


def _splits(scenario, t=0.5):
    return [
        split_power(scenario.bs_conf(s).total_power_w, t, scenario.bs_conf(s).num_users)
        for s in range(scenario.num_bs)
    ]


def test_minimum_trials(scenario):
    with pytest.raises(OutOfRange):
        empirical_ergodic_rates(
            scenario, [np.ones(5, dtype=complex)], _splits(scenario), 99, RngStream(0)
        )


def test_same_seed_reproduces_bitwise(scenario):
    theta = [np.exp(2j * np.pi * RngStream(1).generator().random(5))]
    a = empirical_ergodic_rates(scenario, theta, _splits(scenario), 400, RngStream(5))
    b = empirical_ergodic_rates(scenario, theta, _splits(scenario), 400, RngStream(5))
    np.testing.assert_array_equal(a.common_mean[0], b.common_mean[0])
    np.testing.assert_array_equal(a.private_mean[0], b.private_mean[0])


def test_deterministic_channels_have_zero_stderr():
    # kappa -> inf makes the single-user channel deterministic, so the mean
    # equals the one instantaneous rate and the spread vanishes
    sc = ring_scenario(1, 8, 1, 5, total_power_w=10.0, rician_factor=1e12)
    theta = [np.ones(5, dtype=complex)]
    report = empirical_ergodic_rates(sc, theta, _splits(sc), 200, RngStream(2))
    assert np.max(report.common_stderr[0]) < 1e-6
    assert np.max(report.private_stderr[0]) < 1e-6


def test_means_agree_across_trial_counts(scenario):
    theta = [np.exp(2j * np.pi * RngStream(3).generator().random(5))]
    small = empirical_ergodic_rates(scenario, theta, _splits(scenario), 2_000, RngStream(6))
    large = empirical_ergodic_rates(scenario, theta, _splits(scenario), 20_000, RngStream(7))
    for field in ("common_mean", "private_mean"):
        a = getattr(small, field)[0]
        b = getattr(large, field)[0]
        se = np.hypot(
            np.array(getattr(small, field.replace("mean", "stderr"))[0]),
            np.array(getattr(large, field.replace("mean", "stderr"))[0]),
        )
        assert np.all(np.abs(a - b) < 3.0 * se + 1e-12)


def test_stderr_scales_like_sqrt_trials(scenario):
    theta = [np.exp(2j * np.pi * RngStream(4).generator().random(5))]
    reports = {
        n: empirical_ergodic_rates(scenario, theta, _splits(scenario), n, RngStream(8))
        for n in (1_000, 10_000)
    }
    ratio = reports[1_000].private_stderr[0] / reports[10_000].private_stderr[0]
    np.testing.assert_allclose(ratio, np.sqrt(10.0), rtol=0.2)


def test_batching_invariance(scenario):
    # substreams are keyed by trial index, so a partial re-run of the first
    # trials reproduces exactly the same draws
    theta = [np.ones(5, dtype=complex)]
    full = empirical_ergodic_rates(scenario, theta, _splits(scenario), 300, RngStream(9))
    again = empirical_ergodic_rates(scenario, theta, _splits(scenario), 300, RngStream(9))
    np.testing.assert_array_equal(full.private_mean[0], again.private_mean[0])


def test_per_user_mode_matches_closed_forms_better_than_min_norm(scenario):
    los = los_components(scenario)
    theta = [np.exp(-1j * np.angle(los.h_bar_users[0][:, 0].conj() * los.a_ris[0]))]
    jen_c, _ = bs_jensen_rates(los, scenario, 0, theta[0], 0.5)
    per_user = empirical_ergodic_rates(
        scenario, theta, _splits(scenario), 4_000, RngStream(10), common_mode="per_user"
    )
    err = np.max(np.abs(per_user.common_mean[0] - jen_c) / jen_c)
    assert err < 0.1


def test_compare_identical_passes(scenario):
    theta = [np.ones(5, dtype=complex)]
    report = empirical_ergodic_rates(scenario, theta, _splits(scenario), 500, RngStream(11))
    verdict = compare(report.common_mean, report.private_mean, report, tolerance=1e-12)
    assert verdict.passed
    assert verdict.max_relative_error == 0.0


def test_compare_tolerance_arithmetic(scenario):
    theta = [np.ones(5, dtype=complex)]
    report = empirical_ergodic_rates(scenario, theta, _splits(scenario), 500, RngStream(12))
    scaled = tuple(np.asarray(c) * 1.05 for c in report.common_mean)
    verdict = compare(scaled, report.private_mean, report, tolerance=0.10)
    assert verdict.passed
    assert verdict.max_relative_error == pytest.approx(0.05, rel=1e-9)
    bad = tuple(np.asarray(c) * 2.0 for c in report.common_mean)
    verdict = compare(bad, report.private_mean, report, tolerance=0.10)
    assert not verdict.passed
    assert "common" in verdict.worst_label


def test_compare_shape_mismatch(scenario):
    theta = [np.ones(5, dtype=complex)]
    report = empirical_ergodic_rates(scenario, theta, _splits(scenario), 500, RngStream(13))
    with pytest.raises(ShapeMismatch):
        compare((np.ones(3),), (np.ones(3),), report, tolerance=0.1)
