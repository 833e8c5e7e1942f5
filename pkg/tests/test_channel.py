import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from risrsma.channel import (
    cascaded_channel,
    los_components,
    sample_channels,
    steering_vector,
)
from risrsma.errors import DimensionMismatch
from risrsma.scenario import RngStream, ring_scenario


@pytest.fixture
def scenario():
    return ring_scenario(2, 8, 2, 6, rician_factor=1.0, user_rician_factor=None,
                         unit_path_loss=False)


def test_steering_single_element():
    np.testing.assert_array_equal(steering_vector(1, 0.7, -0.2), [1.0 + 0j])


def test_steering_broadside():
    np.testing.assert_allclose(steering_vector(4, 0.0, 0.0), np.ones(4))


def test_steering_half_wavelength_30_degrees():
    # sin(pi/6) = 1/2 so the per-element phase step is pi/2
    expected = np.exp(1j * np.pi / 2 * np.arange(4))
    np.testing.assert_allclose(steering_vector(4, np.pi / 6, 0.0), expected, atol=1e-12)


@given(
    n=st.integers(min_value=1, max_value=32),
    az=st.floats(min_value=-np.pi, max_value=np.pi),
    el=st.floats(min_value=-np.pi / 2, max_value=np.pi / 2),
)
def test_steering_unit_modulus(n, az, el):
    v = steering_vector(n, az, el)
    np.testing.assert_allclose(np.abs(v), 1.0, atol=1e-12)
    assert v[0] == pytest.approx(1.0)


def test_los_rank_one(scenario):
    los = los_components(scenario)
    for s in range(scenario.num_bs):
        svals = np.linalg.svd(los.h_bar_bs_ris[s], compute_uv=False)
        assert svals[1] < 1e-10 * svals[0]


def test_los_user_columns_scale_with_path_loss(scenario):
    los = los_components(scenario)
    for s in range(scenario.num_bs):
        norms = np.linalg.norm(los.h_bar_users[s], axis=0)
        expected = scenario.ris_user_gain[s] * np.sqrt(scenario.ris_elements)
        np.testing.assert_allclose(norms, expected)


def test_los_limit_recovers_deterministic_channel():
    sc = ring_scenario(1, 8, 2, 6, rician_factor=1e9, unit_path_loss=False)
    los = los_components(sc)
    ch = sample_channels(sc, RngStream(0))
    ref = sc.bs_ris_gain[0] * los.h_bar_bs_ris[0]
    assert np.linalg.norm(ch.bs_ris[0] - ref) / np.linalg.norm(ref) < 1e-4


def test_sampling_zero_mean_when_rayleigh():
    sc = ring_scenario(1, 4, 1, 4, rician_factor=0.0, unit_path_loss=False)
    gen = RngStream(3).generator()
    acc = np.zeros((4, 4), dtype=complex)
    trials = 20_000
    for _ in range(trials):
        acc += sample_channels(sc, gen).bs_ris[0]
    l_s = sc.bs_ris_gain[0]
    assert np.max(np.abs(acc / trials)) < 0.02 * l_s


def test_sampling_entry_variance():
    sc = ring_scenario(1, 4, 1, 4, rician_factor=1.0, unit_path_loss=False)
    los = los_components(sc)
    gen = RngStream(4).generator()
    trials = 100_000
    samples = np.empty(trials, dtype=complex)
    for i in range(trials):
        samples[i] = sample_channels(sc, gen, los=los).bs_ris[0][1, 2]
    l_s = sc.bs_ris_gain[0]
    # NLoS share of the power is 1/(kappa+1) = 1/2 per entry
    var = np.var(samples)
    assert abs(var - l_s**2 / 2) < 0.03 * l_s**2 / 2


def test_sampling_bit_reproducible(scenario):
    a = sample_channels(scenario, RngStream(11))
    b = sample_channels(scenario, RngStream(11))
    for s in range(scenario.num_bs):
        np.testing.assert_array_equal(a.bs_ris[s], b.bs_ris[s])
        np.testing.assert_array_equal(a.users[s], b.users[s])


def test_pure_los_users():
    sc = ring_scenario(1, 8, 2, 6, rician_factor=1.0, user_rician_factor=np.inf)
    los = los_components(sc)
    ch = sample_channels(sc, RngStream(5), los=los)
    np.testing.assert_array_equal(ch.users[0], los.h_bar_users[0])


def test_cascade_scalar_case():
    h = np.array([0.5 - 0.5j])
    theta = np.array([1.0 + 0j])
    big_h = np.array([[1.0 + 2j, -0.3j]])
    np.testing.assert_allclose(cascaded_channel(h, theta, big_h), np.conj(h[0]) * big_h[0])


def test_cascade_single_path_phase_rotation():
    m, n = 4, 3
    rng = np.random.default_rng(0)
    big_h = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
    h = np.zeros(m, dtype=complex)
    h[0] = 1.0
    phi = 0.77
    theta = np.exp(1j * phi) * np.ones(m)
    np.testing.assert_allclose(
        cascaded_channel(h, theta, big_h), np.exp(1j * phi) * big_h[0], atol=1e-12
    )


def test_cascade_matches_triple_product():
    rng = np.random.default_rng(1)
    m, n = 6, 5
    h = rng.normal(size=m) + 1j * rng.normal(size=m)
    theta = np.exp(2j * np.pi * rng.random(m))
    big_h = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
    direct = h.conj().T @ np.diag(theta) @ big_h
    got = cascaded_channel(h, theta, big_h)
    np.testing.assert_allclose(got, direct, rtol=1e-12)


def test_cascade_shape_validation():
    with pytest.raises(DimensionMismatch):
        cascaded_channel(np.ones(3), np.ones(4), np.ones((3, 2)))


@settings(max_examples=25)
@given(alpha=st.floats(min_value=-np.pi, max_value=np.pi), seed=st.integers(0, 2**16))
def test_cascade_norm_invariant_to_common_rotation(alpha, seed):
    rng = np.random.default_rng(seed)
    m, n = 5, 4
    h = rng.normal(size=m) + 1j * rng.normal(size=m)
    theta = np.exp(2j * np.pi * rng.random(m))
    big_h = rng.normal(size=(m, n)) + 1j * rng.normal(size=(m, n))
    base = np.linalg.norm(cascaded_channel(h, theta, big_h))
    rotated = np.linalg.norm(cascaded_channel(h, np.exp(1j * alpha) * theta, big_h))
    assert rotated == pytest.approx(base, rel=1e-12)
