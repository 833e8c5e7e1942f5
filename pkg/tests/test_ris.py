import numpy as np
import pytest
from hypothesis import given, strategies as st

from risrsma.errors import DimensionMismatch, NonBinarySelection, SelectionConflict
from risrsma.ris import (
    ReflectionDesign,
    practical_reflection,
    reflection_matrix,
    validate_selection,
)


def test_fully_assigned_row():
    phi = np.array([0.3, 1.7, 5.0])
    theta = practical_reflection(phi, np.ones(3, dtype=int))
    np.testing.assert_allclose(theta, np.exp(1j * phi))


def test_unassigned_elements_reflect_with_unity():
    phi = np.array([0.3, 1.7, 5.0])
    np.testing.assert_array_equal(practical_reflection(phi, np.zeros(3, dtype=int)), np.ones(3))


def test_mixed_assignment():
    theta = practical_reflection(np.array([np.pi / 2, np.pi]), np.array([1, 0]))
    np.testing.assert_allclose(theta, [1j, 1.0], atol=1e-12)


def test_reflection_rejects_non_binary():
    with pytest.raises(NonBinarySelection):
        practical_reflection(np.array([1.0]), np.array([0.5]))


def test_reflection_rejects_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        practical_reflection(np.ones(3), np.ones(2, dtype=int))


@given(seed=st.integers(0, 2**16), m=st.integers(1, 16))
def test_unit_modulus_and_round_trip(seed, m):
    rng = np.random.default_rng(seed)
    phi = 2.0 * np.pi * rng.random(m)
    phi[phi == 0.0] = 2.0 * np.pi
    v = rng.integers(0, 2, size=m)
    theta = practical_reflection(phi, v)
    np.testing.assert_allclose(np.abs(theta), 1.0, atol=1e-12)
    # recovering the phase where v=1 reproduces phi modulo 2 pi
    recovered = np.mod(np.angle(theta[v == 1]), 2.0 * np.pi)
    expected = np.mod(phi[v == 1], 2.0 * np.pi)
    np.testing.assert_allclose(
        np.exp(1j * recovered), np.exp(1j * expected), atol=1e-12
    )


def test_validate_selection_accepts_partition():
    assert validate_selection(np.array([[1, 0], [0, 1]]))
    assert validate_selection(np.zeros((3, 4), dtype=int))


def test_validate_selection_flags_conflicts():
    with pytest.raises(SelectionConflict) as exc:
        validate_selection(np.array([[1, 1], [1, 0]]))
    assert exc.value.element == 0


def test_validate_selection_rejects_non_binary():
    with pytest.raises(NonBinarySelection):
        validate_selection(np.array([[0.5, 0], [0, 1]]))


def test_reflection_matrix_diagonal():
    theta = np.array([1.0, 1j])
    np.testing.assert_array_equal(reflection_matrix(theta), np.diag(theta))
    np.testing.assert_array_equal(reflection_matrix(np.ones(3)), np.eye(3))


def test_reflection_matrix_unitarity():
    rng = np.random.default_rng(2)
    theta = np.exp(2j * np.pi * rng.random(8))
    mat = reflection_matrix(theta)
    np.testing.assert_allclose(mat @ mat.conj().T, np.eye(8), atol=1e-12)


def test_design_round_trip_json(tmp_path):
    rng = np.random.default_rng(3)
    phases = 2.0 * np.pi * rng.random((2, 5))
    selection = np.array([[1, 0, 0, 1, 0], [0, 1, 0, 0, 0]])
    design = ReflectionDesign(phases=phases, selection=selection)
    path = tmp_path / "design.json"
    design.to_json(path)
    loaded = ReflectionDesign.from_json(path)
    np.testing.assert_allclose(loaded.phases, phases)
    np.testing.assert_array_equal(loaded.selection, selection)
    np.testing.assert_allclose(loaded.theta(0), design.theta(0))


def test_design_enforces_column_constraint():
    with pytest.raises(SelectionConflict):
        ReflectionDesign(phases=np.ones((2, 2)), selection=np.array([[1, 1], [1, 0]]))


def test_each_element_sees_one_tunable_phase():
    phases = np.array([[1.0, 2.0, 3.0], [0.5, 1.5, 2.5]])
    selection = np.array([[1, 0, 0], [0, 1, 0]])
    design = ReflectionDesign(phases=phases, selection=selection)
    t0, t1 = design.theta(0), design.theta(1)
    for m in range(3):
        tunable = [abs(t0[m] - 1.0) > 1e-12, abs(t1[m] - 1.0) > 1e-12]
        assert sum(tunable) == int(selection[:, m].sum())
