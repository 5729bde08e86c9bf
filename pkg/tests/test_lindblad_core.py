import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mpemba_lab.lindblad_core import (
    CoherenceParts,
    ControlParams,
    DensityVector,
    QuenchExperiment,
    build_lindbladian,
    density_matrix,
    initial_condition,
    is_physical,
    state_from_bloch,
    steady_state,
)
from mpemba_lab.observables import bloch_vector

drives = st.floats(-30, 30, allow_nan=False)
dissipations = st.floats(0, 60, allow_nan=False)

# steady state at d=10, gamma=sqrt(284+32 sqrt2): LU solve of L rho = 0, tr rho = 1 at 40 digits
GOLDEN_SS = np.array(
    [
        -0.037505520297172417867 - 0.34027596858288401106j,
        -0.037505520297172417867 + 0.34027596858288401106j,
        0.18752760148586208934,
        0.81247239851413791066,
    ]
)


def test_initial_condition_golden():
    p = ControlParams(10.0, math.sqrt(284 + 32 * math.sqrt(2)))
    np.testing.assert_allclose(np.asarray(initial_condition(p)), GOLDEN_SS, rtol=1e-14, atol=1e-16)


@given(drives, dissipations)
def test_steady_state_is_zero_mode(d, g):
    p = ControlParams(d, g)
    rho = np.asarray(steady_state(p))
    assert np.max(np.abs(build_lindbladian(p) @ rho)) <= 1e-12 * max(1.0, abs(d), g)
    assert is_physical(rho)


def test_undriven_steady_state_is_ground():
    np.testing.assert_allclose(np.asarray(steady_state(ControlParams(0.0, 3.0))), [0, 0, 0, 1])


def test_lindbladian_conserves_trace_and_hermiticity():
    L = build_lindbladian(ControlParams(2.3, 1.7))
    # trace functional (0, 0, 1, 1) is a left zero mode
    np.testing.assert_allclose(np.array([0, 0, 1, 1]) @ L, 0, atol=1e-15)
    rho = state_from_bloch([0.3, -0.2, 0.5])
    drho = -1j * L @ rho
    assert abs(drho[1] - np.conj(drho[0])) < 1e-15


@given(st.tuples(*[st.floats(-1, 1)] * 3))
def test_bloch_round_trip(r):
    r = np.array(r)
    if np.linalg.norm(r) > 1:
        r = r / np.linalg.norm(r)
    rho = state_from_bloch(r)
    np.testing.assert_allclose(bloch_vector(rho), r, atol=1e-15)
    assert is_physical(rho)


def test_density_matrix_layout():
    m = density_matrix(np.array([1 + 2j, 1 - 2j, 0.25, 0.75]))
    np.testing.assert_array_equal(m, [[0.25, 1 + 2j], [1 - 2j, 0.75]])
    assert density_matrix(np.zeros((5, 3, 4))).shape == (5, 3, 2, 2)


@pytest.mark.parametrize(
    "rho",
    [
        [0.1, 0.2, 0.5, 0.5],  # not Hermitian
        [0, 0, 0.6, 0.6],  # trace 1.2
        [0.6, 0.6, 0.5, 0.5],  # negative eigenvalue
        [0, 0, 0.5 + 1e-6j, 0.5],  # complex population
    ],
)
def test_is_physical_rejects(rho):
    assert not is_physical(np.array(rho, dtype=complex))


def test_is_physical_positivity_tolerance():
    rho = state_from_bloch([0, 0, 1 + 1e-9])
    assert not is_physical(rho)
    assert is_physical(rho, positivity_tol=1e-8)


@pytest.mark.parametrize("d,g", [(math.nan, 1), (1, math.inf), (1, -0.1)])
def test_control_params_validation(d, g):
    with pytest.raises(ValueError):
        ControlParams(d, g)


def test_density_vector_parts_round_trip():
    v = DensityVector.from_parts(CoherenceParts(-0.1, 0.2), 0.7)
    assert (v.rho_re, v.rho_im) == (-0.1, 0.2)
    assert v.rho_eg == np.conj(v.rho_ge)
    assert DensityVector.from_array(np.asarray(v)) == v
    assert v.rho_ee == pytest.approx(0.3)


def test_fixed_dissipation_shares_gamma():
    post = ControlParams(4.0, 2.0)
    exp = QuenchExperiment.fixed_dissipation(1.0, 3.0, post)
    assert exp.pre_I == ControlParams(1.0, 2.0)
    assert exp.pre_II == ControlParams(3.0, 2.0)
