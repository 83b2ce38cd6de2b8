import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvdqd.model import ModelParams, dark_state_report, derived_couplings
from nvdqd.operators import is_unitary, matrix_exponential
from nvdqd.pulses import (
    PulseSequence,
    convergence_report,
    effective_hamiltonian_target,
    engineered_h11,
    matched_parameters,
    matching_angle,
    rotated_hamiltonian,
    stroboscopic_propagator,
    system_hamiltonian,
)


@pytest.fixture(scope="module")
def mismatched():
    p = ModelParams()
    return p.with_updates(r_R_nm=p.geometry.r_L * 1e9 * 0.8 ** (1 / 3))


def test_matching_angle_examples():
    assert matching_angle(1.0, 1.0) == 0.0
    assert matching_angle(0.5, 1.0) == pytest.approx(np.pi / 2)
    assert matching_angle(0.8, 1.0) == pytest.approx(np.arccos(0.6))
    assert matching_angle(0.8, 1.0) == pytest.approx(0.9273, abs=1e-4)


@pytest.mark.parametrize("small,large", [(0.0, 1.0), (1.2, 1.0), (0.5, 0.0), (-0.1, 1.0)])
def test_matching_angle_rejects(small, large):
    with pytest.raises(ValueError):
        matching_angle(small, large)


def test_sequence_validation():
    with pytest.raises(ValueError):
        PulseSequence(0.1, 0.0)
    with pytest.raises(ValueError):
        PulseSequence(0.1, 0.01, "X")


def test_zero_angle_is_plain_evolution():
    hs = system_hamiltonian(ModelParams())
    u = stroboscopic_propagator(hs, PulseSequence(0.0, 0.013), cycles=7)
    np.testing.assert_allclose(u, matrix_exponential(-1j * 4 * 0.013 * 7 * hs), atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(st.floats(-np.pi, np.pi), st.floats(1e-3, 0.05), st.integers(1, 20), st.sampled_from(["L", "R"]))
def test_propagator_unitary(theta, tau0, cycles, side):
    hs = system_hamiltonian(ModelParams())
    u = stroboscopic_propagator(hs, PulseSequence(theta, tau0, side), cycles)
    assert is_unitary(u, 1e-10)
    assert abs(abs(np.linalg.det(u)) - 1) < 1e-10


@pytest.mark.parametrize("sign", [1, -1])
@pytest.mark.parametrize("side", ["L", "R"])
def test_rotated_generator_closed_form(mismatched, sign, side):
    theta, tau0 = 0.7, 0.02
    seq = PulseSequence(theta, tau0, side)
    hs = system_hamiltonian(mismatched)
    p = seq.rotation(sign)
    lhs = p @ matrix_exponential(-1j * tau0 * hs) @ p.conj().T
    rhs = matrix_exponential(-1j * tau0 * rotated_hamiltonian(mismatched, theta, sign, side))
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_effective_target_limits(mismatched):
    hs = system_hamiltonian(mismatched)
    np.testing.assert_allclose(effective_hamiltonian_target(mismatched, 0.0), hs, atol=1e-14)
    no_right = mismatched.with_updates(omega_R_over_2pi_MHz=0.0, r_R_nm=1e12)
    np.testing.assert_allclose(
        effective_hamiltonian_target(mismatched, np.pi), system_hamiltonian(no_right), atol=1e-12
    )
    dc = derived_couplings(mismatched)
    half = system_hamiltonian(mismatched.with_updates(
        omega_R_over_2pi_MHz=mismatched.drive.omega_R / (2 * np.pi) / 2,
        r_R_nm=mismatched.geometry.r_R * 1e9 * 2 ** (1 / 3),
    ))
    np.testing.assert_allclose(effective_hamiltonian_target(mismatched, np.pi / 2), half, atol=1e-10 * dc.kappa_R)


def test_theta_parity(mismatched):
    np.testing.assert_allclose(
        effective_hamiltonian_target(mismatched, 0.6), effective_hamiltonian_target(mismatched, -0.6)
    )
    a = convergence_report(mismatched, 0.6, cycles=(100, 200))
    b = convergence_report(mismatched, -0.6, cycles=(100, 200))
    np.testing.assert_allclose(a.distance, b.distance, rtol=1e-6)


def test_transparent_for_equal_couplings():
    p = ModelParams()
    theta, side, matched = matched_parameters(p)
    assert theta == 0.0
    hs = system_hamiltonian(matched)
    for tau0 in (0.003, 0.04):
        u = stroboscopic_propagator(hs, PulseSequence(theta, tau0, side), 5)
        np.testing.assert_allclose(u, matrix_exponential(-1j * 20 * tau0 * hs), atol=1e-12)


def test_matched_parameters_pick_larger_coupling(mismatched):
    theta, side, matched = matched_parameters(mismatched)
    assert side == "R"
    assert theta == pytest.approx(np.arccos(0.6))
    c = (1 + np.cos(theta)) / 2
    assert c * matched.drive.omega_R == pytest.approx(matched.drive.omega_L)
    flipped = ModelParams().with_updates(r_L_nm=5.0)
    assert matched_parameters(flipped)[1] == "L"


def test_convergence_first_order(mismatched):
    theta, side, matched = matched_parameters(mismatched)
    rep = convergence_report(matched, theta, target_side=side)
    assert rep.tau0.max() / rep.tau0.min() == pytest.approx(10.0)
    assert np.all(np.diff(rep.distance) < 0)
    assert rep.exponent >= 1.0
    assert rep.distance[-1] < 2e-3


def test_engineered_block_restores_dark_state(mismatched):
    assert not dark_state_report(
        engineered_h11(mismatched, 0.0)
    ).is_unique_dark
    theta, side, matched = matched_parameters(mismatched)
    assert dark_state_report(engineered_h11(matched, theta, side)).is_unique_dark
