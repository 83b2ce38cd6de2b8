from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvdqd.config import CONSTANTS, mhz_to_angular, ueV_to_angular
from nvdqd.model import (
    BELL_ORDER,
    ModelParams,
    NVDriveParams,
    QDShellParams,
    build_h11,
    build_hamiltonian,
    build_jump_operators,
    coupled_bell_transform,
    dark_state_report,
    derived_couplings,
    g_tensor,
    kramers_doublets,
    verify_rwa_dressing,
)
from nvdqd.operators import BELL, LAYOUT, is_hermitian


# -- g tensor ------------------------------------------------------------------

def test_g_tensor_limits():
    np.testing.assert_allclose(g_tensor(0.0, 30, 1), np.diag([30, 1, 1]))
    np.testing.assert_allclose(g_tensor(np.pi / 2, 30, 1), np.diag([1, 1, 30]), atol=1e-13)


def test_g_tensor_offdiagonal():
    g = g_tensor(np.pi / 36, 30, 1)
    expected = 29 * np.sin(np.radians(5)) * np.cos(np.radians(5))
    assert g[0, 2] == pytest.approx(expected, rel=1e-12)
    assert g[0, 2] == pytest.approx(2.5179, abs=1e-4)
    np.testing.assert_allclose(g, g.T)


# -- Kramers doublets ----------------------------------------------------------------

def test_kramers_no_valley_mixing():
    sh = QDShellParams(delta_KKp=0.0, delta_SO=3.0, g_orb=5.0)
    k = kramers_doublets(sh)
    assert k.zeta == 0.0
    assert k.gap == pytest.approx(3.0)
    assert k.g_par == pytest.approx(CONSTANTS.g_s + 10.0)
    assert k.g_perp == pytest.approx(0.0)


def test_kramers_pythagorean_gap():
    k = kramers_doublets(QDShellParams(delta_SO=3.0, delta_KKp=4.0))
    assert k.gap == pytest.approx(5.0)
    assert np.tan(k.zeta) == pytest.approx(4 / 3)
    assert k.numeric_gap == pytest.approx(5.0)


def test_kramers_closed_form_matches_diagonalization():
    k = kramers_doublets(QDShellParams(delta_SO=1.3, delta_KKp=0.7, g_orb=4.0))
    assert k.subspace_error < 1e-12
    assert k.numeric_g_par == pytest.approx(k.g_par, rel=1e-10)
    assert k.numeric_g_perp == pytest.approx(k.g_perp, rel=1e-10)
    ch, sh = np.cos(k.zeta / 2), np.sin(k.zeta / 2)
    np.testing.assert_allclose(np.abs(k.eigenvectors[[0, 2], 0]), [ch, sh])


def test_kramers_defaults_reproduce_figure_g_factors():
    k = kramers_doublets(QDShellParams())
    assert k.g_par == pytest.approx(30.0, rel=1e-12)
    assert k.g_perp == pytest.approx(1.0, rel=1e-12)


def test_kramers_zero_gap_rejected():
    with pytest.raises(ValueError):
        kramers_doublets(QDShellParams(delta_SO=0.0, delta_KKp=0.0))


@given(st.floats(0.01, 10), st.floats(0.0, 10))
def test_kramers_gperp_bounded(dso, dkk):
    assert kramers_doublets(QDShellParams(delta_SO=dso, delta_KKp=dkk)).g_perp <= CONSTANTS.g_s + 1e-12


# -- derived couplings --------------------------------------------------------------------

def test_derived_couplings_fig2():
    dc = derived_couplings(ModelParams())
    assert dc.xi == pytest.approx(1.2203, abs=1e-4)
    assert dc.eta == pytest.approx(2.5179, abs=1e-4)


def test_dipole_strength_oracle():
    # mu0/4pi = 1e-7, CODATA Bohr magneton and Planck constant typed in directly
    mu_b, h = 9.2740100783e-24, 6.62607015e-34
    kappa_hz = 1e-7 * mu_b**2 * 2.0023 / (6e-9) ** 3 / h
    dc = derived_couplings(ModelParams())
    assert dc.kappa_L / (2 * np.pi) == pytest.approx(kappa_hz * 1e-6, rel=1e-6)
    assert dc.kappa_L / (2 * np.pi) == pytest.approx(0.12, abs=0.005)


def test_zeeman_oracle():
    dc = derived_couplings(ModelParams())
    assert dc.epsilon / (2 * np.pi) == pytest.approx(13.996e3 * 5e-3 / 2, rel=1e-4)
    assert dc.epsilon / (2 * np.pi) == pytest.approx(35.0, abs=0.05)


def test_alpha_sign_swaps_dots():
    p = ModelParams()
    q = p.with_updates(alpha_rad=-p.shell.alpha)
    a, b = derived_couplings(p), derived_couplings(q)
    assert b.xi == pytest.approx(a.xi)
    assert b.eta == pytest.approx(-a.eta)
    np.testing.assert_allclose(b.n_tilde_L, a.n_tilde_R)
    np.testing.assert_allclose(b.n_tilde_R, a.n_tilde_L)


# -- Hamiltonian ----------------------------------------------------------------------------

def test_only_detuning_survives():
    p = ModelParams().with_updates(
        J_over_2pi_MHz=0, omega_over_2pi_MHz=0, B_z_mT=0, r_nm=1e9, delta_ueV=1.0
    )
    h = build_hamiltonian(p)
    sg = LAYOUT.sector_slice("(0,2)")
    expected = np.zeros((28, 28))
    expected[sg, sg] = np.eye(4) * ueV_to_angular(1.0)
    np.testing.assert_allclose(h, expected, atol=1e-15)


def _bell_block(params):
    u = coupled_bell_transform()
    return u.conj().T @ build_h11(params) @ u


def test_dark_state_row_vanishes():
    hb = _bell_block(ModelParams())
    k = 2 * 4 + BELL_ORDER.index("PhiMinus")
    row = hb[k].copy()
    row[k] = 0
    assert np.max(np.abs(row)) < 1e-13
    col = hb[:, k].copy()
    col[k] = 0
    assert np.max(np.abs(col)) < 1e-13


def test_singlet_tplus_element():
    p = ModelParams()
    dc = derived_couplings(p)
    hb = _bell_block(p)
    for b in range(4):
        s, tp = 3 * 4 + b, 0 * 4 + b
        assert abs(hb[s, tp]) == pytest.approx(np.sqrt(2) * dc.epsilon * dc.eta, rel=1e-12)


def test_eta_zero_decouples_triplets_from_singlet():
    h = build_h11(ModelParams().with_updates(alpha_rad=0.0))
    for t in (0, 1):
        assert np.max(np.abs(h[4 * t:4 * t + 4, 12:16])) < 1e-13


@settings(max_examples=25, deadline=None)
@given(
    st.floats(0, 2), st.floats(0, 2), st.floats(0, 80), st.floats(-2, 2), st.floats(3, 12), st.floats(0, 0.5)
)
def test_hamiltonian_hermitian(om_l, om_r, j, delta, r, alpha):
    p = ModelParams().with_updates(
        omega_L_over_2pi_MHz=om_l, omega_R_over_2pi_MHz=om_r, J_over_2pi_MHz=j,
        delta_ueV=delta, r_L_nm=r, alpha_rad=alpha,
    )
    assert is_hermitian(build_hamiltonian(p), 1e-12)


# -- jump operators -------------------------------------------------------------------------

def _jump(label):
    return next(j.operator for j in build_jump_operators() if j.label == label)


def test_injection_actions():
    a_up = _jump("a1_0^dag")
    nv = BELL["PsiPlus"]
    out = a_up @ LAYOUT.ket("up_R", nv)
    np.testing.assert_allclose(out, LAYOUT.ket("Tplus", nv), atol=1e-15)
    out = a_up @ LAYOUT.ket("down_R", nv)
    np.testing.assert_allclose(out, (LAYOUT.ket("T0", nv) - LAYOUT.ket("S", nv)) / np.sqrt(2), atol=1e-15)


def test_ejection_action():
    nv = BELL["PhiMinus"]
    np.testing.assert_allclose(_jump("a2_0") @ LAYOUT.ket("Sg", nv), LAYOUT.ket("down_R", nv))
    np.testing.assert_allclose(_jump("a2_1") @ LAYOUT.ket("Sg", nv), LAYOUT.ket("up_R", nv))


def test_jump_rate_tags():
    tags = [j.rate_tag for j in build_jump_operators()]
    assert tags == ["gamma_in", "gamma_in", "gamma_out", "gamma_out"]


# -- dark-state report ------------------------------------------------------------------------

def test_dark_state_report_fig2():
    rep = dark_state_report(build_h11(ModelParams()))
    assert rep.is_unique_dark
    assert rep.dark_states == ["T0|PhiMinus"]


def test_dark_state_report_kappa_mismatch():
    rep = dark_state_report(build_h11(ModelParams().with_updates(r_R_nm=5.0)))
    assert not rep.is_unique_dark
    assert rep.coupled_norms["T0|PhiMinus"] > 1e-3


def test_dark_state_report_drive_mismatch():
    rep = dark_state_report(build_h11(ModelParams().with_updates(omega_R_over_2pi_MHz=0.7)))
    assert not rep.is_unique_dark


def test_dark_state_report_shape_check():
    with pytest.raises(ValueError):
        dark_state_report(np.eye(4))


# -- RWA ------------------------------------------------------------------------------------------

def _drive(ratio):
    d = NVDriveParams()
    return replace(d, omega_L=ratio * d.omega_0, omega_R=ratio * d.omega_0)


def test_rwa_no_drive():
    rep = verify_rwa_dressing(_drive(0.0), 0.05)
    assert rep.max_trace_distance < 1e-12


def test_rwa_small_ratio_and_scaling():
    d1 = _drive(1e-3)
    r1 = verify_rwa_dressing(d1, 2 * np.pi / d1.omega_L)
    assert r1.max_trace_distance < 1e-2
    # same absolute duration, half the drive
    d2 = _drive(5e-4)
    r2 = verify_rwa_dressing(d2, 2 * np.pi / d1.omega_L)
    assert 0.35 < r2.max_trace_distance / r1.max_trace_distance < 0.65


def test_rwa_rejects_bad_duration():
    with pytest.raises(ValueError):
        verify_rwa_dressing(NVDriveParams(), 0.0)


# -- flat parameters -----------------------------------------------------------------------------

def test_flat_roundtrip_and_aliases():
    p = ModelParams()
    back = ModelParams.from_flat(p.to_flat()).to_flat()
    for k, v in p.to_flat().items():
        assert back[k] == pytest.approx(v, rel=1e-14, abs=1e-300)
    q = p.with_updates(omega_over_2pi_MHz=0.4, gamma_GHz=2.0)
    assert q.drive.omega_L == q.drive.omega_R == pytest.approx(mhz_to_angular(0.4))
    assert q.transport.gamma_in == q.transport.gamma_out == pytest.approx(2000.0)


def test_unknown_key_rejected():
    with pytest.raises(KeyError):
        ModelParams().with_updates(omega_MHz=1.0)


def test_invalid_values_rejected():
    with pytest.raises(ValueError):
        ModelParams().with_updates(r_L_nm=-1)
    with pytest.raises(ValueError):
        ModelParams().with_updates(gamma_in_GHz=0)
