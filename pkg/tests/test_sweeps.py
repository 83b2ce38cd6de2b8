import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvdqd.model import ModelParams, derived_couplings
from nvdqd.sweeps import (
    NoiseParams,
    SweepResult,
    delta_sweep,
    ensemble_concurrence,
    ensemble_late_concurrence,
    find_tc,
    sample_noise,
    steady_concurrence,
    tc_map,
    time_to_threshold,
)
from nvdqd.transport import default_initial_state, model_liouvillian, propagate, time_grid


# -- noise sampling ---------------------------------------------------------------

def test_zero_variance_gives_zero_detunings():
    assert not np.any(sample_noise(NoiseParams(0.0, samples=10)))


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_sample_statistics(seed):
    noise = NoiseParams.from_sqrt_mhz(0.1, samples=200, seed=seed)
    d = sample_noise(noise)
    assert d.shape == (200, 2)
    assert np.all(np.abs(d.mean(axis=0)) < 4 * np.sqrt(noise.nu / 200))
    assert np.all(np.abs(d.var(axis=0, ddof=1) / noise.nu - 1) < 0.3)


def test_sampling_deterministic():
    a = sample_noise(NoiseParams(1.0, 50, seed=4))
    b = sample_noise(NoiseParams(1.0, 50, seed=4))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, sample_noise(NoiseParams(1.0, 50, seed=5)))


def test_noise_validation():
    with pytest.raises(ValueError):
        NoiseParams(-1.0)
    with pytest.raises(ValueError):
        NoiseParams(1.0, samples=0)


# -- ensembles ----------------------------------------------------------------------

def test_zero_noise_ensemble_equals_noiseless(fig2_params):
    times = time_grid(20.0, 5.0)
    ens = ensemble_concurrence(fig2_params, NoiseParams(0.0, samples=2), times)
    ref = propagate(model_liouvillian(fig2_params), default_initial_state(), times)
    np.testing.assert_allclose(ens.concurrence, ref.concurrence, atol=1e-12)


def test_ensemble_bit_identical_under_seed(fig2_params):
    times = time_grid(10.0, 5.0)
    noise = NoiseParams.from_sqrt_mhz(0.1, samples=3, seed=9)
    a = ensemble_concurrence(fig2_params, noise, times).concurrence
    b = ensemble_concurrence(fig2_params, noise, times).concurrence
    np.testing.assert_array_equal(a, b)


def test_late_concurrence_matches_stepped_ensemble(fig2_params):
    noise = NoiseParams.from_sqrt_mhz(0.1, samples=3, seed=2)
    stepped = ensemble_concurrence(fig2_params, noise, [0.0, 60.0]).concurrence[-1]
    assert ensemble_late_concurrence(fig2_params, noise, 60.0) == pytest.approx(stepped, abs=1e-9)


def test_noise_degrades_small_ensemble(fig2_params):
    late = [
        ensemble_late_concurrence(fig2_params, NoiseParams.from_sqrt_mhz(s, samples=20, seed=0))
        for s in (0.02, 0.1, 0.5)
    ]
    assert late[0] > late[1] > late[2]
    assert late[0] >= 0.8


# -- Delta robustness -----------------------------------------------------------------

def test_delta_sweep_trend(fig2_params):
    b = delta_sweep(fig2_params, (-1.0, 0.0, 1.0))
    # t_c lands a quarter microsecond after 45 us, so C(45 us) sits just below 0.99
    assert b.at(delta_ueV=0.0) >= 0.985
    assert delta_sweep(fig2_params, (0.0,), t_eval=46.0).values[0] >= 0.99
    assert b.at(delta_ueV=1.0) < b.at(delta_ueV=0.0)
    assert b.at(delta_ueV=-1.0) < b.at(delta_ueV=0.0)
    c = delta_sweep(fig2_params.with_updates(gamma_GHz=2.0, J_over_2pi_MHz=36.0), (-1.0, 0.0, 1.0))
    assert np.ptp(c.values) < np.ptp(b.values)


@pytest.mark.parametrize("delta", [-1.0, 0.0, 1.0])
def test_steady_concurrence_is_one(fig2_params, delta):
    assert steady_concurrence(fig2_params.with_updates(delta_ueV=delta)) == pytest.approx(1.0, abs=1e-6)


# -- t_c ------------------------------------------------------------------------------------

def test_find_tc_constant_one():
    t = np.linspace(0, 10, 11)
    res = find_tc((t, np.ones_like(t)))
    assert res.converged and res.t_c == 0.0


def test_find_tc_requires_hold_and_length():
    t = np.linspace(0, 10, 11)
    c = np.array([0, 0.5, 0.995, 0.5, 0.99, 1, 1, 1, 1, 1, 1.0])
    res = find_tc((t, c))
    assert res.t_c == 4.0
    assert not res.converged  # 10 < 3 * 4
    assert find_tc((t, c), 0.999).t_c == 5.0
    assert not find_tc((t, np.zeros_like(t))).converged


@settings(max_examples=50)
@given(st.lists(st.floats(0, 1), min_size=3, max_size=30), st.floats(0.1, 0.9), st.floats(0.0, 0.09))
def test_tc_monotone_in_threshold(values, low, gap):
    t = np.arange(len(values), dtype=float)
    a, b = find_tc((t, np.array(values)), low), find_tc((t, np.array(values)), low + gap)
    if b.t_c is not None:
        assert a.t_c is not None and a.t_c <= b.t_c


def test_fig2_tc(fig2_trajectory):
    res = find_tc(fig2_trajectory)
    assert res.converged
    assert 36.0 <= res.t_c <= 54.0


def test_no_tilt_never_converges():
    res = time_to_threshold(ModelParams().with_updates(alpha_rad=0.0), max_horizon=300.0)
    assert not res.converged


def test_tc_row_at_optimal_tunneling(fig2_params):
    res = tc_map(fig2_params, (24.0,), (0.2, 0.4, 0.6, 0.8, 1.0))
    assert res.at(J_over_2pi_MHz=24.0, omega_over_2pi_MHz=0.6) == pytest.approx(45.0, rel=0.2)
    best = res.argmin()["omega_over_2pi_MHz"]
    grid = res.axes["omega_over_2pi_MHz"]
    match = derived_couplings(fig2_params).gamma_kappa / (2 * np.pi)
    assert abs(np.argmin(np.abs(grid - best)) - np.argmin(np.abs(grid - match))) <= 1


def test_tc_map_validation(fig2_params):
    with pytest.raises(ValueError):
        tc_map(fig2_params, (), (0.6,))


def test_sweep_result_io(tmp_path):
    res = SweepResult(
        {"a": np.array([1.0, 2.0]), "b": np.array([3.0])},
        np.array([[5.0], [np.nan]]),
        np.array([[True], [False]]),
        "t_c_us",
    )
    assert res.argmin() == {"a": 1.0, "b": 3.0, "t_c_us": 5.0}
    res.to_csv(tmp_path / "s.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0].startswith("# nvdqd sweep v1")
    assert lines[1] == "a,b,t_c_us,converged"
    assert len(lines) == 4
