"""Noise ensembles, Delta robustness and the t_c optimization map."""
from __future__ import annotations

import csv
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .config import angular_to_mhz
from .model import ModelParams
from .observables import concurrence, observe
from .operators import density_diagnostics, partial_trace_dqd
from .transport import (
    DEFAULT_STEP,
    Trajectory,
    default_initial_state,
    evolve,
    merge_diagnostics,
    model_liouvillian,
    propagate,
    steady_state,
    time_grid,
)

DEFAULT_THRESHOLD = 0.99
DEFAULT_J_GRID_MHZ = (8.0, 16.0, 24.0, 32.0, 40.0)
DEFAULT_OMEGA_GRID_MHZ = (0.2, 0.4, 0.6, 0.8, 1.0)
DEFAULT_NOISE_SQRT_NU_MHZ = (0.02, 0.1, 0.5)
DEFAULT_DELTAS_UEV = (-1.0, -0.5, 0.0, 0.5, 1.0)


def _map(fn, items, workers: int):
    """Ordered map; results come back in input order for any worker count."""
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# -- noise -----------------------------------------------------------------------

@dataclass(frozen=True)
class NoiseParams:
    nu: float  # variance of delta_j, (rad/us)^2
    samples: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError("variance must be non-negative")
        if self.samples < 1:
            raise ValueError("need at least one sample")

    @classmethod
    def from_sqrt_mhz(cls, sqrt_nu_over_2pi_mhz: float, samples: int = 200, seed: int = 0) -> "NoiseParams":
        return cls((2 * np.pi * sqrt_nu_over_2pi_mhz) ** 2, samples, seed)


def sample_noise(noise: NoiseParams) -> np.ndarray:
    """(samples, 2) array of independent N(0, nu) detunings (delta_L, delta_R)."""
    rng = np.random.default_rng(noise.seed)
    return rng.normal(0.0, np.sqrt(noise.nu), size=(noise.samples, 2))


def _sample_states(args) -> np.ndarray:
    params, d_l, d_r, times, step = args
    p = params.with_updates(delta_L_over_2pi_MHz=angular_to_mhz(d_l), delta_R_over_2pi_MHz=angular_to_mhz(d_r))
    tr = propagate(model_liouvillian(p, step), default_initial_state(), times, keep_states=True)
    return np.array(tr.states)


def ensemble_concurrence(
    params: ModelParams,
    noise: NoiseParams,
    times: Sequence[float],
    step: float = DEFAULT_STEP,
    workers: int = 1,
) -> Trajectory:
    """Observables of the noise-averaged state rho_bar(t) = mean over samples of rho(t).

    Each sample carries quasi-static detunings delta_j on the dressed qubits.
    """
    times = np.asarray(times, dtype=float)
    deltas = sample_noise(noise)
    jobs = [(params, dl, dr, times, step) for dl, dr in deltas]
    acc = None
    for states in _map(_sample_states, jobs, workers):
        acc = states if acc is None else acc + states
    mean = acc / len(jobs)
    records = [observe(r) for r in mean]
    meta = {"nu": noise.nu, "samples": noise.samples, "seed": noise.seed, "step_us": step}
    return Trajectory(times, records, None, meta, {}, mean[-1])


def _sample_final(args) -> np.ndarray:
    params, d_l, d_r, t_late = args
    p = params.with_updates(delta_L_over_2pi_MHz=angular_to_mhz(d_l), delta_R_over_2pi_MHz=angular_to_mhz(d_r))
    return evolve(model_liouvillian(p), default_initial_state(), t_late)


def ensemble_late_state(
    params: ModelParams, noise: NoiseParams, t_late: float = 135.0, workers: int = 1
) -> tuple[np.ndarray, dict]:
    """Noise-averaged full state at one late time, with worst per-sample diagnostics.

    Same samples as :func:`ensemble_concurrence` for equal ``noise``, but each
    sample is evolved with one exponential instead of the stepped map.
    """
    jobs = [(params, dl, dr, t_late) for dl, dr in sample_noise(noise)]
    states = _map(_sample_final, jobs, workers)
    mean = sum(states) / len(states)
    diag = merge_diagnostics(*(density_diagnostics(r) for r in states), density_diagnostics(mean))
    return mean, diag


def ensemble_late_concurrence(
    params: ModelParams, noise: NoiseParams, t_late: float = 135.0, workers: int = 1
) -> float:
    mean, _ = ensemble_late_state(params, noise, t_late, workers)
    return concurrence(partial_trace_dqd(mean))


# -- t_c -------------------------------------------------------------------------------

@dataclass
class TcResult:
    t_c: float | None
    converged: bool
    reason: str = ""
    diagnostics: dict = field(default_factory=dict)


def find_tc(trajectory: Trajectory | tuple, threshold: float = DEFAULT_THRESHOLD) -> TcResult:
    """Earliest time after which the concurrence stays >= threshold to the end.

    The run must last at least 3 t_c for the value to count as converged.
    Accepts a Trajectory or a ``(times, concurrence)`` pair.
    """
    if isinstance(trajectory, Trajectory):
        times, conc = trajectory.times, trajectory.concurrence
    else:
        times, conc = map(np.asarray, trajectory)
    if len(times) == 0:
        return TcResult(None, False, "empty trajectory")
    below = np.flatnonzero(conc < threshold)
    if below.size and below[-1] == len(times) - 1:
        return TcResult(None, False, "threshold not reached")
    t_c = float(times[below[-1] + 1]) if below.size else float(times[0])
    if times[-1] < 3 * t_c:
        return TcResult(t_c, False, "run shorter than 3 t_c")
    return TcResult(t_c, True)


def time_to_threshold(
    params: ModelParams,
    threshold: float = DEFAULT_THRESHOLD,
    dt_out: float = 0.5,
    horizon: float = 150.0,
    max_horizon: float = 1200.0,
) -> TcResult:
    """Propagate from the mixed state, doubling the run until t_c is established."""
    lv = model_liouvillian(params, step=dt_out)
    rho = default_initial_state()
    times, conc, diag = [], [], {}
    t_start, t_end = 0.0, horizon
    while True:
        grid = time_grid(t_end - t_start, dt_out, dt_out)
        if t_start > 0:
            grid = grid[1:]
        tr = propagate(lv, rho, grid)
        times.extend(t_start + tr.times)
        conc.extend(tr.concurrence)
        rho = tr.final_state
        diag = merge_diagnostics(diag, tr.diagnostics)
        res = find_tc((np.array(times), np.array(conc)), threshold)
        if res.converged or t_end >= max_horizon:
            res.diagnostics = diag
            return res
        t_start, t_end = t_end, min(2 * t_end, max_horizon)


# -- sweeps ----------------------------------------------------------------------------

@dataclass
class SweepResult:
    axes: dict[str, np.ndarray]
    values: np.ndarray
    converged: np.ndarray
    quantity: str
    threshold: float | None = None
    metadata: dict = field(default_factory=dict)

    def long_rows(self) -> list[dict]:
        names = list(self.axes)
        rows = []
        for idx in itertools.product(*(range(len(a)) for a in self.axes.values())):
            row = {n: float(self.axes[n][i]) for n, i in zip(names, idx)}
            v = self.values[idx]
            row[self.quantity] = float(v) if np.isfinite(v) else float("nan")
            row["converged"] = bool(self.converged[idx])
            rows.append(row)
        return rows

    def to_csv(self, path: str | Path) -> None:
        rows = self.long_rows()
        with open(path, "w", newline="") as fh:
            fh.write(f"# nvdqd sweep v1 quantity={self.quantity}\n")
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)

    def argmin(self) -> dict[str, float]:
        vals = np.where(self.converged, self.values, np.inf)
        idx = np.unravel_index(np.argmin(vals), vals.shape)
        out = {n: float(a[i]) for (n, a), i in zip(self.axes.items(), idx)}
        out[self.quantity] = float(self.values[idx])
        return out

    def at(self, **coords) -> float:
        idx = tuple(int(np.argmin(np.abs(np.asarray(self.axes[n]) - coords[n]))) for n in self.axes)
        return float(self.values[idx])


def _concurrence_at(args) -> tuple[float, dict]:
    params, t_eval, step = args
    # intermediate outputs every ~5 us feed the physicality diagnostics
    grid = time_grid(t_eval, 5.0, step)
    times = np.append(grid[grid < t_eval - 0.5 * step], t_eval)
    tr = propagate(model_liouvillian(params, step), default_initial_state(), times)
    return float(tr.concurrence[-1]), tr.diagnostics


def concurrence_grid(
    params: ModelParams,
    axes: Mapping[str, Sequence[float]],
    t_eval: float = 45.0,
    step: float = DEFAULT_STEP,
    workers: int = 1,
) -> SweepResult:
    """C(t_eval) from the mixed state over a Cartesian grid of flat parameter keys."""
    axes = {k: np.asarray(v, dtype=float) for k, v in axes.items()}
    names = list(axes)
    points = list(itertools.product(*axes.values()))
    jobs = [(params.with_updates(**dict(zip(names, pt))), t_eval, step) for pt in points]
    res = _map(_concurrence_at, jobs, workers)
    vals = np.array([c for c, _ in res]).reshape([len(a) for a in axes.values()])
    meta = {"t_eval_us": t_eval, "diagnostics": merge_diagnostics(*(d for _, d in res))}
    return SweepResult(axes, vals, np.ones(vals.shape, bool), "concurrence", None, meta)


def delta_sweep(params: ModelParams, deltas_ueV: Sequence[float] = DEFAULT_DELTAS_UEV, t_eval: float = 45.0,
                step: float = DEFAULT_STEP, workers: int = 1) -> SweepResult:
    return concurrence_grid(params, {"delta_ueV": deltas_ueV}, t_eval, step, workers)


def _tc_point(args) -> TcResult:
    params, threshold, dt_out, horizon, max_horizon = args
    return time_to_threshold(params, threshold, dt_out, horizon, max_horizon)


def tc_map(
    params: ModelParams,
    J_grid_MHz: Sequence[float] = DEFAULT_J_GRID_MHZ,
    Omega_grid_MHz: Sequence[float] = DEFAULT_OMEGA_GRID_MHZ,
    threshold: float = DEFAULT_THRESHOLD,
    dt_out: float = 0.5,
    horizon: float = 150.0,
    max_horizon: float = 1200.0,
    workers: int = 1,
) -> SweepResult:
    if len(J_grid_MHz) == 0 or len(Omega_grid_MHz) == 0:
        raise ValueError("grids must be non-empty")
    jobs = [
        (params.with_updates(J_over_2pi_MHz=j, omega_over_2pi_MHz=o), threshold, dt_out, horizon, max_horizon)
        for j in J_grid_MHz
        for o in Omega_grid_MHz
    ]
    res = _map(_tc_point, jobs, workers)
    shape = (len(J_grid_MHz), len(Omega_grid_MHz))
    vals = np.array([r.t_c if r.converged else np.nan for r in res]).reshape(shape)
    conv = np.array([r.converged for r in res]).reshape(shape)
    axes = {"J_over_2pi_MHz": np.asarray(J_grid_MHz, float), "omega_over_2pi_MHz": np.asarray(Omega_grid_MHz, float)}
    meta = {"dt_out_us": dt_out, "max_horizon_us": max_horizon,
            "diagnostics": merge_diagnostics(*(r.diagnostics for r in res))}
    return SweepResult(axes, vals, conv, "t_c_us", threshold, meta)


def steady_concurrence(params: ModelParams) -> float:
    ss = steady_state(model_liouvillian(params))
    if not ss.unique:
        raise ValueError("steady state is not unique")
    return concurrence(partial_trace_dqd(ss.rho))
