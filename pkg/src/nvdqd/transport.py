"""Quantum-transport Liouvillian, exact propagation and steady state.

Vectorization is column stacking, ``vec(rho) = rho.reshape(-1, order="F")``,
so ``vec(A X B) = (B^T kron A) vec(X)``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import TOL, Tolerances
from .model import JumpOperator, ModelParams, TransportParams, build_hamiltonian, build_jump_operators
from .observables import ObservableRecord, observe
from .operators import (
    LAYOUT,
    NumericalStabilityError,
    SectorLayout,
    check_density_matrix,
    dagger,
    density_diagnostics,
    matrix_exponential,
    maximally_mixed,
)

DEFAULT_STEP = 0.05  # us

CSV_SCHEMA = "# nvdqd trajectory v1"
CSV_COLUMNS = (
    "t_us", "I_over_eGout", "P_Tplus", "P_Tminus", "P_T0", "P_S", "P_Sg",
    "P_PhiPlus", "P_PhiMinus", "P_PsiPlus", "P_PsiMinus", "concurrence",
)


class RankAmbiguityError(RuntimeError):
    """Singular values too close to the null-space threshold to decide the rank."""


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, n: int | None = None) -> np.ndarray:
    n = n or int(round(np.sqrt(v.size)))
    return v.reshape(n, n, order="F")


def lindblad_generator(h: np.ndarray, collapse: Iterable[tuple[float, np.ndarray]] = ()) -> np.ndarray:
    """Superoperator of -i[H, .] + sum_k g_k (c rho c^+ - {c^+ c, rho}/2)."""
    h = np.asarray(h, dtype=complex)
    n = h.shape[0]
    if h.shape != (n, n):
        raise ValueError("Hamiltonian must be square")
    eye = np.eye(n)
    gen = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for rate, c in collapse:
        c = np.asarray(c, dtype=complex)
        if c.shape != (n, n):
            raise ValueError(f"jump operator shape {c.shape} does not match H {h.shape}")
        cdc = dagger(c) @ c
        gen = gen + rate * (np.kron(c.conj(), c) - 0.5 * np.kron(eye, cdc) - 0.5 * np.kron(cdc.T, eye))
    return gen


@dataclass(frozen=True, eq=False)
class LiouvillianPropagator:
    """Time-independent generator with its exact fixed-step exponential map."""

    generator: np.ndarray
    step: float = DEFAULT_STEP
    _maps: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        g = self.generator
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ValueError("generator must be square")
        if self.step <= 0:
            raise ValueError("step must be positive")

    @property
    def dim(self) -> int:
        return int(round(np.sqrt(self.generator.shape[0])))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.generator @ vec(rho), self.dim)

    def with_step(self, step: float) -> "LiouvillianPropagator":
        return LiouvillianPropagator(self.generator, step)

    @cached_property
    def step_map(self) -> np.ndarray:
        return matrix_exponential(self.generator * self.step)

    @cached_property
    def _adjacency(self) -> np.ndarray:
        return np.abs(self.generator) > 0

    def invariant_support(self, v: np.ndarray) -> np.ndarray:
        """Indices of the smallest coordinate subspace containing v and closed under the generator."""
        mask = np.abs(v) > 0
        adj = self._adjacency
        while True:
            grown = mask | adj[:, mask].any(axis=1)
            if np.array_equal(grown, mask):
                return np.flatnonzero(mask)
            mask = grown

    def step_map_on(self, idx: np.ndarray) -> np.ndarray:
        """Step map restricted to an invariant coordinate subspace."""
        key = idx.tobytes()
        if key not in self._maps:
            if idx.size == self.generator.shape[0]:
                self._maps[key] = self.step_map
            else:
                sub = self.generator[np.ix_(idx, idx)]
                self._maps[key] = matrix_exponential(sub * self.step)
        return self._maps[key]


def build_liouvillian(
    h: np.ndarray,
    jumps: Sequence[JumpOperator],
    rates: TransportParams,
    step: float = DEFAULT_STEP,
) -> LiouvillianPropagator:
    collapse = [(getattr(rates, j.rate_tag), j.operator) for j in jumps]
    return LiouvillianPropagator(lindblad_generator(h, collapse), step)


def model_liouvillian(params: ModelParams, step: float = DEFAULT_STEP, jump_basis=None) -> LiouvillianPropagator:
    """Liouvillian of the full 28-dim model for ``params``."""
    return build_liouvillian(
        build_hamiltonian(params), build_jump_operators(LAYOUT, jump_basis), params.transport, step
    )


@dataclass
class Trajectory:
    times: np.ndarray
    observables: list[ObservableRecord]
    states: list[np.ndarray] | None = None
    metadata: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    final_state: np.ndarray | None = None

    def series(self, name: str) -> np.ndarray:
        return np.array([getattr(o, name) for o in self.observables])

    @property
    def concurrence(self) -> np.ndarray:
        return self.series("concurrence")

    @property
    def current(self) -> np.ndarray:
        return self.series("current")

    def rows(self) -> list[list[float]]:
        out = []
        for t, o in zip(self.times, self.observables):
            out.append([
                t, o.current, o.P_Tplus, o.P_Tminus, o.P_T0, o.P_S, o.P_Sg,
                o.P_PhiPlus, o.P_PhiMinus, o.P_PsiPlus, o.P_PsiMinus, o.concurrence,
            ])
        return out

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(CSV_SCHEMA + "\n")
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for row in self.rows():
                w.writerow([f"{row[0]:.6f}"] + [repr(float(x)) for x in row[1:]])


def _step_counts(times: np.ndarray, step: float) -> np.ndarray:
    k = times / step
    counts = np.rint(k).astype(np.int64)
    if np.any(np.abs(k - counts) > 1e-9 * np.maximum(1.0, k)):
        raise ValueError(f"output times must lie on the step grid (step={step})")
    if np.any(counts < 0) or np.any(np.diff(counts) <= 0):
        raise ValueError("output times must be non-negative and strictly increasing")
    return counts


def propagate(
    lv: LiouvillianPropagator,
    rho0: np.ndarray,
    times: Sequence[float],
    keep_states: bool = False,
    check: bool = True,
    tol: Tolerances = TOL,
    metadata: dict | None = None,
) -> Trajectory:
    """rho(t_k) = step_map^(t_k/step) vec(rho0) at the requested times."""
    times = np.asarray(times, dtype=float)
    counts = _step_counts(times, lv.step)
    n = lv.dim
    v = vec(np.asarray(rho0, dtype=complex))
    idx = lv.invariant_support(v)
    m = lv.step_map_on(idx)
    x = v[idx]

    full = np.zeros(n * n, dtype=complex)
    records, states = [], []
    worst = {"hermiticity": 0.0, "trace_error": 0.0, "min_eigenvalue": np.inf}
    done = 0
    rho = None
    for c in counts:
        for _ in range(c - done):
            x = m @ x
        done = c
        full[idx] = x
        rho = unvec(full, n).copy()
        d = density_diagnostics(rho)
        worst["hermiticity"] = max(worst["hermiticity"], d["hermiticity"])
        worst["trace_error"] = max(worst["trace_error"], d["trace_error"])
        worst["min_eigenvalue"] = min(worst["min_eigenvalue"], d["min_eigenvalue"])
        if check:
            try:
                check_density_matrix(rho, tol)
            except NumericalStabilityError as exc:
                raise NumericalStabilityError(f"at t={c * lv.step:.4f} us: {exc}") from None
        records.append(observe(rho))
        if keep_states:
            states.append(rho)
    meta = {"step_us": lv.step, "tolerances": tol.__dict__.copy()}
    meta.update(metadata or {})
    return Trajectory(times, records, states if keep_states else None, meta, worst, rho)


def evolve(lv: LiouvillianPropagator, rho0: np.ndarray, t: float, check: bool = True, tol: Tolerances = TOL) -> np.ndarray:
    """rho(t) = exp(L t) rho0 with a single exponential on the invariant support of rho0."""
    if t < 0:
        raise ValueError("t must be non-negative")
    v = vec(np.asarray(rho0, dtype=complex))
    idx = lv.invariant_support(v)
    out = np.zeros_like(v)
    out[idx] = matrix_exponential(lv.generator[np.ix_(idx, idx)] * t) @ v[idx]
    rho = unvec(out, lv.dim)
    if check:
        check_density_matrix(rho, tol)
    return rho


def merge_diagnostics(*diags: dict) -> dict:
    """Worst-case combination of density diagnostics dictionaries."""
    out = {"hermiticity": 0.0, "trace_error": 0.0, "min_eigenvalue": np.inf}
    for d in diags:
        if not d:
            continue
        out["hermiticity"] = max(out["hermiticity"], d["hermiticity"])
        out["trace_error"] = max(out["trace_error"], d["trace_error"])
        out["min_eigenvalue"] = min(out["min_eigenvalue"], d["min_eigenvalue"])
    return out


def time_grid(t_max: float, dt_out: float, step: float = DEFAULT_STEP, t0: float = 0.0) -> np.ndarray:
    """Output grid t0, t0+dt_out, ..., <= t_max, snapped to the step grid."""
    stride = max(1, int(round(dt_out / step)))
    n = int(np.floor((t_max - t0) / (stride * step) + 1e-9))
    return t0 + np.arange(n + 1) * stride * step


@dataclass
class SteadyState:
    rho: np.ndarray | None
    unique: bool
    basis: list[np.ndarray]
    residual: float
    singular_values: np.ndarray


def steady_state(lv: LiouvillianPropagator, tol: Tolerances = TOL, ambiguity_window: float = 1e3) -> SteadyState:
    """Null space of the generator via SVD, rank threshold rank_rtol * s_max."""
    _, s, vh = np.linalg.svd(lv.generator)
    thr = tol.rank_rtol * s[0]
    grey = (s > thr) & (s < ambiguity_window * thr)
    if np.any(grey):
        raise RankAmbiguityError(f"singular values {s[grey]} near threshold {thr:.3e}")
    null = vh[s <= thr].conj()
    n = lv.dim
    basis = [unvec(v, n) for v in null]
    if len(basis) == 0:
        raise RankAmbiguityError("generator has no null space")
    if len(basis) > 1:
        return SteadyState(None, False, basis, 0.0, s)
    rho = basis[0] / np.trace(basis[0])
    rho = 0.5 * (rho + dagger(rho))
    residual = float(np.linalg.norm(lv.generator @ vec(rho)))
    if residual > tol.steady_residual:
        raise NumericalStabilityError(f"steady-state residual {residual:.3e}")
    return SteadyState(rho, True, basis, residual, s)


def default_initial_state() -> np.ndarray:
    return maximally_mixed(LAYOUT)
