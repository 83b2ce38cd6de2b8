"""Leakage current, populations, concurrence and fidelity."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
import scipy.linalg as sla

from .config import CONSTANTS
from .operators import BELL, LAYOUT, SY, SectorLayout, dagger, partial_trace_dqd, partial_trace_nv

_YY = np.kron(SY, SY)


@dataclass
class ObservableRecord:
    current: float  # units of e*gamma_out
    P_Tplus: float
    P_Tminus: float
    P_T0: float
    P_S: float
    P_Sg: float
    P_01: float
    P_PhiPlus: float
    P_PhiMinus: float
    P_PsiPlus: float
    P_PsiMinus: float
    concurrence: float
    fidelity_dark: float

    def as_dict(self) -> dict:
        return asdict(self)


def leakage_current(rho: np.ndarray, gamma_out: float = 1.0, layout: SectorLayout = LAYOUT) -> tuple[float, float]:
    """Mean current through the DQD.

    Returns ``(normalized, si)`` where ``normalized`` is I/(e*gamma_out) =
    2*P(S_g) for the unit-normalized ejection operators and ``si`` is the
    current in amperes for ``gamma_out`` given in 1/us.
    """
    sl = layout.sector_slice("(0,2)")
    p_sg = float(np.real(np.trace(rho[sl, sl])))
    normalized = 2.0 * p_sg
    return normalized, normalized * CONSTANTS.e * gamma_out * 1e6


def populations(rho: np.ndarray, layout: SectorLayout = LAYOUT) -> dict[str, float]:
    dqd = np.real(np.diag(partial_trace_nv(rho, layout)))
    out = {lab: float(dqd[layout.dqd_index(lab)]) for lab in ("Tplus", "Tminus", "T0", "S", "Sg")}
    out["01"] = float(dqd[layout.dqd_index("up_R")] + dqd[layout.dqd_index("down_R")])
    nv = partial_trace_dqd(rho, layout)
    for name, vec in BELL.items():
        out[name] = float(np.real(vec.conj() @ nv @ vec))
    return out


def concurrence(rho_nv: np.ndarray, tol: float = 1e-8) -> float:
    """Wootters concurrence of a two-qubit density matrix."""
    rho_nv = np.asarray(rho_nv, dtype=complex)
    if rho_nv.shape != (4, 4):
        raise ValueError("concurrence needs a 4x4 density matrix")
    if (
        np.max(np.abs(rho_nv - dagger(rho_nv))) > tol
        or abs(np.trace(rho_nv) - 1) > tol
        or np.linalg.eigvalsh(0.5 * (rho_nv + dagger(rho_nv)))[0] < -tol
    ):
        raise ValueError("non-physical two-qubit state")
    # lambda_i are the singular values of tau = W^T (Y x Y) W with rho = W W^+;
    # unlike square roots of the eigenvalues of rho*rho_tilde they carry no
    # sqrt(eps) rounding floor on rank-deficient states.
    ev, vecs = np.linalg.eigh(0.5 * (rho_nv + dagger(rho_nv)))
    w = vecs * np.sqrt(np.clip(ev, 0.0, None))
    lam = np.linalg.svd(w.T @ _YY @ w, compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def fidelity(rho: np.ndarray, target: np.ndarray) -> float:
    """Uhlmann fidelity (squared convention). ``target`` may be a ket."""
    rho = np.asarray(rho, dtype=complex)
    target = np.asarray(target, dtype=complex)
    if target.ndim == 1:
        if rho.shape != (target.size, target.size):
            raise ValueError("dimension mismatch")
        return float(np.real(target.conj() @ rho @ target))
    if rho.shape != target.shape:
        raise ValueError("dimension mismatch")
    s = sla.sqrtm(rho)
    inner = sla.sqrtm(s @ target @ s)
    return float(np.real(np.trace(inner)) ** 2)


def dark_state(layout: SectorLayout = LAYOUT) -> np.ndarray:
    """|T0> (x) |Phi->, as a ket on the full space."""
    return layout.ket("T0", BELL["PhiMinus"])


def observe(rho: np.ndarray, layout: SectorLayout = LAYOUT) -> ObservableRecord:
    pops = populations(rho, layout)
    current, _ = leakage_current(rho, layout=layout)
    c = concurrence(partial_trace_dqd(rho, layout))
    return ObservableRecord(
        current=current,
        P_Tplus=pops["Tplus"],
        P_Tminus=pops["Tminus"],
        P_T0=pops["T0"],
        P_S=pops["S"],
        P_Sg=pops["Sg"],
        P_01=pops["01"],
        P_PhiPlus=pops["PhiPlus"],
        P_PhiMinus=pops["PhiMinus"],
        P_PsiPlus=pops["PsiPlus"],
        P_PsiMinus=pops["PsiMinus"],
        concurrence=c,
        fidelity_dark=fidelity(rho, dark_state(layout)),
    )
