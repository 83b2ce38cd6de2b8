"""Dense operator algebra and the sector layout of the NV-DQD Hilbert space.

Global basis (28 states), DQD index slow, NV index fast::

    (0,1): [up_R, down_R]            indices  0..7
    (1,1): [T+, T-, T0, S]           indices  8..23
    (0,2): [S_g]                     indices 24..27

and within every DQD state the NV pair in computational order
|00>, |01>, |10>, |11> with |0> = m_s=+1.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.linalg as sla

from .config import TOL

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
I2 = np.eye(2, dtype=complex)
PAULI = (SX, SY, SZ)

SQ2 = np.sqrt(2.0)

# NV Bell states in the computational basis |00>,|01>,|10>,|11>
BELL = {
    "PhiPlus": np.array([1, 0, 0, 1], dtype=complex) / SQ2,
    "PhiMinus": np.array([1, 0, 0, -1], dtype=complex) / SQ2,
    "PsiPlus": np.array([0, 1, 1, 0], dtype=complex) / SQ2,
    "PsiMinus": np.array([0, 1, -1, 0], dtype=complex) / SQ2,
}

# Columns are the coupled (1,1) states T+, T-, T0, S written in the
# product basis |uu>, |ud>, |du>, |dd> (left dot first).
PRODUCT_TO_COUPLED = np.array(
    [
        [1, 0, 0, 0],
        [0, 0, 1 / SQ2, -1 / SQ2],
        [0, 0, 1 / SQ2, 1 / SQ2],
        [0, 1, 0, 0],
    ],
    dtype=complex,
)
COUPLED_LABELS = ("Tplus", "Tminus", "T0", "S")


class NumericalStabilityError(RuntimeError):
    """A state left the physical set beyond the configured tolerance."""


def tensor_product(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product, first factor slowest."""
    if not ops:
        raise ValueError("need at least one operand")
    return reduce(np.kron, ops)


def dagger(m: np.ndarray) -> np.ndarray:
    return m.conj().T


def is_hermitian(m: np.ndarray, tol: float = TOL.hermitian) -> bool:
    return bool(np.max(np.abs(m - dagger(m)), initial=0.0) <= tol)


def is_unitary(m: np.ndarray, tol: float = 1e-10) -> bool:
    n = m.shape[0]
    return m.shape == (n, n) and bool(np.max(np.abs(dagger(m) @ m - np.eye(n))) <= tol)


def matrix_exponential(m: np.ndarray, balance: bool = False) -> np.ndarray:
    """exp(m) by Pade scaling-and-squaring.

    With ``balance=True`` the matrix is first diagonally similarity-scaled
    (``exp(D^-1 m D) = D^-1 exp(m) D``), which helps when row/column norms
    differ by orders of magnitude.
    """
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix_exponential needs a square matrix, got {m.shape}")
    if not balance:
        return sla.expm(m)
    with np.errstate(invalid="ignore"):  # scipy casts its unused permutation array
        bal, (scale, _) = sla.matrix_balance(m, permute=False, separate=True)
    e = sla.expm(bal)
    return (scale[:, None] * e) / scale[None, :]


@dataclass(frozen=True)
class SectorLayout:
    sectors: tuple[tuple[str, int], ...] = (("(0,1)", 2), ("(1,1)", 4), ("(0,2)", 1))
    nv_dimension: int = 4
    dqd_labels: tuple[str, ...] = ("up_R", "down_R", "Tplus", "Tminus", "T0", "S", "Sg")
    nv_labels: tuple[str, ...] = ("00", "01", "10", "11")
    _offsets: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        offsets, pos = {}, 0
        for name, dim in self.sectors:
            offsets[name] = pos
            pos += dim
        object.__setattr__(self, "_offsets", offsets)
        if pos != len(self.dqd_labels):
            raise ValueError("dqd_labels do not match sector dimensions")

    @property
    def dqd_dimension(self) -> int:
        return sum(d for _, d in self.sectors)

    @property
    def total_dimension(self) -> int:
        return self.dqd_dimension * self.nv_dimension

    def sector_dim(self, name: str) -> int:
        for n, d in self.sectors:
            if n == name:
                return d
        raise KeyError(f"unknown sector {name!r}")

    def sector_slice(self, name: str) -> slice:
        """Slice of the global 28-dim index covering ``name`` (x NV)."""
        dim = self.sector_dim(name)
        start = self._offsets[name] * self.nv_dimension
        return slice(start, start + dim * self.nv_dimension)

    def dqd_index(self, label: str) -> int:
        return self.dqd_labels.index(label)

    def index(self, dqd_label: str, nv_label: str) -> int:
        return self.dqd_index(dqd_label) * self.nv_dimension + self.nv_labels.index(nv_label)

    def basis_labels(self) -> list[str]:
        return [f"{d}|{n}" for d in self.dqd_labels for n in self.nv_labels]

    def sector_of_index(self) -> np.ndarray:
        """Sector number of every global basis index."""
        out = np.empty(self.total_dimension, dtype=int)
        for k, (name, _) in enumerate(self.sectors):
            out[self.sector_slice(name)] = k
        return out

    def ket(self, dqd_label: str, nv_state: np.ndarray) -> np.ndarray:
        """Global ket |dqd_label> (x) |nv_state>."""
        d = np.zeros(self.dqd_dimension, dtype=complex)
        d[self.dqd_index(dqd_label)] = 1.0
        return np.kron(d, np.asarray(nv_state, dtype=complex))


LAYOUT = SectorLayout()


def embed_sector(op: np.ndarray, src: str, dst: str, layout: SectorLayout = LAYOUT) -> np.ndarray:
    """Place ``op`` in the (dst, src) block of a full-space matrix.

    ``op`` is either (dim(dst)*nv, dim(src)*nv) or (dim(dst), dim(src)); in the
    latter case it is tensored with the NV identity.
    """
    op = np.asarray(op, dtype=complex)
    dd, ds = layout.sector_dim(dst), layout.sector_dim(src)
    nv = layout.nv_dimension
    if op.shape == (dd, ds):
        op = np.kron(op, np.eye(nv))
    elif op.shape != (dd * nv, ds * nv):
        raise ValueError(f"operator shape {op.shape} does not fit {src}->{dst}")
    out = np.zeros((layout.total_dimension,) * 2, dtype=complex)
    out[layout.sector_slice(dst), layout.sector_slice(src)] = op
    return out


def partial_trace_dqd(rho: np.ndarray, layout: SectorLayout = LAYOUT) -> np.ndarray:
    """Reduced 4x4 NV-pair state."""
    n, nv = layout.dqd_dimension, layout.nv_dimension
    return np.einsum("iaib->ab", rho.reshape(n, nv, n, nv))


def partial_trace_nv(rho: np.ndarray, layout: SectorLayout = LAYOUT) -> np.ndarray:
    """Reduced 7x7 DQD state."""
    n, nv = layout.dqd_dimension, layout.nv_dimension
    return np.einsum("iaja->ij", rho.reshape(n, nv, n, nv))


def maximally_mixed(layout: SectorLayout = LAYOUT) -> np.ndarray:
    n = layout.total_dimension
    return np.eye(n, dtype=complex) / n


def check_density_matrix(rho: np.ndarray, tol=TOL) -> None:
    """Raise NumericalStabilityError if rho is not a physical state."""
    herm = np.max(np.abs(rho - dagger(rho)))
    if herm > tol.hermitian:
        raise NumericalStabilityError(f"Hermiticity violated: {herm:.3e}")
    tr = abs(np.trace(rho) - 1.0)
    if tr > tol.trace:
        raise NumericalStabilityError(f"trace error {tr:.3e}")
    emin = np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))[0]
    if emin < tol.min_eigenvalue:
        raise NumericalStabilityError(f"negative eigenvalue {emin:.3e}")


def density_diagnostics(rho: np.ndarray) -> dict:
    """Hermiticity, trace and positivity figures of merit."""
    return {
        "hermiticity": float(np.max(np.abs(rho - dagger(rho)))),
        "trace_error": float(abs(np.trace(rho) - 1.0)),
        "min_eigenvalue": float(np.linalg.eigvalsh(0.5 * (rho + dagger(rho)))[0]),
    }


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())
