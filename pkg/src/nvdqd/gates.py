"""Measurement-based controlled-phase gate on 15N nuclear spins and cluster states.

Ordering conventions
--------------------
* Two-NV register: electrons (L, R) then nuclei (L, R), 16 dims.
* Nuclear spin up is index 0, so ``I_z = diag(1/2, -1/2)``.
* Cluster states: vertex ``i`` is tensor axis ``i`` (vertex 0 most significant).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .config import CONSTANTS, mhz_to_angular
from .operators import BELL, I2, SX, SZ, dagger, matrix_exponential, tensor_product

IZ = SZ / 2
U_CPF = np.diag([1, 1, 1, -1]).astype(complex)
OUTCOMES = ("++", "+-", "-+", "--")
_PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
_MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)
_XKET = {"+": _PLUS, "-": _MINUS}
MAX_CLUSTER_VERTICES = 12


@dataclass(frozen=True)
class HyperfineParams:
    """Hyperfine and Zeeman data of one NV / 15N pair (angular units, rad/us).

    ``D`` is the zero-field splitting; it only enters the transverse-coupling
    fidelity model, where it sets the energy mismatch.
    """

    A_par: float = mhz_to_angular(3.03)
    A_perp: float = mhz_to_angular(3.65)
    g_n: float = 0.566
    B: tuple[float, float, float] = (0.0, 0.0, 5e-3)
    D: float = mhz_to_angular(2870.0)

    def __post_init__(self):
        if self.A_par <= 0 or self.A_perp < 0 or self.g_n <= 0:
            raise ValueError("hyperfine couplings must be positive")

    @property
    def gate_time(self) -> float:
        """t = pi / (2 A_par) in us."""
        return np.pi / (2 * self.A_par)

    @property
    def omega_e(self) -> float:
        return CONSTANTS.g_s * CONSTANTS.mu_B * self.B[2] / CONSTANTS.hbar * 1e-6

    @property
    def omega_n(self) -> float:
        return self.g_n * CONSTANTS.mu_n * self.B[2] / CONSTANTS.hbar * 1e-6


def _register_op(eL=I2, eR=I2, nL=I2, nR=I2) -> np.ndarray:
    return tensor_product(eL, eR, nL, nR)


def build_gate_unitary(hf: HyperfineParams = HyperfineParams(), hyperfine: bool = True) -> np.ndarray:
    """U_t = exp(-i pi/4 (sx_L + sx_R)) exp(-i A t (sz_L Iz_L + sz_R Iz_R)) exp(-i pi/4 sx_L).

    With ``t = pi/(2 A_par)`` the middle factor is exp(-i pi/2 sum_j sz_j Iz_j).
    ``hyperfine=False`` replaces it with the identity.
    """
    first = matrix_exponential(-1j * np.pi / 4 * _register_op(eL=SX))
    last = matrix_exponential(-1j * np.pi / 4 * (_register_op(eL=SX) + _register_op(eR=SX)))
    if not hyperfine:
        return last @ first
    hzz = _register_op(eL=SZ, nL=IZ) + _register_op(eR=SZ, nR=IZ)
    middle = matrix_exponential(-1j * hf.A_par * hf.gate_time * hzz)
    return last @ middle @ first


@dataclass
class GateProtocolResult:
    outcome: str
    probability: float
    conditional_operator: np.ndarray
    corrected_operator: np.ndarray


def conditional_operator(u_t: np.ndarray, outcome: str, electrons: np.ndarray = BELL["PhiMinus"]) -> np.ndarray:
    """Nuclear operator <M| U_t |electrons> for an x-basis outcome M."""
    bra = np.kron(_XKET[outcome[0]], _XKET[outcome[1]]).conj()
    u4 = u_t.reshape(4, 4, 4, 4)  # (e, n, e', n')
    return np.einsum("e,enfm,f->nm", bra, u4, electrons)


_G_TABLE = {
    "++": (np.diag([1, 1j]), np.diag([-1, 1j])),
    "+-": (np.diag([1, -1j]), np.diag([1j, 1])),
    "-+": (np.diag([1, 1j]), np.diag([-1j, 1])),
    "--": (np.diag([1, -1j]), np.diag([1, 1j])),
}


def correction_table() -> dict[str, np.ndarray]:
    return {m: np.kron(*(np.asarray(x, dtype=complex) for x in _G_TABLE[m])) for m in OUTCOMES}


def local_correction(outcome: str) -> np.ndarray:
    """G_M = g_L (x) g_R, a product of single-nucleus diagonal phases."""
    if outcome not in _G_TABLE:
        raise ValueError(f"unknown outcome {outcome!r}; expected one of {OUTCOMES}")
    return correction_table()[outcome]


def _as_density(state: np.ndarray, dim: int) -> np.ndarray:
    state = np.asarray(state, dtype=complex)
    if state.shape == (dim,):
        return np.outer(state, state.conj())
    if state.shape == (dim, dim):
        return state
    raise ValueError(f"expected a {dim}-dim ket or density matrix, got shape {state.shape}")


def run_protocol(
    u_t: np.ndarray,
    nuclear_input: np.ndarray,
    electron_input: np.ndarray | None = None,
    corrections: Mapping[str, np.ndarray] | None = None,
) -> list[GateProtocolResult]:
    """All four outcomes of the x-basis electron measurement after U_t.

    The electrons must start in |Phi->; any other input violates the protocol.
    """
    phi = BELL["PhiMinus"]
    if electron_input is not None:
        e = np.asarray(electron_input, dtype=complex)
        if e.shape != (4,) or abs(abs(np.vdot(phi, e)) - 1) > 1e-10:
            raise ValueError("electron pair must be prepared in |Phi->")
    rho = _as_density(nuclear_input, 4)
    table = corrections or correction_table()
    out = []
    for m in OUTCOMES:
        um = conditional_operator(u_t, m, phi)
        prob = float(np.real(np.trace(um @ rho @ dagger(um))))
        out.append(GateProtocolResult(m, prob, um, table[m] @ um))
    return out


def equal_up_to_phase(a: np.ndarray, b: np.ndarray, positive_scale: bool = True) -> float:
    """Distance between a and b modulo a global phase (and a positive scale)."""
    a, b = np.asarray(a, complex), np.asarray(b, complex)
    ov = np.vdot(b, a)
    if abs(ov) == 0:
        return float(np.linalg.norm(a - b))
    phase = ov / abs(ov)
    scale = abs(ov) / np.vdot(b, b).real if positive_scale else 1.0
    return float(np.max(np.abs(a - scale * phase * b)))


def gate_equivalence_check(
    hf: HyperfineParams = HyperfineParams(),
    corrections: Mapping[str, np.ndarray] | None = None,
    tol: float = 1e-10,
) -> dict:
    """Check G_M U_M proportional to U_CPF for every outcome."""
    u_t = build_gate_unitary(hf)
    table = corrections or correction_table()
    dev = {}
    for m in OUTCOMES:
        gu = table[m] @ conditional_operator(u_t, m)
        dev[m] = equal_up_to_phase(gu, U_CPF)
    return {"deviation": dev, "max_deviation": max(dev.values()), "passed": max(dev.values()) <= tol}


def operator_schmidt_rank(op: np.ndarray, tol: float = 1e-10) -> int:
    """Operator-Schmidt rank of a 4x4 operator across the 2|2 cut."""
    r = np.asarray(op).reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    s = np.linalg.svd(r, compute_uv=False)
    return int(np.sum(s > tol * s[0]))


# -- transverse hyperfine ----------------------------------------------------------------

def _spin1_ops():
    # basis [+1, -1, 0]
    sz = np.diag([1.0, -1.0, 0.0]).astype(complex)
    sp = np.zeros((3, 3), complex)
    sp[0, 2] = np.sqrt(2)  # |0> -> |+1>
    sp[2, 1] = np.sqrt(2)  # |-1> -> |0>
    return sz, sp


def _embed_qubit(op2: np.ndarray) -> np.ndarray:
    """Dressed-qubit operator on {+1,-1}, identity on |0>."""
    out = np.eye(3, dtype=complex)
    out[:2, :2] = op2
    return out


def gate_fidelity_with_transverse(hf: HyperfineParams = HyperfineParams(), perp_scale: float = 1.0) -> float:
    """Average gate fidelity of the corrected protocol against U_CPF with flip-flop terms.

    Each NV is a spin-1 electron (ordered +1, -1, 0) with its nuclear spin,
    H = D Sz^2 + w_e Sz - w_n Iz + A_par Sz Iz + (A_perp/2)(S+ I- + S- I+).
    The hyperfine step is taken in the interaction frame of the Zeeman and
    zero-field terms; leakage to m_s = 0 counts as loss.
    """
    sz, sp = _spin1_ops()
    i3 = np.eye(3)
    ip = np.array([[0, 1], [0, 0]], complex)  # raises nuclear down -> up
    a_perp = hf.A_perp * perp_scale
    h0 = hf.D * np.kron(sz @ sz, I2) + hf.omega_e * np.kron(sz, I2) - hf.omega_n * np.kron(i3, IZ)
    hhf = hf.A_par * np.kron(sz, IZ) + 0.5 * a_perp * (np.kron(sp, dagger(ip)) + np.kron(dagger(sp), ip))
    t = hf.gate_time
    u1 = matrix_exponential(1j * t * h0) @ matrix_exponential(-1j * t * (h0 + hhf))  # per NV (e, n)
    # two NVs; order (eL, eR, nL, nR)
    u_pair = np.kron(u1, u1).reshape(3, 2, 3, 2, 3, 2, 3, 2).transpose(0, 2, 1, 3, 4, 6, 5, 7).reshape(36, 36)
    rx = _embed_qubit(matrix_exponential(-1j * np.pi / 4 * SX))
    i4 = np.eye(4)
    first = np.kron(np.kron(rx, i3), i4)
    last = np.kron(np.kron(rx, rx), i4)
    u = last @ u_pair @ first
    phi = np.zeros(9, complex)
    phi[0], phi[4] = BELL["PhiMinus"][0], BELL["PhiMinus"][3]  # |+1,+1>, |-1,-1>
    u6 = u.reshape(9, 4, 9, 4)
    overlap, norm = 0.0, np.zeros((4, 4), complex)
    for m in OUTCOMES:
        ket = np.zeros(9, complex)
        ket[[0, 1, 3, 4]] = np.kron(_XKET[m[0]], _XKET[m[1]])
        k = local_correction(m) @ np.einsum("e,enfm,f->nm", ket.conj(), u6, phi)
        overlap += abs(np.trace(dagger(U_CPF) @ k)) ** 2
        norm += dagger(k) @ k
    return float((overlap + np.real(np.trace(norm))) / 20.0)


# -- cluster states -------------------------------------------------------------------------

@dataclass
class ClusterGraph:
    vertices: list[int]
    edges: list[tuple[int, int]]
    geometry: str = "custom"
    shape: tuple[int, ...] = ()
    coords: dict[int, tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        vs = set(self.vertices)
        for a, b in self.edges:
            if a == b or a not in vs or b not in vs:
                raise ValueError(f"invalid edge {(a, b)}")
            key = frozenset((a, b))
            if key in seen:
                raise ValueError(f"duplicate edge {(a, b)}")
            seen.add(key)

    @classmethod
    def chain(cls, n: int) -> "ClusterGraph":
        if n < 1:
            raise ValueError("chain needs at least one vertex")
        return cls(list(range(n)), [(i, i + 1) for i in range(n - 1)], "1D", (n,))

    @classmethod
    def grid(cls, rows: int, cols: int) -> "ClusterGraph":
        if rows < 1 or cols < 1:
            raise ValueError("grid dimensions must be positive")
        vid = lambda r, c: r * cols + c  # noqa: E731
        edges = [(vid(r, c), vid(r, c + 1)) for r in range(rows) for c in range(cols - 1)]
        edges += [(vid(r, c), vid(r + 1, c)) for r in range(rows - 1) for c in range(cols)]
        coords = {vid(r, c): (r, c) for r in range(rows) for c in range(cols)}
        return cls(list(range(rows * cols)), edges, "2D", (rows, cols), coords)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def neighbors(self, v: int) -> list[int]:
        return sorted({b for a, b in self.edges if a == v} | {a for a, b in self.edges if b == v})

    def axis(self, v: int) -> int:
        return self.vertices.index(v)


def _check_size(graph: ClusterGraph) -> None:
    if graph.n > MAX_CLUSTER_VERTICES:
        raise ValueError(f"cluster limited to {MAX_CLUSTER_VERTICES} vertices, got {graph.n}")


def _apply_2q(psi: np.ndarray, op: np.ndarray, a: int, b: int) -> np.ndarray:
    """Apply a 4x4 operator to tensor axes (a, b) of a (2,)*n state tensor."""
    out = np.tensordot(op.reshape(2, 2, 2, 2), psi, axes=([2, 3], [a, b]))
    return np.moveaxis(out, [0, 1], [a, b])


def _apply_1q(psi: np.ndarray, op: np.ndarray, a: int) -> np.ndarray:
    return np.moveaxis(np.tensordot(op, psi, axes=([1], [a])), 0, a)


def _plus_state(n: int) -> np.ndarray:
    return np.full((2,) * n, 2 ** (-n / 2), dtype=complex)


def build_cluster(graph: ClusterGraph, edge_order: Sequence[tuple[int, int]] | None = None) -> np.ndarray:
    """|+>^n with U_CPF on every edge, as a 2^n state vector."""
    _check_size(graph)
    psi = _plus_state(graph.n)
    for a, b in edge_order if edge_order is not None else graph.edges:
        psi = _apply_2q(psi, U_CPF, graph.axis(a), graph.axis(b))
    return psi.reshape(-1)


def build_cluster_via_protocol(
    graph: ClusterGraph,
    hf: HyperfineParams = HyperfineParams(),
    rng: np.random.Generator | None = None,
    outcomes: Sequence[str] | None = None,
) -> tuple[np.ndarray, list[str]]:
    """Entangle the nuclear register edge by edge with the measurement protocol.

    For each edge a fresh electron pair in |Phi-> is attached, U_t acts on
    (e_L, e_R, n_a, n_b), the electrons are projected onto an x-basis outcome
    (sampled with ``rng`` or taken from ``outcomes``) and G_M is applied.
    """
    _check_size(graph)
    rng = rng or np.random.default_rng(0)
    u_t = build_gate_unitary(hf).reshape((2,) * 8)
    n = graph.n
    psi = _plus_state(n)
    record = []
    for k, (a, b) in enumerate(graph.edges):
        ax, bx = graph.axis(a), graph.axis(b)
        full = np.tensordot(BELL["PhiMinus"].reshape(2, 2), psi, axes=0)  # electrons at axes 0,1
        full = np.tensordot(u_t, full, axes=([4, 5, 6, 7], [0, 1, 2 + ax, 2 + bx]))
        # result axes: eL, eR, n_a, n_b, then remaining nuclei in original order
        rest = [i for i in range(n) if i not in (ax, bx)]
        full = np.moveaxis(full, [2, 3] + list(range(4, 4 + len(rest))), [2 + ax, 2 + bx] + [2 + i for i in rest])
        branches = {}
        for m in OUTCOMES:
            bra = np.kron(_XKET[m[0]], _XKET[m[1]]).conj().reshape(2, 2)
            branches[m] = np.tensordot(bra, full, axes=([0, 1], [0, 1]))
        probs = np.array([np.vdot(branches[m], branches[m]).real for m in OUTCOMES])
        m = outcomes[k] if outcomes is not None else OUTCOMES[rng.choice(4, p=probs / probs.sum())]
        if m not in OUTCOMES:
            raise ValueError(f"unknown outcome {m!r}")
        psi = _apply_2q(branches[m], local_correction(m), ax, bx)
        psi = psi / np.linalg.norm(psi)
        record.append(m)
    return psi.reshape(-1), record


@dataclass
class StabilizerReport:
    vertices: list[int]
    expectations: np.ndarray

    def rows(self) -> list[dict]:
        return [{"vertex": v, "expectation": float(e)} for v, e in zip(self.vertices, self.expectations)]

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            fh.write("# nvdqd stabilizers v1\n")
            w = csv.DictWriter(fh, fieldnames=["vertex", "expectation"])
            w.writeheader()
            w.writerows(self.rows())


def _apply_stabilizer(t: np.ndarray, graph: ClusterGraph, v: int) -> np.ndarray:
    t = _apply_1q(t, SX, graph.axis(v))
    for b in graph.neighbors(v):
        t = _apply_1q(t, SZ, graph.axis(b))
    return t


def stabilizer_check(state: np.ndarray, graph: ClusterGraph) -> StabilizerReport:
    """<K_a> with K_a = X_a prod_{b in N(a)} Z_b for a ket or density matrix."""
    n = graph.n
    dim = 2**n
    state = np.asarray(state, dtype=complex)
    vals = []
    if state.shape == (dim,):
        psi = state.reshape((2,) * n)
        for v in graph.vertices:
            vals.append(np.vdot(psi, _apply_stabilizer(psi, graph, v)).real)
    elif state.shape == (dim, dim):
        rho = state.reshape((2,) * n + (dim,))
        for v in graph.vertices:
            krho = _apply_stabilizer(rho, graph, v).reshape(dim, dim)
            vals.append(np.trace(krho).real)
    else:
        raise ValueError(f"state shape {state.shape} does not match {n} qubits")
    return StabilizerReport(list(graph.vertices), np.clip(np.array(vals), -1.0, 1.0))


# -- 2D schedule -----------------------------------------------------------------------------------

Edge = tuple[tuple[int, int], tuple[int, int]]


def schedule_2d(rows: int, cols: int) -> list[list[Edge]]:
    """Partition the rows x cols lattice edges into six rounds.

    Round ``k`` (k = 0, 1, 2) holds horizontal edges whose left site has
    (r + c) mod 3 == k; rounds 3..5 hold vertical edges with the upper site
    in class k. Each class is a single diagonal stripe pattern of pitch 3,
    so one rigid shift of the pillar array selects it, and two edges of a
    round never share a site. Small lattices may leave rounds empty.
    """
    if rows < 2 or cols < 2:
        raise ValueError("schedule_2d needs rows, cols >= 2")
    rounds: list[list[Edge]] = [[] for _ in range(6)]
    for r, c in itertools.product(range(rows), range(cols)):
        k = (r + c) % 3
        if c + 1 < cols:
            rounds[k].append(((r, c), (r, c + 1)))
        if r + 1 < rows:
            rounds[3 + k].append(((r, c), (r + 1, c)))
    return rounds


def lattice_edges(rows: int, cols: int) -> set[frozenset]:
    g = ClusterGraph.grid(rows, cols)
    return {frozenset((g.coords[a], g.coords[b])) for a, b in g.edges}


def schedule_is_valid(rounds: Iterable[Iterable[Edge]], rows: int, cols: int) -> bool:
    """Every lattice edge exactly once, rounds vertex-disjoint."""
    seen = []
    for rnd in rounds:
        sites = [s for e in rnd for s in e]
        if len(sites) != len(set(sites)):
            return False
        seen.extend(frozenset(e) for e in rnd)
    return len(seen) == len(set(seen)) and set(seen) == lattice_edges(rows, cols)
