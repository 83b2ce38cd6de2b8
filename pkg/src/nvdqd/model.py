"""Hamiltonians and jump operators of the NV-center / nanotube-DQD hybrid.

All parameter records hold internal units (rad/us, 1/us, T, m, rad). The
flat key-value form used by config files carries explicit unit suffixes;
see :data:`FLAT_KEYS`.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Mapping

import numpy as np

from .config import (
    CONSTANTS,
    TOL,
    TWO_PI,
    PhysicalConstants,
    angular_to_mhz,
    angular_to_ueV,
    ghz_rate_to_per_us,
    joule_to_angular,
    mhz_to_angular,
    ueV_to_angular,
)
from .operators import (
    BELL,
    COUPLED_LABELS,
    I2,
    LAYOUT,
    PAULI,
    PRODUCT_TO_COUPLED,
    SX,
    SY,
    SZ,
    SectorLayout,
    dagger,
    embed_sector,
    tensor_product,
)

I4 = np.eye(4, dtype=complex)
FIG2_B_Z = 5e-3


def _zeeman_drive_frequency(B_z: float = FIG2_B_Z, c: PhysicalConstants = CONSTANTS) -> float:
    """Splitting of m_s = +1 and -1, 2 g_s mu_B B_z / hbar, in rad/us."""
    return joule_to_angular(2 * c.g_s * c.mu_B * B_z, c)


@dataclass(frozen=True)
class NVDriveParams:
    omega_L: float = mhz_to_angular(0.6)
    omega_R: float = mhz_to_angular(0.6)
    delta_L: float = 0.0
    delta_R: float = 0.0
    D: float = mhz_to_angular(2870.0)
    omega_0: float = field(default_factory=_zeeman_drive_frequency)

    def __post_init__(self):
        if self.omega_L < 0 or self.omega_R < 0:
            raise ValueError("Rabi frequencies must be non-negative")


@dataclass(frozen=True)
class QDShellParams:
    # Defaults for delta_KKp and g_orb are chosen so that the Kramers
    # construction reproduces g_par = 30, g_perp = 1.
    g_par: float = 30.0
    g_perp: float = 1.0
    alpha: float = np.pi / 36
    B_z: float = FIG2_B_Z
    delta_SO: float = ueV_to_angular(100.0)
    delta_KKp: float = ueV_to_angular(100.0 * np.tan(np.arcsin(1.0 / CONSTANTS.g_s)))
    phi: float = 0.0
    g_orb: float = (30.0 - CONSTANTS.g_s) / (2.0 * np.cos(np.arcsin(1.0 / CONSTANTS.g_s)))


@dataclass(frozen=True)
class DipoleGeometry:
    r_L: float = 6e-9
    r_R: float = 6e-9
    r_hat: tuple = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if self.r_L <= 0 or self.r_R <= 0:
            raise ValueError("NV-dot distances must be positive")


@dataclass(frozen=True)
class TransportParams:
    J: float = mhz_to_angular(24.0)
    delta: float = 0.0
    gamma_in: float = ghz_rate_to_per_us(0.5)
    gamma_out: float = ghz_rate_to_per_us(0.5)

    def __post_init__(self):
        if self.gamma_in <= 0 or self.gamma_out <= 0:
            raise ValueError("transport rates must be positive")
        if self.J < 0:
            raise ValueError("tunneling J must be non-negative")


@dataclass(frozen=True)
class DerivedCouplings:
    xi: float
    eta: float
    epsilon: float
    kappa_L: float
    kappa_R: float
    n_tilde_L: np.ndarray
    n_tilde_R: np.ndarray

    @property
    def gamma_kappa(self) -> float:
        """Dipole-induced T0 -> T+- transition rate sqrt(2) kappa eta (left side)."""
        return np.sqrt(2.0) * self.kappa_L * abs(self.eta)


@dataclass(frozen=True)
class ModelParams:
    drive: NVDriveParams = field(default_factory=NVDriveParams)
    shell: QDShellParams = field(default_factory=QDShellParams)
    geometry: DipoleGeometry = field(default_factory=DipoleGeometry)
    transport: TransportParams = field(default_factory=TransportParams)

    def with_updates(self, **flat) -> "ModelParams":
        """Copy with flat (unit-suffixed) keys overridden."""
        expanded = {}
        for key, value in flat.items():
            for target in ALIASES.get(key, (key,)):
                expanded[target] = value
        groups: dict[str, dict] = {}
        for key, value in expanded.items():
            if key not in FLAT_KEYS:
                raise KeyError(f"unknown parameter key {key!r}")
            group, name, to_int, _ = FLAT_KEYS[key]
            groups.setdefault(group, {})[name] = to_int(float(value))
        # only the named fields change; replace() re-runs validation
        return replace(self, **{g: replace(getattr(self, g), **kw) for g, kw in groups.items()})

    # -- flat key-value form ------------------------------------------------
    def to_flat(self) -> dict[str, float]:
        out = {}
        for key, (group, name, to_int, from_int) in FLAT_KEYS.items():
            out[key] = float(from_int(getattr(getattr(self, group), name)))
        return out

    @classmethod
    def from_flat(cls, values: Mapping[str, float | str]) -> "ModelParams":
        groups: dict[str, dict] = {"drive": {}, "shell": {}, "geometry": {}, "transport": {}}
        for key, raw in values.items():
            if key in ALIASES:
                for target in ALIASES[key]:
                    group, name, to_int, _ = FLAT_KEYS[target]
                    groups[group][name] = to_int(float(raw))
                continue
            if key not in FLAT_KEYS:
                raise KeyError(f"unknown parameter key {key!r}")
        # explicit keys win over aliases
        for key, raw in values.items():
            if key in FLAT_KEYS:
                group, name, to_int, _ = FLAT_KEYS[key]
                groups[group][name] = to_int(float(raw))
        return cls(
            drive=NVDriveParams(**groups["drive"]),
            shell=QDShellParams(**groups["shell"]),
            geometry=DipoleGeometry(**groups["geometry"]),
            transport=TransportParams(**groups["transport"]),
        )


def _ident(x):
    return x


FLAT_KEYS = {
    "omega_L_over_2pi_MHz": ("drive", "omega_L", mhz_to_angular, angular_to_mhz),
    "omega_R_over_2pi_MHz": ("drive", "omega_R", mhz_to_angular, angular_to_mhz),
    "delta_L_over_2pi_MHz": ("drive", "delta_L", mhz_to_angular, angular_to_mhz),
    "delta_R_over_2pi_MHz": ("drive", "delta_R", mhz_to_angular, angular_to_mhz),
    "D_over_2pi_MHz": ("drive", "D", mhz_to_angular, angular_to_mhz),
    "omega_0_over_2pi_MHz": ("drive", "omega_0", mhz_to_angular, angular_to_mhz),
    "g_par": ("shell", "g_par", _ident, _ident),
    "g_perp": ("shell", "g_perp", _ident, _ident),
    "alpha_rad": ("shell", "alpha", _ident, _ident),
    "B_z_mT": ("shell", "B_z", lambda v: v * 1e-3, lambda v: v * 1e3),
    "delta_SO_ueV": ("shell", "delta_SO", ueV_to_angular, angular_to_ueV),
    "delta_KKp_ueV": ("shell", "delta_KKp", ueV_to_angular, angular_to_ueV),
    "phi_rad": ("shell", "phi", _ident, _ident),
    "g_orb": ("shell", "g_orb", _ident, _ident),
    "r_L_nm": ("geometry", "r_L", lambda v: v * 1e-9, lambda v: v * 1e9),
    "r_R_nm": ("geometry", "r_R", lambda v: v * 1e-9, lambda v: v * 1e9),
    "J_over_2pi_MHz": ("transport", "J", mhz_to_angular, angular_to_mhz),
    "delta_ueV": ("transport", "delta", ueV_to_angular, angular_to_ueV),
    "gamma_in_GHz": ("transport", "gamma_in", ghz_rate_to_per_us, lambda v: v * 1e-3),
    "gamma_out_GHz": ("transport", "gamma_out", ghz_rate_to_per_us, lambda v: v * 1e-3),
}

# Convenience keys that set both sides at once.
ALIASES = {
    "omega_over_2pi_MHz": ("omega_L_over_2pi_MHz", "omega_R_over_2pi_MHz"),
    "r_nm": ("r_L_nm", "r_R_nm"),
    "gamma_GHz": ("gamma_in_GHz", "gamma_out_GHz"),
}


# -- g tensor and Kramers doublets -------------------------------------------

def g_tensor(alpha: float, g_par: float, g_perp: float) -> np.ndarray:
    """Anisotropic g tensor of a tilted nanotube segment (tilt from the x axis)."""
    s, c = np.sin(alpha), np.cos(alpha)
    off = (g_par - g_perp) * s * c
    return np.array(
        [
            [g_par * c**2 + g_perp * s**2, 0.0, off],
            [0.0, g_perp, 0.0],
            [off, 0.0, g_par * s**2 + g_perp * c**2],
        ]
    )


@dataclass
class KramersResult:
    zeta: float
    gap: float
    g_par: float
    g_perp: float
    eigenvectors: np.ndarray  # columns: up, down, up*, down*
    numeric_gap: float
    numeric_g_par: float
    numeric_g_perp: float
    subspace_error: float  # ||P_lower(numeric) - P_lower(closed form)||


def shell_hamiltonian(shell: QDShellParams, B: Iterable[float] = (0, 0, 0), alpha: float = 0.0,
                      c: PhysicalConstants = CONSTANTS) -> np.ndarray:
    """4x4 ground-shell Hamiltonian, basis valley (K', K) x spin, rad/us.

    The spin quantization axis is the local tube axis, so ``n.sigma`` is
    ``sigma_z`` in this frame; the field is expressed in the same frame
    (component 2 along the tube).
    """
    tau1, tau2, tau3 = PAULI
    B = np.asarray(B, dtype=float)
    mu_b = joule_to_angular(c.mu_B, c)  # rad/us per tesla
    n = np.array([0.0, 0.0, 1.0])
    sigma_n = SZ
    h = (
        -0.5 * shell.delta_SO * np.kron(tau3, sigma_n)
        - 0.5 * shell.delta_KKp * np.kron(np.cos(shell.phi) * tau1 + np.sin(shell.phi) * tau2, I2)
        + 0.5 * c.g_s * mu_b * sum(Bk * np.kron(I2, p) for Bk, p in zip(B, PAULI))
        + shell.g_orb * mu_b * float(B @ n) * np.kron(tau3, I2)
    )
    return h


def kramers_doublets(shell: QDShellParams, c: PhysicalConstants = CONSTANTS) -> KramersResult:
    """Closed-form Kramers doublets at alpha = B = phi = 0, cross-checked numerically."""
    gap = float(np.hypot(shell.delta_SO, shell.delta_KKp))
    if gap == 0.0:
        raise ValueError("zero Kramers gap: delta_SO and delta_KKp both vanish")
    zeta = float(np.arctan2(shell.delta_KKp, shell.delta_SO))
    ch, sh = np.cos(zeta / 2), np.sin(zeta / 2)
    # basis |K' up>, |K' down>, |K up>, |K down>
    up = np.array([ch, 0, sh, 0], dtype=complex)
    down = np.array([0, sh, 0, ch], dtype=complex)
    up_star = np.array([0, -ch, 0, sh], dtype=complex)
    down_star = np.array([-sh, 0, ch, 0], dtype=complex)
    vecs = np.column_stack([up, down, up_star, down_star])

    flat = replace(shell, phi=0.0)
    evals, evecs = np.linalg.eigh(shell_hamiltonian(flat))
    lower = evecs[:, :2]
    p_num = lower @ dagger(lower)
    p_cf = vecs[:, :2] @ dagger(vecs[:, :2])
    sub_err = float(np.linalg.norm(p_num - p_cf))

    # effective g factors: Zeeman operators (per mu_B B) projected on the doublet
    zee_par = 0.5 * c.g_s * np.kron(I2, SZ) + shell.g_orb * np.kron(SZ, I2)
    zee_perp = 0.5 * c.g_s * np.kron(I2, SX)
    g_num = []
    for z in (zee_par, zee_perp):
        ev = np.linalg.eigvalsh(dagger(lower) @ z @ lower)
        g_num.append(float(ev[-1] - ev[0]))
    return KramersResult(
        zeta=zeta,
        gap=gap,
        g_par=c.g_s + 2 * shell.g_orb * np.cos(zeta),
        g_perp=c.g_s * np.sin(zeta),
        eigenvectors=vecs,
        numeric_gap=float(evals[2] - evals[1]),
        numeric_g_par=g_num[0],
        numeric_g_perp=g_num[1],
        subspace_error=sub_err,
    )


# -- couplings -----------------------------------------------------------------

def dipole_strength(r: float, c: PhysicalConstants = CONSTANTS) -> float:
    """mu_0 mu_B^2 g_s / (4 pi r^3), in rad/us."""
    return joule_to_angular(c.mu_0 * c.mu_B**2 * c.g_s / (4 * np.pi * r**3), c)


def derived_couplings(params: ModelParams, c: PhysicalConstants = CONSTANTS) -> DerivedCouplings:
    sh = params.shell
    # alpha_R = -alpha_L = alpha; n_tilde_j = g_j . z_hat
    n_R = g_tensor(sh.alpha, sh.g_par, sh.g_perp)[:, 2].copy()
    n_L = g_tensor(-sh.alpha, sh.g_par, sh.g_perp)[:, 2].copy()
    return DerivedCouplings(
        xi=float(n_R[2]),
        eta=float(n_R[0]),
        epsilon=joule_to_angular(c.mu_B * sh.B_z / 2, c),
        kappa_L=dipole_strength(params.geometry.r_L, c),
        kappa_R=dipole_strength(params.geometry.r_R, c),
        n_tilde_L=n_L,
        n_tilde_R=n_R,
    )


# -- Hamiltonian blocks ------------------------------------------------------------

def _n_dot_sigma(n: np.ndarray) -> np.ndarray:
    return sum(nk * p for nk, p in zip(n, PAULI))


def nv_drive_hamiltonian(omega_L: float, omega_R: float, delta_L: float = 0.0,
                         delta_R: float = 0.0) -> np.ndarray:
    """Dressed NV pair: sum_j (Omega_j/2) s_x^j + (delta_j/2) s_z^j, 4x4."""
    return (
        0.5 * omega_L * np.kron(SX, I2)
        + 0.5 * omega_R * np.kron(I2, SX)
        + 0.5 * delta_L * np.kron(SZ, I2)
        + 0.5 * delta_R * np.kron(I2, SZ)
    )


def h11_block(
    epsilon: float,
    n_L: np.ndarray,
    n_R: np.ndarray,
    kappa_L: float,
    kappa_R: float,
    omega_L: float,
    omega_R: float,
    delta_L: float = 0.0,
    delta_R: float = 0.0,
) -> np.ndarray:
    """(1,1) block, 16x16, basis {T+,T-,T0,S} x NV computational."""
    vL = np.kron(_n_dot_sigma(n_L), I2)
    vR = np.kron(I2, _n_dot_sigma(n_R))
    szL, szR = np.kron(SZ, I2), np.kron(I2, SZ)
    h_prod = (
        np.kron(np.eye(4), nv_drive_hamiltonian(omega_L, omega_R, delta_L, delta_R))
        + epsilon * np.kron(vL + vR, I4)
        - kappa_L * np.kron(vL, szL)
        - kappa_R * np.kron(vR, szR)
    )
    u = np.kron(PRODUCT_TO_COUPLED, I4)
    return dagger(u) @ h_prod @ u


def build_h11(params: ModelParams) -> np.ndarray:
    dc = derived_couplings(params)
    d = params.drive
    return h11_block(dc.epsilon, dc.n_tilde_L, dc.n_tilde_R, dc.kappa_L, dc.kappa_R,
                     d.omega_L, d.omega_R, d.delta_L, d.delta_R)


def build_hamiltonian(params: ModelParams, layout: SectorLayout = LAYOUT) -> np.ndarray:
    """Full 28x28 Hamiltonian H_(0,1) + [H_(1,1) + H_(0,2) + H_t], rad/us."""
    dc = derived_couplings(params)
    d, tr = params.drive, params.transport
    h_es = nv_drive_hamiltonian(d.omega_L, d.omega_R, d.delta_L, d.delta_R)
    nR = _n_dot_sigma(dc.n_tilde_R)
    h01 = np.kron(I2, h_es) + dc.epsilon * np.kron(nR, I4) - dc.kappa_R * np.kron(nR, np.kron(I2, SZ))
    h02 = h_es + tr.delta * I4

    s_to_sg = np.zeros((1, 4), dtype=complex)
    s_to_sg[0, COUPLED_LABELS.index("S")] = 1.0
    h_t = tr.J * embed_sector(s_to_sg, "(1,1)", "(0,2)", layout)
    return (
        embed_sector(h01, "(0,1)", "(0,1)", layout)
        + embed_sector(build_h11(params), "(1,1)", "(1,1)", layout)
        + embed_sector(h02, "(0,2)", "(0,2)", layout)
        + h_t
        + dagger(h_t)
    )


@dataclass(frozen=True)
class JumpOperator:
    operator: np.ndarray
    rate_tag: str  # "gamma_in" or "gamma_out"
    label: str


def build_jump_operators(layout: SectorLayout = LAYOUT, basis: np.ndarray | None = None) -> list[JumpOperator]:
    """Injection a1psi^dag and ejection a2psi, unit-normalized, NV identity.

    ``basis`` is a 2x2 unitary whose columns are the valley-spin states psi
    (default: up, down). Ejection a2psi maps S_g to the complementary state
    psi-bar of the right dot, so the total ejection rate out of S_g is
    2*gamma_out.
    """
    v = np.eye(2, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
    u_c = dagger(PRODUCT_TO_COUPLED)
    jumps = []
    for k in range(2):
        psi = v[:, k]
        # |phi>_R in (0,1) -> |psi>_L |phi>_R in (1,1), product basis then coupled
        inj = u_c @ np.kron(psi[:, None], I2)
        jumps.append(JumpOperator(embed_sector(inj, "(0,1)", "(1,1)", layout), "gamma_in", f"a1_{k}^dag"))
    for k in range(2):
        psibar = v[:, 1 - k]
        ej = psibar[:, None].astype(complex)
        jumps.append(JumpOperator(embed_sector(ej, "(0,2)", "(0,1)", layout), "gamma_out", f"a2_{k}"))
    return jumps


# -- structural checks -----------------------------------------------------------

BELL_ORDER = ("PhiPlus", "PhiMinus", "PsiPlus", "PsiMinus")


def coupled_bell_transform() -> np.ndarray:
    """Unitary taking {T+,T-,T0,S} x Bell coordinates to {T+,T-,T0,S} x computational."""
    bell = np.column_stack([BELL[k] for k in BELL_ORDER])
    return np.kron(np.eye(4), bell)


@dataclass
class DarkStateReport:
    is_unique_dark: bool
    coupled_norms: dict[str, float]
    dark_states: list[str]


def dark_state_report(h11: np.ndarray, tol: float = TOL.dark_state) -> DarkStateReport:
    """Find (1,1) basis states in the T/S x Bell basis with no off-diagonal coupling."""
    if h11.shape != (16, 16):
        raise ValueError("expected the 16x16 (1,1) block")
    u = coupled_bell_transform()
    hb = dagger(u) @ h11 @ u
    off = hb - np.diag(np.diag(hb))
    labels = [f"{d}|{b}" for d in COUPLED_LABELS for b in BELL_ORDER]
    norms = {}
    for k, lab in enumerate(labels):
        norms[lab] = float(np.hypot(np.linalg.norm(off[k, :]), np.linalg.norm(off[:, k])))
    dark = [lab for lab, r in norms.items() if r < tol]
    return DarkStateReport(dark == ["T0|PhiMinus"], norms, dark)


# -- rotating-wave check -------------------------------------------------------------

def _su2_step(hx: np.ndarray, hy: np.ndarray, hz: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i dt (hx sx + hy sy + hz sz)) for arrays of coefficients, shape (n,2,2)."""
    nrm = np.sqrt(hx**2 + hy**2 + hz**2)
    th = nrm * dt
    with np.errstate(invalid="ignore", divide="ignore"):
        sinc = np.where(nrm > 0, np.sin(th) / np.where(nrm > 0, nrm, 1.0), dt)
    c = np.cos(th)
    out = np.empty(hx.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = c - 1j * sinc * hz
    out[..., 1, 1] = c + 1j * sinc * hz
    out[..., 0, 1] = -1j * sinc * (hx - 1j * hy)
    out[..., 1, 0] = -1j * sinc * (hx + 1j * hy)
    return out


def _pure_trace_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise trace distance sqrt(1 - |<a|b>|^2) of normalized kets, cancellation-free.

    Uses ||a - e^{i phi} b||^2 = 2 (1 - |<a|b>|) with the optimal phase.
    """
    ov = np.sum(a.conj() * b, axis=0)
    mag = np.abs(ov)
    phase = np.where(mag > 0, ov / np.where(mag > 0, mag, 1.0), 1.0)
    diff = np.linalg.norm(a - b * phase.conj(), axis=0)
    return diff * np.sqrt(np.clip((1 + mag) / 2, 0, 1))


@dataclass
class RWAReport:
    max_trace_distance: float
    omega_over_omega0: float
    duration: float
    times: np.ndarray
    distances: np.ndarray


def verify_rwa_dressing(drive: NVDriveParams, duration: float, steps_per_period: int = 64,
                        samples_per_period: int = 1) -> RWAReport:
    """Compare the full driven two-level NV qubit with the dressed model.

    Lab frame: H(t) = (omega_0/2) s_z + Omega cos(omega_0 t) s_x on the
    {m_s=+1, m_s=-1} pair, propagated with a fourth-order Magnus scheme and
    moved into the frame rotating at omega_0. The dressed model is
    (Omega/2) s_x. Reports the maximal trace distance over a set of initial
    states and all sampled times.
    """
    if duration <= 0:
        raise ValueError("duration must be positive")
    om, w0 = drive.omega_L, drive.omega_0
    period = TWO_PI / w0
    n_steps = int(np.ceil(duration / period * steps_per_period))
    dt = duration / n_steps
    # two-point Gauss-Legendre Magnus (order 4)
    c1, c2 = 0.5 - np.sqrt(3) / 6, 0.5 + np.sqrt(3) / 6
    t0 = np.arange(n_steps) * dt
    f1 = om * np.cos(w0 * (t0 + c1 * dt))
    f2 = om * np.cos(w0 * (t0 + c2 * dt))
    # H_i = (w0/2) sz + f_i sx; effective step generator
    # (H1+H2)/2 - i sqrt(3) dt/12 [H2,H1], [H2,H1] = i w0 (f1-f2) sy
    hx = 0.5 * (f1 + f2)
    hz = np.full(n_steps, 0.5 * w0)
    hy = np.sqrt(3) * dt / 12 * w0 * (f1 - f2)
    steps = _su2_step(hx, hy, hz, dt)

    psi0 = np.column_stack([
        [1, 0], [0, 1], np.array([1, 1]) / np.sqrt(2), np.array([1, 1j]) / np.sqrt(2)
    ]).astype(complex)
    sample_every = max(1, steps_per_period // max(1, samples_per_period))
    psi = psi0.copy()
    times, dists = [0.0], [0.0]
    for k in range(n_steps):
        psi = steps[k] @ psi
        if (k + 1) % sample_every == 0 or k == n_steps - 1:
            t = (k + 1) * dt
            rot = np.array([np.exp(0.5j * w0 * t), np.exp(-0.5j * w0 * t)])
            lab_rot = rot[:, None] * psi
            u_rwa = _su2_step(np.array(0.5 * om), np.array(0.0), np.array(0.0), t)
            ideal = u_rwa @ psi0
            dists.append(float(np.max(_pure_trace_distance(ideal, lab_rot))))
            times.append(t)
    dists = np.array(dists)
    return RWAReport(float(dists.max()), om / w0, duration, np.array(times), dists)
