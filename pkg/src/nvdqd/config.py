"""Physical constants, unit conversions and numerical tolerances.

Internal unit system: time in microseconds, angular frequencies in rad/us,
hbar = 1. Plain rates (transport) are in 1/us.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants as _sc

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PhysicalConstants:
    """CODATA 2018 values in SI units."""

    mu_B: float = _sc.physical_constants["Bohr magneton"][0]
    mu_0: float = _sc.physical_constants["vacuum mag. permeability"][0]
    g_s: float = 2.0023
    hbar: float = _sc.hbar
    h: float = 2.0 * np.pi * _sc.hbar
    e: float = _sc.e
    mu_n: float = _sc.physical_constants["nuclear magneton"][0]


CONSTANTS = PhysicalConstants()


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-10
    trace: float = 1e-9
    min_eigenvalue: float = -1e-8
    dark_state: float = 1e-12
    rank_rtol: float = 1e-10
    steady_residual: float = 1e-9


TOL = Tolerances()


# -- unit conversions -------------------------------------------------------

def mhz_to_angular(nu_mhz: float) -> float:
    """nu/2pi in MHz -> angular frequency in rad/us."""
    return TWO_PI * nu_mhz


def angular_to_mhz(omega: float) -> float:
    return omega / TWO_PI


def ghz_rate_to_per_us(rate_ghz: float) -> float:
    """Plain rate in GHz (1e9/s) -> 1/us. No factor 2pi."""
    return rate_ghz * 1e3


def joule_to_angular(energy: float, c: PhysicalConstants = CONSTANTS) -> float:
    """Energy in J -> angular frequency in rad/us."""
    return energy / c.hbar * 1e-6


def ueV_to_angular(energy_ueV: float, c: PhysicalConstants = CONSTANTS) -> float:
    """1 ueV corresponds to 2pi x 241.799 MHz."""
    return joule_to_angular(energy_ueV * 1e-6 * c.e, c)


def angular_to_ueV(omega: float, c: PhysicalConstants = CONSTANTS) -> float:
    return omega * 1e6 * c.hbar / (1e-6 * c.e)
