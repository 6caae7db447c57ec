"""Reflection coefficient of a single-spin cavity in the weak-excitation limit."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import SingularDenominator


@dataclass(frozen=True)
class CavityParams:
    """Rates in common (angular-frequency) units.

    ``delta_omega`` is the cavity-probe detuning ``omega_c - omega``.
    """

    g: float
    kappa: float
    gamma0: float = 0.0
    eta: float = 0.0
    delta_omega: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        if self.g < 0 or self.gamma0 < 0 or self.eta < 0:
            raise ValueError("g, gamma0 and eta must be non-negative")


# Demonstration rates for detuning sweeps; not pinned by any measurement.
DEFAULT_DEMO = CavityParams(g=10.0, kappa=1.0, gamma0=0.1, eta=0.1)


class Regime(Enum):
    NO_PHASE_SHIFT = "no_phase_shift"
    PI_SHIFT = "pi_shift"
    INTERMEDIATE = "intermediate"


def reflection_coefficient(p: CavityParams) -> complex:
    g2 = p.g**2 - p.delta_omega**2
    num = 4 * g2 + p.gamma0 * (p.eta - p.kappa) + 2j * p.delta_omega * (p.gamma0 + p.eta - p.kappa)
    den = 4 * g2 + p.gamma0 * (p.eta + p.kappa) + 2j * p.delta_omega * (p.gamma0 + p.eta + p.kappa)
    if abs(den) <= 1e-14:
        raise SingularDenominator(f"|denominator| = {abs(den):.3e} for {p}")
    r = complex(num / den)
    if abs(r) > 1 + 1e-12:
        warnings.warn(f"|r| = {abs(r):.6f} > 1 for {p}: not a passive reflection", RuntimeWarning, stacklevel=2)
    return r


def regime_classify(p: CavityParams, tol: float = 0.05) -> Regime:
    if not 0 < tol < 1:
        raise ValueError("tol must lie in (0, 1)")
    r = reflection_coefficient(p)
    if abs(r - 1) < tol:
        return Regime.NO_PHASE_SHIFT
    if abs(r + 1) < tol:
        return Regime.PI_SHIFT
    return Regime.INTERMEDIATE


def reflection_sweep(p: CavityParams, deltas) -> list[tuple[float, float, float]]:
    """Rows ``(delta_omega, Re r, Im r)`` over the detuning grid."""
    deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
    if deltas.size == 0:
        raise ValueError("empty detuning grid")
    rows = []
    for d in deltas:
        r = reflection_coefficient(replace(p, delta_omega=float(d)))
        rows.append((float(d), r.real, r.imag))
    return rows
