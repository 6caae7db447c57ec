"""Decoherence during channel distribution: spin dephasing and relaxation on
the waiting spin, photon loss on the travelling mode.

Photon loss is modelled by a beam splitter onto an environment mode ``"v"``;
tracing that mode out suppresses the spin coherence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry, Unattainable
from .metrics import CLASSICAL_BENCHMARK
from .protocol import InputQubit, evolve_stages, prepare_input
from .states import (
    REDUCED,
    STANDARD,
    SQRT2,
    CoherentTerm,
    Dyad,
    HybridKet,
    HybridMixture,
    Spin,
    from_terms,
    partial_trace_mode,
    project_coherent,
    project_spins,
    select_amplitudes,
    spin_density,
)

LOSS_MODE = "v"
C_VACUUM = 2.998e8


@dataclass(frozen=True)
class NoiseParams:
    """Rates in Hz, delay ``tau`` in s, loss amplitude ``r`` in [0, 1].

    ``r`` is stored directly; :meth:`from_distance` derives it (and ``tau``)
    from a fibre length.
    """

    gamma_phi: float = 0.0
    gamma: float = 0.0
    tau: float = 0.0
    r: float = 0.0

    def __post_init__(self):
        vals = (self.gamma_phi, self.gamma, self.tau, self.r)
        if any(math.isnan(v) for v in vals) or min(vals[:3]) < 0:
            raise ValueError("rates and delay must be non-negative")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError("loss amplitude r must lie in [0, 1]")

    @classmethod
    def from_distance(cls, d0: float, l_att: float, gamma_phi: float = 0.0, gamma: float = 0.0, c: float = C_VACUUM):
        """``tau = d0/c``, transmission ``eta = exp(-d0/l_att)``, ``r = sqrt(1 - eta)``."""
        if d0 < 0 or l_att <= 0 or c <= 0:
            raise ValueError("need d0 >= 0, l_att > 0, c > 0")
        eta = math.exp(-d0 / l_att)
        return cls(gamma_phi, gamma, d0 / c, math.sqrt(-math.expm1(-d0 / l_att)) if eta < 1 else 0.0)

    @property
    def t(self) -> float:
        return math.sqrt(1.0 - self.r**2)

    @property
    def relaxation_factor(self) -> float:
        """``exp(-gamma tau)``: surviving down population."""
        return math.exp(-self.gamma * self.tau)

    @property
    def coherence_factor(self) -> float:
        """``exp(-(4 gamma_phi + gamma) tau / 2)``: surviving spin coherence."""
        return math.exp(-(4 * self.gamma_phi + self.gamma) * self.tau / 2)


def loss_overlap(r_alpha: float, convention: str = REDUCED) -> float:
    """Coherence factor left after tracing ``|r alpha><-r alpha|`` out of the loss mode."""
    if convention == REDUCED:
        return math.exp(-(r_alpha**2))
    if convention == STANDARD:
        return math.exp(-2 * r_alpha**2)
    raise ValueError(f"unknown convention {convention!r}")


def _term(spin: Spin, a4: float, av: float) -> CoherentTerm:
    return CoherentTerm(1.0, (spin,), (a4, av))


def noisy_channel(alpha: float, p: NoiseParams) -> HybridMixture:
    """Distributed channel over spin 1, mode 4 (``+/- t alpha``) and the loss
    mode ``"v"`` (``+/- r alpha``)."""
    ta, ra = p.t * alpha, p.r * alpha
    up = _term(Spin.UP, ta, ra)
    down = _term(Spin.DOWN, -ta, -ra)
    jumped = _term(Spin.UP, -ta, -ra)
    d, e = p.coherence_factor, p.relaxation_factor
    dyads = [
        Dyad(0.5, up, up),
        Dyad(0.5 * d, up, down),
        Dyad(0.5 * d, down, up),
        Dyad(0.5 * e, down, down),
        Dyad(0.5 * (1 - e), jumped, jumped),
    ]
    return HybridMixture((1,), (4, LOSS_MODE), dyads).simplify()


def noisy_pipeline(q: InputQubit, p: NoiseParams, alpha: float) -> HybridMixture:
    """Noisy channel pushed through the beam splitter, ancilla reflections and
    MW pulses; modes 8, 9 and ``"v"`` remain."""
    return evolve_stages(noisy_channel(alpha, p), prepare_input(q))["final"]


def conditioning_amplitudes(alpha: float, beta: float, p: NoiseParams) -> tuple[float, float]:
    """``(t alpha + beta)/sqrt2`` and ``(t alpha - beta)/sqrt2`` for modes 8 and 9."""
    ta = p.t * alpha
    if beta == 0 or ta == 0 or abs(ta) == abs(beta):
        raise DegenerateGeometry(f"t*alpha={ta}, beta={beta}: the outcome projectors coincide")
    return (ta + beta) / SQRT2, (ta - beta) / SQRT2


def condition_and_trace(
    mix: HybridMixture,
    alpha: float,
    beta: float,
    p: NoiseParams,
    projection: str = "ideal",
    convention: str = REDUCED,
) -> np.ndarray:
    """Spin-1 density after the up-up readout with mode 8 in the ``(t alpha+beta)/sqrt2``
    component and mode 9 in the ``(t alpha-beta)/sqrt2`` one, then tracing the loss mode.

    ``projection="ideal"`` treats distinct coherent components as orthogonal
    (keeps only matching terms); ``"coherent"`` applies the exact coherent-state
    projectors, which leak at small amplitudes.  Returns a unit-trace 2x2 array.
    """
    g_plus, g_minus = conditioning_amplitudes(alpha, beta, p)
    out = project_spins(mix, {2: Spin.UP, 3: Spin.UP})
    if projection == "ideal":
        out = select_amplitudes(out, {8: g_plus, 9: g_minus})
    elif projection == "coherent":
        out = project_coherent(project_coherent(out, 8, g_plus), 9, g_minus)
    else:
        raise ValueError(f"unknown projection {projection!r}")
    if LOSS_MODE in out.mode_labels:
        out = partial_trace_mode(out, LOSS_MODE, convention)
    rho = spin_density(out, STANDARD)
    tr = np.trace(rho).real
    if tr <= 0:
        raise DegenerateGeometry("conditioning outcome has zero probability")
    return rho / tr


def teleported_density(q: InputQubit, p: NoiseParams, alpha: float, convention: str = REDUCED) -> np.ndarray:
    """Closed-form noisy teleported state of spin 1.

    ``[[|a|^2 + |b|^2 (1 - E), a b* D X], [a* b D X, |b|^2 E]]`` with
    ``E = exp(-gamma tau)``, ``D = exp(-(4 gamma_phi + gamma) tau/2)`` and ``X``
    the loss-mode overlap :func:`loss_overlap`.
    """
    a, b = q.a, q.b
    e = p.relaxation_factor
    off = a * np.conj(b) * p.coherence_factor * loss_overlap(p.r * alpha, convention)
    return np.array(
        [[abs(a) ** 2 + abs(b) ** 2 * (1 - e), off], [np.conj(off), abs(b) ** 2 * e]],
        dtype=complex,
    )


def average_fidelity_noisy(p: NoiseParams, alpha: float, convention: str = REDUCED) -> float:
    """``1/2 + E/6 + D X/3``: the Bloch average of :func:`teleported_density`."""
    return 0.5 + p.relaxation_factor / 6 + p.coherence_factor * loss_overlap(p.r * alpha, convention) / 3


def average_fidelity_bloch(p: NoiseParams, alpha: float, convention: str = REDUCED, nodes: int = 24) -> float:
    """Bloch-sphere integral of ``<T|rho|T>`` over :func:`teleported_density`.

    Gauss-Legendre in ``cos(theta)`` times a uniform rule in ``phi``; the
    integrand is a trigonometric polynomial of low degree, so both rules
    are exact up to rounding.
    """
    ct, wt = np.polynomial.legendre.leggauss(nodes)
    phis = 2 * math.pi * np.arange(nodes) / nodes
    total = 0.0
    for c, w in zip(ct, wt):
        theta = math.acos(c)
        for phi in phis:
            q = InputQubit.from_bloch(theta, phi, 1.0)
            rho = teleported_density(q, p, alpha, convention)
            total += w * np.vdot(q.target, rho @ q.target).real
    return total / (2 * nodes)


def unravel_channel(alpha: float, p: NoiseParams) -> list[tuple[float, HybridKet]]:
    """Pure-state decomposition ``[(weight, ket), ...]`` of :func:`noisy_channel`.

    The coherent block ``[[1, D], [D, E]]/2`` on ``{|up,+>, |down,->}`` is
    diagonalized; the jump term is already pure.
    """
    ta, ra = p.t * alpha, p.r * alpha
    d, e = p.coherence_factor, p.relaxation_factor
    vals, vecs = np.linalg.eigh(0.5 * np.array([[1.0, d], [d, e]]))
    out = []
    for lam, v in zip(vals, vecs.T):
        if lam > 1e-15:
            ket = from_terms((1,), (4, LOSS_MODE), [(v[0], (Spin.UP,), (ta, ra)), (v[1], (Spin.DOWN,), (-ta, -ra))])
            out.append((float(lam), ket))
    if 1 - e > 1e-15:
        out.append((0.5 * (1 - e), from_terms((1,), (4, LOSS_MODE), [(1.0, (Spin.UP,), (-ta, -ra))])))
    return out


def unravelled_density(q: InputQubit, p: NoiseParams, alpha: float, convention: str = REDUCED) -> np.ndarray:
    """Second route to the conditioned spin state: evolve each pure component
    of the channel as a ket, condition, trace the loss mode, then mix."""
    g_plus, g_minus = conditioning_amplitudes(alpha, q.beta, p)
    inp = prepare_input(q)
    rho = np.zeros((2, 2), dtype=complex)
    for w, ket in unravel_channel(alpha, p):
        final = evolve_stages(ket, inp)["final"]
        branch = select_amplitudes(project_spins(final, {2: Spin.UP, 3: Spin.UP}), {8: g_plus, 9: g_minus})
        rho += w * spin_density(partial_trace_mode(branch, LOSS_MODE, convention), STANDARD)
    return rho / np.trace(rho).real


def fidelity_vs_distance(
    alpha: float,
    gamma_phi: float,
    gamma: float,
    l_att: float,
    c: float,
    d0_grid,
    convention: str = REDUCED,
) -> list[dict]:
    """Rows with ``d0_km, tau_s, r_sq, f_bar, benchmark`` for each distance (m)."""
    d0s = np.atleast_1d(np.asarray(d0_grid, dtype=float))
    if d0s.size == 0:
        raise ValueError("empty distance grid")
    rows = []
    for d0 in d0s:
        p = NoiseParams.from_distance(float(d0), l_att, gamma_phi, gamma, c)
        rows.append(
            {
                "d0_km": float(d0) / 1e3,
                "tau_s": p.tau,
                "r_sq": p.r**2,
                "f_bar": average_fidelity_noisy(p, alpha, convention),
                "benchmark": CLASSICAL_BENCHMARK,
            }
        )
    return rows


def max_distance_for_fidelity(f_target: float, alpha: float, l_att: float) -> float:
    """Largest fibre length keeping the loss-only average fidelity at ``f_target``.

    Inverts ``2/3 + exp(-r^2 alpha^2)/3 = F`` for ``r^2``, then
    ``exp(-d0/l_att) = 1 - r^2``.
    """
    if not CLASSICAL_BENCHMARK < f_target < 1:
        raise ValueError("f_target must lie strictly between 2/3 and 1")
    if not alpha > 0 or not l_att > 0:
        raise ValueError("alpha and l_att must be positive")
    r_sq = -math.log(3 * f_target - 2) / alpha**2
    if r_sq >= 1:
        raise Unattainable(f"needs r^2 = {r_sq:.4f} >= 1; loss alone never drops fidelity to {f_target}")
    return -l_att * math.log1p(-r_sq)
