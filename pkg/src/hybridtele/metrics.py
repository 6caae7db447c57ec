"""Teleportation fidelities: single-shot overlap, Bloch-sphere averages as a
function of the branch ratio, conditioned fidelity maps over homodyne
outcomes, and the heralded-failure profile."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import DegenerateGeometry, NotNormalized

CLASSICAL_BENCHMARK = 2.0 / 3.0
NORM_TOL = 1e-8

# graded quadrature: panel ratio, nodes per panel and the panel-count cap
_GRADE_Q = 0.15
_PANEL_NODES = 16
_MAX_LEVELS = 20


def classical_benchmark() -> float:
    """Best average fidelity reachable without entanglement."""
    return CLASSICAL_BENCHMARK


@dataclass(frozen=True)
class BlochAngles:
    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi:
            raise ValueError("theta must lie in [0, pi]")
        if not 0.0 <= self.phi < 2 * math.pi:
            raise ValueError("phi must lie in [0, 2 pi)")

    def amplitudes(self) -> tuple[complex, complex]:
        """``(a, b) = (cos(theta/2), sin(theta/2) e^{i phi})``."""
        return complex(math.cos(self.theta / 2)), math.sin(self.theta / 2) * complex(math.cos(self.phi), math.sin(self.phi))


# ---------------------------------------------------------------------------
# single-shot fidelity


def fidelity(final, target) -> float:
    """Overlap ``<T|rho|T>`` of a normalized spin state with a pure target.

    ``final`` may be a 2-vector (pure) or a 2x2 density matrix.
    """
    t = np.asarray(target, dtype=complex).reshape(-1)
    if t.shape != (2,):
        raise ValueError("target must be a 2-vector")
    if abs(np.vdot(t, t).real - 1.0) > NORM_TOL:
        raise NotNormalized(f"target norm^2 = {np.vdot(t, t).real:.12g}")
    f = np.asarray(final, dtype=complex)
    if f.shape == (2,):
        n2 = np.vdot(f, f).real
        if abs(n2 - 1.0) > NORM_TOL:
            raise NotNormalized(f"final norm^2 = {n2:.12g}")
        val = abs(np.vdot(t, f)) ** 2
    elif f.shape == (2, 2):
        tr = np.trace(f)
        if abs(tr - 1.0) > NORM_TOL:
            raise NotNormalized(f"final trace = {tr:.12g}")
        val = np.vdot(t, f @ t).real
    else:
        raise ValueError(f"final state has shape {f.shape}; expected (2,) or (2, 2)")
    return float(min(1.0, max(0.0, val)))


def ratio_state(a: complex, b: complex, m1: complex, m2: complex) -> np.ndarray:
    """Normalized ``(a M1 + b M2)|up> + (b M1 + a M2)|down>``."""
    v = np.array([a * m1 + b * m2, b * m1 + a * m2], dtype=complex)
    n = np.linalg.norm(v)
    if n == 0:
        raise NotNormalized("conditioned spin state vanishes")
    return v / n


def ratio_fidelity(a: complex, b: complex, m1: complex, m2: complex) -> float:
    """Closed-form fidelity of :func:`ratio_state` with ``a|up> + b|down>``."""
    x = 2 * (np.conj(a) * b).real
    num = abs(m1 + x * m2) ** 2
    den = abs(m1) ** 2 + abs(m2) ** 2 + 2 * x * (np.conj(m1) * m2).real
    return float(num / den)


# ---------------------------------------------------------------------------
# Bloch average


def _gl(n: int, lo: float, hi: float):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1), half * w


@lru_cache(maxsize=64)
def _half_nodes(length: float, levels: int, base: int):
    """Nodes on ``[0, length]`` refined geometrically toward 0."""
    if levels == 0:
        return _gl(4 * base, 0.0, length)
    edges = [0.0] + [length * _GRADE_Q**k for k in range(levels, -1, -1)]
    xs, ws = zip(*(_gl(base, lo, hi) for lo, hi in zip(edges[:-1], edges[1:])))
    return np.concatenate(xs), np.concatenate(ws)


def _levels(sigma: float) -> int:
    eps = abs(1.0 - sigma) / math.sqrt(sigma) if sigma > 0 else math.inf
    if eps > 0.5:
        return 0
    if eps == 0:
        return _MAX_LEVELS
    return min(math.ceil(math.log(5 * (math.pi / 2) / eps) / math.log(1 / _GRADE_Q)), _MAX_LEVELS)


def _folded_sum(sigmas: np.ndarray, levels: int, base: int) -> np.ndarray:
    # offsets a = |theta - pi/2|, b = |phi - pi|: the only near-singular point
    # (sigma ~ 1) sits at a = b = 0
    a, wa = _half_nodes(math.pi / 2, levels, base)
    b, wb = _half_nodes(math.pi, levels, base)
    ca = np.cos(a)[:, None]
    sa2 = 2 * np.sin(a / 2)[:, None] ** 2
    sb2 = 2 * np.sin(b / 2)[None, :] ** 2
    one_plus_u = sa2 + ca * sb2
    one_minus_u = 2.0 - one_plus_u
    num = (ca * one_minus_u * one_plus_u)[None]
    w = (wa[:, None] * wb[None, :])[None]
    s = sigmas[:, None, None]
    den = (1.0 - s) ** 2 + 2 * s * one_plus_u[None]
    return np.sum(w * num / den, axis=(1, 2))


def average_fidelity_vs_ratio(sigma, nodes: int = _PANEL_NODES):
    """Bloch-sphere average of the single-shot fidelity at branch ratio ``sigma``.

    Evaluates ``1 - (1/4pi) \\iint (sin t - sin^3 t cos^2 p)/(1 + 2 s sin t cos p + s^2)``
    with a Gauss-Legendre product rule.  The sphere is folded onto the
    quadrant adjacent to ``theta = pi/2, phi = pi`` (the integrand is even
    about both) and, for ``sigma`` near 1, panels are graded toward that
    corner.  ``nodes`` is the per-panel order; the ungraded rule uses
    ``4 * nodes`` points per axis on the quadrant.

    Accepts a scalar or array; negative ``sigma`` is folded to ``|sigma|``
    (the integrand is symmetric under ``phi -> phi + pi``).
    """
    s = np.abs(np.asarray(sigma, dtype=float))
    if np.any(np.isnan(s)):
        raise ValueError("sigma is NaN")
    flat = s.reshape(-1)
    out = np.ones_like(flat)
    finite = np.isfinite(flat)
    levels = np.array([_levels(v) if f else -1 for v, f in zip(flat, finite)])
    for k in np.unique(levels[finite]):
        idx = np.nonzero((levels == k) & finite)[0]
        for chunk in np.array_split(idx, max(1, len(idx) // 256)):
            out[chunk] = 1.0 - _folded_sum(flat[chunk], int(k), nodes) / math.pi
    out = out.reshape(s.shape)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# conditioned maps


def _log_cosh(x):
    x = np.abs(x)
    return x + np.log1p(np.exp(-2 * x)) - math.log(2.0)


def log_branch_ratio(x8, x9, alpha: float, beta: float):
    """``log(M1/M2)`` for the up-up branch at homodyne outcomes ``(x8, x9)``.

    ``M1`` pairs the even cat of amplitude ``(alpha+beta)/sqrt2`` on mode 8
    with the even cat of amplitude ``(alpha-beta)/sqrt2`` on mode 9, ``M2`` the
    swapped assignment.  The shared Gaussian envelope cancels, leaving a
    ratio of hyperbolic cosines of the peak positions ``alpha +/- beta``.
    """
    qa, qb = alpha + beta, alpha - beta
    x8 = np.asarray(x8, dtype=float)
    x9 = np.asarray(x9, dtype=float)
    return _log_cosh(qa * x8) + _log_cosh(qb * x9) - _log_cosh(qb * x8) - _log_cosh(qa * x9)


def branch_amplitudes(x8: float, x9: float, alpha: float, beta: float) -> tuple[float, float]:
    """``(M1, M2)`` built directly from position wavefunctions."""
    from .states import SQRT2, position_amplitude

    up = (alpha + beta) / SQRT2
    xi = (alpha - beta) / SQRT2

    def cat(amp, x):
        return position_amplitude(amp, x) + position_amplitude(-amp, x)

    return (cat(up, x8) * cat(xi, x9)).real, (cat(xi, x8) * cat(up, x9)).real


def _check_geometry(alpha: float, beta: float):
    if alpha == beta:
        raise DegenerateGeometry("alpha == beta merges the Xi peaks at the origin")
    if not alpha > beta > 0:
        raise ValueError(f"need alpha > beta > 0, got alpha={alpha}, beta={beta}")


@dataclass(frozen=True)
class FidelityMap:
    """Average fidelities over a homodyne-outcome grid, conditioned on up-up.

    ``f_bar[i, j]`` and ``f_bar_o[i, j]`` refer to ``x8[i], x9[j]``.
    """

    alpha: float
    beta: float
    x8: np.ndarray
    x9: np.ndarray
    f_bar: np.ndarray
    f_bar_o: np.ndarray
    metadata: dict = field(default_factory=dict)

    def best(self) -> np.ndarray:
        return np.maximum(self.f_bar, self.f_bar_o)

    def classical_mask(self) -> np.ndarray:
        """Cells where neither correction choice beats the classical benchmark."""
        return self.best() < CLASSICAL_BENCHMARK

    def rows(self):
        for i, a in enumerate(self.x8):
            for j, b in enumerate(self.x9):
                yield float(a), float(b), float(self.f_bar[i, j]), float(self.f_bar_o[i, j])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x8", "x9", "f_bar", "f_bar_o"])
        for r in self.rows():
            w.writerow([repr(v) for v in r])
        return buf.getvalue()


def square_grid(half_width: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    if n < 2 or half_width <= 0:
        raise ValueError("grid needs n >= 2 points and positive half width")
    xs = np.linspace(-half_width, half_width, n)
    return xs, xs.copy()


def fidelity_map(alpha: float, beta: float, grid) -> FidelityMap:
    """``grid`` is a pair of 1-D outcome arrays ``(x8_values, x9_values)``."""
    _check_geometry(alpha, beta)
    x8, x9 = (np.asarray(g, dtype=float).reshape(-1) for g in grid)
    if x8.size == 0 or x9.size == 0:
        raise ValueError("empty grid")
    logs = log_branch_ratio(x8[:, None], x9[None, :], alpha, beta)
    # M1/M2 and M2/M1; overflow to inf is handled as the limit value 1
    with np.errstate(over="ignore"):
        sig = np.exp(logs)
        sig_o = np.exp(-logs)
    f = average_fidelity_vs_ratio(sig)
    fo = average_fidelity_vs_ratio(sig_o)
    meta = {
        "alpha": alpha,
        "beta": beta,
        "x8": [float(x8[0]), float(x8[-1]), int(x8.size)],
        "x9": [float(x9[0]), float(x9[-1]), int(x9.size)],
        "branch": "up-up",
    }
    return FidelityMap(alpha, beta, x8, x9, np.asarray(f), np.asarray(fo), meta)


# ---------------------------------------------------------------------------
# heralded failures


def failure_profile(beta: float, x_grid, normalized: bool = False) -> list[tuple[float, float]]:
    """Weight of the ambiguous outcome ``x8 = x9 = x`` at ``alpha = 3 beta``.

    The raw weight is
    ``e^{-b^2}[e^{-(x-3b)^2} + e^{-(x+3b)^2}] + e^{-9b^2}[e^{-(x-b)^2} + e^{-(x+b)^2}]``,
    known only up to a constant.  With ``normalized`` the weights are divided
    by their trapezoid integral over ``x_grid``.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    x = np.asarray(x_grid, dtype=float).reshape(-1)
    b = beta
    w = math.exp(-b * b) * (np.exp(-((x - 3 * b) ** 2)) + np.exp(-((x + 3 * b) ** 2))) + math.exp(-9 * b * b) * (
        np.exp(-((x - b) ** 2)) + np.exp(-((x + b) ** 2))
    )
    if normalized:
        if x.size < 2:
            raise ValueError("normalization needs at least two grid points")
        w = w / np.trapezoid(w, x)
    return [(float(a), float(v)) for a, v in zip(x, w)]
