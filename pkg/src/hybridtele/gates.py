"""Unitaries acting on :class:`~hybridtele.states.HybridKet` and
:class:`~hybridtele.states.HybridMixture` values.

Every gate is a term-to-terms map, so the same function handles kets and
mixtures (``rho -> U rho U^dag``).
"""

from __future__ import annotations

import math
from enum import Enum

import numpy as np

from .errors import SameMode
from .states import CoherentTerm, Spin

_S = 1.0 / math.sqrt(2.0)


def apply_cp(state, spin, mode):
    """Controlled phase: the coherent amplitude on ``mode`` flips sign when
    ``spin`` is down and is left alone when it is up."""
    s = state.spin_index(spin)
    m = state.mode_index(mode)

    def fn(t: CoherentTerm):
        if t.spins[s] == Spin.DOWN:
            amps = list(t.amps)
            amps[m] = -amps[m]
            return [CoherentTerm(t.coeff, t.spins, tuple(amps))]
        return [t]

    return state.map_terms(fn)


def apply_beamsplitter(state, i, j):
    """Balanced real beam splitter ``(a_i, a_j) -> ((a_i + a_j)/sqrt2, (a_i - a_j)/sqrt2)``.

    Output amplitudes keep the labels ``i`` and ``j``.
    """
    if i == j:
        raise SameMode(f"beam splitter needs two distinct modes, got {i!r} twice")
    mi = state.mode_index(i)
    mj = state.mode_index(j)

    def fn(t: CoherentTerm):
        amps = list(t.amps)
        ai, aj = amps[mi], amps[mj]
        amps[mi] = (ai + aj) * _S
        amps[mj] = (ai - aj) * _S
        return [CoherentTerm(t.coeff, t.spins, tuple(amps))]

    return state.map_terms(fn)


def apply_spin_matrix(state, spin, matrix):
    """Apply a 2x2 matrix (basis order up, down) to one spin register."""
    s = state.spin_index(spin)
    mat = np.asarray(matrix, dtype=complex)
    if mat.shape != (2, 2):
        raise ValueError("spin matrix must be 2x2")

    def fn(t: CoherentTerm):
        col = int(t.spins[s])
        out = []
        for row in (Spin.UP, Spin.DOWN):
            c = mat[int(row), col]
            if c != 0:
                spins = list(t.spins)
                spins[s] = row
                out.append(CoherentTerm(t.coeff * c, tuple(spins), t.amps))
        return out

    return state.map_terms(fn)


MW_PI2 = np.array([[_S, _S], [_S, -_S]])


def apply_mw_pi2(state, spin):
    """Microwave pi/2 pulse: up -> (up + down)/sqrt2, down -> (up - down)/sqrt2."""
    return apply_spin_matrix(state, spin, MW_PI2)


class CorrectionOp(Enum):
    IDENTITY = "identity"
    PHASE_FLIP = "phase_flip"
    BIT_FLIP = "bit_flip"
    BIT_PHASE_FLIP = "bit_phase_flip"

    @property
    def matrix(self) -> np.ndarray:
        return _CORRECTIONS[self].copy()

    def __str__(self):
        return self.value


_CORRECTIONS = {
    CorrectionOp.IDENTITY: np.array([[1, 0], [0, 1]], dtype=complex),
    CorrectionOp.PHASE_FLIP: np.array([[1, 0], [0, -1]], dtype=complex),
    CorrectionOp.BIT_FLIP: np.array([[0, 1], [1, 0]], dtype=complex),
    # squares to -1, so it is self-inverse only up to a global phase
    CorrectionOp.BIT_PHASE_FLIP: np.array([[0, 1], [-1, 0]], dtype=complex),
}


def apply_correction(state, op: CorrectionOp, spin=1):
    return apply_spin_matrix(state, spin, CorrectionOp(op).matrix)
