"""Brute-force truncated-Fock representation used to cross-check the analytic
coherent-state calculus.

Nothing here calls into :mod:`hybridtele.gates` or :mod:`hybridtele.protocol`;
the only shared piece is the :class:`~hybridtele.states.HybridKet` container,
which :func:`embed` reads term by term.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import expm

from .errors import CutoffTooSmall, UnknownIndex, UnknownMode
from .states import HybridKet, coherent_overlap, inner_product

TRUNCATION_TOL = 1e-12
LEAKAGE_TOL = 1e-10


def required_cutoff(amp_max: float) -> int:
    """Cutoff ``ceil(|a|^2 + 10|a| + 20)``, a Poisson-tail bound for ``|a| <= amp_max``."""
    a = abs(amp_max)
    return int(math.ceil(a * a + 10 * a + 20))


@dataclass(frozen=True)
class FockVector:
    """Amplitudes over ``spin^(x)S (x) Fock^(x)M``; array axes follow the labels
    (spins first, then modes), each mode axis has ``cutoff + 1`` entries."""

    spin_labels: tuple
    mode_labels: tuple
    cutoff: int
    amps: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "spin_labels", tuple(self.spin_labels))
        object.__setattr__(self, "mode_labels", tuple(self.mode_labels))
        shape = (2,) * len(self.spin_labels) + (self.cutoff + 1,) * len(self.mode_labels)
        if self.amps.shape != shape:
            raise ValueError(f"amplitude array shape {self.amps.shape} != {shape}")

    def spin_axis(self, label) -> int:
        try:
            return self.spin_labels.index(label)
        except ValueError:
            raise UnknownIndex(f"spin {label!r} not present") from None

    def mode_axis(self, label) -> int:
        try:
            return len(self.spin_labels) + self.mode_labels.index(label)
        except ValueError:
            raise UnknownMode(f"mode {label!r} not present") from None

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def vdot(self, other: "FockVector") -> complex:
        return complex(np.vdot(self.amps, other.aligned_to(self).amps))

    def aligned_to(self, ref: "FockVector") -> "FockVector":
        if (self.spin_labels, self.mode_labels) == (ref.spin_labels, ref.mode_labels):
            return self
        if set(self.spin_labels) != set(ref.spin_labels) or set(self.mode_labels) != set(ref.mode_labels):
            raise UnknownIndex("Fock vectors carry different labels")
        perm = [self.spin_axis(l) for l in ref.spin_labels] + [self.mode_axis(l) for l in ref.mode_labels]
        return FockVector(ref.spin_labels, ref.mode_labels, self.cutoff, np.transpose(self.amps, perm))

    def relabel(self, spins=None, modes=None) -> "FockVector":
        spins, modes = dict(spins or {}), dict(modes or {})
        return FockVector(
            tuple(spins.get(l, l) for l in self.spin_labels),
            tuple(modes.get(l, l) for l in self.mode_labels),
            self.cutoff,
            self.amps,
        )


def _coherent_amplitudes(alpha: complex, cutoff: int) -> np.ndarray:
    alpha = complex(alpha)
    c = np.empty(cutoff + 1, dtype=complex)
    c[0] = math.exp(-0.5 * abs(alpha) ** 2)
    for n in range(1, cutoff + 1):
        c[n] = c[n - 1] * alpha / math.sqrt(n)
    tail = 1.0 - float(np.sum(np.abs(c) ** 2))
    if tail > TRUNCATION_TOL:
        raise CutoffTooSmall(
            f"cutoff {cutoff} leaves {tail:.2e} of |{alpha}> outside the basis; need >= {required_cutoff(abs(alpha))}"
        )
    return c


def coherent_vector(alpha: complex, cutoff: int, mode=0) -> FockVector:
    return FockVector((), (mode,), cutoff, _coherent_amplitudes(alpha, cutoff))


def spin_vector_fock(label, up: complex, down: complex, cutoff: int) -> FockVector:
    return FockVector((label,), (), cutoff, np.array([up, down], dtype=complex))


def fock_tensor(*vecs: FockVector) -> FockVector:
    out = vecs[0]
    for right in vecs[1:]:
        if right.cutoff != out.cutoff:
            raise ValueError("cutoff mismatch")
        prod = np.multiply.outer(out.amps, right.amps)
        ls, lm = len(out.spin_labels), len(out.mode_labels)
        rs, rm = len(right.spin_labels), len(right.mode_labels)
        perm = (
            list(range(ls))
            + list(range(ls + lm, ls + lm + rs))
            + list(range(ls, ls + lm))
            + list(range(ls + lm + rs, ls + lm + rs + rm))
        )
        out = FockVector(
            out.spin_labels + right.spin_labels,
            out.mode_labels + right.mode_labels,
            out.cutoff,
            np.transpose(prod, perm),
        )
    return out


def embed(ket: HybridKet, cutoff: int) -> FockVector:
    """Expand every coherent term of ``ket`` in the truncated Fock basis."""
    return sum_vectors([_embed_term(ket, t, cutoff) for t in ket.terms], ket, cutoff)


def sum_vectors(vecs, ket: HybridKet, cutoff: int) -> FockVector:
    shape = (2,) * len(ket.spin_labels) + (cutoff + 1,) * len(ket.mode_labels)
    total = np.zeros(shape, dtype=complex)
    for v in vecs:
        total += v.amps
    return FockVector(ket.spin_labels, ket.mode_labels, cutoff, total)


def _embed_term(ket: HybridKet, term, cutoff: int) -> FockVector:
    block = np.array(term.coeff, dtype=complex)
    for a in term.amps:
        block = np.multiply.outer(block, _coherent_amplitudes(a, cutoff))
    shape = (2,) * len(ket.spin_labels) + (cutoff + 1,) * len(ket.mode_labels)
    amps = np.zeros(shape, dtype=complex)
    amps[tuple(int(s) for s in term.spins)] = block
    return FockVector(ket.spin_labels, ket.mode_labels, cutoff, amps)


# ---------------------------------------------------------------------------
# gates in the Fock basis


@lru_cache(maxsize=8)
def _bs_blocks(cutoff: int):
    """Per-total-photon-number blocks of the real balanced beam splitter.

    Block ``n`` acts on ``|k, n-k>`` for the ``k`` allowed by the cutoff.  Built
    as ``(-1)^{n_j} exp[(pi/4)(a_i^dag a_j - a_j^dag a_i)]`` which maps coherent
    amplitudes ``(a, b) -> ((a+b)/sqrt2, (a-b)/sqrt2)``.
    """
    blocks = []
    for n in range(2 * cutoff + 1):
        ks = np.arange(max(0, n - cutoff), min(n, cutoff) + 1)
        dim = len(ks)
        gen = np.zeros((dim, dim))
        for idx in range(dim - 1):
            k = ks[idx]
            # a_i^dag a_j |k, n-k> = sqrt((k+1)(n-k)) |k+1, n-k-1>
            val = math.sqrt((k + 1) * (n - k))
            gen[idx + 1, idx] = val
            gen[idx, idx + 1] = -val
        u = expm((math.pi / 4) * gen)
        sign = (-1.0) ** (n - ks)
        blocks.append((ks, sign[:, None] * u))
    return tuple(blocks)


def apply_bs_fock(v: FockVector, i, j, strict: bool = True) -> FockVector:
    """Beam splitter on modes ``i`` and ``j`` of a Fock vector.

    With ``strict`` set, raises :class:`CutoffTooSmall` when more than
    ``1e-10`` of the squared norm sits in photon-number blocks the truncation
    cuts (total photons above the cutoff), where the map is not the true one.
    """
    ai, aj = v.mode_axis(i), v.mode_axis(j)
    x = np.moveaxis(v.amps, (ai, aj), (-2, -1))
    N = v.cutoff
    out = np.zeros_like(x)
    leak = 0.0
    for n, (ks, block) in enumerate(_bs_blocks(N)):
        sub = x[..., ks, n - ks]
        if n > N:
            leak += float(np.sum(np.abs(sub) ** 2))
        out[..., ks, n - ks] = sub @ block.T
    total = float(np.sum(np.abs(x) ** 2))
    if strict and total > 0 and leak / total > LEAKAGE_TOL:
        raise CutoffTooSmall(f"{leak / total:.2e} of the norm lies beyond cutoff {N} in the beam splitter")
    return FockVector(v.spin_labels, v.mode_labels, N, np.moveaxis(out, (-2, -1), (ai, aj)))


def apply_cp_fock(v: FockVector, spin, mode) -> FockVector:
    """Multiply spin-down components by ``(-1)^n`` on ``mode``."""
    sa, ma = v.spin_axis(spin), v.mode_axis(mode)
    amps = v.amps.copy()
    parity = (-1.0) ** np.arange(v.cutoff + 1)
    idx = [slice(None)] * amps.ndim
    idx[sa] = 1
    shape = [1] * (amps.ndim - 1)
    # after fixing the spin axis the mode axis index shifts down by one
    shape[ma - 1] = v.cutoff + 1
    amps[tuple(idx)] = amps[tuple(idx)] * parity.reshape(shape)
    return FockVector(v.spin_labels, v.mode_labels, v.cutoff, amps)


def apply_spin_fock(v: FockVector, spin, matrix) -> FockVector:
    sa = v.spin_axis(spin)
    m = np.asarray(matrix, dtype=complex)
    amps = np.moveaxis(np.tensordot(m, v.amps, axes=([1], [sa])), 0, sa)
    return FockVector(v.spin_labels, v.mode_labels, v.cutoff, amps)


# ---------------------------------------------------------------------------
# position-space readout


def hermite_functions(cutoff: int, x) -> np.ndarray:
    """``<x|n>`` for ``n = 0..cutoff``; shape ``(cutoff + 1, len(x))``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    h = np.zeros((cutoff + 1, x.size))
    h[0] = math.pi ** -0.25 * np.exp(-0.5 * x * x)
    if cutoff >= 1:
        h[1] = math.sqrt(2.0) * x * h[0]
    for n in range(1, cutoff):
        h[n + 1] = math.sqrt(2.0 / (n + 1)) * x * h[n] - math.sqrt(n / (n + 1)) * h[n - 1]
    return h


def position_density(v: FockVector, mode, x) -> np.ndarray:
    """Marginal position density of ``mode``; every other register is traced."""
    ma = v.mode_axis(mode)
    h = hermite_functions(v.cutoff, x)
    psi = np.tensordot(np.moveaxis(v.amps, ma, -1), h, axes=([-1], [0]))
    dens = np.sum(np.abs(psi) ** 2, axis=tuple(range(psi.ndim - 1)))
    return dens / v.norm() ** 2


# ---------------------------------------------------------------------------
# cross-checks


def cross_validate(ket: HybridKet, cutoff: int) -> float:
    """Worst absolute deviation between analytic and Fock-basis norms and
    pairwise term overlaps of ``ket``."""
    if not ket.terms:
        return 0.0
    per_term = [_embed_term(ket, t, cutoff) for t in ket.terms]
    mat = np.stack([v.amps.ravel() for v in per_term])
    gram_fock = np.conj(mat) @ mat.T
    full = mat.sum(axis=0)
    worst = abs(float(np.vdot(full, full).real) - inner_product(ket, ket).real)
    for i, ti in enumerate(ket.terms):
        for j, tj in enumerate(ket.terms):
            if ti.spins != tj.spins:
                analytic = 0j
            else:
                analytic = np.conj(ti.coeff) * tj.coeff
                for a, b in zip(ti.amps, tj.amps):
                    analytic *= coherent_overlap(a, b)
            worst = max(worst, abs(gram_fock[i, j] - analytic))
    return float(worst)


def max_deviation(ket: HybridKet, v: FockVector) -> float:
    """Largest amplitude difference between ``embed(ket)`` and ``v``."""
    e = embed(ket, v.cutoff)
    return float(np.max(np.abs(e.amps - v.aligned_to(e).amps)))


_H = np.array([[1, 1], [1, -1]]) / math.sqrt(2.0)


def evolve_protocol_fock(alpha: float, a: complex, b: complex, beta: float, cutoff: int) -> dict:
    """Run the noiseless pipeline entirely in the Fock basis.

    Returns the state after each stage: ``channel`` (spin 1, mode 4),
    ``after_bs`` (spin 1, modes 6, 7), ``after_cp`` (spins 1-3, modes 6, 7)
    and ``final`` (spins 1-3, modes 8, 9).
    """
    s = 1 / math.sqrt(2.0)
    channel = fock_tensor(spin_vector_fock(1, s, s, cutoff), coherent_vector(alpha, cutoff, mode=4))
    channel = apply_cp_fock(channel, 1, 4)

    inp = FockVector(
        (), (5,), cutoff, a * _coherent_amplitudes(beta, cutoff) + b * _coherent_amplitudes(-beta, cutoff)
    )
    inp = FockVector((), (5,), cutoff, inp.amps / inp.norm())

    joint = apply_bs_fock(fock_tensor(channel, inp), 4, 5).relabel(modes={4: 6, 5: 7})
    with_anc = fock_tensor(joint, spin_vector_fock(2, s, s, cutoff), spin_vector_fock(3, s, s, cutoff))
    after_cp = apply_cp_fock(apply_cp_fock(with_anc, 2, 6), 3, 7)
    final = apply_spin_fock(apply_spin_fock(after_cp, 2, _H), 3, _H).relabel(modes={6: 8, 7: 9})
    return {"channel": channel, "after_bs": joint, "after_cp": after_cp, "final": final}
