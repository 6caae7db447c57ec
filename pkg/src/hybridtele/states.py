"""Exact algebra over finite superpositions of spin registers tensored with
multimode coherent states.

A :class:`HybridKet` is a list of :class:`CoherentTerm` objects sharing one
registry (ordered spin labels and ordered mode labels).  Every term stores a
complex coefficient, one :class:`Spin` value per spin label and one complex
coherent amplitude per mode label, so ``|up>_1 |alpha>_4`` is a single term.
A :class:`HybridMixture` is a weighted sum of dyads ``|ket-term><bra-term|``
over the same kind of registry.

Quadrature convention: ``x = (a + a^dag)/sqrt(2)``, so ``|beta>`` has mean
position ``sqrt(2) Re(beta)`` and position variance 1/2.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import IntEnum
from functools import cached_property
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    RegistryCollision,
    RegistryMismatch,
    UnknownIndex,
    UnknownMode,
    ZeroNorm,
)

DEDUP_DECIMALS = 12
ZERO_NORM = 1e-14
# Dyads/terms whose merged weight falls below this are dropped.
DROP_TOL = 1e-15

SQRT2 = math.sqrt(2.0)
_PI_M14 = math.pi ** -0.25

STANDARD = "standard"
REDUCED = "reduced"
TRACE_CONVENTIONS = (STANDARD, REDUCED)

Label = Hashable


class Spin(IntEnum):
    UP = 0
    DOWN = 1

    def __str__(self):
        return self.name.lower()

    @classmethod
    def parse(cls, value) -> "Spin":
        if isinstance(value, Spin):
            return value
        if isinstance(value, str):
            return cls[value.upper()]
        return cls(int(value))


# ---------------------------------------------------------------------------
# single-mode primitives


def coherent_overlap(alpha: complex, beta: complex) -> complex:
    """Return ``<alpha|beta> = exp(-|alpha|^2/2 - |beta|^2/2 + conj(alpha) beta)``."""
    a = complex(alpha)
    b = complex(beta)
    return cmath.exp(-0.5 * (a.real**2 + a.imag**2) - 0.5 * (b.real**2 + b.imag**2) + a.conjugate() * b)


def trace_overlap(bra: complex, ket: complex, convention: str = REDUCED) -> complex:
    """Weight picked up by ``|ket><bra|`` when its mode is traced out.

    ``"standard"`` is the coherent overlap ``<bra|ket>``.  ``"reduced"``
    evaluates the overlap of the amplitudes scaled by ``1/sqrt(2)``; for real
    amplitudes it equals ``exp(-(ket - bra)^2 / 4)``, so ``|r>< -r|`` traces to
    ``exp(-r^2)`` rather than ``exp(-2 r^2)``.  Diagonal dyads give 1 either way.
    """
    if convention == STANDARD:
        return coherent_overlap(bra, ket)
    if convention == REDUCED:
        return coherent_overlap(complex(bra) / SQRT2, complex(ket) / SQRT2)
    raise ValueError(f"unknown trace convention {convention!r}; expected one of {TRACE_CONVENTIONS}")


def position_amplitude(beta: complex, x):
    """Position-space wavefunction ``<x|beta>``.

    Works elementwise on array ``x``; returns a Python complex for scalar input.
    """
    beta = complex(beta)
    q0 = SQRT2 * beta.real
    p0 = SQRT2 * beta.imag
    xs = np.asarray(x, dtype=float)
    val = _PI_M14 * np.exp(-0.5 * (xs - q0) ** 2 + 1j * p0 * xs - 0.5j * p0 * q0)
    if val.ndim == 0:
        return complex(val)
    return val


def _overlap_matrix(bras: np.ndarray, kets: np.ndarray, convention: str = STANDARD) -> np.ndarray:
    """Pairwise product over modes of single-mode overlaps.

    ``bras`` has shape (n, M), ``kets`` (m, M); result has shape (n, m).
    """
    if convention == REDUCED:
        bras = bras / SQRT2
        kets = kets / SQRT2
    elif convention != STANDARD:
        raise ValueError(f"unknown trace convention {convention!r}")
    if bras.shape[1] == 0:
        return np.ones((bras.shape[0], kets.shape[0]), dtype=complex)
    a = bras[:, None, :]
    b = kets[None, :, :]
    expo = -0.5 * np.abs(a) ** 2 - 0.5 * np.abs(b) ** 2 + np.conj(a) * b
    return np.exp(expo.sum(axis=2))


def _round_amp(z: complex) -> tuple[float, float]:
    # +0.0 normalises negative zero so that -0.0 and 0.0 share a key
    return (round(z.real, DEDUP_DECIMALS) + 0.0, round(z.imag, DEDUP_DECIMALS) + 0.0)


# ---------------------------------------------------------------------------
# terms and kets


@dataclass(frozen=True)
class CoherentTerm:
    """``coeff * |spins> (x) |amps>`` with spins/amps aligned to a registry."""

    coeff: complex
    spins: tuple[Spin, ...]
    amps: tuple[complex, ...]

    @property
    def key(self):
        return (tuple(int(s) for s in self.spins), tuple(_round_amp(a) for a in self.amps))

    def with_coeff(self, coeff: complex) -> "CoherentTerm":
        return CoherentTerm(complex(coeff), self.spins, self.amps)


def _check_labels(spin_labels, mode_labels):
    if len(set(spin_labels)) != len(spin_labels):
        raise RegistryCollision(f"duplicate spin labels {spin_labels}")
    if len(set(mode_labels)) != len(mode_labels):
        raise RegistryCollision(f"duplicate mode labels {mode_labels}")


def _check_term(term: CoherentTerm, n_spins: int, n_modes: int):
    if len(term.spins) != n_spins or len(term.amps) != n_modes:
        raise RegistryMismatch("term does not match the registry size")
    if not cmath.isfinite(term.coeff) or not all(cmath.isfinite(a) for a in term.amps):
        raise ValueError("non-finite coefficient or amplitude")


class _Registry:
    """Shared label lookup for kets and mixtures."""

    spin_labels: tuple
    mode_labels: tuple

    def spin_index(self, label) -> int:
        try:
            return self.spin_labels.index(label)
        except ValueError:
            raise UnknownIndex(f"spin {label!r} not in registry {self.spin_labels}") from None

    def mode_index(self, label) -> int:
        try:
            return self.mode_labels.index(label)
        except ValueError:
            raise UnknownMode(f"mode {label!r} not in registry {self.mode_labels}") from None

    def same_registry(self, other) -> bool:
        return set(self.spin_labels) == set(other.spin_labels) and set(self.mode_labels) == set(
            other.mode_labels
        )


@dataclass(frozen=True)
class HybridKet(_Registry):
    spin_labels: tuple
    mode_labels: tuple
    terms: tuple[CoherentTerm, ...]

    def __post_init__(self):
        object.__setattr__(self, "spin_labels", tuple(self.spin_labels))
        object.__setattr__(self, "mode_labels", tuple(self.mode_labels))
        object.__setattr__(self, "terms", tuple(self.terms))
        _check_labels(self.spin_labels, self.mode_labels)
        for t in self.terms:
            _check_term(t, len(self.spin_labels), len(self.mode_labels))

    def __len__(self):
        return len(self.terms)

    @cached_property
    def coeffs(self) -> np.ndarray:
        return np.array([t.coeff for t in self.terms], dtype=complex)

    @cached_property
    def spin_array(self) -> np.ndarray:
        return np.array([[int(s) for s in t.spins] for t in self.terms], dtype=np.int8).reshape(
            len(self.terms), len(self.spin_labels)
        )

    @cached_property
    def amp_array(self) -> np.ndarray:
        return np.array([t.amps for t in self.terms], dtype=complex).reshape(
            len(self.terms), len(self.mode_labels)
        )

    def __mul__(self, scalar) -> "HybridKet":
        c = complex(scalar)
        return HybridKet(self.spin_labels, self.mode_labels, [t.with_coeff(c * t.coeff) for t in self.terms])

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "HybridKet":
        return self * (1.0 / complex(scalar))

    def __add__(self, other: "HybridKet") -> "HybridKet":
        other = other.aligned(self.spin_labels, self.mode_labels)
        return HybridKet(self.spin_labels, self.mode_labels, self.terms + other.terms).simplify()

    def __neg__(self):
        return self * -1

    def __sub__(self, other):
        return self + (-other)

    def aligned(self, spin_labels: Sequence, mode_labels: Sequence) -> "HybridKet":
        """Return the same ket with its registry reordered to the given labels."""
        spin_labels, mode_labels = tuple(spin_labels), tuple(mode_labels)
        if (spin_labels, mode_labels) == (self.spin_labels, self.mode_labels):
            return self
        if set(spin_labels) != set(self.spin_labels) or set(mode_labels) != set(self.mode_labels):
            raise RegistryMismatch(
                f"registry {self.spin_labels}/{self.mode_labels} != {spin_labels}/{mode_labels}"
            )
        sp = [self.spin_labels.index(l) for l in spin_labels]
        mp = [self.mode_labels.index(l) for l in mode_labels]
        terms = [
            CoherentTerm(t.coeff, tuple(t.spins[i] for i in sp), tuple(t.amps[i] for i in mp))
            for t in self.terms
        ]
        return HybridKet(spin_labels, mode_labels, terms)

    def map_terms(
        self,
        fn: Callable[[CoherentTerm], Iterable[CoherentTerm]],
        spin_labels: Sequence | None = None,
        mode_labels: Sequence | None = None,
    ) -> "HybridKet":
        """Apply a linear term-to-terms map and merge duplicates."""
        spin_labels = self.spin_labels if spin_labels is None else spin_labels
        mode_labels = self.mode_labels if mode_labels is None else mode_labels
        out = [new for t in self.terms for new in fn(t)]
        return HybridKet(spin_labels, mode_labels, out).simplify()

    def simplify(self) -> "HybridKet":
        """Merge terms with equal spin configuration and (rounded) amplitudes."""
        merged: dict = {}
        for t in self.terms:
            k = t.key
            if k in merged:
                merged[k] = merged[k].with_coeff(merged[k].coeff + t.coeff)
            else:
                merged[k] = t
        terms = [t for t in merged.values() if abs(t.coeff) > DROP_TOL]
        return HybridKet(self.spin_labels, self.mode_labels, terms)

    def norm(self) -> float:
        return math.sqrt(max(inner_product(self, self).real, 0.0))

    def pretty(self, digits: int = 4) -> str:
        parts = []
        for t in self.terms:
            c = t.coeff
            cs = f"{c.real:.{digits}g}" if abs(c.imag) < 1e-15 else f"({c.real:.{digits}g}{c.imag:+.{digits}g}j)"
            spins = "".join(f"|{s}>_{l}" for s, l in zip(t.spins, self.spin_labels))
            modes = "".join(
                f"|{(a.real if abs(a.imag) < 1e-15 else a):.{digits}g}>_{l}"
                for a, l in zip(t.amps, self.mode_labels)
            )
            parts.append(f"{cs} {spins}{modes}")
        return " + ".join(parts) if parts else "0"


def from_terms(spin_labels, mode_labels, terms: Iterable) -> HybridKet:
    """Build a ket from ``(coeff, spins, amps)`` triples."""
    built = [
        CoherentTerm(complex(c), tuple(Spin.parse(s) for s in spins), tuple(complex(a) for a in amps))
        for c, spins, amps in terms
    ]
    return HybridKet(spin_labels, mode_labels, built).simplify()


def spin_ket(label, up: complex = 1.0, down: complex = 0.0) -> HybridKet:
    """``up |up> + down |down>`` on one spin register (not normalised)."""
    return from_terms((label,), (), [(up, (Spin.UP,), ()), (down, (Spin.DOWN,), ())])


def coherent_ket(label, alpha: complex) -> HybridKet:
    return from_terms((), (label,), [(1.0, (), (alpha,))])


def cat_ket(label, amplitude: complex, sign: int = +1) -> HybridKet:
    """Unnormalised cat ``|amp> + sign |-amp>``."""
    return from_terms((), (label,), [(1.0, (), (amplitude,)), (sign, (), (-complex(amplitude),))])


# ---------------------------------------------------------------------------
# ket operations


def inner_product(bra: HybridKet, ket: HybridKet) -> complex:
    """``<bra|ket>``; antilinear in ``bra``."""
    if not bra.same_registry(ket):
        raise RegistryMismatch(
            f"registries differ: {bra.spin_labels}/{bra.mode_labels} vs {ket.spin_labels}/{ket.mode_labels}"
        )
    ket = ket.aligned(bra.spin_labels, bra.mode_labels)
    if not bra.terms or not ket.terms:
        return 0j
    spin_eq = np.all(bra.spin_array[:, None, :] == ket.spin_array[None, :, :], axis=2)
    ov = _overlap_matrix(bra.amp_array, ket.amp_array)
    return complex(np.conj(bra.coeffs) @ (spin_eq * ov) @ ket.coeffs)


def norm(ket: HybridKet) -> float:
    return ket.norm()


def normalize(ket: HybridKet) -> HybridKet:
    n = ket.norm()
    if n < ZERO_NORM:
        raise ZeroNorm(f"norm {n:.3e} below {ZERO_NORM:g}")
    return ket / n


def tensor(*states: HybridKet) -> HybridKet:
    """Tensor product of kets with disjoint registries."""
    if not states:
        raise ValueError("tensor() needs at least one ket")
    out = states[0]
    for right in states[1:]:
        out = _tensor2(out, right)
    return out


def _tensor2(left: HybridKet, right: HybridKet) -> HybridKet:
    shared = (set(left.spin_labels) & set(right.spin_labels)) | (set(left.mode_labels) & set(right.mode_labels))
    if shared:
        raise RegistryCollision(f"labels {sorted(map(str, shared))} appear on both sides")
    terms = [
        CoherentTerm(a.coeff * b.coeff, a.spins + b.spins, a.amps + b.amps) for a in left.terms for b in right.terms
    ]
    return HybridKet(left.spin_labels + right.spin_labels, left.mode_labels + right.mode_labels, terms).simplify()


def relabel(state, spins: Mapping | None = None, modes: Mapping | None = None):
    """Rename spin and/or mode labels of a ket or mixture."""
    spins = dict(spins or {})
    modes = dict(modes or {})
    for old in spins:
        state.spin_index(old)
    for old in modes:
        state.mode_index(old)
    new_spins = tuple(spins.get(l, l) for l in state.spin_labels)
    new_modes = tuple(modes.get(l, l) for l in state.mode_labels)
    if isinstance(state, HybridKet):
        return HybridKet(new_spins, new_modes, state.terms)
    return HybridMixture(new_spins, new_modes, state.dyads)


def _drop(seq, idx):
    return tuple(v for i, v in enumerate(seq) if i not in idx)


def project_spins(state, outcomes: Mapping):
    """Apply ``<outcome|`` on the named spins, removing them from the registry.

    Works on kets (amplitude projection) and mixtures (``P rho P``).  The
    result is not renormalised.
    """
    idx = {state.spin_index(l): Spin.parse(v) for l, v in outcomes.items()}
    spin_labels = _drop(state.spin_labels, idx)

    def keep(term):
        return all(term.spins[i] == v for i, v in idx.items())

    def strip(term):
        return CoherentTerm(term.coeff, _drop(term.spins, idx), term.amps)

    if isinstance(state, HybridKet):
        return HybridKet(spin_labels, state.mode_labels, [strip(t) for t in state.terms if keep(t)]).simplify()
    dyads = [Dyad(d.weight, strip(d.ket), strip(d.bra)) for d in state.dyads if keep(d.ket) and keep(d.bra)]
    return HybridMixture(spin_labels, state.mode_labels, dyads).simplify()


def project_position(state, mode, x: float):
    """Apply ``<x|`` on ``mode`` (a homodyne collapse), removing the mode."""
    m = state.mode_index(mode)
    mode_labels = _drop(state.mode_labels, {m})

    def strip(term, factor):
        return CoherentTerm(term.coeff * factor, term.spins, _drop(term.amps, {m}))

    if isinstance(state, HybridKet):
        terms = [strip(t, position_amplitude(t.amps[m], x)) for t in state.terms]
        return HybridKet(state.spin_labels, mode_labels, terms).simplify()
    dyads = [
        Dyad(
            d.weight * position_amplitude(d.ket.amps[m], x) * np.conj(position_amplitude(d.bra.amps[m], x)),
            strip(d.ket, 1.0),
            strip(d.bra, 1.0),
        )
        for d in state.dyads
    ]
    return HybridMixture(state.spin_labels, mode_labels, dyads).simplify()


def project_coherent(state, mode, gamma: complex):
    """Apply ``<gamma|`` on ``mode`` (exact, non-orthogonal projection)."""
    m = state.mode_index(mode)
    mode_labels = _drop(state.mode_labels, {m})

    def strip(term, factor):
        return CoherentTerm(term.coeff * factor, term.spins, _drop(term.amps, {m}))

    if isinstance(state, HybridKet):
        terms = [strip(t, coherent_overlap(gamma, t.amps[m])) for t in state.terms]
        return HybridKet(state.spin_labels, mode_labels, terms).simplify()
    dyads = [
        Dyad(
            d.weight * coherent_overlap(gamma, d.ket.amps[m]) * coherent_overlap(d.bra.amps[m], gamma),
            strip(d.ket, 1.0),
            strip(d.bra, 1.0),
        )
        for d in state.dyads
    ]
    return HybridMixture(state.spin_labels, mode_labels, dyads).simplify()


def select_amplitudes(state, targets: Mapping, atol: float = 1e-9):
    """Orthogonal-limit projection: keep only terms whose amplitude on each
    named mode equals the target, then drop those modes.

    This is the ``|Gamma><Gamma|`` projection when all coherent components on
    that mode are treated as mutually orthogonal.
    """
    idx = {state.mode_index(l): complex(v) for l, v in targets.items()}
    mode_labels = _drop(state.mode_labels, idx)

    def keep(term):
        return all(abs(term.amps[i] - v) <= atol for i, v in idx.items())

    def strip(term):
        return CoherentTerm(term.coeff, term.spins, _drop(term.amps, idx))

    if isinstance(state, HybridKet):
        return HybridKet(state.spin_labels, mode_labels, [strip(t) for t in state.terms if keep(t)]).simplify()
    dyads = [Dyad(d.weight, strip(d.ket), strip(d.bra)) for d in state.dyads if keep(d.ket) and keep(d.bra)]
    return HybridMixture(state.spin_labels, mode_labels, dyads).simplify()


def spin_vector(ket: HybridKet) -> np.ndarray:
    """Amplitudes ``(c_up, c_down)`` of a ket on one spin and no modes."""
    if len(ket.spin_labels) != 1 or ket.mode_labels:
        raise RegistryMismatch("spin_vector needs exactly one spin and no modes")
    vec = np.zeros(2, dtype=complex)
    for t in ket.terms:
        vec[int(t.spins[0])] += t.coeff
    return vec


# ---------------------------------------------------------------------------
# mixtures


@dataclass(frozen=True)
class Dyad:
    """``weight * |ket><bra|``; term coefficients are folded into ``weight``."""

    weight: complex
    ket: CoherentTerm
    bra: CoherentTerm

    @property
    def key(self):
        return (self.ket.key, self.bra.key)


@dataclass(frozen=True)
class HybridMixture(_Registry):
    spin_labels: tuple
    mode_labels: tuple
    dyads: tuple[Dyad, ...]

    def __post_init__(self):
        object.__setattr__(self, "spin_labels", tuple(self.spin_labels))
        object.__setattr__(self, "mode_labels", tuple(self.mode_labels))
        dyads = []
        for d in self.dyads:
            w = complex(d.weight) * d.ket.coeff * np.conj(d.bra.coeff)
            dyads.append(Dyad(w, d.ket.with_coeff(1.0), d.bra.with_coeff(1.0)))
        object.__setattr__(self, "dyads", tuple(dyads))
        _check_labels(self.spin_labels, self.mode_labels)
        for d in self.dyads:
            _check_term(d.ket, len(self.spin_labels), len(self.mode_labels))
            _check_term(d.bra, len(self.spin_labels), len(self.mode_labels))
            if not cmath.isfinite(d.weight):
                raise ValueError("non-finite dyad weight")

    def __len__(self):
        return len(self.dyads)

    @classmethod
    def from_ket(cls, ket: HybridKet) -> "HybridMixture":
        dyads = [Dyad(1.0, k, b) for k in ket.terms for b in ket.terms]
        return cls(ket.spin_labels, ket.mode_labels, dyads)

    @cached_property
    def _arrays(self):
        n, S, M = len(self.dyads), len(self.spin_labels), len(self.mode_labels)
        w = np.array([d.weight for d in self.dyads], dtype=complex)
        ks = np.array([[int(s) for s in d.ket.spins] for d in self.dyads], dtype=np.int8).reshape(n, S)
        bs = np.array([[int(s) for s in d.bra.spins] for d in self.dyads], dtype=np.int8).reshape(n, S)
        ka = np.array([d.ket.amps for d in self.dyads], dtype=complex).reshape(n, M)
        ba = np.array([d.bra.amps for d in self.dyads], dtype=complex).reshape(n, M)
        return w, ks, bs, ka, ba

    def trace(self) -> complex:
        if not self.dyads:
            return 0j
        w, ks, bs, ka, ba = self._arrays
        same = np.all(ks == bs, axis=1)
        if ka.shape[1]:
            ov = np.exp((-0.5 * np.abs(ba) ** 2 - 0.5 * np.abs(ka) ** 2 + np.conj(ba) * ka).sum(axis=1))
        else:
            ov = np.ones(len(w))
        return complex(np.sum(w * same * ov))

    def normalized(self) -> "HybridMixture":
        tr = self.trace()
        if abs(tr) < ZERO_NORM:
            raise ZeroNorm(f"trace {abs(tr):.3e} below {ZERO_NORM:g}")
        return self.scaled(1.0 / tr.real)

    def scaled(self, c: complex) -> "HybridMixture":
        return HybridMixture(self.spin_labels, self.mode_labels, [Dyad(d.weight * c, d.ket, d.bra) for d in self.dyads])

    def __add__(self, other: "HybridMixture") -> "HybridMixture":
        if (other.spin_labels, other.mode_labels) != (self.spin_labels, self.mode_labels):
            raise RegistryMismatch("mixtures must share an identically ordered registry")
        return HybridMixture(self.spin_labels, self.mode_labels, self.dyads + other.dyads).simplify()

    def adjoint(self) -> "HybridMixture":
        return HybridMixture(
            self.spin_labels, self.mode_labels, [Dyad(np.conj(d.weight), d.bra, d.ket) for d in self.dyads]
        )

    def simplify(self) -> "HybridMixture":
        merged: dict = {}
        for d in self.dyads:
            k = d.key
            if k in merged:
                merged[k] = Dyad(merged[k].weight + d.weight, merged[k].ket, merged[k].bra)
            else:
                merged[k] = d
        dyads = [d for d in merged.values() if abs(d.weight) > DROP_TOL]
        return HybridMixture(self.spin_labels, self.mode_labels, dyads)

    def is_hermitian(self, tol: float = 1e-10) -> bool:
        table = {d.key: d.weight for d in self.simplify().dyads}
        for (kk, bk), w in table.items():
            partner = table.get((bk, kk), 0j)
            if abs(partner - np.conj(w)) > tol:
                return False
        return True

    def map_terms(
        self,
        fn: Callable[[CoherentTerm], Iterable[CoherentTerm]],
        spin_labels: Sequence | None = None,
        mode_labels: Sequence | None = None,
    ) -> "HybridMixture":
        """Conjugate by the linear map ``fn``: ``|k><b| -> fn(k) fn(b)^dag``."""
        spin_labels = self.spin_labels if spin_labels is None else spin_labels
        mode_labels = self.mode_labels if mode_labels is None else mode_labels
        cache: dict = {}

        def image(term):
            k = term.key
            if k not in cache:
                cache[k] = list(fn(term))
            return cache[k]

        out = []
        for d in self.dyads:
            for k in image(d.ket):
                for b in image(d.bra):
                    out.append(Dyad(d.weight * k.coeff * np.conj(b.coeff), k.with_coeff(1.0), b.with_coeff(1.0)))
        return HybridMixture(spin_labels, mode_labels, out).simplify()


def tensor_mixture(*states) -> HybridMixture:
    """Tensor product of mixtures and/or kets (kets become pure mixtures)."""
    mixes = [s if isinstance(s, HybridMixture) else HybridMixture.from_ket(s) for s in states]
    out = mixes[0]
    for right in mixes[1:]:
        shared = (set(out.spin_labels) & set(right.spin_labels)) | (set(out.mode_labels) & set(right.mode_labels))
        if shared:
            raise RegistryCollision(f"labels {sorted(map(str, shared))} appear on both sides")
        dyads = [
            Dyad(
                a.weight * b.weight,
                CoherentTerm(1.0, a.ket.spins + b.ket.spins, a.ket.amps + b.ket.amps),
                CoherentTerm(1.0, a.bra.spins + b.bra.spins, a.bra.amps + b.bra.amps),
            )
            for a in out.dyads
            for b in right.dyads
        ]
        out = HybridMixture(out.spin_labels + right.spin_labels, out.mode_labels + right.mode_labels, dyads)
    return out.simplify()


def partial_trace_mode(mix, mode, convention: str = REDUCED) -> HybridMixture:
    """Trace out one optical mode.

    Each dyad's weight is multiplied by :func:`trace_overlap` of its bra and
    ket amplitudes on ``mode``.  The default ``"reduced"`` convention gives
    ``|r><-r| -> exp(-r^2)``; pass ``convention="standard"`` for the plain
    coherent-state overlap ``exp(-2 r^2)``.
    """
    if isinstance(mix, HybridKet):
        mix = HybridMixture.from_ket(mix)
    m = mix.mode_index(mode)
    mode_labels = _drop(mix.mode_labels, {m})
    dyads = [
        Dyad(
            d.weight * trace_overlap(d.bra.amps[m], d.ket.amps[m], convention),
            CoherentTerm(1.0, d.ket.spins, _drop(d.ket.amps, {m})),
            CoherentTerm(1.0, d.bra.spins, _drop(d.bra.amps, {m})),
        )
        for d in mix.dyads
    ]
    return HybridMixture(mix.spin_labels, mode_labels, dyads).simplify()


def spin_density(state, convention: str = STANDARD) -> np.ndarray:
    """Reduced density matrix of the remaining spins after tracing every mode.

    Basis order is lexicographic in the registry's spin order with
    ``up`` (0) before ``down`` (1).  Not renormalised.
    """
    mix = state if isinstance(state, HybridMixture) else HybridMixture.from_ket(state)
    for label in list(mix.mode_labels):
        mix = partial_trace_mode(mix, label, convention)
    n = len(mix.spin_labels)
    rho = np.zeros((2**n, 2**n), dtype=complex)
    for d in mix.dyads:
        i = int("".join(str(int(s)) for s in d.ket.spins) or "0", 2)
        j = int("".join(str(int(s)) for s in d.bra.spins) or "0", 2)
        rho[i, j] += d.weight
    return rho
