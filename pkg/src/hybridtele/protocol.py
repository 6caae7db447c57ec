"""End-to-end teleportation of a coherent-state qubit onto a remote spin.

Register layout: spin 1 is the receiving spin, spins 2 and 3 are the
ancillas.  Mode 4 carries the distributed channel light, mode 5 the input
qumode; after the beam splitter they become modes 6 and 7, and after the
ancilla reflections modes 8 and 9, which are read out by homodyne detection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import DegenerateGeometry, FailedTrial, InvalidCombination, ZeroNorm
from .gates import CorrectionOp, apply_beamsplitter, apply_correction, apply_cp, apply_mw_pi2
from .metrics import fidelity
from .states import (
    SQRT2,
    HybridKet,
    HybridMixture,
    Spin,
    _overlap_matrix,
    coherent_ket,
    from_terms,
    inner_product,
    normalize,
    position_amplitude,
    project_position,
    project_spins,
    relabel,
    spin_ket,
    spin_vector,
    tensor,
    tensor_mixture,
)

GRID_POINTS = 2**14
GRID_PAD = 8.0
NORM_TOL = 1e-12
_S = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class InputQubit:
    """Logical qubit ``a|0_L> + b|1_L>`` encoded as ``a|beta> + b|-beta>``."""

    a: complex
    b: complex
    beta: float

    def __post_init__(self):
        object.__setattr__(self, "a", complex(self.a))
        object.__setattr__(self, "b", complex(self.b))
        n2 = abs(self.a) ** 2 + abs(self.b) ** 2
        if abs(n2 - 1.0) > NORM_TOL:
            raise ValueError(f"|a|^2 + |b|^2 = {n2:.15g}, expected 1")
        if not self.beta >= 0:
            raise ValueError("beta must be non-negative")

    @classmethod
    def from_bloch(cls, theta: float, phi: float, beta: float) -> "InputQubit":
        return cls(math.cos(theta / 2), math.sin(theta / 2) * complex(math.cos(phi), math.sin(phi)), beta)

    @classmethod
    def random(cls, rng: np.random.Generator, beta: float) -> "InputQubit":
        """Haar-random qubit drawn from ``rng``."""
        z = rng.normal(size=2) + 1j * rng.normal(size=2)
        z /= np.linalg.norm(z)
        return cls(z[0], z[1], beta)

    @property
    def target(self) -> np.ndarray:
        return np.array([self.a, self.b], dtype=complex)


class PeakClass(Enum):
    UPSILON = "Upsilon"
    XI = "Xi"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class MeasurementOutcome:
    spin2: Spin
    spin3: Spin
    x8: float
    x9: float
    classification8: PeakClass
    classification9: PeakClass


@dataclass(frozen=True)
class TeleportationRecord:
    """One trial.  ``correction`` is ``None`` for a heralded failure, in which
    case ``fidelity`` refers to the uncorrected spin state."""

    outcome: MeasurementOutcome
    correction: CorrectionOp | None
    final_state: HybridKet
    fidelity: float
    seed: int | None = None
    trial: int | None = None

    @property
    def accepted(self) -> bool:
        return self.correction is not None

    def to_json_dict(self) -> dict:
        o = self.outcome
        return {
            "seed": self.seed,
            "trial": self.trial,
            "spin2": str(o.spin2),
            "spin3": str(o.spin3),
            "x8": o.x8,
            "x9": o.x9,
            "class8": str(o.classification8),
            "class9": str(o.classification9),
            "correction": str(self.correction) if self.correction is not None else "none",
            "fidelity": self.fidelity,
        }


# ---------------------------------------------------------------------------
# state preparation and evolution


def _plus_spin(label) -> HybridKet:
    return spin_ket(label, _S, _S)


def build_channel(alpha: float) -> HybridKet:
    """Spin 1 entangled with mode 4: ``(|up>|alpha> + |down>|-alpha>)/sqrt2``."""
    if not alpha >= 0:
        raise ValueError("alpha must be non-negative")
    state = apply_cp(tensor(_plus_spin(1), coherent_ket(0, alpha)), 1, 0)
    return relabel(state, modes={0: 4})


def prepare_input(q: InputQubit) -> HybridKet:
    """Normalized ``a|beta> + b|-beta>`` on mode 5."""
    ket = from_terms((), (5,), [(q.a, (), (q.beta,)), (q.b, (), (-q.beta,))])
    return normalize(ket)


def _tensor(*parts):
    if any(isinstance(p, HybridMixture) for p in parts):
        return tensor_mixture(*parts)
    return tensor(*parts)


def evolve_stages(channel, input_state) -> dict:
    """Intermediate states of the pipeline (kets or mixtures).

    Keys: ``after_bs`` (modes 6, 7), ``after_cp`` (ancillas added, both
    reflections done) and ``final`` (MW pulses, modes 8, 9).
    """
    joint = _tensor(channel, input_state)
    after_bs = relabel(apply_beamsplitter(joint, 4, 5), modes={4: 6, 5: 7})
    with_anc = _tensor(after_bs, _plus_spin(2), _plus_spin(3))
    after_cp = apply_cp(apply_cp(with_anc, 2, 6), 3, 7)
    final = relabel(apply_mw_pi2(apply_mw_pi2(after_cp, 2), 3), modes={6: 8, 7: 9})
    return {"after_bs": after_bs, "after_cp": after_cp, "final": final}


def evolve_to_final(channel, input_state):
    return evolve_stages(channel, input_state)["final"]


# ---------------------------------------------------------------------------
# measurements

SECTORS = ((Spin.UP, Spin.UP), (Spin.UP, Spin.DOWN), (Spin.DOWN, Spin.UP), (Spin.DOWN, Spin.DOWN))


def spin_sector_probabilities(ket: HybridKet) -> dict:
    total = inner_product(ket, ket).real
    return {s: inner_product(p, p).real / total for s, p in ((s, project_spins(ket, {2: s[0], 3: s[1]})) for s in SECTORS)}


def measure_spins(ket: HybridKet, rng: np.random.Generator):
    """Born-rule readout of ancillas 2 and 3.

    Returns ``(spin2, spin3, collapsed, probability)``; ``collapsed`` is the
    renormalized remainder with spins 2 and 3 removed.
    """
    total = inner_product(ket, ket).real
    branches = [project_spins(ket, {2: s2, 3: s3}) for s2, s3 in SECTORS]
    probs = np.array([inner_product(b, b).real for b in branches]) / total
    k = int(np.searchsorted(np.cumsum(probs), rng.random() * probs.sum(), side="right"))
    k = min(k, 3)
    if probs[k] <= 0:
        raise ZeroNorm("drew a spin sector with zero probability")
    s2, s3 = SECTORS[k]
    return s2, s3, normalize(branches[k]), float(probs[k])


class HomodyneDensity:
    """Exact position marginal of one mode, interference terms included.

    ``p(x) = sum_ij conj(c_i) c_j <rest_i|rest_j> conj(<x|a_i>) <x|a_j> / <psi|psi>``
    where ``rest`` collects the spin values and the other modes' amplitudes.
    """

    def __init__(self, ket: HybridKet, mode):
        m = ket.mode_index(mode)
        self.mode = mode
        amps = ket.amp_array
        others = np.delete(amps, m, axis=1)
        c = ket.coeffs
        same_spins = np.all(ket.spin_array[:, None, :] == ket.spin_array[None, :, :], axis=2)
        self._gram = np.conj(c)[:, None] * c[None, :] * same_spins * _overlap_matrix(others, others)
        self._amps = amps[:, m]
        self._norm2 = inner_product(ket, ket).real
        if self._norm2 <= 0:
            raise ZeroNorm("state has zero norm")

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        phi = np.stack([position_amplitude(a, x) for a in self._amps]) if len(self._amps) else np.zeros((0, x.size))
        dens = np.einsum("ix,ix->x", np.conj(phi), self._gram @ phi).real / self._norm2
        return np.clip(dens, 0.0, None)

    def grid(self, n: int = GRID_POINTS, pad: float = GRID_PAD) -> np.ndarray:
        """Sampling grid ``[-R, R]`` with ``R = max sqrt2|Re a| + pad``."""
        reach = float(np.max(SQRT2 * np.abs(self._amps.real))) if len(self._amps) else 0.0
        return np.linspace(-(reach + pad), reach + pad, n)

    def sample(self, rng: np.random.Generator, size=None, n: int = GRID_POINTS):
        """Inverse-CDF draws on :meth:`grid`."""
        xs = self.grid(n)
        cdf = cumulative_trapezoid(self(xs), xs, initial=0.0)
        cdf /= cdf[-1]
        u = rng.random(size)
        return np.interp(u, cdf, xs)


def homodyne_density(ket: HybridKet, mode) -> HomodyneDensity:
    return HomodyneDensity(ket, mode)


def sample_homodyne(ket: HybridKet, mode, rng: np.random.Generator):
    """Draw a position outcome on ``mode`` and collapse the ket onto it.

    Returns ``(x, collapsed)``; the measured mode is removed from the registry.
    """
    x = float(HomodyneDensity(ket, mode).sample(rng))
    return x, normalize(project_position(ket, mode, x))


def classify_peak(x: float, alpha: float, beta: float) -> PeakClass:
    """Upsilon peaks sit at ``+/-(alpha+beta)``, Xi peaks at ``+/-(alpha-beta)``;
    the boundary ``|x| = alpha`` goes to Xi."""
    if alpha == beta:
        raise DegenerateGeometry("alpha == beta: Xi peaks coincide at the origin")
    if not alpha > beta >= 0:
        raise ValueError(f"need alpha > beta >= 0, got alpha={alpha}, beta={beta}")
    return PeakClass.XI if abs(x) <= alpha else PeakClass.UPSILON


def select_correction(spin2, spin3, class8, class9) -> CorrectionOp:
    """Correction on spin 1 for a spin-readout / homodyne-class pattern."""
    s2, s3 = Spin.parse(spin2), Spin.parse(spin3)
    c8, c9 = PeakClass(class8), PeakClass(class9)
    if c8 == c9:
        raise InvalidCombination(f"both modes classified {c8}")
    same = s2 == s3
    if c8 == PeakClass.UPSILON:
        return CorrectionOp.IDENTITY if same else CorrectionOp.PHASE_FLIP
    return CorrectionOp.BIT_FLIP if same else CorrectionOp.BIT_PHASE_FLIP


# ---------------------------------------------------------------------------
# trials


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent stream for ``trial`` under root ``seed`` (counter split)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(trial,)))


def run_teleportation(alpha: float, q: InputQubit, rng, seed: int | None = None, trial: int | None = None):
    """One full trial.  Raises :class:`FailedTrial` (carrying the record) when
    both homodyne outcomes fall in the same class."""
    if not isinstance(rng, np.random.Generator):
        seed = int(rng) if seed is None else seed
        rng = np.random.default_rng(rng)
    final = evolve_to_final(build_channel(alpha), prepare_input(q))
    s2, s3, ket, _ = measure_spins(final, rng)
    x8, ket = sample_homodyne(ket, 8, rng)
    x9, ket = sample_homodyne(ket, 9, rng)
    c8, c9 = classify_peak(x8, alpha, q.beta), classify_peak(x9, alpha, q.beta)
    outcome = MeasurementOutcome(s2, s3, x8, x9, c8, c9)
    try:
        op = select_correction(s2, s3, c8, c9)
    except InvalidCombination as exc:
        record = TeleportationRecord(outcome, None, ket, fidelity(spin_vector(ket), q.target), seed, trial)
        raise FailedTrial(str(exc), record) from exc
    ket = normalize(apply_correction(ket, op, 1))
    return TeleportationRecord(outcome, op, ket, fidelity(spin_vector(ket), q.target), seed, trial)


def run_experiment(alpha: float, beta: float, n_trials: int, seed: int) -> list[TeleportationRecord]:
    """Seeded batch over Haar-random inputs; failures are kept as records."""
    records = []
    for k in range(n_trials):
        rng = trial_rng(seed, k)
        q = InputQubit.random(rng, beta)
        try:
            records.append(run_teleportation(alpha, q, rng, seed=seed, trial=k))
        except FailedTrial as exc:
            records.append(exc.record)
    return records


def summarize(records) -> dict:
    n = len(records)
    acc = [r.fidelity for r in records if r.accepted]
    mean = float(np.mean(acc)) if acc else float("nan")
    stderr = float(np.std(acc, ddof=1) / math.sqrt(len(acc))) if len(acc) > 1 else float("nan")
    return {
        "n_trials": n,
        "n_accepted": len(acc),
        "herald_rate": (n - len(acc)) / n if n else float("nan"),
        "mean_fidelity": mean,
        "stderr": stderr,
        "mean_fidelity_all": float(np.mean([r.fidelity for r in records])) if n else float("nan"),
    }
