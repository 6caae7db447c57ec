import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridtele.errors import SameMode, UnknownIndex, UnknownMode
from hybridtele.gates import (
    MW_PI2,
    CorrectionOp,
    apply_beamsplitter,
    apply_correction,
    apply_cp,
    apply_mw_pi2,
)
from hybridtele.states import (
    HybridMixture,
    Spin,
    coherent_ket,
    from_terms,
    inner_product,
    spin_ket,
    spin_vector,
    tensor,
)

from test_states import kets

S = 1 / math.sqrt(2)


def _as_set(ket, nd=12):
    return {(tuple(t.spins), tuple(round(complex(a).real, nd) for a in t.amps), round(complex(t.coeff).real, nd)) for t in ket.terms}


GATES = [
    lambda k: apply_cp(k, 1, 4),
    lambda k: apply_cp(k, 2, 5),
    lambda k: apply_beamsplitter(k, 4, 5),
    lambda k: apply_mw_pi2(k, 1),
    lambda k: apply_mw_pi2(k, 2),
] + [lambda k, op=op: apply_correction(k, op, 1) for op in CorrectionOp]


@settings(max_examples=40, deadline=None)
@given(kets(), kets(), st.integers(0, len(GATES) - 1))
def test_gates_preserve_inner_products(x, y, g):
    gate = GATES[g]
    before = inner_product(x, y)
    after = inner_product(gate(x), gate(y))
    assert abs(after - before) < 1e-10 * (1 + abs(before))


def test_cp_up_unchanged():
    k = tensor(spin_ket(1), coherent_ket(4, 1.3))
    assert _as_set(apply_cp(k, 1, 4)) == _as_set(k)


def test_cp_down_flips():
    k = tensor(spin_ket(1, 0, 1), coherent_ket(4, 1.3))
    out = apply_cp(k, 1, 4)
    assert out.terms[0].amps == (-1.3,)


@settings(max_examples=30, deadline=None)
@given(kets())
def test_cp_involution(k):
    twice = apply_cp(apply_cp(k, 1, 4), 1, 4)
    assert abs(inner_product(twice - k, twice - k)) < 1e-20 + 1e-12 * k.norm() ** 2


def test_cp_unknown_labels():
    k = tensor(spin_ket(1), coherent_ket(4, 1.0))
    with pytest.raises(UnknownIndex):
        apply_cp(k, 7, 4)
    with pytest.raises(UnknownMode):
        apply_cp(k, 1, 9)


def test_beamsplitter_amplitudes():
    a, b = 1.2, -0.4 + 0.3j
    out = apply_beamsplitter(tensor(coherent_ket(4, a), coherent_ket(5, b)), 4, 5)
    ai, aj = out.terms[0].amps
    assert ai == pytest.approx((a + b) * S) and aj == pytest.approx((a - b) * S)


def test_beamsplitter_equal_inputs():
    out = apply_beamsplitter(tensor(coherent_ket(4, 0.8), coherent_ket(5, 0.8)), 4, 5)
    assert out.terms[0].amps[0] == pytest.approx(math.sqrt(2) * 0.8)
    assert out.terms[0].amps[1] == pytest.approx(0.0)


def test_beamsplitter_same_mode():
    with pytest.raises(SameMode):
        apply_beamsplitter(coherent_ket(4, 1.0), 4, 4)


def test_beamsplitter_keeps_term_count():
    k = from_terms((1,), (4, 5), [(1, (Spin.UP,), (1, 0.5)), (1, (Spin.DOWN,), (-1, 0.5)), (1, (Spin.UP,), (1, -0.5))])
    assert len(apply_beamsplitter(k, 4, 5)) == 3


def test_mw_rules():
    up = spin_vector(apply_mw_pi2(spin_ket(2), 2))
    down = spin_vector(apply_mw_pi2(spin_ket(2, 0, 1), 2))
    assert np.allclose(up, [S, S]) and np.allclose(down, [S, -S])
    assert np.allclose(MW_PI2 @ MW_PI2, np.eye(2))


@pytest.mark.parametrize("op", list(CorrectionOp))
def test_correction_matrices_unitary(op):
    m = op.matrix
    assert np.allclose(m @ m.conj().T, np.eye(2))
    sq = m @ m
    # involution up to a global phase
    assert np.allclose(sq, sq[0, 0] * np.eye(2)) and abs(abs(sq[0, 0]) - 1) < 1e-15


def test_bit_phase_flip_squares_to_minus_identity():
    assert np.allclose(CorrectionOp.BIT_PHASE_FLIP.matrix @ CorrectionOp.BIT_PHASE_FLIP.matrix, -np.eye(2))


def test_bit_flip_restores_target():
    a, b = 0.6, 0.8j
    swapped = spin_ket(1, b, a)  # a|down> + b|up>
    assert np.allclose(spin_vector(apply_correction(swapped, CorrectionOp.BIT_FLIP)), [a, b])


def test_identity_and_phase_flip_twice():
    k = spin_ket(1, 0.6, 0.8j)
    assert np.allclose(spin_vector(apply_correction(k, CorrectionOp.IDENTITY)), [0.6, 0.8j])
    twice = apply_correction(apply_correction(k, CorrectionOp.PHASE_FLIP), CorrectionOp.PHASE_FLIP)
    assert np.allclose(spin_vector(twice), [0.6, 0.8j])


def test_gates_act_on_mixtures():
    k = tensor(spin_ket(1, S, S), coherent_ket(4, 0.7))
    via_ket = HybridMixture.from_ket(apply_cp(k, 1, 4))
    via_mix = apply_cp(HybridMixture.from_ket(k), 1, 4)
    assert {d.key for d in via_ket.dyads} == {d.key for d in via_mix.dyads}


def test_gate_determinism():
    k = tensor(spin_ket(1, S, S), coherent_ket(4, 0.7), coherent_ket(5, -0.2))
    run = lambda: apply_mw_pi2(apply_beamsplitter(apply_cp(k, 1, 4), 4, 5), 1)
    assert run().terms == run().terms
