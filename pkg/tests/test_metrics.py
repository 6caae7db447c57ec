import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridtele.errors import DegenerateGeometry, NotNormalized
from hybridtele.metrics import (
    BlochAngles,
    average_fidelity_vs_ratio,
    branch_amplitudes,
    classical_benchmark,
    failure_profile,
    fidelity,
    fidelity_map,
    log_branch_ratio,
    ratio_fidelity,
    ratio_state,
    square_grid,
)

from oracles import bloch_average_closed_form, bloch_average_monte_carlo

# 50-digit closed-form values, frozen
FROZEN = {
    0.1: 0.33466857780679415,
    0.5: 0.3679694123758117,
    2.0: 0.84199235309395293,
    10.0: 0.99334668577806794,
}
# ratio at which the average reaches the classical benchmark
SIGMA_STAR = 1.3219061775399012


# -- single-shot fidelity ---------------------------------------------------


def test_fidelity_identical():
    t = np.array([0.6, 0.8j])
    assert fidelity(t, t) == pytest.approx(1.0)
    assert fidelity(np.outer(t, t.conj()), t) == pytest.approx(1.0)


def test_fidelity_branch_limits():
    a, b = 0.6, 0.8
    assert fidelity(ratio_state(a, b, 1.0, 0.0), [a, b]) == pytest.approx(1.0)
    # M1 = 0 with real a, b gives (2ab)^2
    assert fidelity(ratio_state(a, b, 0.0, 1.0), [a, b]) == pytest.approx(4 * a * a * b * b)


def test_fidelity_not_normalized():
    with pytest.raises(NotNormalized):
        fidelity([1, 1], [1, 0])
    with pytest.raises(NotNormalized):
        fidelity(np.eye(2), [1, 0])
    with pytest.raises(NotNormalized):
        fidelity([1, 0], [1, 1])


@settings(max_examples=200)
@given(
    st.floats(0, math.pi),
    st.floats(0, 2 * math.pi, exclude_max=True),
    st.floats(-5, 5),
    st.floats(-5, 5),
)
def test_ratio_fidelity_equals_overlap(theta, phi, m1, m2):
    if abs(m1) + abs(m2) < 1e-3:
        return
    a, b = BlochAngles(theta, phi).amplitudes()
    direct = fidelity(ratio_state(a, b, m1, m2), [a, b])
    assert ratio_fidelity(a, b, m1, m2) == pytest.approx(direct, abs=1e-12)


def test_bloch_angles_validation():
    with pytest.raises(ValueError):
        BlochAngles(4.0, 0.0)
    with pytest.raises(ValueError):
        BlochAngles(1.0, 2 * math.pi)


# -- Bloch average ----------------------------------------------------------


def test_average_limits():
    assert abs(average_fidelity_vs_ratio(0.0) - 1 / 3) < 1e-8
    assert 1 - average_fidelity_vs_ratio(1e3) < 1e-5
    assert average_fidelity_vs_ratio(math.inf) == 1.0


@pytest.mark.parametrize("sigma,value", sorted(FROZEN.items()))
def test_average_frozen_values(sigma, value):
    assert abs(average_fidelity_vs_ratio(sigma) - value) < 1e-12


def test_average_at_one_is_half():
    assert abs(average_fidelity_vs_ratio(1.0) - 0.5) < 1e-12


def test_average_vs_closed_form_dense():
    sig = np.concatenate([np.logspace(-4, 4, 300), 1 + np.logspace(-14, -1, 40), 1 - np.logspace(-14, -1, 40)])
    got = average_fidelity_vs_ratio(sig)
    want = np.array([bloch_average_closed_form(s) for s in sig])
    assert np.max(np.abs(got - want)) < 1e-8


def test_average_monte_carlo_at_one():
    assert abs(average_fidelity_vs_ratio(1.0) - bloch_average_monte_carlo(1.0, 1_000_000, 17)) < 1e-3


def test_classical_crossing():
    assert average_fidelity_vs_ratio(SIGMA_STAR) == pytest.approx(2 / 3, abs=1e-12)


def test_average_monotone():
    vals = average_fidelity_vs_ratio(np.concatenate([[0.0], np.logspace(-3, 3, 100)]))
    assert np.all(np.diff(vals) >= -1e-14)


@settings(max_examples=60, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_reciprocal_identity(s):
    # 1 - F(1/s) = s^2 (1 - F(s))
    lhs = 1 - average_fidelity_vs_ratio(1 / s)
    rhs = s * s * (1 - average_fidelity_vs_ratio(s))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


def test_quadrature_refinement_stable():
    sig = np.concatenate([[0.0, 1.0], np.logspace(-3, 3, 61)])
    assert np.max(np.abs(average_fidelity_vs_ratio(sig) - average_fidelity_vs_ratio(sig, nodes=32))) < 1e-9


def test_average_symmetric_in_sign_and_rejects_nan():
    assert average_fidelity_vs_ratio(-2.0) == average_fidelity_vs_ratio(2.0)
    with pytest.raises(ValueError):
        average_fidelity_vs_ratio(math.nan)


# -- maps -------------------------------------------------------------------


def test_log_ratio_matches_wavefunctions():
    rng = np.random.default_rng(3)
    for x8, x9 in rng.uniform(-5, 5, (20, 2)):
        m1, m2 = branch_amplitudes(x8, x9, 3.0, 1.0)
        assert log_branch_ratio(x8, x9, 3.0, 1.0) == pytest.approx(math.log(m1 / m2), abs=1e-10)


@pytest.fixture(scope="module")
def map_a3():
    return fidelity_map(3.0, 1.0, square_grid(6.0, 101))


def _cell(fmap, x8, x9):
    return np.argmin(np.abs(fmap.x8 - x8)), np.argmin(np.abs(fmap.x9 - x9))


def test_map_complementary_peaks(map_a3):
    for s8 in (1, -1):
        for s9 in (1, -1):
            i, j = _cell(map_a3, 4 * s8, 2 * s9)
            assert map_a3.f_bar[i, j] > 0.99 and map_a3.f_bar_o[i, j] < 0.4
            i, j = _cell(map_a3, 2 * s8, 4 * s9)
            assert map_a3.f_bar_o[i, j] > 0.99 and map_a3.f_bar[i, j] < 0.4


def test_map_swap_symmetry(map_a3):
    # exchanging x8 and x9 inverts the ratio
    assert np.allclose(map_a3.f_bar, map_a3.f_bar_o.T, atol=1e-12)


def test_map_diagonal_dips(map_a3):
    diag = np.arange(len(map_a3.x8))
    assert np.allclose(map_a3.f_bar[diag, diag], 0.5, atol=1e-12)
    assert np.all(map_a3.best()[diag, diag] < classical_benchmark())


def test_map_values_in_range(map_a3):
    assert map_a3.f_bar.min() >= 1 / 3 - 1e-9 and map_a3.f_bar.max() <= 1 + 1e-12


def test_map_small_amplitude_expands_low_region(map_a3):
    small = fidelity_map(0.2, 0.2 / 3, square_grid(6.0, 101))
    assert small.classical_mask().sum() > map_a3.classical_mask().sum()


def test_map_degenerate():
    with pytest.raises(DegenerateGeometry):
        fidelity_map(1.0, 1.0, square_grid(2.0, 5))


def test_map_csv(map_a3):
    text = map_a3.to_csv()
    lines = text.splitlines()
    assert lines[0] == "x8,x9,f_bar,f_bar_o" and len(lines) == 101 * 101 + 1


# -- failure profile --------------------------------------------------------


def test_failure_profile_even():
    xs = np.linspace(-8, 8, 161)
    w = np.array([v for _, v in failure_profile(1.2, xs)])
    assert np.allclose(w, w[::-1])


def test_failure_profile_peak_scaling():
    for b in (0.8, 1.5, 2.5):
        (_, w), = failure_profile(b, [3 * b])
        assert w == pytest.approx(math.exp(-b * b), rel=1e-3)


def test_failure_profile_integrated_ratio():
    xs = np.linspace(-20, 20, 40001)
    tot = {b: np.trapezoid([v for _, v in failure_profile(b, xs)], xs) for b in (1.0, 1.5)}
    assert tot[1.5] / tot[1.0] == pytest.approx(math.exp(-(1.5**2 - 1.0)), rel=2e-3)


def test_failure_profile_normalized():
    xs = np.linspace(-10, 10, 2001)
    w = [v for _, v in failure_profile(1.0, xs, normalized=True)]
    assert np.trapezoid(w, xs) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        failure_profile(0.0, xs)


def test_classical_benchmark():
    assert classical_benchmark() == pytest.approx(0.6667, abs=1e-4)
