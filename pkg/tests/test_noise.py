import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybridtele.errors import DegenerateGeometry, Unattainable
from hybridtele.metrics import fidelity
from hybridtele.noise import (
    NoiseParams,
    average_fidelity_bloch,
    average_fidelity_noisy,
    condition_and_trace,
    fidelity_vs_distance,
    loss_overlap,
    max_distance_for_fidelity,
    noisy_channel,
    noisy_pipeline,
    teleported_density,
    unravel_channel,
    unravelled_density,
)
from hybridtele.protocol import InputQubit, build_channel
from hybridtele.states import HybridMixture, STANDARD, spin_density

S = 1 / math.sqrt(2)
rates = st.floats(0, 2)
loss = st.floats(0, 0.7)


@st.composite
def qubits(draw, beta=0.5):
    theta = draw(st.floats(0, math.pi))
    phi = draw(st.floats(0, 2 * math.pi))
    return InputQubit.from_bloch(theta, phi, beta)


# -- channel ----------------------------------------------------------------


def test_noiseless_channel_is_pure_channel():
    mix = noisy_channel(1.5, NoiseParams())
    pure = HybridMixture.from_ket(build_channel(1.5))
    keys = {(d.ket.spins, d.ket.amps[:1], d.bra.spins, d.bra.amps[:1]) for d in mix.dyads if abs(d.weight) > 0}
    want = {(d.ket.spins, d.ket.amps, d.bra.spins, d.bra.amps) for d in pure.dyads}
    assert keys == want
    assert all(d.ket.amps[1] == 0 for d in mix.dyads)


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 3), rates, rates, st.floats(0, 1), st.floats(0, 1))
def test_channel_trace_and_hermitian(alpha, gp, g, tau, r):
    mix = noisy_channel(alpha, NoiseParams(gp, g, tau, r))
    assert mix.trace() == pytest.approx(1.0, abs=1e-10)
    assert mix.is_hermitian()


def test_full_relaxation_moves_population_up():
    rho = spin_density(noisy_channel(1.0, NoiseParams(gamma=1e3, tau=1.0)), STANDARD)
    assert rho[0, 0].real == pytest.approx(1.0) and abs(rho[1, 1]) < 1e-12


def test_coherence_factor():
    p = NoiseParams(gamma_phi=1.0, gamma=1.0, tau=0.1)
    assert p.coherence_factor == pytest.approx(math.exp(-0.25))
    assert p.coherence_factor == pytest.approx(0.7788007830714049)


def test_params_validation():
    with pytest.raises(ValueError):
        NoiseParams(gamma=-1)
    with pytest.raises(ValueError):
        NoiseParams(r=1.5)
    p = NoiseParams.from_distance(3e3, 25.5e3, c=3e8)
    assert p.t**2 + p.r**2 == pytest.approx(1.0)
    assert p.tau == pytest.approx(1e-5)


# -- pipeline and conditioning ----------------------------------------------


def test_noiseless_pipeline_recovers_target():
    q = InputQubit(0.6, 0.8j, 0.5)
    rho = condition_and_trace(noisy_pipeline(q, NoiseParams(), 1.5), 1.5, 0.5, NoiseParams())
    assert np.allclose(rho, np.outer(q.target, q.target.conj()), atol=1e-12)


@settings(max_examples=10, deadline=None)
@given(qubits(), rates, rates, st.floats(0, 1), loss)
def test_pipeline_trace_preserved(q, gp, g, tau, r):
    mix = noisy_pipeline(q, NoiseParams(gp, g, tau, r), 1.5)
    assert mix.trace() == pytest.approx(1.0, abs=1e-10)


def test_up_amplitude_only_is_unaffected():
    p = NoiseParams(0.7, 0.4, 1.0, 0.3)
    q = InputQubit(1, 0, 0.5)
    rho = condition_and_trace(noisy_pipeline(q, p, 1.5), 1.5, 0.5, p)
    assert np.allclose(rho, [[1, 0], [0, 0]], atol=1e-12)


def test_off_diagonal_reference_value():
    p = NoiseParams(gamma_phi=1.0, gamma=1.0, tau=0.1, r=0.02)
    q = InputQubit(S, S, 0.5)
    rho = condition_and_trace(noisy_pipeline(q, p, 1.5), 1.5, 0.5, p)
    # 0.5 exp(-0.25 - 0.03^2)
    assert rho[0, 1].real == pytest.approx(0.38905008884317737, abs=1e-12)


@settings(max_examples=12, deadline=None)
@given(qubits(), rates, rates, st.floats(0, 1), loss, st.sampled_from(["reduced", "standard"]))
def test_pipeline_matches_closed_form_both_routes(q, gp, g, tau, r, conv):
    p = NoiseParams(gp, g, tau, r)
    closed = teleported_density(q, p, 1.5, conv)
    via_mix = condition_and_trace(noisy_pipeline(q, p, 1.5), 1.5, 0.5, p, convention=conv)
    via_kets = unravelled_density(q, p, 1.5, conv)
    assert np.max(np.abs(via_mix - closed)) < 1e-10
    assert np.max(np.abs(via_kets - closed)) < 1e-10


def test_unravelling_reassembles_channel():
    p = NoiseParams(0.3, 0.5, 1.0, 0.2)
    mix = noisy_channel(1.2, p)
    rebuilt = None
    for w, ket in unravel_channel(1.2, p):
        part = HybridMixture.from_ket(ket).scaled(w)
        rebuilt = part if rebuilt is None else rebuilt + part
    assert np.allclose(spin_density(rebuilt, STANDARD), spin_density(mix, STANDARD), atol=1e-14)


def test_coherent_projection_approaches_ideal():
    # leakage between the non-orthogonal projectors decays like powers of exp(-beta^2)
    p = NoiseParams(0.2, 0.1, 1.0, 0.1)
    gaps = []
    for beta in (1.0, 2.0, 3.0):
        q = InputQubit(0.6, 0.8, beta)
        mix = noisy_pipeline(q, p, 3 * beta)
        ideal = condition_and_trace(mix, 3 * beta, beta, p)
        exact = condition_and_trace(mix, 3 * beta, beta, p, projection="coherent")
        gaps.append(np.max(np.abs(ideal - exact)))
    assert gaps[0] > 10 * gaps[1] > 100 * gaps[2]
    assert gaps[2] < 1e-7


def test_degenerate_conditioning():
    with pytest.raises(DegenerateGeometry):
        condition_and_trace(noisy_pipeline(InputQubit(1, 0, 1.0), NoiseParams(), 1.0), 1.0, 1.0, NoiseParams())


@settings(max_examples=100)
@given(qubits(), rates, rates, st.floats(0, 3), st.floats(0, 1), st.floats(0, 3))
def test_closed_form_trace_and_psd(q, gp, g, tau, r, alpha):
    rho = teleported_density(q, NoiseParams(gp, g, tau, r), alpha)
    assert abs(np.trace(rho) - 1) < 1e-14
    assert np.linalg.det(rho).real >= -1e-15
    assert np.min(np.linalg.eigvalsh(rho)) >= -1e-14


# -- averages ---------------------------------------------------------------


def test_average_noiseless():
    assert average_fidelity_noisy(NoiseParams(), 2.0) == pytest.approx(1.0)


def test_average_reference_value():
    p = NoiseParams(gamma_phi=1.0, gamma=1.0, tau=0.1, r=0.02)
    assert average_fidelity_noisy(p, 1.5) == pytest.approx(0.91017296223477817, abs=1e-14)


def test_average_loss_only():
    for r in (0.0, 0.3, 1.0):
        for a in (0.5, 2.0):
            val = average_fidelity_noisy(NoiseParams(r=r), a)
            assert val == pytest.approx(2 / 3 + math.exp(-(r * a) ** 2) / 3, abs=1e-14)


def test_standard_convention_average():
    p = NoiseParams(r=0.3)
    assert average_fidelity_noisy(p, 2.0, "standard") == pytest.approx(2 / 3 + math.exp(-2 * 0.36) / 3)
    assert loss_overlap(0.5, "standard") == pytest.approx(math.exp(-0.5))
    with pytest.raises(ValueError):
        loss_overlap(0.5, "other")


def test_average_matches_bloch_integral_of_fidelity():
    rng = np.random.default_rng(0)
    for _ in range(10):
        p = NoiseParams(*rng.uniform(0, 2, 3), r=rng.uniform(0, 1))
        alpha = rng.uniform(0, 3)
        assert abs(average_fidelity_noisy(p, alpha) - average_fidelity_bloch(p, alpha)) < 1e-8


def test_bloch_integral_uses_fidelity_functional():
    # the integrand agrees with the generic fidelity functional
    p = NoiseParams(0.4, 0.2, 1.0, 0.3)
    q = InputQubit(0.6, 0.8j, 1.0)
    rho = teleported_density(q, p, 1.3)
    assert fidelity(rho, q.target) == pytest.approx(np.vdot(q.target, rho @ q.target).real)


@settings(max_examples=100)
@given(rates, rates, st.floats(0, 2), st.floats(0, 1), st.floats(1e-3, 0.5))
def test_average_monotone_in_each_parameter(gp, g, tau, r, h):
    base = average_fidelity_noisy(NoiseParams(gp, g, tau, r), 1.5)
    assert average_fidelity_noisy(NoiseParams(gp + h, g, tau, r), 1.5) <= base + 1e-15
    assert average_fidelity_noisy(NoiseParams(gp, g + h, tau, r), 1.5) <= base + 1e-15
    assert average_fidelity_noisy(NoiseParams(gp, g, tau + h, r), 1.5) <= base + 1e-15
    assert average_fidelity_noisy(NoiseParams(gp, g, tau, min(1.0, r + h)), 1.5) <= base + 1e-15


def test_dephasing_dominates_relaxation():
    h = 1e-6

    def f(gpt, gt):
        return average_fidelity_noisy(NoiseParams(gamma_phi=gpt, gamma=gt, tau=1.0, r=0.02), 1.5)

    d_phi = (f(0.1 + h, 0.1) - f(0.1 - h, 0.1)) / (2 * h)
    d_rel = (f(0.1, 0.1 + h) - f(0.1, 0.1 - h)) / (2 * h)
    assert d_phi < d_rel < 0


# -- distance ---------------------------------------------------------------


def _curve(alpha, d0s, c=3e8):
    return fidelity_vs_distance(alpha, 1e4, 0.0, 25.5e3, c, d0s)


def test_distance_reference_points():
    assert _curve(1.0, [0.0])[0]["f_bar"] == pytest.approx(1.0)
    assert _curve(1.0, [3e3])[0]["f_bar"] == pytest.approx(0.91090701038346224, abs=1e-12)
    assert _curve(2.0, [15e3])[0]["f_bar"] == pytest.approx(0.68737152722567582, abs=1e-12)
    row = _curve(1.0, [3e3])[0]
    assert set(row) == {"d0_km", "tau_s", "r_sq", "f_bar", "benchmark"}
    with pytest.raises(ValueError):
        _curve(1.0, [])


def test_max_distance_examples():
    assert max_distance_for_fidelity(0.95, 1.0, 25.5e3) == pytest.approx(4522.593757055783, rel=1e-12)
    with pytest.raises(Unattainable):
        max_distance_for_fidelity(0.70, 1.0, 25.5e3)
    with pytest.raises(ValueError):
        max_distance_for_fidelity(0.6, 1.0, 25.5e3)


@settings(max_examples=50)
@given(st.floats(0.7, 0.999), st.floats(0.5, 3.0))
def test_max_distance_round_trip(f_target, alpha):
    try:
        d0 = max_distance_for_fidelity(f_target, alpha, 25.5e3)
    except Unattainable:
        assert -math.log(3 * f_target - 2) / alpha**2 >= 1
        return
    f = fidelity_vs_distance(alpha, 0.0, 0.0, 25.5e3, 3e8, [d0])[0]["f_bar"]
    assert f == pytest.approx(f_target, abs=1e-9)
