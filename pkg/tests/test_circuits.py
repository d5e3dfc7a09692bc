import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrisk.circuits import (
    GEQ,
    LT,
    AOperator,
    ComparatorSpec,
    ExpectileParams,
    cdf_a_operator,
    comparator,
    cvar_a_operator,
    expectile_a_operator,
    grover_operator,
    rvar_a_operator,
    window_a_operator,
)
from qrisk.distributions import DiscretizedDistribution, get_preset
from qrisk.errors import ConfigurationError
from qrisk.sim import apply, basis_state, probability_of, run_circuit


def objective_probability(a_op):
    return probability_of(run_circuit(a_op.circuit), a_op.objective_qubit, 1)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
@pytest.mark.parametrize("direction", [GEQ, LT])
def test_comparator_exhaustive(n, direction):
    for k in range(2**n + 1):
        circ = comparator(n, ComparatorSpec(k, direction))
        lay = circ.layout
        res = lay.qubit("comparator-result-1")
        for i in range(2**n):
            out = apply(basis_state(lay, i), circ)
            idx = int(np.argmax(np.abs(out.amplitudes)))
            assert abs(out.amplitudes[idx]) == pytest.approx(1.0)
            flag = (idx >> res) & 1
            want = int(i >= k) if direction == GEQ else int(i < k)
            assert flag == want, (n, k, i)
            # data untouched, ancillas returned to zero
            assert idx & ~(1 << res) == i


def test_comparator_threshold_bounds():
    with pytest.raises(ConfigurationError):
        comparator(3, ComparatorSpec(9))
    with pytest.raises(ConfigurationError):
        ComparatorSpec(1, "gt")


def classical_expectile_amplitude(dist, alpha, istar, gamma):
    beta = (2 * alpha - 1) / (1 - alpha)
    i = np.arange(dist.size)
    f = dist.grid + np.where(i >= istar, beta * dist.b * (i - istar), 0.0)
    f_min = dist.a
    f_max = dist.a + (1 + beta) * dist.b * (dist.size - 1) - beta * dist.b * istar
    z = 2 * (f - f_min) / (f_max - f_min) - 1
    return float(dist.probs @ np.sin(gamma * z + math.pi / 4) ** 2), f_min, f_max


@pytest.mark.parametrize("preset", ["normal-3-1", "lognormal-0-0.5", "gamma-1-1"])
@pytest.mark.parametrize("alpha,istar", [(0.5, 3), (0.8, 4), (0.95, 0), (0.95, 7)])
def test_expectile_operator_amplitude(preset, alpha, istar):
    d = get_preset(preset).discretize(3, "hardware")
    gamma = math.pi / 4
    a_op = expectile_a_operator(d, ExpectileParams(alpha, istar, 3), gamma)
    want, f_min, f_max = classical_expectile_amplitude(d, alpha, istar, gamma)
    assert objective_probability(a_op) == pytest.approx(want, abs=1e-12)
    assert (a_op.f_min, a_op.f_max) == pytest.approx((f_min, f_max))


def test_expectile_params_validation():
    with pytest.raises(ConfigurationError):
        ExpectileParams(0.4, 0, 3)
    with pytest.raises(ConfigurationError):
        ExpectileParams(0.8, 8, 3)
    assert ExpectileParams(0.8, 1, 3).slope == pytest.approx(3.0)


def test_payoff_inversion_identity():
    # sin^2(gamma z + pi/4) = 1/2 + sin(2 gamma z)/2, so small gamma inverts almost exactly
    d = get_preset("gamma-1-1").discretize(4)
    beta = 3.0
    istar = 5
    a_op = expectile_a_operator(d, ExpectileParams(0.8, istar, 4), 1e-3)
    h = float(d.probs @ np.maximum((1 + beta) * d.grid - beta * d.value(istar), d.grid))
    assert a_op.invert(objective_probability(a_op)) == pytest.approx(h, abs=1e-5)


def window_amplitude(dist, lo, hi, gamma):
    i = np.arange(dist.size)
    w = (i >= lo) & (i <= hi)
    ghat = gamma * (2 * i / (dist.size - 1) - 1) + math.pi / 4
    return float(np.sum(dist.probs[w] * np.sin(ghat[w]) ** 2)), float(dist.probs[w].sum())


@pytest.mark.parametrize("k2,k1", [(0, 7), (2, 5), (3, 3), (7, 7), (0, 0)])
def test_rvar_and_window_operators(k2, k1):
    d = get_preset("normal-3-1").discretize(3, "hardware")
    gamma = 0.3
    amp, mass = window_amplitude(d, k2, k1, gamma)
    assert objective_probability(rvar_a_operator(d, k1, k2, gamma)) == pytest.approx(amp, abs=1e-12)
    assert objective_probability(window_a_operator(d, k2, k1)) == pytest.approx(mass, abs=1e-12)


@pytest.mark.parametrize("k", [0, 4, 7])
def test_cvar_operator(k):
    d = get_preset("lognormal-0-0.5").discretize(3, "hardware")
    amp, _ = window_amplitude(d, k, 7, 0.4)
    assert objective_probability(cvar_a_operator(d, k, 0.4)) == pytest.approx(amp, abs=1e-12)


@pytest.mark.parametrize("k", range(9))
def test_cdf_operator(k):
    d = get_preset("gamma-1-1").discretize(3)
    below = float(d.probs[:k].sum())
    assert objective_probability(cdf_a_operator(d, k)) == pytest.approx(below, abs=1e-12)
    assert objective_probability(cdf_a_operator(d, k, tail=True)) == pytest.approx(1 - below, abs=1e-12)


def test_window_bounds_validated():
    d = get_preset("gamma-1-1").discretize(3)
    with pytest.raises(ConfigurationError):
        rvar_a_operator(d, 2, 5, 0.5)
    with pytest.raises(ConfigurationError):
        window_a_operator(d, 0, 8)


@given(st.floats(0.01, 0.99), st.floats(0.05, 0.95), st.floats(-3, 3), st.floats(0.1, 5))
def test_windowed_inversion_round_trip(mass, frac, f_min, width):
    # an amplitude built from the affine form inverts back to the window sum
    d = get_preset("gamma-1-1").discretize(2)
    a_op = AOperator(cvar_a_operator(d, 0, 0.5).circuit, 0, 0.5, f_min, f_min + width)
    s = mass * (f_min + frac * width)
    amp = a_op.gamma * (2 * (s - mass * f_min) / width - mass) + mass / 2
    assert a_op.invert_windowed(amp, mass) == pytest.approx(s, rel=1e-9, abs=1e-9)


def test_windowed_inversion_reduces_to_plain_on_full_window():
    d = get_preset("gamma-1-1").discretize(2)
    a_op = cvar_a_operator(d, 0, 0.5)
    for amp in (0.2, 0.5, 0.77):
        assert a_op.invert_windowed(amp, 1.0) == pytest.approx(a_op.invert(amp))


@pytest.mark.parametrize("builder", [
    lambda d: expectile_a_operator(d, ExpectileParams(0.8, 3, 3), math.pi / 4),
    lambda d: cvar_a_operator(d, 4, math.pi / 8),
    lambda d: cdf_a_operator(d, 5),
])
def test_grover_powers_follow_rotation_law(builder):
    d = get_preset("normal-3-1").discretize(3, "hardware")
    a_op = builder(d)
    a = objective_probability(a_op)
    theta = math.asin(math.sqrt(a))
    q = grover_operator(a_op)
    state = run_circuit(a_op.circuit)
    for k in range(1, 5):
        state = apply(state, q)
        assert probability_of(state, a_op.objective_qubit, 1) == pytest.approx(
            math.sin((2 * k + 1) * theta) ** 2, abs=1e-10
        )
