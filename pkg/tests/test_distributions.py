import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from qrisk.distributions import (
    PRESETS,
    ContinuousSpec,
    DiscretizedDistribution,
    discretize,
    get_preset,
    loader_circuit,
)
from qrisk.errors import ConfigurationError, DegenerateInputError
from qrisk.sim import marginal, run_circuit


def test_grid_endpoints_and_step():
    d = discretize(ContinuousSpec.gamma(1, 1), (0, 10), 7)
    assert d.grid[0] == 0.0 and d.grid[-1] == 10.0
    assert d.b == pytest.approx(10 / 127)
    assert d.value(5) == pytest.approx(5 * 10 / 127)
    assert d.probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_density_sampled_then_normalised():
    d = discretize(ContinuousSpec.normal(3, 1), (0, 6), 3)
    grid = np.linspace(0, 6, 8)
    dens = stats.norm(3, 1).pdf(grid)
    np.testing.assert_allclose(d.probs, dens / dens.sum(), rtol=1e-12)


def test_family_parametrisations():
    # lognormal sigma is the std of log X, gamma takes shape and rate
    assert ContinuousSpec.lognormal(0, 0.5).frozen().median() == pytest.approx(1.0)
    assert ContinuousSpec.lognormal(0, 0.5).frozen().mean() == pytest.approx(math.exp(0.125))
    assert ContinuousSpec.gamma(2, 4).frozen().mean() == pytest.approx(0.5)


def test_presets_table():
    assert set(PRESETS) == {"normal-3-1", "lognormal-0-0.5", "gamma-1-1"}
    for p in PRESETS.values():
        assert p.interval("simulator") == (0.0, 10.0)
    assert get_preset("normal-3-1").interval("hardware") == (0.0, 6.0)
    assert get_preset("gamma-1-1").interval("hardware") == (0.0, 3.0)
    with pytest.raises(ConfigurationError):
        get_preset("cauchy")


def test_invalid_inputs():
    with pytest.raises(ConfigurationError):
        ContinuousSpec("normal", (0, -1))
    with pytest.raises(ConfigurationError):
        discretize(ContinuousSpec.normal(0, 1), (1, 1), 3)
    with pytest.raises(ConfigurationError):
        discretize(ContinuousSpec.normal(0, 1), (0, 1), 0)
    with pytest.raises(DegenerateInputError):
        discretize(ContinuousSpec.normal(0, 0.01), (50, 60), 3)
    with pytest.raises(ConfigurationError):
        DiscretizedDistribution(2, 0.0, 1.0, np.array([0.5, 0.5, 0.1, -0.1]))
    with pytest.raises(ConfigurationError):
        DiscretizedDistribution(1, 0.0, 1.0, np.array([0.5, 0.6]))


def test_probs_are_read_only():
    d = get_preset("gamma-1-1").discretize(3)
    with pytest.raises(ValueError):
        d.probs[0] = 1.0


def test_negated_reflects_grid():
    d = get_preset("gamma-1-1").discretize(3)
    neg = d.negated()
    np.testing.assert_allclose(neg.grid, -d.grid[::-1])
    np.testing.assert_allclose(neg.probs, d.probs[::-1])
    assert neg.mean() == pytest.approx(-d.mean())


def test_index_of_clips_and_rounds():
    d = DiscretizedDistribution.from_pmf([0.25] * 4, a=1.0, b=0.5)
    assert d.index_of(1.24) == 0
    assert d.index_of(1.26) == 1
    assert d.index_of(-5) == 0
    assert d.index_of(99) == 3


pmfs = st.integers(1, 5).flatmap(
    lambda n: st.lists(st.floats(0, 1), min_size=2**n, max_size=2**n).filter(lambda v: sum(v) > 1e-6)
)


@given(pmfs)
def test_loader_prepares_sqrt_probabilities(weights):
    d = DiscretizedDistribution.from_pmf(weights)
    state = run_circuit(loader_circuit(d))
    np.testing.assert_allclose(marginal(state, range(d.n_qubits)), d.probs, atol=1e-12)
    # amplitudes are real and non-negative
    assert np.all(state.amplitudes.real > -1e-12)
    assert np.allclose(state.amplitudes.imag, 0)


def test_loader_omits_zero_angles():
    d = DiscretizedDistribution.from_pmf([1, 0, 0, 0])
    assert len(loader_circuit(d)) == 0
