"""Quantum pipelines for VaR, CVaR, RVaR and expectile-based EVaR.

Every pipeline works on the loss variable: a distribution loaded in P&L
orientation is reflected first, so reported values do not depend on the
orientation.  Levels use the tail convention of :mod:`qrisk.oracle`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional


from .circuits import (
    ExpectileParams,
    cdf_a_operator,
    cvar_a_operator,
    expectile_a_operator,
    rvar_a_operator,
    window_a_operator,
)
from .distributions import DiscretizedDistribution
from .errors import ConfigurationError, IllConditionedError, InconsistentQuantilesError
from .oracle import CDF_TOL, as_loss
from .qae import QAEConfig, QAEResult, estimate
from .sim import make_rng

logger = logging.getLogger(__name__)

GAMMA_VAR = math.pi / 8
GAMMA_EXPECTILE = math.pi / 4
MASS_FLOOR = 1e-4
DEFAULT_QAE = QAEConfig(variant="mlqae", m=4, shots=1024, mode="exact")


@dataclass(frozen=True)
class RiskLevels:
    """Tail levels: VaR/CVaR ``lambda_var``, EVaR ``alpha_exp``, RVaR pair."""

    lambda_var: float = 0.05
    alpha_exp: float = 0.05
    alpha_rvar: float = 0.05
    beta_rvar: float = 0.005

    def __post_init__(self):
        for name in ("lambda_var", "alpha_exp", "alpha_rvar", "beta_rvar"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ConfigurationError(f"{name} must lie in (0, 1), got {v}")
        if self.alpha_rvar == self.beta_rvar:
            raise ConfigurationError("RVaR levels must differ")

    def for_measure(self, measure: str) -> tuple:
        if measure in ("var", "cvar"):
            return (self.lambda_var,)
        if measure == "expectile":
            return (self.alpha_exp,)
        if measure == "rvar":
            return (self.alpha_rvar, self.beta_rvar)
        raise ConfigurationError(f"unknown measure {measure!r}")


@dataclass(frozen=True)
class BisectionConfig:
    """Iteration cap and tolerances; ``None`` tolerances default to half a grid step."""

    max_iterations: int = 30
    epsilon: Optional[float] = None
    delta: Optional[float] = None

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be at least 1")
        for name in ("epsilon", "delta"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ConfigurationError(f"{name} must be positive")

    def resolved(self, b: float) -> tuple[float, float]:
        eps = self.epsilon if self.epsilon is not None else b / 2
        delta = self.delta if self.delta is not None else b / 2
        return eps, delta


@dataclass
class RiskResult:
    measure: str
    value: float
    grid_resolution: float
    iterations: int = 0
    converged: bool = True
    orientation: str = "loss"
    levels: tuple = ()
    qae: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    @property
    def grover_calls(self) -> int:
        return sum(r.grover_calls for r in self.qae)

    @property
    def shots_used(self) -> int:
        return sum(r.shots_used for r in self.qae)


class _Estimator:
    """Runs QAE calls from one seeded generator and keeps their diagnostics."""

    def __init__(self, config: QAEConfig, rng=None):
        self.config = config
        self.rng = make_rng(config.seed if rng is None else rng)
        self.log: list[QAEResult] = []

    def __call__(self, a_op) -> float:
        res = estimate(a_op, self.config, self.rng)
        self.log.append(res)
        return min(max(res.estimate, 0.0), 1.0)


def _estimator(qae_config, rng) -> _Estimator:
    if isinstance(qae_config, _Estimator):
        return qae_config
    return _Estimator(qae_config or DEFAULT_QAE, rng)


# --------------------------------------------------------------------------
# VaR
# --------------------------------------------------------------------------


def quantum_quantile_index(dist: DiscretizedDistribution, target: float, qae_config=None, rng=None) -> int:
    """Binary search for the smallest index whose estimated CDF reaches ``target``."""
    est = _estimator(qae_config, rng)
    lo, hi = 0, dist.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        cdf = est(cdf_a_operator(dist, mid + 1))
        if cdf >= target - CDF_TOL:
            hi = mid
        else:
            lo = mid + 1
    return lo


def quantum_quantile(dist: DiscretizedDistribution, target: float, qae_config=None, rng=None) -> RiskResult:
    """Smallest grid value whose estimated CDF is at least ``target``."""
    if not 0 < target < 1:
        raise ConfigurationError(f"CDF target must lie in (0, 1), got {target}")
    est = _estimator(qae_config, rng)
    k = quantum_quantile_index(dist, target, est)
    return RiskResult("quantile", dist.value(k), dist.b, len(est.log), levels=(target,),
                      qae=est.log, details={"index": k})


def quantum_var(dist: DiscretizedDistribution, level: float, qae_config=None, orientation: str = "loss",
                rng=None) -> RiskResult:
    """VaR at tail level ``level``: the loss quantile at ``1 - level``."""
    if not 0 < level < 1:
        raise ConfigurationError(f"level must lie in (0, 1), got {level}")
    loss = as_loss(dist, orientation)
    est = _estimator(qae_config, rng)
    k = quantum_quantile_index(loss, 1 - level, est)
    return RiskResult("var", loss.value(k), loss.b, len(est.log), True, orientation, (level,),
                      est.log, {"index": k})


# --------------------------------------------------------------------------
# CVaR and RVaR
# --------------------------------------------------------------------------


def _check_gamma(gamma: float) -> float:
    if not 0 < gamma <= 1:
        raise ConfigurationError(f"gamma must lie in (0, 1], got {gamma}")
    return float(gamma)


def _checked_mass(mass: float, what: str) -> float:
    if mass < MASS_FLOOR:
        raise IllConditionedError(
            f"estimated {what} mass {mass:.3g} is below the floor {MASS_FLOOR:g}", mass=mass
        )
    return mass


def quantum_cvar(dist: DiscretizedDistribution, level: float, gamma: float = GAMMA_VAR, qae_config=None,
                 orientation: str = "loss", rng=None) -> RiskResult:
    """Mean loss at or beyond VaR, from a tail-mass and a tail-payoff estimate."""
    gamma = _check_gamma(gamma)
    if not 0 < level < 1:
        raise ConfigurationError(f"level must lie in (0, 1), got {level}")
    loss = as_loss(dist, orientation)
    est = _estimator(qae_config, rng)
    k = quantum_quantile_index(loss, 1 - level, est)
    mass = _checked_mass(est(cdf_a_operator(loss, k, tail=True)), "tail")
    a_op = cvar_a_operator(loss, k, gamma)
    amp = est(a_op)
    total = a_op.invert_windowed(amp, mass)
    value = total / mass
    return RiskResult("cvar", value, loss.b, len(est.log), True, orientation, (level,), est.log,
                      {"index": k, "mass": mass, "amplitude": amp, "gamma": gamma})


def quantum_rvar(dist: DiscretizedDistribution, level_a: float, level_b: float, gamma: float = GAMMA_EXPECTILE,
                 qae_config=None, orientation: str = "loss", rng=None) -> RiskResult:
    """Mean loss between the VaR thresholds at two tail levels.

    ``k2`` comes from the larger level and ``k1`` from the smaller one; an
    estimate with ``k2 > k1`` is reported rather than swapped.
    """
    gamma = _check_gamma(gamma)
    for v in (level_a, level_b):
        if not 0 < v < 1:
            raise ConfigurationError(f"levels must lie in (0, 1), got {v}")
    if level_a == level_b:
        raise ConfigurationError("RVaR levels must differ")
    loss = as_loss(dist, orientation)
    est = _estimator(qae_config, rng)
    k2 = quantum_quantile_index(loss, 1 - max(level_a, level_b), est)
    k1 = quantum_quantile_index(loss, 1 - min(level_a, level_b), est)
    if k2 > k1:
        raise InconsistentQuantilesError(f"estimated window is empty: k2={k2} > k1={k1}")
    mass = _checked_mass(est(window_a_operator(loss, k2, k1)), "window")
    a_op = rvar_a_operator(loss, k1, k2, gamma)
    amp = est(a_op)
    value = a_op.invert_windowed(amp, mass) / mass
    return RiskResult("rvar", value, loss.b, len(est.log), True, orientation, (level_a, level_b), est.log,
                      {"k1": k1, "k2": k2, "mass": mass, "amplitude": amp, "gamma": gamma})


# --------------------------------------------------------------------------
# expectile
# --------------------------------------------------------------------------


def h_estimate(dist: DiscretizedDistribution, x: float, alpha_exp: float, gamma: float = GAMMA_EXPECTILE,
               qae_config=None, rng=None) -> float:
    """Estimate E[max((1+beta) X - beta x*, X)] with x snapped to the grid point x*."""
    if alpha_exp < 0.5:
        raise ConfigurationError("h is only encoded for alpha >= 1/2")
    est = _estimator(qae_config, rng)
    params = ExpectileParams(alpha_exp, dist.index_of(x), dist.n_qubits)
    a_op = expectile_a_operator(dist, params, gamma)
    return a_op.invert(est(a_op))


def _bisect(dist, alpha, gamma, est, bisect: BisectionConfig):
    eps, delta = bisect.resolved(dist.b)
    cache: dict[int, float] = {}

    def residual(x):
        i = dist.index_of(x)
        if i not in cache:
            cache[i] = h_estimate(dist, x, alpha, gamma, est) - dist.value(i)
        return cache[i]

    x1, x2 = dist.lo, dist.hi
    y1, y2 = residual(x1), residual(x2)
    bracket_valid = y1 >= 0 >= y2
    trace = [(x1, y1), (x2, y2)]
    mid = 0.5 * (x1 + x2)
    converged = False
    iterations = 0
    for iterations in range(1, bisect.max_iterations + 1):
        mid = 0.5 * (x1 + x2)
        y = residual(mid)
        trace.append((mid, y))
        if abs(y) < eps:
            converged = True
            break
        if y > 0:
            x1 = mid
        else:
            x2 = mid
        if x2 - x1 < delta:
            mid = 0.5 * (x1 + x2)
            converged = True
            break
    return mid, iterations, converged, {"bracket_valid": bracket_valid, "trace": trace,
                                         "evaluations": len(cache)}


def expectile(dist: DiscretizedDistribution, alpha_exp: float, gamma: float = GAMMA_EXPECTILE, qae_config=None,
              bisect: Optional[BisectionConfig] = None, rng=None) -> RiskResult:
    """Expectile of the loaded variable at level ``alpha_exp`` by bisection on h(x) - x.

    Levels below 1/2 use e_alpha(X) = -e_(1-alpha)(-X).  ``details["evar"]``
    holds the negated expectile.
    """
    if not 0 < alpha_exp < 1:
        raise ConfigurationError(f"alpha must lie in (0, 1), got {alpha_exp}")
    gamma = _check_gamma(gamma)
    bisect = bisect or BisectionConfig()
    est = _estimator(qae_config, rng)
    if alpha_exp < 0.5:
        x, it, ok, info = _bisect(dist.negated(), 1 - alpha_exp, gamma, est, bisect)
        x = -x
        info["reflected"] = True
    else:
        x, it, ok, info = _bisect(dist, alpha_exp, gamma, est, bisect)
        info["reflected"] = False
    if not ok:
        logger.warning("expectile bisection hit %d iterations without meeting tolerance", it)
    info["evar"] = -x
    info["gamma"] = gamma
    return RiskResult("expectile", x, dist.b, it, ok, "loss", (alpha_exp,), est.log, info)


def quantum_evar(dist: DiscretizedDistribution, level: float, gamma: float = GAMMA_EXPECTILE, qae_config=None,
                 orientation: str = "loss", bisect: Optional[BisectionConfig] = None, rng=None) -> RiskResult:
    """EVaR at tail level ``level``: the loss expectile at ``1 - level``."""
    res = expectile(as_loss(dist, orientation), 1 - level, gamma, qae_config, bisect, rng)
    res.measure, res.orientation, res.levels = "expectile", orientation, (level,)
    return res


def run_measure(dist: DiscretizedDistribution, measure: str, levels, gamma: Optional[float] = None,
                qae_config=None, orientation: str = "loss", rng=None,
                bisect: Optional[BisectionConfig] = None) -> RiskResult:
    """Dispatch on a measure name; ``gamma=None`` picks the per-measure default."""
    levels = tuple(levels)
    if gamma is None:
        gamma = default_gamma(measure)
    if measure == "var":
        return quantum_var(dist, levels[0], qae_config, orientation, rng)
    if measure == "cvar":
        return quantum_cvar(dist, levels[0], gamma, qae_config, orientation, rng)
    if measure == "rvar":
        if len(levels) != 2:
            raise ConfigurationError("RVaR needs two levels")
        return quantum_rvar(dist, levels[0], levels[1], gamma, qae_config, orientation, rng)
    if measure == "expectile":
        return quantum_evar(dist, levels[0], gamma, qae_config, orientation, bisect, rng)
    raise ConfigurationError(f"unknown measure {measure!r}")


def default_gamma(measure: str) -> float:
    return GAMMA_VAR if measure in ("var", "cvar") else GAMMA_EXPECTILE

