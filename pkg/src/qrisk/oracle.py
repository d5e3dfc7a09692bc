"""Classical ground truth for every risk measure.

Discrete values come from direct scans of the pmf.  Continuous references
use the untruncated law through ``scipy.stats`` quantiles and ``scipy``
quadrature.  Levels follow the tail convention: ``var(0.05)`` is the loss
quantile at 0.95, ``evar(0.05)`` the loss expectile at 0.95 and
``rvar(0.05, 0.005)`` the mean loss between the 0.95 and 0.995 quantiles.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import integrate, optimize

from . import __version__
from .distributions import ContinuousSpec, DiscretizedDistribution
from .errors import ConfigurationError, DegenerateWindowError

ORIENTATIONS = ("loss", "pnl")
MEASURES = ("var", "cvar", "rvar", "expectile")
# Weak CDF comparisons absorb cumulative-sum rounding.
CDF_TOL = 1e-9
GOLDEN_SCHEMA = "qrisk-oracle-golden/1"


def as_loss(dist: DiscretizedDistribution, orientation: str = "loss") -> DiscretizedDistribution:
    """The law of the loss variable, whichever way ``dist`` was loaded."""
    if orientation == "loss":
        return dist
    if orientation == "pnl":
        return dist.negated()
    raise ConfigurationError(f"unknown orientation {orientation!r}")


def _check_level(level: float, name: str = "level") -> float:
    level = float(level)
    if not 0 < level < 1:
        raise ConfigurationError(f"{name} must lie in (0, 1), got {level}")
    return level


# --------------------------------------------------------------------------
# discrete values
# --------------------------------------------------------------------------


def quantile_index(dist: DiscretizedDistribution, target: float) -> int:
    """Smallest index whose CDF reaches ``target`` (weak inequality)."""
    cdf = np.cumsum(dist.probs)
    hits = np.nonzero(cdf >= target - CDF_TOL)[0]
    return int(hits[0]) if len(hits) else dist.size - 1


def exact_quantile(dist: DiscretizedDistribution, target: float) -> float:
    return dist.value(quantile_index(dist, target))


def var_index(dist: DiscretizedDistribution, lam: float, orientation: str = "loss") -> int:
    """Loss-grid index of VaR at tail level ``lam``."""
    return quantile_index(as_loss(dist, orientation), 1 - _check_level(lam, "lambda"))


def exact_var(dist: DiscretizedDistribution, lam: float, orientation: str = "loss") -> float:
    loss = as_loss(dist, orientation)
    return loss.value(var_index(loss, lam))


def _window_mean(dist: DiscretizedDistribution, lo: int, hi: int) -> float:
    w = dist.probs[lo : hi + 1]
    mass = w.sum()
    if not mass > 0:
        raise DegenerateWindowError(f"no mass on indices {lo}..{hi}")
    return float(w @ dist.grid[lo : hi + 1] / mass)


def exact_cvar(dist: DiscretizedDistribution, lam: float, orientation: str = "loss") -> float:
    """Mean loss on the tail at or beyond VaR."""
    loss = as_loss(dist, orientation)
    return _window_mean(loss, var_index(loss, lam), loss.size - 1)


def rvar_window(dist: DiscretizedDistribution, level_a: float, level_b: float,
                orientation: str = "loss") -> tuple[int, int]:
    """(k2, k1): VaR indices at the larger and the smaller tail level."""
    _check_level(level_a), _check_level(level_b)
    if level_a == level_b:
        raise ConfigurationError("RVaR levels must differ")
    loss = as_loss(dist, orientation)
    hi_level, lo_level = max(level_a, level_b), min(level_a, level_b)
    return var_index(loss, hi_level), var_index(loss, lo_level)


def exact_rvar(dist: DiscretizedDistribution, level_a: float, level_b: float,
               orientation: str = "loss") -> float:
    loss = as_loss(dist, orientation)
    k2, k1 = rvar_window(loss, level_a, level_b)
    return _window_mean(loss, k2, k1)


def expectile_residual(dist: DiscretizedDistribution, alpha: float, e: float) -> float:
    """alpha E[(X-e)+] - (1-alpha) E[(e-X)+], strictly decreasing in e."""
    x = dist.grid
    return float(alpha * dist.probs @ np.maximum(x - e, 0) - (1 - alpha) * dist.probs @ np.maximum(e - x, 0))


def exact_expectile(dist: DiscretizedDistribution, alpha: float, tol: float = 1e-12) -> float:
    """Root of the expectile residual by plain bisection on [grid min, grid max]."""
    alpha = _check_level(alpha, "alpha")
    lo, hi = dist.lo, dist.hi
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if expectile_residual(dist, alpha, mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def exact_evar(dist: DiscretizedDistribution, alpha: float, orientation: str = "loss") -> float:
    """EVaR at tail level ``alpha``: the loss expectile at 1 - alpha."""
    return exact_expectile(as_loss(dist, orientation), 1 - _check_level(alpha, "alpha"))


def slope(alpha: float) -> float:
    return (2 * alpha - 1) / (1 - alpha)


def exact_h(dist: DiscretizedDistribution, alpha: float, x: float) -> float:
    """E[max((1+beta) X - beta x, X)] for the pmf."""
    beta = slope(alpha)
    g = dist.grid
    return float(dist.probs @ np.maximum((1 + beta) * g - beta * x, g))


def closed_form_h_normal(mu: float, sigma: float, alpha: float, x: float) -> float:
    """h for an untruncated normal law; Phi and phi via ``math.erf`` and ``math.exp``."""
    if not sigma > 0:
        raise ConfigurationError("sigma must be positive")
    beta = slope(alpha)
    z = (x - mu) / sigma
    cdf = 0.5 * (1 + math.erf(z / math.sqrt(2)))
    pdf = math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    return mu + beta * (1 - cdf) * (mu - x) + beta * sigma * pdf


# --------------------------------------------------------------------------
# continuous references
# --------------------------------------------------------------------------


def continuous_quantile(spec: ContinuousSpec, p: float) -> float:
    return float(spec.frozen().ppf(_check_level(p, "p")))


def _partial_mean(spec: ContinuousSpec, lo: float, hi: float) -> float:
    law = spec.frozen()
    lo = max(lo, law.ppf(1e-15))
    hi = min(hi, law.ppf(1 - 1e-15))
    val, _ = integrate.quad(lambda t: t * law.pdf(t), lo, hi, limit=200, epsabs=1e-13, epsrel=1e-12)
    return val


def continuous_var(spec: ContinuousSpec, lam: float) -> float:
    """Loss-orientation VaR of the untruncated law."""
    return continuous_quantile(spec, 1 - _check_level(lam, "lambda"))


def continuous_cvar(spec: ContinuousSpec, lam: float) -> float:
    q = continuous_var(spec, lam)
    return _partial_mean(spec, q, math.inf) / lam


def continuous_rvar(spec: ContinuousSpec, level_a: float, level_b: float) -> float:
    hi_level, lo_level = max(level_a, level_b), min(level_a, level_b)
    lo, hi = continuous_var(spec, hi_level), continuous_var(spec, lo_level)
    return _partial_mean(spec, lo, hi) / (hi_level - lo_level)


def continuous_expectile(spec: ContinuousSpec, alpha: float) -> float:
    alpha = _check_level(alpha, "alpha")
    law = spec.frozen()
    mean = float(law.mean())

    def residual(e):
        upper = _partial_mean(spec, e, math.inf) - e * law.sf(e)
        lower = e * law.cdf(e) - _partial_mean(spec, -math.inf, e)
        return alpha * upper - (1 - alpha) * lower

    lo, hi = law.ppf(1e-12), law.ppf(1 - 1e-12)
    return float(optimize.brentq(residual, min(lo, mean), max(hi, mean), xtol=1e-12))


def continuous_evar(spec: ContinuousSpec, alpha: float) -> float:
    return continuous_expectile(spec, 1 - _check_level(alpha, "alpha"))


# --------------------------------------------------------------------------
# reports and golden files
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleReport:
    measure: str
    levels: tuple
    discrete_value: float
    continuous_value: Optional[float]

    @property
    def discretization_gap(self) -> Optional[float]:
        if self.continuous_value is None:
            return None
        return abs(self.discrete_value - self.continuous_value)


def discrete_value(dist: DiscretizedDistribution, measure: str, levels: Sequence[float],
                   orientation: str = "loss") -> float:
    if measure == "var":
        return exact_var(dist, levels[0], orientation)
    if measure == "cvar":
        return exact_cvar(dist, levels[0], orientation)
    if measure == "rvar":
        return exact_rvar(dist, levels[0], levels[1], orientation)
    if measure == "expectile":
        return exact_evar(dist, levels[0], orientation)
    raise ConfigurationError(f"unknown measure {measure!r}")


def continuous_value(spec: ContinuousSpec, measure: str, levels: Sequence[float]) -> float:
    if measure == "var":
        return continuous_var(spec, levels[0])
    if measure == "cvar":
        return continuous_cvar(spec, levels[0])
    if measure == "rvar":
        return continuous_rvar(spec, levels[0], levels[1])
    if measure == "expectile":
        return continuous_evar(spec, levels[0])
    raise ConfigurationError(f"unknown measure {measure!r}")


def oracle_report(dist: DiscretizedDistribution, measure: str, levels: Sequence[float],
                  spec: Optional[ContinuousSpec] = None) -> OracleReport:
    """Discrete value on ``dist`` (loss orientation) and, given ``spec``, the continuous one."""
    levels = tuple(float(v) for v in levels)
    cont = continuous_value(spec, measure, levels) if spec is not None else None
    return OracleReport(measure, levels, discrete_value(dist, measure, levels), cont)


def golden_records(presets, n_values, level_sets, scale: str = "simulator") -> list[dict]:
    """One record per (preset, interval, n, measure, levels)."""
    records = []
    for preset in presets:
        for n in n_values:
            dist = preset.discretize(n, scale)
            for measure, levels in level_sets:
                rep = oracle_report(dist, measure, levels, preset.spec)
                records.append({
                    "preset": preset.name,
                    "interval": list(preset.interval(scale)),
                    "n_qubits": n,
                    "measure": measure,
                    "levels": list(rep.levels),
                    "discrete_value": rep.discrete_value,
                    "continuous_value": rep.continuous_value,
                })
    return records


def write_golden(path, records: list[dict], generator: str) -> None:
    payload = {
        "schema": GOLDEN_SCHEMA,
        "provenance": {
            "generator": generator,
            "package_version": __version__,
            "numpy": np.__version__,
            "method": "direct pmf scans; continuous values from scipy.stats quantiles and quad",
        },
        "records": records,
    }
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def read_golden(path) -> list[dict]:
    payload = json.loads(Path(path).read_text())
    if payload.get("schema") != GOLDEN_SCHEMA:
        raise ConfigurationError(f"unexpected golden schema {payload.get('schema')!r}")
    return payload["records"]


def report_dict(rep: OracleReport) -> dict:
    out = asdict(rep)
    out["discretization_gap"] = rep.discretization_gap
    return out
