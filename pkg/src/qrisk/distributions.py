"""Discretised laws on a 2**n grid and their amplitude-loading circuits."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from .errors import ConfigurationError, DegenerateInputError
from .sim import ON_ONE, ON_ZERO, Circuit, ControlledRotationY, RegisterLayout, RotationY

FAMILIES = ("normal", "lognormal", "gamma")


@dataclass(frozen=True)
class ContinuousSpec:
    """A member of one of the three supported families.

    ``normal(mu, sigma)`` and ``lognormal(mu, sigma)`` take the standard
    deviation (of the underlying normal for the lognormal); ``gamma(p, q)``
    has shape ``p`` and rate ``q`` so its mean is ``p / q``.
    """

    family: str
    params: tuple[float, float]

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown family {self.family!r}")
        object.__setattr__(self, "params", tuple(float(v) for v in self.params))
        if len(self.params) != 2:
            raise ConfigurationError("every family takes exactly two parameters")
        first, second = self.params
        if self.family == "gamma" and first <= 0:
            raise ConfigurationError("gamma shape must be positive")
        if second <= 0:
            raise ConfigurationError(f"{self.family} scale parameter must be positive")

    @classmethod
    def normal(cls, mu: float, sigma: float) -> "ContinuousSpec":
        return cls("normal", (mu, sigma))

    @classmethod
    def lognormal(cls, mu: float, sigma: float) -> "ContinuousSpec":
        return cls("lognormal", (mu, sigma))

    @classmethod
    def gamma(cls, p: float, q: float) -> "ContinuousSpec":
        return cls("gamma", (p, q))

    def frozen(self):
        """The matching ``scipy.stats`` frozen distribution."""
        a, b = self.params
        if self.family == "normal":
            return stats.norm(loc=a, scale=b)
        if self.family == "lognormal":
            return stats.lognorm(s=b, scale=np.exp(a))
        return stats.gamma(a=a, scale=1.0 / b)

    def pdf(self, x):
        return self.frozen().pdf(x)

    @property
    def label(self) -> str:
        a, b = self.params
        return f"{self.family}({a:g},{b:g})"


@dataclass(frozen=True)
class DiscretizedDistribution:
    n_qubits: int
    a: float
    b: float
    probs: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", p)
        p.setflags(write=False)
        if self.n_qubits < 1:
            raise ConfigurationError("need at least one distribution qubit")
        if p.shape != (2**self.n_qubits,):
            raise ConfigurationError(
                f"expected {2**self.n_qubits} probabilities, got {p.shape}"
            )
        if not self.b > 0:
            raise ConfigurationError("grid step must be positive")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ConfigurationError("probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ConfigurationError(f"probabilities sum to {p.sum()!r}, not 1")

    @classmethod
    def from_pmf(cls, probs: Sequence[float], a: float = 0.0, b: float = 1.0) -> "DiscretizedDistribution":
        """Build from an explicit pmf, renormalising away rounding noise."""
        p = np.asarray(probs, dtype=float)
        n = int(round(np.log2(len(p))))
        if 2**n != len(p):
            raise ConfigurationError("pmf length must be a power of two")
        total = p.sum()
        if not total > 0:
            raise DegenerateInputError("pmf has no mass")
        return cls(n, float(a), float(b), p / total)

    @property
    def size(self) -> int:
        return 2**self.n_qubits

    @property
    def grid(self) -> np.ndarray:
        return self.a + self.b * np.arange(self.size)

    @property
    def lo(self) -> float:
        return self.a

    @property
    def hi(self) -> float:
        return self.a + self.b * (self.size - 1)

    def value(self, i) -> float:
        """Affine grid map i -> a + b*i."""
        return self.a + self.b * i

    def index_of(self, x: float) -> int:
        """Nearest grid index to ``x``, clipped to the support."""
        return int(np.clip(np.rint((x - self.a) / self.b), 0, self.size - 1))

    def mean(self) -> float:
        return float(self.probs @ self.grid)

    def negated(self) -> "DiscretizedDistribution":
        """Law of ``-X`` on the reflected grid (index i -> 2**n - 1 - i)."""
        return DiscretizedDistribution(self.n_qubits, -self.hi, self.b, self.probs[::-1].copy())


def discretize(spec: ContinuousSpec, interval: Sequence[float], n_qubits: int) -> DiscretizedDistribution:
    """Evaluate the density on 2**n equally spaced points of ``interval`` and normalise."""
    lo, hi = (float(v) for v in interval)
    if not lo < hi:
        raise ConfigurationError(f"empty interval [{lo}, {hi}]")
    if not 1 <= n_qubits <= 12:
        raise ConfigurationError("n_qubits must be between 1 and 12")
    size = 2**n_qubits
    b = (hi - lo) / (size - 1)
    grid = lo + b * np.arange(size)
    grid[-1] = hi
    dens = np.asarray(spec.pdf(grid), dtype=float)
    if not np.all(np.isfinite(dens)):
        raise DegenerateInputError(f"{spec.label} density is not finite on [{lo}, {hi}]")
    total = dens.sum()
    if not total > 0:
        raise DegenerateInputError(f"{spec.label} density vanishes on [{lo}, {hi}]")
    return DiscretizedDistribution(n_qubits, lo, b, dens / total)


@dataclass(frozen=True)
class Preset:
    name: str
    spec: ContinuousSpec
    simulator_interval: tuple[float, float]
    hardware_interval: tuple[float, float]

    def interval(self, scale: str = "simulator") -> tuple[float, float]:
        if scale == "simulator":
            return self.simulator_interval
        if scale == "hardware":
            return self.hardware_interval
        raise ConfigurationError(f"unknown interval scale {scale!r}")

    def discretize(self, n_qubits: int, scale: str = "simulator") -> DiscretizedDistribution:
        return discretize(self.spec, self.interval(scale), n_qubits)


# The lognormal sigma = 1/2 is read as the standard deviation of log(X).
PRESETS = {
    "normal-3-1": Preset("normal-3-1", ContinuousSpec.normal(3.0, 1.0), (0.0, 10.0), (0.0, 6.0)),
    "lognormal-0-0.5": Preset(
        "lognormal-0-0.5", ContinuousSpec.lognormal(0.0, 0.5), (0.0, 10.0), (0.0, 3.0)
    ),
    "gamma-1-1": Preset("gamma-1-1", ContinuousSpec.gamma(1.0, 1.0), (0.0, 10.0), (0.0, 3.0)),
}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown preset {name!r}; choose from {', '.join(PRESETS)}"
        ) from None


def loader_gates(probs: np.ndarray, qubits: Sequence[int]) -> list:
    """Binary-tree amplitude encoding of ``probs`` onto ``qubits`` (LSB first).

    The most significant qubit is split first; every node rotates its qubit by
    ``2 arccos(sqrt(left / node))`` conditioned on the prefix above it.
    Zero-angle rotations are omitted.
    """
    n = len(qubits)
    p = np.asarray(probs, dtype=float)
    gates = []
    for level in range(n):
        target = qubits[n - 1 - level]
        prefixes = 2**level
        block = p.reshape(prefixes, 2, -1).sum(axis=2)
        for prefix in range(prefixes):
            node = block[prefix].sum()
            if node <= 0:
                continue
            ratio = min(max(block[prefix, 0] / node, 0.0), 1.0)
            angle = 2.0 * np.arccos(np.sqrt(ratio))
            if angle == 0.0:
                continue
            if level == 0:
                gates.append(RotationY(target, angle))
                continue
            controls = []
            for j in range(level):
                bit = (prefix >> (level - 1 - j)) & 1
                controls.append((qubits[n - 1 - j], ON_ONE if bit else ON_ZERO))
            gates.append(ControlledRotationY(tuple(controls), target, angle))
    return gates


def loader_circuit(dist: DiscretizedDistribution, layout: Optional[RegisterLayout] = None) -> Circuit:
    """Circuit R with R|0> = sum_i sqrt(p_i) |i> on the distribution register."""
    if layout is None:
        layout = RegisterLayout.build(("distribution", dist.n_qubits))
    qubits = list(layout["distribution"])
    if len(qubits) != dist.n_qubits:
        raise ConfigurationError(
            f"layout has {len(qubits)} distribution qubits, pmf needs {dist.n_qubits}"
        )
    return Circuit(layout, loader_gates(dist.probs, qubits))
