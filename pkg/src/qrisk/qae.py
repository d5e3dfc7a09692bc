"""Amplitude-estimation engines: canonical (phase estimation), MLQAE and IQAE.

All engines consume an :class:`~qrisk.circuits.AOperator` and estimate the
probability ``a`` that its objective qubit reads 1.  Powers of the Grover
operator are evaluated with :class:`GroverPowers`, which applies
``Q = -A S0 A^dagger S_chi`` to the state vector using the prepared state
``A|0>`` for the ``A S0 A^dagger`` reflection.  The gate-level circuit from
:func:`~qrisk.circuits.grover_operator` produces the same vectors and is
available as ``kernel="circuit"``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from .circuits import AOperator, grover_operator
from .errors import ConfigurationError, ConvergenceError, ResourceError
from .sim import (
    MAX_QUBITS,
    Circuit,
    ControlledUnitary,
    Hadamard,
    InverseQFT,
    apply,
    make_rng,
    marginal,
    run_circuit,
    sample_counts,
)

logger = logging.getLogger(__name__)

VARIANTS = ("canonical", "mlqae", "iqae", "statevector")
MODES = ("exact", "sampled")
PROB_CLAMP = 1e-12
MLE_GRID = 100_000


@dataclass(frozen=True)
class QAEConfig:
    """Estimator choice and its precision knobs.

    ``m`` is the number of evaluation qubits (canonical) or the schedule
    depth (MLQAE powers 0, 1, 2, ..., 2**(m-1)).  ``shots`` is per circuit:
    per power for MLQAE and per round for IQAE.
    """

    variant: str = "iqae"
    m: int = 3
    shots: int = 1024
    epsilon: float = 0.05
    alpha_conf: float = 0.01
    mode: str = "sampled"
    seed: Optional[int] = 0
    max_shots: int = 1_000_000
    kernel: str = "reflection"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown QAE variant {self.variant!r}")
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown QAE mode {self.mode!r}")
        if self.m < 1:
            raise ConfigurationError("m must be at least 1")
        if self.shots < 1:
            raise ConfigurationError("shots must be at least 1")
        if not 0 < self.epsilon < 0.5:
            raise ConfigurationError("epsilon must lie in (0, 1/2)")
        if not 0 < self.alpha_conf < 1:
            raise ConfigurationError("alpha_conf must lie in (0, 1)")
        if self.kernel not in ("reflection", "circuit"):
            raise ConfigurationError(f"unknown Grover kernel {self.kernel!r}")

    def as_dict(self) -> dict:
        return {
            "variant": self.variant,
            "m": self.m,
            "shots": self.shots,
            "epsilon": self.epsilon,
            "alpha_conf": self.alpha_conf,
            "mode": self.mode,
            "seed": self.seed,
            "max_shots": self.max_shots,
        }


@dataclass
class QAEResult:
    estimate: float
    confidence_interval: Optional[tuple[float, float]] = None
    grover_calls: int = 0
    shots_used: int = 0
    raw_histogram: Optional[dict] = None
    variant: str = ""
    mode: str = ""
    powers: list = field(default_factory=list)
    hits: list = field(default_factory=list)

    def summary(self) -> dict:
        out = {
            "variant": self.variant,
            "mode": self.mode,
            "estimate": self.estimate,
            "grover_calls": self.grover_calls,
            "shots_used": self.shots_used,
        }
        if self.confidence_interval is not None:
            out["ci_low"], out["ci_high"] = self.confidence_interval
        return out


def _good_mask(n_qubits: int, objective: int) -> np.ndarray:
    return ((np.arange(2**n_qubits) >> objective) & 1).astype(bool)


class GroverPowers:
    """Objective probabilities of ``Q^k A|0>`` for a non-decreasing stream of ``k``."""

    def __init__(self, a_op: AOperator, kernel: str = "reflection"):
        self.a_op = a_op
        self.kernel = kernel
        start = run_circuit(a_op.circuit)
        self.psi = start.amplitudes
        self.good = _good_mask(a_op.layout.total_qubits, a_op.objective_qubit)
        self._k = 0
        self._state = start
        self._cache: dict[int, float] = {}
        self._q = grover_operator(a_op) if kernel == "circuit" else None

    def step(self, vec: np.ndarray) -> np.ndarray:
        """One application of Q to a raw amplitude vector (or a batch of rows)."""
        out = np.array(vec, dtype=complex, copy=True)
        out[..., self.good] *= -1
        overlap = out @ self.psi.conj()
        return 2 * np.multiply.outer(overlap, self.psi) - out

    def state(self, k: int) -> np.ndarray:
        if k < self._k:
            self._k, self._state = 0, run_circuit(self.a_op.circuit)
        while self._k < k:
            if self._q is not None:
                self._state = apply(self._state, self._q)
            else:
                self._state.amplitudes = self.step(self._state.amplitudes)
            self._k += 1
        return self._state.amplitudes

    def probability(self, k: int) -> float:
        if k not in self._cache:
            amps = self.state(k)
            self._cache[k] = float(np.sum(np.abs(amps[self.good]) ** 2))
        return self._cache[k]


# --------------------------------------------------------------------------
# statevector readout
# --------------------------------------------------------------------------


def statevector_qae(a_op: AOperator) -> QAEResult:
    """Exact objective probability read straight from ``A|0>``; no Grover calls."""
    a = GroverPowers(a_op).probability(0)
    return QAEResult(a, (a, a), 0, 0, None, "statevector", "exact", [0], [a])


# --------------------------------------------------------------------------
# canonical QAE
# --------------------------------------------------------------------------


def canonical_circuit(a_op: AOperator, m: int) -> Circuit:
    """Hadamards, A, controlled Q^(2^j) on evaluation qubit j, inverse QFT."""
    layout = a_op.layout.extend("estimation-ancilla", m)
    anc = list(layout["estimation-ancilla"])
    circ = Circuit(layout, [Hadamard(q) for q in anc])
    circ.extend(a_op.circuit.gates)
    q = grover_operator(a_op)
    for j, qubit in enumerate(anc):
        circ.append(ControlledUnitary(qubit, q.power(2**j)))
    circ.append(InverseQFT(anc))
    return circ


def canonical_outcomes(a_op: AOperator, m: int, kernel: str = "reflection") -> np.ndarray:
    """Exact probabilities of every evaluation-register outcome y in [0, 2**m)."""
    total = a_op.layout.total_qubits + m
    if total > MAX_QUBITS:
        raise ResourceError(f"canonical QAE needs {total} qubits, budget is {MAX_QUBITS}")
    size = 2**m
    if kernel == "circuit":
        circ = canonical_circuit(a_op, m)
        return marginal(run_circuit(circ), list(circ.layout["estimation-ancilla"]))
    # Row r holds the system state for evaluation-register value r.
    powers = GroverPowers(a_op)
    rows = np.tile(powers.psi / math.sqrt(size), (size, 1))
    for j in range(m):
        sel = (np.arange(size) >> j) & 1 == 1
        block = rows[sel]
        for _ in range(2**j):
            block = powers.step(block)
        rows[sel] = block
    rows = np.fft.fft(rows, axis=0, norm="ortho")
    probs = np.sum(np.abs(rows) ** 2, axis=1)
    return probs / probs.sum()


def _fold(values: dict) -> dict:
    """Merge outcomes y and 2**m - y, which map to the same amplitude."""
    folded: dict[float, float] = {}
    for a, w in values.items():
        key = round(a, 12)
        folded[key] = folded.get(key, 0) + w
    return folded


def canonical_qae(a_op: AOperator, m: int, shots: int, mode: str = "exact", rng=None,
                  kernel: str = "reflection") -> QAEResult:
    probs = canonical_outcomes(a_op, m, kernel)
    size = 2**m
    if mode == "exact":
        weights = {y: float(p) for y, p in enumerate(probs)}
    else:
        counts = sample_counts(probs, m, shots, make_rng(rng))
        weights = {int(k, 2): v for k, v in counts.items()}
    by_amp: dict[float, float] = {}
    for y, w in weights.items():
        by_amp[math.sin(math.pi * y / size) ** 2] = by_amp.get(math.sin(math.pi * y / size) ** 2, 0) + w
    folded = _fold(by_amp)
    best = max(folded.items(), key=lambda kv: (kv[1], -kv[0]))[0]
    # snap back to the exact grid value sin^2(pi y / 2^m)
    y_best = min(range(size // 2 + 1), key=lambda y: abs(math.sin(math.pi * y / size) ** 2 - best))
    estimate = math.sin(math.pi * y_best / size) ** 2
    return QAEResult(
        estimate,
        None,
        shots * (size - 1),
        shots,
        weights,
        "canonical",
        mode,
        [2**j for j in range(m)],
        [],
    )


# --------------------------------------------------------------------------
# maximum-likelihood QAE
# --------------------------------------------------------------------------


def mlqae_schedule(m: int) -> list[int]:
    return [0] + [2**j for j in range(m)]


def _log_likelihood(theta, powers, hits, shots):
    theta = np.asarray(theta, dtype=float)
    total = np.zeros_like(theta)
    for k, h in zip(powers, hits):
        p = np.clip(np.sin((2 * k + 1) * theta) ** 2, PROB_CLAMP, 1 - PROB_CLAMP)
        total += h * np.log(p) + (shots - h) * np.log(1 - p)
    return total


def mle_theta(powers, hits, shots) -> float:
    """Grid search over [0, pi/2] followed by a bounded scalar refinement."""
    grid = np.linspace(0.0, np.pi / 2, MLE_GRID)
    ll = _log_likelihood(grid, powers, hits, shots)
    j = int(np.argmax(ll))
    lo, hi = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
    res = minimize_scalar(
        lambda t: -float(_log_likelihood(t, powers, hits, shots)),
        bounds=(lo, hi),
        method="bounded",
        options={"xatol": 1e-13},
    )
    best = float(res.x) if -res.fun >= ll[j] else float(grid[j])
    return best


def mlqae(a_op: AOperator, m: int, shots: int, mode: str = "exact", rng=None,
          kernel: str = "reflection") -> QAEResult:
    powers = mlqae_schedule(m)
    oracle = GroverPowers(a_op, kernel)
    gen = make_rng(rng) if mode == "sampled" else None
    hits = []
    for k in powers:
        p = oracle.probability(k)
        hits.append(shots * p if mode == "exact" else int(gen.binomial(shots, min(max(p, 0.0), 1.0))))
    theta = mle_theta(powers, hits, shots)
    return QAEResult(
        float(np.sin(theta) ** 2),
        None,
        shots * sum(powers),
        shots * len(powers),
        None,
        "mlqae",
        mode,
        powers,
        hits,
    )


# --------------------------------------------------------------------------
# iterative QAE
# --------------------------------------------------------------------------


def _find_next_k(k: int, upper: bool, theta_lo: float, theta_hi: float, min_ratio: float = 2.0):
    """Largest K = 4k+2 >= min_ratio*K_old keeping K*[theta_lo, theta_hi] in one half circle.

    Angles are in units of full turns, so theta lies in [0, 1/4].
    """
    old = 4 * k + 2
    width = theta_hi - theta_lo
    if width <= 0:
        return k, upper
    max_scaling = int(1 / (2 * width))
    scaling = max_scaling - (max_scaling - 2) % 4
    while scaling >= min_ratio * old:
        lo = scaling * theta_lo - int(scaling * theta_lo)
        hi = scaling * theta_hi - int(scaling * theta_hi)
        if lo <= hi <= 0.5 and lo <= 0.5:
            return (scaling - 2) // 4, True
        if hi >= 0.5 and hi >= lo >= 0.5:
            return (scaling - 2) // 4, False
        scaling -= 4
    return k, upper


def iqae(a_op: AOperator, epsilon: float, alpha_conf: float, shots: int, mode: str = "exact",
         rng=None, max_shots: int = 1_000_000, kernel: str = "reflection") -> QAEResult:
    """Iterative QAE with Chernoff-Hoeffding intervals.

    Each round picks the largest admissible power k, measures Q^k A|0>
    (pooling rounds that repeat k), and narrows the angle interval.  Stops
    once the amplitude interval's half-width is at most ``epsilon``.
    """
    oracle = GroverPowers(a_op, kernel)
    gen = make_rng(rng) if mode == "sampled" else None
    rounds = max(1, math.ceil(math.log2(math.pi / (8 * epsilon))))
    theta_lo, theta_hi = 0.0, 0.25
    a_lo, a_hi = 0.0, 1.0
    upper = True
    k = 0
    powers: list[int] = []
    hits: list[float] = []
    total_shots = 0
    calls = 0
    while (a_hi - a_lo) / 2 > epsilon:
        if total_shots + shots > max_shots:
            raise ConvergenceError(
                f"IQAE used {total_shots} shots without reaching half-width {epsilon}",
                interval=(a_lo, a_hi),
            )
        k, upper = _find_next_k(k, upper, theta_lo, theta_hi)
        p = oracle.probability(k)
        one = shots * p if mode == "exact" else int(gen.binomial(shots, min(max(p, 0.0), 1.0)))
        powers.append(k)
        hits.append(one)
        total_shots += shots
        calls += shots * k

        pooled_shots, pooled_ones = 0, 0.0
        for kk, hh in zip(reversed(powers), reversed(hits)):
            if kk != k:
                break
            pooled_shots += shots
            pooled_ones += hh
        freq = pooled_ones / pooled_shots
        half = math.sqrt(math.log(2 * rounds / alpha_conf) / (2 * pooled_shots))
        lo_a, hi_a = max(0.0, freq - half), min(1.0, freq + half)

        if upper:
            t_min = math.acos(1 - 2 * lo_a) / (2 * math.pi)
            t_max = math.acos(1 - 2 * hi_a) / (2 * math.pi)
        else:
            t_min = 1 - math.acos(1 - 2 * hi_a) / (2 * math.pi)
            t_max = 1 - math.acos(1 - 2 * lo_a) / (2 * math.pi)
        scaling = 4 * k + 2
        new_hi = (int(scaling * theta_hi) + t_max) / scaling
        new_lo = (int(scaling * theta_lo) + t_min) / scaling
        theta_lo, theta_hi = max(theta_lo, new_lo), min(theta_hi, new_hi)
        ends = (math.sin(2 * math.pi * theta_lo) ** 2, math.sin(2 * math.pi * theta_hi) ** 2)
        a_lo, a_hi = min(ends), max(ends)
        logger.debug("iqae round k=%d freq=%.6f a=[%.6f, %.6f]", k, freq, a_lo, a_hi)
    estimate = (a_lo + a_hi) / 2
    return QAEResult(
        estimate,
        (a_lo, a_hi),
        calls,
        total_shots,
        None,
        "iqae",
        mode,
        powers,
        hits,
    )


def estimate(a_op: AOperator, config: QAEConfig, rng=None) -> QAEResult:
    """Run the estimator named by ``config``; ``rng`` overrides ``config.seed``."""
    if rng is None and config.mode == "sampled":
        rng = make_rng(config.seed)
    if config.variant == "statevector":
        return statevector_qae(a_op)
    if config.variant == "canonical":
        return canonical_qae(a_op, config.m, config.shots, config.mode, rng, config.kernel)
    if config.variant == "mlqae":
        return mlqae(a_op, config.m, config.shots, config.mode, rng, config.kernel)
    return iqae(a_op, config.epsilon, config.alpha_conf, config.shots, config.mode, rng,
                config.max_shots, config.kernel)
